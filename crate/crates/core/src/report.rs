//! Run summaries: analytic targets next to measured values.

use std::fmt;

use crate::error::Result;
use crate::game::{regime_thresholds, GameParams, PopState, RegimeThresholds};
use crate::mrac::{
    check_admissible, reference_matrix, Admissibility, ControllerState, ErrorVector, GainMatrix,
};
use crate::roa::{compute_roa, default_epsilon_grid, maximize_m, AttractionEstimate};
use crate::scenario::ScenarioConfig;
use crate::sim::{
    detect_convergence, label_state, Phase, PhaseMode, RegimeLabel, Sample, Trajectory,
};

/// Normalized tolerance for "converged to the target".
pub const CONVERGENCE_TOL: f64 = 1e-3;
/// Trailing window for convergence checks.
pub const CONVERGENCE_WINDOW: f64 = 100.0;
/// Normalized tolerance for terminal-state labels.
pub const LABEL_TOL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSummary {
    pub index: usize,
    pub phase: Phase,
    pub terminal: Sample,
    /// Normalized ∞-distance of the terminal state to the desired point.
    pub distance_desired: f64,
    /// Same, to the all-defect point.
    pub distance_defect: f64,
    pub converged: bool,
    pub settle_time: Option<f64>,
    /// `None` when the terminal state is near no valid equilibrium.
    pub label: Option<RegimeLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoaSummary {
    /// Estimate at the configured `ε`.
    pub configured: AttractionEstimate,
    /// Largest `m` over the default `ε` grid.
    pub best: AttractionEstimate,
    pub initial: Admissibility,
    /// At the start of the adaptive phase, using `best`.
    pub adaptive_start: Option<Admissibility>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub params: GameParams,
    pub thresholds: RegimeThresholds,
    pub desired: PopState,
    pub defect: PopState,
    pub gains: Option<GainMatrix>,
    pub lyapunov_residual: Option<f64>,
    pub phases: Vec<PhaseSummary>,
    pub roa: Option<RoaSummary>,
    pub p_hat_min: f64,
    pub p_hat_max: f64,
    pub p_hat_violation: Option<(f64, f64)>,
    pub resource_violation: Option<(f64, f64)>,
    pub saturated_steps: usize,
    pub max_error_inf_final: f64,
    /// Largest increase of `V` between consecutive adaptive samples with `‖e‖₂ < m`.
    pub max_v_increase: Option<f64>,
}

/// Largest `V[i+1] − V[i]` over consecutive samples of the adaptive phase that
/// both satisfy `‖e‖₂ < m`. `None` if no such pair exists.
pub fn max_v_increase_within(traj: &Trajectory, adaptive_start: f64, m: f64) -> Option<f64> {
    traj.samples
        .windows(2)
        .filter(|w| w[0].t >= adaptive_start && w[0].error().norm() < m && w[1].error().norm() < m)
        .map(|w| w[1].v - w[0].v)
        .reduce(f64::max)
}

fn phase_summary(params: &GameParams, traj: &Trajectory, index: usize) -> PhaseSummary {
    let phase = traj.meta.phases[index];
    let part = traj.phase(index);
    let terminal = *part.last();
    let scale = params.r_max;
    let window = CONVERGENCE_WINDOW.min(phase.t_end - phase.t_start);
    let conv = if window > 0.0 {
        detect_convergence(&part, params.desired_state(), CONVERGENCE_TOL, window).ok()
    } else {
        None
    };
    let p_hat = match phase.mode {
        PhaseMode::Fixed { p_hat } => p_hat,
        PhaseMode::Adaptive => terminal.p_hat,
    };
    PhaseSummary {
        index,
        phase,
        terminal,
        distance_desired: terminal
            .plant()
            .normalized_distance(&params.desired_state(), scale),
        distance_defect: terminal
            .plant()
            .normalized_distance(&PopState::new(0.0, params.defector_resource()), scale),
        converged: conv.is_some_and(|c| c.converged),
        settle_time: conv.and_then(|c| c.settle_time),
        label: label_state(params, p_hat, terminal.plant(), LABEL_TOL),
    }
}

pub fn roa_summary(
    cfg: &ScenarioConfig,
    gains: GainMatrix,
    traj: Option<&Trajectory>,
) -> Result<RoaSummary> {
    let params = &cfg.params;
    let a = cfg.controller.a;
    let configured = compute_roa(params, &gains, a, cfg.controller.epsilon, cfg.controller.b);
    let best = maximize_m(params, &gains, a, cfg.controller.b, &default_epsilon_grid())?;
    let init = &cfg.initial;
    let ctrl = ControllerState::new(gains, a, init.p_hat0, params.p_star)?;
    let e0 = ErrorVector::new(init.x0 - init.xm0, init.y0 - init.ym0);
    let adaptive_start = traj.and_then(|t| {
        let start = cfg.schedule.adaptive_start()?;
        let s = t.sample_at(start)?;
        Some(check_admissible(
            &ctrl.with_p_hat(s.p_hat),
            s.error(),
            &best,
        ))
    });
    Ok(RoaSummary {
        initial: check_admissible(&ctrl, e0, &configured),
        configured,
        best,
        adaptive_start,
    })
}

pub fn summarize(cfg: &ScenarioConfig, traj: &Trajectory) -> Result<RunSummary> {
    let params = &cfg.params;
    let gains = traj.meta.gains;
    let roa = gains.map(|q| roa_summary(cfg, q, Some(traj))).transpose()?;
    let max_v_increase = match (&roa, cfg.schedule.adaptive_start()) {
        (Some(r), Some(start)) if r.best.usable => max_v_increase_within(traj, start, r.best.m),
        _ => None,
    };
    let flags = traj.meta.flags;
    Ok(RunSummary {
        name: cfg.name.clone(),
        params: *params,
        thresholds: regime_thresholds(params),
        desired: params.desired_state(),
        defect: PopState::new(0.0, params.defector_resource()),
        gains,
        lyapunov_residual: gains.map(|q| q.lyapunov_residual(&reference_matrix(params))),
        phases: (0..traj.meta.phases.len())
            .map(|i| phase_summary(params, traj, i))
            .collect(),
        roa,
        p_hat_min: traj.meta.p_hat_min,
        p_hat_max: traj.meta.p_hat_max,
        p_hat_violation: flags.p_hat_range.map(|e| (e.t, e.value)),
        resource_violation: flags.resource_box.map(|e| (e.t, e.value)),
        saturated_steps: flags.saturated_steps,
        max_error_inf_final: traj.last().error().norm_inf(),
        max_v_increase,
    })
}

fn fmt_estimate(f: &mut fmt::Formatter<'_>, label: &str, est: &AttractionEstimate) -> fmt::Result {
    write!(
        f,
        "  {label}: eps = {:.3e}, b = {}, k = {:.6e}, K = {:.6e}",
        est.epsilon, est.b, est.k, est.big_k
    )?;
    if est.usable {
        writeln!(f, ", m = {:.6e}, c = {:.6e}", est.m, est.c)
    } else {
        writeln!(
            f,
            " -> unusable estimate (k*eps = {:.3e} >= 1)",
            est.k * est.epsilon
        )
    }
}

fn fmt_admissible(a: &Admissibility) -> String {
    format!(
        "{} (slack {:.3e})",
        if a.admissible {
            "admissible"
        } else {
            "not admissible"
        },
        a.slack
    )
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        let th = &self.thresholds;
        if !self.name.is_empty() {
            writeln!(f, "scenario {}", self.name)?;
        }
        writeln!(
            f,
            "params: r = {}, alpha = {}, beta = {}, N = {}, R_m = {}, b_m = {}, p* = {}",
            p.r, p.alpha, p.beta, p.n_players, p.r_max, p.b_max, p.p_star
        )?;
        writeln!(
            f,
            "thresholds: e_c = {:.6}, e_d = {:.6}, p_lower = {:.6}, p_upper = {:.6}",
            th.e_c, th.e_d, th.p_lower, th.p_upper
        )?;
        let outside = if (0.0..=p.r_max).contains(&self.defect.y) {
            ""
        } else {
            " outside the state box"
        };
        writeln!(
            f,
            "targets: desired ({}, {:.6}), all-defect ({}, {:.6}){outside}",
            self.desired.x, self.desired.y, self.defect.x, self.defect.y
        )?;
        match (&self.gains, self.lyapunov_residual) {
            (Some(q), Some(res)) => writeln!(
                f,
                "Q = [[{:.10e}, {:.10e}], [{:.10e}, {:.10e}]], residual {:.3e}",
                q.q11, q.q12, q.q12, q.q22, res
            )?,
            _ => writeln!(f, "Q unavailable (reference system not Hurwitz)")?,
        }
        writeln!(f, "phases:")?;
        for ph in &self.phases {
            let mode = match ph.phase.mode {
                PhaseMode::Fixed { p_hat } => format!("fixed p_hat = {p_hat}"),
                PhaseMode::Adaptive => "adaptive".to_string(),
            };
            writeln!(
                f,
                "  [{}] t in [{}, {}], {mode}",
                ph.index, ph.phase.t_start, ph.phase.t_end
            )?;
            let s = &ph.terminal;
            writeln!(
                f,
                "      terminal x = {:.8}, y = {:.6}, p_hat = {:.6}, |e|inf = {:.3e}",
                s.x,
                s.y,
                s.p_hat,
                s.error().norm_inf()
            )?;
            writeln!(
                f,
                "      distance to desired {:.3e}, to all-defect {:.3e}, label {}",
                ph.distance_desired,
                ph.distance_defect,
                ph.label.map_or("none", |l| l.as_str())
            )?;
            match (ph.converged, ph.settle_time) {
                (true, Some(t)) => writeln!(
                    f,
                    "      converged to desired (tol {CONVERGENCE_TOL:e}), settled at t = {t}"
                )?,
                _ => writeln!(
                    f,
                    "      not converged to desired (tol {CONVERGENCE_TOL:e})"
                )?,
            }
        }
        writeln!(
            f,
            "p_hat range: [{:.6}, {:.6}]",
            self.p_hat_min, self.p_hat_max
        )?;
        match self.p_hat_violation {
            Some((t, v)) => writeln!(f, "  p_hat left [0, 1] at t = {t} (value {v})")?,
            None => writeln!(f, "  p_hat stayed in [0, 1]")?,
        }
        if self.saturated_steps > 0 {
            writeln!(f, "  projection active on {} steps", self.saturated_steps)?;
        }
        if let Some((t, v)) = self.resource_violation {
            writeln!(f, "resource left [0, R_m] at t = {t} (value {v})")?;
        }
        writeln!(f, "final |e|inf = {:.3e}", self.max_error_inf_final)?;
        if let Some(roa) = &self.roa {
            writeln!(f, "attraction estimate:")?;
            fmt_estimate(f, "configured", &roa.configured)?;
            fmt_estimate(f, "best over eps grid", &roa.best)?;
            writeln!(f, "  initial condition: {}", fmt_admissible(&roa.initial))?;
            if let Some(a) = &roa.adaptive_start {
                writeln!(f, "  adaptive start (best estimate): {}", fmt_admissible(a))?;
            }
        }
        match self.max_v_increase {
            Some(dv) => writeln!(f, "max V increase inside |e| < m: {dv:.3e}"),
            None => writeln!(f, "max V increase inside |e| < m: no samples inside"),
        }
    }
}

/// Text report for the `roa` command.
pub fn roa_report(cfg: &ScenarioConfig, gains: GainMatrix) -> Result<String> {
    use std::fmt::Write;
    let roa = roa_summary(cfg, gains, None)?;
    let a_m = reference_matrix(&cfg.params);
    let est = &roa.configured;
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(
        w,
        "A_m = [[{:.10e}, {:.10e}], [{:.10e}, {:.10e}]]",
        a_m[(0, 0)],
        a_m[(0, 1)],
        a_m[(1, 0)],
        a_m[(1, 1)]
    );
    let _ = writeln!(
        w,
        "Q = [[{:.10e}, {:.10e}], [{:.10e}, {:.10e}]]",
        gains.q11, gains.q12, gains.q12, gains.q22
    );
    let _ = writeln!(
        w,
        "Lyapunov residual = {:.3e}",
        gains.lyapunov_residual(&a_m)
    );
    let _ = writeln!(w, "lambda_min(Q) = {:.10e}", est.lambda_min_q);
    let _ = writeln!(w, "|Q|_F = {:.10e}", est.q_frobenius);
    let _ = writeln!(
        w,
        "a = {:e}, eps = {}, b = {}",
        est.adaptation_rate, est.epsilon, est.b
    );
    let _ = writeln!(
        w,
        "k1 = {:.10e}, k2 = {:.10e}, k3 = {:.10e}, k = {:.10e}",
        est.k1, est.k2, est.k3, est.k
    );
    let _ = writeln!(
        w,
        "l1 = {:.10e}, l2 = {:.10e}, K = {:.10e}",
        est.l1, est.l2, est.big_k
    );
    if est.usable {
        let _ = writeln!(w, "m = {:.10e}, c = {:.10e}", est.m, est.c);
    } else {
        let _ = writeln!(
            w,
            "unusable estimate: k*eps = {:.6e} >= 1",
            est.k * est.epsilon
        );
    }
    let best = &roa.best;
    let _ = writeln!(
        w,
        "best over eps grid: eps = {:.6e}, m = {:.10e}, c = {:.10e}",
        best.epsilon, best.m, best.c
    );
    let _ = writeln!(w, "initial condition: {}", fmt_admissible(&roa.initial));
    Ok(out)
}
