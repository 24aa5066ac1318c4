//! Fixed-step RK4 simulation of plant, reference model and update law.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{fixed_points, plant_field, FixedPointKind, GameParams, PopState};
use crate::mrac::{
    lyapunov_value, p_hat_dot, reference_gains, ControllerState, ErrorVector, GainMatrix,
};

/// Overshoot of `x` past `[0, 1]` that is snapped back instead of aborting.
pub const BOX_SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PhaseMode {
    /// Inspection held at a constant value.
    Fixed { p_hat: f64 },
    /// Inspection driven by the update law, continuing from the previous value.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub t_start: f64,
    pub t_end: f64,
    #[serde(flatten)]
    pub mode: PhaseMode,
}

impl Phase {
    pub fn fixed(t_start: f64, t_end: f64, p_hat: f64) -> Self {
        Phase {
            t_start,
            t_end,
            mode: PhaseMode::Fixed { p_hat },
        }
    }

    pub fn adaptive(t_start: f64, t_end: f64) -> Self {
        Phase {
            t_start,
            t_end,
            mode: PhaseMode::Adaptive,
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self.mode, PhaseMode::Adaptive)
    }

    /// Held value of a fixed phase.
    pub fn mode_p_hat(&self) -> Option<f64> {
        match self.mode {
            PhaseMode::Fixed { p_hat } => Some(p_hat),
            PhaseMode::Adaptive => None,
        }
    }
}

/// Contiguous inspection protocol; at most one adaptive phase, and only last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Phase>", into = "Vec<Phase>")]
pub struct Schedule {
    phases: Vec<Phase>,
}

impl Schedule {
    pub fn new(phases: Vec<Phase>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::InvalidSchedule("no phases".into()));
        }
        for (i, p) in phases.iter().enumerate() {
            if !(p.t_start.is_finite() && p.t_end.is_finite()) || p.t_end < p.t_start {
                return Err(Error::InvalidSchedule(format!(
                    "phase {i} has bad bounds [{}, {}]",
                    p.t_start, p.t_end
                )));
            }
            if let PhaseMode::Fixed { p_hat } = p.mode {
                if !p_hat.is_finite() || p_hat < 0.0 {
                    return Err(Error::InvalidSchedule(format!(
                        "phase {i} has p_hat {p_hat}"
                    )));
                }
            }
        }
        for (i, w) in phases.windows(2).enumerate() {
            if w[0].t_end != w[1].t_start {
                return Err(Error::InvalidSchedule(format!(
                    "phase {} ends at {} but phase {} starts at {}",
                    i,
                    w[0].t_end,
                    i + 1,
                    w[1].t_start
                )));
            }
        }
        let adaptive = phases.iter().filter(|p| p.is_adaptive()).count();
        if adaptive > 1 {
            return Err(Error::InvalidSchedule(
                "more than one adaptive phase".into(),
            ));
        }
        if adaptive == 1 && !phases.last().unwrap().is_adaptive() {
            return Err(Error::InvalidSchedule(
                "the adaptive phase must be last".into(),
            ));
        }
        Ok(Schedule { phases })
    }

    /// Constant inspection over `[0, horizon]`.
    pub fn constant(p_hat: f64, horizon: f64) -> Result<Self> {
        Schedule::new(vec![Phase::fixed(0.0, horizon, p_hat)])
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn start(&self) -> f64 {
        self.phases[0].t_start
    }

    pub fn end(&self) -> f64 {
        self.phases.last().unwrap().t_end
    }

    pub fn adaptive_start(&self) -> Option<f64> {
        self.phases
            .iter()
            .find(|p| p.is_adaptive())
            .map(|p| p.t_start)
    }

    /// Moves the end of the last phase to `horizon`.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        let mut phases = self.phases.clone();
        phases.last_mut().unwrap().t_end = horizon;
        Schedule::new(phases)
    }
}

impl TryFrom<Vec<Phase>> for Schedule {
    type Error = Error;

    fn try_from(phases: Vec<Phase>) -> Result<Self> {
        Schedule::new(phases)
    }
}

impl From<Schedule> for Vec<Phase> {
    fn from(s: Schedule) -> Self {
        s.phases
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum GainSource {
    /// Solve the Lyapunov equation for the reference matrix.
    Lyapunov,
    Explicit(GainMatrix),
}

/// Run-level controller settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    /// Adaptation rate `a`.
    pub a: f64,
    pub gains: GainSource,
    /// Project `p̂` onto `[0, 1]` during adaptation.
    #[serde(default)]
    pub clamp_p: bool,
}

impl ControllerSpec {
    pub fn resolve_gains(&self, params: &GameParams) -> Result<GainMatrix> {
        match self.gains {
            GainSource::Lyapunov => reference_gains(params),
            GainSource::Explicit(q) => Ok(q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    pub x0: f64,
    pub y0: f64,
    pub xm0: f64,
    pub ym0: f64,
    pub p_hat0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub step: f64,
    /// Final time.
    pub horizon: f64,
    /// Record every `record_stride`-th step (phase boundaries are always recorded).
    pub record_stride: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            step: 0.01,
            horizon: 5000.0,
            record_stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub p_hat: f64,
    pub e1: f64,
    pub e2: f64,
    pub v: f64,
    pub phase: usize,
}

impl Sample {
    pub fn plant(&self) -> PopState {
        PopState::new(self.x, self.y)
    }

    pub fn reference(&self) -> PopState {
        PopState::new(self.x_m, self.y_m)
    }

    pub fn error(&self) -> ErrorVector {
        ErrorVector::new(self.e1, self.e2)
    }
}

/// First recorded excursion of a monitored quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excursion {
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ViolationFlags {
    /// `p̂` left `[0, 1]`.
    pub p_hat_range: Option<Excursion>,
    /// Plant or reference resource left `[0, R_m]`.
    pub resource_box: Option<Excursion>,
    /// Adaptive steps that ended with `p̂` on a bound under projection.
    pub saturated_steps: usize,
}

impl ViolationFlags {
    pub fn is_empty(&self) -> bool {
        self.p_hat_range.is_none() && self.resource_box.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub step: f64,
    pub scheme: &'static str,
    pub y_scale: f64,
    pub gains: Option<GainMatrix>,
    pub adaptation_rate: f64,
    pub p_star: f64,
    pub phases: Vec<Phase>,
    pub flags: ViolationFlags,
    /// Extremes of `p̂` over every step, not just recorded samples.
    pub p_hat_min: f64,
    pub p_hat_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().unwrap()
    }

    /// Samples with `t_from ≤ t ≤ t_to`.
    pub fn window(&self, t_from: f64, t_to: f64) -> Trajectory {
        let samples = self
            .samples
            .iter()
            .filter(|s| s.t >= t_from && s.t <= t_to)
            .copied()
            .collect();
        Trajectory {
            samples,
            meta: self.meta.clone(),
        }
    }

    /// Samples covering phase `index`, including the state at its end.
    pub fn phase(&self, index: usize) -> Trajectory {
        let p = self.meta.phases[index];
        self.window(p.t_start, p.t_end)
    }

    /// Recorded sample at exactly time `t` (within half a step).
    pub fn sample_at(&self, t: f64) -> Option<&Sample> {
        let tol = 0.5 * self.meta.step;
        self.samples.iter().find(|s| (s.t - t).abs() < tol)
    }
}

#[derive(Clone, Copy)]
struct Augmented([f64; 5]);

impl Augmented {
    fn axpy(&self, h: f64, k: &[f64; 5]) -> Augmented {
        let mut out = self.0;
        for (o, d) in out.iter_mut().zip(k) {
            *o += h * d;
        }
        Augmented(out)
    }
}

struct Dynamics<'a> {
    params: &'a GameParams,
    ctrl: Option<ControllerState>,
    adaptive: bool,
    clamp: bool,
}

impl Dynamics<'_> {
    fn rhs(&self, s: &Augmented) -> [f64; 5] {
        let [x, y, xm, ym, p] = s.0;
        let p_eff = if self.clamp { p.clamp(0.0, 1.0) } else { p };
        let [dx, dy] = plant_field(self.params, x, y, p_eff);
        let [dxm, dym] = plant_field(self.params, xm, ym, self.params.p_star);
        let mut dp = 0.0;
        if self.adaptive {
            let ctrl = self.ctrl.as_ref().expect("adaptive phase without gains");
            dp = p_hat_dot(ctrl, ErrorVector::new(x - xm, y - ym), x, self.params.beta);
            if self.clamp && ((p >= 1.0 && dp > 0.0) || (p <= 0.0 && dp < 0.0)) {
                dp = 0.0;
            }
        }
        [dx, dy, dxm, dym, dp]
    }

    fn rk4(&self, s: &Augmented, h: f64) -> Augmented {
        let k1 = self.rhs(s);
        let k2 = self.rhs(&s.axpy(0.5 * h, &k1));
        let k3 = self.rhs(&s.axpy(0.5 * h, &k2));
        let k4 = self.rhs(&s.axpy(h, &k3));
        let mut out = s.0;
        for i in 0..5 {
            out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Augmented(out)
    }
}

fn guard_fraction(value: &mut f64, which: &'static str, t: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::Diverged(t));
    }
    if *value < 0.0 {
        if *value < -BOX_SNAP_TOL {
            return Err(Error::StateBox {
                t,
                which,
                value: *value,
            });
        }
        *value = 0.0;
    } else if *value > 1.0 {
        if *value > 1.0 + BOX_SNAP_TOL {
            return Err(Error::StateBox {
                t,
                which,
                value: *value,
            });
        }
        *value = 1.0;
    }
    Ok(())
}

fn step_count(phase: usize, length: f64, step: f64) -> Result<usize> {
    let ratio = length / step;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::StepDoesNotDivide {
            phase,
            length,
            step,
        });
    }
    Ok(n as usize)
}

/// Integrates plant, reference model and `p̂` under `schedule` up to `settings.horizon`.
pub fn integrate(
    params: &GameParams,
    schedule: &Schedule,
    initial: &InitialConditions,
    controller: &ControllerSpec,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    params.validate()?;
    let h = settings.step;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidSchedule(format!(
            "step must be positive, got {h}"
        )));
    }
    let t0 = schedule.start();
    if settings.horizon.partial_cmp(&t0) != Some(std::cmp::Ordering::Greater)
        || settings.horizon > schedule.end()
    {
        return Err(Error::InvalidSchedule(format!(
            "horizon {} is outside the schedule ({t0}, {}]",
            settings.horizon,
            schedule.end()
        )));
    }
    let inside = |x: f64, y: f64| (0.0..=1.0).contains(&x) && (0.0..=params.r_max).contains(&y);
    if !inside(initial.x0, initial.y0) || !inside(initial.xm0, initial.ym0) {
        return Err(Error::InvalidSchedule(
            "initial states must lie in [0, 1] × [0, R_m]".into(),
        ));
    }
    if !(controller.a.is_finite() && controller.a > 0.0) {
        return Err(Error::InvalidParams(format!(
            "adaptation rate must be positive, got {}",
            controller.a
        )));
    }
    let has_adaptive = schedule
        .adaptive_start()
        .is_some_and(|t| t < settings.horizon);
    let gains = match controller.resolve_gains(params) {
        Ok(q) => Some(q),
        Err(e) if has_adaptive => return Err(e),
        Err(_) => None,
    };
    let ctrl = gains
        .map(|q| ControllerState::new(q, controller.a, initial.p_hat0, params.p_star))
        .transpose()?;

    // Phases clipped to the horizon, with their step counts.
    let mut plan = Vec::new();
    for (i, p) in schedule.phases().iter().enumerate() {
        if p.t_start >= settings.horizon && !(p.t_start == t0 && i == 0) {
            break;
        }
        let end = p.t_end.min(settings.horizon);
        plan.push((i, *p, step_count(i, end - p.t_start, h)?));
    }
    let label_at_boundary = |t: f64, producing: usize| {
        plan.iter()
            .find(|(_, p, n)| *n > 0 && p.t_start == t)
            .map_or(producing, |(i, _, _)| *i)
    };

    let value_of = |s: &[f64; 5]| {
        let e = ErrorVector::new(s[0] - s[2], s[1] - s[3]);
        ctrl.map_or(f64::NAN, |c| lyapunov_value(&c.with_p_hat(s[4]), e))
    };
    let sample = |t: f64, s: &[f64; 5], phase: usize| Sample {
        t,
        x: s[0],
        y: s[1],
        x_m: s[2],
        y_m: s[3],
        p_hat: s[4],
        e1: s[0] - s[2],
        e2: s[1] - s[3],
        v: value_of(s),
        phase,
    };

    let mut state = Augmented([
        initial.x0,
        initial.y0,
        initial.xm0,
        initial.ym0,
        initial.p_hat0,
    ]);
    let mut flags = ViolationFlags::default();
    let mut p_min = f64::INFINITY;
    let mut p_max = f64::NEG_INFINITY;
    let mut track_p = |p: f64, t: f64, flags: &mut ViolationFlags| {
        p_min = p_min.min(p);
        p_max = p_max.max(p);
        if !(0.0..=1.0).contains(&p) && flags.p_hat_range.is_none() {
            flags.p_hat_range = Some(Excursion { t, value: p });
        }
    };

    let first_phase = plan.first().map_or(0, |(i, p, _)| {
        if let PhaseMode::Fixed { p_hat } = p.mode {
            state.0[4] = p_hat;
        }
        *i
    });
    let mut samples = vec![Sample {
        t: t0,
        x: initial.x0,
        y: initial.y0,
        x_m: initial.xm0,
        y_m: initial.ym0,
        ..sample(t0, &state.0, label_at_boundary(t0, first_phase))
    }];
    track_p(state.0[4], t0, &mut flags);

    let stride = settings.record_stride.max(1);
    let mut global = 0usize;
    for &(index, phase, n) in &plan {
        let adaptive = phase.is_adaptive();
        if let PhaseMode::Fixed { p_hat } = phase.mode {
            state.0[4] = p_hat;
        }
        let dynamics = Dynamics {
            params,
            ctrl,
            adaptive,
            clamp: controller.clamp_p && adaptive,
        };
        for k in 1..=n {
            let t = phase.t_start + k as f64 * h;
            state = dynamics.rk4(&state, h);
            guard_fraction(&mut state.0[0], "x", t)?;
            guard_fraction(&mut state.0[2], "x_m", t)?;
            for v in &state.0[1..] {
                if !v.is_finite() {
                    return Err(Error::Diverged(t));
                }
            }
            for y in [state.0[1], state.0[3]] {
                if !(0.0..=params.r_max).contains(&y) && flags.resource_box.is_none() {
                    flags.resource_box = Some(Excursion { t, value: y });
                }
            }
            if dynamics.clamp {
                state.0[4] = state.0[4].clamp(0.0, 1.0);
                if state.0[4] == 0.0 || state.0[4] == 1.0 {
                    flags.saturated_steps += 1;
                }
            }
            track_p(state.0[4], t, &mut flags);
            global += 1;
            if k == n {
                let t_end = phase.t_start + n as f64 * h;
                samples.push(sample(t_end, &state.0, label_at_boundary(t_end, index)));
            } else if global.is_multiple_of(stride) {
                samples.push(sample(t, &state.0, index));
            }
        }
    }

    Ok(Trajectory {
        samples,
        meta: TrajectoryMeta {
            step: h,
            scheme: "rk4",
            y_scale: params.r_max,
            gains,
            adaptation_rate: controller.a,
            p_star: params.p_star,
            phases: plan.iter().map(|(_, p, _)| *p).collect(),
            flags,
            p_hat_min: p_min,
            p_hat_max: p_max,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub converged: bool,
    /// Earliest time after which the trajectory stays within tolerance.
    pub settle_time: Option<f64>,
}

/// Convergence of the plant state to `target` in the normalized ∞-norm
/// (`x` as is, `y / R_m`) over the trailing `window`.
pub fn detect_convergence(
    traj: &Trajectory,
    target: PopState,
    tol: f64,
    window: f64,
) -> Result<Convergence> {
    if !(tol > 0.0 && window > 0.0) {
        return Err(Error::InvalidParams(
            "tol and window must be positive".into(),
        ));
    }
    if traj.samples.is_empty() {
        return Err(Error::WindowTooLong { window, span: 0.0 });
    }
    let span = traj.last().t - traj.first().t;
    if window > span {
        return Err(Error::WindowTooLong { window, span });
    }
    let scale = traj.meta.y_scale;
    let within = |s: &Sample| s.plant().normalized_distance(&target, scale) < tol;
    let t_cut = traj.last().t - window;
    let converged = traj.samples.iter().filter(|s| s.t >= t_cut).all(within);
    let settle_time = if converged {
        let outside = traj.samples.iter().rposition(|s| !within(s));
        Some(outside.map_or(traj.first().t, |i| traj.samples[i + 1].t))
    } else {
        None
    };
    Ok(Convergence {
        converged,
        settle_time,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeLabel {
    /// All cooperators with the resource sustained.
    Desired,
    AllDefectSustained,
    CoexistenceInterior,
    /// Resource driven to zero.
    Depleted,
    Boundary,
    NonConvergent,
}

impl RegimeLabel {
    pub const ALL: [RegimeLabel; 6] = [
        RegimeLabel::Desired,
        RegimeLabel::AllDefectSustained,
        RegimeLabel::CoexistenceInterior,
        RegimeLabel::Depleted,
        RegimeLabel::Boundary,
        RegimeLabel::NonConvergent,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::Desired => "desired",
            RegimeLabel::AllDefectSustained => "all-defect-sustained",
            RegimeLabel::CoexistenceInterior => "coexistence-interior",
            RegimeLabel::Depleted => "depleted",
            RegimeLabel::Boundary => "boundary",
            RegimeLabel::NonConvergent => "non-convergent",
        }
    }
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RegimeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegimeLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown regime label {s:?}")))
    }
}

/// Labels a state by the nearest valid equilibrium within `tol` (normalized).
pub fn label_state(
    params: &GameParams,
    p_hat: f64,
    state: PopState,
    tol: f64,
) -> Option<RegimeLabel> {
    if state.y / params.r_max < tol {
        return Some(RegimeLabel::Depleted);
    }
    let nearest = fixed_points(params, p_hat)
        .into_iter()
        .filter(|fp| fp.valid)
        .map(|fp| (state.normalized_distance(&fp.point, params.r_max), fp.kind))
        .min_by(|a, b| a.0.total_cmp(&b.0))?;
    if nearest.0 >= tol {
        return None;
    }
    Some(match nearest.1 {
        FixedPointKind::AllCoopSustained => RegimeLabel::Desired,
        FixedPointKind::AllDefect => RegimeLabel::AllDefectSustained,
        FixedPointKind::Interior => RegimeLabel::CoexistenceInterior,
        FixedPointKind::Origin | FixedPointKind::AllCoopDepleted => RegimeLabel::Depleted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Defaults to `(0.5, R_m / 2)`.
    pub initial: Option<PopState>,
    pub tol: f64,
    /// Trailing window used for the oscillation test.
    pub window: f64,
    pub variance_threshold: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            initial: None,
            tol: 1e-2,
            window: 100.0,
            variance_threshold: 1e-6,
        }
    }
}

pub fn classify_regime(params: &GameParams, p_hat: f64, horizon: f64, step: f64) -> RegimeLabel {
    classify_regime_with(params, p_hat, horizon, step, &ClassifyOptions::default())
}

/// Integrates the plant at constant `p_hat` and labels its terminal state.
pub fn classify_regime_with(
    params: &GameParams,
    p_hat: f64,
    horizon: f64,
    step: f64,
    opts: &ClassifyOptions,
) -> RegimeLabel {
    let start = opts
        .initial
        .unwrap_or(PopState::new(0.5, 0.5 * params.r_max));
    let (mut x, mut y) = (start.x, start.y);
    let n = (horizon / step).round() as usize;
    let window_steps = ((opts.window / step).round() as usize).min(n);
    let field = |x: f64, y: f64| plant_field(params, x, y, p_hat);
    let sinks: Vec<PopState> = fixed_points(params, p_hat)
        .into_iter()
        .filter(|fp| fp.valid && is_sink(params, p_hat, fp.point))
        .map(|fp| fp.point)
        .collect();

    // Welford accumulators for normalized x and y over the trailing window.
    let mut count = 0.0;
    let mut mean = [0.0; 2];
    let mut m2 = [0.0; 2];
    for k in 1..=n {
        let k1 = field(x, y);
        let k2 = field(x + 0.5 * step * k1[0], y + 0.5 * step * k1[1]);
        let k3 = field(x + 0.5 * step * k2[0], y + 0.5 * step * k2[1]);
        let k4 = field(x + step * k3[0], y + step * k3[1]);
        x += step / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        y += step / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        if !(x.is_finite() && y.is_finite()) {
            return RegimeLabel::NonConvergent;
        }
        x = x.clamp(0.0, 1.0);
        // Settled onto a hyperbolic sink: the remaining steps cannot change the label.
        if k % 512 == 0
            && sinks
                .iter()
                .any(|s| PopState::new(x, y).normalized_distance(s, params.r_max) < SINK_CAPTURE)
        {
            return label_state(params, p_hat, PopState::new(x, y), opts.tol)
                .unwrap_or(RegimeLabel::NonConvergent);
        }
        if k + window_steps > n {
            count += 1.0;
            for (i, v) in [x, y / params.r_max].into_iter().enumerate() {
                let delta = v - mean[i];
                mean[i] += delta / count;
                m2[i] += delta * (v - mean[i]);
            }
        }
    }
    if count > 1.0 && m2.iter().any(|m| m / count > opts.variance_threshold) {
        return RegimeLabel::NonConvergent;
    }
    label_state(params, p_hat, PopState::new(x, y), opts.tol).unwrap_or(RegimeLabel::NonConvergent)
}

const SINK_CAPTURE: f64 = 1e-10;

/// Both Jacobian eigenvalues have negative real part (central differences).
fn is_sink(params: &GameParams, p_hat: f64, at: PopState) -> bool {
    let hx = 1e-7;
    let hy = 1e-7 * params.r_max;
    let f = |x: f64, y: f64| plant_field(params, x, y, p_hat);
    let (fxp, fxm) = (f(at.x + hx, at.y), f(at.x - hx, at.y));
    let (fyp, fym) = (f(at.x, at.y + hy), f(at.x, at.y - hy));
    let j11 = (fxp[0] - fxm[0]) / (2.0 * hx);
    let j21 = (fxp[1] - fxm[1]) / (2.0 * hx);
    let j12 = (fyp[0] - fym[0]) / (2.0 * hy);
    let j22 = (fyp[1] - fym[1]) / (2.0 * hy);
    let (tr, det) = (j11 + j22, j11 * j22 - j12 * j21);
    tr < -1e-9 && det > 1e-12
}

/// Regime labels over an `(r, p̂β)` grid, `r` outer.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeMap {
    pub r_values: Vec<f64>,
    pub pbeta_values: Vec<f64>,
    labels: Vec<RegimeLabel>,
}

impl RegimeMap {
    pub fn label(&self, r_index: usize, pbeta_index: usize) -> RegimeLabel {
        self.labels[r_index * self.pbeta_values.len() + pbeta_index]
    }

    pub fn column(&self, r_index: usize) -> &[RegimeLabel] {
        let n = self.pbeta_values.len();
        &self.labels[r_index * n..(r_index + 1) * n]
    }

    /// `(r, p̂β, label)` in row order.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, RegimeLabel)> + '_ {
        self.r_values.iter().enumerate().flat_map(move |(i, &r)| {
            self.pbeta_values
                .iter()
                .enumerate()
                .map(move |(j, &pb)| (r, pb, self.label(i, j)))
        })
    }
}

/// Half the smallest spacing of a sorted grid; zero for a single point.
fn grid_eps(grid: &[f64]) -> f64 {
    grid.windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(f64::INFINITY, f64::min)
        .min(f64::MAX)
        * 0.5
        * if grid.len() > 1 { 1.0 } else { 0.0 }
}

/// Evenly spaced grid of `count` points over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

pub fn sweep_phase_plane(
    base: &GameParams,
    r_grid: &[f64],
    pbeta_grid: &[f64],
    horizon: f64,
    step: f64,
) -> Result<RegimeMap> {
    if r_grid.is_empty() || pbeta_grid.is_empty() {
        return Err(Error::InvalidGrid("grids must be non-empty".into()));
    }
    if r_grid.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidGrid("r values must be positive".into()));
    }
    if pbeta_grid.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidGrid("p̂β values must be non-negative".into()));
    }
    let (eps_r, eps_pb) = (grid_eps(r_grid), grid_eps(pbeta_grid));
    let cells: Vec<(f64, f64)> = r_grid
        .iter()
        .flat_map(|&r| pbeta_grid.iter().map(move |&pb| (r, pb)))
        .collect();
    let labels = cells
        .par_iter()
        .map(|&(r, pb)| {
            let params = GameParams { r, ..*base };
            let (e_c, e_d) = (params.e_c(), params.e_d());
            let ab = params.alpha * params.b_max;
            let near_r = (r - e_c).abs() < eps_r || (r - e_d).abs() < eps_r;
            let near_curve = (pb - ab * (1.0 - e_c / r)).abs() < eps_pb
                || (pb - ab * (1.0 - e_d / r)).abs() < eps_pb;
            if near_r || near_curve {
                RegimeLabel::Boundary
            } else {
                classify_regime(&params, pb / params.beta, horizon, step)
            }
        })
        .collect();
    Ok(RegimeMap {
        r_values: r_grid.to_vec(),
        pbeta_values: pbeta_grid.to_vec(),
        labels,
    })
}
