use proptest::prelude::*;

use commons_mrac::game::{fixed_points, plant_field, plant_rhs, GameParams, PopState};
use commons_mrac::mrac::{
    error_rhs, lyapunov_rate, p_hat_dot, reference_gains, shift, solve_lyapunov, unshift,
    ControllerState, ErrorVector,
};
use commons_mrac::scenario::{Preset, ScenarioConfig};
use commons_mrac::sim::{classify_regime, integrate, GainSource, Phase, RegimeLabel, Schedule};
use nalgebra::Matrix2;

fn params() -> impl Strategy<Value = GameParams> {
    (
        0.1..2.0f64,
        0.1..2.0f64,
        0.1..2.0f64,
        1u32..200,
        10.0..200.0f64,
        0.05..1.0f64,
        0.01..0.99f64,
    )
        .prop_map(|(r, alpha, beta, n, r_max, b_max, p_star)| {
            GameParams::new(r, alpha, beta, n, r_max, b_max, p_star).unwrap()
        })
}

fn params_and_state() -> impl Strategy<Value = (GameParams, PopState)> {
    params().prop_flat_map(|p| {
        (Just(p), 0.0..=1.0f64, 0.0..=p.r_max).prop_map(|(p, x, y)| (p, PopState::new(x, y)))
    })
}

proptest! {
    #[test]
    fn shift_round_trip((p, s) in params_and_state()) {
        let back = unshift(&p, shift(&p, s));
        prop_assert!((back.x - s.x).abs() <= 1e-12);
        prop_assert!((back.y - s.y).abs() <= 1e-12 * p.r_max);
    }

    #[test]
    fn plant_dead_zones((p, s) in params_and_state(), p_hat in 0.0..=1.0f64) {
        for x in [0.0, 1.0] {
            prop_assert_eq!(plant_rhs(&p, PopState::new(x, s.y), p_hat).unwrap()[0], 0.0);
        }
        prop_assert_eq!(plant_rhs(&p, PopState::new(s.x, 0.0), p_hat).unwrap()[1], 0.0);
    }

    #[test]
    fn valid_fixed_points_are_equilibria(p in params(), p_hat in 0.0..=1.0f64) {
        // scale of the individual terms in ẏ
        let scale = p.r * p.r_max + p.n() * p.b_max * (1.0 + p.alpha) + 1.0;
        for fp in fixed_points(&p, p_hat).into_iter().filter(|fp| fp.valid) {
            let f = plant_field(&p, fp.point.x, fp.point.y, p_hat);
            prop_assert!(f[0].abs() <= 1e-9 * scale, "{:?}: {:?}", fp.kind, f);
            prop_assert!(f[1].abs() <= 1e-9 * scale, "{:?}: {:?}", fp.kind, f);
        }
    }

    #[test]
    fn lyapunov_solution_for_random_hurwitz(
        a11 in -5.0..-0.01f64, a22 in -5.0..-0.01f64, a12 in -3.0..3.0f64, a21 in -3.0..3.0f64,
    ) {
        prop_assume!(a11 * a22 - a12 * a21 > 1e-3);
        let a = Matrix2::new(a11, a12, a21, a22);
        let q = solve_lyapunov(&a).unwrap();
        let scale = 1.0 + q.frobenius() * a.norm();
        prop_assert!(q.lyapunov_residual(&a) < 1e-9 * scale);
        prop_assert!(q.is_positive_definite());
    }

    #[test]
    fn update_law_cancels_parameter_term_in_v_dot(
        (p, plant) in params_and_state(),
        xm in 0.0..=1.0f64, ym_frac in 0.0..=1.0f64, p_hat in 0.0..=1.0f64, a in 1e-3..10.0f64,
    ) {
        let Ok(q) = reference_gains(&p) else { return Ok(()) };
        let reference = PopState::new(xm, ym_frac * p.r_max);
        let (wp, wr) = (shift(&p, plant), shift(&p, reference));
        let e = ErrorVector::new(wp.s - wr.s, wp.v - wr.v);
        let ctrl = ControllerState::new(q, a, p_hat, p.p_star).unwrap();
        let de = error_rhs(&p, e, wr, wp, &ctrl).unwrap();
        let qe = q.as_matrix() * e.as_vector();
        let along = 2.0 * qe.dot(&de) + 2.0 * ctrl.p_tilde() * p_hat_dot(&ctrl, e, plant.x, p.beta) / a;
        let rate = lyapunov_rate(&p, &q, e, wr);
        let scale = 1.0 + q.frobenius() * e.norm() * (de.norm() + e.norm()) * 10.0;
        prop_assert!((along - rate).abs() <= 1e-9 * scale, "{along} vs {rate}");
    }
}

fn config_strategy() -> impl Strategy<Value = ScenarioConfig> {
    (
        params(),
        (
            0.0..=1.0f64,
            0.0..=1.0f64,
            0.0..=1.0f64,
            0.0..=1.0f64,
            0.0..=1.0f64,
        ),
        (1usize..5, 1u32..50, 0.0..1.0f64),
        (
            1e-8..1e3f64,
            proptest::bool::ANY,
            1e-6..0.9f64,
            0.1..5.0f64,
            proptest::bool::ANY,
        ),
        (1usize..1000, proptest::option::of("[a-z]{1,8}\\.csv")),
    )
        .prop_map(
            |(params, init, (phases, len, ph), (a, clamp, eps, b, explicit), (stride, out))| {
                let mut cfg = Preset::Example1.config();
                cfg.name = "random".into();
                cfg.params = params;
                cfg.initial.x0 = init.0;
                cfg.initial.y0 = init.1 * params.r_max;
                cfg.initial.xm0 = init.2;
                cfg.initial.ym0 = init.3 * params.r_max;
                cfg.initial.p_hat0 = init.4;
                let mut list = Vec::new();
                let mut t = 0.0;
                for k in 0..phases {
                    let end = t + f64::from(len) * 10.0;
                    list.push(Phase::fixed(t, end, ph * (k + 1) as f64 / phases as f64));
                    t = end;
                }
                list.push(Phase::adaptive(t, t + 100.0));
                cfg.schedule = Schedule::new(list).unwrap();
                cfg.integrator.horizon = t + 100.0;
                cfg.controller.a = a;
                cfg.controller.clamp_p = clamp;
                cfg.controller.epsilon = eps;
                cfg.controller.b = b;
                if explicit {
                    cfg.controller.gains = GainSource::Explicit(commons_mrac::mrac::GainMatrix {
                        q11: a * 3.0,
                        q12: -eps,
                        q22: b,
                    });
                }
                cfg.output.sample_stride = stride;
                cfg.output.trajectory = out.map(Into::into);
                cfg
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]
    #[test]
    fn config_round_trip(cfg in config_strategy()) {
        let text = cfg.to_toml().unwrap();
        prop_assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), cfg);
    }
}

/// The reference model reaches the desired point exactly when `r > e_c`
/// and `p* > p_upper`.
#[test]
fn regime_consistency_grid() {
    let base = Preset::Example1.config().params;
    let mut checked = 0;
    for r in [0.3, 0.4, 0.45, 0.55, 0.6, 0.7, 0.8, 0.9, 1.0] {
        for p_star in [0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.6, 0.8] {
            let p = GameParams { r, p_star, ..base };
            let th = commons_mrac::game::regime_thresholds(&p);
            if (r - th.e_c).abs() < 0.04 || (p_star - th.p_upper).abs() < 0.02 {
                continue;
            }
            let predicted = r > th.e_c && p_star > th.p_upper;
            let label = classify_regime(&p, p_star, 5000.0, 0.01);
            assert_eq!(
                label == RegimeLabel::Desired,
                predicted,
                "r = {r}, p* = {p_star}: {label}"
            );
            checked += 1;
        }
    }
    assert!(checked > 50);
}

/// Halving the step moves the terminal states of the presets by < 1e-6.
#[test]
fn step_halving_robustness() {
    for preset in Preset::ALL {
        let cfg = preset.config();
        let run = |step: f64| {
            let mut settings = cfg.settings();
            settings.step = step;
            integrate(
                &cfg.params,
                &cfg.effective_schedule().unwrap(),
                &cfg.initial,
                &cfg.controller.spec(),
                &settings,
            )
            .unwrap()
        };
        let (coarse, fine) = (run(0.01), run(0.005));
        for t in cfg.schedule.phases().iter().map(|p| p.t_end) {
            let (a, b) = (coarse.sample_at(t).unwrap(), fine.sample_at(t).unwrap());
            let d = (a.x - b.x)
                .abs()
                .max((a.y - b.y).abs())
                .max((a.x_m - b.x_m).abs())
                .max((a.y_m - b.y_m).abs());
            assert!(d < 1e-6, "{} at t = {t}: {d:e}", preset.name());
        }
    }
}
