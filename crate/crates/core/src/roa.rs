//! Conservative region-of-attraction estimate for the adaptive loop.
//!
//! With `|s_m|, |v_m| < ε` and `‖e‖₂ < b` the time-varying part of `V̇` is
//! bounded by `kε‖e‖²` and the remainder by `K‖e‖²`, so `V̇ ≤ 0` on the ball
//! `‖e‖₂ < m`. The sublevel set `V < λ_min(Q) m²` is then a sufficient
//! region; nothing is claimed about states outside it.

use crate::error::{Error, Result};
use crate::game::GameParams;
use crate::mrac::GainMatrix;

/// Bound coefficients for `‖D(t)‖_F ≤ kε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KBound {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k: f64,
}

/// Bound coefficients for `‖f‖₂ ≤ K‖e‖₂²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderBound {
    pub l1: f64,
    pub l2: f64,
    pub big_k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractionEstimate {
    pub epsilon: f64,
    pub b: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k: f64,
    pub l1: f64,
    pub l2: f64,
    pub big_k: f64,
    /// Radius of the ball on which `V̇ ≤ 0`; zero when unusable.
    pub m: f64,
    /// Level `λ_min(Q) m²` of the estimated region.
    pub c: f64,
    pub lambda_min_q: f64,
    pub q_frobenius: f64,
    /// `1 − kε > 0`.
    pub usable: bool,
    pub gains: GainMatrix,
    pub adaptation_rate: f64,
}

/// `k1, k2, k3` and `k = √(k1² + 2k2² + k3²)`. Independent of `ε`.
pub fn compute_k(params: &GameParams, q: &GainMatrix, _epsilon: f64) -> KBound {
    let g = params.strategy_rate(params.p_star);
    let c = params.alpha * params.b_max / params.r_max;
    let d = c * params.n();
    let n = params.n();
    let rr = params.r / params.r_max;
    let (q11, q12, q22) = (q.q11, q.q12.abs(), q.q22);

    let k1 = 4.0 * q11 * g.abs() + 6.0 * q11 * c + 2.0 * q12 * d;
    let k2 =
        2.0 * (q.q12 * g).abs() + (2.0 * q11 + n * q12 + 2.0 * q12 + n * q22) * c + q12 * 2.0 * rr;
    let k3 = (4.0 * q12 + 2.0 * n * q22) * c + q22 * 4.0 * rr;
    let k = (k1 * k1 + 2.0 * k2 * k2 + k3 * k3).sqrt();
    KBound { k1, k2, k3, k }
}

/// `l1(ε, b)`, `l2` and `K = √(l1 + l2)`.
#[allow(non_snake_case)]
pub fn compute_K(params: &GameParams, epsilon: f64, b: f64) -> RemainderBound {
    let g = params.strategy_rate(params.p_star).abs();
    let c = params.alpha * params.b_max / params.r_max;
    let c2 = c * c;
    let l1 = g * g
        + 2.0 * g * c
        + epsilon * (16.0 * c2 + 6.0 * g * c)
        + b * (2.0 * g + (2.0 + 6.0 * epsilon) * c2)
        + b * b * c2;
    let l2 =
        (params.r / params.r_max - params.alpha * params.n() * params.b_max / params.r_max).powi(2);
    RemainderBound {
        l1,
        l2,
        big_k: (l1 + l2).sqrt(),
    }
}

pub fn compute_roa(
    params: &GameParams,
    q: &GainMatrix,
    a: f64,
    epsilon: f64,
    b: f64,
) -> AttractionEstimate {
    let kb = compute_k(params, q, epsilon);
    let rb = compute_K(params, epsilon, b);
    let lambda_min_q = q.min_eigenvalue();
    let q_frobenius = q.frobenius();
    let margin = 1.0 - kb.k * epsilon;
    let usable = margin > 0.0;
    let m = if usable {
        (margin / (2.0 * q_frobenius * rb.big_k)).min(b)
    } else {
        0.0
    };
    AttractionEstimate {
        epsilon,
        b,
        k1: kb.k1,
        k2: kb.k2,
        k3: kb.k3,
        k: kb.k,
        l1: rb.l1,
        l2: rb.l2,
        big_k: rb.big_k,
        m,
        c: lambda_min_q * m * m,
        lambda_min_q,
        q_frobenius,
        usable,
        gains: *q,
        adaptation_rate: a,
    }
}

/// Best estimate (largest `m`) over a grid of `ε` values in `(0, 1)`.
///
/// Ties go to the smaller `ε`.
pub fn maximize_m(
    params: &GameParams,
    q: &GainMatrix,
    a: f64,
    b: f64,
    grid: &[f64],
) -> Result<AttractionEstimate> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty ε grid".into()));
    }
    if let Some(bad) = grid.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(Error::InvalidGrid(format!("ε = {bad} is outside (0, 1)")));
    }
    let mut best: Option<AttractionEstimate> = None;
    for &eps in grid {
        let est = compute_roa(params, q, a, eps, b);
        best = match best {
            None => Some(est),
            Some(cur) if est.m > cur.m || (est.m == cur.m && est.epsilon < cur.epsilon) => {
                Some(est)
            }
            keep => keep,
        };
    }
    Ok(best.expect("grid is non-empty"))
}

/// Log-spaced `ε` grid from `lo` to `hi` (inclusive), `points` ≥ 2.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2 && lo > 0.0 && hi > lo);
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Default search grid used by reports: 1e-8 ..= 0.5, 8 points per decade.
pub fn default_epsilon_grid() -> Vec<f64> {
    log_grid(1e-8, 0.5, 63)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mrac::reference_gains;
    use approx::assert_relative_eq;

    fn example1() -> GameParams {
        GameParams::new(0.6, 0.5, 0.5, 100, 100.0, 0.5, 0.09).unwrap()
    }

    #[test]
    fn l2_example1() {
        let rb = compute_K(&example1(), 0.1, 1.0);
        assert_relative_eq!(rb.l2, 0.059_536, epsilon = 1e-15);
        assert_relative_eq!(rb.big_k, (rb.l1 + rb.l2).sqrt());
    }

    #[test]
    fn l1_limit_small_eps_zero_b() {
        let p = example1();
        let g = p.strategy_rate(p.p_star);
        let c = p.alpha * p.b_max / p.r_max;
        let rb = compute_K(&p, 1e-300, 0.0);
        assert_relative_eq!(rb.l1, g * g + 2.0 * g.abs() * c, max_relative = 1e-14);
    }

    #[test]
    fn l1_monotone_in_eps_and_b() {
        let p = example1();
        let base = compute_K(&p, 0.1, 1.0).l1;
        assert!(compute_K(&p, 0.2, 1.0).l1 >= base);
        assert!(compute_K(&p, 0.1, 2.0).l1 >= base);
    }

    #[test]
    fn k_alpha_limit() {
        let p = GameParams {
            alpha: 1e-14,
            ..example1()
        };
        let q = GainMatrix {
            q11: 3.0,
            q12: 0.5,
            q22: 2.0,
        };
        let kb = compute_k(&p, &q, 0.1);
        assert_relative_eq!(kb.k1, 4.0 * 3.0 * p.p_star * p.beta, max_relative = 1e-10);
        assert_relative_eq!(kb.k3, 4.0 * 2.0 * p.r / p.r_max, max_relative = 1e-10);
    }

    #[test]
    fn k_independent_of_eps() {
        let p = example1();
        let q = reference_gains(&p).unwrap();
        assert_eq!(compute_k(&p, &q, 0.1), compute_k(&p, &q, 0.9));
    }

    #[test]
    fn unusable_when_k_eps_too_large() {
        let p = example1();
        let q = reference_gains(&p).unwrap();
        let est = compute_roa(&p, &q, 1e-5, 0.1, 1.0);
        assert!(est.k * 0.1 >= 1.0);
        assert!(!est.usable);
        assert_eq!(est.m, 0.0);
        assert_eq!(est.c, 0.0);
    }

    #[test]
    fn m_capped_by_b() {
        let p = example1();
        let q = GainMatrix {
            q11: 1.0,
            q12: 0.0,
            q22: 1.0,
        };
        let est = compute_roa(&p, &q, 1.0, 1e-6, 1e-9);
        assert!(est.usable);
        assert_eq!(est.m, 1e-9);
        assert_eq!(est.c, est.lambda_min_q * 1e-18);
    }

    #[test]
    fn maximize_singleton_and_enumeration() {
        let p = example1();
        let q = reference_gains(&p).unwrap();
        let single = maximize_m(&p, &q, 1e-5, 1.0, &[1e-5]).unwrap();
        assert_eq!(single, compute_roa(&p, &q, 1e-5, 1e-5, 1.0));

        let grid = [1e-4, 1e-6, 5e-5];
        let best = maximize_m(&p, &q, 1e-5, 1.0, &grid).unwrap();
        let brute = grid
            .iter()
            .map(|&e| compute_roa(&p, &q, 1e-5, e, 1.0).m)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best.m, brute);
    }

    #[test]
    fn maximize_ties_prefer_smaller_eps() {
        let p = example1();
        let q = reference_gains(&p).unwrap();
        // every ε here is unusable, so all m are 0
        let best = maximize_m(&p, &q, 1e-5, 1.0, &[0.5, 0.1, 0.9]).unwrap();
        assert_eq!(best.epsilon, 0.1);
    }

    #[test]
    fn maximize_rejects_bad_grids() {
        let p = example1();
        let q = reference_gains(&p).unwrap();
        assert!(maximize_m(&p, &q, 1e-5, 1.0, &[]).is_err());
        assert!(maximize_m(&p, &q, 1e-5, 1.0, &[0.0]).is_err());
        assert!(maximize_m(&p, &q, 1e-5, 1.0, &[1.0]).is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-4, 1e-1, 4);
        assert_relative_eq!(g[0], 1e-4, max_relative = 1e-12);
        assert_relative_eq!(g[3], 1e-1, max_relative = 1e-12);
        assert_relative_eq!(g[1], 1e-3, max_relative = 1e-12);
    }
}
