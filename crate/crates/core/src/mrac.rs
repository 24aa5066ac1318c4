//! Model-reference adaptive control of the inspection probability.
//!
//! Coordinates are shifted so the desired outcome sits at the origin; the
//! tracking error between plant and reference then obeys
//!
//! ```text
//! ė = [A_m + B_m(t) + C_m(t)] e − B_p p̃ β (s + s²) + f(e, t)
//! ```
//!
//! and the update law `ṗ̂ = a eᵀ Q B_p β x (x − 1)` cancels the `p̃` cross
//! term in `V = eᵀQe + p̃²/a`, where `Q` solves `A_mᵀQ + QA_m = −I`.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameParams, PopState};
use crate::roa::AttractionEstimate;

/// State measured from the desired outcome: `s = x − 1`, `v = y − (R_m − N b_m / r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedState {
    pub s: f64,
    pub v: f64,
}

impl ShiftedState {
    pub const ORIGIN: ShiftedState = ShiftedState { s: 0.0, v: 0.0 };

    pub const fn new(s: f64, v: f64) -> Self {
        ShiftedState { s, v }
    }
}

pub fn shift(params: &GameParams, state: PopState) -> ShiftedState {
    ShiftedState {
        s: state.x - 1.0,
        v: state.y - params.sustained_resource(),
    }
}

pub fn unshift(params: &GameParams, w: ShiftedState) -> PopState {
    PopState {
        x: w.s + 1.0,
        y: w.v + params.sustained_resource(),
    }
}

/// Tracking error; identical in shifted and original coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorVector {
    pub e1: f64,
    pub e2: f64,
}

impl ErrorVector {
    pub const ZERO: ErrorVector = ErrorVector { e1: 0.0, e2: 0.0 };

    pub const fn new(e1: f64, e2: f64) -> Self {
        ErrorVector { e1, e2 }
    }

    pub fn between(plant: PopState, reference: PopState) -> Self {
        ErrorVector {
            e1: plant.x - reference.x,
            e2: plant.y - reference.y,
        }
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.e1, self.e2)
    }

    pub fn norm(&self) -> f64 {
        self.e1.hypot(self.e2)
    }

    pub fn norm_inf(&self) -> f64 {
        self.e1.abs().max(self.e2.abs())
    }
}

/// Vector field in shifted coordinates (expanded about the desired outcome).
pub fn shifted_rhs(params: &GameParams, w: ShiftedState, p_hat: f64) -> [f64; 2] {
    let Coefficients { c, d, a21, a22, .. } = Coefficients::new(params);
    let g = params.strategy_rate(p_hat);
    let (s, v) = (w.s, w.v);
    let ds = g * s + g * s * s + c * s * v + c * s * s * v;
    let dv = a21 * s + a22 * v - params.r / params.r_max * v * v + d * s * v;
    [ds, dv]
}

/// Recurring coefficient groups of the error system.
#[derive(Debug, Clone, Copy)]
struct Coefficients {
    /// `α b_m − α N b_m² / (R_m r) − p* β`
    g: f64,
    /// `α b_m / R_m`
    c: f64,
    /// `α N b_m / R_m`
    d: f64,
    a21: f64,
    a22: f64,
}

impl Coefficients {
    fn new(params: &GameParams) -> Self {
        let (n, ab) = (params.n(), params.alpha * params.b_max);
        Coefficients {
            g: params.strategy_rate(params.p_star),
            c: ab / params.r_max,
            d: ab * n / params.r_max,
            a21: ab * n - ab * n * n * params.b_max / (params.r_max * params.r),
            a22: n * params.b_max / params.r_max - params.r,
        }
    }
}

/// Matrices of the vector-form error equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSystemMatrices {
    pub a_m: Matrix2<f64>,
    pub b_m_t: Matrix2<f64>,
    pub c_m_t: Matrix2<f64>,
    pub b_p: Vector2<f64>,
}

/// Constant part `A_m` of the error system; depends only on the parameters.
pub fn reference_matrix(params: &GameParams) -> Matrix2<f64> {
    let k = Coefficients::new(params);
    Matrix2::new(k.g, 0.0, k.a21, k.a22)
}

pub fn assemble_matrices(params: &GameParams, reference: ShiftedState) -> ErrorSystemMatrices {
    let k = Coefficients::new(params);
    let (sm, vm) = (reference.s, reference.v);
    let two_r = 2.0 * params.r / params.r_max;
    ErrorSystemMatrices {
        a_m: Matrix2::new(k.g, 0.0, k.a21, k.a22),
        b_m_t: Matrix2::new(
            2.0 * k.g * sm + k.c * vm,
            k.c * sm,
            k.d * vm,
            -two_r * vm + k.d * sm,
        ),
        c_m_t: Matrix2::new(2.0 * k.c * sm * vm, k.c * sm * sm, 0.0, 0.0),
        b_p: Vector2::new(1.0, 0.0),
    }
}

/// Terms of the error equation that are at least quadratic in `e`.
pub fn remainder_f(params: &GameParams, e: ErrorVector, reference: ShiftedState) -> Vector2<f64> {
    let k = Coefficients::new(params);
    let (e1, e2) = (e.e1, e.e2);
    let f1 = k.g * e1 * e1
        + k.c * ((1.0 + 2.0 * reference.s) * e1 * e2 + reference.v * e1 * e1 + e1 * e1 * e2);
    let f2 = -params.r / params.r_max * e2 * e2 + k.d * e1 * e2;
    Vector2::new(f1, f2)
}

/// Vector-form error dynamics.
///
/// `e` must equal `plant − reference`; it is recomputed and compared.
pub fn error_rhs(
    params: &GameParams,
    e: ErrorVector,
    reference: ShiftedState,
    plant: ShiftedState,
    ctrl: &ControllerState,
) -> Result<Vector2<f64>> {
    let (d1, d2) = (plant.s - reference.s, plant.v - reference.v);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
    if !close(e.e1, d1) || !close(e.e2, d2) {
        return Err(Error::InconsistentError {
            e1: e.e1,
            e2: e.e2,
            d1,
            d2,
        });
    }
    let m = assemble_matrices(params, reference);
    let ev = e.as_vector();
    let drive = ctrl.p_tilde() * params.beta * (plant.s + plant.s * plant.s);
    Ok((m.a_m + m.b_m_t + m.c_m_t) * ev - m.b_p * drive + remainder_f(params, e, reference))
}

/// Symmetric positive-definite solution of the Lyapunov equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainMatrix {
    pub q11: f64,
    pub q12: f64,
    pub q22: f64,
}

impl GainMatrix {
    pub fn as_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.q11, self.q12, self.q12, self.q22)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.q11 > 0.0 && self.q11 * self.q22 - self.q12 * self.q12 > 0.0
    }

    /// Smaller eigenvalue, from the 2×2 quadratic formula.
    pub fn min_eigenvalue(&self) -> f64 {
        let half_trace = 0.5 * (self.q11 + self.q22);
        let half_gap = 0.5 * (self.q11 - self.q22);
        let root = half_gap.hypot(self.q12);
        let upper = half_trace + root;
        // λ_min = det / λ_max avoids cancellation when q11 ≫ q22.
        if upper > 0.0 {
            (self.q11 * self.q22 - self.q12 * self.q12) / upper
        } else {
            half_trace - root
        }
    }

    pub fn frobenius(&self) -> f64 {
        (self.q11 * self.q11 + 2.0 * self.q12 * self.q12 + self.q22 * self.q22).sqrt()
    }

    /// `‖A_mᵀQ + QA_m + I‖∞` (max absolute entry).
    pub fn lyapunov_residual(&self, a_m: &Matrix2<f64>) -> f64 {
        let q = self.as_matrix();
        let res = a_m.transpose() * q + q * a_m + Matrix2::identity();
        res.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// `eᵀQe`.
    pub fn quadratic_form(&self, e: ErrorVector) -> f64 {
        self.q11 * e.e1 * e.e1 + 2.0 * self.q12 * e.e1 * e.e2 + self.q22 * e.e2 * e.e2
    }
}

/// Solves `AᵀQ + QA = −I` in closed form for a Hurwitz 2×2 `A`.
pub fn solve_lyapunov(a: &Matrix2<f64>) -> Result<GainMatrix> {
    let (a11, a12, a21, a22) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let trace = a11 + a22;
    let det = a11 * a22 - a12 * a21;
    if trace == 0.0 {
        return Err(Error::SingularLyapunov);
    }
    if !(trace < 0.0 && det > 0.0) {
        return Err(Error::UnstableReference {
            trace,
            det,
            reason: "matrix is not Hurwitz".into(),
        });
    }
    // 2a11 q11 + 2a21 q12            = −1
    //  a12 q11 + (a11+a22) q12 + a21 q22 = 0
    //            2a12 q12 + 2a22 q22 = −1
    let q = if a12 == 0.0 {
        let q22 = -1.0 / (2.0 * a22);
        let q12 = -a21 * q22 / trace;
        let q11 = (-1.0 - 2.0 * a21 * q12) / (2.0 * a11);
        GainMatrix { q11, q12, q22 }
    } else {
        let m = [
            [2.0 * a11, 2.0 * a21, 0.0],
            [a12, trace, a21],
            [0.0, 2.0 * a12, 2.0 * a22],
        ];
        let rhs = [-1.0, 0.0, -1.0];
        let det3 = |m: &[[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let full = det3(&m);
        let cramer = |col: usize| {
            let mut mc = m;
            for (row, b) in mc.iter_mut().zip(rhs) {
                row[col] = b;
            }
            det3(&mc) / full
        };
        GainMatrix {
            q11: cramer(0),
            q12: cramer(1),
            q22: cramer(2),
        }
    };
    Ok(q)
}

/// Adaptive controller: gain matrix, adaptation rate, and current estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub gains: GainMatrix,
    a: f64,
    pub p_hat: f64,
    p_star: f64,
}

impl ControllerState {
    pub fn new(gains: GainMatrix, a: f64, p_hat: f64, p_star: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParams(format!(
                "adaptation rate must be positive, got {a}"
            )));
        }
        Ok(ControllerState {
            gains,
            a,
            p_hat,
            p_star,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn p_star(&self) -> f64 {
        self.p_star
    }

    /// `p̃ = p̂ − p*`.
    pub fn p_tilde(&self) -> f64 {
        self.p_hat - self.p_star
    }

    pub fn with_p_hat(self, p_hat: f64) -> Self {
        ControllerState { p_hat, ..self }
    }
}

/// Update law `ṗ̂ = a (q11 e1 + q12 e2) β x (x − 1)`.
///
/// Exactly zero at `x ∈ {0, 1}` and at `e = 0`.
#[inline]
pub fn p_hat_dot(ctrl: &ControllerState, e: ErrorVector, x: f64, beta: f64) -> f64 {
    let qb = ctrl.gains.q11 * e.e1 + ctrl.gains.q12 * e.e2;
    ctrl.a * qb * beta * x * (x - 1.0)
}

/// `V = eᵀQe + p̃²/a`.
pub fn lyapunov_value(ctrl: &ControllerState, e: ErrorVector) -> f64 {
    let pt = ctrl.p_tilde();
    ctrl.gains.quadratic_form(e) + pt * pt / ctrl.a
}

/// Exact `V̇` along the error dynamics under the update law: `−eᵀe + eᵀDe + 2eᵀQf`.
pub fn lyapunov_rate(
    params: &GameParams,
    q: &GainMatrix,
    e: ErrorVector,
    reference: ShiftedState,
) -> f64 {
    let m = assemble_matrices(params, reference);
    let qm = q.as_matrix();
    let bc = m.b_m_t + m.c_m_t;
    let d = bc.transpose() * qm + qm * bc;
    let ev = e.as_vector();
    let f = remainder_f(params, e, reference);
    -ev.dot(&ev) + ev.dot(&(d * ev)) + 2.0 * ev.dot(&(qm * f))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    pub admissible: bool,
    /// `λ_min(Q) m² − (e₀ᵀQe₀ + p̃₀²/a)`.
    pub slack: f64,
}

/// Initial-condition test `e₀ᵀQe₀ + p̃₀²/a < λ_min(Q) m²` (strict).
pub fn check_admissible(
    ctrl: &ControllerState,
    e0: ErrorVector,
    roa: &AttractionEstimate,
) -> Admissibility {
    debug_assert!(roa.gains == ctrl.gains && roa.adaptation_rate == ctrl.a);
    let slack = roa.c - lyapunov_value(ctrl, e0);
    Admissibility {
        admissible: roa.usable && slack > 0.0,
        slack,
    }
}

/// Convenience: solve for `Q` from the reference matrix of `params`.
///
/// A non-Hurwitz reference matrix is reported with the failed conditions
/// `r > e_c` and `p* > p_upper` named.
pub fn reference_gains(params: &GameParams) -> Result<GainMatrix> {
    solve_lyapunov(&reference_matrix(params)).map_err(|err| match err {
        Error::UnstableReference { trace, det, .. } => {
            let th = crate::game::regime_thresholds(params);
            let mut failed = Vec::new();
            if params.r <= th.e_c {
                failed.push(format!("r > e_c fails ({} <= {})", params.r, th.e_c));
            }
            if params.p_star <= th.p_upper {
                failed.push(format!(
                    "p* > p_upper fails ({} <= {})",
                    params.p_star, th.p_upper
                ));
            }
            if failed.is_empty() {
                failed.push("matrix is not Hurwitz".into());
            }
            Error::UnstableReference {
                trace,
                det,
                reason: failed.join(", "),
            }
        }
        other => other,
    })
}
