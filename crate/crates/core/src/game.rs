//! Feedback-evolving common-pool resource game.
//!
//! Cooperators harvest the legal share `b_l = b_m y / R_m`, defectors take
//! `b_l (1 + α)` and are fined `β` when an inspection (probability `p̂` per
//! time unit) catches them. The resource regrows logistically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Static model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    /// Intrinsic resource growth rate.
    pub r: f64,
    /// Severity of defection.
    pub alpha: f64,
    /// Fine on a detected defector.
    pub beta: f64,
    /// Population size.
    pub n_players: u32,
    /// Carrying capacity of the resource pool.
    pub r_max: f64,
    /// Maximal legal per-capita harvest at full stock.
    pub b_max: f64,
    /// Preset inspection probability per time unit.
    pub p_star: f64,
}

impl GameParams {
    pub fn new(
        r: f64,
        alpha: f64,
        beta: f64,
        n_players: u32,
        r_max: f64,
        b_max: f64,
        p_star: f64,
    ) -> Result<Self> {
        let params = GameParams {
            r,
            alpha,
            beta,
            n_players,
            r_max,
            b_max,
            p_star,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r", self.r),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("r_max", self.r_max),
            ("b_max", self.b_max),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.n_players < 1 {
            return Err(Error::InvalidParams("n_players must be at least 1".into()));
        }
        if !(self.p_star > 0.0 && self.p_star < 1.0) {
            return Err(Error::InvalidParams(format!(
                "p_star must lie in (0, 1), got {}",
                self.p_star
            )));
        }
        Ok(())
    }

    /// Population size as a float.
    #[inline]
    pub fn n(&self) -> f64 {
        f64::from(self.n_players)
    }

    /// Legal per-capita harvest `b_l` at stock `y`.
    pub fn legal_harvest(&self, y: f64) -> f64 {
        self.b_max * y / self.r_max
    }

    /// Defector harvest `b_v = b_l (1 + α)`.
    pub fn violator_harvest(&self, y: f64) -> f64 {
        self.legal_harvest(y) * (1.0 + self.alpha)
    }

    /// Gain rate of an all-cooperator population.
    pub fn e_c(&self) -> f64 {
        self.n() * self.b_max / self.r_max
    }

    /// Gain rate of an all-defector population.
    pub fn e_d(&self) -> f64 {
        self.n() * self.b_max * (1.0 + self.alpha) / self.r_max
    }

    /// Resource level of the all-cooperator equilibrium, `R_m − N b_m / r`.
    pub fn sustained_resource(&self) -> f64 {
        self.r_max - self.n() * self.b_max / self.r
    }

    /// Resource level of the all-defector equilibrium, `R_m − N b_m (1 + α) / r`.
    pub fn defector_resource(&self) -> f64 {
        self.r_max - self.n() * self.b_max * (1.0 + self.alpha) / self.r
    }

    /// The desired outcome `(1, R_m − N b_m / r)`.
    pub fn desired_state(&self) -> PopState {
        PopState::new(1.0, self.sustained_resource())
    }

    /// Linearized strategy rate at the desired outcome for inspection `p`:
    /// `α b_m − α N b_m² / (R_m r) − p β`.
    pub fn strategy_rate(&self, p: f64) -> f64 {
        let ab = self.alpha * self.b_max;
        ab - ab * self.n() * self.b_max / (self.r_max * self.r) - p * self.beta
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        let all = [
            self.r,
            self.alpha,
            self.beta,
            self.r_max,
            self.b_max,
            self.p_star,
        ];
        if all.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("params"))
        }
    }
}

/// Cooperator fraction and resource stock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopState {
    pub x: f64,
    pub y: f64,
}

impl PopState {
    pub const fn new(x: f64, y: f64) -> Self {
        PopState { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// ∞-norm distance with the resource coordinate scaled by `y_scale`.
    pub fn normalized_distance(&self, other: &PopState, y_scale: f64) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs() / y_scale)
    }
}

/// Vector field of the game for inspection probability `p_hat`, without input checks.
#[inline]
pub fn plant_field(params: &GameParams, x: f64, y: f64, p_hat: f64) -> [f64; 2] {
    let rel = y / params.r_max;
    let dx = x * (1.0 - x) * (p_hat * params.beta - params.alpha * params.b_max * rel);
    let dy = params.r * y * (1.0 - rel)
        - params.n() * rel * params.b_max * (1.0 + (1.0 - x) * params.alpha);
    [dx, dy]
}

/// Plant vector field `(ẋ, ẏ)` under the (uncertain) inspection probability `p_hat`.
pub fn plant_rhs(params: &GameParams, state: PopState, p_hat: f64) -> Result<[f64; 2]> {
    params.check_finite()?;
    if !state.is_finite() {
        return Err(Error::NonFinite("state"));
    }
    if !p_hat.is_finite() {
        return Err(Error::NonFinite("p_hat"));
    }
    Ok(plant_field(params, state.x, state.y, p_hat))
}

/// Reference model: the plant run at the preset inspection probability.
pub fn reference_rhs(params: &GameParams, state: PopState) -> Result<[f64; 2]> {
    plant_rhs(params, state, params.p_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPointKind {
    Origin,
    AllCoopDepleted,
    AllDefect,
    AllCoopSustained,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub point: PopState,
    pub kind: FixedPointKind,
    /// Inside `[0, 1] × [0, R_m]`.
    pub valid: bool,
    /// Set on the interior point when it sits on a vertex point (Δ = 0 or 1).
    pub coincides_with: Option<FixedPointKind>,
}

/// The five equilibria of the game at inspection probability `p_hat`.
///
/// All five are always returned; `valid` marks those inside the state box.
pub fn fixed_points(params: &GameParams, p_hat: f64) -> Vec<FixedPoint> {
    let in_box = |s: &PopState| (0.0..=1.0).contains(&s.x) && s.y >= 0.0 && s.y <= params.r_max;
    let vertex = |x, y, kind| {
        let point = PopState::new(x, y);
        FixedPoint {
            point,
            kind,
            valid: in_box(&point),
            coincides_with: None,
        }
    };

    let (n, ab) = (params.n(), params.alpha * params.b_max);
    let delta = 1.0 + 1.0 / params.alpha - params.r * params.r_max / (ab * n)
        + p_hat * params.beta * params.r_max * params.r / (n * ab * params.alpha * params.b_max);
    let y_star = params.r_max * p_hat * params.beta / ab;

    const COINCIDE: f64 = 1e-12;
    let coincides_with = if delta.abs() < COINCIDE {
        Some(FixedPointKind::AllDefect)
    } else if (delta - 1.0).abs() < COINCIDE {
        Some(FixedPointKind::AllCoopSustained)
    } else {
        None
    };
    let interior = FixedPoint {
        point: PopState::new(delta, y_star),
        kind: FixedPointKind::Interior,
        valid: (0.0..=1.0).contains(&delta) && (0.0..=params.r_max).contains(&y_star),
        coincides_with,
    };

    vec![
        vertex(0.0, 0.0, FixedPointKind::Origin),
        vertex(1.0, 0.0, FixedPointKind::AllCoopDepleted),
        vertex(0.0, params.defector_resource(), FixedPointKind::AllDefect),
        vertex(
            1.0,
            params.sustained_resource(),
            FixedPointKind::AllCoopSustained,
        ),
        interior,
    ]
}

/// Growth-rate and inspection thresholds separating the outcome regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeThresholds {
    pub e_c: f64,
    pub e_d: f64,
    /// Above this (with `r > e_c`) the desired outcome is reached.
    pub p_upper: f64,
    /// Below this (with `r > e_d`) cooperation collapses entirely.
    pub p_lower: f64,
}

impl RegimeThresholds {
    pub fn pbeta_upper(&self, beta: f64) -> f64 {
        self.p_upper * beta
    }

    pub fn pbeta_lower(&self, beta: f64) -> f64 {
        self.p_lower * beta
    }
}

pub fn regime_thresholds(params: &GameParams) -> RegimeThresholds {
    let (e_c, e_d) = (params.e_c(), params.e_d());
    let threshold = |gain: f64| {
        (1.0 / params.beta - gain / (params.r * params.beta)) * params.alpha * params.b_max
    };
    RegimeThresholds {
        e_c,
        e_d,
        p_upper: threshold(e_c),
        p_lower: threshold(e_d),
    }
}
