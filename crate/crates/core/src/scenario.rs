//! Scenario configuration (TOML) and the built-in example presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::GameParams;
use crate::sim::{
    ControllerSpec, GainSource, InitialConditions, IntegratorSettings, Phase, Schedule,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Adaptation rate `a`.
    pub a: f64,
    #[serde(default = "lyapunov_source")]
    pub gains: GainSource,
    #[serde(default)]
    pub clamp_p: bool,
    /// Bound on the reference-state offset used by the attraction estimate.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// A-priori bound on the tracking error norm.
    #[serde(default = "default_b")]
    pub b: f64,
}

fn lyapunov_source() -> GainSource {
    GainSource::Lyapunov
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_b() -> f64 {
    1.0
}

impl ControllerConfig {
    pub fn spec(&self) -> ControllerSpec {
        ControllerSpec {
            a: self.a,
            gains: self.gains,
            clamp_p: self.clamp_p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub step: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    /// Trajectory CSV path; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<PathBuf>,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
}

fn default_stride() -> usize {
    100
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            trajectory: None,
            sample_stride: default_stride(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub params: GameParams,
    pub initial: InitialConditions,
    pub integrator: IntegratorConfig,
    pub controller: ControllerConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub schedule: Schedule,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let IntegratorConfig { step, horizon } = self.integrator;
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Config(format!(
                "integrator.step must be positive, got {step}"
            )));
        }
        if !(horizon.is_finite() && horizon > self.schedule.start()) {
            return Err(Error::Config(format!(
                "integrator.horizon {horizon} must exceed the schedule start"
            )));
        }
        if !(self.controller.a.is_finite() && self.controller.a > 0.0) {
            return Err(Error::Config(format!(
                "controller.a must be positive, got {}",
                self.controller.a
            )));
        }
        if !(self.controller.epsilon > 0.0 && self.controller.epsilon < 1.0) {
            return Err(Error::Config(
                "controller.epsilon must lie in (0, 1)".into(),
            ));
        }
        if !(self.controller.b.is_finite() && self.controller.b > 0.0) {
            return Err(Error::Config("controller.b must be positive".into()));
        }
        if self.output.sample_stride == 0 {
            return Err(Error::Config(
                "output.sample_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ScenarioConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Integrator settings, with the schedule extended or cut to the horizon.
    pub fn settings(&self) -> IntegratorSettings {
        IntegratorSettings {
            step: self.integrator.step,
            horizon: self.integrator.horizon,
            record_stride: self.output.sample_stride,
        }
    }

    /// Schedule whose last phase ends at the configured horizon.
    pub fn effective_schedule(&self) -> Result<Schedule> {
        if self.integrator.horizon >= self.schedule.end() {
            self.schedule.with_horizon(self.integrator.horizon)
        } else {
            Ok(self.schedule.clone())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Example1,
    Example2,
    Example3,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Example1, Preset::Example2, Preset::Example3];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Example1 => "example1",
            Preset::Example2 => "example2",
            Preset::Example3 => "example3",
        }
    }

    pub fn from_name(name: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Inspection probability held during the second (perturbing) phase.
    pub fn perturbation(&self) -> f64 {
        self.config().schedule.phases()[1]
            .mode_p_hat()
            .expect("fixed phase")
    }

    pub fn config(&self) -> ScenarioConfig {
        let base = GameParams {
            r: 0.6,
            alpha: 0.5,
            beta: 0.5,
            n_players: 100,
            r_max: 100.0,
            b_max: 0.5,
            p_star: 0.09,
        };
        let (params, p2, t2, a, clamp_p) = match self {
            Preset::Example1 => (base, 0.07, 3000.0, 1e-5, false),
            Preset::Example2 => (
                GameParams {
                    r: 0.8,
                    p_star: 0.2,
                    ..base
                },
                0.17,
                4000.0,
                1e-4,
                false,
            ),
            // Long all-defect phase leaves x ≈ 1e-13; recovery needs a large
            // rate, which in turn needs the projection to keep p̂ in range.
            Preset::Example3 => (
                GameParams {
                    r: 0.8,
                    p_star: 0.2,
                    ..base
                },
                0.002,
                3000.0,
                1e6,
                true,
            ),
        };
        let horizon = t2 + 7000.0;
        let schedule = Schedule::new(vec![
            Phase::fixed(0.0, 1000.0, params.p_star),
            Phase::fixed(1000.0, t2, p2),
            Phase::adaptive(t2, horizon),
        ])
        .expect("preset schedule is valid");
        ScenarioConfig {
            name: self.name().into(),
            params,
            initial: InitialConditions {
                x0: 0.98,
                y0: 50.0,
                xm0: 0.98,
                ym0: 50.0,
                p_hat0: params.p_star,
            },
            integrator: IntegratorConfig {
                step: 0.01,
                horizon,
            },
            controller: ControllerConfig {
                a,
                gains: GainSource::Lyapunov,
                clamp_p,
                epsilon: default_epsilon(),
                b: default_b(),
            },
            output: OutputConfig::default(),
            schedule,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mrac::GainMatrix;

    #[test]
    fn presets_validate_and_round_trip() {
        for p in Preset::ALL {
            let cfg = p.config();
            cfg.validate().unwrap();
            let text = cfg.to_toml().unwrap();
            assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), cfg, "{text}");
            assert_eq!(Preset::from_name(p.name()), Some(p));
        }
    }

    #[test]
    fn explicit_gains_round_trip() {
        let mut cfg = Preset::Example2.config();
        cfg.controller.gains = GainSource::Explicit(GainMatrix {
            q11: 2.0,
            q12: -0.25,
            q22: 1.0 / 3.0,
        });
        cfg.output.trajectory = Some("out/run.csv".into());
        let back = ScenarioConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        let text = Preset::Example1.config().to_toml().unwrap();
        let broken = text.replace("step = 0.01", "step = -1.0");
        assert!(matches!(
            ScenarioConfig::from_toml(&broken),
            Err(Error::Config(_))
        ));
        assert!(ScenarioConfig::from_toml("params = 3").is_err());
    }

    #[test]
    fn preset_perturbations() {
        assert_eq!(Preset::Example1.perturbation(), 0.07);
        assert_eq!(Preset::Example2.perturbation(), 0.17);
        assert_eq!(Preset::Example3.perturbation(), 0.002);
    }
}
