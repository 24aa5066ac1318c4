//! Adaptive inspection control for a feedback-evolving common-pool resource game.
//!
//! * [`game`]: model parameters, vector fields, equilibria and regime thresholds.
//! * [`mrac`]: error coordinates, Lyapunov gains and the inspection update law.
//! * [`roa`]: explicit region-of-attraction constants.
//! * [`sim`]: RK4 integration under inspection schedules, convergence and regime maps.
//! * [`scenario`], [`report`], [`output`], [`plot`]: presets, summaries, CSV and SVG.

pub mod error;
pub mod game;
pub mod mrac;
pub mod output;
pub mod plot;
pub mod report;
pub mod roa;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use game::{GameParams, PopState};
