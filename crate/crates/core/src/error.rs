use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("error vector ({e1}, {e2}) is inconsistent with the state difference ({d1}, {d2})")]
    InconsistentError { e1: f64, e2: f64, d1: f64, d2: f64 },

    #[error("reference system unstable: {reason} (trace {trace}, det {det})")]
    UnstableReference {
        trace: f64,
        det: f64,
        reason: String,
    },

    #[error("singular Lyapunov solve: a11 + a22 = 0")]
    SingularLyapunov,

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("step {step} does not divide the length {length} of phase {phase}")]
    StepDoesNotDivide {
        phase: usize,
        length: f64,
        step: f64,
    },

    #[error("{which} left the state box at t = {t}: value {value}")]
    StateBox {
        t: f64,
        which: &'static str,
        value: f64,
    },

    #[error("integration produced a non-finite state at t = {0}")]
    Diverged(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("convergence window {window} is longer than the trajectory span {span}")]
    WindowTooLong { window: f64, span: f64 },

    #[error("malformed trajectory CSV at row {row}: {msg}")]
    MalformedCsv { row: usize, msg: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::UnstableReference { .. }
                | Error::SingularLyapunov
                | Error::StateBox { .. }
                | Error::Diverged(_)
        )
    }
}
