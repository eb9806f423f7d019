use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("operator {kind} expects {expected} field argument(s), got {got}")]
    Arity {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("unknown mask `{0}`")]
    UnknownMask(String),
    #[error("test function support radius {support} reaches within 2h of the truncation radius {rho_max}")]
    Support { support: f64, rho_max: f64 },
    #[error("field family is empty")]
    EmptyFamily,
    #[error("time {t} lies beyond the horizon {horizon}")]
    Horizon { t: f64, horizon: f64 },
    #[error("Picard map failed to contract: factors {factors:?}")]
    NonContraction { factors: [f64; 3] },
    #[error("trajectory left the ball: norm {norm} > radius {radius}")]
    NormBlowup { norm: f64, radius: f64 },
    #[error("initial data is negative ({min}) at some grid node")]
    NegativeInitialData { min: f64 },
    #[error("nesting violated by {excess} at step {step} (tolerance {tolerance})")]
    NestingViolation {
        step: usize,
        excess: f64,
        tolerance: f64,
    },
    #[error("bracket gap stalled at {gap} after {steps} steps")]
    Stall { steps: usize, gap: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
