use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid potential model: {0}")]
    InvalidModel(String),

    #[error("invalid integration settings: {0}")]
    InvalidSettings(String),

    #[error("non-finite argument: {0}")]
    Domain(String),

    #[error("energy must be positive for scattering quantities, got {0}")]
    NonPositiveEnergy(f64),

    #[error("step size underflow at x = {x} (last accepted point)")]
    StepUnderflow { x: f64 },

    #[error("amplitude became non-positive at x = {x}")]
    SingularAmplitude { x: f64 },

    #[error("band edge singularity at E = {energy}")]
    EdgeSingularity { energy: f64 },

    #[error("E = {energy} lies outside every Floquet/Bloch band")]
    OutOfBand { energy: f64 },

    #[error("fusion search failed: {0}")]
    FusionFailed(String),

    #[error("root bracket [{lo}, {hi}] does not enclose a sign change")]
    NoBracket { lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
