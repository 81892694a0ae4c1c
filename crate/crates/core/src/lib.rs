pub mod error;
pub mod floquet;
pub mod milne;
mod ode;
pub mod oracle;
pub mod peaks;
pub mod potential;
pub mod roots;
pub mod scattering;

pub use error::{Error, Result};
pub use milne::{AmplitudeState, IntegrationSettings, Trajectory};
pub use potential::PotentialModel;
