//! Configuration, artifacts and run orchestration for the resonant tunneling
//! diode solvers.

pub mod artifacts;
pub mod checks;
pub mod chi;
pub mod config;
pub mod driver;
pub mod error;

pub use config::RunConfig;
pub use error::{SimError, SimResult};
