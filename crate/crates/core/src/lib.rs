pub mod config;
pub mod criteria;
pub mod error;
pub mod exponents;
pub mod integrators;
pub mod lyapunov;
pub mod models;
mod parallel;
pub mod process;
pub mod report;
pub mod runner;

pub use error::{Error, Result};
pub use integrators::{simulate, SimConfig};
pub use process::{Family, ModelSpec, RngStream, StateVector, Trajectory};
