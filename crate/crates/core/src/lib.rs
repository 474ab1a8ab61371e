//! Covert air-to-ground link analysis.

pub mod error;
pub mod specfun;

pub use error::{Error, Result};
pub mod channel;
pub mod geometry;
pub mod detection;
pub mod scenario;
pub mod throughput;
pub mod oracle;
pub mod planner;
