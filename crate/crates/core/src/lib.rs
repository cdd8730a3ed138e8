pub mod baseline;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod numeric;
pub mod plot;
pub mod population;
pub mod replicator;
pub mod scenario;

pub use error::{Error, Result};
