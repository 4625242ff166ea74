pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod linkbudget;
pub mod montecarlo;
pub mod oracle;
pub mod params;
pub mod sqinr;

pub use error::{Error, Result};
