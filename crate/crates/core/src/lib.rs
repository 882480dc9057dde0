pub mod backtest;
pub mod copula;
pub mod distributions;
pub mod error;
pub mod ingest;
pub mod marginal;
pub mod numeric;
pub mod risk;
pub mod simulation;
pub mod stats;

pub use error::{Error, Result};
