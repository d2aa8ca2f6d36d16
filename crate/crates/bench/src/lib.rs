pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod io;
pub mod metrics;
pub mod results;

pub use error::BenchError;
