pub mod ann;
pub mod kde;

use crate::config::ExperimentConfig;
use crate::error::BenchError;
use crate::results::ResultRow;

/// Every seed of the config in order.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, BenchError> {
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        rows.extend(run_seed(cfg, seed)?);
    }
    Ok(rows)
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ResultRow>, BenchError> {
    if cfg.experiment.is_ann() {
        ann::run(cfg, seed)
    } else {
        kde::run(cfg, seed)
    }
}
