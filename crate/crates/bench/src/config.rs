//! Experiment configuration, read from JSON and completed with per-experiment
//! defaults.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    AnnCompare,
    AnnScaling,
    AnnQps,
    KdeSketchSize,
    KdeWindow,
    KdeVsCounter,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::AnnCompare => "ann-compare",
            ExperimentKind::AnnScaling => "ann-scaling",
            ExperimentKind::AnnQps => "ann-qps",
            ExperimentKind::KdeSketchSize => "kde-sketch-size",
            ExperimentKind::KdeWindow => "kde-window",
            ExperimentKind::KdeVsCounter => "kde-vs-counter",
        }
    }

    pub fn is_ann(self) -> bool {
        matches!(
            self,
            ExperimentKind::AnnCompare | ExperimentKind::AnnScaling | ExperimentKind::AnnQps
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Stream points from an `fvecs` file; queries from a second file, or
    /// else the points after the stored prefix.
    Fvecs {
        path: PathBuf,
        #[serde(default)]
        queries: Option<PathBuf>,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        queries: Option<PathBuf>,
    },
    /// Uniform points in `[0, side]^dim` (a Poisson process conditioned on
    /// its count). Each query is a stream point moved by `query_offset * r`
    /// in a random direction.
    Uniform {
        dim: usize,
        count: usize,
        side: f64,
        query_offset: f64,
    },
    /// Blocks of `block` points from `components` Gaussians.
    Mixture {
        dim: usize,
        components: usize,
        block: usize,
        mean_scale: f64,
        noise: f64,
    },
}

impl DatasetSource {
    pub fn syn32() -> Self {
        DatasetSource::Uniform {
            dim: 32,
            count: 100_000,
            side: 1.0,
            query_offset: 0.5,
        }
    }

    pub fn mixture() -> Self {
        DatasetSource::Mixture {
            dim: 200,
            components: 10,
            block: 1000,
            mean_scale: 1.0,
            noise: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HashKind {
    Srp,
    Pstable,
}

/// Every field is optional in the JSON file; missing ones take the defaults
/// of the experiment being run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dataset: DatasetSource,
    /// Sampling exponents for S-ANN.
    pub eta: Vec<f64>,
    /// Accuracy knob; the approximation factor is `c = 1 + epsilon`.
    pub epsilon: Vec<f64>,
    /// JL target dimensions.
    pub jl_dims: Vec<usize>,
    /// Stream sizes for the scaling experiment.
    pub sizes: Vec<usize>,
    /// KDE row counts.
    pub rows: Vec<usize>,
    /// KDE window lengths.
    pub windows: Vec<u64>,
    pub r: f64,
    pub seeds: Vec<u64>,
    pub store_count: usize,
    pub query_count: usize,
    pub eps_prime: f64,
    pub hash: HashKind,
    /// p-stable bucket width; defaults to `r` for ANN and 1 for KDE.
    pub bucket_width: Option<f64>,
    /// KDE concatenation length.
    pub concat: u32,
    pub recall_k: usize,
    /// Untimed queries before each throughput measurement.
    pub warmup: usize,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    experiment: Option<ExperimentKind>,
    dataset: Option<DatasetSource>,
    eta: Option<Vec<f64>>,
    epsilon: Option<Vec<f64>>,
    jl_dims: Option<Vec<usize>>,
    sizes: Option<Vec<usize>>,
    rows: Option<Vec<usize>>,
    windows: Option<Vec<u64>>,
    r: Option<f64>,
    seeds: Option<Vec<u64>>,
    store_count: Option<usize>,
    query_count: Option<usize>,
    eps_prime: Option<f64>,
    hash: Option<HashKind>,
    bucket_width: Option<f64>,
    concat: Option<u32>,
    recall_k: Option<usize>,
    warmup: Option<usize>,
}

fn parse_partial(text: &str) -> Result<PartialConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid JSON: {e}")))
}

#[derive(Debug, thiserror::Error)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind, full_scale: bool) -> Self {
        let kde_rows = if full_scale {
            vec![100, 200, 400, 800, 1600, 3200]
        } else {
            vec![100, 200, 400, 800]
        };
        let (store, queries) = match kind {
            ExperimentKind::AnnCompare if full_scale => (50_000, 5_000),
            ExperimentKind::AnnCompare => (10_000, 500),
            ExperimentKind::AnnScaling => (0, 0),
            ExperimentKind::AnnQps => (10_000, 100),
            _ => (10_000, 1000),
        };
        let base = ExperimentConfig {
            experiment: kind,
            dataset: DatasetSource::syn32(),
            eta: vec![0.2, 0.4, 0.6, 0.8],
            epsilon: vec![0.5],
            jl_dims: vec![4, 8, 16, 32],
            sizes: vec![],
            rows: kde_rows.clone(),
            windows: vec![450],
            r: 0.5,
            seeds: vec![0],
            store_count: store,
            query_count: queries,
            eps_prime: 0.1,
            hash: HashKind::Pstable,
            bucket_width: None,
            concat: 1,
            recall_k: 50,
            warmup: 10,
        };
        match kind {
            ExperimentKind::AnnCompare => ExperimentConfig {
                epsilon: vec![0.5, 0.75, 1.0],
                ..base
            },
            ExperimentKind::AnnScaling => ExperimentConfig {
                sizes: if full_scale {
                    vec![1_000, 10_000, 40_000, 160_000]
                } else {
                    vec![1_000, 10_000, 40_000]
                },
                dataset: DatasetSource::Uniform {
                    dim: 32,
                    count: if full_scale { 160_000 } else { 40_000 },
                    side: 1.0,
                    query_offset: 0.5,
                },
                ..base
            },
            ExperimentKind::AnnQps => base,
            ExperimentKind::KdeSketchSize => ExperimentConfig {
                dataset: DatasetSource::mixture(),
                hash: HashKind::Srp,
                ..base
            },
            ExperimentKind::KdeVsCounter => ExperimentConfig {
                dataset: DatasetSource::mixture(),
                hash: HashKind::Srp,
                windows: vec![260],
                ..base
            },
            ExperimentKind::KdeWindow => ExperimentConfig {
                dataset: DatasetSource::mixture(),
                hash: HashKind::Srp,
                windows: vec![64, 128, 256, 512, 1024, 2048],
                ..base
            },
        }
    }

    /// Parses JSON over the defaults of `kind`. A config naming a different
    /// experiment is rejected.
    pub fn from_json(
        text: &str,
        kind: ExperimentKind,
        full_scale: bool,
    ) -> Result<Self, ConfigError> {
        let p = parse_partial(text)?;
        if let Some(k) = p.experiment {
            if k != kind {
                return Err(ConfigError(format!(
                    "config is for {} but {} was requested",
                    k.name(),
                    kind.name()
                )));
            }
        }
        Self::complete(p, kind, full_scale)
    }

    /// Like [`from_json`](Self::from_json), taking the experiment from the
    /// file when it names one.
    pub fn from_json_or(
        text: &str,
        fallback: ExperimentKind,
        full_scale: bool,
    ) -> Result<Self, ConfigError> {
        let p = parse_partial(text)?;
        let kind = p.experiment.unwrap_or(fallback);
        Self::complete(p, kind, full_scale)
    }

    fn complete(
        p: PartialConfig,
        kind: ExperimentKind,
        full_scale: bool,
    ) -> Result<Self, ConfigError> {
        let d = Self::defaults(kind, full_scale);
        let cfg = ExperimentConfig {
            experiment: kind,
            dataset: p.dataset.unwrap_or(d.dataset),
            eta: p.eta.unwrap_or(d.eta),
            epsilon: p.epsilon.unwrap_or(d.epsilon),
            jl_dims: p.jl_dims.unwrap_or(d.jl_dims),
            sizes: p.sizes.unwrap_or(d.sizes),
            rows: p.rows.unwrap_or(d.rows),
            windows: p.windows.unwrap_or(d.windows),
            r: p.r.unwrap_or(d.r),
            seeds: p.seeds.unwrap_or(d.seeds),
            store_count: p.store_count.unwrap_or(d.store_count),
            query_count: p.query_count.unwrap_or(d.query_count),
            eps_prime: p.eps_prime.unwrap_or(d.eps_prime),
            hash: p.hash.unwrap_or(d.hash),
            bucket_width: p.bucket_width.or(d.bucket_width),
            concat: p.concat.unwrap_or(d.concat),
            recall_k: p.recall_k.unwrap_or(d.recall_k),
            warmup: p.warmup.unwrap_or(d.warmup),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: &str| Err(ConfigError(m.to_string()));
        if self.seeds.is_empty() {
            return err("seeds must not be empty");
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return err("r must be positive");
        }
        if let Some(w) = self.bucket_width {
            if !(w > 0.0 && w.is_finite()) {
                return err("bucket_width must be positive");
            }
        }
        match self.experiment {
            ExperimentKind::AnnCompare | ExperimentKind::AnnQps => {
                if self.eta.is_empty() || self.epsilon.is_empty() {
                    return err("eta and epsilon grids must not be empty");
                }
                if self.store_count < 2 || self.query_count == 0 {
                    return err("need store_count >= 2 and query_count >= 1");
                }
            }
            ExperimentKind::AnnScaling => {
                if self.eta.is_empty() || self.epsilon.is_empty() || self.sizes.is_empty() {
                    return err("eta, epsilon and sizes grids must not be empty");
                }
                if self.sizes.iter().any(|&n| n < 2) {
                    return err("every size must be at least 2");
                }
            }
            _ => {
                if self.rows.is_empty() || self.windows.is_empty() {
                    return err("rows and windows grids must not be empty");
                }
                if self.rows.contains(&0) || self.windows.contains(&0) {
                    return err("rows and windows must be positive");
                }
                if !(self.eps_prime > 0.0 && self.eps_prime <= 1.0) {
                    return err("eps_prime must lie in (0, 1]");
                }
                if self.store_count == 0 || self.query_count == 0 {
                    return err("need store_count >= 1 and query_count >= 1");
                }
            }
        }
        if self.eta.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return err("every eta must lie in [0, 1]");
        }
        if self.epsilon.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return err("every epsilon must be positive");
        }
        if self.jl_dims.contains(&0) {
            return err("JL dimensions must be positive");
        }
        match &self.dataset {
            DatasetSource::Fvecs { path, queries } | DatasetSource::Csv { path, queries } => {
                for p in std::iter::once(path).chain(queries) {
                    if !p.exists() {
                        return Err(ConfigError(format!("{} does not exist", p.display())));
                    }
                }
            }
            DatasetSource::Uniform {
                dim,
                count,
                side,
                query_offset,
            } => {
                if *dim == 0
                    || *count == 0
                    || !(side.is_finite() && *side > 0.0)
                    || !(query_offset.is_finite() && *query_offset >= 0.0)
                {
                    return err("uniform dataset needs positive dim, count and side");
                }
            }
            DatasetSource::Mixture {
                dim,
                components,
                block,
                mean_scale,
                noise,
            } => {
                if *dim == 0
                    || *components == 0
                    || *block == 0
                    || !(mean_scale.is_finite() && *mean_scale >= 0.0)
                    || !(noise.is_finite() && *noise > 0.0)
                {
                    return err("mixture dataset needs positive dim, components, block and noise");
                }
            }
        }
        Ok(())
    }

    pub fn approximation_factors(&self) -> Vec<f64> {
        self.epsilon.iter().map(|e| 1.0 + e).collect()
    }
}
