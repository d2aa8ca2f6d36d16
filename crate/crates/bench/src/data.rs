//! Materialises the configured dataset as a stream and a query set.

use rand::Rng;
use rand_distr::StandardNormal;
use streamsketch_core::oracle::{gen_gaussian_mixture_stream, MixtureSpec};
use streamsketch_core::seed::{derive_seed, rng};
use streamsketch_core::Point;

use crate::config::{ConfigError, DatasetSource, ExperimentConfig};
use crate::error::BenchError;
use crate::io::{read_csv, read_fvecs};

const DATA_STREAM: u64 = 0xDA7A;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub points: Vec<Point>,
    pub queries: Vec<Point>,
    pub dim: usize,
}

impl Dataset {
    /// The first `n` points with their positions as ids.
    pub fn stream(&self, n: usize) -> Vec<(u64, &[f32])> {
        self.points[..n]
            .iter()
            .enumerate()
            .map(|(i, p)| (i as u64, p.as_slice()))
            .collect()
    }
}

/// Loads or generates the dataset. `stream_len` is the longest prefix the
/// experiment will stream; file-backed queries default to the points after
/// it. Synthetic data depends only on `seed`.
pub fn load(cfg: &ExperimentConfig, seed: u64, stream_len: usize) -> Result<Dataset, BenchError> {
    let need = cfg.query_count;
    let data_seed = derive_seed(seed, DATA_STREAM);
    let (points, queries) = match &cfg.dataset {
        DatasetSource::Fvecs { path, queries } => split_file(
            read_fvecs(path)?,
            queries.as_ref().map(|q| read_fvecs(q)).transpose()?,
            stream_len,
            need,
        ),
        DatasetSource::Csv { path, queries } => split_file(
            read_csv(path)?,
            queries.as_ref().map(|q| read_csv(q)).transpose()?,
            stream_len,
            need,
        ),
        DatasetSource::Uniform {
            dim,
            count,
            side,
            query_offset,
        } => {
            let points = uniform(*dim, *count, *side, data_seed);
            let base = stream_len.min(points.len());
            let queries = perturbed_queries(&points[..base], need, query_offset * cfg.r, data_seed);
            (points, queries)
        }
        DatasetSource::Mixture {
            dim,
            components,
            block,
            mean_scale,
            noise,
        } => {
            let spec = MixtureSpec {
                dim: *dim,
                n: stream_len + need,
                components: *components,
                block: *block,
                mean_scale: *mean_scale,
                noise: *noise,
                seed: data_seed,
            };
            let mut points = gen_gaussian_mixture_stream(&spec)
                .map_err(|e| ConfigError(e.to_string()))?
                .points;
            let queries = points.split_off(stream_len);
            (points, queries)
        }
    };
    let dim = points.first().or(queries.first()).map_or(0, Point::dim);
    if points.len() < stream_len {
        return Err(ConfigError(format!(
            "dataset holds {} points but {stream_len} are streamed",
            points.len()
        ))
        .into());
    }
    if queries.len() < need {
        return Err(ConfigError(format!(
            "dataset yields {} queries but {need} are issued",
            queries.len()
        ))
        .into());
    }
    if points.iter().chain(&queries).any(|p| p.dim() != dim) {
        return Err(ConfigError("stream and query dimensions differ".into()).into());
    }
    let mut queries = queries;
    queries.truncate(need);
    Ok(Dataset {
        points,
        queries,
        dim,
    })
}

fn split_file(
    mut points: Vec<Point>,
    queries: Option<Vec<Point>>,
    stream_len: usize,
    need: usize,
) -> (Vec<Point>, Vec<Point>) {
    match queries {
        Some(q) => (points, q),
        None => {
            let tail = points.split_off(stream_len.min(points.len()));
            (points, tail.into_iter().take(need).collect())
        }
    }
}

fn uniform(dim: usize, count: usize, side: f64, seed: u64) -> Vec<Point> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let x = (0..dim)
                .map(|_| (r.random::<f64>() * side) as f32)
                .collect();
            Point::new(x).expect("finite")
        })
        .collect()
}

/// Each query is a random base point moved `offset` along a random direction.
fn perturbed_queries(base: &[Point], count: usize, offset: f64, seed: u64) -> Vec<Point> {
    if base.is_empty() {
        return Vec::new();
    }
    let mut r = rng(derive_seed(seed, 1));
    (0..count)
        .map(|_| {
            let b = &base[r.random_range(0..base.len())];
            let dir: Vec<f64> = (0..b.dim()).map(|_| r.sample(StandardNormal)).collect();
            let norm = dir
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            let x = b
                .as_slice()
                .iter()
                .zip(&dir)
                .map(|(c, d)| (f64::from(*c) + offset * d / norm) as f32)
                .collect();
            Point::new(x).expect("finite")
        })
        .collect()
}
