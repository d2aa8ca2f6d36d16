//! Per-cell ANN metrics.

use std::time::{Duration, Instant};

use streamsketch_core::oracle::Verdict;

/// What a method reported for one query.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryRecord {
    /// Deduplicated candidate ids.
    pub candidates: Vec<u64>,
    pub verdict: Verdict,
}

/// Exact nearest neighbors of each query, nearest first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    pub knn: Vec<Vec<u64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSet {
    pub recall: f64,
    pub crann_accuracy: f64,
    pub compression: f64,
    pub bytes: usize,
}

impl MetricSet {
    pub fn named(&self, recall_k: usize) -> Vec<(String, f64)> {
        vec![
            (format!("recall_at_{recall_k}"), self.recall),
            ("crann_accuracy".to_string(), self.crann_accuracy),
            ("compression".to_string(), self.compression),
            ("bytes".to_string(), self.bytes as f64),
        ]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("ground truth covers {truth} queries but {records} were recorded")]
    MissingTruth { truth: usize, records: usize },
    #[error("no queries recorded")]
    Empty,
}

/// `|C ∩ T| / |T|`, with `|T|` the recall depth (fewer only when the stream
/// holds fewer points). An empty truth set counts as full recall.
pub fn recall(candidates: &[u64], truth: &[u64]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let hit = truth.iter().filter(|t| candidates.contains(t)).count();
    hit as f64 / truth.len() as f64
}

/// Sketch bytes over the raw `n * dim * 4` bytes of the stream.
pub fn compression(bytes: usize, n: usize, dim: usize) -> f64 {
    bytes as f64 / (n as f64 * dim as f64 * 4.0)
}

pub fn compute_metrics(
    records: &[QueryRecord],
    truth: &GroundTruth,
    bytes: usize,
    n: usize,
    dim: usize,
) -> Result<MetricSet, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    if truth.knn.len() != records.len() {
        return Err(MetricsError::MissingTruth {
            truth: truth.knn.len(),
            records: records.len(),
        });
    }
    let q = records.len() as f64;
    let recall_sum: f64 = records
        .iter()
        .zip(&truth.knn)
        .map(|(r, t)| {
            let mut c = r.candidates.clone();
            c.sort_unstable();
            c.dedup();
            recall_sorted(&c, t)
        })
        .sum();
    let success = records
        .iter()
        .filter(|r| r.verdict == Verdict::Success)
        .count();
    Ok(MetricSet {
        recall: recall_sum / q,
        crann_accuracy: success as f64 / q,
        compression: compression(bytes, n, dim),
        bytes,
    })
}

fn recall_sorted(sorted: &[u64], truth: &[u64]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let hit = truth
        .iter()
        .filter(|t| sorted.binary_search(t).is_ok())
        .count();
    hit as f64 / truth.len() as f64
}

/// Runs `warmup` untimed queries, then times one pass over all of `queries`.
/// Returns queries per second.
pub fn measure_qps<Q, F>(queries: &[Q], warmup: usize, mut f: F) -> f64
where
    F: FnMut(&Q),
{
    for q in queries.iter().cycle().take(warmup) {
        f(q);
    }
    let start = Instant::now();
    for q in queries {
        f(q);
    }
    qps(queries.len(), start.elapsed())
}

pub fn qps(queries: usize, elapsed: Duration) -> f64 {
    queries as f64 / elapsed.as_secs_f64().max(1e-9)
}
