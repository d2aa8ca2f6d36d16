//! ann-compare, ann-scaling and ann-qps.

use std::time::Instant;

use streamsketch_core::lsh::{estimate_collision_prob, FamilyKind};
use streamsketch_core::oracle::{classify_crann, exact_knn, JlIndex, Verdict};
use streamsketch_core::sann::{Neighbor, QueryOutcome, SannParams, SannSketch, COLLISION_TRIALS};
use streamsketch_core::seed::{derive_seed, splitmix64};
use streamsketch_core::{distance, Point};

use crate::config::{ExperimentConfig, ExperimentKind, HashKind};
use crate::data::{load, Dataset};
use crate::error::{BenchError, CellContext};
use crate::metrics::{compute_metrics, measure_qps, GroundTruth, QueryRecord};
use crate::results::{params, ResultRow};

pub fn family(cfg: &ExperimentConfig) -> FamilyKind {
    match cfg.hash {
        HashKind::Srp => FamilyKind::Srp,
        HashKind::Pstable => FamilyKind::PStable {
            width: cfg.bucket_width.unwrap_or(cfg.r),
            range: None,
        },
    }
}

/// Monte Carlo `(p1, p2)` at radii `r` and `c r`. Depends on the seed and
/// the approximation factor only, so every cell sharing them shares `k`
/// and `L` at equal `n`.
pub fn collision_probs(
    cfg: &ExperimentConfig,
    dim: usize,
    c: f64,
    seed: u64,
) -> Result<(f64, f64), BenchError> {
    let fam = family(cfg);
    let cell = format!("collision probabilities c={c}");
    let p1 = estimate_collision_prob(fam, cfg.r, dim, COLLISION_TRIALS, splitmix64(seed ^ 1))
        .cell(&cell)?;
    let p2 = estimate_collision_prob(fam, c * cfg.r, dim, COLLISION_TRIALS, splitmix64(seed ^ 2))
        .cell(&cell)?;
    Ok((p1, p2))
}

/// Streams the first `n` points into a fresh sketch with stream bound `n`.
#[allow(clippy::too_many_arguments)]
pub fn build_sann(
    cfg: &ExperimentConfig,
    data: &Dataset,
    n: usize,
    eta: f64,
    c: f64,
    probs: (f64, f64),
    seed: u64,
    cell: &str,
) -> Result<SannSketch, BenchError> {
    let p =
        SannParams::new(n as u64, eta, cfg.r, c, probs.0, probs.1, family(cfg), seed).cell(cell)?;
    let mut sketch = SannSketch::new(p, data.dim).cell(cell)?;
    for (i, x) in data.points[..n].iter().enumerate() {
        sketch.insert(i as u64, x.clone()).cell(cell)?;
    }
    Ok(sketch)
}

/// Exact `recall_k` neighbors of every query; the first entry doubles as the
/// exact nearest neighbor.
pub fn ground_truth(data: &Dataset, n: usize, k: usize) -> Result<GroundTruth, BenchError> {
    let stream = data.stream(n);
    let knn = data
        .queries
        .iter()
        .map(|q| {
            exact_knn(stream.iter().copied(), q.as_slice(), k.max(1))
                .map(|v| v.into_iter().map(|nb| nb.id).collect())
        })
        .collect::<Result<Vec<Vec<u64>>, _>>()
        .cell("ground truth")?;
    Ok(GroundTruth { knn })
}

fn verdict(
    data: &Dataset,
    truth: &[u64],
    q: &Point,
    outcome: &QueryOutcome,
    r: f64,
    c: f64,
) -> Verdict {
    // Only the exact nearest neighbor decides whether an r-near point exists.
    let nearest = truth
        .first()
        .map(|&id| (id, data.points[id as usize].as_slice()));
    classify_crann(q.as_slice(), outcome, nearest, r, c)
}

pub fn sann_records(
    sketch: &SannSketch,
    data: &Dataset,
    truth: &GroundTruth,
    r: f64,
    c: f64,
    cell: &str,
) -> Result<Vec<QueryRecord>, BenchError> {
    data.queries
        .iter()
        .zip(&truth.knn)
        .map(|(q, t)| {
            let (outcome, candidates) = sketch.query_with_candidates(q.as_slice()).cell(cell)?;
            Ok(QueryRecord {
                candidates,
                verdict: verdict(data, t, q, &outcome, r, c),
            })
        })
        .collect()
}

/// JL candidates are the `recall_k` nearest points in the projected space;
/// the reported neighbor is the first of them.
pub fn jl_records(
    index: &JlIndex,
    data: &Dataset,
    truth: &GroundTruth,
    recall_k: usize,
    r: f64,
    c: f64,
    cell: &str,
) -> Result<Vec<QueryRecord>, BenchError> {
    data.queries
        .iter()
        .zip(&truth.knn)
        .map(|(q, t)| {
            let candidates = index.query_k(q.as_slice(), recall_k.max(1)).cell(cell)?;
            let outcome = QueryOutcome {
                result: candidates.first().map(|&id| Neighbor {
                    id,
                    distance: distance(data.points[id as usize].as_slice(), q.as_slice()),
                }),
                candidates_examined: index.len(),
            };
            Ok(QueryRecord {
                candidates,
                verdict: verdict(data, t, q, &outcome, r, c),
            })
        })
        .collect()
}

pub fn sann_qps(sketch: &SannSketch, data: &Dataset, warmup: usize) -> f64 {
    measure_qps(&data.queries, warmup, |q| {
        std::hint::black_box(sketch.query(q.as_slice()).ok());
    })
}

pub fn jl_qps(index: &JlIndex, data: &Dataset, warmup: usize) -> f64 {
    measure_qps(&data.queries, warmup, |q| {
        std::hint::black_box(index.query(q.as_slice()).ok());
    })
}

pub fn build_jl(
    data: &Dataset,
    n: usize,
    k: usize,
    seed: u64,
    cell: &str,
) -> Result<JlIndex, BenchError> {
    JlIndex::build(&data.stream(n), data.dim, k, seed, false).cell(cell)
}

struct Emitter<'a> {
    experiment: &'static str,
    seed: u64,
    rows: &'a mut Vec<ResultRow>,
}

impl Emitter<'_> {
    fn emit(&mut self, params: &str, metrics: &[(String, f64)], runtime_s: f64) {
        for (name, value) in metrics {
            self.rows.push(ResultRow {
                experiment: self.experiment.to_string(),
                params: params.to_string(),
                metric: name.clone(),
                value: *value,
                runtime_s,
                seed: self.seed,
            });
        }
    }
}

pub fn run(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ResultRow>, BenchError> {
    match cfg.experiment {
        ExperimentKind::AnnScaling => scaling(cfg, seed),
        ExperimentKind::AnnCompare | ExperimentKind::AnnQps => compare(cfg, seed),
        other => unreachable!("{} is not an ANN experiment", other.name()),
    }
}

/// Both ann-compare and ann-qps: every (epsilon, eta) S-ANN cell and every
/// (epsilon, k) JL cell, with accuracy metrics and throughput.
fn compare(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ResultRow>, BenchError> {
    let n = cfg.store_count;
    let data = load(cfg, seed, n)?;
    check_jl_dims(cfg, data.dim)?;
    let truth = ground_truth(&data, n, cfg.recall_k)?;
    let mut rows = Vec::new();
    let mut out = Emitter {
        experiment: cfg.experiment.name(),
        seed,
        rows: &mut rows,
    };
    let mut cell_no = 0u64;
    for (ei, &c) in cfg.approximation_factors().iter().enumerate() {
        let eps = cfg.epsilon[ei];
        let probs = collision_probs(cfg, data.dim, c, derive_seed(seed, ei as u64))?;
        for &eta in &cfg.eta {
            cell_no += 1;
            let p = params(&[
                ("method", "sann".into()),
                ("epsilon", eps.to_string()),
                ("eta", eta.to_string()),
            ]);
            let start = Instant::now();
            let sketch = build_sann(
                cfg,
                &data,
                n,
                eta,
                c,
                probs,
                derive_seed(seed, 1000 + cell_no),
                &p,
            )?;
            let records = sann_records(&sketch, &data, &truth, cfg.r, c, &p)?;
            let mem = sketch.memory_report();
            let m = compute_metrics(&records, &truth, mem.bytes_estimate, n, data.dim).cell(&p)?;
            let qps = sann_qps(&sketch, &data, cfg.warmup);
            let mut metrics = m.named(cfg.recall_k);
            metrics.extend([
                ("qps".to_string(), qps),
                ("stored_points".to_string(), mem.points_stored as f64),
                ("tables".to_string(), sketch.num_tables() as f64),
                ("k".to_string(), f64::from(sketch.params().k)),
            ]);
            out.emit(&p, &metrics, start.elapsed().as_secs_f64());
        }
    }
    for (ki, &k) in cfg.jl_dims.iter().enumerate() {
        let start = Instant::now();
        let cell = format!("method=jl;k={k}");
        let index = build_jl(&data, n, k, derive_seed(seed, 2000 + ki as u64), &cell)?;
        let qps = jl_qps(&index, &data, cfg.warmup);
        let built = start.elapsed().as_secs_f64();
        for (ei, &c) in cfg.approximation_factors().iter().enumerate() {
            let start = Instant::now();
            let p = params(&[
                ("method", "jl".into()),
                ("epsilon", cfg.epsilon[ei].to_string()),
                ("k", k.to_string()),
            ]);
            let records = jl_records(&index, &data, &truth, cfg.recall_k, cfg.r, c, &p)?;
            let m =
                compute_metrics(&records, &truth, index.bytes_estimate(), n, data.dim).cell(&p)?;
            let mut metrics = m.named(cfg.recall_k);
            metrics.push(("qps".to_string(), qps));
            out.emit(&p, &metrics, built + start.elapsed().as_secs_f64());
        }
    }
    Ok(rows)
}

fn check_jl_dims(cfg: &ExperimentConfig, dim: usize) -> Result<(), BenchError> {
    match cfg.jl_dims.iter().find(|&&k| k > dim) {
        Some(k) => Err(crate::config::ConfigError(format!(
            "JL dimension {k} exceeds data dimension {dim}"
        ))
        .into()),
        None => Ok(()),
    }
}

/// Sketch size against stream length; no queries are issued.
fn scaling(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ResultRow>, BenchError> {
    let longest = cfg.sizes.iter().copied().max().unwrap_or(0);
    let data = load(cfg, seed, longest)?;
    let mut rows = Vec::new();
    let mut out = Emitter {
        experiment: cfg.experiment.name(),
        seed,
        rows: &mut rows,
    };
    let mut cell_no = 0u64;
    for (ei, &c) in cfg.approximation_factors().iter().enumerate() {
        let probs = collision_probs(cfg, data.dim, c, derive_seed(seed, ei as u64))?;
        for &n in &cfg.sizes {
            for &eta in &cfg.eta {
                cell_no += 1;
                let p = params(&[
                    ("epsilon", cfg.epsilon[ei].to_string()),
                    ("n", n.to_string()),
                    ("eta", eta.to_string()),
                ]);
                let start = Instant::now();
                let sketch = build_sann(
                    cfg,
                    &data,
                    n,
                    eta,
                    c,
                    probs,
                    derive_seed(seed, 1000 + cell_no),
                    &p,
                )?;
                let mem = sketch.memory_report();
                let metrics = [
                    ("bytes".to_string(), mem.bytes_estimate as f64),
                    (
                        "compression".to_string(),
                        crate::metrics::compression(mem.bytes_estimate, n, data.dim),
                    ),
                    ("stored_points".to_string(), mem.points_stored as f64),
                    ("tables".to_string(), sketch.num_tables() as f64),
                ];
                out.emit(&p, &metrics, start.elapsed().as_secs_f64());
            }
        }
    }
    Ok(rows)
}
