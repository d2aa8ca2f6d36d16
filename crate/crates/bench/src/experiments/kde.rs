//! kde-sketch-size, kde-window and kde-vs-counter.
//!
//! Each cell streams the whole dataset through an SW-AKDE grid and its exact
//! counter twin, then queries both at the end of the stream and compares
//! against the exact windowed KDE.

use std::time::Instant;

use streamsketch_core::lsh::{auto_range, LshSpec};
use streamsketch_core::oracle::{exact_kde, CounterTwin, KDE_TRIALS};
use streamsketch_core::seed::derive_seed;
use streamsketch_core::swakde::{RaceGrid, SwakdeParams};

use crate::config::{ExperimentConfig, HashKind};
use crate::data::{load, Dataset};
use crate::error::{BenchError, CellContext};
use crate::results::{params, ResultRow};

pub fn spec(cfg: &ExperimentConfig) -> Result<LshSpec, BenchError> {
    Ok(match cfg.hash {
        HashKind::Srp => LshSpec::srp(cfg.concat),
        HashKind::Pstable => LshSpec::pstable(
            cfg.concat,
            cfg.bucket_width.unwrap_or(1.0),
            auto_range(cfg.concat).cell("hash range")?,
        ),
    })
}

/// Per-query errors of one cell.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KdeErrors {
    /// `|Y - K| / K` against the exact windowed KDE.
    pub sketch_vs_exact: Vec<f64>,
    /// `|X - K| / K`: the counter twin against the exact KDE.
    pub twin_vs_exact: Vec<f64>,
    /// `|Y - X| / X` over all rows' means.
    pub sketch_vs_twin: Vec<f64>,
    /// Largest `|Y_i - X_i| / X_i` over the rows of each query.
    pub row_max_vs_twin: Vec<f64>,
    /// Queries with `K = 0` (or `X = 0` for twin comparisons).
    pub excluded: usize,
}

impl KdeErrors {
    fn summary(&self) -> Vec<(String, f64)> {
        let mean = |v: &[f64]| {
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        let e = mean(&self.sketch_vs_exact);
        vec![
            ("mean_rel_error".into(), e),
            ("log_mean_rel_error".into(), e.ln()),
            ("twin_mean_rel_error".into(), mean(&self.twin_vs_exact)),
            ("mean_rel_error_vs_twin".into(), mean(&self.sketch_vs_twin)),
            ("max_rel_error_vs_twin".into(), max(&self.sketch_vs_twin)),
            (
                "max_row_rel_error_vs_twin".into(),
                max(&self.row_max_vs_twin),
            ),
            ("excluded_queries".into(), self.excluded as f64),
        ]
    }
}

/// Exact KDE of every query over the last `window` points of the first `n`.
pub fn exact_values(
    data: &Dataset,
    n: usize,
    window: u64,
    spec: &LshSpec,
    seed: u64,
) -> Result<Vec<f64>, BenchError> {
    let lo = n.saturating_sub(window as usize);
    let win: Vec<&[f32]> = data.points[lo..n].iter().map(|p| p.as_slice()).collect();
    data.queries
        .iter()
        .enumerate()
        .map(|(i, q)| {
            exact_kde(
                &win,
                q.as_slice(),
                spec,
                KDE_TRIALS,
                derive_seed(seed, i as u64),
            )
        })
        .collect::<Result<_, _>>()
        .cell("exact kde")
}

/// Streams the first `n` points into a grid and its twin and measures every
/// query.
pub fn measure_cell(
    params: SwakdeParams,
    data: &Dataset,
    n: usize,
    exact: &[f64],
    cell: &str,
) -> Result<KdeErrors, BenchError> {
    let mut grid = RaceGrid::new(params, data.dim).cell(cell)?;
    let mut twin = CounterTwin::new(params, data.dim).cell(cell)?;
    for x in &data.points[..n] {
        grid.update(x.as_slice()).cell(cell)?;
        twin.update(x.as_slice()).cell(cell)?;
    }
    let mut errs = KdeErrors::default();
    for (q, &k) in data.queries.iter().zip(exact) {
        let y = grid.query(q.as_slice()).cell(cell)?;
        let x = twin.query(q.as_slice()).cell(cell)?;
        if k > 0.0 {
            errs.sketch_vs_exact.push((y.value - k).abs() / k);
            errs.twin_vs_exact.push((x.mean - k).abs() / k);
        } else {
            errs.excluded += 1;
        }
        if x.mean > 0.0 {
            errs.sketch_vs_twin.push((y.value - x.mean).abs() / x.mean);
        }
        errs.row_max_vs_twin
            .push(row_max_error(&y.per_row, &x.per_row));
    }
    Ok(errs)
}

/// Largest per-row relative error; a nonzero estimate over an empty exact
/// count is infinitely wrong.
pub fn row_max_error(estimate: &[f64], exact: &[u64]) -> f64 {
    estimate
        .iter()
        .zip(exact)
        .map(|(&y, &x)| match x {
            0 if y == 0.0 => 0.0,
            0 => f64::INFINITY,
            x => (y - x as f64).abs() / x as f64,
        })
        .fold(0.0, f64::max)
}

pub fn run(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ResultRow>, BenchError> {
    let n = cfg.store_count;
    let data = load(cfg, seed, n)?;
    let spec = spec(cfg)?;
    let mut rows = Vec::new();
    let mut cell_no = 0u64;
    for (wi, &window) in cfg.windows.iter().enumerate() {
        let exact = exact_values(&data, n, window, &spec, derive_seed(seed, 500 + wi as u64))?;
        for &r in &cfg.rows {
            cell_no += 1;
            let p = params(&[("window", window.to_string()), ("rows", r.to_string())]);
            let start = Instant::now();
            let sp = SwakdeParams::new(
                r,
                spec,
                window,
                cfg.eps_prime,
                derive_seed(seed, 1000 + cell_no),
            )
            .cell(&p)?;
            let errs = measure_cell(sp, &data, n, &exact, &p)?;
            let runtime_s = start.elapsed().as_secs_f64();
            for (metric, value) in errs.summary() {
                rows.push(ResultRow {
                    experiment: cfg.experiment.name().to_string(),
                    params: p.clone(),
                    metric,
                    value,
                    runtime_s,
                    seed,
                });
            }
        }
    }
    Ok(rows)
}
