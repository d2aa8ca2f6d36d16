//! Sliding-window kernel density sketch.
//!
//! `L` rows, each an LSH function into `W^p` cells. A cell is created on the
//! first element that hashes to it and holds an [`ExpHistogram`] over the last
//! `N` time steps. Row `i` estimates the number of in-window elements sharing
//! `q`'s cell, and the density estimate is the mean over rows.
//!
//! The clock ticks once per element in [`ClockMode::PerElement`] grids and once
//! per batch in [`ClockMode::PerBatch`] grids; a grid accepts only the update
//! kind matching its mode.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::codec::{Decoder, Encoder};
use crate::eh::{k_for, space_bound, ExpHistogram};
use crate::lsh::{BucketId, LshFunction, LshSpec};
use crate::oracle::CounterTwin;
use crate::{Result, SketchError};

const MAGIC: &[u8; 4] = b"SWKD";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClockMode {
    PerElement,
    PerBatch,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwakdeParams {
    pub rows: usize,
    pub spec: LshSpec,
    /// Window length in ticks.
    pub window: u64,
    pub eps_prime: f64,
    pub seed: u64,
    pub mode: ClockMode,
}

impl SwakdeParams {
    pub fn new(rows: usize, spec: LshSpec, window: u64, eps_prime: f64, seed: u64) -> Result<Self> {
        let p = SwakdeParams {
            rows,
            spec,
            window,
            eps_prime,
            seed,
            mode: ClockMode::PerElement,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn batched(mut self) -> Self {
        self.mode = ClockMode::PerBatch;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.rows == 0 {
            return Err(SketchError::param("L", "need at least one row"));
        }
        if self.window == 0 {
            return Err(SketchError::param("N", "window must be at least 1"));
        }
        if !(self.eps_prime > 0.0 && self.eps_prime <= 1.0) {
            return Err(SketchError::param(
                "eps_prime",
                format!("must lie in (0, 1], got {}", self.eps_prime),
            ));
        }
        self.spec.range()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KdeEstimate {
    /// Mean of `per_row`.
    pub value: f64,
    pub per_row: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceReport {
    pub cells_allocated: usize,
    pub total_eh_buckets: usize,
    /// Worst-case bucket count over all `L * W^p` cells.
    pub theoretical_bound: f64,
}

#[derive(Clone, Debug)]
pub struct RaceGrid {
    params: SwakdeParams,
    dim: usize,
    functions: Vec<LshFunction>,
    cells: Vec<BTreeMap<BucketId, ExpHistogram>>,
    clock: u64,
    max_batch: u64,
}

/// Time of the most recent update, the reference point for queries.
fn now(clock: u64) -> u64 {
    clock.saturating_sub(1)
}

impl RaceGrid {
    pub fn new(params: SwakdeParams, dim: usize) -> Result<Self> {
        params.validate()?;
        let functions = params.spec.build_rows(dim, params.rows, params.seed)?;
        Ok(RaceGrid {
            cells: alloc::vec![BTreeMap::new(); params.rows],
            functions,
            params,
            dim,
            clock: 0,
            max_batch: 1,
        })
    }

    pub fn params(&self) -> &SwakdeParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn functions(&self) -> &[LshFunction] {
        &self.functions
    }

    /// Per-row range `W^p`.
    pub fn row_range(&self) -> u64 {
        self.functions[0].range()
    }

    pub fn cell(&self, row: usize, id: BucketId) -> Option<&ExpHistogram> {
        self.cells.get(row)?.get(&id)
    }

    /// Bucket id of `x` in every row.
    pub fn hash_rows(&self, x: &[f32]) -> Result<Vec<BucketId>> {
        SketchError::check_dim(self.dim, x.len())?;
        Ok(self.functions.iter().map(|f| f.hash_slice(x)).collect())
    }

    pub fn update(&mut self, x: &[f32]) -> Result<()> {
        if self.params.mode != ClockMode::PerElement {
            return Err(SketchError::ClockMode("single-element updates"));
        }
        SketchError::check_dim(self.dim, x.len())?;
        let (t, eps, n) = (self.clock, self.params.eps_prime, self.params.window);
        for (f, row) in self.functions.iter().zip(&mut self.cells) {
            row.entry(f.hash_slice(x))
                .or_insert_with(|| ExpHistogram::new(eps, n).expect("validated"))
                .add(t, 1)?;
        }
        self.clock += 1;
        Ok(())
    }

    /// One tick: every cell touched by the batch receives a single add of the
    /// number of batch elements hashing to it.
    pub fn update_batch<P: AsRef<[f32]>>(&mut self, batch: &[P]) -> Result<()> {
        if self.params.mode != ClockMode::PerBatch {
            return Err(SketchError::ClockMode("batch updates"));
        }
        if batch.is_empty() {
            return Err(SketchError::param(
                "batch",
                "must hold at least one element",
            ));
        }
        for x in batch {
            SketchError::check_dim(self.dim, x.as_ref().len())?;
        }
        let (t, eps, n) = (self.clock, self.params.eps_prime, self.params.window);
        for (f, row) in self.functions.iter().zip(&mut self.cells) {
            let mut counts: BTreeMap<BucketId, u64> = BTreeMap::new();
            for x in batch {
                *counts.entry(f.hash_slice(x.as_ref())).or_default() += 1;
            }
            for (id, amount) in counts {
                row.entry(id)
                    .or_insert_with(|| ExpHistogram::new(eps, n).expect("validated"))
                    .add(t, amount)?;
            }
        }
        self.max_batch = self.max_batch.max(batch.len() as u64);
        self.clock += 1;
        Ok(())
    }

    /// Estimate at the current time. Expires stale buckets in the probed cells.
    pub fn query(&mut self, q: &[f32]) -> Result<KdeEstimate> {
        SketchError::check_dim(self.dim, q.len())?;
        let now = now(self.clock);
        let per_row: Vec<f64> = self
            .functions
            .iter()
            .zip(&mut self.cells)
            .map(|(f, row)| {
                row.get_mut(&f.hash_slice(q))
                    .map_or(0.0, |h| h.estimate(now))
            })
            .collect();
        Ok(estimate(per_row))
    }

    /// Same value as [`query`](Self::query) without touching any cell.
    pub fn peek(&self, q: &[f32]) -> Result<KdeEstimate> {
        SketchError::check_dim(self.dim, q.len())?;
        let now = now(self.clock);
        let per_row: Vec<f64> = self
            .functions
            .iter()
            .zip(&self.cells)
            .map(|(f, row)| {
                row.get(&f.hash_slice(q))
                    .map_or(0.0, |h| h.peek_estimate(now))
            })
            .collect();
        Ok(estimate(per_row))
    }

    /// Expires every cell and drops the ones left empty.
    pub fn expire_all(&mut self) {
        let now = now(self.clock);
        for row in &mut self.cells {
            row.retain(|_, h| {
                h.expire(now);
                !h.is_empty()
            });
        }
    }

    /// A fully expired copy for read-only querying through
    /// [`peek`](Self::peek).
    pub fn snapshot(&mut self) -> RaceGrid {
        self.expire_all();
        self.clone()
    }

    pub fn space_report(&self) -> SpaceReport {
        let cells_allocated = self.cells.iter().map(BTreeMap::len).sum();
        let total_eh_buckets = self
            .cells
            .iter()
            .flat_map(|row| row.values())
            .map(ExpHistogram::bucket_count)
            .sum();
        let per_eh = space_bound(
            k_for(self.params.eps_prime),
            self.params.window.saturating_mul(self.max_batch),
        );
        SpaceReport {
            cells_allocated,
            total_eh_buckets,
            theoretical_bound: self.params.rows as f64 * self.row_range() as f64 * per_eh,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let mut e = Encoder::new(MAGIC, VERSION);
        e.u64(p.rows as u64);
        e.spec(&p.spec);
        e.u64(p.window);
        e.f64(p.eps_prime);
        e.u64(p.seed);
        e.u8(match p.mode {
            ClockMode::PerElement => 0,
            ClockMode::PerBatch => 1,
        });
        e.u64(self.dim as u64);
        e.u64(self.clock);
        e.u64(self.max_batch);
        for row in &self.cells {
            e.u64(row.len() as u64);
            for (id, h) in row {
                e.u64(id.0);
                h.encode(&mut e);
            }
        }
        e.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(buf, MAGIC, VERSION)?;
        let rows = d.u64()? as usize;
        let spec = d.spec()?;
        let window = d.u64()?;
        let eps_prime = d.f64()?;
        let seed = d.u64()?;
        let mode = match d.u8()? {
            0 => ClockMode::PerElement,
            1 => ClockMode::PerBatch,
            m => return Err(SketchError::Snapshot(format!("unknown clock mode {m}"))),
        };
        let dim = d.u64()? as usize;
        if rows > buf.len() || dim > buf.len() {
            return Err(SketchError::Snapshot(format!(
                "{rows} rows of dimension {dim} in {} bytes",
                buf.len()
            )));
        }
        let params = SwakdeParams {
            rows,
            spec,
            window,
            eps_prime,
            seed,
            mode,
        };
        let mut g = RaceGrid::new(params, dim)?;
        g.clock = d.u64()?;
        g.max_batch = d.u64()?;
        let range = g.row_range();
        for row in &mut g.cells {
            let n = d.len(24)?;
            for _ in 0..n {
                let id = BucketId(d.u64()?);
                if id.0 >= range {
                    return Err(SketchError::Snapshot(format!(
                        "cell {} outside range {range}",
                        id.0
                    )));
                }
                let h = ExpHistogram::decode(&mut d, eps_prime, window)?;
                if h.last_time().is_some_and(|t| t >= g.clock) {
                    return Err(SketchError::Snapshot("cell updated after the clock".into()));
                }
                if row.insert(id, h).is_some() {
                    return Err(SketchError::Snapshot(format!("cell {} repeated", id.0)));
                }
            }
        }
        d.finish()?;
        Ok(g)
    }
}

fn estimate(per_row: Vec<f64>) -> KdeEstimate {
    let value = per_row.iter().sum::<f64>() / per_row.len() as f64;
    KdeEstimate { value, per_row }
}

/// Inputs to [`find_optimal_rows`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RowSearch {
    pub eps_prime: f64,
    pub delta: f64,
    /// The concatenation length is forced to 1.
    pub spec: LshSpec,
    pub seed: u64,
    /// Give up (with [`SketchError::Unsatisfiable`]) past this many rows.
    pub max_rows: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowChoice {
    pub rows: usize,
    pub iterations: u32,
    /// Queries whose mean count `K` was 0 and which were left out of the
    /// stopping rule.
    pub excluded_queries: usize,
}

/// Doubles `r` from 1 until `r > 2 max_i X_i^2 / ((1 + eps')^2 K^2) ln(2 / delta)`
/// for every query, where `X_i` are the exact row counts of an `r`-row counter
/// grid over the whole stream and `K` is their mean.
pub fn find_optimal_rows<P: AsRef<[f32]>, Q: AsRef<[f32]>>(
    stream: &[P],
    queries: &[Q],
    search: &RowSearch,
) -> Result<RowChoice> {
    if !(search.delta > 0.0 && search.delta < 1.0) {
        return Err(SketchError::param("delta", "must lie in (0, 1)"));
    }
    if !(search.eps_prime > 0.0 && search.eps_prime <= 1.0) {
        return Err(SketchError::param("eps_prime", "must lie in (0, 1]"));
    }
    let (Some(first), false) = (stream.first(), queries.is_empty()) else {
        return Err(SketchError::param(
            "stream",
            "stream and queries must be non-empty",
        ));
    };
    if search.max_rows == 0 {
        return Err(SketchError::param("max_rows", "must be at least 1"));
    }
    let dim = first.as_ref().len();
    let spec = LshSpec {
        concat: 1,
        ..search.spec
    };
    let scale =
        2.0 * libm::log(2.0 / search.delta) / ((1.0 + search.eps_prime) * (1.0 + search.eps_prime));
    let mut rows = 1usize;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let params = SwakdeParams::new(
            rows,
            spec,
            stream.len() as u64,
            search.eps_prime,
            search.seed,
        )?;
        let mut twin = CounterTwin::new(params, dim)?;
        for x in stream {
            twin.update(x.as_ref())?;
        }
        let mut excluded = 0;
        let mut bound = f64::NEG_INFINITY;
        for q in queries {
            let est = twin.query(q.as_ref())?;
            if est.mean == 0.0 {
                excluded += 1;
                continue;
            }
            let max = est.per_row.iter().copied().max().unwrap_or(0) as f64;
            bound = bound.max(scale * max * max / (est.mean * est.mean));
        }
        if excluded == queries.len() {
            return Err(SketchError::Unsatisfiable(
                "every query has a zero mean count".into(),
            ));
        }
        if rows as f64 > bound {
            return Ok(RowChoice {
                rows,
                iterations,
                excluded_queries: excluded,
            });
        }
        if rows >= search.max_rows {
            return Err(SketchError::Unsatisfiable(format!(
                "stopping bound {bound:.3} still exceeds the row cap {}",
                search.max_rows
            )));
        }
        rows = (rows * 2).min(search.max_rows);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn srp_grid(rows: usize, p: u32, window: u64, seed: u64, dim: usize) -> RaceGrid {
        RaceGrid::new(
            SwakdeParams::new(rows, LshSpec::srp(p), window, 0.1, seed).unwrap(),
            dim,
        )
        .unwrap()
    }

    fn gaussian(r: &mut impl Rng, dim: usize) -> Vec<f32> {
        (0..dim).map(|_| StandardNormal.sample(r)).collect()
    }

    #[test]
    fn new_grid_is_sparse() {
        let g = srp_grid(4, 3, 10, 1, 5);
        assert_eq!(g.row_range(), 8);
        assert_eq!(g.space_report().cells_allocated, 0);
        assert!(SwakdeParams::new(0, LshSpec::srp(1), 10, 0.1, 0).is_err());
        assert!(SwakdeParams::new(1, LshSpec::srp(1), 0, 0.1, 0).is_err());
        assert!(SwakdeParams::new(1, LshSpec::srp(1), 10, 0.0, 0).is_err());
    }

    #[test]
    fn same_seed_same_hashes() {
        let a = srp_grid(6, 4, 10, 77, 3);
        let b = srp_grid(6, 4, 10, 77, 3);
        let x = [0.2f32, -0.7, 1.1];
        assert_eq!(a.hash_rows(&x).unwrap(), b.hash_rows(&x).unwrap());
    }

    #[test]
    fn cells_get_k_from_eps() {
        let mut g = srp_grid(3, 1, 10, 0, 2);
        g.update(&[1.0, 0.5]).unwrap();
        for (row, id) in g.hash_rows(&[1.0, 0.5]).unwrap().into_iter().enumerate() {
            assert_eq!(g.cell(row, id).unwrap().k(), 10);
        }
    }

    #[test]
    fn single_update_and_self_query() {
        let mut g = srp_grid(5, 3, 10, 2, 3);
        assert_eq!(g.query(&[1.0, 1.0, 1.0]).unwrap().value, 0.0);
        let x = [0.3f32, -2.0, 0.9];
        g.update(&x).unwrap();
        let report = g.space_report();
        assert_eq!(report.cells_allocated, 5);
        assert_eq!(report.total_eh_buckets, 5);
        let est = g.query(&x).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.per_row, vec![1.0; 5]);
    }

    #[test]
    fn old_elements_stop_counting() {
        let mut g = srp_grid(4, 2, 5, 3, 2);
        let x = [1.0f32, 2.0];
        let y = [-1.0f32, -2.0];
        g.update(&x).unwrap();
        for _ in 0..4 {
            g.update(&y).unwrap();
        }
        assert_eq!(g.query(&x).unwrap().value, 1.0);
        g.update(&y).unwrap();
        assert_eq!(g.query(&x).unwrap().value, 0.0);
    }

    #[test]
    fn identical_points_fill_rows() {
        let mut g = srp_grid(8, 1, 64, 4, 3);
        let x = [0.1f32, 0.2, 0.3];
        for _ in 0..64 {
            g.update(&x).unwrap();
        }
        for y in g.query(&x).unwrap().per_row {
            assert!((y - 64.0).abs() <= 6.4);
        }
    }

    #[test]
    fn clock_modes_are_exclusive() {
        let params = SwakdeParams::new(2, LshSpec::srp(1), 4, 0.5, 0).unwrap();
        let mut single = RaceGrid::new(params, 2).unwrap();
        assert!(matches!(
            single.update_batch(&[[1.0f32, 0.0]]),
            Err(SketchError::ClockMode(_))
        ));
        let mut batched = RaceGrid::new(params.batched(), 2).unwrap();
        assert!(matches!(
            batched.update(&[1.0, 0.0]),
            Err(SketchError::ClockMode(_))
        ));
        let empty: [[f32; 2]; 0] = [];
        assert!(batched.update_batch(&empty).is_err());
    }

    #[test]
    fn batch_of_copies_lands_in_one_cell_per_row() {
        let params = SwakdeParams::new(3, LshSpec::srp(4), 4, 0.1, 9)
            .unwrap()
            .batched();
        let mut g = RaceGrid::new(params, 2).unwrap();
        g.update_batch(&[[1.0f32, 2.0]; 7]).unwrap();
        assert_eq!(g.clock(), 1);
        assert_eq!(g.space_report().cells_allocated, 3);
        assert_eq!(g.query(&[1.0, 2.0]).unwrap().value, 7.0);
    }

    #[test]
    fn batch_amounts_partition_each_row() {
        let params = SwakdeParams::new(4, LshSpec::srp(3), 4, 0.1, 1)
            .unwrap()
            .batched();
        let mut g = RaceGrid::new(params, 3).unwrap();
        let mut r = rng(5);
        let batch: Vec<Vec<f32>> = (0..25).map(|_| gaussian(&mut r, 3)).collect();
        g.update_batch(&batch).unwrap();
        for row in &g.cells {
            assert_eq!(row.values().map(ExpHistogram::total).sum::<u64>(), 25);
        }
    }

    #[test]
    fn batch_of_one_matches_single_update() {
        let params = SwakdeParams::new(6, LshSpec::srp(2), 5, 0.2, 3).unwrap();
        let mut single = RaceGrid::new(params, 3).unwrap();
        let mut batched = RaceGrid::new(params.batched(), 3).unwrap();
        let mut r = rng(6);
        for _ in 0..40 {
            let x = gaussian(&mut r, 3);
            single.update(&x).unwrap();
            batched.update_batch(&[&x[..]]).unwrap();
            let q = gaussian(&mut r, 3);
            assert_eq!(single.query(&q).unwrap(), batched.query(&q).unwrap());
        }
    }

    #[test]
    fn snapshot_round_trip_and_peek() {
        let mut g = srp_grid(5, 2, 20, 8, 4);
        let mut r = rng(7);
        for _ in 0..100 {
            g.update(&gaussian(&mut r, 4)).unwrap();
        }
        let q = gaussian(&mut r, 4);
        let peeked = g.peek(&q).unwrap();
        let frozen = g.snapshot();
        assert_eq!(frozen.peek(&q).unwrap(), peeked);
        assert_eq!(g.query(&q).unwrap(), peeked);
        let blob = frozen.to_bytes();
        let back = RaceGrid::from_bytes(&blob).unwrap();
        assert_eq!(back.to_bytes(), blob);
        assert_eq!(back.peek(&q).unwrap(), peeked);
        assert!(RaceGrid::from_bytes(&blob[1..]).is_err());
    }

    #[test]
    fn optimal_rows_identical_points() {
        let stream = vec![[1.0f32, 2.0, 3.0]; 50];
        let search = RowSearch {
            eps_prime: 0.1,
            delta: 0.1,
            spec: LshSpec::srp(1),
            seed: 0,
            max_rows: 1 << 20,
        };
        let choice = find_optimal_rows(&stream, &stream[..1], &search).unwrap();
        assert_eq!(choice.rows, 8);
        assert_eq!(choice.iterations, 4);
        assert_eq!(choice.excluded_queries, 0);
    }

    #[test]
    fn optimal_rows_rejects_all_zero_queries() {
        // Opposite points never share an SRP cell.
        let stream = vec![[1.0f32, 1.0]; 10];
        let search = RowSearch {
            eps_prime: 0.1,
            delta: 0.1,
            spec: LshSpec::srp(1),
            seed: 0,
            max_rows: 64,
        };
        assert!(matches!(
            find_optimal_rows(&stream, &[[-1.0f32, -1.0]], &search),
            Err(SketchError::Unsatisfiable(_))
        ));
        let choice = find_optimal_rows(&stream, &[[-1.0f32, -1.0], [1.0, 1.0]], &search).unwrap();
        assert_eq!(choice.excluded_queries, 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn rows_stay_within_eps_of_twin(seed in any::<u64>(), window in 1u64..40, len in 1usize..300) {
            let params = SwakdeParams::new(6, LshSpec::srp(2), window, 0.1, seed).unwrap();
            let mut g = RaceGrid::new(params, 3).unwrap();
            let mut twin = CounterTwin::new(params, 3).unwrap();
            let mut r = rng(seed);
            for i in 0..len {
                let x = gaussian(&mut r, 3);
                g.update(&x).unwrap();
                twin.update(&x).unwrap();
                if i % 7 == 0 {
                    let q = gaussian(&mut r, 3);
                    let y = g.query(&q).unwrap();
                    let x = twin.query(&q).unwrap();
                    for (yi, &xi) in y.per_row.iter().zip(&x.per_row) {
                        prop_assert!((yi - xi as f64).abs() <= 0.1 * xi as f64 + 1e-9);
                    }
                    prop_assert!((y.value - x.mean).abs() <= 0.1 * x.mean + 1e-9);
                }
            }
            let rep = g.space_report();
            prop_assert!(rep.total_eh_buckets as f64 <= rep.theoretical_bound);
        }

        #[test]
        fn rows_nonincreasing_in_delta(seed in any::<u64>()) {
            let mut r = rng(seed);
            let stream: Vec<Vec<f32>> = (0..60).map(|_| gaussian(&mut r, 3)).collect();
            let mut last = usize::MAX;
            for delta in [0.01, 0.1, 0.5, 0.9] {
                let search = RowSearch {
                    eps_prime: 0.1, delta, spec: LshSpec::srp(1), seed, max_rows: 1 << 16,
                };
                let choice = find_optimal_rows(&stream, &stream[..5], &search).unwrap();
                prop_assert!(choice.iterations <= choice.rows.ilog2() + 1);
                prop_assert!(choice.rows <= last);
                last = choice.rows;
            }
        }
    }
}
