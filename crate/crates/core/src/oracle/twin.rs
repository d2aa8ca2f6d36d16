use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use crate::lsh::{BucketId, LshFunction};
use crate::swakde::{ClockMode, SwakdeParams};
use crate::{Result, SketchError};

/// Exact windowed count of one cell: arrival ticks with their amounts.
#[derive(Clone, Debug, Default)]
struct Counter {
    arrivals: VecDeque<(u64, u64)>,
    sum: u64,
}

impl Counter {
    fn add(&mut self, t: u64, amount: u64) {
        match self.arrivals.back_mut() {
            Some((last, n)) if *last == t => *n += amount,
            _ => self.arrivals.push_back((t, amount)),
        }
        self.sum += amount;
    }

    fn count(&mut self, now: u64, window: u64) -> u64 {
        while let Some(&(t, n)) = self.arrivals.front() {
            if t + window > now {
                break;
            }
            self.arrivals.pop_front();
            self.sum -= n;
        }
        self.sum
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwinEstimate {
    /// Mean of `per_row`.
    pub mean: f64,
    pub per_row: Vec<u64>,
}

/// The grid of a [`RaceGrid`](crate::swakde::RaceGrid) with the same
/// parameters, holding exact windowed counters instead of exponential
/// histograms.
#[derive(Clone, Debug)]
pub struct CounterTwin {
    params: SwakdeParams,
    dim: usize,
    functions: Vec<LshFunction>,
    cells: Vec<BTreeMap<BucketId, Counter>>,
    clock: u64,
}

impl CounterTwin {
    pub fn new(params: SwakdeParams, dim: usize) -> Result<Self> {
        params.validate()?;
        let functions = params.spec.build_rows(dim, params.rows, params.seed)?;
        Ok(CounterTwin {
            cells: alloc::vec![BTreeMap::new(); params.rows],
            functions,
            params,
            dim,
            clock: 0,
        })
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn update(&mut self, x: &[f32]) -> Result<()> {
        if self.params.mode != ClockMode::PerElement {
            return Err(SketchError::ClockMode("single-element updates"));
        }
        SketchError::check_dim(self.dim, x.len())?;
        for (f, row) in self.functions.iter().zip(&mut self.cells) {
            row.entry(f.hash_slice(x)).or_default().add(self.clock, 1);
        }
        self.clock += 1;
        Ok(())
    }

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
        for (f, row) in self.functions.iter().zip(&mut self.cells) {
            for x in batch {
                row.entry(f.hash_slice(x.as_ref()))
                    .or_default()
                    .add(self.clock, 1);
            }
        }
        self.clock += 1;
        Ok(())
    }

    pub fn query(&mut self, q: &[f32]) -> Result<TwinEstimate> {
        SketchError::check_dim(self.dim, q.len())?;
        let now = self.clock.saturating_sub(1);
        let window = self.params.window;
        let per_row: Vec<u64> = self
            .functions
            .iter()
            .zip(&mut self.cells)
            .map(|(f, row)| {
                row.get_mut(&f.hash_slice(q))
                    .map_or(0, |c| c.count(now, window))
            })
            .collect();
        let mean = per_row.iter().sum::<u64>() as f64 / per_row.len() as f64;
        Ok(TwinEstimate { mean, per_row })
    }
}
