//! Sampled-LSH streaming `(c, r)`-approximate near neighbor search.
//!
//! The sketch keeps each stream element independently with probability
//! `n^-eta` and indexes the kept points in `L` hash tables keyed by
//! `k`-concatenated LSH functions. A query scans the tables in order, stops
//! collecting once it holds `3L` candidates, and returns the closest candidate
//! if it lies within `c * r`.
//!
//! Deletions remove a retained point from every table (strict turnstile: the
//! caller only deletes what it inserted). Ids that were dropped by sampling are
//! unknown to the sketch, so deleting them is a no-op and re-inserting them is
//! not detected as a duplicate.

use alloc::collections::BTreeMap;
use core::hash::{BuildHasherDefault, Hasher};

use alloc::format;
use alloc::vec::Vec;
use hashbrown::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{Decoder, Encoder};
use crate::lsh::{estimate_collision_prob, BucketId, FamilyKind, LshFunction, LshSpec};
use crate::point::distance;
use crate::seed::{fmix64, rng, splitmix64};
use crate::{Point, Result, SketchError};

const MAGIC: &[u8; 4] = b"SANN";
const VERSION: u32 = 1;
const SAMPLER_SALT: u64 = 0x5341_4E4E_5341_4D50;

/// Trials behind each Monte Carlo collision probability in
/// [`SannParams::estimated`].
pub const COLLISION_TRIALS: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derived {
    pub rho: f64,
    pub k: u32,
    pub tables: usize,
}

fn ceil_tol(x: f64) -> f64 {
    libm::ceil(x - 1e-9 * x.abs().max(1.0))
}

/// `rho = ln(1/p1) / ln(1/p2)`, `k = ceil(ln n / ln(1/p2))`,
/// `L = ceil(n^rho / p1)`.
pub fn derive_params(n: u64, p1: f64, p2: f64) -> Result<Derived> {
    if n < 2 {
        return Err(SketchError::param("n", "stream bound must be at least 2"));
    }
    if !(p2 > 0.0 && p1 < 1.0) {
        return Err(SketchError::param(
            "p1/p2",
            format!("collision probabilities must lie in (0, 1), got p1 = {p1}, p2 = {p2}"),
        ));
    }
    if p1 <= p2 {
        return Err(SketchError::param(
            "p1/p2",
            format!("family is not sensitive: p1 = {p1} <= p2 = {p2}"),
        ));
    }
    let ln_n = libm::log(n as f64);
    let inv2 = libm::log(1.0 / p2);
    let rho = libm::log(1.0 / p1) / inv2;
    let k = ceil_tol(ln_n / inv2).max(1.0);
    let tables = ceil_tol(libm::exp(rho * ln_n) / p1).max(1.0);
    if k > f64::from(u32::MAX) || tables > 1e9 {
        return Err(SketchError::param(
            "p1/p2",
            format!("derived k = {k}, L = {tables} are impractically large"),
        ));
    }
    Ok(Derived {
        rho,
        k: k as u32,
        tables: tables as usize,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SannParams {
    /// Declared upper bound on the stream length.
    pub n: u64,
    pub eta: f64,
    pub r: f64,
    pub c: f64,
    pub p1: f64,
    pub p2: f64,
    pub k: u32,
    pub tables: usize,
    pub family: FamilyKind,
    pub seed: u64,
}

impl SannParams {
    /// Parameters with `k` and `L` derived from the given collision
    /// probabilities.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: u64,
        eta: f64,
        r: f64,
        c: f64,
        p1: f64,
        p2: f64,
        family: FamilyKind,
        seed: u64,
    ) -> Result<Self> {
        let d = derive_params(n, p1, p2)?;
        let params = SannParams {
            n,
            eta,
            r,
            c,
            p1,
            p2,
            k: d.k,
            tables: d.tables,
            family,
            seed,
        };
        params.validate()?;
        Ok(params)
    }

    /// Estimates `p1` and `p2` by Monte Carlo at radii `r` and `c * r`, then
    /// derives `k` and `L`.
    #[allow(clippy::too_many_arguments)]
    pub fn estimated(
        n: u64,
        eta: f64,
        r: f64,
        c: f64,
        family: FamilyKind,
        dim: usize,
        seed: u64,
    ) -> Result<Self> {
        let p1 = estimate_collision_prob(family, r, dim, COLLISION_TRIALS, splitmix64(seed ^ 1))?;
        let p2 =
            estimate_collision_prob(family, c * r, dim, COLLISION_TRIALS, splitmix64(seed ^ 2))?;
        Self::new(n, eta, r, c, p1, p2, family, seed)
    }

    /// p-stable hashing with bucket width `w = r` and an automatic digit
    /// range.
    pub fn pstable(n: u64, eta: f64, r: f64, c: f64, dim: usize, seed: u64) -> Result<Self> {
        let family = FamilyKind::PStable {
            width: r,
            range: None,
        };
        Self::estimated(n, eta, r, c, family, dim, seed)
    }

    /// Replaces the derived concatenation length and table count.
    pub fn with_tables(mut self, k: u32, tables: usize) -> Result<Self> {
        self.k = k;
        self.tables = tables;
        self.validate()?;
        Ok(self)
    }

    pub fn sample_rate(&self) -> f64 {
        libm::pow(self.n as f64, -self.eta)
    }

    pub fn spec(&self) -> LshSpec {
        LshSpec {
            kind: self.family,
            concat: self.k,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(SketchError::param("n", "stream bound must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(SketchError::param(
                "eta",
                format!("must lie in [0, 1], got {}", self.eta),
            ));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(SketchError::param(
                "r",
                "radius must be positive and finite",
            ));
        }
        if !(self.c > 1.0 && self.c.is_finite()) {
            return Err(SketchError::param(
                "c",
                "approximation factor must exceed 1",
            ));
        }
        if self.k == 0 {
            return Err(SketchError::param("k", "must be at least 1"));
        }
        if self.tables == 0 {
            return Err(SketchError::param("L", "must be at least 1"));
        }
        self.spec().range()?;
        Ok(())
    }
}

/// Bucket ids are already well mixed, so one finalizer round suffices.
#[derive(Default)]
struct IdHasher(u64);

impl Hasher for IdHasher {
    fn finish(&self) -> u64 {
        fmix64(self.0)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0 << 8 | u64::from(b)).rotate_left(5);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.0 ^= v;
    }
}

type Table = HashMap<BucketId, u32, BuildHasherDefault<IdHasher>>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: u64,
    pub distance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryOutcome {
    /// Closest candidate, present only when within `c * r`.
    pub result: Option<Neighbor>,
    /// Candidates collected before deduplication.
    pub candidates_examined: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct MemoryReport {
    pub points_stored: usize,
    pub bucket_entries: usize,
    pub bytes_estimate: usize,
}

const NIL: u32 = u32::MAX;

/// Tables are chained through the slots of the retained points: each table
/// maps a bucket id to the newest slot in that bucket, and
/// `next[slot * L + t]` links to the following slot of table `t`.
#[derive(Clone, Debug)]
pub struct SannSketch {
    params: SannParams,
    dim: usize,
    sample_rate: f64,
    functions: Vec<LshFunction>,
    heads: Vec<Table>,
    next: Vec<u32>,
    slots: Vec<Option<(u64, Point)>>,
    free: Vec<u32>,
    by_id: BTreeMap<u64, u32>,
    seen: u64,
    sampler: ChaCha8Rng,
}

impl SannSketch {
    pub fn new(params: SannParams, dim: usize) -> Result<Self> {
        params.validate()?;
        let functions = params.spec().build_rows(dim, params.tables, params.seed)?;
        Ok(SannSketch {
            sample_rate: params.sample_rate(),
            heads: alloc::vec![Table::default(); params.tables],
            next: Vec::new(),
            slots: Vec::new(),
            free: Vec::new(),
            by_id: BTreeMap::new(),
            seen: 0,
            sampler: rng(splitmix64(params.seed ^ SAMPLER_SALT)),
            functions,
            params,
            dim,
        })
    }

    pub fn params(&self) -> &SannParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn num_tables(&self) -> usize {
        self.heads.len()
    }

    /// Stream elements offered so far, retained or not.
    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn stored_count(&self) -> usize {
        self.by_id.len()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.by_id.contains_key(&id)
    }

    /// Retained points in ascending id order.
    pub fn retained(&self) -> impl Iterator<Item = (u64, &Point)> + '_ {
        self.by_id.iter().map(|(&id, &s)| (id, self.point(s)))
    }

    pub fn get(&self, id: u64) -> Option<&Point> {
        self.by_id.get(&id).map(|&s| self.point(s))
    }

    fn point(&self, slot: u32) -> &Point {
        &self.slots[slot as usize].as_ref().expect("live slot").1
    }

    fn slot_id(&self, slot: u32) -> u64 {
        self.slots[slot as usize].as_ref().expect("live slot").0
    }

    /// Offers one stream element. One Bernoulli draw decides retention.
    pub fn insert(&mut self, id: u64, x: Point) -> Result<bool> {
        SketchError::check_dim(self.dim, x.dim())?;
        if self.by_id.contains_key(&id) {
            return Err(SketchError::DuplicateId(id));
        }
        if self.seen >= self.params.n {
            return Err(SketchError::StreamBound {
                bound: self.params.n,
            });
        }
        self.seen += 1;
        if self.sampler.random::<f64>() >= self.sample_rate {
            return Ok(false);
        }
        self.index(id, x);
        Ok(true)
    }

    /// Stores `x` under `id` without a sampling draw and without counting
    /// toward `n`. Undoes a [`delete`](Self::delete).
    pub fn reinsert(&mut self, id: u64, x: Point) -> Result<()> {
        SketchError::check_dim(self.dim, x.dim())?;
        if self.by_id.contains_key(&id) {
            return Err(SketchError::DuplicateId(id));
        }
        self.index(id, x);
        Ok(())
    }

    fn alloc_slot(&mut self, id: u64, x: Point) -> u32 {
        let l = self.heads.len();
        match self.free.pop() {
            Some(s) => {
                self.slots[s as usize] = Some((id, x));
                s
            }
            None => {
                let s = self.slots.len() as u32;
                assert!(s < NIL, "slot space exhausted");
                self.slots.push(Some((id, x)));
                self.next.resize(self.next.len() + l, NIL);
                s
            }
        }
    }

    fn index(&mut self, id: u64, x: Point) {
        let slot = self.alloc_slot(id, x);
        let l = self.heads.len();
        let x = &self.slots[slot as usize].as_ref().expect("live slot").1;
        for (t, (f, table)) in self.functions.iter().zip(&mut self.heads).enumerate() {
            let head = table.entry(f.hash_slice(x)).or_insert(NIL);
            self.next[slot as usize * l + t] = *head;
            *head = slot;
        }
        self.by_id.insert(id, slot);
    }

    pub fn delete(&mut self, id: u64) -> bool {
        let Some(slot) = self.by_id.remove(&id) else {
            return false;
        };
        let l = self.heads.len();
        let (_, x) = self.slots[slot as usize].take().expect("live slot");
        for (t, (f, table)) in self.functions.iter().zip(&mut self.heads).enumerate() {
            let key = f.hash_slice(&x);
            let after = self.next[slot as usize * l + t];
            let head = table.get_mut(&key).expect("indexed bucket");
            if *head == slot {
                if after == NIL {
                    table.remove(&key);
                } else {
                    *head = after;
                }
            } else {
                let mut s = *head;
                while self.next[s as usize * l + t] != slot {
                    s = self.next[s as usize * l + t];
                }
                self.next[s as usize * l + t] = after;
            }
            self.next[slot as usize * l + t] = NIL;
        }
        self.free.push(slot);
        true
    }

    fn chain(&self, t: usize, head: u32) -> impl Iterator<Item = u32> + '_ {
        let l = self.heads.len();
        core::iter::successors((head != NIL).then_some(head), move |&s| {
            let n = self.next[s as usize * l + t];
            (n != NIL).then_some(n)
        })
    }

    pub fn query(&self, q: &[f32]) -> Result<QueryOutcome> {
        SketchError::check_dim(self.dim, q.len())?;
        Ok(self.run_query(q).0)
    }

    /// The outcome plus the deduplicated candidate ids, ascending.
    pub fn query_with_candidates(&self, q: &[f32]) -> Result<(QueryOutcome, Vec<u64>)> {
        SketchError::check_dim(self.dim, q.len())?;
        Ok(self.run_query(q))
    }

    fn run_query(&self, q: &[f32]) -> (QueryOutcome, Vec<u64>) {
        let cap = 3 * self.heads.len();
        let mut slots = Vec::new();
        for (t, (f, table)) in self.functions.iter().zip(&self.heads).enumerate() {
            if let Some(&head) = table.get(&f.hash_slice(q)) {
                slots.extend(self.chain(t, head));
                if slots.len() >= cap {
                    break;
                }
            }
        }
        let examined = slots.len();
        let mut cands: Vec<(u64, u32)> = slots.into_iter().map(|s| (self.slot_id(s), s)).collect();
        cands.sort_unstable();
        cands.dedup();
        let mut best: Option<Neighbor> = None;
        for &(id, s) in &cands {
            let d = distance(self.point(s), q);
            if best.is_none_or(|b| d < b.distance) {
                best = Some(Neighbor { id, distance: d });
            }
        }
        let limit = self.params.c * self.params.r;
        let outcome = QueryOutcome {
            result: best.filter(|b| b.distance <= limit),
            candidates_examined: examined,
        };
        (outcome, cands.into_iter().map(|(id, _)| id).collect())
    }

    /// Per-query outcomes identical to calling [`query`](Self::query) on each
    /// element. Every dimension is checked before any query runs.
    pub fn query_batch<Q: AsRef<[f32]> + Sync>(&self, queries: &[Q]) -> Result<Vec<QueryOutcome>> {
        for q in queries {
            SketchError::check_dim(self.dim, q.as_ref().len())?;
        }
        #[cfg(feature = "std")]
        {
            use rayon::prelude::*;
            Ok(queries
                .par_iter()
                .map(|q| self.run_query(q.as_ref()).0)
                .collect())
        }
        #[cfg(not(feature = "std"))]
        {
            Ok(queries
                .iter()
                .map(|q| self.run_query(q.as_ref()).0)
                .collect())
        }
    }

    /// Every retained point sits in exactly one bucket of every table; the
    /// estimate charges 4 bytes per coordinate and 8 per bucket entry.
    pub fn memory_report(&self) -> MemoryReport {
        let points_stored = self.by_id.len();
        let bucket_entries = points_stored * self.heads.len();
        MemoryReport {
            points_stored,
            bucket_entries,
            bytes_estimate: points_stored * self.dim * 4 + bucket_entries * 8,
        }
    }

    /// Number of tables in which `id` appears.
    pub fn occurrences(&self, id: u64) -> usize {
        let Some(&slot) = self.by_id.get(&id) else {
            return 0;
        };
        self.heads
            .iter()
            .enumerate()
            .map(|(t, table)| {
                table
                    .values()
                    .map(|&h| self.chain(t, h).filter(|&s| s == slot).count())
                    .sum::<usize>()
            })
            .sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let mut e = Encoder::new(MAGIC, VERSION);
        e.u64(p.n);
        e.f64(p.eta);
        e.f64(p.r);
        e.f64(p.c);
        e.f64(p.p1);
        e.f64(p.p2);
        e.u64(p.tables as u64);
        e.spec(&p.spec());
        e.u64(p.seed);
        e.u64(self.dim as u64);
        e.u64(self.seen);
        e.bytes(&self.sampler.get_seed());
        e.u64(self.sampler.get_stream());
        e.u128(self.sampler.get_word_pos());
        e.u64(self.by_id.len() as u64);
        for (id, x) in self.retained() {
            e.u64(id);
            e.f32s(x);
        }
        for (t, table) in self.heads.iter().enumerate() {
            e.u64(table.len() as u64);
            let mut buckets: Vec<_> = table.iter().collect();
            buckets.sort_unstable_by_key(|(k, _)| **k);
            for (key, &head) in buckets {
                e.u64(key.0);
                e.u64(self.chain(t, head).count() as u64);
                for s in self.chain(t, head) {
                    e.u64(self.slot_id(s));
                }
            }
        }
        e.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut d = Decoder::new(buf, MAGIC, VERSION)?;
        let n = d.u64()?;
        let eta = d.f64()?;
        let r = d.f64()?;
        let c = d.f64()?;
        let p1 = d.f64()?;
        let p2 = d.f64()?;
        let tables = d.u64()? as usize;
        let spec = d.spec()?;
        let seed = d.u64()?;
        let dim = d.u64()? as usize;
        let params = SannParams {
            n,
            eta,
            r,
            c,
            p1,
            p2,
            k: spec.concat,
            tables,
            family: spec.kind,
            seed,
        };
        params.validate()?;
        if tables > buf.len() {
            return Err(SketchError::Snapshot(format!(
                "{tables} tables in {} bytes",
                buf.len()
            )));
        }
        let mut s = SannSketch::new(params, dim)?;
        s.seen = d.u64()?;
        let mut sampler = ChaCha8Rng::from_seed(d.array()?);
        sampler.set_stream(d.u64()?);
        sampler.set_word_pos(d.u128()?);
        s.sampler = sampler;
        let stored = d.len(8 + 4 * dim)?;
        if stored.saturating_mul(tables).saturating_mul(8) > buf.len() {
            return Err(SketchError::Snapshot(format!(
                "{stored} points in {tables} tables cannot fit in {} bytes",
                buf.len()
            )));
        }
        for _ in 0..stored {
            let id = d.u64()?;
            let x = Point::new(d.f32s(dim)?)
                .map_err(|e| SketchError::Snapshot(format!("point {id}: {e}")))?;
            if s.by_id.contains_key(&id) {
                return Err(SketchError::Snapshot(format!("point {id} stored twice")));
            }
            let slot = s.alloc_slot(id, x);
            s.by_id.insert(id, slot);
        }
        let l = s.heads.len();
        let mut placed = alloc::vec![false; s.slots.len()];
        for t in 0..l {
            placed.iter_mut().for_each(|p| *p = false);
            let buckets = d.len(16)?;
            for _ in 0..buckets {
                let key = BucketId(d.u64()?);
                let len = d.len(8)?;
                let mut chain = Vec::with_capacity(len);
                for _ in 0..len {
                    let id = d.u64()?;
                    let Some(&slot) = s.by_id.get(&id) else {
                        return Err(SketchError::Snapshot(format!(
                            "bucket names unknown point {id}"
                        )));
                    };
                    if core::mem::replace(&mut placed[slot as usize], true) {
                        return Err(SketchError::Snapshot(format!(
                            "point {id} twice in table {t}"
                        )));
                    }
                    chain.push(slot);
                }
                if chain.is_empty() || s.heads[t].contains_key(&key) {
                    return Err(SketchError::Snapshot("empty or repeated bucket".into()));
                }
                for w in chain.windows(2) {
                    s.next[w[0] as usize * l + t] = w[1];
                }
                s.heads[t].insert(key, chain[0]);
            }
            if placed.iter().any(|p| !p) {
                return Err(SketchError::Snapshot(format!(
                    "table {t} misses a stored point"
                )));
            }
        }
        d.finish()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn srp_params(n: u64, eta: f64, k: u32, l: usize, seed: u64) -> SannParams {
        SannParams::new(n, eta, 1.0, 2.0, 0.5, 0.25, FamilyKind::Srp, seed)
            .unwrap()
            .with_tables(k, l)
            .unwrap()
    }

    fn random_point(r: &mut ChaCha8Rng, dim: usize) -> Point {
        Point::new((0..dim).map(|_| StandardNormal.sample(r)).collect()).unwrap()
    }

    #[test]
    fn derive_examples() {
        let d = derive_params(10_000, 0.5, 0.25).unwrap();
        assert!((d.rho - 0.5).abs() < 1e-12);
        assert_eq!(d.k, 7);
        assert_eq!(d.tables, 200);

        let d = derive_params(2, 0.9, 0.5).unwrap();
        assert_eq!(d.k, 1);
        assert!((d.rho - 0.152).abs() < 1e-3);
        assert_eq!(d.tables, 2);

        assert!(derive_params(100, 0.5, 0.5).is_err());
        assert!(derive_params(100, 0.4, 0.5).is_err());
        assert!(derive_params(1, 0.9, 0.5).is_err());
    }

    #[test]
    fn new_sketch_is_empty() {
        let s = SannSketch::new(srp_params(10_000, 0.5, 7, 200, 1), 8).unwrap();
        assert_eq!(s.num_tables(), 200);
        assert_eq!(s.stored_count(), 0);
        assert_eq!(s.memory_report(), MemoryReport::default());
    }

    #[test]
    fn sample_rate_extremes() {
        assert_eq!(srp_params(10_000, 0.0, 4, 3, 0).sample_rate(), 1.0);
        assert!((srp_params(10_000, 1.0, 4, 3, 0).sample_rate() - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn eta_zero_keeps_everything() {
        let mut s = SannSketch::new(srp_params(100, 0.0, 4, 5, 3), 4).unwrap();
        let mut r = rng(9);
        for id in 0..100 {
            assert!(s.insert(id, random_point(&mut r, 4)).unwrap());
        }
        assert_eq!(s.stored_count(), 100);
        assert!(matches!(
            s.insert(100, random_point(&mut r, 4)),
            Err(SketchError::StreamBound { bound: 100 })
        ));
    }

    #[test]
    fn insert_errors() {
        let mut s = SannSketch::new(srp_params(100, 0.0, 4, 5, 3), 3).unwrap();
        let x = Point::new(vec![1.0, 2.0, 3.0]).unwrap();
        s.insert(7, x.clone()).unwrap();
        assert_eq!(s.insert(7, x), Err(SketchError::DuplicateId(7)));
        assert!(matches!(
            s.insert(8, Point::new(vec![1.0]).unwrap()),
            Err(SketchError::Dimension { .. })
        ));
        assert!(s.query(&[1.0]).is_err());
    }

    #[test]
    fn retained_point_in_every_table_and_delete_inverts() {
        let mut s = SannSketch::new(srp_params(1000, 0.0, 6, 200, 4), 5).unwrap();
        let mut r = rng(1);
        s.insert(1, random_point(&mut r, 5)).unwrap();
        assert_eq!(s.occurrences(1), 200);
        assert_eq!(s.memory_report().bucket_entries, 200);
        assert_eq!(s.memory_report().bytes_estimate, 5 * 4 + 200 * 8);
        let before = s.stored_count();
        s.insert(2, random_point(&mut r, 5)).unwrap();
        assert!(s.delete(2));
        assert_eq!(s.stored_count(), before);
        assert_eq!(s.occurrences(2), 0);
        assert!(!s.delete(2));
        assert!(!s.delete(99));
    }

    #[test]
    fn empty_and_identity_queries() {
        let mut s = SannSketch::new(srp_params(1000, 0.0, 6, 20, 4), 3).unwrap();
        let q = Point::new(vec![0.5, -1.0, 2.0]).unwrap();
        let out = s.query(&q).unwrap();
        assert_eq!(out.result, None);
        assert_eq!(out.candidates_examined, 0);
        s.insert(42, q.clone()).unwrap();
        let out = s.query(&q).unwrap();
        assert_eq!(
            out.result,
            Some(Neighbor {
                id: 42,
                distance: 0.0
            })
        );
    }

    #[test]
    fn far_candidates_are_not_returned() {
        let mut s = SannSketch::new(srp_params(1000, 0.0, 1, 4, 4), 2).unwrap();
        s.insert(1, Point::new(vec![10.0, 10.0]).unwrap()).unwrap();
        // Same direction, so every SRP table collides, but far beyond c * r.
        let out = s.query(&[1.0, 1.0]).unwrap();
        assert!(out.candidates_examined > 0);
        assert_eq!(out.result, None);
    }

    #[test]
    fn ties_go_to_smallest_id() {
        let mut s = SannSketch::new(srp_params(1000, 0.0, 2, 3, 4), 2).unwrap();
        s.insert(9, Point::new(vec![1.0, 0.0]).unwrap()).unwrap();
        s.insert(4, Point::new(vec![1.0, 0.0]).unwrap()).unwrap();
        let out = s.query(&[1.0, 0.0]).unwrap();
        assert_eq!(out.result.unwrap().id, 4);
        assert_eq!(out.candidates_examined, 6);
    }

    #[test]
    fn candidate_cap_stops_between_buckets() {
        // Every point shares the query's SRP buckets, so table 1 alone
        // supplies 3L candidates.
        let l = 4;
        let mut s = SannSketch::new(srp_params(1000, 0.0, 1, l, 8), 2).unwrap();
        for id in 0..20 {
            s.insert(id, Point::new(vec![1.0 + id as f32, 1.0]).unwrap())
                .unwrap();
        }
        let out = s.query(&[1.0, 1.0]).unwrap();
        assert_eq!(out.candidates_examined, 20);
        assert!(out.candidates_examined <= 3 * l + 20);
    }

    #[test]
    fn retention_concentrates() {
        let n = 10_000u64;
        for seed in 0..5 {
            let mut s = SannSketch::new(srp_params(n, 0.5, 3, 1, seed), 1).unwrap();
            for id in 0..n {
                s.insert(id, Point::new(vec![id as f32 + 1.0]).unwrap())
                    .unwrap();
            }
            let sd = libm::sqrt(n as f64 * 0.01 * 0.99);
            assert!(
                (s.stored_count() as f64 - 100.0).abs() <= 3.0 * sd,
                "{}",
                s.stored_count()
            );
        }
    }

    #[test]
    fn snapshot_round_trip_is_bit_identical() {
        let params = SannParams::new(
            500,
            0.2,
            1.0,
            1.5,
            0.6,
            0.3,
            FamilyKind::PStable {
                width: 1.0,
                range: None,
            },
            11,
        )
        .unwrap()
        .with_tables(3, 10)
        .unwrap();
        let mut s = SannSketch::new(params, 4).unwrap();
        let mut r = rng(2);
        for id in 0..200 {
            s.insert(id, random_point(&mut r, 4)).unwrap();
        }
        let first = s.retained().next().unwrap().0;
        s.delete(first);
        let blob = s.to_bytes();
        let mut back = SannSketch::from_bytes(&blob).unwrap();
        assert_eq!(back.to_bytes(), blob);
        let q = random_point(&mut r, 4);
        assert_eq!(back.query(&q).unwrap(), s.query(&q).unwrap());
        // The sampler state survives too.
        let x = random_point(&mut r, 4);
        assert_eq!(
            back.insert(1000, x.clone()).unwrap(),
            s.insert(1000, x).unwrap()
        );

        let mut bad = blob.clone();
        bad[0] = b'X';
        assert!(SannSketch::from_bytes(&bad).is_err());
        assert!(SannSketch::from_bytes(&blob[..blob.len() - 3]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn returned_points_are_within_cr_and_never_deleted(
            seed in any::<u64>(),
            coords in prop::collection::vec(-3.0f32..3.0, 3 * 60),
            deletions in prop::collection::vec(0u64..60, 0..20),
            queries in prop::collection::vec(-3.0f32..3.0, 3 * 10),
        ) {
            let params = SannParams::new(
                100, 0.0, 0.8, 1.5, 0.6, 0.3,
                FamilyKind::PStable { width: 0.8, range: None }, seed,
            ).unwrap().with_tables(2, 6).unwrap();
            let mut s = SannSketch::new(params, 3).unwrap();
            for (id, c) in coords.chunks_exact(3).enumerate() {
                s.insert(id as u64, Point::new(c.to_vec()).unwrap()).unwrap();
            }
            for id in &deletions {
                s.delete(*id);
            }
            for q in queries.chunks_exact(3) {
                let (out, cands) = s.query_with_candidates(q).unwrap();
                prop_assert!(out.candidates_examined <= 3 * 6 + 60);
                prop_assert!(cands.len() <= out.candidates_examined);
                if let Some(nb) = out.result {
                    prop_assert!(nb.distance <= 1.2);
                    prop_assert!(!deletions.contains(&nb.id));
                    let exact = s.retained().map(|(_, p)| distance(p, q)).fold(f64::INFINITY, f64::min);
                    prop_assert!(nb.distance >= exact);
                }
            }
            let batch: Vec<&[f32]> = queries.chunks_exact(3).collect();
            let seq: Vec<QueryOutcome> = batch.iter().map(|q| s.query(q).unwrap()).collect();
            prop_assert_eq!(s.query_batch(&batch).unwrap(), seq);
        }
    }
}
