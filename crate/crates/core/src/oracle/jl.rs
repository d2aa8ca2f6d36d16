use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::point::{distance, dot};
use crate::sann::Neighbor;
use crate::seed::rng;
use crate::{Point, Result, SketchError};

/// All points projected to `k` dimensions by a Gaussian matrix with
/// `N(0, 1/k)` entries, searched by linear scan.
#[derive(Clone, Debug)]
pub struct JlIndex {
    dim: usize,
    k: usize,
    matrix: Vec<f32>,
    ids: Vec<u64>,
    projected: Vec<f32>,
    originals: Option<Vec<Point>>,
}

impl JlIndex {
    /// `keep_originals` retains the input vectors so that query results report
    /// distances in the original space.
    pub fn build<P: AsRef<[f32]>>(
        points: &[(u64, P)],
        dim: usize,
        k: usize,
        seed: u64,
        keep_originals: bool,
    ) -> Result<Self> {
        if k == 0 || k > dim {
            return Err(SketchError::param(
                "k",
                "target dimension must lie in 1..=dim",
            ));
        }
        let mut r = rng(seed);
        let scale = 1.0 / libm::sqrt(k as f64);
        let matrix: Vec<f32> = (0..k * dim)
            .map(|_| (r.sample::<f64, _>(StandardNormal) * scale) as f32)
            .collect();
        let mut index = JlIndex {
            dim,
            k,
            matrix,
            ids: Vec::with_capacity(points.len()),
            projected: Vec::with_capacity(points.len() * k),
            originals: keep_originals.then(Vec::new),
        };
        for (id, x) in points {
            let x = x.as_ref();
            SketchError::check_dim(dim, x.len())?;
            index.ids.push(*id);
            for row in index.matrix.chunks_exact(dim) {
                index.projected.push(dot(row, x));
            }
            if let Some(o) = &mut index.originals {
                o.push(Point::new(x.to_vec())?);
            }
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn target_dim(&self) -> usize {
        self.k
    }

    /// `k / dim`.
    pub fn compression(&self) -> f64 {
        self.k as f64 / self.dim as f64
    }

    /// Projected coordinates at 4 bytes plus ids at 8 bytes.
    pub fn bytes_estimate(&self) -> usize {
        self.projected.len() * 4 + self.ids.len() * 8
    }

    pub fn project(&self, q: &[f32]) -> Result<Vec<f32>> {
        SketchError::check_dim(self.dim, q.len())?;
        Ok(self
            .matrix
            .chunks_exact(self.dim)
            .map(|row| dot(row, q))
            .collect())
    }

    /// Argmin in the projected space, ties to the earliest inserted point.
    /// The reported distance is in the original space when originals are
    /// kept, otherwise the projected distance.
    pub fn query(&self, q: &[f32]) -> Result<Option<Neighbor>> {
        let pq = self.project(q)?;
        let mut best: Option<(usize, f32)> = None;
        for (i, y) in self.projected.chunks_exact(self.k).enumerate() {
            let d = squared_f32(y, &pq);
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((i, d));
            }
        }
        Ok(best.map(|(i, d)| Neighbor {
            id: self.ids[i],
            distance: match &self.originals {
                Some(o) => distance(&o[i], q),
                None => libm::sqrt(f64::from(d)),
            },
        }))
    }
}

impl JlIndex {
    /// Ids of the `k` points closest to `q` in the projected space, nearest
    /// first, ties to the earliest inserted point.
    pub fn query_k(&self, q: &[f32], k: usize) -> Result<Vec<u64>> {
        let pq = self.project(q)?;
        let mut scored: Vec<(f32, usize)> = self
            .projected
            .chunks_exact(self.k)
            .enumerate()
            .map(|(i, y)| (squared_f32(y, &pq), i))
            .collect();
        let k = k.min(scored.len());
        let key = |a: &(f32, usize), b: &(f32, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < scored.len() && k > 0 {
            scored.select_nth_unstable_by(k - 1, key);
        }
        scored.truncate(k);
        scored.sort_unstable_by(key);
        Ok(scored.into_iter().map(|(_, i)| self.ids[i]).collect())
    }
}

fn squared_f32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..8 {
            let d = x[j] - y[j];
            acc[j] += d * d;
        }
    }
    let mut s: f32 = acc.iter().sum();
    for (x, y) in ra.iter().zip(rb) {
        s += (x - y) * (x - y);
    }
    s
}
