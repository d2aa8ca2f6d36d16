use alloc::vec::Vec;
use core::ops::Deref;

use crate::{Result, SketchError};

/// A dense vector with finite coordinates and at least one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(Vec<f32>);

impl Point {
    pub fn new(coords: Vec<f32>) -> Result<Self> {
        if coords.is_empty() {
            return Err(SketchError::param(
                "coords",
                "a point needs at least one dimension",
            ));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(SketchError::Domain(alloc::format!(
                "coordinate {i} is not finite"
            )));
        }
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f32];

    fn deref(&self) -> &[f32] {
        &self.0
    }
}

impl AsRef<[f32]> for Point {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

impl TryFrom<Vec<f32>> for Point {
    type Error = SketchError;

    fn try_from(v: Vec<f32>) -> Result<Self> {
        Point::new(v)
    }
}

/// Inner product with eight independent accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut s = acc.iter().sum::<f32>();
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Squared Euclidean distance, accumulated in `f64`.
#[inline]
pub fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = f64::from(*x) - f64::from(*y);
            d * d
        })
        .sum()
}

#[inline]
pub fn distance(a: &[f32], b: &[f32]) -> f64 {
    libm::sqrt(squared_distance(a, b))
}
