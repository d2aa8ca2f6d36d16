//! Locality-sensitive hash families and their concatenations.
//!
//! Two base families are provided:
//!
//! - signed random projections (angular LSH): one sign bit per Gaussian
//!   hyperplane, collision probability `1 - theta / pi` per bit;
//! - p-stable (Gaussian) projections for Euclidean distance:
//!   `floor((a . x + b) / w)` with `a ~ N(0, I)` and `b ~ U[0, w)`.
//!
//! A function from either family concatenates `p` base hashes into a single
//! [`BucketId`]. SRP ids are the `p` sign bits packed little-endian, so the
//! range is exactly `2^p`. p-stable base values are unbounded integers; each is
//! reduced modulo `W` after a 64-bit mix and the reduced digits are combined as
//! `sum_j r_j W^j`, giving range `W^p`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::point::dot;
use crate::seed::{derive_seed, fmix64, rng};
use crate::{Result, SketchError};

pub const MAX_SRP_BITS: u32 = 62;

/// Largest per-digit range handed out when a p-stable range is left to
/// [`auto_range`].
pub const MAX_AUTO_RANGE: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BucketId(pub u64);

/// Which base family a concatenated function is drawn from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FamilyKind {
    Srp,
    /// `range: None` picks the largest range whose `concat`-th power fits in
    /// 64 bits (see [`auto_range`]).
    PStable {
        width: f64,
        range: Option<u64>,
    },
}

/// A base family plus a concatenation length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LshSpec {
    pub kind: FamilyKind,
    pub concat: u32,
}

impl LshSpec {
    pub fn srp(bits: u32) -> Self {
        LshSpec {
            kind: FamilyKind::Srp,
            concat: bits,
        }
    }

    pub fn pstable(count: u32, width: f64, range: u64) -> Self {
        LshSpec {
            kind: FamilyKind::PStable {
                width,
                range: Some(range),
            },
            concat: count,
        }
    }

    pub fn build(&self, dim: usize, seed: u64) -> Result<LshFunction> {
        match self.kind {
            FamilyKind::Srp => SrpFamily::new(dim, self.concat, seed).map(LshFunction::Srp),
            FamilyKind::PStable { width, range } => {
                let range = match range {
                    Some(w) => w,
                    None => auto_range(self.concat)?,
                };
                PStableFamily::new(dim, self.concat, width, range, seed).map(LshFunction::PStable)
            }
        }
    }

    /// Size of the id space of one concatenated function.
    pub fn range(&self) -> Result<u64> {
        match self.kind {
            FamilyKind::Srp => {
                check_srp_bits(self.concat)?;
                Ok(1u64 << self.concat)
            }
            FamilyKind::PStable { range, .. } => {
                let w = match range {
                    Some(w) => w,
                    None => auto_range(self.concat)?,
                };
                pstable_range(self.concat, w)
            }
        }
    }

    /// `L` independent functions with seeds `derive_seed(seed, i)`.
    pub fn build_rows(&self, dim: usize, rows: usize, seed: u64) -> Result<Vec<LshFunction>> {
        (0..rows)
            .map(|i| self.build(dim, derive_seed(seed, i as u64)))
            .collect()
    }
}

/// Largest `W <= 2^32` with `W^concat < 2^64`.
pub fn auto_range(concat: u32) -> Result<u64> {
    if concat == 0 {
        return Err(SketchError::param("concat", "must be at least 1"));
    }
    let guess = libm::floor(libm::pow(2.0, 64.0 / f64::from(concat))).min(MAX_AUTO_RANGE as f64);
    let mut w = (guess as u64).max(2);
    while w > 2 && w.checked_pow(concat).is_none() {
        w -= 1;
    }
    while w < MAX_AUTO_RANGE && (w + 1).checked_pow(concat).is_some() {
        w += 1;
    }
    if w.checked_pow(concat).is_none() {
        return Err(SketchError::param(
            "concat",
            format!("even a range of 2 overflows 64 bits at {concat} digits"),
        ));
    }
    Ok(w)
}

fn check_srp_bits(bits: u32) -> Result<()> {
    if bits == 0 || bits > MAX_SRP_BITS {
        return Err(SketchError::param(
            "p",
            format!("SRP concatenation must be in 1..={MAX_SRP_BITS}, got {bits}"),
        ));
    }
    Ok(())
}

fn pstable_range(count: u32, range: u64) -> Result<u64> {
    if range < 2 {
        return Err(SketchError::param("W", "range bound must be at least 2"));
    }
    range
        .checked_pow(count)
        .ok_or_else(|| SketchError::param("W", format!("{range}^{count} does not fit in 64 bits")))
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(SketchError::param("dim", "must be at least 1"));
    }
    Ok(())
}

/// Signed random projections, `bits` hyperplanes concatenated.
#[derive(Clone, Debug)]
pub struct SrpFamily {
    dim: usize,
    bits: u32,
    hyperplanes: Vec<f32>,
}

impl SrpFamily {
    pub fn new(dim: usize, bits: u32, seed: u64) -> Result<Self> {
        check_dim(dim)?;
        check_srp_bits(bits)?;
        let mut r = rng(seed);
        let hyperplanes = (0..dim * bits as usize)
            .map(|_| r.sample::<f64, _>(StandardNormal) as f32)
            .collect();
        Ok(SrpFamily {
            dim,
            bits,
            hyperplanes,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn range(&self) -> u64 {
        1u64 << self.bits
    }

    /// Bit `j` is set when `hyperplane_j . x >= 0`; an exact zero counts as set.
    #[inline]
    pub(crate) fn hash_slice(&self, x: &[f32]) -> BucketId {
        let mut id = 0u64;
        for (j, h) in self.hyperplanes.chunks_exact(self.dim).enumerate() {
            if dot(h, x) >= 0.0 {
                id |= 1 << j;
            }
        }
        BucketId(id)
    }
}

/// Gaussian projections with uniform offsets, `count` base hashes concatenated
/// after reducing each modulo `range`.
#[derive(Clone, Debug)]
pub struct PStableFamily {
    dim: usize,
    count: u32,
    width: f64,
    range: u64,
    projections: Vec<f32>,
    offsets: Vec<f64>,
}

impl PStableFamily {
    pub fn new(dim: usize, count: u32, width: f64, range: u64, seed: u64) -> Result<Self> {
        check_dim(dim)?;
        if count == 0 {
            return Err(SketchError::param("count", "must be at least 1"));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(SketchError::param(
                "w",
                "bucket width must be positive and finite",
            ));
        }
        pstable_range(count, range)?;
        let mut r = rng(seed);
        let projections = (0..dim * count as usize)
            .map(|_| r.sample::<f64, _>(StandardNormal) as f32)
            .collect();
        let offsets = (0..count).map(|_| r.random::<f64>() * width).collect();
        Ok(PStableFamily {
            dim,
            count,
            width,
            range,
            projections,
            offsets,
        })
    }

    /// Assembles a family from explicit projections (`count x dim`, row-major)
    /// and offsets.
    pub fn from_parts(
        dim: usize,
        projections: Vec<f32>,
        offsets: Vec<f64>,
        width: f64,
        range: u64,
    ) -> Result<Self> {
        check_dim(dim)?;
        let count = offsets.len() as u32;
        if count == 0 || projections.len() != dim * offsets.len() {
            return Err(SketchError::param(
                "projections",
                "need one dim-length projection per offset",
            ));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(SketchError::param(
                "w",
                "bucket width must be positive and finite",
            ));
        }
        pstable_range(count, range)?;
        Ok(PStableFamily {
            dim,
            count,
            width,
            range,
            projections,
            offsets,
        })
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Per-digit range `W`.
    pub fn digit_range(&self) -> u64 {
        self.range
    }

    pub fn range(&self) -> u64 {
        self.range.pow(self.count)
    }

    /// The unbounded base values `floor((a_j . x + b_j) / w)`.
    pub fn base_values(&self, x: &[f32]) -> Result<Vec<i64>> {
        SketchError::check_dim(self.dim, x.len())?;
        Ok(self
            .projections
            .chunks_exact(self.dim)
            .zip(&self.offsets)
            .map(|(a, b)| self.base(a, *b, x))
            .collect())
    }

    #[inline]
    fn base(&self, a: &[f32], b: f64, x: &[f32]) -> i64 {
        floor_i64((f64::from(dot(a, x)) + b) / self.width)
    }

    #[inline]
    pub(crate) fn hash_slice(&self, x: &[f32]) -> BucketId {
        let mut id = 0u64;
        let mut scale = 1u64;
        for (a, b) in self.projections.chunks_exact(self.dim).zip(&self.offsets) {
            let digit = bound_digit(self.base(a, *b, x), self.range);
            id += digit * scale;
            scale = scale.wrapping_mul(self.range);
        }
        BucketId(id)
    }
}

/// `floor(v)` saturated to `i64`; exact for every finite `v` in range.
#[inline]
fn floor_i64(v: f64) -> i64 {
    let t = v as i64;
    if (t as f64) > v {
        t - 1
    } else {
        t
    }
}

/// Range bounding of one raw p-stable value.
#[inline]
pub fn bound_digit(raw: i64, range: u64) -> u64 {
    fmix64(raw as u64) % range
}

/// A concatenated hash function from either family.
#[derive(Clone, Debug)]
pub enum LshFunction {
    Srp(SrpFamily),
    PStable(PStableFamily),
}

impl LshFunction {
    pub fn dim(&self) -> usize {
        match self {
            LshFunction::Srp(f) => f.dim,
            LshFunction::PStable(f) => f.dim,
        }
    }

    pub fn range(&self) -> u64 {
        match self {
            LshFunction::Srp(f) => f.range(),
            LshFunction::PStable(f) => f.range(),
        }
    }

    pub fn hash(&self, x: &[f32]) -> Result<BucketId> {
        SketchError::check_dim(self.dim(), x.len())?;
        Ok(self.hash_slice(x))
    }

    #[inline]
    pub(crate) fn hash_slice(&self, x: &[f32]) -> BucketId {
        match self {
            LshFunction::Srp(f) => f.hash_slice(x),
            LshFunction::PStable(f) => f.hash_slice(x),
        }
    }
}

/// Closed-form amplified SRP collision probability `(1 - theta / pi)^p`.
pub fn srp_collision_prob(x: &[f32], y: &[f32], p: u32) -> Result<f64> {
    SketchError::check_dim(x.len(), y.len())?;
    let (mut xy, mut xx, mut yy) = (0f64, 0f64, 0f64);
    for (a, b) in x.iter().zip(y) {
        let (a, b) = (f64::from(*a), f64::from(*b));
        xy += a * b;
        xx += a * a;
        yy += b * b;
    }
    if xx == 0.0 || yy == 0.0 {
        return Err(SketchError::Domain(
            "angular collision probability is undefined for a zero vector".into(),
        ));
    }
    let cos = (xy / (libm::sqrt(xx) * libm::sqrt(yy))).clamp(-1.0, 1.0);
    let k = 1.0 - libm::acos(cos) / PI;
    Ok(libm::pow(k, f64::from(p)))
}

/// Monte Carlo collision rate of a single base hash at Euclidean distance
/// `dist`.
///
/// Each trial draws a fresh base function, a standard normal point `x` and a
/// uniform direction `u`, and checks whether `x` and `x + dist * u` collide.
/// For p-stable kinds with `range: None` the raw integer values are compared.
pub fn estimate_collision_prob(
    kind: FamilyKind,
    dist: f64,
    dim: usize,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    check_dim(dim)?;
    if trials == 0 {
        return Err(SketchError::param("trials", "must be at least 1"));
    }
    if !(dist >= 0.0 && dist.is_finite()) {
        return Err(SketchError::param(
            "dist",
            "must be non-negative and finite",
        ));
    }
    let spec = base_spec(kind);
    let mut r = rng(seed);
    let mut hits = 0u64;
    let mut x = alloc::vec![0f32; dim];
    let mut y = alloc::vec![0f32; dim];
    for t in 0..trials {
        let f = spec.build(dim, derive_seed(seed, t))?;
        let mut norm = 0f64;
        for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
            *xi = r.sample::<f64, _>(StandardNormal) as f32;
            let u = r.sample::<f64, _>(StandardNormal);
            *yi = u as f32;
            norm += u * u;
        }
        let scale = if norm > 0.0 {
            dist / libm::sqrt(norm)
        } else {
            0.0
        };
        for (xi, yi) in x.iter().zip(y.iter_mut()) {
            *yi = (f64::from(*xi) + f64::from(*yi) * scale) as f32;
        }
        if f.hash_slice(&x) == f.hash_slice(&y) {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

/// Monte Carlo collision rate of a fixed pair under fresh functions drawn
/// from `spec` (concatenation included).
pub fn estimate_pair_collision_prob(
    spec: &LshSpec,
    x: &[f32],
    y: &[f32],
    trials: u64,
    seed: u64,
) -> Result<f64> {
    SketchError::check_dim(x.len(), y.len())?;
    if trials == 0 {
        return Err(SketchError::param("trials", "must be at least 1"));
    }
    let mut hits = 0u64;
    for t in 0..trials {
        let f = spec.build(x.len(), derive_seed(seed, t))?;
        if f.hash_slice(x) == f.hash_slice(y) {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

fn base_spec(kind: FamilyKind) -> LshSpec {
    let kind = match kind {
        FamilyKind::PStable { width, range: None } => FamilyKind::PStable {
            width,
            range: Some(MAX_AUTO_RANGE),
        },
        other => other,
    };
    LshSpec { kind, concat: 1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn srp_ranges() {
        assert_eq!(SrpFamily::new(2, 1, 7).unwrap().range(), 2);
        assert_eq!(SrpFamily::new(128, 8, 1).unwrap().range(), 256);
        assert!(SrpFamily::new(0, 1, 0).is_err());
        assert!(SrpFamily::new(4, 0, 0).is_err());
        assert!(SrpFamily::new(4, 63, 0).is_err());
        assert!(SrpFamily::new(4, 62, 0).is_ok());
    }

    #[test]
    fn srp_is_deterministic_per_seed() {
        let x = [0.3f32, -1.2, 4.0, 0.0];
        let a = LshSpec::srp(8).build(4, 99).unwrap();
        let b = LshSpec::srp(8).build(4, 99).unwrap();
        assert_eq!(a.hash(&x).unwrap(), b.hash(&x).unwrap());
    }

    #[test]
    fn srp_sign_flip_and_scale() {
        let f = SrpFamily::new(3, 1, 11).unwrap();
        let x = [0.5f32, -0.25, 2.0];
        let neg = [-0.5f32, 0.25, -2.0];
        let twice = [1.0f32, -0.5, 4.0];
        assert_ne!(f.hash_slice(&x), f.hash_slice(&neg));
        assert_eq!(f.hash_slice(&x), f.hash_slice(&twice));
    }

    #[test]
    fn srp_zero_projection_sets_bit() {
        let f = SrpFamily::new(2, 1, 3).unwrap();
        assert_eq!(f.hash_slice(&[0.0, 0.0]), BucketId(1));
    }

    #[test]
    fn pstable_ranges_and_overflow() {
        assert_eq!(LshSpec::pstable(2, 1.0, 100).range().unwrap(), 10_000);
        assert!(PStableFamily::new(32, 2, 1.0, 1 << 40, 0).is_err());
        assert!(PStableFamily::new(32, 2, 1.0, 1, 0).is_err());
        assert!(PStableFamily::new(32, 2, 0.0, 4, 0).is_err());
    }

    #[test]
    fn pstable_forced_projection_floors() {
        let f = PStableFamily::from_parts(1, vec![1.0], vec![0.0], 1.0, 4).unwrap();
        assert_eq!(f.base_values(&[0.3]).unwrap(), vec![0]);
        assert_eq!(f.hash_slice(&[0.3]), BucketId(0));
        assert_eq!(f.base_values(&[-0.3]).unwrap(), vec![-1]);
        assert_eq!(f.base_values(&[2.7]).unwrap(), vec![2]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let f = LshSpec::srp(3).build(4, 0).unwrap();
        assert_eq!(
            f.hash(&[1.0, 2.0]),
            Err(SketchError::Dimension {
                expected: 4,
                found: 2
            })
        );
    }

    #[test]
    fn auto_range_fits() {
        assert_eq!(auto_range(1).unwrap(), MAX_AUTO_RANGE);
        assert_eq!(auto_range(2).unwrap(), MAX_AUTO_RANGE - 1);
        for k in 3..=40 {
            let w = auto_range(k).unwrap();
            assert!(w.checked_pow(k).is_some());
            assert!((w + 1).checked_pow(k).is_none(), "k={k} w={w}");
        }
        assert_eq!(auto_range(8).unwrap(), 255);
        assert!(auto_range(64).is_err());
    }

    #[test]
    fn closed_form_collision_prob() {
        let x = [1.0f32, 0.0];
        let y = [0.0f32, 1.0];
        assert!((srp_collision_prob(&x, &x, 3).unwrap() - 1.0).abs() < 1e-12);
        assert!((srp_collision_prob(&x, &y, 1).unwrap() - 0.5).abs() < 1e-12);
        assert!((srp_collision_prob(&x, &y, 2).unwrap() - 0.25).abs() < 1e-12);
        assert!(srp_collision_prob(&x, &[0.0, 0.0], 1).is_err());
    }

    #[test]
    fn monte_carlo_at_zero_distance_is_one() {
        for kind in [
            FamilyKind::Srp,
            FamilyKind::PStable {
                width: 1.0,
                range: None,
            },
        ] {
            assert_eq!(estimate_collision_prob(kind, 0.0, 8, 500, 1).unwrap(), 1.0);
        }
    }

    #[test]
    fn monte_carlo_srp_orthogonal_matches_closed_form() {
        let trials = 20_000;
        let est = estimate_pair_collision_prob(
            &LshSpec::srp(1),
            &[1.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0],
            trials,
            5,
        )
        .unwrap();
        assert!(
            (est - 0.5).abs() <= 3.0 / libm::sqrt(trials as f64),
            "{est}"
        );
    }

    #[test]
    fn monte_carlo_pstable_decreases_with_distance() {
        let kind = FamilyKind::PStable {
            width: 1.0,
            range: None,
        };
        let near = estimate_collision_prob(kind, 0.1, 16, 20_000, 3).unwrap();
        let far = estimate_collision_prob(kind, 10.0, 16, 20_000, 4).unwrap();
        assert!(far < near, "near {near} far {far}");
    }

    #[test]
    fn collision_rate_non_increasing_over_radii() {
        let trials = 20_000u64;
        let se = 0.5 / libm::sqrt(trials as f64);
        for kind in [
            FamilyKind::Srp,
            FamilyKind::PStable {
                width: 2.0,
                range: None,
            },
        ] {
            let rates: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
                .iter()
                .enumerate()
                .map(|(i, &d)| estimate_collision_prob(kind, d, 8, trials, 100 + i as u64).unwrap())
                .collect();
            for w in rates.windows(2) {
                assert!(w[1] <= w[0] + 4.0 * se, "{kind:?}: {rates:?}");
            }
        }
    }

    #[test]
    fn concatenation_amplifies_as_power() {
        let x = [1.0f32, 0.2, -0.4, 0.7];
        let y = [0.1f32, 1.0, 0.3, -0.2];
        let trials = 40_000u64;
        let base = estimate_pair_collision_prob(&LshSpec::srp(1), &x, &y, trials, 17).unwrap();
        for p in [2u32, 3] {
            let amp = estimate_pair_collision_prob(&LshSpec::srp(p), &x, &y, trials, 23).unwrap();
            let expected = libm::pow(base, f64::from(p));
            // Error of the amplified rate plus the propagated error of base^p.
            let se_amp = libm::sqrt(expected * (1.0 - expected) / trials as f64);
            let se_pow = f64::from(p)
                * libm::pow(base, f64::from(p - 1))
                * libm::sqrt(base * (1.0 - base) / trials as f64);
            let se = libm::sqrt(se_amp * se_amp + se_pow * se_pow);
            assert!(
                (amp - expected).abs() <= 4.0 * se,
                "p={p}: {amp} vs {expected}"
            );
        }
    }

    proptest! {
        #[test]
        fn ids_stay_in_range(
            coords in proptest::collection::vec(-100.0f32..100.0, 6),
            seed in any::<u64>(),
            bits in 1u32..=12,
            count in 1u32..=4,
            w in 2u64..500,
        ) {
            let srp = LshSpec::srp(bits).build(6, seed).unwrap();
            prop_assert!(srp.hash(&coords).unwrap().0 < srp.range());
            let ps = LshSpec::pstable(count, 0.7, w).build(6, seed).unwrap();
            prop_assert!(ps.hash(&coords).unwrap().0 < ps.range());
        }

        #[test]
        fn identical_points_share_ids(
            coords in proptest::collection::vec(-10.0f32..10.0, 5),
            seed in any::<u64>(),
        ) {
            let f = LshSpec::pstable(3, 1.5, 64).build(5, seed).unwrap();
            let copy = coords.clone();
            prop_assert_eq!(f.hash(&coords).unwrap(), f.hash(&copy).unwrap());
        }
    }
}
