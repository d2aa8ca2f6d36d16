use rand::Rng;
use rand_distr::StandardNormal;

use crate::lsh::{bound_digit, srp_collision_prob, FamilyKind, LshSpec, MAX_AUTO_RANGE};
use crate::seed::{derive_seed, rng};
use crate::{Result, SketchError};

/// Hash draws per pair when no closed form is available.
pub const KDE_TRIALS: u64 = 10_000;

/// `sum_x k(x, q)^p` over the window, where `k` is the single-hash collision
/// probability of `spec`'s family and `p` its concatenation length.
///
/// SRP uses the closed form; p-stable uses [`pair_collision_rate`] with
/// `trials` draws per pair.
pub fn exact_kde<P: AsRef<[f32]>>(
    window: &[P],
    q: &[f32],
    spec: &LshSpec,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    let mut total = 0.0;
    for (i, x) in window.iter().enumerate() {
        let x = x.as_ref();
        total += match spec.kind {
            FamilyKind::Srp => srp_collision_prob(x, q, spec.concat)?,
            FamilyKind::PStable { width, range } => {
                let range = range.unwrap_or(MAX_AUTO_RANGE);
                let k =
                    pair_collision_rate(x, q, width, range, trials, derive_seed(seed, i as u64))?;
                libm::pow(k, f64::from(spec.concat))
            }
        };
    }
    Ok(total)
}

/// Monte Carlo collision rate of one range-bounded p-stable hash on a fixed
/// pair. The projections `(a . x, a . y)` are drawn directly from their joint
/// Gaussian law.
pub fn pair_collision_rate(
    x: &[f32],
    y: &[f32],
    width: f64,
    range: u64,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    SketchError::check_dim(x.len(), y.len())?;
    if trials == 0 {
        return Err(SketchError::param("trials", "must be at least 1"));
    }
    let (mut xx, mut xy, mut yy) = (0f64, 0f64, 0f64);
    for (a, b) in x.iter().zip(y) {
        let (a, b) = (f64::from(*a), f64::from(*b));
        xx += a * a;
        xy += a * b;
        yy += b * b;
    }
    // Cholesky factor of [[xx, xy], [xy, yy]].
    let l11 = libm::sqrt(xx);
    let l21 = if l11 > 0.0 { xy / l11 } else { 0.0 };
    let l22 = libm::sqrt((yy - l21 * l21).max(0.0));
    let mut r = rng(seed);
    let mut hits = 0u64;
    for _ in 0..trials {
        let z1: f64 = r.sample(StandardNormal);
        let z2: f64 = r.sample(StandardNormal);
        let b = r.random::<f64>() * width;
        let hx = libm::floor((l11 * z1 + b) / width) as i64;
        let hy = libm::floor((l21 * z1 + l22 * z2 + b) / width) as i64;
        if bound_digit(hx, range) == bound_digit(hy, range) {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}
