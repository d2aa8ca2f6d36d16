use alloc::format;

use crate::{Result, SketchError};

/// `exp(d - lambda + d ln(lambda / d))`, bounding `P(Poisson(lambda) <= d)`;
/// `exp(-lambda)` at `d = 0`.
pub fn poisson_tail(d: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(SketchError::Domain(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if !(0.0..=lambda).contains(&d) {
        return Err(SketchError::Domain(format!(
            "need 0 <= d <= lambda, got d = {d}, lambda = {lambda}"
        )));
    }
    if d == 0.0 {
        return Ok(libm::exp(-lambda));
    }
    Ok(libm::exp(d - lambda + d * libm::log(lambda / d)))
}

/// Mean of a Poisson(`m`) count after independent retention at rate `p`.
pub fn poisson_thin_mean(m: f64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || m.is_nan() || m < 0.0 {
        return Err(SketchError::Domain(format!(
            "need m >= 0 and p in [0, 1], got m = {m}, p = {p}"
        )));
    }
    Ok(m * p)
}

fn check_stream(n: u64, eta: f64, m: f64) -> Result<f64> {
    if n < 1 || !(0.0..=1.0).contains(&eta) || !(m >= 0.0 && m.is_finite()) {
        return Err(SketchError::Domain(format!(
            "invalid n = {n}, eta = {eta}, m = {m}"
        )));
    }
    Ok(libm::pow(n as f64, eta))
}

/// `1 / (3 n^eta) + (e^{mp} + e - 1) / e^{mp + 1}` with `p = n^-eta`.
pub fn ann_failure_bound(n: u64, eta: f64, m: f64) -> Result<f64> {
    let n_eta = check_stream(n, eta, m)?;
    let mp = m / n_eta;
    let e = core::f64::consts::E;
    // (e^{mp} + e - 1) / e^{mp+1} = 1/e + (e - 1) e^{-(mp+1)}
    Ok(1.0 / (3.0 * n_eta) + 1.0 / e + (e - 1.0) * libm::exp(-(mp + 1.0)))
}

/// `1 / (3 n^eta) + 1/e + e^{d - mp + d ln(mp/d)} (1 - 1/e)` for an adversary
/// deleting `d <= mp` points.
pub fn turnstile_failure_bound(n: u64, eta: f64, m: f64, d: f64) -> Result<f64> {
    let n_eta = check_stream(n, eta, m)?;
    let mp = m / n_eta;
    if mp == 0.0 {
        return Err(SketchError::Domain("thinned mean mp is zero".into()));
    }
    let tail = poisson_tail(d, mp)?;
    let e = core::f64::consts::E;
    Ok(1.0 / (3.0 * n_eta) + 1.0 / e + tail * (1.0 - 1.0 / e))
}
