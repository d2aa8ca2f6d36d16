use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

use crate::point::squared_distance;
use crate::seed::{derive_seed, rng};
use crate::{Point, Result, SketchError};

/// A synthetic stream with queries and per-query ground truth.
#[derive(Clone, Debug)]
pub struct LabeledStream {
    pub points: Vec<(u64, Point)>,
    pub queries: Vec<Point>,
    /// Whether some stream point lies within `r` of each query.
    pub planted: Vec<bool>,
    /// Expected number of points in a ball of radius `r`.
    pub m: f64,
    pub side: f64,
    pub dim: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonSpec {
    pub dim: usize,
    /// Points per unit volume.
    pub lambda: f64,
    /// Side of the hypercube `[0, side]^dim`.
    pub side: f64,
    pub r: f64,
    /// The Poisson total is truncated at this many points.
    pub n_cap: u64,
    pub queries: usize,
    pub seed: u64,
}

/// Volume of the unit ball in `dim` dimensions.
pub fn unit_ball_volume(dim: usize) -> f64 {
    let h = dim as f64 / 2.0;
    libm::pow(core::f64::consts::PI, h) / libm::tgamma(h + 1.0)
}

/// A homogeneous Poisson point process on a hypercube, with queries drawn
/// uniformly from the inner cube at margin `r` so that every query ball lies
/// inside the region.
pub fn gen_poisson_stream(spec: &PoissonSpec) -> Result<LabeledStream> {
    let PoissonSpec {
        dim,
        lambda,
        side,
        r,
        n_cap,
        queries,
        seed,
    } = *spec;
    if dim == 0 {
        return Err(SketchError::param("dim", "must be at least 1"));
    }
    for (name, v) in [("lambda", lambda), ("side", side), ("r", r)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(SketchError::param(
                name,
                format!("must be positive, got {v}"),
            ));
        }
    }
    if 2.0 * r >= side {
        return Err(SketchError::param("r", "query margin leaves no interior"));
    }
    let mean = lambda * libm::pow(side, dim as f64);
    let mut rg = rng(derive_seed(seed, 0));
    let total = if mean < 1e-300 {
        0
    } else {
        let draw: f64 = Poisson::new(mean)
            .map_err(|e| SketchError::param("lambda", format!("{e}")))?
            .sample(&mut rg);
        (draw as u64).min(n_cap)
    };
    let points: Vec<(u64, Point)> = (0..total)
        .map(|id| {
            let x = (0..dim)
                .map(|_| (rg.random::<f64>() * side) as f32)
                .collect();
            (id, Point::new(x).expect("finite"))
        })
        .collect();
    let mut rq = rng(derive_seed(seed, 1));
    let qs: Vec<Point> = (0..queries)
        .map(|_| {
            let x = (0..dim)
                .map(|_| (r + rq.random::<f64>() * (side - 2.0 * r)) as f32)
                .collect();
            Point::new(x).expect("finite")
        })
        .collect();
    let planted = qs
        .iter()
        .map(|q| points.iter().any(|(_, x)| squared_distance(x, q) <= r * r))
        .collect();
    Ok(LabeledStream {
        points,
        queries: qs,
        planted,
        m: lambda * unit_ball_volume(dim) * libm::pow(r, dim as f64),
        side,
        dim,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureSpec {
    pub dim: usize,
    pub n: usize,
    pub components: usize,
    /// Consecutive points drawn from the same component.
    pub block: usize,
    /// Component means are drawn from `N(0, mean_scale^2 I)`.
    pub mean_scale: f64,
    /// Standard deviation around each mean.
    pub noise: f64,
    pub seed: u64,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        MixtureSpec {
            dim: 200,
            n: 10_000,
            components: 10,
            block: 1000,
            mean_scale: 1.0,
            noise: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MixtureStream {
    pub points: Vec<Point>,
    pub means: Vec<Vec<f64>>,
}

/// Blocks of `block` points, block `b` drawn from component `b mod components`.
pub fn gen_gaussian_mixture_stream(spec: &MixtureSpec) -> Result<MixtureStream> {
    if spec.dim == 0 || spec.components == 0 || spec.block == 0 {
        return Err(SketchError::param(
            "mixture",
            "dim, components and block must be positive",
        ));
    }
    let noise =
        Normal::new(0.0, spec.noise).map_err(|e| SketchError::param("noise", format!("{e}")))?;
    let mut rm = rng(derive_seed(spec.seed, 0));
    let means: Vec<Vec<f64>> = (0..spec.components)
        .map(|_| {
            (0..spec.dim)
                .map(|_| spec.mean_scale * rm.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let mut rp = rng(derive_seed(spec.seed, 1));
    let points = (0..spec.n)
        .map(|i| {
            let mean = &means[(i / spec.block) % spec.components];
            let x = mean
                .iter()
                .map(|mu| (mu + noise.sample(&mut rp)) as f32)
                .collect();
            Point::new(x).expect("finite")
        })
        .collect();
    Ok(MixtureStream { points, means })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson as P};

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-12);
        assert!((unit_ball_volume(2) - core::f64::consts::PI).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * core::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn tiny_intensity_is_empty() {
        let s = gen_poisson_stream(&PoissonSpec {
            dim: 2,
            lambda: 1e-6,
            side: 10.0,
            r: 1.0,
            n_cap: 100,
            queries: 3,
            seed: 1,
        })
        .unwrap();
        assert!(s.points.is_empty());
        assert_eq!(s.planted, alloc::vec![false; 3]);
    }

    #[test]
    fn m_is_linear_in_lambda() {
        let spec = PoissonSpec {
            dim: 3,
            lambda: 0.5,
            side: 5.0,
            r: 1.0,
            n_cap: 1000,
            queries: 0,
            seed: 2,
        };
        let a = gen_poisson_stream(&spec).unwrap().m;
        let b = gen_poisson_stream(&PoissonSpec {
            lambda: 1.0,
            ..spec
        })
        .unwrap()
        .m;
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn planted_flags_and_margins() {
        let s = gen_poisson_stream(&PoissonSpec {
            dim: 2,
            lambda: 0.3,
            side: 20.0,
            r: 1.0,
            n_cap: 100_000,
            queries: 200,
            seed: 3,
        })
        .unwrap();
        for (q, &flag) in s.queries.iter().zip(&s.planted) {
            assert!(q.iter().all(|&c| (1.0..=19.0).contains(&c)));
            let near = s.points.iter().any(|(_, x)| crate::distance(x, q) <= 1.0);
            assert_eq!(near, flag);
        }
    }

    #[test]
    fn interior_ball_counts_fit_poisson() {
        let (dim, r) = (2usize, 1.0f64);
        let lambda = 3.0;
        let s = gen_poisson_stream(&PoissonSpec {
            dim,
            lambda,
            side: 60.0,
            r,
            n_cap: u64::MAX,
            queries: 500,
            seed: 4,
        })
        .unwrap();
        let counts: Vec<u64> = s
            .queries
            .iter()
            .map(|q| {
                s.points
                    .iter()
                    .filter(|(_, x)| squared_distance(x, q) <= r * r)
                    .count() as u64
            })
            .collect();
        // Pool the support into cells with expected count >= 5.
        let pois = P::new(s.m).unwrap();
        let n = counts.len() as f64;
        let mut edges = alloc::vec![0u64];
        let mut acc = 0.0;
        let mut k = 0u64;
        loop {
            acc += pois.pmf(k) * n;
            if acc >= 5.0 && (1.0 - pois.cdf(k)) * n >= 5.0 {
                edges.push(k + 1);
                acc = 0.0;
            }
            if (1.0 - pois.cdf(k)) * n < 5.0 {
                break;
            }
            k += 1;
        }
        let mut stat = 0.0;
        for w in 0..edges.len() {
            let lo = edges[w];
            let hi = edges.get(w + 1).copied();
            let expected = match hi {
                Some(h) => (pois.cdf(h - 1) - if lo == 0 { 0.0 } else { pois.cdf(lo - 1) }) * n,
                None => (1.0 - if lo == 0 { 0.0 } else { pois.cdf(lo - 1) }) * n,
            };
            let observed = counts
                .iter()
                .filter(|&&c| c >= lo && hi.is_none_or(|h| c < h))
                .count() as f64;
            stat += (observed - expected).powi(2) / expected;
        }
        let dof = (edges.len() - 1) as f64;
        let p = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
        assert!(p > 0.01, "chi2 = {stat}, dof = {dof}, p = {p}");
    }

    #[test]
    fn mixture_defaults_and_means() {
        let s = gen_gaussian_mixture_stream(&MixtureSpec::default()).unwrap();
        assert_eq!(s.points.len(), 10_000);
        assert!(s.points.iter().all(|p| p.dim() == 200));
        for c in 0..10 {
            let block = &s.points[1000 * c..1000 * (c + 1)];
            for j in (0..200).step_by(20) {
                let mean = block.iter().map(|p| f64::from(p[j])).sum::<f64>() / 1000.0;
                assert!((mean - s.means[c][j]).abs() <= 4.0 / libm::sqrt(1000.0));
            }
        }
        let again = gen_gaussian_mixture_stream(&MixtureSpec::default()).unwrap();
        assert_eq!(again.points, s.points);
    }
}
