use alloc::vec::Vec;

use crate::point::distance;
use crate::sann::{Neighbor, QueryOutcome};
use crate::{Result, SketchError};

/// Linear-scan nearest neighbor. Ties go to the smallest id.
pub fn exact_nn<'a, I>(points: I, q: &[f32]) -> Result<Option<Neighbor>>
where
    I: IntoIterator<Item = (u64, &'a [f32])>,
{
    let mut best: Option<Neighbor> = None;
    for (id, x) in points {
        SketchError::check_dim(q.len(), x.len())?;
        let d = distance(x, q);
        if best.is_none_or(|b| (d, id) < (b.distance, b.id)) {
            best = Some(Neighbor { id, distance: d });
        }
    }
    Ok(best)
}

/// The `k` nearest points ordered by `(distance, id)`.
pub fn exact_knn<'a, I>(points: I, q: &[f32], k: usize) -> Result<Vec<Neighbor>>
where
    I: IntoIterator<Item = (u64, &'a [f32])>,
{
    let mut all = Vec::new();
    for (id, x) in points {
        SketchError::check_dim(q.len(), x.len())?;
        all.push(Neighbor {
            id,
            distance: distance(x, q),
        });
    }
    let key = |n: &Neighbor| (n.distance, n.id);
    if k < all.len() {
        all.select_nth_unstable_by(k, |a, b| key(a).partial_cmp(&key(b)).unwrap());
        all.truncate(k);
    }
    all.sort_unstable_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
    Ok(all)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Success,
    Fail,
}

/// A query with no point within `r` succeeds whatever the outcome; otherwise it
/// succeeds iff the outcome names a point within `c * r`.
pub fn classify_crann<'a, I>(
    q: &[f32],
    outcome: &QueryOutcome,
    points: I,
    r: f64,
    c: f64,
) -> Verdict
where
    I: IntoIterator<Item = (u64, &'a [f32])>,
{
    let planted = points.into_iter().any(|(_, x)| distance(x, q) <= r);
    match outcome.result {
        _ if !planted => Verdict::Success,
        Some(nb) if nb.distance <= c * r => Verdict::Success,
        _ => Verdict::Fail,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;
    use alloc::vec;
    use rand::Rng;

    fn outcome(result: Option<Neighbor>) -> QueryOutcome {
        QueryOutcome {
            result,
            candidates_examined: 0,
        }
    }

    #[test]
    fn empty_and_member() {
        let none: Vec<(u64, &[f32])> = vec![];
        assert_eq!(exact_nn(none, &[1.0]).unwrap(), None);
        let a = [1.0f32, 2.0];
        let b = [3.0f32, -1.0];
        let pts = vec![(5u64, &a[..]), (2, &b[..])];
        assert_eq!(
            exact_nn(pts.clone(), &b).unwrap(),
            Some(Neighbor {
                id: 2,
                distance: 0.0
            })
        );
        assert!(exact_nn(pts, &[1.0]).is_err());
    }

    #[test]
    fn ties_prefer_smaller_id() {
        let a = [1.0f32, 0.0];
        let b = [-1.0f32, 0.0];
        let pts = vec![(9u64, &a[..]), (3, &b[..])];
        assert_eq!(exact_nn(pts, &[0.0, 0.0]).unwrap().unwrap().id, 3);
    }

    /// Independent quadratic reference: the point no other point beats.
    fn quadratic_nn(points: &[(u64, Vec<f32>)], q: &[f32]) -> Option<u64> {
        let d = |x: &[f32]| -> f64 {
            x.iter()
                .zip(q)
                .map(|(a, b)| (f64::from(*a) - f64::from(*b)).powi(2))
                .sum::<f64>()
        };
        points
            .iter()
            .find(|(i, x)| {
                points.iter().all(|(j, y)| {
                    let (dx, dy) = (d(x), d(y));
                    dx < dy || (dx == dy && i <= j)
                })
            })
            .map(|(i, _)| *i)
    }

    #[test]
    fn differential_against_quadratic_scan() {
        let mut r = rng(3);
        for _ in 0..1000 {
            let n = r.random_range(1..30);
            let dim = r.random_range(1..6);
            let points: Vec<(u64, Vec<f32>)> = (0..n)
                .map(|_| {
                    let id = r.random_range(0..1000u64);
                    (
                        id,
                        (0..dim).map(|_| r.random_range(-4i32..4) as f32).collect(),
                    )
                })
                .collect();
            let q: Vec<f32> = (0..dim).map(|_| r.random_range(-4i32..4) as f32).collect();
            let got = exact_nn(points.iter().map(|(i, x)| (*i, &x[..])), &q).unwrap();
            assert_eq!(got.map(|n| n.id), quadratic_nn(&points, &q));
        }
    }

    #[test]
    fn knn_orders_by_distance() {
        let xs: Vec<[f32; 1]> = (0..10).map(|i| [i as f32]).collect();
        let pts = xs.iter().enumerate().map(|(i, x)| (i as u64, &x[..]));
        let got = exact_knn(pts, &[3.2], 3).unwrap();
        assert_eq!(got.iter().map(|n| n.id).collect::<Vec<_>>(), vec![3, 4, 2]);
    }

    #[test]
    fn crann_cases() {
        let far = [10.0f32, 0.0];
        let near = [0.5f32, 0.0];
        let q = [0.0f32, 0.0];
        let only_far = vec![(1u64, &far[..])];
        assert_eq!(
            classify_crann(&q, &outcome(None), only_far, 1.0, 1.5),
            Verdict::Success
        );
        let with_near = vec![(1u64, &far[..]), (2, &near[..])];
        assert_eq!(
            classify_crann(&q, &outcome(None), with_near.clone(), 1.0, 1.5),
            Verdict::Fail
        );
        let returned = outcome(Some(Neighbor {
            id: 7,
            distance: 1.3,
        }));
        assert_eq!(
            classify_crann(&q, &returned, with_near.clone(), 1.0, 1.5),
            Verdict::Success
        );
        let too_far = outcome(Some(Neighbor {
            id: 1,
            distance: 10.0,
        }));
        assert_eq!(
            classify_crann(&q, &too_far, with_near, 1.0, 1.5),
            Verdict::Fail
        );
    }
}
