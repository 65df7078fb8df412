//! Lloyd's algorithm with k-means++ seeding on 2D points.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::stage_rng;

const MAX_ITERS: usize = 100;
const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<[f64; 2]>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances after each assignment step.
    pub objective: Vec<f64>,
}

fn sq_dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(p: &[f64; 2], centroids: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init(points: &[[f64; 2]], k: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = stage_rng(seed, "kmeans-init");
    let mut chosen = vec![false; points.len()];
    let first = rng.random_range(0..points.len());
    chosen[first] = true;
    let mut centroids = vec![points[first]];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().zip(&chosen).filter(|(_, &c)| !c).map(|(d, _)| d).sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if chosen[i] || d == 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < d {
                    break;
                }
                target -= d;
            }
            pick.expect("positive mass implies a candidate")
        } else {
            // remaining points coincide with centroids; take any unused one
            let free: Vec<usize> = (0..points.len()).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[idx] = true;
        centroids.push(points[idx]);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[idx]));
        }
    }
    centroids
}

/// Clusters `points` into `k` groups. Stops when no centroid moves more than
/// 1e-6 or after 100 iterations. Empty clusters keep their previous centroid.
pub fn kmeans(points: &[[f64; 2]], k: usize, seed: u64) -> Result<KMeans> {
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    if k > points.len() {
        return Err(Error::Argument(format!("k = {k} exceeds {} points", points.len())));
    }
    let mut centroids = plus_plus_init(points, k, seed);
    let mut assignments = vec![0; points.len()];
    let mut objective = Vec::new();
    for _ in 0..MAX_ITERS {
        let mut obj = 0.0;
        for (a, p) in assignments.iter_mut().zip(points) {
            let (j, d) = nearest(p, &centroids);
            *a = j;
            obj += d;
        }
        objective.push(obj);
        let mut sums = vec![[0.0f64; 3]; k];
        for (&a, p) in assignments.iter().zip(points) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            sums[a][2] += 1.0;
        }
        let mut moved: f64 = 0.0;
        for (c, s) in centroids.iter_mut().zip(&sums) {
            if s[2] > 0.0 {
                let next = [s[0] / s[2], s[1] / s[2]];
                moved = moved.max(sq_dist(c, &next).sqrt());
                *c = next;
            }
        }
        if moved < TOLERANCE {
            break;
        }
    }
    let mut obj = 0.0;
    for (a, p) in assignments.iter_mut().zip(points) {
        let (j, d) = nearest(p, &centroids);
        *a = j;
        obj += d;
    }
    objective.push(obj);
    Ok(KMeans { centroids, assignments, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_equals_n_returns_points() {
        let pts = [[0.0, 0.0], [3.0, 1.0], [-2.0, 5.0], [7.0, 7.0]];
        let r = kmeans(&pts, 4, 3).unwrap();
        let mut c = r.centroids.clone();
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut p = pts.to_vec();
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(c, p);
        assert_eq!(*r.objective.last().unwrap(), 0.0);
    }

    #[test]
    fn k_one_is_mean() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [1.0, 3.0], [1.0, 1.0]];
        let r = kmeans(&pts, 1, 0).unwrap();
        assert!((r.centroids[0][0] - 1.0).abs() < 1e-12);
        assert!((r.centroids[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_too_large() {
        assert!(kmeans(&[[0.0, 0.0]], 2, 0).is_err());
        assert!(kmeans(&[[0.0, 0.0]], 0, 0).is_err());
    }

    #[test]
    fn duplicate_points_still_seed() {
        let pts = [[1.0, 1.0]; 5];
        let r = kmeans(&pts, 3, 11).unwrap();
        assert_eq!(r.centroids.len(), 3);
    }

    #[test]
    fn two_blobs_match_exhaustive_partition() {
        let mut rng = stage_rng(5, "blobs");
        let mut pts = Vec::new();
        for center in [[0.0, 0.0], [20.0, 15.0]] {
            for _ in 0..10 {
                pts.push([center[0] + rng.random::<f64>(), center[1] + rng.random::<f64>()]);
            }
        }
        // oracle: best objective over every 2-partition of 20 points
        let cost = |mask: u32| {
            let mut s = [[0.0f64; 3]; 2];
            for (i, p) in pts.iter().enumerate() {
                let g = ((mask >> i) & 1) as usize;
                s[g][0] += p[0];
                s[g][1] += p[1];
                s[g][2] += 1.0;
            }
            pts.iter()
                .enumerate()
                .map(|(i, p)| {
                    let g = &s[((mask >> i) & 1) as usize];
                    sq_dist(p, &[g[0] / g[2], g[1] / g[2]])
                })
                .sum::<f64>()
        };
        let best = (1u32..(1 << 19)).map(cost).fold(f64::INFINITY, f64::min);
        let r = kmeans(&pts, 2, 1).unwrap();
        assert!((r.objective.last().unwrap() - best).abs() < 1e-9);
        assert_ne!(r.assignments[0], r.assignments[10]);
        assert!(r.assignments[..10].iter().all(|&a| a == r.assignments[0]));
    }
}
