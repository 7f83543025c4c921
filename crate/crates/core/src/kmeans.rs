//! Lloyd's k-means with k-means++ seeding, followed by single-point moves
//! that Lloyd's iteration cannot make.

use rand::Rng;

use crate::error::{invalid, Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 100;
/// Independent seedings per call; the lowest-SSE result is kept.
pub const DEFAULT_RESTARTS: usize = 30;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Within-cluster sum of squared distances to the cluster means.
pub fn sse(points: &[Vec<f64>], assignment: &[usize], k: usize) -> f64 {
    let centroids = centroids(points, assignment, k);
    points
        .iter()
        .zip(assignment)
        .map(|(p, &c)| sq_dist(p, &centroids[c]))
        .sum()
}

fn centroids(points: &[Vec<f64>], assignment: &[usize], k: usize) -> Vec<Vec<f64>> {
    let d = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(assignment) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, n) in sums.iter_mut().zip(&counts) {
        if *n > 0 {
            s.iter_mut().for_each(|v| *v /= *n as f64);
        }
    }
    sums
}

fn plus_plus_seeds<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, w) in d2.iter().enumerate() {
                if *w > 0.0 {
                    pick = Some(i);
                    if target < *w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            // All remaining points coincide with a center.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>], out: &mut [usize]) {
    for (p, a) in points.iter().zip(out.iter_mut()) {
        let mut best = (f64::INFINITY, 0);
        for (c, center) in centers.iter().enumerate() {
            let d = sq_dist(p, center);
            if d < best.0 {
                best = (d, c);
            }
        }
        *a = best.1;
    }
}

/// Moves the point farthest from its center (taken from a cluster with more
/// than one member) into each empty cluster.
fn fill_empty(points: &[Vec<f64>], centers: &mut [Vec<f64>], assignment: &mut [usize]) {
    let k = centers.len();
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = (f64::NEG_INFINITY, usize::MAX);
        for (i, p) in points.iter().enumerate() {
            if counts[assignment[i]] > 1 {
                let d = sq_dist(p, &centers[assignment[i]]);
                if d > far.0 {
                    far = (d, i);
                }
            }
        }
        assignment[far.1] = empty;
        centers[empty] = points[far.1].clone();
    }
}

fn lloyd<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R, max_iters: usize) -> Vec<usize> {
    let mut centers = plus_plus_seeds(points, k, rng);
    let mut assignment = vec![0usize; points.len()];
    assign(points, &centers, &mut assignment);
    fill_empty(points, &mut centers, &mut assignment);
    for _ in 0..max_iters {
        centers = centroids(points, &assignment, k);
        let mut next = vec![0usize; points.len()];
        assign(points, &centers, &mut next);
        fill_empty(points, &mut centers, &mut next);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    single_moves(points, k, &mut assignment);
    assignment
}

/// Moves single points between clusters while that lowers the SSE.
///
/// Moving `x` from cluster `a` (size `n_a > 1`) to `b` changes the SSE by
/// `n_b/(n_b+1) |x-c_b|^2 - n_a/(n_a-1) |x-c_a|^2`.
fn single_moves(points: &[Vec<f64>], k: usize, assignment: &mut [usize]) {
    let mut centers = centroids(points, assignment, k);
    let mut counts = vec![0usize; k];
    for &a in assignment.iter() {
        counts[a] += 1;
    }
    let mut improved = true;
    while improved {
        improved = false;
        for (i, p) in points.iter().enumerate() {
            let a = assignment[i];
            if counts[a] < 2 {
                continue;
            }
            let na = counts[a] as f64;
            let removal = na / (na - 1.0) * sq_dist(p, &centers[a]);
            let mut best = (0.0, a);
            for b in (0..k).filter(|&b| b != a) {
                let nb = counts[b] as f64;
                let delta = nb / (nb + 1.0) * sq_dist(p, &centers[b]) - removal;
                if delta < best.0 - 1e-12 * removal {
                    best = (delta, b);
                }
            }
            let b = best.1;
            if b != a {
                let (na, nb) = (counts[a] as f64, counts[b] as f64);
                for (j, v) in p.iter().enumerate() {
                    centers[a][j] = (centers[a][j] * na - v) / (na - 1.0);
                    centers[b][j] = (centers[b][j] * nb + v) / (nb + 1.0);
                }
                counts[a] -= 1;
                counts[b] += 1;
                assignment[i] = b;
                improved = true;
            }
        }
    }
}

/// Cluster label in `0..k` for each point. Every cluster is nonempty.
pub fn kmeans<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R, max_iters: usize) -> Result<Vec<usize>> {
    kmeans_with_restarts(points, k, rng, max_iters, DEFAULT_RESTARTS)
}

pub fn kmeans_with_restarts<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    k: usize,
    rng: &mut R,
    max_iters: usize,
    restarts: usize,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if k > points.len() {
        return Err(invalid(format!("k = {k} exceeds the {} points", points.len())));
    }
    let d = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p.len(),
        });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts.max(1) {
        let a = lloyd(points, k, rng, max_iters);
        let cost = sse(points, &a, k);
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, a));
        }
    }
    Ok(best.expect("at least one restart").1)
}
