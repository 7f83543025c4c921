//! Local polynomial regression (LOESS) for smoothing gain curves.

use crate::error::{invalid, Result};

/// Default fraction of points in each local fit.
pub const DEFAULT_SPAN: f64 = 0.75;

/// Fits a tricube-weighted local polynomial of `degree` at every `x[i]`.
///
/// Each local fit uses the nearest `floor(span * n)` points; for
/// `span > 1` the neighbourhood covers all points and its radius is scaled
/// by `span`.
pub fn loess(x: &[f64], y: &[f64], span: f64, degree: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(invalid(format!("x has {} values, y has {}", x.len(), y.len())));
    }
    if !(span > 0.0) || !span.is_finite() {
        return Err(invalid(format!("span must be positive, got {span}")));
    }
    if degree > 2 {
        return Err(invalid(format!("degree must be 0, 1 or 2, got {degree}")));
    }
    let n = x.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("loess inputs must be finite"));
    }
    let q = ((span.min(1.0) * n as f64).floor() as usize).clamp(1, n);
    let mut dist = vec![0.0; n];
    let mut sorted = vec![0.0; n];
    let fitted = x
        .iter()
        .map(|&x0| {
            for (d, &xi) in dist.iter_mut().zip(x) {
                *d = (xi - x0).abs();
            }
            sorted.copy_from_slice(&dist);
            sorted.select_nth_unstable_by(q - 1, f64::total_cmp);
            let mut h = sorted[q - 1];
            if span > 1.0 {
                h *= span;
            }
            local_fit(x, y, &dist, h, x0, degree)
        })
        .collect();
    Ok(fitted)
}

fn local_fit(x: &[f64], y: &[f64], dist: &[f64], h: f64, x0: f64, degree: usize) -> f64 {
    let p = degree + 1;
    // Normal equations [A | b] for the centered polynomial basis.
    let mut a = [[0.0f64; 4]; 3];
    let mut total = 0.0;
    for i in 0..x.len() {
        let w = if h > 0.0 {
            let u = dist[i] / h;
            if u >= 1.0 {
                continue;
            }
            let c = 1.0 - u * u * u;
            c * c * c
        } else if dist[i] == 0.0 {
            1.0
        } else {
            continue;
        };
        total += w;
        let t = x[i] - x0;
        let basis = [1.0, t, t * t];
        for r in 0..p {
            for c in 0..p {
                a[r][c] += w * basis[r] * basis[c];
            }
            a[r][p] += w * basis[r] * y[i];
        }
    }
    if total == 0.0 {
        return f64::NAN;
    }
    match solve(&mut a, p) {
        Some(v) => v,
        // Too few distinct points for the requested degree.
        None => a[0][p] / a[0][0],
    }
}

/// Gaussian elimination with partial pivoting; returns the intercept.
#[allow(clippy::needless_range_loop)]
fn solve(a: &mut [[f64; 4]; 3], p: usize) -> Option<f64> {
    let scale = (0..p).map(|r| a[r][r].abs()).fold(0.0, f64::max);
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(c, piv);
        for r in 0..p {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=p {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    Some(a[0][p] / a[0][0])
}
