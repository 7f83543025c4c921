//! Gaussian-process regression with a Matérn 5/2 kernel and zero prior mean.
//!
//! Inputs are expected in the unit hypercube. The covariance `K + jitter*I`
//! is Cholesky-factored once per fit; predictions reuse the factor.

use crate::error::{invalid, Error, Result};

pub const DEFAULT_JITTER: f64 = 1e-6;

const SQRT5: f64 = 2.236_067_977_499_79;

/// Matérn 5/2 hyperparameters. The signal variance is fixed at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    theta: f64,
}

impl KernelParams {
    pub fn new(theta: f64) -> Result<Self> {
        if theta > 0.0 && theta.is_finite() {
            Ok(Self { theta })
        } else {
            Err(invalid(format!("length scale must be positive, got {theta}")))
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Matérn 5/2 correlation as a function of `r / theta`.
#[inline]
pub fn matern52(scaled_r: f64) -> f64 {
    let a = SQRT5 * scaled_r;
    (1.0 + a + a * a / 3.0) * (-a).exp()
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `k(s, s2)` with `r = |s - s2| / theta`.
pub fn kernel(s: &[f64], s2: &[f64], params: &KernelParams) -> Result<f64> {
    if s.len() != s2.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            got: s2.len(),
        });
    }
    Ok(matern52(sq_dist(s, s2).sqrt() / params.theta))
}

/// A fitted GP. Immutable; predictions take `&self`.
#[derive(Debug, Clone)]
pub struct GpModel {
    n: usize,
    dims: usize,
    /// Row-major `n x dims`.
    inputs: Vec<f64>,
    targets: Vec<f64>,
    params: KernelParams,
    jitter: f64,
    /// Column-major lower-triangular factor, `n x n`.
    chol: Vec<f64>,
    alpha: Vec<f64>,
}

impl GpModel {
    pub fn fit(inputs: &[Vec<f64>], targets: &[f64], params: KernelParams, jitter: f64) -> Result<Self> {
        let n = inputs.len();
        if n == 0 {
            return Err(invalid("cannot fit a GP to zero points"));
        }
        if targets.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: targets.len(),
            });
        }
        if !(jitter >= 0.0) {
            return Err(invalid(format!("jitter must be nonnegative, got {jitter}")));
        }
        let dims = inputs[0].len();
        let mut flat = Vec::with_capacity(n * dims);
        for row in inputs {
            if row.len() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !(-1e-9..=1.0 + 1e-9).contains(v)) {
                return Err(invalid("GP inputs must lie in the unit hypercube"));
            }
            flat.extend_from_slice(row);
        }

        let mut chol = vec![0.0; n * n];
        for j in 0..n {
            let xj = &flat[j * dims..(j + 1) * dims];
            chol[j + j * n] = 1.0 + jitter;
            for i in j + 1..n {
                let xi = &flat[i * dims..(i + 1) * dims];
                chol[i + j * n] = matern52(sq_dist(xi, xj).sqrt() / params.theta);
            }
        }
        cholesky_in_place(&mut chol, n)?;

        let mut alpha = targets.to_vec();
        forward_solve(&chol, n, &mut alpha);
        backward_solve(&chol, n, &mut alpha);

        Ok(Self {
            n,
            dims,
            inputs: flat,
            targets: targets.to_vec(),
            params,
            jitter,
            chol,
            alpha,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dims..(i + 1) * self.dims]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Dense copy of the lower Cholesky factor, row-major.
    pub fn cholesky_factor(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| if j <= i { self.chol[i + j * self.n] } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    /// Posterior mean and variance, the variance clamped at zero.
    pub fn posterior(&self, s: &[f64]) -> Result<(f64, f64)> {
        let (mu, var) = self.posterior_unclamped(s)?;
        Ok((mu, var.max(0.0)))
    }

    /// Posterior mean and variance without clamping.
    pub fn posterior_unclamped(&self, s: &[f64]) -> Result<(f64, f64)> {
        if s.len() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                got: s.len(),
            });
        }
        let mut work = Vec::new();
        Ok(self.predict_with(s, &mut work))
    }

    /// Allocation-free prediction for hot loops; `s` must have `dims` entries.
    pub(crate) fn predict_with(&self, s: &[f64], work: &mut Vec<f64>) -> (f64, f64) {
        debug_assert_eq!(s.len(), self.dims);
        work.clear();
        let inv_theta = 1.0 / self.params.theta;
        work.extend(
            (0..self.n)
                .map(|i| matern52(sq_dist(&self.inputs[i * self.dims..(i + 1) * self.dims], s).sqrt() * inv_theta)),
        );
        let mu: f64 = work.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        forward_solve(&self.chol, self.n, work);
        let explained: f64 = work.iter().map(|v| v * v).sum();
        (mu, 1.0 - explained)
    }
}

/// Right-looking Cholesky on the lower triangle of a column-major matrix.
fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<()> {
    for j in 0..n {
        let pivot = a[j + j * n];
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: pivot });
        }
        let d = pivot.sqrt();
        a[j + j * n] = d;
        for v in &mut a[j + 1 + j * n..(j + 1) * n] {
            *v /= d;
        }
        let (head, tail) = a.split_at_mut((j + 1) * n);
        let col_j = &head[j * n..];
        for k in j + 1..n {
            let ljk = col_j[k];
            if ljk == 0.0 {
                continue;
            }
            let col_k = &mut tail[(k - j - 1) * n..(k - j) * n];
            for i in k..n {
                col_k[i] -= col_j[i] * ljk;
            }
        }
    }
    Ok(())
}

/// Solves `L y = b` in place.
fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for j in 0..n {
        let col = &l[j * n..(j + 1) * n];
        let yj = b[j] / col[j];
        b[j] = yj;
        if yj != 0.0 {
            for (bi, li) in b[j + 1..].iter_mut().zip(&col[j + 1..]) {
                *bi -= li * yj;
            }
        }
    }
}

/// Solves `L^T x = y` in place.
fn backward_solve(l: &[f64], n: usize, y: &mut [f64]) {
    for i in (0..n).rev() {
        let col = &l[i * n..(i + 1) * n];
        let s: f64 = col[i + 1..].iter().zip(&y[i + 1..]).map(|(a, b)| a * b).sum();
        y[i] = (y[i] - s) / col[i];
    }
}
