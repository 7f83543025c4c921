//! One-sided Mann–Whitney U test.

use statrs::function::erf::erfc;

use crate::error::{invalid, Result};

/// Largest sample size for which the exact null distribution is used.
pub const EXACT_MAX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// `#{(i, j): a_i > b_j} + 0.5 #{a_i = b_j}`.
    pub u: f64,
    /// `P(U >= u)` under the null; small when `a` tends to exceed `b`.
    pub p_value: f64,
    pub exact: bool,
    /// Some value occurs more than once in the pooled sample.
    pub ties: bool,
}

/// Tests whether `a` is stochastically greater than `b`.
///
/// Exact when both samples have at most [`EXACT_MAX`] values and there are
/// no ties; otherwise a tie-corrected normal approximation with continuity
/// correction.
pub fn mann_whitney_greater(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("Mann-Whitney needs two nonempty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(invalid("Mann-Whitney samples contain NaN"));
    }
    let (m, n) = (a.len(), b.len());
    let mut u = 0.0;
    for x in a {
        for y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }

    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1] == pooled[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let ties = tie_term > 0.0;

    if !ties && m <= EXACT_MAX && n <= EXACT_MAX {
        let counts = u_distribution(m, n);
        let total: f64 = counts.iter().sum();
        let from = u as usize;
        let tail: f64 = counts[from..].iter().sum();
        return Ok(MannWhitney {
            u,
            p_value: tail / total,
            exact: true,
            ties,
        });
    }

    let (mf, nf) = (m as f64, n as f64);
    let big_n = mf + nf;
    let mean = mf * nf / 2.0;
    let var = mf * nf / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    let p_value = if var <= 0.0 {
        0.5
    } else {
        let diff = u - mean;
        let corrected = if diff > 0.0 {
            (diff - 0.5).max(0.0)
        } else if diff < 0.0 {
            (diff + 0.5).min(0.0)
        } else {
            0.0
        };
        let z = corrected / var.sqrt();
        0.5 * erfc(z / std::f64::consts::SQRT_2)
    };
    Ok(MannWhitney {
        u,
        p_value,
        exact: false,
        ties,
    })
}

/// Number of orderings giving each value of `U` for sample sizes `m`, `n`.
fn u_distribution(m: usize, n: usize) -> Vec<f64> {
    // table[i][j][u]: arrangements of i a-values and j b-values with U = u.
    let max_u = m * n;
    let mut table = vec![vec![vec![0.0f64; max_u + 1]; n + 1]; m + 1];
    for i in 0..=m {
        for j in 0..=n {
            if i == 0 || j == 0 {
                table[i][j][0] = 1.0;
                continue;
            }
            for u in 0..=i * j {
                // Largest value from a exceeds all j b-values; or it comes from b.
                let from_a = if u >= j { table[i - 1][j][u - j] } else { 0.0 };
                let from_b = table[i][j - 1][u];
                table[i][j][u] = from_a + from_b;
            }
        }
    }
    table.swap_remove(m).swap_remove(n)
}
