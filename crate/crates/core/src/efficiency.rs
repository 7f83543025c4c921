//! Gain, cost and gain-per-second arithmetic over a [`Trace`].
//!
//! Iteration indices are 1-based. Timestamps follow `t_0 = 0` and
//! `t_i = t_{i-1} + overhead_i + t_e`, so the cost of the interval `(k, i]`
//! is `t_i - t_k`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::trace::Trace;

/// Default window `w` between `k` and `i = k + w`.
pub const DEFAULT_WINDOW: usize = 10;

/// Best objective among records `1..=i`.
pub fn best_so_far(trace: &Trace, i: usize) -> Result<f64> {
    trace.get(i)?;
    Ok(trace.records()[..i]
        .iter()
        .map(|r| r.objective)
        .fold(f64::NEG_INFINITY, f64::max))
}

fn check_interval(trace: &Trace, k: usize, i: usize) -> Result<()> {
    if k == 0 || k >= i {
        return Err(invalid(format!("interval needs 1 <= k < i, got k={k}, i={i}")));
    }
    trace.get(i).map(|_| ())
}

/// `f'_i - f'_k`.
pub fn gain(trace: &Trace, k: usize, i: usize) -> Result<f64> {
    check_interval(trace, k, i)?;
    Ok(best_so_far(trace, i)? - best_so_far(trace, k)?)
}

/// Computation time spent on iterations `k+1..=i`.
pub fn interval_cost(trace: &Trace, k: usize, i: usize, t_e: f64) -> Result<f64> {
    check_interval(trace, k, i)?;
    check_eval_time(t_e)?;
    Ok(trace.records()[k..i].iter().map(|r| r.overhead_s + t_e).sum())
}

/// Gain per second over `(k, i]`.
pub fn time_efficiency(trace: &Trace, k: usize, i: usize, t_e: f64) -> Result<f64> {
    let cost = interval_cost(trace, k, i, t_e)?;
    if cost <= 0.0 {
        return Err(invalid(format!("zero computation time between {k} and {i}")));
    }
    Ok(gain(trace, k, i)? / cost)
}

/// Cumulative timestamps `t_1..t_N`.
pub fn timestamps(trace: &Trace, t_e: f64) -> Vec<f64> {
    let mut t = 0.0;
    trace
        .records()
        .iter()
        .map(|r| {
            t += r.overhead_s + t_e;
            t
        })
        .collect()
}

fn check_eval_time(t_e: f64) -> Result<()> {
    if t_e >= 0.0 && t_e.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("evaluation time must be nonnegative, got {t_e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainEntry {
    /// Right end `i` of the window; `k = i - w`.
    pub iter: usize,
    pub gain: f64,
    pub cost: f64,
    pub efficiency: f64,
}

/// Windowed gain-per-second values of one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSeries {
    pub window: usize,
    pub entries: Vec<GainEntry>,
}

impl GainSeries {
    pub fn efficiencies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.efficiency).collect()
    }

    /// Entry-wise mean of several series over the same window and iterations.
    pub fn mean(series: &[GainSeries]) -> Result<GainSeries> {
        let first = series.first().ok_or_else(|| invalid("no series to average"))?;
        for s in series {
            if s.window != first.window || s.entries.len() != first.entries.len() {
                return Err(invalid("series differ in window or length"));
            }
            if s.entries.iter().zip(&first.entries).any(|(a, b)| a.iter != b.iter) {
                return Err(invalid("series cover different iterations"));
            }
        }
        let n = series.len() as f64;
        let entries = (0..first.entries.len())
            .map(|j| {
                let mut e = GainEntry {
                    iter: first.entries[j].iter,
                    gain: 0.0,
                    cost: 0.0,
                    efficiency: 0.0,
                };
                for s in series {
                    e.gain += s.entries[j].gain / n;
                    e.cost += s.entries[j].cost / n;
                    e.efficiency += s.entries[j].efficiency / n;
                }
                e
            })
            .collect();
        Ok(GainSeries {
            window: first.window,
            entries,
        })
    }
}

/// One entry per `i` in `w+1..=N` with `k = i - w`.
pub fn gain_series(trace: &Trace, window: usize, t_e: f64) -> Result<GainSeries> {
    if window == 0 {
        return Err(invalid("window must be at least 1"));
    }
    check_eval_time(t_e)?;
    if trace.len() <= window {
        return Err(invalid(format!(
            "trace of length {} too short for window {window}",
            trace.len()
        )));
    }
    let best = trace.best_curve();
    let stamps = timestamps(trace, t_e);
    let entries = (window + 1..=trace.len())
        .map(|i| {
            let k = i - window;
            let gain = best[i - 1] - best[k - 1];
            let cost = stamps[i - 1] - stamps[k - 1];
            if cost <= 0.0 {
                return Err(invalid(format!("zero computation time between {k} and {i}")));
            }
            Ok(GainEntry {
                iter: i,
                gain,
                cost,
                efficiency: gain / cost,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GainSeries { window, entries })
}
