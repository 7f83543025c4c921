//! Griewank, Rastrigin and Schwefel test functions with the optimum at the
//! origin.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::objective::{Objective, ObjectiveError};
use crate::space::SearchSpace;

/// Location of the Schwefel optimum in the raw coordinates.
pub const SCHWEFEL_SHIFT: f64 = 420.9687;
/// Per-dimension constant making the Schwefel minimum approximately zero.
pub const SCHWEFEL_OFFSET: f64 = 418.9829;

pub const DEFAULT_DIMS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Griewank,
    Rastrigin,
    Schwefel,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [Benchmark::Griewank, Benchmark::Rastrigin, Benchmark::Schwefel];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Griewank => "griewank",
            Benchmark::Rastrigin => "rastrigin",
            Benchmark::Schwefel => "schwefel",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "griewank" => Ok(Benchmark::Griewank),
            "rastrigin" => Ok(Benchmark::Rastrigin),
            "schwefel" => Ok(Benchmark::Schwefel),
            other => Err(invalid(format!(
                "unknown function {other:?} (expected griewank, rastrigin or schwefel)"
            ))),
        }
    }
}

/// A benchmark in a fixed dimension. `evaluate` returns the minimization
/// value; [`objective`](Self::objective) wraps it with the sign flipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkFunction {
    pub kind: Benchmark,
    pub dims: usize,
}

impl BenchmarkFunction {
    pub fn new(kind: Benchmark, dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(invalid("benchmark dimension must be at least 1"));
        }
        Ok(Self { kind, dims })
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                got: x.len(),
            });
        }
        Ok(match self.kind {
            Benchmark::Griewank => griewank(x),
            Benchmark::Rastrigin => rastrigin(x),
            Benchmark::Schwefel => schwefel_shifted(x),
        })
    }

    pub fn domain(&self) -> SearchSpace {
        let (lo, hi) = match self.kind {
            Benchmark::Griewank => (-600.0, 600.0),
            Benchmark::Rastrigin => (-5.12, 5.12),
            Benchmark::Schwefel => (-500.0 - SCHWEFEL_SHIFT, 500.0 - SCHWEFEL_SHIFT),
        };
        SearchSpace::cube(self.dims, lo, hi).expect("benchmark bounds are ordered")
    }

    /// The negated function, for maximizing optimizers.
    pub fn objective(self) -> impl Objective + Clone {
        move |x: &[f64]| -> std::result::Result<f64, ObjectiveError> {
            self.evaluate(x).map(|v| -v).map_err(|e| ObjectiveError(e.to_string()))
        }
    }
}

fn griewank(x: &[f64]) -> f64 {
    let sum: f64 = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
    let prod: f64 = x
        .iter()
        .enumerate()
        .map(|(j, v)| (v / ((j + 1) as f64).sqrt()).cos())
        .product();
    sum - prod + 1.0
}

fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
}

fn schwefel_shifted(x: &[f64]) -> f64 {
    let s: f64 = x
        .iter()
        .map(|v| {
            let z = v + SCHWEFEL_SHIFT;
            z * z.abs().sqrt().sin()
        })
        .sum();
    SCHWEFEL_OFFSET * x.len() as f64 - s
}
