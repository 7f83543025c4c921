//! Per-iteration optimizer output and its CSV form.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::space::Solution;

/// Which optimizer produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Bo,
    Ea,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Bo => "bo",
            Stage::Ea => "ea",
        })
    }
}

/// One objective evaluation.
///
/// `objective` follows the maximization convention. `overhead_s` is the
/// measured time spent generating the candidate; evaluation time is not
/// stored and is supplied at analysis time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub solution: Solution,
    pub objective: f64,
    pub overhead_s: f64,
    pub stage: Stage,
}

/// Ordered records `1..=N` of a single optimizer run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    records: Vec<IterationRecord>,
    pub seed: u64,
    pub algorithm: String,
}

impl Trace {
    pub fn new(algorithm: impl Into<String>, seed: u64) -> Self {
        Self {
            records: Vec::new(),
            seed,
            algorithm: algorithm.into(),
        }
    }

    /// Appends a record, assigning the next contiguous index.
    pub fn push(&mut self, solution: Solution, objective: f64, overhead_s: f64, stage: Stage) -> &IterationRecord {
        let index = self.records.len() + 1;
        self.records.push(IterationRecord {
            index,
            solution,
            objective,
            overhead_s: overhead_s.max(0.0),
            stage,
        });
        self.records.last().unwrap()
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub(crate) fn records_mut(&mut self) -> &mut [IterationRecord] {
        &mut self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record `i`, 1-based.
    pub fn get(&self, i: usize) -> Result<&IterationRecord> {
        if i == 0 || i > self.records.len() {
            return Err(Error::OutOfBounds {
                index: i,
                len: self.records.len(),
            });
        }
        Ok(&self.records[i - 1])
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn overheads(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.overhead_s).collect()
    }

    /// Running maximum `f'_1..f'_N`.
    pub fn best_curve(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.max(r.objective);
                best
            })
            .collect()
    }

    /// First `n` records as a new trace.
    pub fn truncated(&self, n: usize) -> Trace {
        Trace {
            records: self.records[..n.min(self.records.len())].to_vec(),
            seed: self.seed,
            algorithm: self.algorithm.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "f", "f_best", "overhead_s"])?;
        for (r, best) in self.records.iter().zip(self.best_curve()) {
            w.write_record([
                r.index.to_string(),
                fmt_sig9(r.objective),
                fmt_sig9(best),
                fmt_sig9(r.overhead_s),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })
    }

    /// Reads the CSV form back. Solutions are not part of the file, so the
    /// returned records carry empty solutions and the given stage.
    pub fn read_csv<R: Read>(input: R, algorithm: &str, seed: u64, stage: Stage) -> Result<Trace> {
        let path = std::path::PathBuf::from("<trace>");
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers().map_err(|source| Error::Csv {
            path: path.clone(),
            source,
        })?;
        if headers.iter().collect::<Vec<_>>() != ["iter", "f", "f_best", "overhead_s"] {
            return Err(Error::Parse {
                path,
                message: format!("unexpected header {headers:?}"),
            });
        }
        let mut trace = Trace::new(algorithm, seed);
        for row in rdr.records() {
            let row = row.map_err(|source| Error::Csv {
                path: path.clone(),
                source,
            })?;
            let field = |k: usize| -> Result<f64> {
                row.get(k)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse {
                        path: path.clone(),
                        message: format!("bad field {k} in {row:?}"),
                    })
            };
            let iter = field(0)? as usize;
            if iter != trace.len() + 1 {
                return Err(invalid(format!("non-contiguous iteration {iter}")));
            }
            trace.push(Solution::default(), field(1)?, field(3)?, stage);
        }
        Ok(trace)
    }

    pub fn load_csv(path: &Path, algorithm: &str, seed: u64, stage: Stage) -> Result<Trace> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Trace::read_csv(std::io::BufReader::new(file), algorithm, seed, stage).map_err(|e| match e {
            Error::Csv { source, .. } => Error::Csv {
                path: path.to_path_buf(),
                source,
            },
            Error::Parse { message, .. } => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bo" => Ok(Stage::Bo),
            "ea" => Ok(Stage::Ea),
            other => Err(invalid(format!("unknown stage {other:?}"))),
        }
    }
}

/// Formats `x` with 9 significant digits, `%g` style.
pub fn fmt_sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// `x` as it reads back after a round trip through [`fmt_sig9`].
pub fn quantize_sig9(x: f64) -> f64 {
    fmt_sig9(x).parse().unwrap_or(x)
}
