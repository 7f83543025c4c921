//! Experiment orchestration: repeated runs, switch-point analysis, CSV
//! export and SVG plots.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bea::{run_bea, BeaConfig};
use crate::bench::{Benchmark, BenchmarkFunction, DEFAULT_DIMS};
use crate::bo::{run_bo, BoConfig};
use crate::ea::{run_ea, EaConfig};
use crate::efficiency::{gain_series, timestamps, GainSeries, DEFAULT_WINDOW};
use crate::error::{invalid, Error, Result};
use crate::smooth::{loess, DEFAULT_SPAN};
use crate::stats::{mann_whitney_greater, MannWhitney};
use crate::trace::{fmt_sig9, quantize_sig9, Stage, Trace};

pub const DEFAULT_PERSISTENCE: usize = 3;
pub const DEFAULT_EVAL_TIMES: [f64; 3] = [0.1, 1.0, 10.0];
/// Points on the common time grid of objective-vs-time plots.
pub const GRID_POINTS: usize = 200;
pub const SUMMARY_HEADER: [&str; 7] = [
    "function",
    "algorithm",
    "te",
    "seed",
    "final_best",
    "total_comp_time_s",
    "switch_point",
];
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "experiment.json";
pub const FAILURES_FILE: &str = "failures.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Bo,
    Ea,
    Bea,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Bo, Algorithm::Ea, Algorithm::Bea];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bo => "bo",
            Algorithm::Ea => "ea",
            Algorithm::Bea => "bea",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bo" => Ok(Algorithm::Bo),
            "ea" => Ok(Algorithm::Ea),
            "bea" => Ok(Algorithm::Bea),
            other => Err(invalid(format!("unknown algorithm {other:?} (expected bo, ea or bea)"))),
        }
    }
}

/// Length scale used for a benchmark unless overridden.
pub fn default_theta(kind: Benchmark) -> f64 {
    match kind {
        Benchmark::Schwefel => 0.5,
        Benchmark::Griewank | Benchmark::Rastrigin => 0.1,
    }
}

/// Smoothing applied to seed-averaged gain curves before switch detection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Smoothing {
    #[default]
    None,
    /// Local quadratic regression over `span` of the points.
    Loess { span: f64 },
}

impl Smoothing {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Smoothing::None => Ok(()),
            Smoothing::Loess { span } if span > 0.0 && span.is_finite() => Ok(()),
            Smoothing::Loess { span } => Err(invalid(format!("smoothing span must be positive, got {span}"))),
        }
    }

    /// Returns `series` with smoothed efficiencies; gains and costs are kept.
    pub fn apply(&self, series: &GainSeries) -> Result<GainSeries> {
        match *self {
            Smoothing::None => Ok(series.clone()),
            Smoothing::Loess { span } => {
                let x: Vec<f64> = series.entries.iter().map(|e| e.iter as f64).collect();
                let fitted = loess(&x, &series.efficiencies(), span, 2)?;
                let mut out = series.clone();
                for (e, v) in out.entries.iter_mut().zip(fitted) {
                    e.efficiency = v;
                }
                Ok(out)
            }
        }
    }
}

impl FromStr for Smoothing {
    type Err = Error;

    /// `none`, `loess` or `loess:<span>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        let parsed = match s.split_once(':') {
            None if s == "none" => Smoothing::None,
            None if s == "loess" => Smoothing::Loess { span: DEFAULT_SPAN },
            Some(("loess", span)) => Smoothing::Loess {
                span: span.parse().map_err(|_| invalid(format!("bad loess span {span:?}")))?,
            },
            _ => {
                return Err(invalid(format!(
                    "unknown smoothing {s:?} (expected none, loess or loess:<span>)"
                )))
            }
        };
        parsed.validate()?;
        Ok(parsed)
    }
}

/// Everything needed to reproduce a batch of runs.
///
/// `bo` applies to both standalone BO and the BO stage of BEA; its `theta`
/// and `seed` are replaced per run. Likewise `ea.seed`, `bea.seed` and
/// `bea.bo` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub functions: Vec<String>,
    pub algorithms: Vec<Algorithm>,
    /// Simulated evaluation times in seconds, applied at analysis time.
    pub eval_times: Vec<f64>,
    pub iters: usize,
    pub reps: usize,
    pub base_seed: u64,
    pub dims: usize,
    /// Length scale for every function; `None` uses [`default_theta`].
    pub theta: Option<f64>,
    pub bo: BoConfig,
    pub ea: EaConfig,
    pub bea: BeaConfig,
    pub window: usize,
    pub persistence: usize,
    pub smoothing: Smoothing,
    /// When false, overheads are recorded as zero so that repeated runs
    /// produce byte-identical files.
    pub record_overhead: bool,
    pub workers: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            functions: Benchmark::ALL.iter().map(|b| b.name().to_string()).collect(),
            algorithms: Algorithm::ALL.to_vec(),
            eval_times: DEFAULT_EVAL_TIMES.to_vec(),
            iters: 600,
            reps: 10,
            base_seed: 0,
            dims: DEFAULT_DIMS,
            theta: None,
            bo: BoConfig::default(),
            ea: EaConfig::default(),
            bea: BeaConfig::default(),
            window: DEFAULT_WINDOW,
            persistence: DEFAULT_PERSISTENCE,
            smoothing: Smoothing::default(),
            record_overhead: true,
            workers: 1,
        }
    }
}

impl ExperimentSpec {
    /// Checks the spec and returns the parsed function list.
    pub fn validate(&self) -> Result<Vec<Benchmark>> {
        if self.reps == 0 {
            return Err(invalid("need at least one repetition"));
        }
        if self.iters == 0 {
            return Err(invalid("need at least one iteration"));
        }
        if self.dims == 0 {
            return Err(invalid("need at least one dimension"));
        }
        if self.eval_times.is_empty() {
            return Err(invalid("need at least one evaluation time"));
        }
        if let Some(te) = self.eval_times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(invalid(format!("evaluation time {te} must be finite and nonnegative")));
        }
        if self.algorithms.is_empty() {
            return Err(invalid("need at least one algorithm"));
        }
        if self.functions.is_empty() {
            return Err(invalid("need at least one function"));
        }
        let functions = self
            .functions
            .iter()
            .map(|f| f.parse::<Benchmark>())
            .collect::<Result<Vec<_>>>()?;
        if let Some(theta) = self.theta {
            if !(theta > 0.0 && theta.is_finite()) {
                return Err(invalid(format!("theta must be positive, got {theta}")));
            }
        }
        if self.window == 0 || self.persistence == 0 || self.workers == 0 {
            return Err(invalid("window, persistence and workers must be at least 1"));
        }
        self.smoothing.validate()?;
        self.bo.validate()?;
        self.ea.validate()?;
        if self.algorithms.contains(&Algorithm::Bea) {
            self.bea_config(functions[0], self.base_seed).validate()?;
            if self.iters <= self.bea.switch_point {
                return Err(invalid(format!(
                    "BEA needs more than {} iterations, got {}",
                    self.bea.switch_point, self.iters
                )));
            }
        }
        Ok(functions)
    }

    pub fn bo_config(&self, kind: Benchmark, seed: u64) -> BoConfig {
        BoConfig {
            theta: self.theta.unwrap_or_else(|| default_theta(kind)),
            seed,
            ..self.bo.clone()
        }
    }

    pub fn ea_config(&self, seed: u64) -> EaConfig {
        EaConfig {
            seed,
            ..self.ea.clone()
        }
    }

    pub fn bea_config(&self, kind: Benchmark, seed: u64) -> BeaConfig {
        BeaConfig {
            bo: self.bo_config(kind, seed),
            seed,
            ..self.bea.clone()
        }
    }

    /// Seeds `base_seed + r` for `r < reps`.
    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.reps as u64).map(|r| self.base_seed + r)
    }
}

/// Quantities derived from a trace for one evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub struct Derived {
    pub te: f64,
    pub timestamps: Vec<f64>,
    pub best: Vec<f64>,
    pub gains: GainSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub function: Benchmark,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub trace: Trace,
}

impl RunResult {
    pub fn derived(&self, te: f64, window: usize) -> Result<Derived> {
        Ok(Derived {
            te,
            timestamps: timestamps(&self.trace, te),
            best: self.trace.best_curve(),
            gains: gain_series(&self.trace, window, te)?,
        })
    }

    pub fn final_best(&self) -> f64 {
        self.trace.best_curve().last().copied().unwrap_or(f64::NAN)
    }

    pub fn file_name(&self) -> String {
        trace_file_name(self.function, self.algorithm, self.seed)
    }
}

pub fn trace_file_name(function: Benchmark, algorithm: Algorithm, seed: u64) -> String {
    format!("trace__{function}__{algorithm}__{seed}.csv")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunFailure {
    pub function: Benchmark,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentOutcome {
    pub results: Vec<RunResult>,
    pub failures: Vec<RunFailure>,
}

/// Runs one algorithm on one function.
pub fn run_single(spec: &ExperimentSpec, function: Benchmark, algorithm: Algorithm, seed: u64) -> Result<Trace> {
    let bench = BenchmarkFunction::new(function, spec.dims)?;
    let space = bench.domain();
    let mut objective = bench.objective();
    let mut trace = match algorithm {
        Algorithm::Bo => run_bo(&mut objective, &space, &spec.bo_config(function, seed), spec.iters)?,
        Algorithm::Ea => run_ea(&mut objective, &space, &spec.ea_config(seed), spec.iters, None)?,
        Algorithm::Bea => run_bea(&mut objective, &space, &spec.bea_config(function, seed), spec.iters)?,
    };
    if !spec.record_overhead {
        for r in trace.records_mut() {
            r.overhead_s = 0.0;
        }
    }
    Ok(trace)
}

/// Runs every (function, algorithm, seed) combination on a pool of
/// `spec.workers` threads. A failing run is reported in
/// [`ExperimentOutcome::failures`] and does not stop the others. Result
/// order follows the spec's function, algorithm and seed order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let functions = spec.validate()?;
    let mut jobs = Vec::new();
    for &f in &functions {
        for &a in &spec.algorithms {
            for seed in spec.seeds() {
                jobs.push((f, a, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<_> = pool.install(|| {
        jobs.par_iter()
            .map(|&(f, a, seed)| ((f, a, seed), run_single(spec, f, a, seed)))
            .collect()
    });
    let mut outcome = ExperimentOutcome::default();
    for ((function, algorithm, seed), run) in runs {
        match run {
            Ok(trace) => outcome.results.push(RunResult {
                function,
                algorithm,
                seed,
                trace,
            }),
            Err(e) => outcome.failures.push(RunFailure {
                function,
                algorithm,
                seed,
                message: e.to_string(),
            }),
        }
    }
    Ok(outcome)
}

/// Smallest iteration `i` such that EA's efficiency exceeds BO's at `i` and
/// the following `m - 1` entries.
pub fn detect_switch_point(bo: &GainSeries, ea: &GainSeries, m: usize) -> Result<Option<usize>> {
    if m == 0 {
        return Err(invalid("persistence must be at least 1"));
    }
    if bo.window != ea.window {
        return Err(invalid(format!("windows differ: {} vs {}", bo.window, ea.window)));
    }
    if bo.entries.len() != ea.entries.len() || bo.entries.iter().zip(&ea.entries).any(|(b, e)| b.iter != e.iter) {
        return Err(invalid("BO and EA series cover different iterations"));
    }
    let n = bo.entries.len();
    if n < m {
        return Ok(None);
    }
    Ok((0..=n - m)
        .find(|&s| (s..s + m).all(|j| ea.entries[j].efficiency > bo.entries[j].efficiency))
        .map(|s| bo.entries[s].iter))
}

/// Entry-wise mean of the gain series of `runs`, truncated to the shortest.
pub fn mean_gain_series<'r>(
    runs: impl IntoIterator<Item = &'r RunResult>,
    te: f64,
    window: usize,
) -> Result<GainSeries> {
    let traces: Vec<&Trace> = runs.into_iter().map(|r| &r.trace).collect();
    let n = traces
        .iter()
        .map(|t| t.len())
        .min()
        .ok_or_else(|| invalid("no runs to average"))?;
    let series = traces
        .iter()
        .map(|t| gain_series(&t.truncated(n), window, te))
        .collect::<Result<Vec<_>>>()?;
    GainSeries::mean(&series)
}

/// Switch point between the seed-averaged, smoothed BO and EA gain curves
/// of `function` at evaluation time `te`.
pub fn switch_point(
    results: &[RunResult],
    function: Benchmark,
    te: f64,
    window: usize,
    persistence: usize,
    smoothing: Smoothing,
) -> Result<Option<usize>> {
    let pick = |a: Algorithm| {
        results
            .iter()
            .filter(move |r| r.function == function && r.algorithm == a)
    };
    if pick(Algorithm::Bo).next().is_none() || pick(Algorithm::Ea).next().is_none() {
        return Err(invalid(format!("switch point on {function} needs both BO and EA runs")));
    }
    let n = pick(Algorithm::Bo)
        .chain(pick(Algorithm::Ea))
        .map(|r| r.trace.len())
        .min()
        .unwrap_or(0);
    let trunc = |a: Algorithm| -> Vec<RunResult> {
        pick(a)
            .map(|r| RunResult {
                trace: r.trace.truncated(n),
                ..r.clone()
            })
            .collect()
    };
    let bo = smoothing.apply(&mean_gain_series(&trunc(Algorithm::Bo), te, window)?)?;
    let ea = smoothing.apply(&mean_gain_series(&trunc(Algorithm::Ea), te, window)?)?;
    detect_switch_point(&bo, &ea, persistence)
}

/// One-sided Mann–Whitney U test that `a` tends to exceed `b`.
pub fn significance(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    mann_whitney_greater(a, b)
}

/// Final best values of `algorithm` on `function`, in result order.
pub fn final_bests(results: &[RunResult], function: Benchmark, algorithm: Algorithm) -> Vec<f64> {
    results
        .iter()
        .filter(|r| r.function == function && r.algorithm == algorithm)
        .map(RunResult::final_best)
        .collect()
}

/// A row of the summary file. Floats hold exactly the values written.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub function: Benchmark,
    pub algorithm: Algorithm,
    pub te: f64,
    pub seed: u64,
    pub final_best: f64,
    pub total_comp_time_s: f64,
    pub switch_point: Option<usize>,
}

/// One row per result and evaluation time. BEA rows carry the configured
/// switch point; BO and EA rows carry the detected one, if any.
pub fn summarize(results: &[RunResult], spec: &ExperimentSpec) -> Result<Vec<SummaryRow>> {
    let mut detected: BTreeMap<(Benchmark, u64), Option<usize>> = BTreeMap::new();
    let mut rows = Vec::new();
    for r in results {
        for &te in &spec.eval_times {
            let switch = match r.algorithm {
                Algorithm::Bea => Some(spec.bea.switch_point),
                Algorithm::Bo | Algorithm::Ea => *detected.entry((r.function, te.to_bits())).or_insert_with(|| {
                    switch_point(results, r.function, te, spec.window, spec.persistence, spec.smoothing)
                        .ok()
                        .flatten()
                }),
            };
            rows.push(SummaryRow {
                function: r.function,
                algorithm: r.algorithm,
                te: quantize_sig9(te),
                seed: r.seed,
                final_best: quantize_sig9(r.final_best()),
                total_comp_time_s: quantize_sig9(timestamps(&r.trace, te).last().copied().unwrap_or(0.0)),
                switch_point: switch,
            });
        }
    }
    Ok(rows)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(SUMMARY_HEADER).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.function.to_string(),
            r.algorithm.to_string(),
            fmt_sig9(r.te),
            r.seed.to_string(),
            fmt_sig9(r.final_best),
            fmt_sig9(r.total_comp_time_s),
            r.switch_point.map(|s| s.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::Reader::from_reader(std::io::BufReader::new(file));
    let headers = rdr.headers().map_err(csv_err(path))?;
    if headers.iter().collect::<Vec<_>>() != SUMMARY_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("unexpected header {headers:?}"),
        });
    }
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            field(k)
                .parse()
                .map_err(|_| parse_err(format!("bad number {:?} in {rec:?}", field(k))))
        };
        rows.push(SummaryRow {
            function: field(0).parse().map_err(|e: Error| parse_err(e.to_string()))?,
            algorithm: field(1).parse().map_err(|e: Error| parse_err(e.to_string()))?,
            te: num(2)?,
            seed: field(3)
                .parse()
                .map_err(|_| parse_err(format!("bad seed in {rec:?}")))?,
            final_best: num(4)?,
            total_comp_time_s: num(5)?,
            switch_point: match field(6) {
                "" => None,
                s => Some(s.parse().map_err(|_| parse_err(format!("bad switch point {s:?}")))?),
            },
        });
    }
    Ok(rows)
}

/// Paths written by [`export_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExportedFiles {
    pub traces: Vec<PathBuf>,
    pub summary: PathBuf,
    pub manifest: PathBuf,
}

/// Writes one trace CSV per result, the summary, the spec as JSON and,
/// when some runs failed, a failure list.
pub fn export_csv(outcome: &ExperimentOutcome, spec: &ExperimentSpec, dir: &Path) -> Result<ExportedFiles> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut traces = Vec::new();
    for r in &outcome.results {
        let path = dir.join(r.file_name());
        r.trace.save_csv(&path)?;
        traces.push(path);
    }
    let summary = dir.join(SUMMARY_FILE);
    write_summary(&summarize(&outcome.results, spec)?, &summary)?;
    let manifest = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(spec).map_err(|e| invalid(format!("cannot encode spec: {e}")))?;
    fs::write(&manifest, json + "\n").map_err(io_err(&manifest))?;
    let failures = dir.join(FAILURES_FILE);
    if !outcome.failures.is_empty() {
        let file = fs::File::create(&failures).map_err(io_err(&failures))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["function", "algorithm", "seed", "error"])
            .map_err(csv_err(&failures))?;
        for f in &outcome.failures {
            w.write_record([
                f.function.to_string(),
                f.algorithm.to_string(),
                f.seed.to_string(),
                f.message.clone(),
            ])
            .map_err(csv_err(&failures))?;
        }
        w.flush().map_err(io_err(&failures))?;
    }
    Ok(ExportedFiles {
        traces,
        summary,
        manifest,
    })
}

/// Reads a directory written by [`export_csv`]. Runs without a trace file
/// (failed runs) are skipped. Solutions are not stored, so the returned
/// traces carry empty solutions.
pub fn load_experiment(dir: &Path) -> Result<(ExperimentSpec, Vec<RunResult>)> {
    let manifest = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest).map_err(io_err(&manifest))?;
    let spec: ExperimentSpec = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: manifest.clone(),
        message: e.to_string(),
    })?;
    let functions = spec.validate()?;
    let mut results = Vec::new();
    for &function in &functions {
        for &algorithm in &spec.algorithms {
            for seed in spec.seeds() {
                let path = dir.join(trace_file_name(function, algorithm, seed));
                if !path.exists() {
                    continue;
                }
                let stage = if algorithm == Algorithm::Bo {
                    Stage::Bo
                } else {
                    Stage::Ea
                };
                let mut trace = Trace::load_csv(&path, algorithm.name(), seed, stage)?;
                if algorithm == Algorithm::Bea {
                    for r in trace.records_mut() {
                        if r.index <= spec.bea.switch_point {
                            r.stage = Stage::Bo;
                        }
                    }
                }
                results.push(RunResult {
                    function,
                    algorithm,
                    seed,
                    trace,
                });
            }
        }
    }
    Ok((spec, results))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    ObjectiveVsTime,
    GainVsIter,
    OverheadVsIter,
}

impl PlotKind {
    pub const ALL: [PlotKind; 3] = [
        PlotKind::ObjectiveVsTime,
        PlotKind::GainVsIter,
        PlotKind::OverheadVsIter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::ObjectiveVsTime => "objective_vs_time",
            PlotKind::GainVsIter => "gain_vs_iter",
            PlotKind::OverheadVsIter => "overhead_vs_iter",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| invalid(format!("unknown plot kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub te: f64,
    pub window: usize,
    /// Logarithmic x axis; ignored when the axis reaches zero.
    pub log_x: bool,
    /// Iteration at which to draw the switch marker.
    pub switch_point: Option<usize>,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            te: 1.0,
            window: DEFAULT_WINDOW,
            log_x: true,
            switch_point: None,
        }
    }
}

/// Mean and standard deviation of one algorithm's runs on a common x grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub algorithm: Algorithm,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub runs: usize,
}

/// Log-spaced grid from `lo` to `hi` (linear when `lo` is not positive).
pub fn time_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 || hi <= lo {
        return vec![lo];
    }
    let last = (points - 1) as f64;
    if lo > 0.0 {
        let (a, b) = (lo.ln(), hi.ln());
        (0..points)
            .map(|k| {
                if k + 1 == points {
                    hi
                } else {
                    (a + (b - a) * k as f64 / last).exp()
                }
            })
            .collect()
    } else {
        (0..points).map(|k| lo + (hi - lo) * k as f64 / last).collect()
    }
}

/// Best-so-far at the latest iteration completed by time `t`.
pub fn best_at_time(timestamps: &[f64], best: &[f64], t: f64) -> Option<f64> {
    let done = timestamps.partition_point(|&s| s <= t);
    done.checked_sub(1).map(|j| best[j])
}

fn mean_sd(columns: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = columns.len() as f64;
    let len = columns.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|j| {
            let mean = columns.iter().map(|c| c[j]).sum::<f64>() / n;
            let var = if columns.len() > 1 {
                columns.iter().map(|c| (c[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            (mean, var.sqrt())
        })
        .unzip()
}

/// Curves behind [`render_plot`]. All results must share one function.
pub fn plot_series(results: &[RunResult], kind: PlotKind, opts: &PlotOptions) -> Result<Vec<PlotSeries>> {
    let first = results.first().ok_or_else(|| invalid("nothing to plot"))?;
    if let Some(other) = results.iter().find(|r| r.function != first.function) {
        return Err(invalid(format!(
            "cannot mix functions in one plot ({} and {})",
            first.function, other.function
        )));
    }
    if !(opts.te.is_finite() && opts.te >= 0.0) {
        return Err(invalid(format!(
            "evaluation time {} must be finite and nonnegative",
            opts.te
        )));
    }
    let mut groups: BTreeMap<Algorithm, Vec<&RunResult>> = BTreeMap::new();
    for r in results {
        if r.trace.is_empty() {
            return Err(invalid(format!("{} run with seed {} is empty", r.algorithm, r.seed)));
        }
        groups.entry(r.algorithm).or_default().push(r);
    }
    let grid = if kind == PlotKind::ObjectiveVsTime {
        let stamps: Vec<Vec<f64>> = results.iter().map(|r| timestamps(&r.trace, opts.te)).collect();
        let lo = stamps.iter().map(|s| s[0]).fold(f64::NEG_INFINITY, f64::max);
        let hi = stamps.iter().map(|s| s[s.len() - 1]).fold(f64::NEG_INFINITY, f64::max);
        time_grid(lo, hi, GRID_POINTS)
    } else {
        Vec::new()
    };
    let mut out = Vec::new();
    for (algorithm, runs) in groups {
        let (x, columns): (Vec<f64>, Vec<Vec<f64>>) = match kind {
            PlotKind::ObjectiveVsTime => {
                let cols = runs
                    .iter()
                    .map(|r| {
                        let ts = timestamps(&r.trace, opts.te);
                        let best = r.trace.best_curve();
                        grid.iter()
                            .map(|&g| best_at_time(&ts, &best, g).expect("grid starts after every first timestamp"))
                            .collect()
                    })
                    .collect();
                (grid.clone(), cols)
            }
            PlotKind::GainVsIter => {
                let series = runs
                    .iter()
                    .map(|r| gain_series(&r.trace, opts.window, opts.te))
                    .collect::<Result<Vec<_>>>()?;
                let shortest = series.iter().min_by_key(|s| s.entries.len()).expect("nonempty group");
                let x = shortest.entries.iter().map(|e| e.iter as f64).collect();
                (x, series.iter().map(GainSeries::efficiencies).collect())
            }
            PlotKind::OverheadVsIter => {
                let len = runs.iter().map(|r| r.trace.len()).min().unwrap_or(0);
                let x = (1..=len).map(|i| i as f64).collect();
                (x, runs.iter().map(|r| r.trace.overheads()).collect())
            }
        };
        let (mean, sd) = mean_sd(&columns);
        out.push(PlotSeries {
            algorithm,
            x: x[..mean.len()].to_vec(),
            mean,
            sd,
            runs: runs.len(),
        });
    }
    Ok(out)
}

fn color(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Bo => "#1f4fd1",
        Algorithm::Ea => "#111111",
        Algorithm::Bea => "#1b9e3a",
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
    px0: f64,
    px1: f64,
}

impl Axis {
    fn map(&self, v: f64) -> f64 {
        let (v, lo, hi) = if self.log {
            (v.max(self.lo).ln(), self.lo.ln(), self.hi.ln())
        } else {
            (v, self.lo, self.hi)
        };
        self.px0 + (v - lo) / (hi - lo) * (self.px1 - self.px0)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.log10().ceil() as i32, self.hi.log10().floor() as i32);
            let t: Vec<f64> = (a..=b).map(|e| 10f64.powi(e)).collect();
            if t.len() >= 2 {
                return t;
            }
        }
        (0..=5)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / 5.0)
            .collect()
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 100.0).round() / 100.0)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders mean curves with a two-standard-deviation band per algorithm,
/// a legend, and a dashed marker at `opts.switch_point`.
pub fn render_plot(results: &[RunResult], kind: PlotKind, opts: &PlotOptions) -> Result<String> {
    let series = plot_series(results, kind, opts)?;
    let function = results[0].function;
    let (width, height) = (860.0, 520.0);
    let (left, right, top, bottom) = (80.0, 170.0, 50.0, 60.0);

    let marker_x = opts.switch_point.and_then(|sp| match kind {
        PlotKind::ObjectiveVsTime => {
            let owner = [Algorithm::Bea, Algorithm::Bo]
                .into_iter()
                .find(|a| results.iter().any(|r| r.algorithm == *a && r.trace.len() >= sp))?;
            let times: Vec<f64> = results
                .iter()
                .filter(|r| r.algorithm == owner && r.trace.len() >= sp && sp > 0)
                .map(|r| timestamps(&r.trace, opts.te)[sp - 1])
                .collect();
            Some(times.iter().sum::<f64>() / times.len() as f64)
        }
        PlotKind::GainVsIter | PlotKind::OverheadVsIter => Some(sp as f64),
    });

    let xs = series.iter().flat_map(|s| s.x.iter().copied()).chain(marker_x);
    let (mut xlo, mut xhi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let ys = series
        .iter()
        .flat_map(|s| s.mean.iter().zip(&s.sd).flat_map(|(m, d)| [m - 2.0 * d, m + 2.0 * d]));
    let (mut ylo, mut yhi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(xlo.is_finite() && xhi.is_finite()) {
        (xlo, xhi) = (0.0, 1.0);
    }
    if !(ylo.is_finite() && yhi.is_finite()) {
        (ylo, yhi) = (0.0, 1.0);
    }
    if xhi <= xlo {
        xhi = xlo + 1.0;
    }
    if yhi <= ylo {
        let pad = ylo.abs().max(1.0) * 0.05;
        (ylo, yhi) = (ylo - pad, yhi + pad);
    }
    let xaxis = Axis {
        lo: xlo,
        hi: xhi,
        log: opts.log_x && xlo > 0.0,
        px0: left,
        px1: width - right,
    };
    let yaxis = Axis {
        lo: ylo,
        hi: yhi,
        log: false,
        px0: height - bottom,
        px1: top,
    };

    let (xlabel, ylabel) = match kind {
        PlotKind::ObjectiveVsTime => ("computation time (s)", "best objective"),
        PlotKind::GainVsIter => ("iteration", "gain per second"),
        PlotKind::OverheadVsIter => ("iteration", "overhead (s)"),
    };
    let mut svg = String::new();
    let w = &mut svg;
    // Writing to a String cannot fail.
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{}" y="28" text-anchor="middle" font-size="15">{}: {} (t_e = {} s)</text>"#,
        (left + width - right) / 2.0,
        function,
        kind,
        opts.te
    );
    let _ = writeln!(
        w,
        r#"<g class="axes" stroke="black" fill="none"><line x1="{left}" y1="{0}" x2="{1}" y2="{0}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{0}"/></g>"#,
        height - bottom,
        width - right
    );
    let _ = writeln!(w, r#"<g class="ticks">"#);
    for t in xaxis.ticks() {
        let px = xaxis.map(t);
        let _ = writeln!(
            w,
            r#"<line x1="{px:.2}" y1="{0}" x2="{px:.2}" y2="{1}" stroke="black"/><text x="{px:.2}" y="{2}" text-anchor="middle">{3}</text>"#,
            height - bottom,
            height - bottom + 5.0,
            height - bottom + 20.0,
            tick_label(t)
        );
    }
    for t in yaxis.ticks() {
        let py = yaxis.map(t);
        let _ = writeln!(
            w,
            r#"<line x1="{0}" y1="{py:.2}" x2="{left}" y2="{py:.2}" stroke="black"/><text x="{1}" y="{2:.2}" text-anchor="end">{3}</text>"#,
            left - 5.0,
            left - 8.0,
            py + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(
        w,
        r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}{}</text>"#,
        (left + width - right) / 2.0,
        height - 15.0,
        if xaxis.log { " [log]" } else { "" }
    );
    let _ = writeln!(
        w,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{ylabel}</text>"#,
        (top + height - bottom) / 2.0
    );

    for s in &series {
        let c = color(s.algorithm);
        let upper =
            s.x.iter()
                .zip(s.mean.iter().zip(&s.sd))
                .map(|(x, (m, d))| (x, m + 2.0 * d));
        let lower =
            s.x.iter()
                .zip(s.mean.iter().zip(&s.sd))
                .map(|(x, (m, d))| (x, m - 2.0 * d))
                .rev();
        let band: Vec<String> = upper
            .chain(lower)
            .map(|(x, y)| format!("{:.2},{:.2}", xaxis.map(*x), yaxis.map(y)))
            .collect();
        let line: Vec<String> =
            s.x.iter()
                .zip(&s.mean)
                .map(|(x, y)| format!("{:.2},{:.2}", xaxis.map(*x), yaxis.map(*y)))
                .collect();
        let _ = writeln!(
            w,
            r#"<g class="series" data-algorithm="{}"><polygon class="band" points="{}" fill="{c}" fill-opacity="0.18" stroke="none"/><polyline class="mean" points="{}" fill="none" stroke="{c}" stroke-width="1.6"/></g>"#,
            s.algorithm,
            band.join(" "),
            line.join(" ")
        );
    }
    if let Some(mx) = marker_x {
        let px = xaxis.map(mx);
        let _ = writeln!(
            w,
            r##"<line class="switch-marker" x1="{px:.2}" y1="{top}" x2="{px:.2}" y2="{}" stroke="#8e44ad" stroke-dasharray="6,4"/>"##,
            height - bottom
        );
    }
    let _ = writeln!(w, r#"<g class="legend">"#);
    for (k, s) in series.iter().enumerate() {
        let y = top + 10.0 + 22.0 * k as f64;
        let lx = width - right + 20.0;
        let _ = writeln!(
            w,
            r#"<g class="legend-entry"><line x1="{lx}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="3"/><text x="{}" y="{}">{} (n={})</text></g>"#,
            lx + 24.0,
            color(s.algorithm),
            lx + 30.0,
            y + 4.0,
            xml_escape(&s.algorithm.name().to_uppercase()),
            s.runs
        );
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, "</svg>");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efficiency::GainEntry;
    use crate::space::Solution;

    fn series(eff: &[f64]) -> GainSeries {
        GainSeries {
            window: 10,
            entries: eff
                .iter()
                .enumerate()
                .map(|(j, &e)| GainEntry {
                    iter: 11 + j,
                    gain: e,
                    cost: 1.0,
                    efficiency: e,
                })
                .collect(),
        }
    }

    #[test]
    fn constructed_crossover() {
        let bo = series(&[5.0, 4.0, 1.0, 0.5, 0.2]);
        let ea = series(&[2.0; 5]);
        assert_eq!(detect_switch_point(&bo, &ea, 2).unwrap(), Some(13));
    }

    #[test]
    fn no_crossover_and_persistence() {
        let bo = series(&[5.0, 4.0, 3.0]);
        let ea = series(&[1.0, 1.0, 1.0]);
        assert_eq!(detect_switch_point(&bo, &ea, 1).unwrap(), None);
        let bo = series(&[1.0, 5.0, 1.0, 1.0, 1.0]);
        let ea = series(&[2.0, 2.0, 2.0, 2.0, 0.0]);
        assert_eq!(detect_switch_point(&bo, &ea, 2).unwrap(), Some(13));
        assert_eq!(detect_switch_point(&bo, &ea, 3).unwrap(), None);
        assert_eq!(detect_switch_point(&bo, &ea, 9).unwrap(), None);
    }

    #[test]
    fn mismatched_series_are_rejected() {
        let bo = series(&[1.0, 2.0]);
        assert!(detect_switch_point(&bo, &series(&[1.0]), 1).is_err());
        let mut other = series(&[1.0, 2.0]);
        other.window = 5;
        assert!(detect_switch_point(&bo, &other, 1).is_err());
        assert!(detect_switch_point(&bo, &bo, 0).is_err());
    }

    #[test]
    fn parsing() {
        assert_eq!("BEA".parse::<Algorithm>().unwrap(), Algorithm::Bea);
        assert!("cmaes".parse::<Algorithm>().is_err());
        assert_eq!("gain_vs_iter".parse::<PlotKind>().unwrap(), PlotKind::GainVsIter);
        assert_eq!(
            "loess:0.5".parse::<Smoothing>().unwrap(),
            Smoothing::Loess { span: 0.5 }
        );
        assert_eq!("none".parse::<Smoothing>().unwrap(), Smoothing::None);
        assert!("loess:-1".parse::<Smoothing>().is_err());
    }

    #[test]
    fn spec_validation() {
        let ok = ExperimentSpec {
            iters: 300,
            ..Default::default()
        };
        assert_eq!(ok.validate().unwrap().len(), 3);
        let bad = [
            ExperimentSpec {
                functions: vec!["sphere".into()],
                ..ok.clone()
            },
            ExperimentSpec { reps: 0, ..ok.clone() },
            ExperimentSpec {
                eval_times: vec![-1.0],
                ..ok.clone()
            },
            ExperimentSpec {
                iters: 250,
                ..ok.clone()
            },
            ExperimentSpec {
                theta: Some(0.0),
                ..ok.clone()
            },
        ];
        for spec in bad {
            assert!(
                matches!(run_experiment(&spec), Err(Error::InvalidArgument(_))),
                "{spec:?}"
            );
        }
    }

    #[test]
    fn grid_and_step_lookup() {
        let g = time_grid(1.0, 100.0, 3);
        assert!((g[1] - 10.0).abs() < 1e-9);
        assert_eq!(g[2], 100.0);
        assert_eq!(time_grid(0.0, 4.0, 5), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        let ts = [1.0, 2.0, 3.0];
        let best = [5.0, 6.0, 9.0];
        assert_eq!(best_at_time(&ts, &best, 0.5), None);
        assert_eq!(best_at_time(&ts, &best, 2.0), Some(6.0));
        assert_eq!(best_at_time(&ts, &best, 2.9), Some(6.0));
        assert_eq!(best_at_time(&ts, &best, 30.0), Some(9.0));
    }

    #[test]
    fn plots_reject_mixed_functions() {
        let mut t = Trace::new("bo", 0);
        t.push(Solution(vec![0.0]), 1.0, 0.0, Stage::Bo);
        let a = RunResult {
            function: Benchmark::Griewank,
            algorithm: Algorithm::Bo,
            seed: 0,
            trace: t.clone(),
        };
        let b = RunResult {
            function: Benchmark::Schwefel,
            ..a.clone()
        };
        assert!(render_plot(&[a.clone(), b], PlotKind::OverheadVsIter, &PlotOptions::default()).is_err());
        assert!(render_plot(&[], PlotKind::OverheadVsIter, &PlotOptions::default()).is_err());
        assert!(render_plot(&[a], PlotKind::ObjectiveVsTime, &PlotOptions::default())
            .unwrap()
            .starts_with("<svg"));
    }
}
