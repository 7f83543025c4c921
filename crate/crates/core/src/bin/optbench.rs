use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use optbench_core::bea::TransferStrategy;
use optbench_core::harness::{
    export_csv, final_bests, load_experiment, render_plot, run_experiment, significance, switch_point, Algorithm,
    ExperimentSpec, PlotKind, PlotOptions, RunResult, Smoothing,
};
use optbench_core::Error;

#[derive(Parser)]
#[command(name = "optbench", version, about = "Compare BO, EA and BEA on benchmark functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run an experiment and write traces, summary and settings to a directory.
    Run(RunArgs),
    /// Plot results of a finished experiment.
    Analyze(AnalyzeArgs),
    /// Report BO/EA switch points of a finished experiment.
    Switchpoint(SwitchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Benchmark functions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "griewank,rastrigin,schwefel")]
    function: Vec<String>,
    /// Algorithms, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "bo,ea,bea")]
    algo: Vec<Algorithm>,
    #[arg(long, default_value_t = 600)]
    iters: usize,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Simulated evaluation times in seconds.
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10")]
    te: Vec<f64>,
    /// Seed of the first repetition.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    dims: usize,
    /// GP-UCB confidence parameter.
    #[arg(long)]
    gamma: Option<f64>,
    /// Length scale for all functions (default: 0.5 for Schwefel, else 0.1).
    #[arg(long)]
    theta: Option<f64>,
    /// EA population size.
    #[arg(long)]
    pop: Option<usize>,
    /// BEA switch point.
    #[arg(long = "switch")]
    switch_point: Option<usize>,
    /// Transfer strategy: s1, s2, s3 or s4.
    #[arg(long)]
    strategy: Option<TransferStrategy>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Share of the BO archive clustered by s4, in percent.
    #[arg(long)]
    top_percent: Option<f64>,
    /// Gain-curve smoothing for switch detection: none, loess or loess:<span>.
    #[arg(long)]
    smoothing: Option<Smoothing>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Record zero overhead so that repeated runs write identical files.
    #[arg(long)]
    no_overhead: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "objective_vs_time")]
    plot: PlotKind,
    /// Evaluation time for the plot (default: every time in the experiment).
    #[arg(long)]
    te: Option<f64>,
    /// Linear instead of logarithmic time axis.
    #[arg(long)]
    linear: bool,
    /// Output directory for SVG files (default: the input directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SwitchArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    persistence: Option<usize>,
    #[arg(long)]
    smoothing: Option<Smoothing>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Switchpoint(args) => cmd_switchpoint(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::OutOfBounds { .. } => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, Error> {
    let mut spec = ExperimentSpec {
        functions: args.function,
        algorithms: args.algo,
        eval_times: args.te,
        iters: args.iters,
        reps: args.reps,
        base_seed: args.seed,
        dims: args.dims,
        theta: args.theta,
        workers: args.workers,
        record_overhead: !args.no_overhead,
        ..ExperimentSpec::default()
    };
    if let Some(g) = args.gamma {
        spec.bo.gamma = g;
    }
    if let Some(p) = args.pop {
        spec.ea.pop_size = p;
        spec.bea.ea.pop_size = p;
    }
    if let Some(s) = args.switch_point {
        spec.bea.switch_point = s;
    }
    if let Some(s) = args.strategy {
        spec.bea.strategy = s;
    }
    if let Some(pct) = args.top_percent {
        match spec.bea.strategy {
            TransferStrategy::S4 { .. } => spec.bea.strategy = TransferStrategy::S4 { top_percent: pct },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "--top-percent applies to strategy s4, not {other}"
                )))
            }
        }
    }
    if let Some(a) = args.alpha {
        spec.bea.alpha = a;
    }
    if let Some(b) = args.beta {
        spec.bea.beta = b;
    }
    if let Some(s) = args.smoothing {
        spec.smoothing = s;
    }
    let outcome = run_experiment(&spec)?;
    let files = export_csv(&outcome, &spec, &args.out)?;
    print_finals(&outcome.results);
    println!("wrote {} traces and {}", files.traces.len(), files.summary.display());
    if outcome.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &outcome.failures {
            eprintln!(
                "run failed: {} {} seed {}: {}",
                f.function, f.algorithm, f.seed, f.message
            );
        }
        Ok(ExitCode::from(1))
    }
}

fn groups(results: &[RunResult]) -> Vec<(optbench_core::bench::Benchmark, Vec<Algorithm>)> {
    let mut out: Vec<(optbench_core::bench::Benchmark, Vec<Algorithm>)> = Vec::new();
    for r in results {
        match out.iter_mut().find(|(f, _)| *f == r.function) {
            Some((_, algos)) if !algos.contains(&r.algorithm) => algos.push(r.algorithm),
            Some(_) => {}
            None => out.push((r.function, vec![r.algorithm])),
        }
    }
    out
}

fn print_finals(results: &[RunResult]) {
    for (function, algos) in groups(results) {
        for &a in &algos {
            let v = final_bests(results, function, a);
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let sd = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            println!("{function:<10} {a:<4} n={:<3} final best {mean:.4} +- {sd:.4}", v.len());
        }
        if algos.contains(&Algorithm::Bea) {
            let bea = final_bests(results, function, Algorithm::Bea);
            for other in [Algorithm::Bo, Algorithm::Ea] {
                if algos.contains(&other) {
                    if let Ok(t) = significance(&bea, &final_bests(results, function, other)) {
                        println!("{function:<10} bea > {other}: p = {:.4}", t.p_value);
                    }
                }
            }
        }
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<ExitCode, Error> {
    let (spec, results) = load_experiment(&args.input)?;
    if results.is_empty() {
        return Err(Error::InvalidArgument(format!("no traces in {}", args.input.display())));
    }
    let out_dir = args.out.unwrap_or_else(|| args.input.clone());
    std::fs::create_dir_all(&out_dir).map_err(|source| Error::Io {
        path: out_dir.clone(),
        source,
    })?;
    let times = match args.te {
        Some(te) => vec![te],
        None => spec.eval_times.clone(),
    };
    print_finals(&results);
    for (function, algos) in groups(&results) {
        let runs: Vec<RunResult> = results.iter().filter(|r| r.function == function).cloned().collect();
        for &te in &times {
            let marker = if algos.contains(&Algorithm::Bea) {
                Some(spec.bea.switch_point)
            } else if algos.contains(&Algorithm::Bo) && algos.contains(&Algorithm::Ea) {
                switch_point(&runs, function, te, spec.window, spec.persistence, spec.smoothing)?
            } else {
                None
            };
            let opts = PlotOptions {
                te,
                window: spec.window,
                log_x: !args.linear,
                switch_point: marker,
            };
            let svg = render_plot(&runs, args.plot, &opts)?;
            let path = out_dir.join(format!("plot__{}__{function}__te{te}.svg", args.plot));
            write_file(&path, &svg)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn cmd_switchpoint(args: SwitchArgs) -> Result<ExitCode, Error> {
    let (spec, results) = load_experiment(&args.input)?;
    let window = args.window.unwrap_or(spec.window);
    let persistence = args.persistence.unwrap_or(spec.persistence);
    let smoothing = args.smoothing.unwrap_or(spec.smoothing);
    let mut found = false;
    for (function, algos) in groups(&results) {
        if !(algos.contains(&Algorithm::Bo) && algos.contains(&Algorithm::Ea)) {
            continue;
        }
        found = true;
        for &te in &spec.eval_times {
            // Efficiency is undefined when records take no time, e.g. t_e = 0
            // with overhead recording off; report that instead of stopping.
            let shown = match switch_point(&results, function, te, window, persistence, smoothing) {
                Ok(Some(s)) => s.to_string(),
                Ok(None) => "none".into(),
                Err(e) => format!("undefined ({e})"),
            };
            println!("{function:<10} te={te:<6} switch_point={shown}");
        }
    }
    if !found {
        return Err(Error::InvalidArgument(
            "switch points need BO and EA runs of the same function".into(),
        ));
    }
    Ok(ExitCode::SUCCESS)
}
