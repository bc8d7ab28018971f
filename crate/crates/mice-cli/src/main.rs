//! Benchmark command-line harness.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for runtime
//! errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mice_core::harness::{
    aggregate_records, fit_loglog_slope, parse_experiment_config, run_experiment,
    write_aggregate_csv, HarnessError,
};
use mice_core::telemetry::read_run_csv;

#[derive(Parser)]
#[command(name = "mice", about = "Benchmark harness for multi-iteration stochastic optimizers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run { config: PathBuf },
    /// Validate a config file without running it.
    Validate { config: PathBuf },
    /// Re-aggregate the per-replicate CSVs in a directory.
    Aggregate { dir: PathBuf },
    /// Fit a log-log slope of optimality gap vs gradient evaluations.
    Slope {
        csv: PathBuf,
        /// Evaluation window as `lo:hi` on the x axis.
        #[arg(long)]
        window: Option<String>,
    },
    /// Dataset utilities.
    Datasets {
        #[command(subcommand)]
        command: DatasetCommand,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Print the expected shapes and regularization of the benchmark
    /// datasets (no network access).
    FetchInfo,
}

fn load_config(path: &PathBuf) -> Result<mice_core::harness::ExperimentConfig, HarnessError> {
    let text = fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_experiment_config(&text)?;
    // The only environment override: the RNG seed, for CI convenience.
    if let Ok(seed) = std::env::var("MICE_SEED") {
        cfg.seed = seed
            .parse()
            .map_err(|_| HarnessError::Config(format!("bad MICE_SEED '{seed}'")))?;
    }
    Ok(cfg)
}

fn cmd_run(path: PathBuf) -> Result<(), HarnessError> {
    let cfg = load_config(&path)?;
    let summary = run_experiment(&cfg)?;
    println!(
        "method {} replicates {} total-grad-evals {}",
        cfg.method.name(),
        cfg.replicates,
        summary.total_grad_evals
    );
    if let Some(gap) = summary.final_gap {
        println!("final mean opt-gap {gap:e}");
    }
    for file in &summary.replicate_files {
        println!("wrote {}", file.display());
    }
    if let Some(agg) = &summary.aggregate_file {
        println!("wrote {}", agg.display());
    }
    Ok(())
}

fn cmd_aggregate(dir: PathBuf) -> Result<(), HarnessError> {
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("rep_") && n.ends_with(".csv"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(HarnessError::Config(format!(
            "no rep_*.csv files in {}",
            dir.display()
        )));
    }
    let mut per_replicate = Vec::new();
    for f in &files {
        let reader = std::io::BufReader::new(fs::File::open(f)?);
        per_replicate.push(read_run_csv(reader)?);
    }
    let rows = aggregate_records(&per_replicate);
    let out = dir.join("aggregate.csv");
    let mut sink = fs::File::create(&out)?;
    write_aggregate_csv(&rows, &mut sink)?;
    println!("aggregated {} replicates into {}", files.len(), out.display());
    Ok(())
}

fn cmd_slope(csv: PathBuf, window: Option<String>) -> Result<(), HarnessError> {
    let (lo, hi) = match window {
        None => (0.0, f64::INFINITY),
        Some(w) => {
            let (a, b) = w
                .split_once(':')
                .ok_or_else(|| HarnessError::Config(format!("bad window '{w}', want lo:hi")))?;
            let lo = a
                .parse()
                .map_err(|_| HarnessError::Config(format!("bad window lower bound '{a}'")))?;
            let hi = b
                .parse()
                .map_err(|_| HarnessError::Config(format!("bad window upper bound '{b}'")))?;
            (lo, hi)
        }
    };
    let reader = std::io::BufReader::new(
        fs::File::open(&csv)
            .map_err(|e| HarnessError::Config(format!("cannot open {}: {e}", csv.display())))?,
    );
    let records = read_run_csv(reader)?;
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.opt_gap.map(|g| (r.grad_evals_cum as f64, g)))
        .filter(|(x, _)| *x >= lo && *x <= hi)
        .collect();
    let slope = fit_loglog_slope(&points)?;
    println!("points {} slope {slope:.6}", points.len());
    Ok(())
}

fn cmd_datasets_info() {
    println!("dataset    rows      features  lambda");
    println!("mushrooms  8124      112       1e-5");
    println!("gisette    6000      5000      1e-4");
    println!("HIGGS      11000000  28        1e-4");
    println!();
    println!("Datasets are LibSVM-format text files supplied locally via problem.dataset;");
    println!("no network access is performed.");
}

fn problem_name(cfg: &mice_core::harness::ExperimentConfig) -> &'static str {
    use mice_core::harness::ProblemSpec;
    match cfg.problem {
        ProblemSpec::Quadratic { .. } => "quadratic",
        ProblemSpec::ShiftedQuadratic { .. } => "shifted-quadratic",
        ProblemSpec::Rosenbrock { .. } => "rosenbrock",
        ProblemSpec::Logistic { .. } => "logistic",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => cmd_run(config),
        Command::Validate { config } => load_config(&config).map(|cfg| {
            println!("ok: {} on {}", cfg.method.name(), problem_name(&cfg));
        }),
        Command::Aggregate { dir } => cmd_aggregate(dir),
        Command::Slope { csv, window } => cmd_slope(csv, window),
        Command::Datasets { command } => {
            match command {
                DatasetCommand::FetchInfo => cmd_datasets_info(),
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ HarnessError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
