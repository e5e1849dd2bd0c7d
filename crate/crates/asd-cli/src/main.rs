//! Command-line front end for asynchronous semi-anonymous dynamics: graph
//! generation, simulation, mean-field analysis, bound evaluation, and
//! trajectory comparison.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error,
//! 4 failed `compare --assert`.

mod commands;
mod compare;
mod config;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use std::path::PathBuf;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    Assert(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Assert(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) | CliError::Assert(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = "asd", about = "Asynchronous semi-anonymous dynamics on labeled random graphs")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: ASD_THREADS env var, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a graph; write the edge list, label map, and statistics JSON.
    Generate,
    /// Run the event-driven simulation; write trajectory/ensemble CSVs.
    Simulate,
    /// Integrate the mean-field ODE system; write fraction CSVs.
    Ode,
    /// Find and classify mean-field stationary points.
    Stationary,
    /// Map initial conditions to the stationary points they approach.
    Basins,
    /// Evaluate the neighborhood-approximation and concentration bounds.
    Bounds,
    /// Run the coupled graph-vs-tree exploration over a size sweep.
    Couple,
    /// Compare two trajectory CSVs: sup and per-time gaps.
    Compare {
        first: PathBuf,
        second: PathBuf,
        /// Exit with code 4 if the sup gap exceeds this value.
        #[arg(long)]
        assert: Option<f64>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required for this subcommand".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn init_threads(cli: &Cli) -> Result<(), CliError> {
    let threads = match cli.threads {
        Some(n) => Some(n),
        None => match std::env::var("ASD_THREADS") {
            Ok(v) => Some(v.parse().map_err(|e| {
                CliError::Config(format!("ASD_THREADS must be an integer: {e}"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    init_threads(cli)?;
    match &cli.command {
        Command::Compare {
            first,
            second,
            assert,
        } => {
            let report = compare::compare(first, second)?;
            for ((class, state), gap) in &report.sup_gaps {
                println!("sup gap class={class} state={state}: {gap:.6}");
            }
            println!("sup gap overall: {:.6}", report.sup_gap);
            if let Some(out) = &cli.out {
                std::fs::create_dir_all(out)
                    .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
                std::fs::write(out.join("gaps.csv"), &report.gaps_csv)
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
            }
            if let Some(tol) = assert {
                if report.sup_gap > *tol {
                    return Err(CliError::Assert(format!(
                        "sup gap {:.6} exceeds {tol}",
                        report.sup_gap
                    )));
                }
            }
            Ok(())
        }
        command => {
            let cfg = load_config(cli)?;
            let name = match command {
                Command::Generate => "generate",
                Command::Simulate => "simulate",
                Command::Ode => "ode",
                Command::Stationary => "stationary",
                Command::Basins => "basins",
                Command::Bounds => "bounds",
                Command::Couple => "couple",
                Command::Compare { .. } => unreachable!(),
            };
            commands::write_manifest(&cfg, name)?;
            match command {
                Command::Generate => commands::generate(&cfg),
                Command::Simulate => commands::simulate(&cfg),
                Command::Ode => commands::ode(&cfg),
                Command::Stationary => commands::stationary(&cfg),
                Command::Basins => commands::basins(&cfg),
                Command::Bounds => commands::bounds(&cfg),
                Command::Couple => commands::couple(&cfg),
                Command::Compare { .. } => unreachable!(),
            }
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
