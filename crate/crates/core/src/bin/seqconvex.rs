use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use seqconvex::harness::{
    bundled_instances, compare_methods, run_experiment, ExperimentConfig, ProblemDescriptor,
};
use seqconvex::kkt::{kkt_residual, DEFAULT_TOL_ACTIVE};
use seqconvex::problem::spec::OracleRegistry;
use seqconvex::{Method, ScpError};

/// Sequential convex programming solvers for structured nonconvex programs.
///
/// The log level is read from SEQCONVEX_LOG (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "seqconvex", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the method named in the config.
        #[arg(long)]
        method: Option<Method>,
        /// Overrides the output directory named in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the KKT residual of a point.
    Certify {
        #[arg(long)]
        problem: PathBuf,
        /// JSON `{"x": [...], "multipliers": [...]}`; multipliers default to 0.
        #[arg(long)]
        point: PathBuf,
    },
    /// Run several configs on one problem and print a table.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
    },
    /// List the bundled instances.
    ListInstances,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PointDoc {
    x: Vec<f64>,
    #[serde(default)]
    multipliers: Option<Vec<f64>>,
    #[serde(default)]
    tol_active: Option<f64>,
}

fn read(path: &PathBuf) -> Result<String, ScpError> {
    std::fs::read_to_string(path)
        .map_err(|e| ScpError::Input(format!("cannot read {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), ScpError> {
    match cli.command {
        Command::Solve { config, method, out } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(m) = method {
                cfg.method = m;
            }
            if let Some(dir) = out {
                cfg.output.dir = Some(std::env::current_dir()?.join(dir));
            }
            let report = run_experiment(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report.summary)?);
            for f in &report.files {
                log::info!("wrote {}", f.display());
            }
        }
        Command::Certify { problem, point } => {
            let desc = ProblemDescriptor::from_json(&read(&problem)?)?;
            let prob = desc.build(&OracleRegistry::new())?;
            let doc: PointDoc = serde_json::from_str(&read(&point)?)?;
            let lam = doc.multipliers.unwrap_or_else(|| vec![0.0; prob.m()]);
            let res = kkt_residual(&prob, &doc.x, &lam, doc.tol_active.unwrap_or(DEFAULT_TOL_ACTIVE))?;
            println!("{}", serde_json::to_string_pretty(&res)?);
        }
        Command::Compare { configs } => {
            let cfgs = configs
                .iter()
                .map(|p| ExperimentConfig::from_file(p))
                .collect::<Result<Vec<_>, _>>()?;
            print!("{}", compare_methods(&cfgs)?.to_table());
        }
        Command::ListInstances => {
            for e in bundled_instances() {
                println!("{:<16} {}", e.name, e.description);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SEQCONVEX_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
