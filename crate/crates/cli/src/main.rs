//! Command-line experiment runner.
//!
//! Exit status: 0 on success (or pass), 2 on validation errors, 3 when the
//! config's acceptance thresholds are violated, 4 on resource-budget aborts,
//! 1 on any other failure.

use clap::{Parser, Subcommand};
use stablewalk::config::{ExperimentConfig, EXPERIMENT_KINDS, MEASURE_KINDS};
use stablewalk::runner::{run, RunStatus};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "stablewalk", version, about = "Stable-like random walks on groups of polynomial growth")]
struct Cli {
    /// Worker thread count (also via STABLEWALK_THREADS; 0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment config and write its artifacts
    Run {
        config: PathBuf,
        /// Output directory (default: alongside the config)
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Override the config's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override budget.mem_elements
        #[arg(long)]
        budget_mem: Option<u64>,
    },
    /// Check a config and print diagnostics
    Validate { config: PathBuf },
    /// List the built-in group families
    ListGroups,
    /// List the measure families
    ListMeasures,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = if cli.threads > 0 {
        cli.threads
    } else {
        std::env::var("STABLEWALK_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0)
    };
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    match cli.command {
        Command::Run {
            config,
            out_dir,
            seed,
            budget_mem,
        } => cmd_run(config, out_dir, seed, budget_mem),
        Command::Validate { config } => cmd_validate(config),
        Command::ListGroups => {
            println!("Z^d            free abelian groups, e.g. Z^1, Z^2, Z^3 (generators e1..ed)");
            println!("heisenberg3    discrete Heisenberg group (generators a, b; center c)");
            println!("unipotent4     4x4 upper unitriangular integer matrices (M12..M34)");
            println!("dihedralxZ     infinite dihedral times Z (generators u, v, z; t = uv)");
            println!("free_nilpotent(m,c)  free nilpotent of rank m and class c <= 3 (x1..xm)");
            ExitCode::SUCCESS
        }
        Command::ListMeasures => {
            println!("mu_alpha        mass ~ (1+|g|)^-(d+alpha) on B(R), renormalized");
            println!("coordinatewise  nu_psi,S: psi on Z^k pushed through pi_S, symmetrized");
            println!("axis            mu_S,alpha: mass ~ (1+|a|)^-(1+alpha) on the cyclic axes");
            println!("convex          convex combination of measures");
            println!("table           explicit (coordinates, weight) entries, normalized");
            println!();
            println!("kinds: {}", EXPERIMENT_KINDS.join(", "));
            println!("measures: {}", MEASURE_KINDS.join(", "));
            ExitCode::SUCCESS
        }
    }
}

fn cmd_run(
    config: PathBuf,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    budget_mem: Option<u64>,
) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(1);
        }
    };
    let mut cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = seed {
        cfg.experiment.seed = Some(s);
    }
    if let Some(m) = budget_mem {
        cfg.budget.mem_elements = m;
    }
    let diags = cfg.validate();
    if !diags.is_empty() {
        for d in &diags {
            eprintln!("invalid: {d}");
        }
        return ExitCode::from(2);
    }
    let dir = out_dir.unwrap_or_else(|| {
        config
            .parent()
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|| PathBuf::from("."))
    });
    match run(&cfg, &text, &dir) {
        Ok(outcome) => {
            println!("manifest: {}", outcome.manifest_path.display());
            match outcome.status {
                RunStatus::Pass => {
                    println!("status: pass");
                    ExitCode::SUCCESS
                }
                RunStatus::Unasserted => {
                    println!("status: done (no assertions)");
                    ExitCode::SUCCESS
                }
                RunStatus::Fail => {
                    for f in &outcome.failures {
                        eprintln!("assert failed: {f}");
                    }
                    println!("status: fail");
                    ExitCode::from(3)
                }
            }
        }
        Err(stablewalk::Error::Budget { what, used, limit }) => {
            eprintln!("budget exceeded: {what} ({used} > {limit})");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_validate(config: PathBuf) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(1);
        }
    };
    match ExperimentConfig::parse(&text) {
        Ok(cfg) => {
            let diags = cfg.validate();
            if diags.is_empty() {
                println!("ok");
                ExitCode::SUCCESS
            } else {
                for d in &diags {
                    println!("invalid: {d}");
                }
                ExitCode::from(2)
            }
        }
        Err(e) => {
            println!("invalid: {e}");
            ExitCode::from(2)
        }
    }
}
