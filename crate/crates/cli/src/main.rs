use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gnet::harness::{self, ExperimentConfig};

/// Sparse kernel network synthesis and convergence experiments.
///
/// Every subcommand reads a JSON experiment config. Set GNET_THREADS to cap the
/// number of worker threads; results do not depend on it.
#[derive(Parser)]
#[command(name = "gnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's master_seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build one network at resolution n and write it as JSON.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Network file; defaults to the config's output_path, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the synthesis report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sweep n and fit the error decay rate against N.
    RateStudy {
        #[command(flatten)]
        common: Common,
        /// Report directory; defaults to the config's output_path, else `report/`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare errors on a manifold and in a tube around it.
    OosStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate kernel-generated test functions with the synthesized neurons.
    QuadStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the partition at resolution n and print its diagnostics as JSON.
    CheckPartition {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config).with_context(|| format!("reading {}", common.config.display()))?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    Ok(cfg)
}

fn report_dir(out: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    out.or_else(|| cfg.output_path.clone()).unwrap_or_else(|| PathBuf::from("report"))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("GNET_THREADS") {
        let n: usize = v.parse().with_context(|| format!("GNET_THREADS={v} is not a thread count"))?;
        if n == 0 {
            bail!("GNET_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { common, out, report } => {
            let cfg = load(&common)?;
            let (net, rep) = harness::run_synth(&cfg)?;
            let out = out.or_else(|| cfg.output_path.clone());
            emit(&net.to_json()?, out.as_deref())?;
            if let Some(path) = report {
                fs::write(&path, serde_json::to_string_pretty(&rep)?)?;
            }
            eprintln!("N = {}, sup error = {:e}, l2 error = {:e}, {} ms", rep.n_terms, rep.sup_error, rep.l2_error, rep.wall_ms);
        }
        Command::RateStudy { common, out } => {
            let cfg = load(&common)?;
            let report = harness::run_rate_study(&cfg)?;
            let dir = report_dir(out, &cfg);
            harness::write_rate_report(&report, &dir)?;
            println!("{:>8} {:>6} {:>12} {:>12} {:>12}", "n", "N", "sup", "l2", "mc");
            for r in &report.rows {
                println!("{:>8} {:>6} {:>12.4e} {:>12.4e} {:>12.4e}", r.n, r.n_terms, r.sup_error, r.l2_error, r.mc_error);
            }
            for f in &report.failures {
                println!("n = {}: {}", f.n, f.error);
            }
            match report.fit {
                Some(fit) => println!("slope {:.3} (predicted -{:.3}), r2 {:.3}", fit.slope, report.predicted_exponent, fit.r2),
                None => println!("no slope fit ({:?})", report.fit_status),
            }
            if let Some(fit) = report.mc_fit {
                println!("Monte Carlo slope {:.3}", fit.slope);
            }
            println!("wrote {}", dir.display());
        }
        Command::OosStudy { common, out } => {
            let cfg = load(&common)?;
            let report = harness::run_oos_study(&cfg)?;
            let dir = report_dir(out, &cfg);
            harness::write_oos_report(&report, &dir)?;
            for r in &report.rows {
                println!("n {} N {} manifold {:.4e} tube {:.4e} ratio {:.3}", r.n, r.n_terms, r.manifold_error, r.tube_error, r.ratio);
            }
            println!("wrote {}", dir.display());
        }
        Command::QuadStudy { common, out } => {
            let cfg = load(&common)?;
            let report = harness::run_quad_study(&cfg)?;
            let dir = report_dir(out, &cfg);
            harness::write_quad_report(&report, &dir)?;
            for r in &report.rows {
                println!("n {} N {} sup {:.4e} mean integration error {:.4e}", r.n, r.n_terms, r.sup_error, r.mean_error);
            }
            if let (Some(a), Some(b)) = (report.fit, report.sup_fit) {
                println!("integration slope {:.3}, sup slope {:.3}", a.slope, b.slope);
            }
            println!("wrote {}", dir.display());
        }
        Command::CheckPartition { common, out } => {
            let cfg = load(&common)?;
            let diag = harness::check_partition(&cfg)?;
            emit(&serde_json::to_string_pretty(&diag)?, out.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    init_threads()?;
    run(cli)
}
