use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use bnlab::calibration::{estimate_c_cal, frozen_c_cal};
use bnlab::isometry::{run_isometry_decay, GAP_FLOOR};
use bnlab::output::all_passed;
use bnlab::run_experiment;
use bnlab::spec::{ExperimentKind, ExperimentSpec};
use bnlab_core::par::{configure_threads, Exec};

#[derive(Parser)]
#[command(name = "bnlab", version, about = "Orthogonality and gradient experiments for batch-normalised networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Isometry gap of representations against depth.
    Isometry {
        #[command(flatten)]
        common: Common,
        /// Print the least-squares decay constant instead of checking.
        #[arg(long)]
        calibrate: bool,
    },
    /// First-layer gradient norm against depth for orthogonal and Gaussian weights.
    Gradients(Common),
    /// Gradient sweep on a full-rank batch against one with a duplicated sample.
    Degenerate(Common),
    /// Haar moment and isometry-lift checks.
    Weingarten(Common),
    /// Explosion-rate fit and shaped gain schedule.
    Shaping(Common),
    /// Rank of random minibatches of a dataset.
    RankAudit(Common),
    /// Minibatch SGD with orthogonality tracking.
    Train(Common),
}

#[derive(Args)]
struct Common {
    /// `key = value` file overriding the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed of every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    threads: Option<usize>,
    /// Width 100 and depths up to 1000 instead of the quick defaults.
    #[arg(long)]
    full_scale: bool,
}

impl Common {
    fn spec(&self, kind: ExperimentKind) -> Result<ExperimentSpec> {
        let mut spec = ExperimentSpec::defaults(kind);
        if self.full_scale {
            spec = spec.full_scale();
        }
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            spec.apply_kv(&text).with_context(|| format!("in {}", path.display()))?;
        }
        if let Some(out) = &self.out {
            spec.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            spec.network.seed = seed;
        }
        Ok(spec)
    }

    fn exec(&self) -> Exec {
        match self.threads {
            Some(1) => Exec::Sequential,
            Some(n) => {
                if !configure_threads(n) {
                    eprintln!("warning: thread pool already configured or unavailable; --threads {n} ignored");
                }
                Exec::Parallel
            }
            None => Exec::Parallel,
        }
    }
}

fn calibrate(spec: &ExperimentSpec, exec: Exec) -> Result<()> {
    let r = run_isometry_decay(spec, exec)?;
    println!("frozen c_cal = {:e}", frozen_c_cal());
    for w in &r.widths {
        match estimate_c_cal(&w.mean.means(), w.width, GAP_FLOOR) {
            Some(c) => println!("d = {}: c_cal = {c:e}", w.width),
            None => println!("d = {}: no decay to fit", w.width),
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let (kind, common) = match &cli.command {
        Command::Isometry { common, calibrate: true } => {
            calibrate(&common.spec(ExperimentKind::Isometry)?, common.exec())?;
            return Ok(true);
        }
        Command::Isometry { common, .. } => (ExperimentKind::Isometry, common),
        Command::Gradients(c) => (ExperimentKind::Gradients, c),
        Command::Degenerate(c) => (ExperimentKind::Degenerate, c),
        Command::Weingarten(c) => (ExperimentKind::Weingarten, c),
        Command::Shaping(c) => (ExperimentKind::Shaping, c),
        Command::RankAudit(c) => (ExperimentKind::RankAudit, c),
        Command::Train(c) => (ExperimentKind::Train, c),
    };
    let spec = common.spec(kind)?;
    let checks = run_experiment(&spec, common.exec())?;
    for c in &checks {
        println!("{c}");
    }
    println!("outputs in {}", spec.out_dir.display());
    Ok(all_passed(&checks))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
