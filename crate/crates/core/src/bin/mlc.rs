//! `mlc`: generate, corrupt, learn, evaluate, and run experiments.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid arguments or config,
//! 3 infeasible config, 4 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mlc_core::adversary::{corrupt, AttackConfig};
use mlc_core::data_gen::{make_ground_truth_with, sample_clean_with};
use mlc_core::harness::{self, ExperimentConfig, TrialSeeds};
use mlc_core::io::{read_labeled_set, read_model, with_suffix, write_labeled_set, write_model};
use mlc_core::learner::learn;
use mlc_core::{Error, Result};

#[derive(Parser)]
#[command(name = "mlc", version, about = "Robust multiclass linear classification under nasty noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trial whose seeds are used.
    #[arg(long, default_value_t = 0)]
    trial: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Write a clean labeled sample.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the configured attack to a labeled sample.
    Corrupt {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the replaced positions, one 0/1 per line.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Learn a model from a labeled sample; the report goes to `<out>.report`.
    Learn {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate a model's error against the configured ground truth.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured experiment and write its CSV.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the grid over sweep_eta, sweep_n, sweep_gamma, sweep_strategy.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common, required: bool) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None if required => return Err(Error::InvalidArgument("missing required flag --config <path>".into())),
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_plain(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { common, out } => {
            let cfg = load(&common, false)?;
            let seeds = TrialSeeds::new(cfg.seed, common.trial);
            let gt = make_ground_truth_with(&cfg.truth_params(seeds.ground_truth))?;
            let sample = sample_clean_with(&gt, cfg.n, seeds.clean, cfg.allocation)?;
            write_labeled_set(&out, &sample.set)?;
            log::info!("wrote {} points to {}", sample.set.len(), out.display());
        }
        Command::Corrupt {
            common,
            input,
            out,
            mask,
        } => {
            let cfg = load(&common, false)?;
            let seeds = TrialSeeds::new(cfg.seed, common.trial);
            let gt = make_ground_truth_with(&cfg.truth_params(seeds.ground_truth))?;
            let clean = read_labeled_set(&input)?;
            let attack = AttackConfig::new(cfg.eta, cfg.strategy, seeds.attack)?;
            let corrupted = corrupt(&clean, &gt, &attack)?;
            write_labeled_set(&out, &corrupted.set)?;
            if let Some(mask_path) = mask {
                let text: String = corrupted
                    .dirty_mask
                    .iter()
                    .map(|&b| if b { "1\n" } else { "0\n" })
                    .collect();
                write_plain(&mask_path, &text)?;
            }
            log::info!("replaced {} of {} points", corrupted.dirty_count(), clean.len());
        }
        Command::Learn { common, input, out } => {
            let cfg = load(&common, false)?;
            let set = read_labeled_set(&input)?;
            let (w, report) = learn(&set, &cfg.learn_config())?;
            write_model(&out, &w)?;
            write_plain(&with_suffix(&out, ".report"), &report.to_text())?;
            println!("objective = {}", report.objective);
            println!("kept = {}", report.kept.len());
            println!("fallback = {}", report.fallback);
        }
        Command::Eval { common, model, out } => {
            let cfg = load(&common, false)?;
            let seeds = TrialSeeds::new(cfg.seed, common.trial);
            let gt = make_ground_truth_with(&cfg.truth_params(seeds.ground_truth))?;
            let w = read_model(&model)?;
            let est = harness::measure_error(&w, &gt, cfg.eval_draws, seeds.evaluation)?;
            let text = format!("err_hat = {}\nci_halfwidth = {}\ndraws = {}\n", est.err, est.ci_halfwidth, est.draws);
            print!("{text}");
            if let Some(path) = out {
                write_plain(&path, &text)?;
            }
        }
        Command::Run { common, out } => {
            let mut cfg = load(&common, true)?;
            if out.is_some() {
                cfg.output = out;
            }
            let results = harness::run_experiment(&cfg)?;
            if cfg.output.is_none() {
                print!("{}", harness::format_csv(&results));
            }
        }
        Command::Sweep { common, out } => {
            let mut cfg = load(&common, true)?;
            if out.is_some() {
                cfg.output = out;
            }
            let results = harness::sweep(&cfg)?;
            if cfg.output.is_none() {
                print!("{}", harness::format_csv(&results));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
