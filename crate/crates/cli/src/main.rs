mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

/// Deception prevalence estimation pipeline.
///
/// Settings come from built-in defaults, overridden by the `--config` JSON
/// file, overridden in turn by flags. Exit status: 0 success, 1 invalid input
/// or contract violation, 2 I/O failure.
#[derive(Debug, Parser)]
#[command(name = "prevalence", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// RunConfig JSON file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate, filter and optionally subsample a JSONL corpus.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        min_chars: Option<usize>,
        /// Keep only this star rating; 0 keeps all ratings.
        #[arg(long)]
        rating: Option<u8>,
        #[arg(long)]
        sample: Option<usize>,
    },
    /// Select C by cross-validation and fit the classifier.
    Train {
        #[arg(long)]
        train: Option<PathBuf>,
    },
    /// Estimate sensitivity and specificity and the derived priors.
    Calibrate {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Naive and Bayesian prevalence of a test corpus.
    Estimate {
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// Write synthetic train/dev/test corpora.
    Simulate {
        /// Also write two synthetic community corpora for `study`.
        #[arg(long)]
        communities: bool,
    },
    /// Prevalence-over-time series, plots and the hypothesis report.
    Study {
        #[arg(long = "community")]
        communities: Vec<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// Reviewer thresholds, e.g. `--k 1 --k 2 --k 3`.
        #[arg(long = "k")]
        reviewer_k: Vec<usize>,
    },
    /// Markdown summary of `estimate` and `study` output directories.
    Report {
        #[arg(long = "from", required = true)]
        from: Vec<PathBuf>,
    },
}

fn resolve(cli: &Cli) -> prevalence_core::Result<RunConfig> {
    let mut cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.common.out {
        cfg.out = o.clone();
    }
    fn set<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
        if v.is_some() {
            slot.clone_from(v);
        }
    }
    match &cli.command {
        Command::Ingest {
            input,
            min_chars,
            rating,
            sample,
        } => {
            set(&mut cfg.input, input);
            if let Some(m) = min_chars {
                cfg.ingest.min_chars = *m;
            }
            if let Some(r) = rating {
                cfg.ingest.rating = (*r != 0).then_some(*r);
            }
            set(&mut cfg.ingest.sample, sample);
        }
        Command::Train { train } => set(&mut cfg.train, train),
        Command::Calibrate { train, dev, model } => {
            set(&mut cfg.train, train);
            set(&mut cfg.dev, dev);
            set(&mut cfg.model, model);
        }
        Command::Estimate {
            test,
            model,
            calibration,
        } => {
            set(&mut cfg.test, test);
            set(&mut cfg.model, model);
            set(&mut cfg.calibration, calibration);
        }
        Command::Simulate { communities } => cfg.simulate.communities |= communities,
        Command::Study {
            communities,
            model,
            calibration,
            profiles,
            reviewer_k,
        } => {
            if !communities.is_empty() {
                cfg.communities.clone_from(communities);
            }
            set(&mut cfg.model, model);
            set(&mut cfg.calibration, calibration);
            set(&mut cfg.profiles, profiles);
            if !reviewer_k.is_empty() {
                cfg.reviewer_k.clone_from(reviewer_k);
            }
        }
        Command::Report { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> prevalence_core::Result<()> {
    let cfg = resolve(cli)?;
    commands::prepare_out(&cfg)?;
    match &cli.command {
        Command::Ingest { .. } => commands::ingest(&cfg),
        Command::Train { .. } => commands::train(&cfg),
        Command::Calibrate { .. } => commands::calibrate(&cfg),
        Command::Estimate { .. } => commands::estimate(&cfg),
        Command::Simulate { .. } => commands::simulate(&cfg),
        Command::Study { .. } => commands::study(&cfg),
        Command::Report { from } => commands::report(&cfg, from),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
