//! `sirabc`: simulate, fit and check stochastic SIR models with
//! contact-tracing detection.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 degenerate
//! posterior (no simulation received weight), 1 anything else.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sirabc::adjust::{AdjustMethod, NchConfig};

use config::Config;

#[derive(Parser)]
#[command(name = "sirabc", version, about)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Root seed; overrides `seed` in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, short, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Locl,
    Nch,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory at `theta`; writes events, detections and
    /// the summary vector.
    Simulate,
    /// Rejection ABC on a detections file.
    Abc {
        #[arg(long)]
        data: PathBuf,
        /// Observed summary vector (JSON), required for vector summaries.
        #[arg(long)]
        observed: Option<PathBuf>,
        /// Simulation archive to resume from and append to.
        #[arg(long)]
        archive: Option<PathBuf>,
    },
    /// Regression-adjust the draws of an ABC fit.
    Adjust {
        #[arg(long)]
        fit: PathBuf,
        /// Overrides the `[adjust]` section.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Data-augmentation MCMC for the closed SIR model.
    Mcmc {
        #[arg(long)]
        data: PathBuf,
    },
    /// Synthetic study over replicates, methods and tolerance rates.
    Study {
        #[arg(long)]
        archive: Option<PathBuf>,
    },
    /// Posterior predictive sample of a statistic and coverage curve.
    Ppd {
        /// `fit.json` from `abc` or `adjusted.json` from `adjust`.
        #[arg(long)]
        posterior: PathBuf,
        /// Observed detections, for the containment verdict.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Choose the tolerance rate by prediction error on held-out years.
    TuneTolerance {
        #[arg(long)]
        data: PathBuf,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use sirabc::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::DegenerateWeights) => 3,
        Some(
            E::InvalidParameters(_)
            | E::Contract(_)
            | E::Parse { .. }
            | E::LayoutMismatch(_)
            | E::HorizonMismatch { .. }
            | E::Empty(_)
            | E::Json(_),
        ) => 2,
        _ => 1,
    }
}

fn init_workers() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("SIRABC_WORKERS") {
        let n: usize = v.parse().map_err(|_| {
            sirabc::Error::InvalidParameters(format!("SIRABC_WORKERS={v} is not a count"))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_workers()?;
    let cfg = Config::load(cli.config.as_deref())?;
    let seed = cli.seed.or(cfg.seed);
    let need_seed = || {
        seed.ok_or_else(|| {
            sirabc::Error::InvalidParameters("a seed is required (--seed or `seed =`)".into())
        })
    };
    let out = cli.out.as_path();
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, need_seed()?, out),
        Command::Abc {
            data,
            observed,
            archive,
        } => commands::abc(
            &cfg,
            need_seed()?,
            &data,
            observed.as_deref(),
            archive.as_deref(),
            out,
        ),
        Command::Adjust { fit, method } => {
            let m = method.map(|m| match m {
                MethodArg::Locl => AdjustMethod::Locl,
                MethodArg::Nch => match cfg.adjust {
                    AdjustMethod::Nch(c) => AdjustMethod::Nch(c),
                    AdjustMethod::Locl => AdjustMethod::Nch(NchConfig::default()),
                },
            });
            commands::adjust(&cfg, &fit, m, out)
        }
        Command::Mcmc { data } => commands::mcmc(&cfg, need_seed()?, &data, out),
        Command::Study { archive } => {
            let seed = cli
                .seed
                .ok_or_else(|| sirabc::Error::InvalidParameters("study requires --seed".into()))?;
            commands::study(&cfg, seed, archive.as_deref(), out)
        }
        Command::Ppd { posterior, data } => {
            commands::ppd(&cfg, need_seed()?, &posterior, data.as_deref(), out)
        }
        Command::TuneTolerance { data } => commands::tune(&cfg, need_seed()?, &data, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
