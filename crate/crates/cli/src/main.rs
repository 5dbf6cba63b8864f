//! `connectedness` command-line tool.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use config::{CommonArgs, CorrChoice, EngineArgs, Format, Resolved, Specific, SplitChoice, UsageError};

#[derive(Debug, Parser)]
#[command(name = "connectedness", version, about = "Spillover connectedness analytics for return panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Descriptive statistics, Jarque–Bera and ADF per series (stats.csv).
    Stats {
        #[command(flatten)]
        common: CommonArgs,
        /// Fixed number of ADF augmentation lags [default: Schwert rule, pruned].
        #[arg(long)]
        adf_lags: Option<usize>,
    },
    /// Correlation matrices with insignificant entries blanked (corr_<method>.csv).
    Corr {
        #[command(flatten)]
        common: CommonArgs,
        /// Correlation method [default: all].
        #[arg(long, value_enum)]
        method: Option<CorrChoice>,
        /// Significance level for masking [default: 0.10].
        #[arg(long)]
        level: Option<f64>,
    },
    /// Static connectedness table, or the averaged dynamic table with --window (table_<engine>.csv).
    Connect {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        engine: EngineArgs,
        /// Average rolling tables over windows of this many returns.
        #[arg(long)]
        window: Option<usize>,
    },
    /// Rolling-window indices in long format (rolling_<engine>.csv).
    Rolling {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        engine: EngineArgs,
        /// Window length in return observations [default: 200].
        #[arg(long)]
        window: Option<usize>,
    },
    /// Connectedness tables per date-delimited subsample.
    Split {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        split: SplitArgs,
        /// Average rolling tables within each segment instead of a static fit.
        #[arg(long)]
        window: Option<usize>,
    },
    /// Threshold-filtered net pairwise spillover networks (network_<split>.<fmt>).
    Network {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        engine: EngineArgs,
        /// Build from the averaged dynamic table with this window.
        #[arg(long)]
        window: Option<usize>,
        /// Keep edges whose NPDC exceeds this value [default: 0.2].
        #[arg(long)]
        threshold: Option<f64>,
        /// Which split to export [default: all].
        #[arg(long, value_enum)]
        split: Option<SplitChoice>,
        /// Output format [default: json].
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Synthetic price panel from a planted VAR(1) (prices.csv).
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Debug, Clone, Args)]
struct SplitArgs {
    /// Comma-separated breakpoint dates; each opens a new segment [default: 2022-02-24,2022-07-22].
    #[arg(long, value_delimiter = ',')]
    breakpoints: Option<Vec<NaiveDate>>,
    /// Comma-separated segment labels, one more than breakpoints.
    #[arg(long, value_delimiter = ',')]
    segment_labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Args)]
struct SimArgs {
    /// Number of series [default: 4].
    #[arg(long)]
    k: Option<usize>,
    /// Number of returns; prices have one more row [default: 600].
    #[arg(long)]
    t: Option<usize>,
    /// RNG seed [default: 1].
    #[arg(long)]
    seed: Option<u64>,
    /// Lag-one coupling SOURCE:TARGET:COEF with 1-based series numbers; repeatable.
    #[arg(long = "edge")]
    edges: Option<Vec<String>>,
    /// Innovation standard deviation [default: 0.01].
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Equicorrelation of innovations [default: 0].
    #[arg(long)]
    noise_corr: Option<f64>,
    /// First price date [default: 2020-12-01].
    #[arg(long)]
    start: Option<NaiveDate>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Stats { .. } => "stats",
            Command::Corr { .. } => "corr",
            Command::Connect { .. } => "connect",
            Command::Rolling { .. } => "rolling",
            Command::Split { .. } => "split",
            Command::Network { .. } => "network",
            Command::Simulate { .. } => "simulate",
        }
    }

    fn resolve(&self) -> Result<Resolved, UsageError> {
        let none = EngineArgs::default();
        match self {
            Command::Stats { common, adf_lags } => {
                Resolved::merge(common, &none, &Specific { adf_lags: *adf_lags, ..Default::default() }, None)
            }
            Command::Corr { common, method, level } => Resolved::merge(
                common,
                &none,
                &Specific { corr_choice: *method, level: *level, ..Default::default() },
                None,
            ),
            Command::Connect { common, engine, window } => {
                Resolved::merge(common, engine, &Specific { window: *window, ..Default::default() }, None)
            }
            Command::Rolling { common, engine, window } => Resolved::merge(
                common,
                engine,
                &Specific { window: *window, ..Default::default() },
                Some(connectedness::dynamics::DEFAULT_WINDOW),
            ),
            Command::Split { common, engine, split, window } => Resolved::merge(
                common,
                engine,
                &Specific {
                    window: *window,
                    breakpoints: split.breakpoints.clone(),
                    segment_labels: split.segment_labels.clone(),
                    ..Default::default()
                },
                None,
            ),
            Command::Network { common, engine, window, threshold, split, format } => Resolved::merge(
                common,
                engine,
                &Specific {
                    window: *window,
                    threshold: *threshold,
                    split: *split,
                    format: *format,
                    ..Default::default()
                },
                None,
            ),
            Command::Simulate { common, sim } => Resolved::merge(
                common,
                &none,
                &Specific {
                    k: sim.k,
                    t: sim.t,
                    seed: sim.seed,
                    edges: sim.edges.clone(),
                    noise_sd: sim.noise_sd,
                    noise_corr: sim.noise_corr,
                    start: sim.start,
                    ..Default::default()
                },
                None,
            ),
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).format_timestamp(None).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", one_line(first));
            return ExitCode::from(2);
        }
    };
    let args: Vec<String> = std::env::args().skip(1).collect();
    let resolved = match cli.command.resolve() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}", one_line(&e.0));
            return ExitCode::from(2);
        }
    };
    match commands::run(cli.command.name(), &args, &resolved) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {}", one_line(&msg));
            ExitCode::from(2)
        }
        Err(commands::Failure::Run(msg)) => {
            eprintln!("error: {}", one_line(&msg));
            ExitCode::from(1)
        }
    }
}
