use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;

#[derive(Debug, Parser)]
#[command(name = "polqkd", version, about = "BB84 polarization-encoder simulation and analysis")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Simulation worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WindowArg {
    None,
    Hann,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate detection events and write them with a metadata sidecar.
    Simulate {
        /// Overrides `run.n_slots`.
        #[arg(long)]
        n_slots: Option<u64>,
        /// Record whether each event is a dark count.
        #[arg(long)]
        debug: bool,
    },
    /// QBER, encoding agreement and timing histograms of an events file.
    Analyze {
        events: PathBuf,
        #[arg(long, default_value_t = 100.0)]
        bin_ps: f64,
    },
    /// Asymptotic key rate over distance, one CSV per misencoding probability.
    Skr {
        #[arg(long, default_value_t = 0.0)]
        d_min: f64,
        #[arg(long, default_value_t = 120.0)]
        d_max: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        /// Comma-separated list; defaults to `skr.p_mis`.
        #[arg(long, value_delimiter = ',')]
        p_mis: Vec<f64>,
    },
    /// Fit the correlation model to a g2 histogram (`t_ns,counts`).
    G2fit {
        histogram: PathBuf,
        /// Defaults to `source.rep_rate_hz`.
        #[arg(long)]
        rep_rate_hz: Option<f64>,
    },
    /// Stability metrics and noise spectrum of a Stokes series (`t_s,s1,s2,s3`).
    Stability {
        stokes: PathBuf,
        /// Rescale samples to unit length first.
        #[arg(long)]
        normalize: bool,
        #[arg(long, value_enum, default_value = "none")]
        window: WindowArg,
        #[arg(long, default_value_t = 3)]
        skip_low_bins: usize,
    },
    /// Write synthetic g2 and Stokes inputs with known parameters.
    #[command(hide = true)]
    GenFixtures {
        #[arg(long, default_value_t = 1.16)]
        beta: f64,
        #[arg(long, default_value_t = 65536)]
        samples: usize,
        #[arg(long, default_value_t = 0.1)]
        interval_s: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let g = &cli.global;
    let result = match cli.command {
        Command::Simulate { n_slots, debug } => commands::simulate(g, n_slots, debug),
        Command::Analyze { events, bin_ps } => commands::analyze(g, &events, bin_ps),
        Command::Skr {
            d_min,
            d_max,
            step,
            p_mis,
        } => commands::skr(g, d_min, d_max, step, &p_mis),
        Command::G2fit {
            histogram,
            rep_rate_hz,
        } => commands::g2fit(g, &histogram, rep_rate_hz),
        Command::Stability {
            stokes,
            normalize,
            window,
            skip_low_bins,
        } => commands::stability(g, &stokes, normalize, window, skip_low_bins),
        Command::GenFixtures {
            beta,
            samples,
            interval_s,
        } => commands::gen_fixtures(g, beta, samples, interval_s),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
