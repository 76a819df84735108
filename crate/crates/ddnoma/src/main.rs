//! Command-line front end: BER sweeps, ambiguity surfaces, pulse dumps, and
//! spectral-efficiency tables, all emitted as CSV (stdout or --out file).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ddnoma::harness::{
    ambiguity_csv, ber_to_csv, pulses_csv, run_ber, se_report_csv, ExperimentConfig, PulseFamily,
};
use ddnoma::noma::Scheme;
use ddnoma::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ddnoma",
    version,
    about = "Link-level simulator for delay-Doppler multi-user modulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo bit-error-rate sweep over Es/N0.
    Ber(BerArgs),
    /// Self-ambiguity surface of a pulse train on the delay-Doppler lattice.
    Ambiguity(PulseArgs),
    /// Sampled waveform of a pulse train.
    Pulses(PulseArgs),
    /// Spectral-efficiency table with pairwise scheme ratios.
    Se(SeArgs),
}

#[derive(Args)]
struct BerArgs {
    /// TOML experiment file; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Multiplexing scheme: pdm, scma, or hermite.
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    users: Option<usize>,
    /// Delay bins per frame.
    #[arg(long)]
    m: Option<usize>,
    /// Doppler bins per frame.
    #[arg(long)]
    n: Option<usize>,
    /// Samples per delay bin.
    #[arg(long)]
    sps: Option<usize>,
    /// Root-raised-cosine roll-off for the shared data waveform.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    speed_kmh: Option<f64>,
    #[arg(long)]
    carrier_hz: Option<f64>,
    /// Propagation paths; 0 disables fading (identity channel).
    #[arg(long)]
    paths: Option<usize>,
    /// Comma-separated Es/N0 sweep in dB, e.g. --esn0 0,4,8,12.
    #[arg(long, value_delimiter = ',')]
    esn0: Option<Vec<f64>>,
    /// Maximum frames per sweep point.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Disable additive noise (channel effects still apply).
    #[arg(long)]
    noiseless: bool,
    /// Worker threads for the Monte-Carlo batches (default: rayon's choice).
    /// Results are identical at every thread count.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct PulseArgs {
    /// Pulse family: rect, rrc, or hermite.
    #[arg(long, default_value = "rrc")]
    pulse: PulseFamily,
    /// Hermite order (hermite family only).
    #[arg(long, default_value_t = 0)]
    order: usize,
    /// Root-raised-cosine roll-off (rrc family only).
    #[arg(long, default_value_t = 0.2)]
    beta: f64,
    #[arg(long, default_value_t = 4)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    sps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SeArgs {
    #[arg(long, default_value_t = 4)]
    users: usize,
    /// Constellation order shared by the schemes.
    #[arg(long, default_value_t = 4)]
    qam: usize,
    /// Resources per sparse-code group.
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn merged_config(args: &BerArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::config(format!("cannot read config {}: {e}", path.display()))
            })?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(v) = args.scheme {
        cfg.scheme = v;
    }
    if let Some(v) = args.users {
        cfg.users = v;
    }
    if let Some(v) = args.m {
        cfg.m = v;
    }
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.sps {
        cfg.sps = v;
    }
    if let Some(v) = args.beta {
        cfg.beta = v;
    }
    if let Some(v) = args.speed_kmh {
        cfg.speed_kmh = v;
    }
    if let Some(v) = args.carrier_hz {
        cfg.carrier_hz = v;
    }
    if let Some(v) = args.paths {
        cfg.paths = v;
    }
    if let Some(v) = &args.esn0 {
        cfg.esn0_db = v.clone();
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if args.noiseless {
        cfg.noiseless = true;
    }
    Ok(cfg)
}

fn emit(csv: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, csv)
            .map_err(|e| Error::config(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ber(args) => {
            let cfg = merged_config(&args)?;
            let records = match args.threads {
                Some(t) => rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| Error::config(format!("thread pool: {e}")))?
                    .install(|| run_ber(&cfg))?,
                None => run_ber(&cfg)?,
            };
            emit(&ber_to_csv(&records, &cfg), args.out.as_ref())
        }
        Command::Ambiguity(args) => {
            let cfg = ddnoma::otfs::OtfsConfig::new(args.m, args.n, 15e3, args.sps)?;
            let csv = ambiguity_csv(args.pulse, args.order, args.beta, &cfg)?;
            emit(&csv, args.out.as_ref())
        }
        Command::Pulses(args) => {
            let cfg = ddnoma::otfs::OtfsConfig::new(args.m, args.n, 15e3, args.sps)?;
            let csv = pulses_csv(args.pulse, args.order, args.beta, &cfg)?;
            emit(&csv, args.out.as_ref())
        }
        Command::Se(args) => {
            let csv = se_report_csv(args.qam, args.users, args.k)?;
            emit(&csv, args.out.as_ref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                Error::Numeric(_) => ExitCode::from(3),
            }
        }
    }
}
