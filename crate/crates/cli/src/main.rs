//! `rdspoof`: run range-Doppler spoofing experiments from a TOML config.
//!
//! Exit status: 0 on success, 1 for an unusable or assumption-violating
//! config, 2 when a run fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rdspoof::channel::apply_channel_waveform;
use rdspoof::dsp::derive_seed;
use rdspoof::harness::{self, export_iq, random_bits, transmit, ExperimentConfig, RunOptions};
use rdspoof::Error;

#[derive(Parser)]
#[command(name = "rdspoof", version, about = "OFDM range-Doppler spoofing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Run even when an assumption check fails.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Check the configuration and print the assumption report.
    Validate,
    /// Bit error rate sweep at the legitimate receiver.
    Ber,
    /// Range-Doppler maps and peak reports at the tracking receiver.
    Rd,
    /// Write one transmitted and one received frame as cf32 IQ files.
    IqExport,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } | Error::InvalidExperiment(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let path = common.config.as_deref().ok_or_else(|| Failure::Config("--config PATH is required".into()))?;
    let mut cfg = ExperimentConfig::load(path).map_err(|e| match e {
        Error::Io { .. } => Failure::Config(e.to_string()),
        other => other.into(),
    })?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn iq_export(cfg: &ExperimentConfig, dir: &Path) -> Result<(), Error> {
    let alloc = cfg.allocation()?;
    let scenario = cfg.rd_scenarios()?.into_iter().next().ok_or(Error::EmptyInput)?;
    let seed = derive_seed(derive_seed(cfg.seed, 0), 0);
    let bits = random_bits(alloc.bits_per_frame(cfg.order, cfg.n_symbols), derive_seed(seed, 0));
    let tx = transmit(bits, cfg.order, &scenario.schedule, &cfg.ofdm, &alloc)?;
    let params = cfg.channel.params(cfg.snr_db[0], derive_seed(seed, 1));
    let rx = apply_channel_waveform(&tx.waveform, &params, &cfg.ofdm)?;
    harness::runner::ensure_dir(dir)?;
    for (label, w) in [("tx", &tx.waveform), ("rx", &rx)] {
        let path = dir.join(format!("{}_{label}.cf32", cfg.name));
        let meta = export_iq(w, cfg.ofdm.carrier_frequency, &path)?;
        println!("wrote {} ({} samples, marker {})", path.display(), meta.samples, meta.marker);
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load(&cli.common)?;
    let opts = RunOptions { threads: cli.common.threads, force: cli.common.force };
    let dir = cfg.output.dir.clone();
    match cli.command {
        Command::Validate => {
            let report = harness::validate_assumptions(&cfg);
            print!("{report}");
            println!("config hash {}", cfg.hash());
            if !report.passed() {
                return Err(Failure::Config("assumption check failed".into()));
            }
        }
        Command::Ber => {
            let records = harness::run_ber_sweep(&cfg, &opts)?;
            for r in &records {
                log::info!("{} snr {} dB: ber {} ({} bits)", r.scenario, r.snr_db, r.value, r.bits.unwrap_or(0));
            }
            report_written(&harness::write_ber_outputs(&dir, &cfg, &records)?);
        }
        Command::Rd => {
            let outcome = harness::run_rd_experiment(&cfg, &opts)?;
            report_written(&harness::write_rd_outputs(&dir, &cfg, &outcome)?);
        }
        Command::IqExport => iq_export(&cfg, &dir)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("invalid configuration: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("run failed: {msg}");
            ExitCode::from(2)
        }
    }
}
