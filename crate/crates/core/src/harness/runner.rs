//! Seeded experiment runners and their CSV artifacts.
//!
//! Trial `t` at SNR index `i` draws everything from
//! `derive_seed(derive_seed(seed, i), t)`, independent of the scenario, so
//! scenarios are compared on identical bits, fading and noise. Trials may run
//! on any number of threads; results are merged in trial order.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::channel::apply_channel_waveform;
use crate::dsp::derive_seed;
use crate::ofdm::SubcarrierAllocation;
use crate::rx::{extract_peaks, lrx_demodulate, urx_process, PeakReport, RangeDopplerMap};
use crate::{Error, Result};

use super::chain::{random_bits, transmit};
use super::config::{ExperimentConfig, Scenario};
use super::validate::validate_assumptions;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    /// Run even when the assumption validator reports a failure.
    pub force: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub scenario: String,
    pub r_sp_m: f64,
    pub f_sp_hz: f64,
    pub snr_db: f64,
    /// Present for per-trial records, absent for aggregates.
    pub trial: Option<usize>,
    pub metric: String,
    pub value: f64,
    pub errors: Option<u64>,
    pub bits: Option<u64>,
}

pub const RECORD_HEADER: &str = "experiment,config_hash,seed,scenario,r_sp_m,f_sp_hz,snr_db,trial,metric,value,errors,bits";

impl ResultRecord {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.config_hash,
            self.seed,
            self.scenario,
            self.r_sp_m,
            self.f_sp_hz,
            self.snr_db,
            self.trial.map(|t| t.to_string()).unwrap_or_default(),
            self.metric,
            self.value,
            opt(self.errors),
            opt(self.bits)
        )
    }
}

pub fn records_csv(records: &[ResultRecord]) -> String {
    let mut out = String::from(RECORD_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidExperiment(format!("thread pool: {e}")))
}

fn preflight(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<()> {
    cfg.check()?;
    let report = validate_assumptions(cfg);
    if !report.passed() && !opts.force {
        return Err(Error::InvalidExperiment(format!("assumption check failed\n{report}")));
    }
    Ok(())
}

/// Receiver failed to find or decode the frame; the trial still counts.
fn is_receiver_failure(e: &Error) -> bool {
    matches!(e, Error::NoFrameDetected | Error::InsufficientSamples { .. })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BerTrial {
    pub errors: u64,
    pub bits: u64,
    pub lost: bool,
}

/// One frame through transmitter, channel and legitimate receiver. A lost
/// frame is charged half its bits, the expected count for guessing.
pub fn ber_trial(
    cfg: &ExperimentConfig,
    alloc: &SubcarrierAllocation,
    scenario: &Scenario,
    snr_db: f64,
    seed: u64,
) -> Result<BerTrial> {
    let n_bits = alloc.bits_per_frame(cfg.order, cfg.n_symbols);
    let bits = random_bits(n_bits, derive_seed(seed, 0));
    let tx = transmit(bits, cfg.order, &scenario.schedule, &cfg.ofdm, alloc)?;
    let rx = apply_channel_waveform(&tx.waveform, &cfg.channel.params(snr_db, derive_seed(seed, 1)), &cfg.ofdm)?;
    match lrx_demodulate(&rx, cfg.n_symbols, cfg.order, &cfg.ofdm, alloc) {
        Ok(out) => {
            let errors = out.bits.iter().zip(&tx.bits).filter(|(a, b)| a != b).count() as u64;
            Ok(BerTrial { errors, bits: n_bits as u64, lost: false })
        }
        Err(e) if is_receiver_failure(&e) => Ok(BerTrial { errors: n_bits as u64 / 2, bits: n_bits as u64, lost: true }),
        Err(e) => Err(e),
    }
}

/// One record per (SNR, scenario) with the bit error rate over all trials.
pub fn run_ber_sweep(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<ResultRecord>> {
    preflight(cfg, opts)?;
    let alloc = cfg.allocation()?;
    let hash = cfg.hash();
    let pool = pool(opts.threads)?;
    let mut records = Vec::new();
    for (si, &snr) in cfg.snr_db.iter().enumerate() {
        let snr_seed = derive_seed(cfg.seed, si as u64);
        for sc in cfg.ber_scenarios() {
            let trials: Vec<BerTrial> = pool.install(|| {
                (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| ber_trial(cfg, &alloc, &sc, snr, derive_seed(snr_seed, t as u64)))
                    .collect::<Result<_>>()
            })?;
            let errors: u64 = trials.iter().map(|t| t.errors).sum();
            let bits: u64 = trials.iter().map(|t| t.bits).sum();
            let lost = trials.iter().filter(|t| t.lost).count();
            if lost > 0 {
                log::warn!("{}: {lost} of {} frames lost at {snr} dB", sc.label, cfg.trials);
            }
            records.push(ResultRecord {
                experiment: cfg.name.clone(),
                config_hash: hash.clone(),
                seed: cfg.seed,
                scenario: sc.label.clone(),
                r_sp_m: sc.primary.range_m,
                f_sp_hz: sc.primary.doppler_hz,
                snr_db: snr,
                trial: None,
                metric: "ber".into(),
                value: errors as f64 / bits as f64,
                errors: Some(errors),
                bits: Some(bits),
            });
        }
    }
    Ok(records)
}

/// Where each scheduled profile should appear on the map, in schedule order.
pub fn expected_targets(cfg: &ExperimentConfig, scenario: &Scenario) -> Vec<(f64, f64)> {
    let r0 = cfg.channel.initial_range_m;
    let fd = crate::channel::doppler_from_velocity(cfg.channel.velocity_mps, cfg.ofdm.carrier_frequency);
    let profiles = scenario.schedule.profiles();
    if profiles.is_empty() {
        vec![(r0, fd)]
    } else {
        profiles.iter().map(|p| (r0 + p.range_m, fd + p.doppler_hz)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RdTrial {
    pub map: RangeDopplerMap,
    pub peaks: Vec<PeakReport>,
    /// Largest magnitude within one resolution cell of each expected target.
    pub target_magnitudes: Vec<f64>,
}

/// One frame through transmitter, channel and tracking receiver. `None`
/// when the receiver could not find the frame.
pub fn rd_trial(
    cfg: &ExperimentConfig,
    alloc: &SubcarrierAllocation,
    scenario: &Scenario,
    snr_db: f64,
    seed: u64,
) -> Result<Option<RdTrial>> {
    let n_bits = alloc.bits_per_frame(cfg.order, cfg.n_symbols);
    let bits = random_bits(n_bits, derive_seed(seed, 0));
    let tx = transmit(bits, cfg.order, &scenario.schedule, &cfg.ofdm, alloc)?;
    let rx = apply_channel_waveform(&tx.waveform, &cfg.channel.params(snr_db, derive_seed(seed, 1)), &cfg.ofdm)?;
    let out = match urx_process(&rx, cfg.n_symbols, cfg.order, &cfg.ofdm, alloc, &cfg.rd.options()) {
        Ok(out) => out,
        Err(e) if is_receiver_failure(&e) => return Ok(None),
        Err(e) => return Err(e),
    };
    let peaks = extract_peaks(&out.map, cfg.rd.n_peaks);
    let target_magnitudes = expected_targets(cfg, scenario)
        .into_iter()
        .map(|(r, f)| out.map.max_near(r, f, 1))
        .collect();
    Ok(Some(RdTrial { map: out.map, peaks, target_magnitudes }))
}

/// Map and peaks of the first trial of one (SNR, scenario) pair.
#[derive(Debug, Clone)]
pub struct ScenarioMap {
    pub scenario: String,
    pub snr_db: f64,
    pub map: RangeDopplerMap,
    pub peaks: Vec<PeakReport>,
}

#[derive(Debug, Clone)]
pub struct RdOutcome {
    pub records: Vec<ResultRecord>,
    pub maps: Vec<ScenarioMap>,
}

fn within_cell(peak: &PeakReport, map: &RangeDopplerMap, target: (f64, f64)) -> bool {
    let dr = map.range_axis.get(map.pad_range).copied().unwrap_or(f64::INFINITY);
    let dd = map.doppler_axis.get(map.pad_doppler).map_or(f64::INFINITY, |v| v - map.doppler_axis[0]);
    (peak.range_m - target.0).abs() <= dr && (peak.doppler_hz - target.1).abs() <= dd
}

/// Per-trial peak and target records plus an aggregate hit rate per
/// (SNR, scenario): the share of trials whose strongest peak lies within one
/// resolution cell of the first expected target.
pub fn run_rd_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RdOutcome> {
    preflight(cfg, opts)?;
    let alloc = cfg.allocation()?;
    let hash = cfg.hash();
    let pool = pool(opts.threads)?;
    let mut records = Vec::new();
    let mut maps = Vec::new();
    for (si, &snr) in cfg.snr_db.iter().enumerate() {
        let snr_seed = derive_seed(cfg.seed, si as u64);
        for sc in cfg.rd_scenarios()? {
            let targets = expected_targets(cfg, &sc);
            let trials: Vec<Option<RdTrial>> = pool.install(|| {
                (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| rd_trial(cfg, &alloc, &sc, snr, derive_seed(snr_seed, t as u64)))
                    .collect::<Result<_>>()
            })?;
            let record = |trial: Option<usize>, metric: String, value: f64| ResultRecord {
                experiment: cfg.name.clone(),
                config_hash: hash.clone(),
                seed: cfg.seed,
                scenario: sc.label.clone(),
                r_sp_m: sc.primary.range_m,
                f_sp_hz: sc.primary.doppler_hz,
                snr_db: snr,
                trial,
                metric,
                value,
                errors: None,
                bits: None,
            };
            let mut hits = 0usize;
            let mut lost = 0usize;
            for (t, outcome) in trials.iter().enumerate() {
                let Some(tr) = outcome else {
                    lost += 1;
                    records.push(record(Some(t), "lost".into(), 1.0));
                    continue;
                };
                if tr.peaks.first().is_some_and(|p| within_cell(p, &tr.map, targets[0])) {
                    hits += 1;
                }
                for (i, p) in tr.peaks.iter().enumerate() {
                    let n = i + 1;
                    records.push(record(Some(t), format!("peak{n}_range_m"), p.range_m));
                    records.push(record(Some(t), format!("peak{n}_doppler_hz"), p.doppler_hz));
                    records.push(record(Some(t), format!("peak{n}_magnitude"), p.magnitude));
                    records.push(record(Some(t), format!("peak{n}_psl_db"), p.peak_to_sidelobe_db));
                }
                for (i, m) in tr.target_magnitudes.iter().enumerate() {
                    records.push(record(Some(t), format!("target{}_magnitude", i + 1), *m));
                }
            }
            records.push(record(None, "hit_rate".into(), hits as f64 / cfg.trials as f64));
            records.push(record(None, "lost_frames".into(), lost as f64));
            if let Some(Some(first)) = trials.into_iter().next() {
                maps.push(ScenarioMap { scenario: sc.label.clone(), snr_db: snr, map: first.map, peaks: first.peaks });
            }
        }
    }
    Ok(RdOutcome { records, maps })
}

/// Row-major magnitudes. The first row holds the Doppler axis after a corner
/// label; every following row starts with its range value.
pub fn map_csv(map: &RangeDopplerMap) -> String {
    let mut out = String::from("range_m\\doppler_hz");
    for d in &map.doppler_axis {
        let _ = write!(out, ",{d}");
    }
    out.push('\n');
    for (p, r) in map.range_axis.iter().enumerate() {
        let _ = write!(out, "{r}");
        for v in map.magnitudes.row(p) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub const PEAK_HEADER: &str = "scenario,snr_db,rank,range_m,doppler_hz,magnitude,psl_db";

pub fn peaks_csv(maps: &[ScenarioMap]) -> String {
    let mut out = String::from(PEAK_HEADER);
    out.push('\n');
    for m in maps {
        for (i, p) in m.peaks.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                m.scenario,
                m.snr_db,
                i + 1,
                p.range_m,
                p.doppler_hz,
                p.magnitude,
                p.peak_to_sidelobe_db
            );
        }
    }
    out
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|source| Error::Io { path: path.clone(), source })?;
    Ok(path)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })
}

/// Writes `<name>_ber.csv`.
pub fn write_ber_outputs(dir: &Path, cfg: &ExperimentConfig, records: &[ResultRecord]) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    Ok(vec![write_file(dir.join(format!("{}_ber.csv", cfg.name)), &records_csv(records))?])
}

/// Writes `<name>_rd.csv`, `<name>_peaks.csv` and one
/// `<name>_map_<scenario>_snr<snr>.csv` per first-trial map.
pub fn write_rd_outputs(dir: &Path, cfg: &ExperimentConfig, outcome: &RdOutcome) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = vec![
        write_file(dir.join(format!("{}_rd.csv", cfg.name)), &records_csv(&outcome.records))?,
        write_file(dir.join(format!("{}_peaks.csv", cfg.name)), &peaks_csv(&outcome.maps))?,
    ];
    for m in &outcome.maps {
        let file = format!("{}_map_{}_snr{}.csv", cfg.name, m.scenario, m.snr_db);
        written.push(write_file(dir.join(file), &map_csv(&m.map))?);
    }
    Ok(written)
}
