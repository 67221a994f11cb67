//! Experiment configuration file.
//!
//! A single TOML document. Unknown keys anywhere are rejected. Floats accept
//! `inf`, which is how a pure line-of-sight channel (`rician_k = inf`) or a
//! noiseless run (`snr_db = [inf]`) is written.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelParams, Fading};
use crate::dsp::{Complex64, ConstellationOrder};
use crate::ofdm::{OfdmConfig, SubcarrierAllocation};
use crate::rx::{RdOptions, Window};
use crate::spoof::{make_fraction_schedule, SlowTime, SpoofProfile, SpoofSchedule};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_symbols")]
    pub n_symbols: usize,
    #[serde(default = "default_order")]
    pub order: ConstellationOrder,
    /// SNR grid in dB.
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub ofdm: OfdmConfig,
    /// Explicit subcarrier roles; the 52 data / 4 pilot layout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<AllocationSettings>,
    #[serde(default)]
    pub channel: ChannelSettings,
    #[serde(default)]
    pub schedule: ScheduleSettings,
    #[serde(default)]
    pub rd: RdSettings,
    #[serde(default)]
    pub output: OutputSettings,
    /// Spoof profiles. A BER sweep runs each one as its own scenario; a
    /// range-Doppler run applies one profile to every symbol, or splits the
    /// frame between two profiles by `schedule.fractions`.
    #[serde(default)]
    pub spoof: Vec<SpoofProfile>,
}

fn default_trials() -> usize {
    1
}

fn default_symbols() -> usize {
    50
}

fn default_order() -> ConstellationOrder {
    ConstellationOrder::Qpsk
}

/// Bin indices for data and pilots. Pilots carry +1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationSettings {
    pub data: Vec<usize>,
    pub pilots: Vec<usize>,
}

/// Channel parameters that stay fixed across the SNR grid and trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSettings {
    pub initial_range_m: f64,
    pub velocity_mps: f64,
    pub rician_k: f64,
    /// Line-of-sight phase; drawn per trial when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_rad: Option<f64>,
    pub fading: Fading,
}

impl Default for ChannelSettings {
    fn default() -> Self {
        Self {
            initial_range_m: 0.0,
            velocity_mps: 0.0,
            rician_k: f64::INFINITY,
            phase_rad: Some(0.0),
            fading: Fading::Block,
        }
    }
}

impl ChannelSettings {
    pub fn params(&self, snr_db: f64, seed: u64) -> ChannelParams {
        ChannelParams {
            initial_range_m: self.initial_range_m,
            velocity_mps: self.velocity_mps,
            rician_k: self.rician_k,
            snr_db,
            phase_rad: self.phase_rad,
            fading: self.fading,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSettings {
    /// Share of symbols carrying the first of two profiles; one scenario per entry.
    pub fractions: Vec<f64>,
    pub slow_time: SlowTime,
}

impl Default for ScheduleSettings {
    fn default() -> Self {
        Self { fractions: vec![0.5], slow_time: SlowTime::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RdSettings {
    pub pad_range: usize,
    pub pad_doppler: usize,
    pub window: Window,
    pub n_peaks: usize,
    pub track_delay: bool,
}

impl Default for RdSettings {
    fn default() -> Self {
        let o = RdOptions::default();
        Self { pad_range: o.pad_range, pad_doppler: o.pad_doppler, window: o.window, n_peaks: 2, track_delay: o.track_delay }
    }
}

impl RdSettings {
    pub fn options(&self) -> RdOptions {
        RdOptions {
            pad_range: self.pad_range,
            pad_doppler: self.pad_doppler,
            window: self.window,
            track_delay: self.track_delay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    pub dir: PathBuf,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// A labelled spoof schedule: one scenario of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub schedule: SpoofSchedule,
    /// Profile reported alongside records; zero for the unspoofed scenario.
    pub primary: SpoofProfile,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let cfg: Self =
            toml::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        let text = self.to_toml_string().unwrap_or_else(|_| format!("{self:?}"));
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Structural checks: everything a run needs to be well defined.
    /// Physical assumptions are left to the validator.
    pub fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.name.trim().is_empty() {
            return fail("name must not be empty".into());
        }
        self.ofdm.validate()?;
        self.allocation()?;
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.n_symbols == 0 {
            return fail("n_symbols must be at least 1".into());
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| s.is_nan()) {
            return fail("snr_db must be a non-empty list of numbers".into());
        }
        if self.rd.pad_range == 0 || self.rd.pad_doppler == 0 {
            return fail("rd padding factors must be at least 1".into());
        }
        let ch = &self.channel;
        if !ch.initial_range_m.is_finite() || ch.initial_range_m < 0.0 || !ch.velocity_mps.is_finite() {
            return fail("channel range must be finite and non-negative, velocity finite".into());
        }
        if ch.rician_k.is_nan() || ch.rician_k < 0.0 {
            return fail("rician_k must be non-negative".into());
        }
        for p in &self.spoof {
            if !p.range_m.is_finite() || p.range_m < 0.0 || !p.doppler_hz.is_finite() {
                return fail(format!("spoof profile {p:?} must have finite non-negative range and finite Doppler"));
            }
        }
        if self.schedule.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return fail("schedule fractions must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn allocation(&self) -> Result<SubcarrierAllocation> {
        match &self.allocation {
            None => SubcarrierAllocation::standard(&self.ofdm),
            Some(a) => SubcarrierAllocation::new(
                self.ofdm.n_subcarriers,
                a.data.clone(),
                a.pilots.clone(),
                vec![Complex64::new(1.0, 0.0); a.pilots.len()],
            ),
        }
    }

    /// Unspoofed baseline followed by one scenario per profile.
    pub fn ber_scenarios(&self) -> Vec<Scenario> {
        let slow = self.schedule.slow_time;
        let mut out = vec![Scenario {
            label: "no_spoof".into(),
            schedule: SpoofSchedule::identity(self.n_symbols),
            primary: SpoofProfile::default(),
        }];
        out.extend(self.spoof.iter().map(|&p| Scenario {
            label: format!("spoof_{}m_{}hz", p.range_m, p.doppler_hz),
            schedule: SpoofSchedule::single(self.n_symbols, p).with_slow_time(slow),
            primary: p,
        }));
        out
    }

    /// Range-Doppler scenarios: identity, one profile on every symbol, or
    /// one split per configured fraction for two profiles.
    pub fn rd_scenarios(&self) -> Result<Vec<Scenario>> {
        let slow = self.schedule.slow_time;
        match self.spoof.as_slice() {
            [] => Ok(vec![Scenario {
                label: "no_spoof".into(),
                schedule: SpoofSchedule::identity(self.n_symbols),
                primary: SpoofProfile::default(),
            }]),
            [p] => Ok(vec![Scenario {
                label: format!("spoof_{}m_{}hz", p.range_m, p.doppler_hz),
                schedule: SpoofSchedule::single(self.n_symbols, *p).with_slow_time(slow),
                primary: *p,
            }]),
            [primary, secondary] => self
                .schedule
                .fractions
                .iter()
                .map(|&f| {
                    Ok(Scenario {
                        label: format!("fraction_{f}"),
                        schedule: make_fraction_schedule(self.n_symbols, f, *primary, *secondary)?
                            .with_slow_time(slow),
                        primary: *primary,
                    })
                })
                .collect(),
            more => Err(Error::Config(format!(
                "a range-Doppler run takes at most two spoof profiles, got {}",
                more.len()
            ))),
        }
    }
}
