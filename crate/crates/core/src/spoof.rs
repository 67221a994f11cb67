//! Range-Doppler spoofing surface and its application to frame grids.
//!
//! The transmitter multiplies every grid cell by
//! `U[k, m] = exp(-j 2 pi f_k R_sp / c) * exp(j 2 pi f_sp m T)`, a delay-like
//! ramp across subcarriers and a Doppler-like rotation across symbols. Any
//! receiver that forms range and Doppler from the per-symbol DFT sees the
//! emitter displaced by `(R_sp, f_sp)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dsp::Complex64;
use crate::ofdm::{self, FrameGrid, OfdmConfig, Waveform};
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpoofProfile {
    /// Spoofed range offset, meters.
    pub range_m: f64,
    /// Spoofed Doppler offset, Hz.
    pub doppler_hz: f64,
}

impl SpoofProfile {
    pub fn new(range_m: f64, doppler_hz: f64) -> Self {
        Self { range_m, doppler_hz }
    }

    pub fn delay_s(&self) -> f64 {
        self.range_m / SPEED_OF_LIGHT
    }

    pub fn is_identity(&self) -> bool {
        self.range_m == 0.0 && self.doppler_hz == 0.0
    }
}

/// Symbol period used in the slow-time exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlowTime {
    /// Useful symbol plus cyclic prefix. A receiver measuring Doppler from
    /// symbol-to-symbol phase sees exactly `f_sp`.
    #[default]
    SymbolTotal,
    /// Useful symbol only (`T_N`); the apparent Doppler shrinks to
    /// `f_sp * T_N / (T_N + T_cp)`.
    UsefulSymbol,
}

impl SlowTime {
    pub fn period(self, cfg: &OfdmConfig) -> f64 {
        match self {
            SlowTime::SymbolTotal => cfg.slow_time_period(),
            SlowTime::UsefulSymbol => cfg.symbol_duration(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub profile: SpoofProfile,
    pub symbols: Vec<usize>,
}

/// Assignment of spoof profiles to OFDM symbols. Symbols not listed are
/// transmitted unspoofed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpoofSchedule {
    pub n_symbols: usize,
    #[serde(default)]
    pub entries: Vec<ScheduleEntry>,
    #[serde(default)]
    pub slow_time: SlowTime,
}

impl SpoofSchedule {
    pub fn identity(n_symbols: usize) -> Self {
        Self {
            n_symbols,
            entries: Vec::new(),
            slow_time: SlowTime::default(),
        }
    }

    /// One profile on every symbol.
    pub fn single(n_symbols: usize, profile: SpoofProfile) -> Self {
        Self {
            n_symbols,
            entries: vec![ScheduleEntry {
                profile,
                symbols: (0..n_symbols).collect(),
            }],
            slow_time: SlowTime::default(),
        }
    }

    pub fn with_slow_time(mut self, slow_time: SlowTime) -> Self {
        self.slow_time = slow_time;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.n_symbols];
        for e in &self.entries {
            for &m in &e.symbols {
                if m >= self.n_symbols || seen[m] {
                    return Err(Error::Config(format!(
                        "schedule symbol {m} out of range or assigned twice"
                    )));
                }
                seen[m] = true;
            }
        }
        Ok(())
    }

    /// Per-symbol profile lookup table.
    pub fn per_symbol(&self) -> Vec<Option<SpoofProfile>> {
        let mut table = vec![None; self.n_symbols];
        for e in &self.entries {
            for &m in &e.symbols {
                if let Some(slot) = table.get_mut(m) {
                    *slot = Some(e.profile);
                }
            }
        }
        table
    }

    pub fn profile_for(&self, m: usize) -> Option<SpoofProfile> {
        self.entries
            .iter()
            .find(|e| e.symbols.contains(&m))
            .map(|e| e.profile)
    }

    /// Profile whose range offset is also imposed on the preamble: the one
    /// carried by symbol 0.
    pub fn preamble_profile(&self) -> Option<SpoofProfile> {
        self.profile_for(0)
    }

    pub fn profiles(&self) -> Vec<SpoofProfile> {
        self.entries.iter().map(|e| e.profile).collect()
    }
}

/// `U[k, m]` for DFT bin `k` and symbol `m`.
pub fn spoof_factor(k: usize, m: usize, p: &SpoofProfile, cfg: &OfdmConfig, slow: SlowTime) -> Complex64 {
    let range_phase = -2.0 * PI * cfg.subcarrier_frequency(k) * p.delay_s();
    let doppler_phase = 2.0 * PI * p.doppler_hz * m as f64 * slow.period(cfg);
    Complex64::from_polar(1.0, range_phase + doppler_phase)
}

/// Element-wise product of the grid with the scheduled spoofing surface.
/// Pilots are spoofed along with data; nulls stay zero.
pub fn apply_spoof(grid: &FrameGrid, sched: &SpoofSchedule, cfg: &OfdmConfig) -> Result<FrameGrid> {
    if sched.n_symbols != grid.n_symbols() || grid.n_subcarriers() != cfg.n_subcarriers {
        return Err(Error::Dimension {
            expected: format!("{} x {}", cfg.n_subcarriers, sched.n_symbols),
            got: format!("{} x {}", grid.n_subcarriers(), grid.n_symbols()),
        });
    }
    sched.validate()?;
    let mut out = grid.clone();
    for (m, profile) in sched.per_symbol().into_iter().enumerate() {
        let Some(p) = profile else { continue };
        for (k, x) in out.symbols.column_mut(m).iter_mut().enumerate() {
            *x *= spoof_factor(k, m, &p, cfg, sched.slow_time);
        }
    }
    Ok(out)
}

/// Imposes the range offset of [`SpoofSchedule::preamble_profile`] on the
/// training preamble so a legitimate receiver folds it into its channel
/// estimate. The Doppler offset is left to the pilots: a per-symbol phase
/// step is not a carrier offset, and correcting it as one would rotate
/// samples inside each symbol.
pub fn spoof_preamble(w: &mut Waveform, sched: &SpoofSchedule, cfg: &OfdmConfig) -> Result<()> {
    let Some(p) = sched.preamble_profile() else {
        return Ok(());
    };
    let blocks = ofdm::frame_blocks(w.marker, 0, cfg);
    ofdm::apply_circular_delay(&mut w.samples, &blocks, p.delay_s(), cfg)
}

/// Two false emitters in contiguous blocks: the first `floor(fraction * M)`
/// symbols carry `primary`, the rest `secondary`.
pub fn make_fraction_schedule(
    n_symbols: usize,
    fraction: f64,
    primary: SpoofProfile,
    secondary: SpoofProfile,
) -> Result<SpoofSchedule> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("fraction {fraction} outside [0, 1]")));
    }
    let split = ((fraction * n_symbols as f64 + 1e-9).floor() as usize).min(n_symbols);
    let mut entries = Vec::new();
    if split > 0 {
        entries.push(ScheduleEntry {
            profile: primary,
            symbols: (0..split).collect(),
        });
    }
    if split < n_symbols {
        entries.push(ScheduleEntry {
            profile: secondary,
            symbols: (split..n_symbols).collect(),
        });
    }
    Ok(SpoofSchedule {
        n_symbols,
        entries,
        slow_time: SlowTime::default(),
    })
}
