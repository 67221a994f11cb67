//! Physical assumptions behind the radar model, checked before a run.

use std::fmt;

use crate::channel::doppler_from_velocity;
use crate::ofdm::PREAMBLE_LEN;
use crate::SPEED_OF_LIGHT;

use super::config::ExperimentConfig;

/// Ratio a "much larger than" check must reach.
pub const ORDER_OF_MAGNITUDE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Allowed over actual; the check passes when this clears its threshold.
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<16} margin {:>12.4}x  {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.margin,
                c.detail
            )?;
        }
        Ok(())
    }
}

fn ratio(allowed: f64, actual: f64) -> f64 {
    if actual == 0.0 {
        f64::INFINITY
    } else {
        allowed / actual
    }
}

/// Report-only: never fails and never panics, whatever the numbers.
/// A NaN margin counts as a failure.
pub fn validate_assumptions(cfg: &ExperimentConfig) -> ValidationReport {
    let ofdm = &cfg.ofdm;
    let ch = &cfg.channel;
    let n = ofdm.n_subcarriers as f64;
    let spacing = ofdm.subcarrier_spacing;
    let f_d = doppler_from_velocity(ch.velocity_mps, ofdm.carrier_frequency);

    let max_spoof_range = cfg.spoof.iter().map(|p| p.range_m).fold(0.0, f64::max);
    let delay = (ch.initial_range_m + max_spoof_range) / SPEED_OF_LIGHT;
    let cp = ofdm.cp_samples as f64 / (n * spacing);
    let cp_margin = ratio(cp, delay);

    let max_doppler = cfg
        .spoof
        .iter()
        .map(|p| (f_d + p.doppler_hz).abs())
        .fold(f_d.abs(), f64::max);
    let doppler_margin = ratio(spacing, max_doppler);

    let bandwidth = n * spacing;
    let narrowband_margin = ratio(ofdm.carrier_frequency, bandwidth);

    let frame_samples = PREAMBLE_LEN as f64 + cfg.n_symbols as f64 * (n + ofdm.cp_samples as f64);
    let frame_time = frame_samples / (n * spacing);
    let range_cell = SPEED_OF_LIGHT / bandwidth;
    let migration = ch.velocity_mps.abs() * frame_time;
    let hop_margin = ratio(range_cell, migration);

    let slow = cfg.schedule.slow_time.period(ofdm);
    let nyquist = 1.0 / (2.0 * slow);
    let ambiguity_margin = ratio(nyquist, max_doppler);

    let at_least = |m: f64, t: f64| m >= t;
    let strictly = |m: f64| m > 1.0;
    ValidationReport {
        checks: vec![
            CheckResult {
                name: "cp_delay",
                passed: strictly(cp_margin),
                margin: cp_margin,
                detail: format!("total delay {:.4e} s against cyclic prefix {:.4e} s", delay, cp),
            },
            CheckResult {
                name: "doppler_spacing",
                passed: at_least(doppler_margin, ORDER_OF_MAGNITUDE),
                margin: doppler_margin,
                detail: format!("largest Doppler {:.2} Hz against spacing {:.1} Hz", max_doppler, spacing),
            },
            CheckResult {
                name: "narrowband",
                passed: at_least(narrowband_margin, ORDER_OF_MAGNITUDE),
                margin: narrowband_margin,
                detail: format!("carrier {:.4e} Hz against bandwidth {:.4e} Hz", ofdm.carrier_frequency, bandwidth),
            },
            CheckResult {
                name: "stop_and_hop",
                passed: at_least(hop_margin, ORDER_OF_MAGNITUDE),
                margin: hop_margin,
                detail: format!("range migration {:.4e} m per frame against cell {:.3} m", migration, range_cell),
            },
            CheckResult {
                name: "doppler_ambiguity",
                passed: strictly(ambiguity_margin),
                margin: ambiguity_margin,
                detail: format!("largest Doppler {:.2} Hz against slow-time Nyquist {:.1} Hz", max_doppler, nyquist),
            },
        ],
    }
}
