//! Carrier frequency offset from repeated training blocks.

use std::f64::consts::PI;

use crate::dsp::Complex64;
use crate::ofdm::{OfdmConfig, Waveform, PREAMBLE_LEN, STS_LEN, STS_PERIOD};
use crate::{Error, Result};

/// Offset estimate in Hz. `total` is what the receiver removes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfoEstimate {
    pub coarse: f64,
    pub fine: f64,
    pub total: f64,
    /// Set when a correlation was exactly zero and its stage fell back to 0 Hz.
    pub degenerate: bool,
}

fn lag_correlation(x: &[Complex64], start: usize, len: usize, lag: usize) -> Complex64 {
    (start..start + len)
        .filter(|&a| a + lag < x.len())
        .map(|a| x[a].conj() * x[a + lag])
        .sum()
}

/// Two-stage estimate around a known payload marker.
///
/// The coarse stage correlates the short training sequence at lag 16
/// (range +-fs/32). The fine stage correlates at lag N over the long training
/// symbols and the payload cyclic prefixes after removing the coarse part.
pub fn moose_cfo(w: &Waveform, n_symbols: usize, cfg: &OfdmConfig) -> Result<CfoEstimate> {
    let x = &w.samples;
    let n = cfg.n_subcarriers;
    if n != 64 {
        return Err(Error::UnsupportedSubcarriers(n));
    }
    let sts = w.marker.checked_sub(PREAMBLE_LEN).ok_or(Error::InsufficientSamples {
        needed: PREAMBLE_LEN,
        have: w.marker,
    })?;
    let end = w.marker + n_symbols * cfg.symbol_len();
    if x.len() < end {
        return Err(Error::InsufficientSamples { needed: end, have: x.len() });
    }
    let fs = cfg.sample_rate();
    let mut degenerate = false;

    let p16 = lag_correlation(x, sts, STS_LEN - STS_PERIOD, STS_PERIOD);
    let coarse = if p16.norm() > 0.0 {
        p16.arg() * fs / (2.0 * PI * STS_PERIOD as f64)
    } else {
        degenerate = true;
        0.0
    };

    let mut p64 = lag_correlation(x, sts + STS_LEN, 96, n);
    for m in 0..n_symbols {
        p64 += lag_correlation(x, w.marker + m * cfg.symbol_len(), cfg.cp_samples, n);
    }
    let fine = if p64.norm() > 0.0 {
        let residual = p64 * Complex64::from_polar(1.0, -2.0 * PI * coarse * n as f64 / fs);
        residual.arg() * fs / (2.0 * PI * n as f64)
    } else {
        degenerate = true;
        0.0
    };

    if degenerate {
        log::warn!("carrier offset correlation vanished; estimate falls back to zero");
    }
    Ok(CfoEstimate { coarse, fine, total: coarse + fine, degenerate })
}

/// Counter-rotates by `offset_hz` using absolute sample index as time.
pub fn derotate(x: &[Complex64], offset_hz: f64, sample_rate: f64) -> Vec<Complex64> {
    let step = -2.0 * PI * offset_hz / sample_rate;
    x.iter()
        .enumerate()
        .map(|(i, v)| v * Complex64::from_polar(1.0, step * i as f64))
        .collect()
}
