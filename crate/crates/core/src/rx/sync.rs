//! Frame timing from the cyclic structure of the frame.
//!
//! Detection uses the 16-sample periodicity of the short training sequence.
//! Fine timing maximizes the lag-64 correlation over the long training
//! symbols and every payload cyclic prefix. Both statistics only depend on
//! where the cyclic blocks start, so a delay absorbed by the cyclic prefix
//! does not move the returned marker.

use crate::dsp::Complex64;
use crate::ofdm::{OfdmConfig, Waveform, PREAMBLE_LEN, STS_LEN, STS_PERIOD};
use crate::{Error, Result};

const DETECT_WINDOW: usize = 128;
const DETECT_THRESHOLD: f64 = 0.12;
const SEARCH_RADIUS: usize = 48;

/// Normalized lag-16 autocorrelation metric at every start index.
fn periodicity_metric(x: &[Complex64]) -> Vec<f64> {
    let lag = STS_PERIOD;
    if x.len() < DETECT_WINDOW + lag {
        return Vec::new();
    }
    let count = x.len() - DETECT_WINDOW - lag + 1;
    let mut out = Vec::with_capacity(count);
    let mut p: Complex64 = (0..DETECT_WINDOW).map(|n| x[n].conj() * x[n + lag]).sum();
    let mut r: f64 = (0..DETECT_WINDOW).map(|n| x[n + lag].norm_sqr()).sum();
    for d in 0..count {
        out.push(if r > 0.0 { p.norm_sqr() / (r * r) } else { 0.0 });
        if d + 1 < count {
            let old = d;
            let new = d + DETECT_WINDOW;
            p += x[new].conj() * x[new + lag] - x[old].conj() * x[old + lag];
            r += x[new + lag].norm_sqr() - x[old + lag].norm_sqr();
        }
    }
    out
}

/// Rough start of the short training sequence, or `None` when the
/// periodicity metric never clears the threshold. The metric is flat over
/// the starts where the window lies fully inside the sequence, so its
/// maximum is only located to within half that plateau.
fn detect(x: &[Complex64]) -> Option<usize> {
    let metric = periodicity_metric(x);
    let (best, peak) = metric
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (d, &m)| if m > acc.1 { (d, m) } else { acc });
    if peak <= DETECT_THRESHOLD {
        return None;
    }
    let half_plateau = (STS_LEN - STS_PERIOD - DETECT_WINDOW) / 2;
    Some(best.saturating_sub(half_plateau))
}

/// Lag-N correlation statistic for a candidate payload start: coherent
/// correlation magnitude minus half the energy of the paired samples.
fn timing_metric(x: &[Complex64], marker: usize, n_symbols: usize, cfg: &OfdmConfig) -> f64 {
    let n = cfg.n_subcarriers;
    let mut gamma = Complex64::default();
    let mut energy = 0.0;
    let mut add_pairs = |start: usize, len: usize| {
        for a in start..start + len {
            if a + n >= x.len() {
                break;
            }
            gamma += x[a].conj() * x[a + n];
            energy += 0.5 * (x[a].norm_sqr() + x[a + n].norm_sqr());
        }
    };
    if n == 64 {
        if let Some(lts) = marker.checked_sub(PREAMBLE_LEN - STS_LEN) {
            add_pairs(lts, 96);
        }
    }
    for m in 0..n_symbols {
        add_pairs(marker + m * cfg.symbol_len(), cfg.cp_samples);
    }
    gamma.norm() - energy
}

/// Index of the first payload sample.
pub fn synchronize(w: &Waveform, n_symbols: usize, cfg: &OfdmConfig) -> Result<usize> {
    let x = &w.samples;
    let sts = detect(x).ok_or(Error::NoFrameDetected)?;
    let nominal = sts + PREAMBLE_LEN;
    let lo = nominal.saturating_sub(SEARCH_RADIUS).max(PREAMBLE_LEN - STS_LEN);
    let hi = nominal + SEARCH_RADIUS;
    let best = (lo..=hi)
        .filter(|&c| c < x.len())
        .map(|c| (c, timing_metric(x, c, n_symbols, cfg)))
        .fold(None, |best: Option<(usize, f64)>, cand| match best {
            Some(b) if b.1 >= cand.1 => Some(b),
            _ => Some(cand),
        });
    best.map(|(c, _)| c).ok_or(Error::NoFrameDetected)
}
