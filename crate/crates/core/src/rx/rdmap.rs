//! Range-Doppler map from a symbol-removed grid and peak extraction.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, Complex64};
use crate::ofdm::{FrameGrid, OfdmConfig};
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Rect,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RdOptions {
    pub pad_range: usize,
    pub pad_doppler: usize,
    pub window: Window,
    /// Let the tracking receiver's decision branch search a residual delay
    /// per symbol, so symbols carrying a different range than the preamble
    /// are still decided correctly.
    pub track_delay: bool,
}

impl Default for RdOptions {
    fn default() -> Self {
        Self { pad_range: 4, pad_doppler: 4, window: Window::Rect, track_delay: true }
    }
}

/// Magnitudes indexed `[range, doppler]`. The Doppler axis is centred, so
/// both axes increase monotonically with index.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    pub magnitudes: Array2<f64>,
    pub range_axis: Vec<f64>,
    pub doppler_axis: Vec<f64>,
    pub pad_range: usize,
    pub pad_doppler: usize,
}

impl RangeDopplerMap {
    pub fn shape(&self) -> (usize, usize) {
        self.magnitudes.dim()
    }

    /// Map cell closest to a range and Doppler value.
    pub fn nearest_cell(&self, range_m: f64, doppler_hz: f64) -> (usize, usize) {
        let nearest = |axis: &[f64], v: f64| {
            axis.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
                .map_or(0, |(i, _)| i)
        };
        (nearest(&self.range_axis, range_m), nearest(&self.doppler_axis, doppler_hz))
    }

    /// Largest magnitude within `cells` resolution cells of a target.
    pub fn max_near(&self, range_m: f64, doppler_hz: f64, cells: usize) -> f64 {
        let (p0, q0) = self.nearest_cell(range_m, doppler_hz);
        let (np, nq) = self.shape();
        let rr = (cells * self.pad_range) as i64;
        let rd = (cells * self.pad_doppler) as i64;
        let mut best = 0.0f64;
        for dp in -rr..=rr {
            for dq in -rd..=rd {
                let p = (p0 as i64 + dp).rem_euclid(np as i64) as usize;
                let q = (q0 as i64 + dq).rem_euclid(nq as i64) as usize;
                best = best.max(self.magnitudes[[p, q]]);
            }
        }
        best
    }
}

fn hann(x: f64) -> f64 {
    0.5 * (1.0 + (2.0 * PI * x).cos())
}

/// Inverse DFT over subcarriers (unnormalized, zero padded to `N*pad_range`)
/// then forward DFT over symbols (zero padded to `M*pad_doppler`).
pub fn range_doppler_map(quotient: &FrameGrid, opts: &RdOptions, cfg: &OfdmConfig) -> Result<RangeDopplerMap> {
    let (n, m) = quotient.symbols.dim();
    if n == 0 || m == 0 {
        return Err(Error::EmptyInput);
    }
    if n != cfg.n_subcarriers {
        return Err(Error::Dimension { expected: format!("{} subcarriers", cfg.n_subcarriers), got: n.to_string() });
    }
    if opts.pad_range == 0 || opts.pad_doppler == 0 {
        return Err(Error::Config("padding factors must be at least 1".into()));
    }
    let p_len = n * opts.pad_range;
    let q_len = m * opts.pad_doppler;

    let fast_w: Vec<f64> = (0..n)
        .map(|k| match opts.window {
            Window::Rect => 1.0,
            Window::Hann => hann(cfg.signed_index(k) as f64 / n as f64),
        })
        .collect();
    let slow_w: Vec<f64> = (0..m)
        .map(|i| match opts.window {
            Window::Hann if m > 1 => 0.5 * (1.0 - (2.0 * PI * i as f64 / (m - 1) as f64).cos()),
            _ => 1.0,
        })
        .collect();

    let mut profile = Array2::<Complex64>::zeros((p_len, m));
    let mut buf = vec![Complex64::default(); p_len];
    for col in 0..m {
        buf.fill(Complex64::default());
        for k in 0..n {
            let s = cfg.signed_index(k);
            buf[s.rem_euclid(p_len as i64) as usize] = quotient.symbols[[k, col]] * fast_w[k];
        }
        dsp::idft_in_place(&mut buf)?;
        for (p, v) in buf.iter().enumerate() {
            profile[[p, col]] = v * p_len as f64;
        }
    }

    let half = q_len / 2;
    let mut magnitudes = Array2::<f64>::zeros((p_len, q_len));
    let mut row = vec![Complex64::default(); q_len];
    for p in 0..p_len {
        row.fill(Complex64::default());
        for i in 0..m {
            row[i] = profile[[p, i]] * slow_w[i];
        }
        dsp::dft_in_place(&mut row)?;
        for j in 0..q_len {
            magnitudes[[p, j]] = row[(j + q_len - half) % q_len].norm();
        }
    }

    let t_slow = cfg.slow_time_period();
    let range_axis = (0..p_len)
        .map(|p| p as f64 * SPEED_OF_LIGHT / (cfg.subcarrier_spacing * p_len as f64))
        .collect();
    let doppler_axis = (0..q_len)
        .map(|j| (j as f64 - half as f64) / (t_slow * q_len as f64))
        .collect();
    Ok(RangeDopplerMap {
        magnitudes,
        range_axis,
        doppler_axis,
        pad_range: opts.pad_range,
        pad_doppler: opts.pad_doppler,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakReport {
    pub range_m: f64,
    pub doppler_hz: f64,
    pub magnitude: f64,
    pub cell: (usize, usize),
    /// Peak over the largest magnitude outside every reported peak's guard
    /// region, in dB. Infinite when nothing lies outside.
    pub peak_to_sidelobe_db: f64,
}

fn circular_distance(a: usize, b: usize, len: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(len - d)
}

/// Up to `n_peaks` local maxima in descending magnitude, each at least two
/// resolution cells (in either axis) from any stronger accepted peak.
pub fn extract_peaks(map: &RangeDopplerMap, n_peaks: usize) -> Vec<PeakReport> {
    let (np, nq) = map.shape();
    let mag = &map.magnitudes;
    let guard_p = 2 * map.pad_range;
    let guard_q = 2 * map.pad_doppler;

    let mut candidates = Vec::new();
    for p in 0..np {
        for q in 0..nq {
            let v = mag[[p, q]];
            if v <= 0.0 {
                continue;
            }
            let is_max = (-1i64..=1).all(|dp| {
                (-1i64..=1).all(|dq| {
                    let pp = (p as i64 + dp).rem_euclid(np as i64) as usize;
                    let qq = (q as i64 + dq).rem_euclid(nq as i64) as usize;
                    mag[[pp, qq]] <= v
                })
            });
            if is_max {
                candidates.push((p, q));
            }
        }
    }
    candidates.sort_by(|a, b| mag[[b.0, b.1]].total_cmp(&mag[[a.0, a.1]]));

    let in_guard = |a: (usize, usize), b: (usize, usize)| {
        circular_distance(a.0, b.0, np) <= guard_p && circular_distance(a.1, b.1, nq) <= guard_q
    };
    let mut accepted: Vec<(usize, usize)> = Vec::new();
    for c in candidates {
        if accepted.len() == n_peaks {
            break;
        }
        if accepted.iter().all(|&a| !in_guard(a, c)) {
            accepted.push(c);
        }
    }

    let mut sidelobe = 0.0f64;
    for p in 0..np {
        for q in 0..nq {
            if accepted.iter().all(|&a| !in_guard(a, (p, q))) {
                sidelobe = sidelobe.max(mag[[p, q]]);
            }
        }
    }

    accepted
        .into_iter()
        .map(|(p, q)| {
            let magnitude = mag[[p, q]];
            let peak_to_sidelobe_db = if sidelobe > 0.0 { 20.0 * (magnitude / sidelobe).log10() } else { f64::INFINITY };
            PeakReport {
                range_m: map.range_axis[p],
                doppler_hz: map.doppler_axis[q],
                magnitude,
                cell: (p, q),
                peak_to_sidelobe_db,
            }
        })
        .collect()
}
