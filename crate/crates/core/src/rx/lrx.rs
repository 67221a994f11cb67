//! Legitimate receiver: synchronize, remove the carrier offset, equalize
//! against the long training symbols, track common phase on the pilots and
//! demap.

use std::f64::consts::PI;

use crate::dsp::{self, Complex64, ConstellationOrder};
use crate::ofdm::{
    self, analyze, lts_spectrum, FrameGrid, OfdmConfig, SubcarrierAllocation, Waveform, PREAMBLE_LEN,
};
use crate::{Error, Result, SPEED_OF_LIGHT};

use super::cfo::{derotate, moose_cfo, CfoEstimate};
use super::sync::synchronize;

/// Per-bin least-squares channel estimate; zero on bins without training.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub gains: Vec<Complex64>,
}

impl ChannelEstimate {
    /// Averages the two long training symbols against the known spectrum.
    pub fn from_training(y1: &[Complex64], y2: &[Complex64], training: &[Complex64]) -> Self {
        let gains = training
            .iter()
            .zip(y1.iter().zip(y2))
            .map(|(&l, (&a, &b))| if l.norm_sqr() > 0.0 { (a + b) / (2.0 * l) } else { Complex64::default() })
            .collect();
        Self { gains }
    }

    /// Removes most of the estimation noise under a short delay-spread
    /// model. The dominant delay ramp is found by a matched search and taken
    /// out, each trained bin is averaged with its neighbours within
    /// `SMOOTH_SPAN` subcarriers, and the ramp is put back.
    pub fn smoothed(&self, cfg: &OfdmConfig) -> Self {
        let n = cfg.n_subcarriers as f64;
        let trained: Vec<(usize, f64)> = (0..self.gains.len())
            .filter(|&k| self.gains[k].norm_sqr() > 0.0)
            .map(|k| (k, cfg.signed_index(k) as f64))
            .collect();
        if trained.is_empty() {
            return self.clone();
        }
        let flatten = |tau: f64, s: f64| Complex64::from_polar(1.0, 2.0 * PI * s * tau / n);
        let response = |tau: f64| trained.iter().map(|&(k, s)| self.gains[k] * flatten(tau, s)).sum::<Complex64>().norm();

        let reach = cfg.cp_samples as f64;
        let steps = (4.0 * reach) as i64;
        let coarse = (-steps..=steps)
            .map(|i| i as f64 / 4.0)
            .fold((0.0, f64::NEG_INFINITY), |best, t| {
                let r = response(t);
                if r > best.1 { (t, r) } else { best }
            })
            .0;
        let (mut lo, mut hi) = (coarse - 0.25, coarse + 0.25);
        for _ in 0..40 {
            let a = lo + (hi - lo) / 3.0;
            let b = hi - (hi - lo) / 3.0;
            if response(a) < response(b) {
                lo = a;
            } else {
                hi = b;
            }
        }
        let tau = 0.5 * (lo + hi);

        let flat: Vec<Complex64> = trained.iter().map(|&(k, s)| self.gains[k] * flatten(tau, s)).collect();
        let mut gains = vec![Complex64::default(); self.gains.len()];
        for &(k, s) in &trained {
            let (sum, count) = trained
                .iter()
                .zip(&flat)
                .filter(|((_, t), _)| (t - s).abs() <= SMOOTH_SPAN)
                .fold((Complex64::default(), 0.0), |(acc, c), (_, &g)| (acc + g, c + 1.0));
            gains[k] = sum / count * flatten(-tau, s);
        }
        Self { gains }
    }
}

/// Decision-directed phase passes per symbol.
const PHASE_PASSES: usize = 2;

/// Half-width, in subcarriers, of the smoothing window.
const SMOOTH_SPAN: f64 = 16.0;

#[derive(Debug, Clone)]
pub struct LrxOutput {
    pub bits: Vec<u8>,
    /// Data cells hold hard decisions, pilot cells the known pilots, nulls zero.
    pub decided: FrameGrid,
    /// Equalized, phase-tracked grid before decisions.
    pub equalized: FrameGrid,
    pub marker: usize,
    pub cfo: CfoEstimate,
    pub channel: ChannelEstimate,
}

/// Per-symbol search for a residual delay left after equalizing with the
/// training-based channel estimate, expressed as a range offset.
///
/// Each candidate is scored by the decision error of the derotated,
/// phase-corrected symbol, data and pilots alike, weighted by channel power.
/// A coarse grid over `[-max_range_m, max_range_m]` is refined around its
/// best point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySearch {
    pub max_range_m: f64,
    pub coarse_step_m: f64,
    pub fine_step_m: f64,
}

impl DelaySearch {
    /// Residual delays up to just under one cyclic prefix.
    pub fn for_config(cfg: &OfdmConfig) -> Self {
        Self { max_range_m: 0.99 * cfg.cp_duration() * SPEED_OF_LIGHT, coarse_step_m: 2.0, fine_step_m: 0.125 }
    }
}

/// Precomputed pieces shared by every symbol of a frame.
struct Equalizer<'a> {
    alloc: &'a SubcarrierAllocation,
    order: ConstellationOrder,
    gains: &'a [Complex64],
    active: Vec<usize>,
    weights: Vec<f64>,
    /// Positions of the pilots within `active`, with their known values.
    pilots: Vec<(usize, Complex64)>,
    /// Whether each entry of `active` carries data.
    is_data: Vec<bool>,
    signed: Vec<f64>,
    ramp_step: f64,
}

impl<'a> Equalizer<'a> {
    fn new(alloc: &'a SubcarrierAllocation, order: ConstellationOrder, gains: &'a [Complex64], cfg: &OfdmConfig) -> Self {
        let active: Vec<usize> = alloc.active().into_iter().filter(|&k| gains[k].norm_sqr() > 0.0).collect();
        let pos = |k: usize| active.iter().position(|&a| a == k);
        let pilots = alloc
            .pilots
            .iter()
            .zip(&alloc.pilot_values)
            .filter_map(|(&k, &v)| pos(k).map(|i| (i, v)))
            .collect();
        let is_data = active.iter().map(|k| alloc.data.contains(k)).collect();
        Self {
            alloc,
            order,
            gains,
            weights: active.iter().map(|&k| gains[k].norm_sqr()).collect(),
            signed: active.iter().map(|&k| cfg.signed_index(k) as f64).collect(),
            active,
            pilots,
            is_data,
            ramp_step: 2.0 * PI * cfg.subcarrier_spacing / SPEED_OF_LIGHT,
        }
    }

    fn ramp(&self, range_m: f64) -> Vec<Complex64> {
        self.signed.iter().map(|s| Complex64::from_polar(1.0, self.ramp_step * range_m * s)).collect()
    }

    /// `raw / H` on the usable active bins.
    fn zero_forced(&self, raw: &[Complex64]) -> Vec<Complex64> {
        self.active.iter().map(|&k| raw[k] / self.gains[k]).collect()
    }

    /// Common-phase-corrected symbols for one ramp, and their decision cost.
    fn apply(&self, base: &[Complex64], ramp: &[Complex64], out: &mut [Complex64]) -> f64 {
        for ((o, b), r) in out.iter_mut().zip(base).zip(ramp) {
            *o = b * r;
        }
        let cpe: Complex64 = self.pilots.iter().map(|&(i, p)| out[i] * self.weights[i] * p.conj()).sum();
        if cpe.norm() > 0.0 {
            let derot = Complex64::from_polar(1.0, -cpe.arg());
            out.iter_mut().for_each(|o| *o *= derot);
        }
        let data: f64 = (0..out.len())
            .filter(|&i| self.is_data[i])
            .map(|i| self.weights[i] * (out[i] - dsp::slice(out[i], self.order)).norm_sqr())
            .sum();
        let pilots: f64 = self.pilots.iter().map(|&(i, p)| self.weights[i] * (out[i] - p).norm_sqr()).sum();
        data + pilots
    }

    /// Decision-directed refinement of the common phase: the pilot estimate
    /// is noisy with only a handful of pilots, so every active bin is
    /// correlated against its decision (or known pilot) and the symbol is
    /// derotated again.
    fn refine(&self, out: &mut [Complex64]) {
        for _ in 0..PHASE_PASSES {
            let pilots: Complex64 = self.pilots.iter().map(|&(i, p)| out[i] * self.weights[i] * p.conj()).sum();
            let data: Complex64 = (0..out.len())
                .filter(|&i| self.is_data[i])
                .map(|i| out[i] * self.weights[i] * dsp::slice(out[i], self.order).conj())
                .sum();
            let total = pilots + data;
            if total.norm() == 0.0 {
                return;
            }
            let derot = Complex64::from_polar(1.0, -total.arg());
            out.iter_mut().for_each(|o| *o *= derot);
        }
    }

    /// Equalized symbol scattered back to bin positions.
    fn scatter(&self, eq: &[Complex64]) -> Vec<Complex64> {
        let mut col = vec![Complex64::default(); self.alloc.n_subcarriers()];
        for (&k, &v) in self.active.iter().zip(eq) {
            col[k] = v;
        }
        col
    }
}

/// Coarse and fine candidate ramps for a frame.
struct RampBank {
    coarse: Vec<(f64, Vec<Complex64>)>,
    fine_offsets: Vec<f64>,
}

impl RampBank {
    fn new(eq: &Equalizer, search: &DelaySearch) -> Self {
        let steps = (search.max_range_m / search.coarse_step_m).floor() as i64;
        let coarse = (-steps..=steps)
            .map(|i| {
                let r = i as f64 * search.coarse_step_m;
                (r, eq.ramp(r))
            })
            .collect();
        let fine_steps = (search.coarse_step_m / search.fine_step_m).ceil() as i64;
        let fine_offsets = (-fine_steps..=fine_steps)
            .filter(|&i| i != 0)
            .map(|i| i as f64 * search.fine_step_m)
            .collect();
        Self { coarse, fine_offsets }
    }

    /// Best residual range for one symbol and its equalized values.
    fn search(&self, eq: &Equalizer, base: &[Complex64], max_range_m: f64) -> Vec<Complex64> {
        let mut scratch = vec![Complex64::default(); base.len()];
        let mut best = vec![Complex64::default(); base.len()];
        let mut best_cost = f64::INFINITY;
        let mut best_r = 0.0;
        // zero residual first so that ties keep the training-based equalizer
        let zero = self.coarse.len() / 2;
        let order = std::iter::once(zero).chain((0..self.coarse.len()).filter(|&i| i != zero));
        for i in order {
            let (r, ramp) = &self.coarse[i];
            let cost = eq.apply(base, ramp, &mut scratch);
            if cost < best_cost {
                best_cost = cost;
                best_r = *r;
                best.copy_from_slice(&scratch);
            }
        }
        let center = best_r;
        for off in &self.fine_offsets {
            let r = center + off;
            if r.abs() > max_range_m {
                continue;
            }
            let cost = eq.apply(base, &eq.ramp(r), &mut scratch);
            if cost < best_cost {
                best_cost = cost;
                best.copy_from_slice(&scratch);
            }
        }
        best
    }
}

pub fn lrx_demodulate(
    w: &Waveform,
    n_symbols: usize,
    order: ConstellationOrder,
    cfg: &OfdmConfig,
    alloc: &SubcarrierAllocation,
) -> Result<LrxOutput> {
    receive(w, n_symbols, order, cfg, alloc, None)
}

/// The legitimate chain, optionally with a per-symbol residual delay search
/// in place of the fixed training-based equalizer.
pub fn receive(
    w: &Waveform,
    n_symbols: usize,
    order: ConstellationOrder,
    cfg: &OfdmConfig,
    alloc: &SubcarrierAllocation,
    search: Option<&DelaySearch>,
) -> Result<LrxOutput> {
    if alloc.n_subcarriers() != cfg.n_subcarriers {
        return Err(Error::Dimension {
            expected: format!("{} subcarriers", cfg.n_subcarriers),
            got: alloc.n_subcarriers().to_string(),
        });
    }
    let marker = synchronize(w, n_symbols, cfg)?;
    let located = Waveform { marker, ..w.clone() };
    let cfo = moose_cfo(&located, n_symbols, cfg)?;
    let x = derotate(&w.samples, cfo.total, cfg.sample_rate());

    let n = cfg.n_subcarriers;
    let lts_body = marker - PREAMBLE_LEN + 192;
    let y1 = analyze(&x[lts_body..lts_body + n])?;
    let y2 = analyze(&x[lts_body + n..lts_body + 2 * n])?;
    let channel = ChannelEstimate::from_training(&y1, &y2, &lts_spectrum(cfg)?).smoothed(cfg);

    let raw = ofdm::demodulate_at(&x, marker, n_symbols, cfg)?;
    let mut equalized = FrameGrid::zeros(alloc.clone(), n_symbols);
    let mut decided = FrameGrid::zeros(alloc.clone(), n_symbols);
    let mut bits = Vec::with_capacity(alloc.bits_per_frame(order, n_symbols));

    let eq = Equalizer::new(alloc, order, &channel.gains, cfg);
    let bank = search.map(|s| (RampBank::new(&eq, s), s.max_range_m));
    let flat = vec![Complex64::new(1.0, 0.0); eq.active.len()];
    for m in 0..n_symbols {
        let column: Vec<Complex64> = raw.column(m).to_vec();
        let base = eq.zero_forced(&column);
        let mut fitted = match &bank {
            None => {
                let mut out = vec![Complex64::default(); base.len()];
                eq.apply(&base, &flat, &mut out);
                out
            }
            Some((bank, max_range)) => bank.search(&eq, &base, *max_range),
        };
        eq.refine(&mut fitted);
        let col = eq.scatter(&fitted);
        for k in alloc.active() {
            equalized.symbols[[k, m]] = col[k];
        }
        for &k in &alloc.data {
            let (index, point) = dsp::decide(col[k], order);
            decided.symbols[[k, m]] = point;
            let b = order.bits_per_symbol();
            bits.extend((0..b).rev().map(|i| ((index >> i) & 1) as u8));
        }
        for (&k, &p) in alloc.pilots.iter().zip(&alloc.pilot_values) {
            decided.symbols[[k, m]] = p;
        }
    }

    Ok(LrxOutput { bits, decided, equalized, marker, cfo, channel })
}
