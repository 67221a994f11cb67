//! 802.11-style OFDM framing: subcarrier allocation, training preamble,
//! cyclic-prefixed symbol synthesis and the matching DFT demodulator.
//!
//! Grid row `k` is DFT bin `k`. Bins at or above `N/2` carry the negative
//! baseband frequencies, so subcarrier `k` sits at `signed(k) * df`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, qam_map, Complex64, ConstellationOrder};
use crate::{Error, Result};

/// Samples in the short training sequence (10 x 16).
pub const STS_LEN: usize = 160;
/// Samples in the long training sequence (32-sample guard + 2 x 64).
pub const LTS_LEN: usize = 160;
pub const PREAMBLE_LEN: usize = STS_LEN + LTS_LEN;
/// Short training period in samples.
pub const STS_PERIOD: usize = 16;
const LTS_GUARD: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    /// Hz.
    pub subcarrier_spacing: f64,
    pub cp_samples: usize,
    /// Hz.
    pub carrier_frequency: f64,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: 64,
            subcarrier_spacing: 312_500.0,
            cp_samples: 16,
            carrier_frequency: 5.0e9,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers < 2 {
            return Err(Error::Config(format!("n_subcarriers = {}", self.n_subcarriers)));
        }
        if self.cp_samples >= self.n_subcarriers {
            return Err(Error::Config(format!(
                "cp_samples {} must be below n_subcarriers {}",
                self.cp_samples, self.n_subcarriers
            )));
        }
        if !(self.subcarrier_spacing > 0.0 && self.subcarrier_spacing.is_finite()) {
            return Err(Error::Config(format!("subcarrier_spacing = {}", self.subcarrier_spacing)));
        }
        if !(self.carrier_frequency > 0.0 && self.carrier_frequency.is_finite()) {
            return Err(Error::Config(format!("carrier_frequency = {}", self.carrier_frequency)));
        }
        Ok(())
    }

    /// `f_s = N * df`.
    pub fn sample_rate(&self) -> f64 {
        self.n_subcarriers as f64 * self.subcarrier_spacing
    }

    /// Useful symbol duration `T_N = N / f_s = 1 / df`.
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.subcarrier_spacing
    }

    /// Symbol-to-symbol period including the cyclic prefix.
    pub fn slow_time_period(&self) -> f64 {
        self.symbol_len() as f64 / self.sample_rate()
    }

    pub fn cp_duration(&self) -> f64 {
        self.cp_samples as f64 / self.sample_rate()
    }

    pub fn symbol_len(&self) -> usize {
        self.n_subcarriers + self.cp_samples
    }

    /// Signed subcarrier index of DFT bin `k`.
    pub fn signed_index(&self, k: usize) -> i64 {
        let n = self.n_subcarriers as i64;
        let k = k as i64;
        if k >= n / 2 {
            k - n
        } else {
            k
        }
    }

    /// Baseband frequency of DFT bin `k`, Hz.
    pub fn subcarrier_frequency(&self, k: usize) -> f64 {
        self.signed_index(k) as f64 * self.subcarrier_spacing
    }

    /// DFT bin of signed subcarrier index `s`.
    pub fn bin(&self, s: i64) -> usize {
        s.rem_euclid(self.n_subcarriers as i64) as usize
    }
}

/// Which DFT bins carry data, pilots, or nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierAllocation {
    /// Data bins in mapping order.
    pub data: Vec<usize>,
    pub pilots: Vec<usize>,
    pub pilot_values: Vec<Complex64>,
    pub nulls: Vec<usize>,
    n: usize,
}

impl SubcarrierAllocation {
    /// Builds an allocation; nulls are every bin not listed as data or pilot.
    pub fn new(n: usize, data: Vec<usize>, pilots: Vec<usize>, pilot_values: Vec<Complex64>) -> Result<Self> {
        if pilots.len() != pilot_values.len() {
            return Err(Error::Config("one pilot value per pilot bin required".into()));
        }
        let mut used = vec![false; n];
        for &k in data.iter().chain(&pilots) {
            if k >= n || used[k] {
                return Err(Error::Config(format!("subcarrier {k} out of range or listed twice")));
            }
            used[k] = true;
        }
        let nulls = (0..n).filter(|&k| !used[k]).collect();
        Ok(Self {
            data,
            pilots,
            pilot_values,
            nulls,
            n,
        })
    }

    /// 64-bin layout with 52 data, 4 pilots at +-7, +-21 and 8 nulls (DC
    /// plus the band edges), all pilots fixed at +1.
    pub fn standard(cfg: &OfdmConfig) -> Result<Self> {
        if cfg.n_subcarriers != 64 {
            return Err(Error::UnsupportedSubcarriers(cfg.n_subcarriers));
        }
        let pilot_signed = [-21i64, -7, 7, 21];
        let data = (-28i64..=28)
            .filter(|s| *s != 0 && !pilot_signed.contains(s))
            .map(|s| cfg.bin(s))
            .collect();
        let pilots = pilot_signed.iter().map(|&s| cfg.bin(s)).collect();
        Self::new(64, data, pilots, vec![Complex64::new(1.0, 0.0); 4])
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n
    }

    /// Data and pilot bins, ascending.
    pub fn active(&self) -> Vec<usize> {
        let mut a: Vec<usize> = self.data.iter().chain(&self.pilots).copied().collect();
        a.sort_unstable();
        a
    }

    pub fn is_active(&self, k: usize) -> bool {
        !self.nulls.contains(&k)
    }

    pub fn bits_per_frame(&self, order: ConstellationOrder, n_symbols: usize) -> usize {
        self.data.len() * n_symbols * order.bits_per_symbol()
    }
}

/// Frequency-domain frame: rows are subcarriers, columns are OFDM symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGrid {
    pub symbols: Array2<Complex64>,
    pub allocation: SubcarrierAllocation,
}

impl FrameGrid {
    pub fn zeros(allocation: SubcarrierAllocation, n_symbols: usize) -> Self {
        let n = allocation.n_subcarriers();
        Self {
            symbols: Array2::zeros((n, n_symbols)),
            allocation,
        }
    }

    pub fn n_subcarriers(&self) -> usize {
        self.symbols.nrows()
    }

    pub fn n_symbols(&self) -> usize {
        self.symbols.ncols()
    }

    pub fn energy(&self) -> f64 {
        self.symbols.iter().map(|x| x.norm_sqr()).sum()
    }
}

/// Sampled complex baseband signal. `marker` is the index of the first
/// sample (cyclic prefix included) of payload symbol 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub marker: usize,
}

impl Waveform {
    /// Number of complete payload symbols after the marker.
    pub fn payload_symbols(&self, cfg: &OfdmConfig) -> usize {
        self.samples.len().saturating_sub(self.marker) / cfg.symbol_len()
    }

    /// Index of the first preamble sample, if the preamble fits before the
    /// marker.
    pub fn preamble_start(&self) -> Option<usize> {
        self.marker.checked_sub(PREAMBLE_LEN)
    }
}

/// Short training sequence on signed subcarriers -26..=26, scaled by sqrt(13/6).
const STS_SEQ: [(i64, f64); 12] = [
    (-24, 1.0),
    (-20, -1.0),
    (-16, 1.0),
    (-12, -1.0),
    (-8, -1.0),
    (-4, 1.0),
    (4, -1.0),
    (8, -1.0),
    (12, 1.0),
    (16, 1.0),
    (20, 1.0),
    (24, 1.0),
];

/// Long training sequence on signed subcarriers -26..=26, extended with the
/// high-throughput values at +-27, +-28 so every active bin is sounded.
const LTS_SEQ: [i8; 57] = [
    1, 1, // -28, -27
    1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, // -26..-1
    0, // DC
    1, -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1, // 1..26
    -1, -1, // 27, 28
];

/// STS frequency-domain content on the 64 DFT bins.
pub fn sts_spectrum(cfg: &OfdmConfig) -> Result<Vec<Complex64>> {
    if cfg.n_subcarriers != 64 {
        return Err(Error::UnsupportedSubcarriers(cfg.n_subcarriers));
    }
    let a = (13.0f64 / 6.0).sqrt();
    let mut s = vec![Complex64::default(); 64];
    for &(idx, sign) in &STS_SEQ {
        s[cfg.bin(idx)] = Complex64::new(sign * a, sign * a);
    }
    Ok(s)
}

/// LTS frequency-domain content on the 64 DFT bins (+-1 on every active bin).
pub fn lts_spectrum(cfg: &OfdmConfig) -> Result<Vec<Complex64>> {
    if cfg.n_subcarriers != 64 {
        return Err(Error::UnsupportedSubcarriers(cfg.n_subcarriers));
    }
    let mut l = vec![Complex64::default(); 64];
    for (i, &v) in LTS_SEQ.iter().enumerate() {
        l[cfg.bin(i as i64 - 28)] = Complex64::new(f64::from(v), 0.0);
    }
    Ok(l)
}

/// `x[n] = (1/sqrt(N)) sum_k X[k] exp(j 2 pi n k / N)`.
pub(crate) fn synthesize(spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
    let scale = (spectrum.len() as f64).sqrt();
    let mut x = dsp::idft(spectrum)?;
    x.iter_mut().for_each(|v| *v *= scale);
    Ok(x)
}

/// `X[k] = (1/sqrt(N)) sum_n x[n] exp(-j 2 pi n k / N)`.
pub(crate) fn analyze(samples: &[Complex64]) -> Result<Vec<Complex64>> {
    let scale = 1.0 / (samples.len() as f64).sqrt();
    let mut x = dsp::dft(samples)?;
    x.iter_mut().for_each(|v| *v *= scale);
    Ok(x)
}

/// Short plus long training waveform: 320 samples (16 us) at 20 MHz. The
/// marker points one past the end, where payload symbol 0 would start.
pub fn build_preamble(cfg: &OfdmConfig) -> Result<Waveform> {
    let short = synthesize(&sts_spectrum(cfg)?)?;
    let long = synthesize(&lts_spectrum(cfg)?)?;
    let mut samples = Vec::with_capacity(PREAMBLE_LEN);
    samples.extend((0..STS_LEN).map(|n| short[n % 64]));
    samples.extend_from_slice(&long[64 - LTS_GUARD..]);
    samples.extend_from_slice(&long);
    samples.extend_from_slice(&long);
    Ok(Waveform {
        samples,
        sample_rate: cfg.sample_rate(),
        marker: PREAMBLE_LEN,
    })
}

/// Maps payload bits onto the data bins, column by column, and fills pilots
/// and nulls.
pub fn assemble_frame(
    payload_bits: &[u8],
    order: ConstellationOrder,
    n_symbols: usize,
    cfg: &OfdmConfig,
    alloc: &SubcarrierAllocation,
) -> Result<FrameGrid> {
    if alloc.n_subcarriers() != cfg.n_subcarriers {
        return Err(Error::Dimension {
            expected: format!("{} subcarriers", cfg.n_subcarriers),
            got: format!("{}", alloc.n_subcarriers()),
        });
    }
    let needed = alloc.bits_per_frame(order, n_symbols);
    if payload_bits.len() != needed {
        return Err(Error::Dimension {
            expected: format!("{needed} payload bits"),
            got: format!("{}", payload_bits.len()),
        });
    }
    let points = qam_map(payload_bits, order)?;
    let mut grid = FrameGrid::zeros(alloc.clone(), n_symbols);
    let per_symbol = alloc.data.len();
    for m in 0..n_symbols {
        for (i, &k) in alloc.data.iter().enumerate() {
            grid.symbols[[k, m]] = points[m * per_symbol + i];
        }
        for (&k, &p) in alloc.pilots.iter().zip(&alloc.pilot_values) {
            grid.symbols[[k, m]] = p;
        }
    }
    Ok(grid)
}

/// Preamble followed by one cyclic-prefixed symbol per grid column.
pub fn modulate_grid(grid: &FrameGrid, cfg: &OfdmConfig) -> Result<Waveform> {
    let n = cfg.n_subcarriers;
    if grid.n_subcarriers() != n {
        return Err(Error::Dimension {
            expected: format!("{n} subcarriers"),
            got: format!("{}", grid.n_subcarriers()),
        });
    }
    let mut w = build_preamble(cfg)?;
    w.samples.reserve(grid.n_symbols() * cfg.symbol_len());
    for col in grid.symbols.columns() {
        let spectrum: Vec<Complex64> = col.iter().copied().collect();
        let body = synthesize(&spectrum)?;
        w.samples.extend_from_slice(&body[n - cfg.cp_samples..]);
        w.samples.extend_from_slice(&body);
    }
    Ok(w)
}

/// DFT of `n_symbols` consecutive CP-stripped symbols starting at `start`.
pub(crate) fn demodulate_at(
    samples: &[Complex64],
    start: usize,
    n_symbols: usize,
    cfg: &OfdmConfig,
) -> Result<Array2<Complex64>> {
    let n = cfg.n_subcarriers;
    let needed = start + n_symbols * cfg.symbol_len();
    if samples.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            have: samples.len(),
        });
    }
    let mut out = Array2::zeros((n, n_symbols));
    let mut buf = vec![Complex64::default(); n];
    let scale = 1.0 / (n as f64).sqrt();
    for m in 0..n_symbols {
        let s = start + m * cfg.symbol_len() + cfg.cp_samples;
        buf.copy_from_slice(&samples[s..s + n]);
        dsp::dft_in_place(&mut buf)?;
        for (k, v) in buf.iter().enumerate() {
            out[[k, m]] = v * scale;
        }
    }
    Ok(out)
}

/// Strips cyclic prefixes at the waveform marker and returns the DFT grid.
pub fn demodulate_waveform(
    w: &Waveform,
    n_symbols: usize,
    cfg: &OfdmConfig,
    alloc: &SubcarrierAllocation,
) -> Result<FrameGrid> {
    Ok(FrameGrid {
        symbols: demodulate_at(&w.samples, w.marker, n_symbols, cfg)?,
        allocation: alloc.clone(),
    })
}

/// A DFT-sized body preceded by `cp_len` samples that repeat its tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub body_start: usize,
    pub cp_len: usize,
}

/// Cyclic block structure of a frame: the short training sequence viewed as
/// two 16+64 blocks, the long training guard and its two symbols, then the
/// payload symbols. The preamble is included when it fits before `marker`.
pub fn frame_blocks(marker: usize, n_symbols: usize, cfg: &OfdmConfig) -> Vec<Block> {
    let mut blocks = Vec::with_capacity(n_symbols + 4);
    if cfg.n_subcarriers == 64 {
        if let Some(s) = marker.checked_sub(PREAMBLE_LEN) {
            blocks.push(Block { body_start: s + 16, cp_len: 16 });
            blocks.push(Block { body_start: s + 96, cp_len: 16 });
            blocks.push(Block { body_start: s + STS_LEN + LTS_GUARD, cp_len: LTS_GUARD });
            blocks.push(Block { body_start: s + STS_LEN + LTS_GUARD + 64, cp_len: 0 });
        }
    }
    for m in 0..n_symbols {
        blocks.push(Block {
            body_start: marker + m * cfg.symbol_len() + cfg.cp_samples,
            cp_len: cfg.cp_samples,
        });
    }
    blocks
}

/// Phase ramp `exp(-j 2 pi f_k delay)` over the DFT bins.
pub fn delay_ramp(delay_s: f64, cfg: &OfdmConfig) -> Vec<Complex64> {
    (0..cfg.n_subcarriers)
        .map(|k| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * cfg.subcarrier_frequency(k) * delay_s))
        .collect()
}

/// Delays every block circularly by `delay_s` (a linear phase across its
/// spectrum) and rewrites each cyclic prefix from the delayed body. This is
/// the band-limited delay the receiver sees when the delay is shorter than
/// the cyclic prefix.
pub fn apply_circular_delay(
    samples: &mut [Complex64],
    blocks: &[Block],
    delay_s: f64,
    cfg: &OfdmConfig,
) -> Result<()> {
    if delay_s == 0.0 {
        return Ok(());
    }
    let n = cfg.n_subcarriers;
    let ramp = delay_ramp(delay_s, cfg);
    let mut buf = vec![Complex64::default(); n];
    for b in blocks {
        let end = b.body_start + n;
        if b.body_start < b.cp_len || end > samples.len() {
            return Err(Error::InsufficientSamples {
                needed: end,
                have: samples.len(),
            });
        }
        buf.copy_from_slice(&samples[b.body_start..end]);
        dsp::dft_in_place(&mut buf)?;
        buf.iter_mut().zip(&ramp).for_each(|(x, r)| *x *= r);
        dsp::idft_in_place(&mut buf)?;
        samples[b.body_start..end].copy_from_slice(&buf);
        let (cp_dst, body) = samples[b.body_start - b.cp_len..end].split_at_mut(b.cp_len);
        cp_dst.copy_from_slice(&body[n - b.cp_len..]);
    }
    Ok(())
}
