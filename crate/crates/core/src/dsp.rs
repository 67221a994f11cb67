//! Numeric kernels shared by every stage: discrete Fourier transforms,
//! Gray-coded constellations and seeded complex white noise.

use std::cell::RefCell;

pub use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward DFT in place, `Y[l] = sum_n v[n] exp(-j 2 pi l n / L)`, unnormalized.
pub fn dft_in_place(v: &mut [Complex64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(v.len()));
    fft.process(v);
    Ok(())
}

/// Inverse DFT in place, including the `1/L` factor.
pub fn idft_in_place(v: &mut [Complex64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(v.len()));
    fft.process(v);
    let scale = 1.0 / v.len() as f64;
    v.iter_mut().for_each(|x| *x *= scale);
    Ok(())
}

pub fn dft(v: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out = v.to_vec();
    dft_in_place(&mut out)?;
    Ok(out)
}

pub fn idft(v: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out = v.to_vec();
    idft_in_place(&mut out)?;
    Ok(out)
}

/// Mean of `|v[n]|^2`; zero for an empty slice.
pub fn mean_power(v: &[Complex64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().map(|x| x.norm_sqr()).sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationOrder {
    Bpsk,
    Qpsk,
    Qam16,
}

/// Gray-coded 4-PAM levels indexed by the two-bit value `b0 b1`.
const PAM4: [f64; 4] = [-3.0, -1.0, 3.0, 1.0];

impl ConstellationOrder {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            ConstellationOrder::Bpsk => 1,
            ConstellationOrder::Qpsk => 2,
            ConstellationOrder::Qam16 => 4,
        }
    }

    /// Constellation point for the symbol whose bits, read MSB first, form
    /// `index`.
    pub fn point(self, index: usize) -> Complex64 {
        match self {
            ConstellationOrder::Bpsk => {
                if index & 1 == 1 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(-1.0, 0.0)
                }
            }
            ConstellationOrder::Qpsk => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let i = if index & 0b10 != 0 { s } else { -s };
                let q = if index & 0b01 != 0 { s } else { -s };
                Complex64::new(i, q)
            }
            ConstellationOrder::Qam16 => {
                let scale = 1.0 / 10f64.sqrt();
                let i = PAM4[(index >> 2) & 0b11];
                let q = PAM4[index & 0b11];
                Complex64::new(i * scale, q * scale)
            }
        }
    }

    pub fn points(self) -> Vec<Complex64> {
        (0..1usize << self.bits_per_symbol()).map(|i| self.point(i)).collect()
    }
}

/// Maps bits (0/1, MSB first within a symbol) onto unit-average-power
/// constellation points.
pub fn qam_map(bits: &[u8], order: ConstellationOrder) -> Result<Vec<Complex64>> {
    let per = order.bits_per_symbol();
    if bits.len() % per != 0 {
        return Err(Error::BitCount {
            bits: bits.len(),
            per_symbol: per,
        });
    }
    Ok(bits
        .chunks_exact(per)
        .map(|chunk| {
            let index = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b != 0));
            order.point(index)
        })
        .collect())
}

/// Hard nearest-point decision. Returns the bits and the decided point.
///
/// Candidates are scanned in index order with a strict comparison, so a tie
/// resolves to the smaller Gray index.
pub fn qam_demap(sym: Complex64, order: ConstellationOrder) -> (Vec<u8>, Complex64) {
    let (index, point) = decide(sym, order);
    let per = order.bits_per_symbol();
    let bits = (0..per).rev().map(|s| ((index >> s) & 1) as u8).collect();
    (bits, point)
}

pub(crate) fn decide(sym: Complex64, order: ConstellationOrder) -> (usize, Complex64) {
    let mut best = (0usize, order.point(0));
    let mut best_d = (sym - best.1).norm_sqr();
    for i in 1..1usize << order.bits_per_symbol() {
        let p = order.point(i);
        let d = (sym - p).norm_sqr();
        if d < best_d {
            best = (i, p);
            best_d = d;
        }
    }
    best
}

/// Nearest constellation point by per-axis slicing; agrees with [`decide`]
/// away from decision boundaries.
pub(crate) fn slice(sym: Complex64, order: ConstellationOrder) -> Complex64 {
    let sign = |x: f64| if x < 0.0 { -1.0 } else { 1.0 };
    match order {
        ConstellationOrder::Bpsk => Complex64::new(sign(sym.re), 0.0),
        ConstellationOrder::Qpsk => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            Complex64::new(sign(sym.re) * s, sign(sym.im) * s)
        }
        ConstellationOrder::Qam16 => {
            let scale = 10f64.sqrt();
            let level = |x: f64| (2.0 * (x * scale / 2.0).floor() + 1.0).clamp(-3.0, 3.0) / scale;
            Complex64::new(level(sym.re), level(sym.im))
        }
    }
}

/// Seeded RNG used for every stochastic draw in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a parent seed and a stream index
/// (splitmix64 finalizer over the pair).
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    let mut z = parent ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Circularly-symmetric complex Gaussian draw with total variance `power`.
pub(crate) fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, power: f64) -> Complex64 {
    let s = (power / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Adds complex white Gaussian noise of total variance `noise_power`
/// (split equally between I and Q).
pub fn awgn(v: &[Complex64], noise_power: f64, seed: u64) -> Result<Vec<Complex64>> {
    if !(noise_power >= 0.0) || !noise_power.is_finite() {
        return Err(Error::NoisePower(noise_power));
    }
    if noise_power == 0.0 {
        return Ok(v.to_vec());
    }
    let mut rng = rng_from_seed(seed);
    Ok(v.iter()
        .map(|&x| x + complex_gaussian(&mut rng, noise_power))
        .collect())
}
