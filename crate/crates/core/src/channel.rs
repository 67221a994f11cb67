//! Line-of-sight Rician channel between the emitter and a receiver.
//!
//! The received payload symbol `m` seen after the receiver's DFT is
//! `h' X[k] exp(-j 2 pi f_k R0 / c) exp(j 2 pi f_D m T) + W[k, m]`, with
//! `h' = h exp(-j 2 pi f_c R0 / c)`. The waveform path realizes this
//! sample by sample; [`analytic_urx_grid`] writes it down directly.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, complex_gaussian, derive_seed, rng_from_seed, Complex64};
use crate::ofdm::{self, FrameGrid, OfdmConfig, Waveform};
use crate::spoof::{self, SpoofSchedule};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// How the diffuse (Rayleigh) component evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    /// One draw for the whole frame.
    #[default]
    Block,
    /// Independent draw per sample.
    PerSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// Emitter range at the start of the frame, meters.
    pub initial_range_m: f64,
    /// Radial velocity, m/s, positive when approaching.
    pub velocity_mps: f64,
    /// Rician K factor; `inf` for a pure line-of-sight channel.
    pub rician_k: f64,
    /// Signal-to-noise ratio at the receiver, dB; `inf` for noiseless.
    pub snr_db: f64,
    /// Line-of-sight phase, radians. Drawn uniformly from the seed when absent.
    pub phase_rad: Option<f64>,
    pub fading: Fading,
    pub seed: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            initial_range_m: 0.0,
            velocity_mps: 0.0,
            rician_k: f64::INFINITY,
            snr_db: f64::INFINITY,
            phase_rad: Some(0.0),
            fading: Fading::Block,
            seed: 0,
        }
    }
}

impl ChannelParams {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn delay_s(&self) -> f64 {
        self.initial_range_m / SPEED_OF_LIGHT
    }

    pub fn doppler_hz(&self, cfg: &OfdmConfig) -> f64 {
        doppler_from_velocity(self.velocity_mps, cfg.carrier_frequency)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Noise power for a given mean received signal power.
    pub fn noise_power(&self, signal_power: f64) -> f64 {
        if self.snr_db.is_infinite() && self.snr_db > 0.0 {
            0.0
        } else {
            signal_power / 10f64.powf(self.snr_db / 10.0)
        }
    }

    fn los_weights(&self) -> (f64, f64) {
        let k = self.rician_k;
        if k.is_infinite() {
            (1.0, 0.0)
        } else {
            ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
        }
    }

    fn los_phase<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // always consume the draw so the diffuse stream does not depend on it
        let drawn = rng.random_range(0.0..2.0 * PI);
        self.phase_rad.unwrap_or(drawn)
    }

    /// Complex gain `h` held over a block-faded frame (no Doppler, no range
    /// phase), with unit mean power.
    pub fn block_gain(&self) -> Complex64 {
        let mut rng = rng_from_seed(derive_seed(self.seed, 1));
        let phi = self.los_phase(&mut rng);
        let (los, diffuse) = self.los_weights();
        let g = complex_gaussian(&mut rng, 1.0);
        Complex64::from_polar(los, phi) + g * diffuse
    }
}

/// `f_D = f_c v / c`.
pub fn doppler_from_velocity(velocity_mps: f64, carrier_hz: f64) -> f64 {
    carrier_hz * velocity_mps / SPEED_OF_LIGHT
}

/// Received power predicted by free-space path loss with isotropic antennas,
/// watts. Report-only; the simulation normalizes received power to one.
pub fn friis_received_power(tx_power_w: f64, carrier_hz: f64, range_m: f64) -> f64 {
    let wavelength = SPEED_OF_LIGHT / carrier_hz;
    tx_power_w * (wavelength / (4.0 * PI * range_m)).powi(2)
}

/// Samples of the Rician gain process
/// `sqrt(K/(K+1)) exp(j(2 pi f_D t + phi)) + sqrt(1/(K+1)) g(t)` with unit
/// total power.
pub fn rician_gain(p: &ChannelParams, n_samples: usize, cfg: &OfdmConfig) -> Result<Vec<Complex64>> {
    if n_samples == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = rng_from_seed(derive_seed(p.seed, 1));
    let phi = p.los_phase(&mut rng);
    let (los, diffuse) = p.los_weights();
    let fd = p.doppler_hz(cfg);
    let fs = cfg.sample_rate();
    let block = complex_gaussian(&mut rng, 1.0);
    Ok((0..n_samples)
        .map(|n| {
            let g = match p.fading {
                Fading::Block => block,
                Fading::PerSample if n == 0 => block,
                Fading::PerSample => complex_gaussian(&mut rng, 1.0),
            };
            Complex64::from_polar(los, 2.0 * PI * fd * n as f64 / fs + phi) + g * diffuse
        })
        .collect())
}

fn check_delay(p: &ChannelParams, cfg: &OfdmConfig) -> Result<()> {
    let delay = p.delay_s();
    if !(delay >= 0.0 && delay < cfg.cp_duration()) {
        return Err(Error::DelayExceedsCp {
            delay_s: delay,
            cp_s: cfg.cp_duration(),
        });
    }
    Ok(())
}

/// Mean power of the payload span (the whole waveform when it has none).
pub fn reference_power(w: &Waveform, cfg: &OfdmConfig) -> f64 {
    let n_symbols = w.payload_symbols(cfg);
    if n_symbols == 0 {
        dsp::mean_power(&w.samples)
    } else {
        dsp::mean_power(&w.samples[w.marker..w.marker + n_symbols * cfg.symbol_len()])
    }
}

/// Rotates every sample by `exp(j 2 pi offset t)`, `t = index / f_s`.
pub fn apply_frequency_offset(w: &Waveform, offset_hz: f64) -> Waveform {
    let step = 2.0 * PI * offset_hz / w.sample_rate;
    let samples = w
        .samples
        .iter()
        .enumerate()
        .map(|(i, x)| x * Complex64::from_polar(1.0, step * i as f64))
        .collect();
    Waveform { samples, ..w.clone() }
}

/// Passes a framed waveform through the channel.
///
/// The range delay is applied as a circular delay of every cyclic block
/// (exact while it stays inside the cyclic prefix), Doppler as a continuous
/// rotation with `t = index / f_s`, and noise at `snr_db` below the mean
/// transmitted payload power.
pub fn apply_channel_waveform(w: &Waveform, p: &ChannelParams, cfg: &OfdmConfig) -> Result<Waveform> {
    check_delay(p, cfg)?;
    let signal_power = reference_power(w, cfg);
    let mut samples = w.samples.clone();
    let blocks = ofdm::frame_blocks(w.marker, w.payload_symbols(cfg), cfg);
    ofdm::apply_circular_delay(&mut samples, &blocks, p.delay_s(), cfg)?;

    let carrier_phase = Complex64::from_polar(1.0, -2.0 * PI * cfg.carrier_frequency * p.delay_s());
    let step = 2.0 * PI * p.doppler_hz(cfg) / cfg.sample_rate();
    match p.fading {
        Fading::Block => {
            let h = p.block_gain() * carrier_phase;
            for (i, x) in samples.iter_mut().enumerate() {
                *x *= h * Complex64::from_polar(1.0, step * i as f64);
            }
        }
        Fading::PerSample => {
            let mut rng = rng_from_seed(derive_seed(p.seed, 1));
            let phi = p.los_phase(&mut rng);
            let (los, diffuse) = p.los_weights();
            let first = complex_gaussian(&mut rng, 1.0);
            for (i, x) in samples.iter_mut().enumerate() {
                let g = if i == 0 { first } else { complex_gaussian(&mut rng, 1.0) };
                let h = (Complex64::from_polar(los, phi) + g * diffuse) * carrier_phase;
                *x *= h * Complex64::from_polar(1.0, step * i as f64);
            }
        }
    }

    let noise_power = p.noise_power(signal_power);
    let samples = dsp::awgn(&samples, noise_power, derive_seed(p.seed, 2))?;
    Ok(Waveform { samples, ..w.clone() })
}

/// Doppler treatment in the analytic grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DopplerModel {
    /// One phase per symbol, `exp(j 2 pi f_D m T_slow)`; rotation inside a
    /// symbol is neglected.
    PerSymbol,
    /// Rotation inside each DFT window included: absolute-time phase at the
    /// window start plus the inter-carrier leakage kernel.
    #[default]
    Exact,
}

/// Leakage kernel `(1/N) sum_n exp(j 2 pi (d + nu) n / N)` for d = 0..N.
fn leakage_kernel(nu: f64, n: usize) -> Vec<Complex64> {
    let nf = n as f64;
    (0..n)
        .map(|d| {
            let alpha = d as f64 + nu;
            let den = (PI * alpha / nf).sin();
            if den.abs() < 1e-12 {
                // alpha is a multiple of N
                Complex64::from_polar(1.0, PI * alpha * (nf - 1.0) / nf)
                    * ((PI * alpha).cos() / (PI * alpha / nf).cos())
            } else {
                Complex64::from_polar((PI * alpha).sin() / (nf * den), PI * alpha * (nf - 1.0) / nf)
            }
        })
        .collect()
}

/// Receiver DFT grid written down in closed form: spoof, range ramp,
/// channel gain, Doppler and complex noise. Assumes the frame layout
/// produced by [`ofdm::modulate_grid`] (payload right after the preamble)
/// and block fading.
pub fn analytic_urx_grid(
    grid: &FrameGrid,
    p: &ChannelParams,
    sched: &SpoofSchedule,
    cfg: &OfdmConfig,
    seed: u64,
    model: DopplerModel,
) -> Result<FrameGrid> {
    check_delay(p, cfg)?;
    if p.fading != Fading::Block {
        return Err(Error::Config("analytic grid requires block fading".into()));
    }
    let n = cfg.n_subcarriers;
    let spoofed = spoof::apply_spoof(grid, sched, cfg)?;
    let ramp = ofdm::delay_ramp(p.delay_s(), cfg);
    let h = p.block_gain() * Complex64::from_polar(1.0, -2.0 * PI * cfg.carrier_frequency * p.delay_s());
    let fd = p.doppler_hz(cfg);
    let fs = cfg.sample_rate();
    let kernel = leakage_kernel(fd / cfg.subcarrier_spacing, n);

    let mut out = spoofed.clone();
    let mut delayed = vec![Complex64::default(); n];
    for m in 0..grid.n_symbols() {
        for k in 0..n {
            delayed[k] = spoofed.symbols[[k, m]] * ramp[k];
        }
        match model {
            DopplerModel::PerSymbol => {
                let rot = h * Complex64::from_polar(1.0, 2.0 * PI * fd * m as f64 * cfg.slow_time_period());
                for k in 0..n {
                    out.symbols[[k, m]] = delayed[k] * rot;
                }
            }
            DopplerModel::Exact => {
                let window_start = ofdm::PREAMBLE_LEN + m * cfg.symbol_len() + cfg.cp_samples;
                let rot = h * Complex64::from_polar(1.0, 2.0 * PI * fd * window_start as f64 / fs);
                for l in 0..n {
                    let acc: Complex64 = (0..n).map(|k| delayed[k] * kernel[(k + n - l) % n]).sum();
                    out.symbols[[l, m]] = acc * rot;
                }
            }
        }
    }

    let signal_power = spoofed.energy() / (n * grid.n_symbols()).max(1) as f64;
    let noise_power = p.noise_power(signal_power);
    if noise_power > 0.0 {
        let mut rng = rng_from_seed(seed);
        out.symbols
            .iter_mut()
            .for_each(|x| *x += complex_gaussian(&mut rng, noise_power));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::ConstellationOrder;
    use crate::ofdm::{assemble_frame, modulate_grid, SubcarrierAllocation};
    use crate::spoof::SpoofProfile;

    fn frame(n_symbols: usize, seed: u64) -> (OfdmConfig, FrameGrid) {
        let c = OfdmConfig::default();
        let a = SubcarrierAllocation::standard(&c).unwrap();
        let mut rng = rng_from_seed(seed);
        let bits: Vec<u8> = (0..a.bits_per_frame(ConstellationOrder::Qpsk, n_symbols))
            .map(|_| rng.random_range(0..2u8))
            .collect();
        (c, assemble_frame(&bits, ConstellationOrder::Qpsk, n_symbols, &c, &a).unwrap())
    }

    #[test]
    fn doppler_arithmetic() {
        assert_eq!(doppler_from_velocity(0.0, 5e9), 0.0);
        let f30 = doppler_from_velocity(30.0, 5e9);
        assert!((f30 - 500.346_5).abs() < 1e-3, "{f30}");
        assert_eq!(doppler_from_velocity(60.0, 5e9), 2.0 * f30);
    }

    #[test]
    fn los_only_gain_is_constant() {
        let c = OfdmConfig::default();
        let g = rician_gain(&ChannelParams::ideal(), 128, &c).unwrap();
        assert!(g.iter().all(|x| (x - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        assert!(rician_gain(&ChannelParams::ideal(), 0, &c).is_err());
    }

    #[test]
    fn rayleigh_mean_power() {
        let c = OfdmConfig::default();
        let p = ChannelParams {
            rician_k: 0.0,
            fading: Fading::PerSample,
            seed: 11,
            ..ChannelParams::default()
        };
        let g = rician_gain(&p, 100_000, &c).unwrap();
        assert!((dsp::mean_power(&g) - 1.0).abs() < 0.02);
    }

    #[test]
    fn rician_power_split() {
        let c = OfdmConfig::default();
        let p = ChannelParams {
            rician_k: 10.0,
            fading: Fading::PerSample,
            phase_rad: Some(0.4),
            seed: 12,
            ..ChannelParams::default()
        };
        let g = rician_gain(&p, 100_000, &c).unwrap();
        let mean = g.iter().sum::<Complex64>() / g.len() as f64;
        let fraction = mean.norm_sqr() / dsp::mean_power(&g);
        assert!((fraction / (10.0 / 11.0) - 1.0).abs() < 0.02, "{fraction}");
    }

    #[test]
    fn ideal_channel_is_identity() {
        let (c, g) = frame(5, 1);
        let w = modulate_grid(&g, &c).unwrap();
        let out = apply_channel_waveform(&w, &ChannelParams::ideal(), &c).unwrap();
        assert_eq!(out.marker, w.marker);
        for (a, b) in out.samples.iter().zip(&w.samples) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn delay_beyond_cp_rejected() {
        let (c, g) = frame(2, 1);
        let w = modulate_grid(&g, &c).unwrap();
        let p = ChannelParams {
            initial_range_m: 300.0,
            ..ChannelParams::default()
        };
        assert!(matches!(
            apply_channel_waveform(&w, &p, &c),
            Err(Error::DelayExceedsCp { .. })
        ));
    }

    #[test]
    fn range_ramp_slope() {
        let (c, g) = frame(3, 2);
        let w = modulate_grid(&g, &c).unwrap();
        let p = ChannelParams {
            initial_range_m: 40.0,
            ..ChannelParams::default()
        };
        let out = apply_channel_waveform(&w, &p, &c).unwrap();
        let rx = ofdm::demodulate_waveform(&out, 3, &c, &g.allocation).unwrap();
        // independent arithmetic: 312.5 kHz * 40 m / c cycles per bin
        let slope = -2.0 * PI * 312_500.0 * 40.0 / 299_792_458.0;
        assert!((slope + 2.0 * PI * 0.041_695_6).abs() < 1e-6);
        for m in 0..3 {
            for k in 1..28usize {
                let q0 = rx.symbols[[k, m]] / g.symbols[[k, m]];
                let q1 = rx.symbols[[k + 1, m]] / g.symbols[[k + 1, m]];
                let step = (q1 / q0).arg();
                assert!((step - slope).abs() < 1e-9, "k={k} step={step}");
            }
        }
    }

    #[test]
    fn snr_is_calibrated() {
        let (c, g) = frame(50, 3);
        let w = modulate_grid(&g, &c).unwrap();
        for snr_db in [0.0, 10.0, 30.0] {
            let p = ChannelParams {
                snr_db,
                seed: 21,
                ..ChannelParams::default()
            };
            let noisy = apply_channel_waveform(&w, &p, &c).unwrap();
            let clean = apply_channel_waveform(&w, &ChannelParams { snr_db: f64::INFINITY, ..p }, &c).unwrap();
            let span = w.marker..w.marker + 4000;
            let noise: Vec<Complex64> = noisy.samples[span.clone()]
                .iter()
                .zip(&clean.samples[span.clone()])
                .map(|(a, b)| a - b)
                .collect();
            let measured = 10.0 * (dsp::mean_power(&clean.samples[span]) / dsp::mean_power(&noise)).log10();
            assert!((measured - snr_db).abs() < 0.2, "{snr_db} -> {measured}");
        }
    }

    #[test]
    fn doppler_rotation_preserves_magnitude() {
        let (c, g) = frame(4, 4);
        let w = modulate_grid(&g, &c).unwrap();
        let p = ChannelParams {
            velocity_mps: 45.0,
            ..ChannelParams::default()
        };
        let out = apply_channel_waveform(&w, &p, &c).unwrap();
        for (a, b) in out.samples.iter().zip(&w.samples) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn static_channel_is_scalar_gain() {
        let (c, g) = frame(4, 5);
        let w = modulate_grid(&g, &c).unwrap();
        let p = ChannelParams {
            rician_k: 3.0,
            phase_rad: None,
            seed: 9,
            ..ChannelParams::default()
        };
        let out = apply_channel_waveform(&w, &p, &c).unwrap();
        let h = p.block_gain();
        for (a, b) in out.samples.iter().zip(&w.samples) {
            assert!((a - b * h).norm() < 1e-12);
        }
    }

    #[test]
    fn analytic_identity() {
        let (c, g) = frame(4, 6);
        let out = analytic_urx_grid(&g, &ChannelParams::ideal(), &SpoofSchedule::identity(4), &c, 0, DopplerModel::Exact)
            .unwrap();
        for (a, b) in out.symbols.iter().zip(g.symbols.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn analytic_slow_time_phase_advance() {
        let (c, g) = frame(6, 7);
        let p = ChannelParams {
            velocity_mps: 30.0,
            ..ChannelParams::default()
        };
        let sched = SpoofSchedule::single(6, SpoofProfile::new(0.0, 12e3));
        let out = analytic_urx_grid(&g, &p, &sched, &c, 0, DopplerModel::PerSymbol).unwrap();
        let fd = p.doppler_hz(&c);
        let want = 2.0 * PI * (fd + 12e3) * 4e-6;
        for m in 1..6 {
            let q = (out.symbols[[5, m]] / g.symbols[[5, m]]) / (out.symbols[[5, m - 1]] / g.symbols[[5, m - 1]]);
            assert!((q.arg() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn leakage_kernel_sums_to_window_phase() {
        let k = leakage_kernel(0.0, 64);
        assert!((k[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(k[1..].iter().all(|x| x.norm() < 1e-12));
        // brute force for a fractional offset
        let nu = 0.013;
        let k = leakage_kernel(nu, 64);
        for (d, kd) in k.iter().enumerate() {
            let brute: Complex64 = (0..64)
                .map(|n| Complex64::from_polar(1.0, 2.0 * PI * (d as f64 + nu) * n as f64 / 64.0))
                .sum::<Complex64>()
                / 64.0;
            assert!((kd - brute).norm() < 1e-12);
        }
    }

    #[test]
    fn friis_falls_with_square_of_range() {
        let a = friis_received_power(1.0, 5e9, 10.0);
        let b = friis_received_power(1.0, 5e9, 20.0);
        assert!((a / b - 4.0).abs() < 1e-12);
    }
}
