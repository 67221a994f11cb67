//! Transmit chain shared by the runners: bits, framing, spoofing, modulation.

use rand::Rng;

use crate::dsp::{rng_from_seed, ConstellationOrder};
use crate::ofdm::{assemble_frame, modulate_grid, FrameGrid, OfdmConfig, SubcarrierAllocation, Waveform};
use crate::spoof::{apply_spoof, spoof_preamble, SpoofSchedule};
use crate::Result;

#[derive(Debug, Clone)]
pub struct Transmission {
    pub bits: Vec<u8>,
    /// Grid before spoofing.
    pub clean: FrameGrid,
    /// Grid actually modulated.
    pub spoofed: FrameGrid,
    pub waveform: Waveform,
}

pub fn random_bits(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

/// Frames `bits`, applies `sched` to payload and preamble and modulates.
pub fn transmit(
    bits: Vec<u8>,
    order: ConstellationOrder,
    sched: &SpoofSchedule,
    cfg: &OfdmConfig,
    alloc: &SubcarrierAllocation,
) -> Result<Transmission> {
    let clean = assemble_frame(&bits, order, sched.n_symbols, cfg, alloc)?;
    let spoofed = apply_spoof(&clean, sched, cfg)?;
    let mut waveform = modulate_grid(&spoofed, cfg)?;
    spoof_preamble(&mut waveform, sched, cfg)?;
    Ok(Transmission { bits, clean, spoofed, waveform })
}
