//! Tracking receiver. The decision branch reuses the legitimate chain; the
//! sensing branch keeps the unequalized grid so that range and Doppler stay
//! in the per-cell phase.

use crate::dsp::ConstellationOrder;
use crate::ofdm::{self, FrameGrid, OfdmConfig, SubcarrierAllocation, Waveform};
use crate::{Error, Result};

use super::lrx::{receive, DelaySearch, LrxOutput};
use super::rdmap::{range_doppler_map, RangeDopplerMap, RdOptions};
use super::sync::synchronize;

/// DFT grid at the synchronized marker with no offset correction or
/// equalization.
pub fn urx_raw_grid(
    w: &Waveform,
    n_symbols: usize,
    cfg: &OfdmConfig,
    alloc: &SubcarrierAllocation,
) -> Result<FrameGrid> {
    let marker = synchronize(w, n_symbols, cfg)?;
    Ok(FrameGrid { symbols: ofdm::demodulate_at(&w.samples, marker, n_symbols, cfg)?, allocation: alloc.clone() })
}

/// Cell-wise `raw / decided` on active cells; nulls and zero decisions give 0.
pub fn remove_symbols(raw: &FrameGrid, decided: &FrameGrid) -> Result<FrameGrid> {
    if raw.symbols.dim() != decided.symbols.dim() {
        let (rn, rm) = raw.symbols.dim();
        let (dn, dm) = decided.symbols.dim();
        return Err(Error::Dimension { expected: format!("{rn}x{rm}"), got: format!("{dn}x{dm}") });
    }
    let mut out = FrameGrid::zeros(raw.allocation.clone(), raw.n_symbols());
    for k in raw.allocation.active() {
        for m in 0..raw.n_symbols() {
            let d = decided.symbols[[k, m]];
            if d.norm_sqr() > 0.0 {
                out.symbols[[k, m]] = raw.symbols[[k, m]] / d;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct UrxOutput {
    pub raw: FrameGrid,
    pub quotient: FrameGrid,
    pub map: RangeDopplerMap,
    pub decisions: LrxOutput,
}

/// Full tracking chain: decisions, symbol removal and range-Doppler map.
/// The decision branch is the legitimate receiver, plus the residual delay
/// search when `opts.track_delay` is set.
pub fn urx_process(
    w: &Waveform,
    n_symbols: usize,
    order: ConstellationOrder,
    cfg: &OfdmConfig,
    alloc: &SubcarrierAllocation,
    opts: &RdOptions,
) -> Result<UrxOutput> {
    let search = opts.track_delay.then(|| DelaySearch::for_config(cfg));
    let decisions = receive(w, n_symbols, order, cfg, alloc, search.as_ref())?;
    let raw = FrameGrid {
        symbols: ofdm::demodulate_at(&w.samples, decisions.marker, n_symbols, cfg)?,
        allocation: alloc.clone(),
    };
    let quotient = remove_symbols(&raw, &decisions.decided)?;
    let map = range_doppler_map(&quotient, opts, cfg)?;
    Ok(UrxOutput { raw, quotient, map, decisions })
}
