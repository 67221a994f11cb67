//! Receiver chains.
//!
//! Both receivers share frame synchronization and carrier offset estimation.
//! The legitimate receiver equalizes and demaps; the tracking receiver keeps
//! the raw DFT grid, strips the modulation with decisions from its own
//! equalized branch and maps what remains onto range and Doppler.

pub mod cfo;
pub mod lrx;
pub mod rdmap;
pub mod sync;
pub mod urx;

pub use cfo::{moose_cfo, CfoEstimate};
pub use lrx::{lrx_demodulate, receive, ChannelEstimate, DelaySearch, LrxOutput};
pub use rdmap::{extract_peaks, range_doppler_map, PeakReport, RangeDopplerMap, RdOptions, Window};
pub use sync::synchronize;
pub use urx::{remove_symbols, urx_process, urx_raw_grid, UrxOutput};
