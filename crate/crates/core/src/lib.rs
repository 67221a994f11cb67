//! Simulation toolkit for range-Doppler spoofing of 802.11-style OFDM
//! emitters.
//!
//! The transmit chain builds a frequency-domain frame grid, multiplies it by
//! a per-subcarrier, per-symbol spoofing phase surface, and synthesizes a
//! cyclic-prefixed waveform behind a standard short/long training preamble.
//! The waveform crosses a line-of-sight Rician channel with range delay and
//! Doppler. Two receivers consume it:
//!
//! * the legitimate receiver ([`rx::lrx`]) synchronizes, removes the carrier
//!   offset, equalizes from the long training symbols, tracks common phase on
//!   the pilots and demaps, so bit error rate can be measured;
//! * the passive tracking receiver ([`rx::urx`]) keeps the raw per-symbol DFT
//!   grid, strips the modulation with its own symbol decisions and forms a
//!   2D range-Doppler map whose peak lands on the true-plus-spoofed range and
//!   Doppler.
//!
//! [`harness`] wires the pieces into reproducible, seeded experiments.

pub mod channel;
pub mod dsp;
mod error;
pub mod harness;
pub mod ofdm;
pub mod rx;
pub mod spoof;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
