use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("transform input is empty")]
    EmptyInput,

    #[error("bit count {bits} is not a multiple of {per_symbol} bits per symbol")]
    BitCount { bits: usize, per_symbol: usize },

    #[error("noise power must be non-negative and finite, got {0}")]
    NoisePower(f64),

    #[error("preamble sequences are defined for 64 subcarriers, got {0}")]
    UnsupportedSubcarriers(usize),

    #[error("invalid OFDM configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },

    #[error("waveform too short: need {needed} samples, have {have}")]
    InsufficientSamples { needed: usize, have: usize },

    #[error("delay {delay_s:e} s exceeds the cyclic prefix duration {cp_s:e} s")]
    DelayExceedsCp { delay_s: f64, cp_s: f64 },

    #[error("no frame detected")]
    NoFrameDetected,

    #[error("invalid experiment configuration: {0}")]
    InvalidExperiment(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
