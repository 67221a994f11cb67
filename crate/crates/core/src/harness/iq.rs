//! Raw IQ files: interleaved little-endian `f32` I/Q pairs with no header,
//! plus a `key = value` sidecar named `<file>.meta`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::dsp::Complex64;
use crate::ofdm::Waveform;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IqMetadata {
    pub sample_rate: f64,
    pub center_frequency: f64,
    pub marker: usize,
    pub samples: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

pub fn encode_iq(samples: &[Complex64]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(samples.len() * 8);
    for s in samples {
        bytes.extend_from_slice(&(s.re as f32).to_le_bytes());
        bytes.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    bytes
}

pub fn decode_iq(bytes: &[u8]) -> Option<Vec<Complex64>> {
    if bytes.len() % 8 != 0 {
        return None;
    }
    let f = |b: &[u8]| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
    Some(bytes.chunks_exact(8).map(|c| Complex64::new(f(&c[..4]), f(&c[4..]))).collect())
}

pub fn export_iq(w: &Waveform, center_frequency: f64, path: &Path) -> Result<IqMetadata> {
    fs::write(path, encode_iq(&w.samples)).map_err(io_err(path))?;
    let meta = IqMetadata {
        sample_rate: w.sample_rate,
        center_frequency,
        marker: w.marker,
        samples: w.samples.len(),
    };
    let side = sidecar_path(path);
    let mut f = fs::File::create(&side).map_err(io_err(&side))?;
    write!(
        f,
        "format = cf32_le\nsample_rate = {}\ncenter_frequency = {}\nmarker = {}\nsamples = {}\n",
        meta.sample_rate, meta.center_frequency, meta.marker, meta.samples
    )
    .map_err(io_err(&side))?;
    Ok(meta)
}

pub fn import_iq(path: &Path) -> Result<(Waveform, IqMetadata)> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(io_err(&side))?;
    let parse_err = |message: String| Error::Parse { path: side.clone(), message };
    let mut fields = std::collections::HashMap::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (k, v) = line.split_once('=').ok_or_else(|| parse_err(format!("expected key = value, got {line:?}")))?;
        fields.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |key: &str| fields.get(key).ok_or_else(|| parse_err(format!("missing {key}")));
    let num = |key: &str| -> Result<f64> { get(key)?.parse().map_err(|e| parse_err(format!("{key}: {e}"))) };
    let int = |key: &str| -> Result<usize> { get(key)?.parse().map_err(|e| parse_err(format!("{key}: {e}"))) };
    if get("format")? != "cf32_le" {
        return Err(parse_err("unsupported format".into()));
    }
    let meta = IqMetadata {
        sample_rate: num("sample_rate")?,
        center_frequency: num("center_frequency")?,
        marker: int("marker")?,
        samples: int("samples")?,
    };
    let bytes = fs::read(path).map_err(io_err(path))?;
    let samples = decode_iq(&bytes).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        message: format!("length {} is not a whole number of I/Q pairs", bytes.len()),
    })?;
    if samples.len() != meta.samples {
        return Err(parse_err(format!("sidecar says {} samples, file has {}", meta.samples, samples.len())));
    }
    Ok((Waveform { samples, sample_rate: meta.sample_rate, marker: meta.marker }, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_layout() {
        let bytes = encode_iq(&[Complex64::new(1.0, -2.0)]);
        assert_eq!(bytes, [1.0f32.to_le_bytes(), (-2.0f32).to_le_bytes()].concat());
    }

    #[test]
    fn size_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.cf32");
        let samples: Vec<Complex64> = (0..4000).map(|i| Complex64::new(i as f64 * 0.1, -(i as f64).sqrt())).collect();
        let w = Waveform { samples, sample_rate: 20e6, marker: 320 };
        export_iq(&w, 5e9, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 32_000);
        let (back, meta) = import_iq(&path).unwrap();
        assert_eq!(meta.marker, 320);
        assert_eq!(meta.center_frequency, 5e9);
        assert_eq!(encode_iq(&back.samples), bytes);
        for (a, b) in back.samples.iter().zip(&w.samples) {
            assert_eq!(a.re, f64::from(b.re as f32));
            assert_eq!(a.im, f64::from(b.im as f32));
        }
    }

    #[test]
    fn empty_waveform() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.cf32");
        let w = Waveform { samples: vec![], sample_rate: 20e6, marker: 0 };
        export_iq(&w, 5e9, &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 0);
        let (back, meta) = import_iq(&path).unwrap();
        assert!(back.samples.is_empty());
        assert_eq!(meta.samples, 0);
    }

    #[test]
    fn missing_file_names_path() {
        let err = import_iq(Path::new("/nonexistent/q.cf32")).unwrap_err();
        assert!(err.to_string().contains("q.cf32"));
    }
}
