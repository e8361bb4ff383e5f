//! Interleaved little-endian f32 IQ files with a `.meta.json` sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::IqSignal;
use crate::error::{Result, VlabError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqMeta {
    pub sample_rate_hz: f64,
    pub center_freq_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl IqMeta {
    pub fn for_signal(signal: &IqSignal, seed: Option<u64>) -> Self {
        Self {
            sample_rate_hz: signal.sample_rate_hz,
            center_freq_hz: signal.center_freq_hz,
            label: (!signal.label.is_empty()).then(|| signal.label.clone()),
            seed,
        }
    }
}

/// Sidecar path: same basename, extension replaced by `.meta.json`.
pub fn meta_path(iq_path: &Path) -> PathBuf {
    iq_path.with_extension("meta.json")
}

pub fn encode_iq(samples: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len() * 8);
    for s in samples {
        out.extend_from_slice(&(s.re as f32).to_le_bytes());
        out.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    out
}

pub fn decode_iq(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(VlabError::param(
            "iq",
            format!("byte length {} is not a multiple of 8", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            let i = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let q = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex64::new(i as f64, q as f64)
        })
        .collect())
}

pub fn write_iq(path: &Path, signal: &IqSignal, seed: Option<u64>) -> Result<()> {
    fs::write(path, encode_iq(&signal.samples))?;
    let meta = IqMeta::for_signal(signal, seed);
    fs::write(meta_path(path), serde_json::to_vec_pretty(&meta)?)?;
    Ok(())
}

pub fn read_iq(path: &Path) -> Result<(IqSignal, IqMeta)> {
    let meta: IqMeta = serde_json::from_slice(&fs::read(meta_path(path))?)?;
    let samples = decode_iq(&fs::read(path)?)?;
    let mut sig = IqSignal::new(samples, meta.sample_rate_hz)?.with_center_freq(meta.center_freq_hz);
    if let Some(l) = &meta.label {
        sig.label = l.clone();
    }
    Ok((sig, meta))
}
