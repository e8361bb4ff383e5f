use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::msequence::{default_poly, gen_msequence, MSequence};
use crate::error::{Result, VlabError};
use crate::modem::{map_bits, ModulationScheme, SymbolStream};
use crate::shaping::{pulse_shape, PulseShape};
use crate::signal::{IqSignal, SimRng};

fn default_repeats() -> usize {
    2
}

fn default_init() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreambleSpec {
    pub degree: u32,
    /// Defaults to the built-in primitive polynomial for `degree`.
    #[serde(default)]
    pub poly: Option<u32>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_init")]
    pub init: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayloadSpec {
    pub scheme: ModulationScheme,
    pub n_bits: usize,
}

/// Preamble of repeated BPSK m-sequences followed by the payload, one pulse
/// shape for both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub preamble: PreambleSpec,
    pub payload: PayloadSpec,
    pub shape: PulseShape,
    /// Overrides `shape.sps`.
    pub sps: usize,
}

impl FrameSpec {
    /// Two length-63 sequences, RRC 0.35, 8 samples per symbol.
    pub fn standard(scheme: ModulationScheme, n_bits: usize) -> Self {
        FrameSpec {
            preamble: PreambleSpec {
                degree: 6,
                poly: None,
                repeats: 2,
                init: 1,
            },
            payload: PayloadSpec { scheme, n_bits },
            shape: PulseShape::rrc(0.35),
            sps: 8,
        }
    }

    pub fn pulse(&self) -> PulseShape {
        self.shape.with_sps(self.sps)
    }

    pub fn sequence(&self) -> Result<MSequence> {
        let p = self.preamble;
        gen_msequence(p.degree, p.poly.map_or_else(|| default_poly(p.degree), Ok)?, p.init)
    }

    pub fn validate(&self) -> Result<()> {
        if self.preamble.repeats < 2 {
            return Err(VlabError::param(
                "repeats",
                "at least two back-to-back sequences required",
            ));
        }
        if self.payload.n_bits == 0 {
            return Err(VlabError::param("n_bits", "must be positive"));
        }
        self.pulse().validate()?;
        self.sequence()?;
        Ok(())
    }

    pub fn preamble_symbols(&self) -> usize {
        ((1usize << self.preamble.degree) - 1) * self.preamble.repeats
    }

    pub fn payload_symbols(&self) -> usize {
        let s = self.payload.scheme;
        self.payload.n_bits.div_ceil(s.bits_per_symbol()) + usize::from(s.is_differential())
    }

    pub fn total_symbols(&self) -> usize {
        self.preamble_symbols() + self.payload_symbols()
    }

    /// Correlation lag of the coarse stage, in samples.
    pub fn seq_len_samples(&self) -> usize {
        ((1usize << self.preamble.degree) - 1) * self.sps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxFrame {
    pub signal: IqSignal,
    pub symbols: Vec<Complex64>,
    /// Sample index of the first preamble symbol's peak.
    pub first_peak_sample: usize,
    pub payload_bits: Vec<u8>,
}

/// Symbols of a frame: preamble chips then the mapped payload.
pub fn frame_symbols(payload_bits: &[u8], spec: &FrameSpec, rng: &mut SimRng) -> Result<Vec<Complex64>> {
    spec.validate()?;
    if payload_bits.len() != spec.payload.n_bits {
        return Err(VlabError::LengthMismatch {
            left: payload_bits.len(),
            right: spec.payload.n_bits,
        });
    }
    let seq = spec.sequence()?;
    let mut symbols: Vec<Complex64> = Vec::with_capacity(spec.total_symbols());
    for _ in 0..spec.preamble.repeats {
        symbols.extend(seq.chips.iter().map(|&c| Complex64::new(c as f64, 0.0)));
    }
    symbols.extend(map_bits(payload_bits, spec.payload.scheme, rng)?.symbols);
    Ok(symbols)
}

pub fn build_frame(payload_bits: &[u8], spec: &FrameSpec, sample_rate_hz: f64, rng: &mut SimRng) -> Result<TxFrame> {
    let symbols = frame_symbols(payload_bits, spec, rng)?;
    let stream = SymbolStream {
        symbols: symbols.clone(),
        scheme: spec.payload.scheme,
        carries_memory_state: spec.payload.scheme.carries_memory_state(),
        data_bits: payload_bits.len(),
        pad_bits: 0,
    };
    let shape = spec.pulse();
    let shaped = pulse_shape(&stream, &shape, sample_rate_hz)?;
    Ok(TxFrame {
        signal: shaped.signal.with_label("frame"),
        symbols,
        first_peak_sample: shape.group_delay_samples(),
        payload_bits: payload_bits.to_vec(),
    })
}

/// 8-bit extended ASCII (Latin-1), most significant bit first.
pub fn text_to_bits(text: &str) -> Result<Vec<u8>> {
    let mut bits = Vec::with_capacity(text.len() * 8);
    for ch in text.chars() {
        let code = ch as u32;
        if code > 0xFF {
            return Err(VlabError::param("text", format!("`{ch}` is outside the 8-bit charset")));
        }
        bits.extend((0..8).rev().map(|i| ((code >> i) & 1) as u8));
    }
    Ok(bits)
}

/// Inverse of [`text_to_bits`]; a trailing partial byte is dropped.
pub fn bits_to_text(bits: &[u8]) -> String {
    bits.chunks_exact(8)
        .map(|b| char::from(b.iter().fold(0u8, |acc, &v| (acc << 1) | (v & 1))))
        .collect()
}
