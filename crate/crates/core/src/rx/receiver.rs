use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::frame::{bits_to_text, FrameSpec};
use super::sync::{
    coarse_candidates, coarse_sync, correct_cfo, equalize, estimate_cfo, estimate_channel, fine_sync, track_phase,
    CoarseSync,
};
use crate::error::Result;
use crate::modem::{decision_reference, demap_symbols};
use crate::shaping::{matched_filter, sample_symbols};
use crate::signal::{evm_rms, measure_ber, IqSignal};

const MAX_CANDIDATES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RxReport {
    pub coarse_offset_samples: usize,
    pub coarse_metric: f64,
    pub cfo_hat_hz: f64,
    /// First preamble symbol peak in input-sample coordinates.
    pub fine_offset_samples: usize,
    pub peak_to_sidelobe: f64,
    pub channel_gain: Complex64,
    /// Equalized payload symbols.
    pub symbols: Vec<Complex64>,
    pub bits: Vec<u8>,
    pub message_text: Option<String>,
    pub evm_pct: f64,
    pub ber: Option<f64>,
    /// Low-confidence notes from any stage; decoding continues regardless.
    pub flags: Vec<String>,
}

struct Attempt {
    coarse: CoarseSync,
    cfo_hz: f64,
    cfo_low: bool,
    mf: IqSignal,
    fine: super::sync::FineSync,
}

/// Coarse sync, CFO, fine sync, single-tap channel, decision-directed phase
/// tracking, demap and text decode.
/// Each detected doubled preamble is tried; the one whose fine correlation
/// with the local sequence is largest wins.
pub fn run_receiver(signal: &IqSignal, spec: &FrameSpec, truth_bits: Option<&[u8]>) -> Result<RxReport> {
    spec.validate()?;
    let l = spec.seq_len_samples();
    let seq = spec.sequence()?;
    let shape = spec.pulse();
    let gd = shape.group_delay_samples();
    let sps = spec.sps;
    let mut flags = Vec::new();

    let mut cands = coarse_candidates(signal, l)?;
    if cands.is_empty() {
        flags.push("coarse sync: metric below detection threshold".to_string());
        cands.push(coarse_sync(signal, l)?);
    }
    cands.truncate(MAX_CANDIDATES);

    let mut best: Option<Attempt> = None;
    for c in cands {
        let cfo = estimate_cfo(signal, c.start, l)?;
        let mf = matched_filter(&correct_cfo(signal, cfo.cfo_hz), &shape)?;
        let centre = c.start + gd;
        let search = centre.saturating_sub(l / 4)..centre + l / 4 + 1;
        let Ok(fine) = fine_sync(&mf.samples, &seq, spec.preamble.repeats, sps, search) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| fine.peak > b.fine.peak) {
            best = Some(Attempt {
                coarse: c,
                cfo_hz: cfo.cfo_hz,
                cfo_low: cfo.low_confidence,
                mf,
                fine,
            });
        }
    }
    let a = best.ok_or(crate::error::VlabError::InsufficientSamples {
        needed: spec.total_symbols() * sps,
        got: signal.len(),
    })?;
    if a.cfo_low {
        flags.push("cfo: correlation metric below threshold".to_string());
    }
    if a.fine.low_confidence {
        flags.push(format!("fine sync: peak-to-sidelobe {:.2}", a.fine.peak_to_sidelobe));
    }

    let n_pre = spec.preamble_symbols();
    let pre = sample_symbols(&a.mf.samples, a.fine.start, sps, n_pre, 0);
    let chips: Vec<f64> = (0..n_pre).map(|k| seq.chips[k % seq.len()] as f64).collect();
    let h = estimate_channel(&pre, &chips)?;

    let scheme = spec.payload.scheme;
    let q_delay = if scheme.is_offset() { sps / 2 } else { 0 };
    let raw = sample_symbols(
        &a.mf.samples,
        a.fine.start + n_pre * sps,
        sps,
        spec.payload_symbols(),
        q_delay,
    );
    if a.fine.start + (n_pre + spec.payload_symbols()) * sps > a.mf.len() {
        flags.push("payload: frame truncated".to_string());
    }
    let symbols = track_phase(&equalize(&raw, h), scheme);
    let mut bits = demap_symbols(&symbols, scheme);
    bits.truncate(spec.payload.n_bits);
    let reference = decision_reference(&symbols, scheme);
    let evm_pct = evm_rms(&symbols, &reference)?;
    let ber = match truth_bits {
        Some(t) => Some(measure_ber(t, &bits)?.rate),
        None => None,
    };
    let message_text = spec.payload.n_bits.is_multiple_of(8).then(|| bits_to_text(&bits));
    Ok(RxReport {
        coarse_offset_samples: a.coarse.start,
        coarse_metric: a.coarse.metric,
        cfo_hat_hz: a.cfo_hz,
        fine_offset_samples: a.fine.start - gd,
        peak_to_sidelobe: a.fine.peak_to_sidelobe,
        channel_gain: h,
        symbols,
        bits,
        message_text,
        evm_pct,
        ber,
        flags,
    })
}
