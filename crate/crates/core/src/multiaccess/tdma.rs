use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VlabError};
use crate::modem::{map_bits, ModulationScheme, SymbolStream};
use crate::shaping::{pulse_shape, PulseShape};
use crate::signal::{db_to_amplitude, mean_power, IqSignal, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdmaSlot {
    pub user_id: u32,
    #[serde(default)]
    pub relative_power_db: f64,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdmaFrame {
    pub slot_len_symbols: usize,
    pub slots: Vec<TdmaSlot>,
    #[serde(default)]
    pub guard_symbols: usize,
}

impl TdmaFrame {
    pub fn period_symbols(&self) -> usize {
        self.slot_len_symbols + self.guard_symbols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotBoundary {
    pub user_id: u32,
    pub slot_index: usize,
    pub start_symbol: usize,
    /// Half a symbol before the first symbol's peak.
    pub start_sample: usize,
    pub len_samples: usize,
    pub relative_power_db: f64,
    pub data_bits: usize,
    pub pad_bits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdmaBurst {
    pub signal: IqSignal,
    pub slots: Vec<SlotBoundary>,
    pub sps: usize,
    /// Symbol 0 peak position.
    pub group_delay_samples: usize,
}

/// Bursts back to back, each followed by `guard_symbols` of silence. Short
/// payloads are filled to the slot with random bits so every slot has the
/// same duration; each burst is scaled by its relative power.
pub fn tdma_compose(
    frame: &TdmaFrame,
    scheme: ModulationScheme,
    shape: &PulseShape,
    sample_rate_hz: f64,
    rng: &mut SimRng,
) -> Result<TdmaBurst> {
    if frame.slots.is_empty() || frame.slot_len_symbols == 0 {
        return Err(VlabError::param("slots", "need at least one slot of nonzero length"));
    }
    let bps = scheme.bits_per_symbol();
    let lead = usize::from(scheme.is_differential());
    let capacity = (frame.slot_len_symbols - lead.min(frame.slot_len_symbols)) * bps;
    let sps = shape.sps;
    let half = sps / 2;
    let gd = shape.group_delay_samples();
    let mut symbols = Vec::new();
    let mut bounds = Vec::new();
    for (i, slot) in frame.slots.iter().enumerate() {
        if slot.payload.len() > capacity {
            return Err(VlabError::param(
                "payload",
                format!("slot {i} carries {} bits, capacity {capacity}", slot.payload.len()),
            ));
        }
        let mut bits = slot.payload.clone();
        bits.extend(rng.bits(capacity - slot.payload.len()));
        let st = map_bits(&bits, scheme, rng)?;
        let g = db_to_amplitude(slot.relative_power_db);
        let start_symbol = symbols.len();
        symbols.extend(st.symbols.iter().map(|s| s * g));
        symbols.resize(start_symbol + frame.slot_len_symbols, Complex64::new(0.0, 0.0));
        symbols.resize(start_symbol + frame.period_symbols(), Complex64::new(0.0, 0.0));
        bounds.push(SlotBoundary {
            user_id: slot.user_id,
            slot_index: i,
            start_symbol,
            start_sample: start_symbol * sps + gd - half,
            len_samples: frame.slot_len_symbols * sps,
            relative_power_db: slot.relative_power_db,
            data_bits: slot.payload.len(),
            pad_bits: capacity - slot.payload.len() + st.pad_bits,
        });
    }
    let n = symbols.len();
    let stream = SymbolStream {
        symbols,
        scheme,
        carries_memory_state: scheme.carries_memory_state(),
        data_bits: n * bps,
        pad_bits: 0,
    };
    let shaped = pulse_shape(&stream, shape, sample_rate_hz)?;
    Ok(TdmaBurst {
        signal: shaped.signal.with_label("tdma"),
        slots: bounds,
        sps,
        group_delay_samples: gd,
    })
}

/// Mean power in dB over a slot, skipping `margin_symbols` at each edge.
pub fn slot_power_db(
    samples: &[Complex64],
    start_sample: usize,
    len_samples: usize,
    sps: usize,
    margin_symbols: usize,
) -> Result<f64> {
    let m = margin_symbols * sps;
    if 2 * m >= len_samples || start_sample + len_samples > samples.len() {
        return Err(VlabError::param("slot", "window outside signal or margin too large"));
    }
    Ok(10.0 * mean_power(&samples[start_sample + m..start_sample + len_samples - m]).log10())
}

/// Finds slot `slot`'s start sample from the energy pattern alone: the frame
/// offset maximizing mean log-energy inside slots minus inside guards.
pub fn locate_slot(
    signal: &IqSignal,
    slot_len_symbols: usize,
    guard_symbols: usize,
    n_slots: usize,
    sps: usize,
    slot: usize,
) -> Result<usize> {
    if slot >= n_slots || guard_symbols == 0 || slot_len_symbols == 0 {
        return Err(VlabError::param(
            "slot",
            "need slot < n_slots and nonzero slot and guard lengths",
        ));
    }
    let slot_len = slot_len_symbols * sps;
    let guard = guard_symbols * sps;
    let period = slot_len + guard;
    let frame_len = period * n_slots;
    if signal.len() < frame_len {
        return Err(VlabError::InsufficientSamples {
            needed: frame_len,
            got: signal.len(),
        });
    }
    let floor = signal.mean_power() * 1e-9 + f64::MIN_POSITIVE;
    let mut prefix = Vec::with_capacity(signal.len() + 1);
    prefix.push(0.0);
    for s in &signal.samples {
        prefix.push(prefix.last().unwrap() + (s.norm_sqr() + floor).ln());
    }
    let mean = |a: usize, len: usize| (prefix[a + len] - prefix[a]) / len as f64;
    let best = (0..=signal.len() - frame_len)
        .map(|tau| {
            let score: f64 = (0..n_slots)
                .map(|k| {
                    let s = tau + k * period;
                    let g = (s + slot_len + guard).min(signal.len()) - (s + slot_len);
                    mean(s, slot_len) - if g > 0 { mean(s + slot_len, g) } else { 0.0 }
                })
                .sum();
            (tau, score)
        })
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap()
        .0;
    Ok(best + slot * period)
}
