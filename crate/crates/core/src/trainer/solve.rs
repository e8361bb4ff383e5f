use super::{ChallengeScenario, PublicParams, Submission};
use crate::error::Result;
use crate::modem::{classify_modulation, ModulationScheme};
use crate::multiaccess::{identify_hop_pattern, locate_slot};
use crate::rx::{coarse_sync, estimate_cfo, run_receiver, FrameSpec, PayloadSpec};
use crate::shaping::estimate_filter_family;
use crate::signal::IqSignal;

/// Reference solver: answers a challenge from the trainee-visible scenario
/// and signal alone.
pub fn solve(scenario: &ChallengeScenario, signal: &IqSignal) -> Result<Submission> {
    Ok(match &scenario.params {
        PublicParams::HiddenMessage { frame } => {
            let rx = run_receiver(signal, frame, None)?;
            Submission::HiddenMessage {
                message: rx.message_text.unwrap_or_default(),
            }
        }
        PublicParams::BlindModulation {
            preamble,
            shape,
            sps,
            n_payload_symbols,
            candidates,
        } => {
            // Memoryless one-symbol-per-slot schemes all sample the same way;
            // QPSK quadrant decisions drive the phase tracker without
            // favouring any denser alphabet.
            let spec = FrameSpec {
                preamble: *preamble,
                payload: PayloadSpec {
                    scheme: ModulationScheme::Qpsk,
                    n_bits: 2 * n_payload_symbols,
                },
                shape: *shape,
                sps: *sps,
            };
            let rx = run_receiver(signal, &spec, None)?;
            let ranked = classify_modulation(&rx.symbols, candidates)?;
            Submission::BlindModulation {
                scheme: ranked[0].scheme,
            }
        }
        PublicParams::FilterParams { family, symbol_rate_hz } => {
            let est = estimate_filter_family(signal, *symbol_rate_hz, *family)?;
            Submission::FilterParams {
                parameter: est.parameter,
            }
        }
        PublicParams::SlotLocation {
            slot_len_symbols,
            guard_symbols,
            n_slots,
            slot_index,
            sps,
        } => {
            let start = locate_slot(signal, *slot_len_symbols, *guard_symbols, *n_slots, *sps, *slot_index)?;
            Submission::SlotLocation {
                start_sample: start,
                end_sample: start + slot_len_symbols * sps,
            }
        }
        PublicParams::HopPattern { candidates, hop_len } => {
            let ridges = identify_hop_pattern(signal, candidates, *hop_len, 1)?;
            Submission::HopPattern {
                pattern_id: ridges[0].pattern_id,
            }
        }
        PublicParams::CfoHunt { preamble, sps, .. } => {
            let l = ((1usize << preamble.degree) - 1) * sps;
            let coarse = coarse_sync(signal, l)?;
            let est = estimate_cfo(signal, coarse.start, l)?;
            Submission::CfoHunt { cfo_hz: est.cfo_hz }
        }
    })
}
