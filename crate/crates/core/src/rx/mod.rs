//! Digital baseband receiver for m-sequence preambled frames.

mod frame;
mod msequence;
mod receiver;
mod sync;

pub use frame::{
    bits_to_text, build_frame, frame_symbols, text_to_bits, FrameSpec, PayloadSpec, PreambleSpec, TxFrame,
};
pub use msequence::{default_poly, gen_msequence, msequence, MSequence};
pub use receiver::{run_receiver, RxReport};
pub use sync::{
    coarse_candidates, coarse_sync, correct_cfo, equalize, estimate_cfo, estimate_channel, fine_sync, track_phase,
    CfoEstimate, CoarseSync, FineSync, COARSE_THRESHOLD, MIN_PEAK_TO_SIDELOBE,
};
