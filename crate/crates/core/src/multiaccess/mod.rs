//! Sharing a band between emulated test-beds: FDMA band plans, TDMA frames,
//! DSSS-CDMA codes, frequency hopping and two-user interference scenarios.

mod fdma;
mod fhss;
mod interference;
mod spread;
mod tdma;

pub use fdma::{composite_rate, fdma_compose, fdma_sir_db, Allocation, BandPlan};
pub use fhss::{fhss_apply, hop_boundaries, identify_hop_pattern, HopRidge};
pub use interference::{
    compose_interference, demodulate_user, InterferenceKind, InterferenceParams, InterferenceScenario, UserTruth,
};
pub use spread::{cdma_sum, dsss_despread, dsss_spread, processing_gain_db, CodeKind, SpreadingCode};
pub use tdma::{locate_slot, slot_power_db, tdma_compose, SlotBoundary, TdmaBurst, TdmaFrame, TdmaSlot};
