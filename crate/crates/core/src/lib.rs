//! Virtual radio laboratory: baseband transmit, channel and receive stages,
//! analyser views and seeded micro-task challenges.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod impairments;
pub mod modem;
pub mod multiaccess;
pub mod ofdm;
pub mod rx;
pub mod shaping;
pub mod signal;
pub mod trainer;

pub use error::{Result, VlabError};
