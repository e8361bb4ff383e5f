use serde::{Deserialize, Serialize};

use crate::error::{Result, VlabError};

/// Primitive polynomials for degrees 3..=16, bit `k` set for `x^k`.
const DEFAULT_POLYS: [u32; 14] = [
    0xB, 0x13, 0x25, 0x43, 0x83, 0x11D, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x4443, 0x8003, 0x1100B,
];

pub fn default_poly(degree: u32) -> Result<u32> {
    if !(3..=16).contains(&degree) {
        return Err(VlabError::param("degree", "must be in 3..=16"));
    }
    Ok(DEFAULT_POLYS[degree as usize - 3])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MSequence {
    pub degree_n: u32,
    pub taps: u32,
    pub init_state: u32,
    /// Bit 0 maps to +1, bit 1 to -1.
    pub chips: Vec<i8>,
}

impl MSequence {
    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn bits(&self) -> Vec<u8> {
        self.chips.iter().map(|&c| u8::from(c < 0)).collect()
    }

    pub fn chips_f64(&self) -> Vec<f64> {
        self.chips.iter().map(|&c| c as f64).collect()
    }

    /// Integer circular autocorrelation at every lag.
    pub fn circular_autocorrelation(&self) -> Vec<i64> {
        let n = self.chips.len();
        (0..n)
            .map(|lag| {
                (0..n)
                    .map(|k| self.chips[k] as i64 * self.chips[(k + lag) % n] as i64)
                    .sum()
            })
            .collect()
    }
}

/// Galois LFSR over `poly`. Rejects polynomials whose period from `init`
/// is not `2^degree - 1`.
pub fn gen_msequence(degree: u32, poly: u32, init: u32) -> Result<MSequence> {
    if !(3..=16).contains(&degree) {
        return Err(VlabError::param("degree", "must be in 3..=16"));
    }
    if poly >> degree != 1 || poly & 1 == 0 {
        return Err(VlabError::param(
            "poly",
            format!("{poly:#x} is not a degree-{degree} polynomial with constant term"),
        ));
    }
    let mask = (1u32 << degree) - 1;
    if init & mask == 0 || init > mask {
        return Err(VlabError::param("init", "must be a nonzero state of `degree` bits"));
    }
    let period = (1usize << degree) - 1;
    let toggle = poly >> 1;
    let mut state = init;
    let mut chips = Vec::with_capacity(period);
    for i in 0..period {
        let out = state & 1;
        chips.push(if out == 0 { 1 } else { -1 });
        state >>= 1;
        if out == 1 {
            state ^= toggle;
        }
        if state == init && i + 1 < period {
            return Err(VlabError::NonPrimitive {
                degree,
                poly,
                period: i + 1,
            });
        }
    }
    if state != init {
        return Err(VlabError::NonPrimitive {
            degree,
            poly,
            period: 0,
        });
    }
    Ok(MSequence {
        degree_n: degree,
        taps: poly,
        init_state: init,
        chips,
    })
}

/// Sequence from the built-in polynomial table with state 1.
pub fn msequence(degree: u32) -> Result<MSequence> {
    gen_msequence(degree, default_poly(degree)?, 1)
}
