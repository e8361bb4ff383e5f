use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VlabError};
use crate::modem::{map_bits, ModulationScheme, SymbolStream};
use crate::rx::msequence;
use crate::shaping::{pulse_shape, PulseShape};
use crate::signal::{IqSignal, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeKind {
    MSequence,
    Walsh,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpreadingCode {
    pub chips: Vec<i8>,
    pub kind: CodeKind,
}

impl SpreadingCode {
    /// Row `index` of the Sylvester Hadamard matrix of order `len`.
    pub fn walsh(len: usize, index: usize) -> Result<Self> {
        if len < 4 || !len.is_power_of_two() {
            return Err(VlabError::param("len", "walsh length must be a power of two >= 4"));
        }
        if index >= len {
            return Err(VlabError::param("index", format!("must be below {len}")));
        }
        let chips = (0..len)
            .map(|j| {
                if (index & j).count_ones().is_multiple_of(2) {
                    1
                } else {
                    -1
                }
            })
            .collect();
        Ok(SpreadingCode {
            chips,
            kind: CodeKind::Walsh,
        })
    }

    /// Length `2^degree - 1` maximal-length code.
    pub fn m_sequence(degree: u32) -> Result<Self> {
        Ok(SpreadingCode {
            chips: msequence(degree)?.chips,
            kind: CodeKind::MSequence,
        })
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn dot(&self, other: &SpreadingCode) -> i64 {
        self.chips
            .iter()
            .zip(&other.chips)
            .map(|(&a, &b)| a as i64 * b as i64)
            .sum()
    }

    fn check(&self) -> Result<()> {
        if self.len() < 4 {
            return Err(VlabError::param("code", "length must be at least 4"));
        }
        Ok(())
    }
}

/// Each symbol times the whole code, chip-rate output.
pub fn dsss_spread(symbols: &[Complex64], code: &SpreadingCode) -> Result<Vec<Complex64>> {
    code.check()?;
    Ok(symbols
        .iter()
        .flat_map(|&s| code.chips.iter().map(move |&c| s * c as f64))
        .collect())
}

/// Correlate-and-dump per code period, normalized by the code length.
pub fn dsss_despread(chips: &[Complex64], code: &SpreadingCode) -> Result<Vec<Complex64>> {
    code.check()?;
    let l = code.len();
    if !chips.len().is_multiple_of(l) {
        return Err(VlabError::LengthMismatch {
            left: chips.len(),
            right: l * (chips.len() / l + 1),
        });
    }
    Ok(chips
        .chunks(l)
        .map(|blk| {
            blk.iter()
                .zip(&code.chips)
                .map(|(x, &c)| x * c as f64)
                .sum::<Complex64>()
                / l as f64
        })
        .collect())
}

/// Measured SINR gain from despreading BPSK against a CW jammer at
/// `jsr_db` and `jammer_cycles_per_chip`.
pub fn processing_gain_db(
    code: &SpreadingCode,
    jsr_db: f64,
    jammer_cycles_per_chip: f64,
    n_symbols: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    let bits = rng.bits(n_symbols);
    let data: Vec<Complex64> = bits
        .iter()
        .map(|&b| Complex64::new(1.0 - 2.0 * b as f64, 0.0))
        .collect();
    let chips = dsss_spread(&data, code)?;
    let a_j = 10f64.powf(jsr_db / 20.0);
    let ph0 = rng.uniform_range(0.0, 2.0 * PI);
    let jam: Vec<Complex64> = (0..chips.len())
        .map(|k| Complex64::from_polar(a_j, 2.0 * PI * (jammer_cycles_per_chip * k as f64).fract() + ph0))
        .collect();
    let rx: Vec<Complex64> = chips.iter().zip(&jam).map(|(c, j)| c + j).collect();
    let pre_sinr = 1.0 / (a_j * a_j);
    let out = dsss_despread(&rx, code)?;
    let interf = out.iter().zip(&data).map(|(y, d)| (y - d).norm_sqr()).sum::<f64>() / n_symbols as f64;
    Ok(10.0 * ((1.0 / interf) / pre_sinr).log10())
}

/// Synchronous sum of `users` QPSK streams spread by the first Walsh codes
/// of length `code_len`, RRC shaped. Unit nominal power per user.
pub fn cdma_sum(
    users: usize,
    code_len: usize,
    n_symbols: usize,
    shape: &PulseShape,
    chip_rate_hz: f64,
    rng: &mut SimRng,
) -> Result<IqSignal> {
    if users == 0 || users > code_len {
        return Err(VlabError::param("users", format!("must be in 1..={code_len}")));
    }
    let mut chips = vec![Complex64::new(0.0, 0.0); n_symbols * code_len];
    for u in 0..users {
        let code = SpreadingCode::walsh(code_len, u)?;
        let bits = rng.bits(2 * n_symbols);
        let st = map_bits(&bits, ModulationScheme::Qpsk, rng)?;
        for (acc, c) in chips.iter_mut().zip(dsss_spread(&st.symbols, &code)?) {
            *acc += c;
        }
    }
    let stream = SymbolStream {
        symbols: chips,
        scheme: ModulationScheme::Qpsk,
        carries_memory_state: false,
        data_bits: 2 * n_symbols * users,
        pad_bits: 0,
    };
    let mut sig = pulse_shape(&stream, shape, chip_rate_hz * shape.sps as f64)?.signal;
    sig.label = format!("cdma-{users}");
    Ok(sig)
}
