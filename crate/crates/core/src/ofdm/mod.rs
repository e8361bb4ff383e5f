//! CP-OFDM: modulation with an optional pilot symbol, cyclic-prefix timing
//! and fractional-CFO estimation, one-tap equalization and parameter sweeps.

mod sweep;

pub use sweep::{parameter_sweep, Multipath, SweepFixture, SweepRow};

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VlabError};
use crate::modem::{constellation, decision_reference, demap_symbols, map_bits, ModulationScheme};
use crate::signal::{evm_rms, IqSignal, SimRng};

const PILOT_SEED: u64 = 0x0FD1_5EED;
/// EVM above which an unequalized (pilot-less) demodulation is flagged.
const UNEQUALIZED_EVM_PCT: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfdmConfig {
    pub fft_size: usize,
    pub cp_len: usize,
    pub n_active: usize,
    pub scheme: ModulationScheme,
    pub n_symbols: usize,
    #[serde(default)]
    pub pilot: bool,
    /// Explicit bin indices in `-fft_size/2..fft_size/2`, DC excluded.
    /// Default: `±1..=±n_active/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_indices: Option<Vec<i64>>,
}

impl OfdmConfig {
    pub fn new(fft_size: usize, cp_len: usize, n_active: usize, scheme: ModulationScheme, n_symbols: usize) -> Self {
        OfdmConfig {
            fft_size,
            cp_len,
            n_active,
            scheme,
            n_symbols,
            pilot: true,
            active_indices: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.fft_size;
        if n < 64 || !n.is_power_of_two() {
            return Err(VlabError::param("fft_size", "must be a power of two >= 64"));
        }
        if self.cp_len == 0 || self.cp_len >= n {
            return Err(VlabError::param("cp_len", "must satisfy 1 <= cp_len < fft_size"));
        }
        if self.n_symbols == 0 {
            return Err(VlabError::param("n_symbols", "must be positive"));
        }
        match &self.active_indices {
            Some(idx) => {
                if idx.len() != self.n_active || idx.is_empty() {
                    return Err(VlabError::param("active_indices", "length must equal n_active"));
                }
                let half = n as i64 / 2;
                let mut sorted = idx.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != idx.len() || idx.iter().any(|&k| k == 0 || k < -half || k >= half) {
                    return Err(VlabError::param(
                        "active_indices",
                        "distinct, non-DC, within +-fft_size/2",
                    ));
                }
            }
            None => {
                if self.n_active < 2 || !self.n_active.is_multiple_of(2) || self.n_active > n - 2 {
                    return Err(VlabError::param("n_active", "must be even, >= 2 and <= fft_size - 2"));
                }
            }
        }
        Ok(())
    }

    /// Active bins as signed indices.
    pub fn active(&self) -> Vec<i64> {
        match &self.active_indices {
            Some(v) => v.clone(),
            None => {
                let h = (self.n_active / 2) as i64;
                (-h..=h).filter(|&k| k != 0).collect()
            }
        }
    }

    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_len
    }

    pub fn total_symbols(&self) -> usize {
        self.n_symbols + usize::from(self.pilot)
    }

    pub fn capacity_bits(&self) -> usize {
        self.n_symbols * self.n_active * self.scheme.bits_per_symbol()
    }

    fn bin(&self, k: i64) -> usize {
        k.rem_euclid(self.fft_size as i64) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfdmFrame {
    pub signal: IqSignal,
    /// Data symbols on the active bins, one row per OFDM symbol.
    pub data: Vec<Vec<Complex64>>,
    pub pilot: Option<Vec<Complex64>>,
    pub pad_bits: usize,
}

/// Known QPSK pilot on the active bins.
pub fn pilot_symbol(config: &OfdmConfig) -> Vec<Complex64> {
    let pts = constellation(ModulationScheme::Qpsk);
    let mut rng = SimRng::new(PILOT_SEED);
    (0..config.n_active).map(|_| pts[rng.below(4)].point).collect()
}

fn modulate_symbol(values: &[Complex64], config: &OfdmConfig, ifft: &dyn rustfft::Fft<f64>) -> Vec<Complex64> {
    let n = config.fft_size;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (k, v) in config.active().into_iter().zip(values) {
        buf[config.bin(k)] = *v;
    }
    ifft.process(&mut buf);
    let scale = 1.0 / (config.n_active as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    let mut out = buf[n - config.cp_len..].to_vec();
    out.extend(buf);
    out
}

/// Maps bits onto the active bins symbol by symbol, inverse transforms and
/// prepends the cyclic prefix. Short inputs are padded with random bits.
/// Unit average power.
pub fn ofdm_modulate(bits: &[u8], config: &OfdmConfig, sample_rate_hz: f64, rng: &mut SimRng) -> Result<OfdmFrame> {
    config.validate()?;
    let cap = config.capacity_bits();
    if bits.len() > cap {
        return Err(VlabError::param(
            "bits",
            format!("{} bits exceed capacity {cap}", bits.len()),
        ));
    }
    let mut all = bits.to_vec();
    all.extend(rng.bits(cap - bits.len()));
    let syms = map_bits(&all, config.scheme, rng)?.symbols;
    // Differential schemes carry a leading reference; keep it as the
    // first value so every bin row still has n_active entries.
    let syms = if config.scheme.is_differential() {
        syms[1..].to_vec()
    } else {
        syms
    };
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(config.fft_size);
    let mut samples = Vec::with_capacity(config.total_symbols() * config.symbol_len());
    let pilot = config.pilot.then(|| pilot_symbol(config));
    if let Some(p) = &pilot {
        samples.extend(modulate_symbol(p, config, ifft.as_ref()));
    }
    let data: Vec<Vec<Complex64>> = syms.chunks(config.n_active).map(<[Complex64]>::to_vec).collect();
    for row in &data {
        samples.extend(modulate_symbol(row, config, ifft.as_ref()));
    }
    Ok(OfdmFrame {
        signal: IqSignal::new(samples, sample_rate_hz)?.with_label("ofdm"),
        data,
        pilot,
        pad_bits: cap - bits.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpSync {
    /// First sample of the first whole symbol (its cyclic prefix).
    pub theta: usize,
    /// Fractional CFO in subcarrier spacings, in (-0.5, 0.5].
    pub eps: f64,
}

/// `argmax_theta |sum conj(r[k]) r[k+N]|` over the CP windows of every
/// available symbol, `theta` in one symbol period. The angle of that sum
/// over 2 pi is the fractional CFO; offsets beyond half a spacing alias.
pub fn cp_sync(signal: &IqSignal, config: &OfdmConfig) -> Result<CpSync> {
    config.validate()?;
    let n = config.fft_size;
    let p = config.symbol_len();
    let cp = config.cp_len;
    let x = &signal.samples;
    if x.len() < 2 * p {
        return Err(VlabError::InsufficientSamples {
            needed: 2 * p,
            got: x.len(),
        });
    }
    let gamma = |theta: usize| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut s = theta;
        while s + cp + n <= x.len() {
            for k in s..s + cp {
                acc += x[k].conj() * x[k + n];
            }
            s += p;
        }
        acc
    };
    let (theta, g) = (0..p)
        .map(|t| (t, gamma(t)))
        .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
        .unwrap();
    Ok(CpSync {
        theta,
        eps: g.arg() / (2.0 * PI),
    })
}

/// Frequency shift by `eps` subcarrier spacings; phase referenced to
/// sample 0.
pub fn apply_subcarrier_cfo(signal: &IqSignal, eps: f64, fft_size: usize) -> IqSignal {
    let step = eps / fft_size as f64;
    let mut out = signal.clone();
    for (k, s) in out.samples.iter_mut().enumerate() {
        *s *= Complex64::from_polar(1.0, 2.0 * PI * (step * k as f64).fract());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfdmRx {
    pub bits: Vec<u8>,
    /// Equalized active-bin values per data symbol.
    pub constellation: Vec<Vec<Complex64>>,
    /// One-tap channel estimate per active bin (unity without a pilot).
    pub channel: Vec<Complex64>,
    pub per_subcarrier_evm_pct: Vec<f64>,
    pub evm_pct: f64,
    pub flags: Vec<String>,
}

/// CFO-corrects, strips the CP, transforms, equalizes with the pilot (when
/// configured) and hard-demaps. Only fractional CFO is handled.
pub fn ofdm_demodulate(signal: &IqSignal, config: &OfdmConfig, sync: &CpSync) -> Result<OfdmRx> {
    config.validate()?;
    if !(sync.eps.abs() < 0.5) {
        return Err(VlabError::param(
            "eps",
            "only fractional CFO (|eps| < 0.5) can be corrected",
        ));
    }
    let n = config.fft_size;
    let p = config.symbol_len();
    let need = sync.theta + config.total_symbols() * p;
    if signal.len() < need {
        return Err(VlabError::InsufficientSamples {
            needed: need,
            got: signal.len(),
        });
    }
    let x = apply_subcarrier_cfo(signal, -sync.eps, n);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let active = config.active();
    let scale = (config.n_active as f64).sqrt() / n as f64;
    let demod = |m: usize| -> Vec<Complex64> {
        let s = sync.theta + m * p + config.cp_len;
        let mut buf = x.samples[s..s + n].to_vec();
        fft.process(&mut buf);
        active.iter().map(|&k| buf[config.bin(k)] * scale).collect()
    };
    let mut flags = Vec::new();
    let (channel, first) = if config.pilot {
        let r = demod(0);
        let h = r.iter().zip(pilot_symbol(config)).map(|(r, p)| r / p).collect();
        (h, 1)
    } else {
        (vec![Complex64::new(1.0, 0.0); config.n_active], 0)
    };
    let rows: Vec<Vec<Complex64>> = (0..config.n_symbols)
        .map(|m| demod(first + m).iter().zip(&channel).map(|(r, h)| r / h).collect())
        .collect();
    let flat: Vec<Complex64> = rows.iter().flatten().copied().collect();
    let differential = config.scheme.is_differential();
    let mut bits = if differential {
        let mut with_ref = vec![Complex64::new(1.0, 0.0)];
        with_ref.extend(&flat);
        demap_symbols(&with_ref, config.scheme)
    } else {
        demap_symbols(&flat, config.scheme)
    };
    bits.truncate(config.capacity_bits());
    let reference = decision_reference(&flat, config.scheme);
    let evm_pct = evm_rms(&flat, &reference)?;
    let per_subcarrier_evm_pct = (0..config.n_active)
        .map(|b| {
            let rx: Vec<Complex64> = rows.iter().map(|r| r[b]).collect();
            let rf: Vec<Complex64> = (0..rows.len()).map(|m| reference[m * config.n_active + b]).collect();
            evm_rms(&rx, &rf)
        })
        .collect::<Result<_>>()?;
    if !config.pilot && evm_pct > UNEQUALIZED_EVM_PCT {
        flags.push(format!("no pilot: output unequalized, EVM {evm_pct:.1}%"));
    }
    Ok(OfdmRx {
        bits,
        constellation: rows,
        channel,
        per_subcarrier_evm_pct,
        evm_pct,
        flags,
    })
}
