//! Frame computation. Pure: the same spec, challenge, revision and
//! timestamp always give the same frame.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use vlab_core::channel::apply_tdl;
use vlab_core::impairments::apply_chain;
use vlab_core::modem::{demap_symbols, map_bits};
use vlab_core::ofdm::{cp_sync, ofdm_demodulate, ofdm_modulate, OfdmConfig};
use vlab_core::shaping::{matched_filter, pulse_shape, sample_symbols};
use vlab_core::signal::{
    eye_diagram, linear_to_db, measure_ber, papr_at_probability, papr_ccdf, resample, welch_psd, CcdfCurve, EyeGrid,
    IqSignal, PsdEstimate, Rail, SimRng, Window,
};
use vlab_core::trainer::{Challenge, ChallengeScenario, PublicParams};

use crate::spec::{FieldError, LabSpec};

const OCCUPIED_FRACTION: f64 = 0.99;
const OFDM_EYE_SPS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalars {
    /// Data-aided after a one-tap gain fit; `None` in challenge mode.
    pub evm_pct: Option<f64>,
    pub papr_db: f64,
    pub est_ber: Option<f64>,
    pub occupied_bw_hz: f64,
    pub mean_power_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisFrame {
    pub revision: u64,
    /// Acceptance time of the mutation that produced `revision`.
    pub timestamp_ms: u64,
    pub spec: LabSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ChallengeScenario>,
    pub psd: PsdEstimate,
    pub constellation: Vec<Complex64>,
    pub eye: EyeGrid,
    pub ccdf: CcdfCurve,
    pub scalars: Scalars,
}

/// Transmitted waveform after channel and impairments, with what the
/// transmitter knows about it.
pub struct Generated {
    pub signal: IqSignal,
    bits: Vec<u8>,
    views: Views,
}

enum Views {
    Single(Vec<Complex64>),
    Ofdm(OfdmConfig),
}

fn core(section: &str) -> impl Fn(vlab_core::VlabError) -> FieldError + '_ {
    move |e| FieldError::from_core(section, e)
}

/// Synthesizes the session buffer.
pub fn generate(spec: &LabSpec) -> Result<Generated, FieldError> {
    let mut rng = SimRng::new(spec.seed);
    let mut bit_rng = rng.fork(0);
    let mut channel_rng = rng.fork(1);
    let mut chain_rng = rng.fork(2);
    let mut pad_rng = rng.fork(3);
    let tx = &spec.tx;
    let (signal, bits, views) = match &tx.ofdm {
        Some(cfg) => {
            let bits = bit_rng.bits(cfg.capacity_bits());
            let frame = ofdm_modulate(&bits, cfg, tx.sample_rate_hz, &mut pad_rng).map_err(core("tx.ofdm"))?;
            (frame.signal, bits, Views::Ofdm(cfg.clone()))
        }
        None => {
            let bits = bit_rng.bits(tx.n_symbols * tx.scheme.bits_per_symbol());
            let stream = map_bits(&bits, tx.scheme, &mut pad_rng).map_err(core("tx"))?;
            let shaped = pulse_shape(&stream, &tx.shape, tx.sample_rate_hz).map_err(core("tx.shape"))?;
            (shaped.signal, bits, Views::Single(stream.symbols))
        }
    };
    let signal = match &spec.channel {
        Some(ch) => apply_tdl(&signal, &ch.resolve(spec.seed)?, &mut channel_rng).map_err(core("channel"))?,
        None => signal,
    };
    let mut signal = apply_chain(&signal, &spec.chain, &mut chain_rng).map_err(core("chain"))?;
    if signal.sample_rate_hz != tx.sample_rate_hz {
        signal = resample(&signal, tx.sample_rate_hz).map_err(core("chain"))?;
    }
    Ok(Generated { signal, bits, views })
}

fn decimate<T: Clone>(v: &[T], max: usize) -> Vec<T> {
    if v.len() <= max {
        return v.to_vec();
    }
    (0..max).map(|i| v[i * v.len() / max].clone()).collect()
}

fn trim_eye(mut eye: EyeGrid, traces: usize) -> EyeGrid {
    eye.traces = decimate(&eye.traces, traces.max(1));
    eye
}

struct Common {
    psd: PsdEstimate,
    ccdf: CcdfCurve,
    papr_db: f64,
    occupied_bw_hz: f64,
    mean_power_db: f64,
}

fn common(signal: &IqSignal, spec: &LabSpec) -> Result<Common, FieldError> {
    let a = &spec.analysis;
    let seg = a.psd_fft_len.min(signal.len().next_power_of_two() / 2).max(16);
    let psd = welch_psd(signal, seg, 0.5, Window::Hann).map_err(core("analysis"))?;
    let ccdf = papr_ccdf(signal, &a.ccdf_thresholds_db).map_err(core("analysis"))?;
    let papr_db = papr_at_probability(&signal.samples, 1e-3).map_err(core("analysis"))?;
    Ok(Common {
        occupied_bw_hz: psd.occupied_bandwidth_hz(OCCUPIED_FRACTION),
        mean_power_db: linear_to_db(signal.mean_power()),
        psd,
        ccdf,
        papr_db,
    })
}

/// Least-squares complex gain of `rx` against `reference`.
fn ls_gain(rx: &[Complex64], reference: &[Complex64]) -> Complex64 {
    let num: Complex64 = rx.iter().zip(reference).map(|(y, s)| y * s.conj()).sum();
    let den: f64 = reference.iter().map(|s| s.norm_sqr()).sum();
    if den > 0.0 {
        num / den
    } else {
        Complex64::new(1.0, 0.0)
    }
}

fn evm_pct(rx: &[Complex64], reference: &[Complex64]) -> f64 {
    let err: f64 = rx.iter().zip(reference).map(|(y, s)| (y - s).norm_sqr()).sum();
    let pow: f64 = reference.iter().map(|s| s.norm_sqr()).sum();
    100.0 * (err / pow.max(f64::MIN_POSITIVE)).sqrt()
}

fn ber(tx: &[u8], rx: &[u8]) -> Option<f64> {
    let n = tx.len().min(rx.len());
    measure_ber(&tx[..n], &rx[..n]).ok().map(|b| b.rate)
}

/// Computes every view of the session (or its attached challenge) from one
/// buffer.
pub fn compute_frame(
    spec: &LabSpec,
    challenge: Option<&Challenge>,
    revision: u64,
    timestamp_ms: u64,
) -> Result<AnalysisFrame, FieldError> {
    let a = &spec.analysis;
    if let Some(ch) = challenge {
        let signal = &ch.signal;
        let c = common(signal, spec)?;
        let sps = challenge_sps(&ch.scenario);
        let eye = eye_diagram(signal, sps, 0, Rail::I).map_err(core("analysis"))?;
        let points: Vec<Complex64> = signal.samples.iter().step_by(sps).copied().collect();
        return Ok(AnalysisFrame {
            revision,
            timestamp_ms,
            spec: spec.clone(),
            scenario: Some(ch.scenario.clone()),
            psd: c.psd,
            constellation: decimate(&points, a.constellation_points),
            eye: trim_eye(eye, a.eye_traces),
            ccdf: c.ccdf,
            scalars: Scalars {
                evm_pct: None,
                papr_db: c.papr_db,
                est_ber: None,
                occupied_bw_hz: c.occupied_bw_hz,
                mean_power_db: c.mean_power_db,
            },
        });
    }

    let g = generate(spec)?;
    let c = common(&g.signal, spec)?;
    let (constellation, eye, evm, est_ber) = match &g.views {
        Views::Single(symbols) => {
            let tx = &spec.tx;
            let sps = tx.shape.sps;
            let mf = matched_filter(&g.signal, &tx.shape).map_err(core("tx.shape"))?;
            let delay = 2 * tx.shape.group_delay_samples();
            let q_delay = if tx.scheme.is_offset() { sps / 2 } else { 0 };
            let raw = sample_symbols(&mf.samples, delay, sps, symbols.len(), q_delay);
            let h = ls_gain(&raw, symbols);
            let eq: Vec<Complex64> = raw.iter().map(|y| y / h).collect();
            let evm = evm_pct(&eq, symbols);
            let rx_bits = demap_symbols(&eq, tx.scheme);
            let eye = eye_diagram(&mf, sps, delay % sps, Rail::I).map_err(core("analysis"))?;
            (eq, eye, evm, ber(&g.bits, &rx_bits))
        }
        Views::Ofdm(cfg) => {
            let sync = cp_sync(&g.signal, cfg).map_err(core("tx.ofdm"))?;
            let rx = ofdm_demodulate(&g.signal, cfg, &sync).map_err(core("tx.ofdm"))?;
            let points: Vec<Complex64> = rx.constellation.concat();
            let eye = eye_diagram(&g.signal, OFDM_EYE_SPS, 0, Rail::I).map_err(core("analysis"))?;
            (points, eye, rx.evm_pct, ber(&g.bits, &rx.bits))
        }
    };
    Ok(AnalysisFrame {
        revision,
        timestamp_ms,
        spec: spec.clone(),
        scenario: None,
        psd: c.psd,
        constellation: decimate(&constellation, a.constellation_points),
        eye: trim_eye(eye, a.eye_traces),
        ccdf: c.ccdf,
        scalars: Scalars {
            evm_pct: Some(evm),
            papr_db: c.papr_db,
            est_ber,
            occupied_bw_hz: c.occupied_bw_hz,
            mean_power_db: c.mean_power_db,
        },
    })
}

fn challenge_sps(s: &ChallengeScenario) -> usize {
    match &s.params {
        PublicParams::HiddenMessage { frame } => frame.sps,
        PublicParams::BlindModulation { sps, .. }
        | PublicParams::SlotLocation { sps, .. }
        | PublicParams::CfoHunt { sps, .. } => *sps,
        _ => 8,
    }
}
