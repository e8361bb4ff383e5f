use std::f64::consts::PI;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use super::{
    Artifact, ChallengeKind, ChallengeScenario, Difficulty, DifficultyPreset, PublicParams, Truth, CHALLENGE_RATE_HZ,
};
use crate::error::{Result, VlabError};
use crate::impairments::{apply_chain, ImpairmentChain, Stage};
use crate::modem::{map_bits, ModulationScheme};
use crate::multiaccess::{fhss_apply, tdma_compose, TdmaFrame, TdmaSlot};
use crate::rx::{build_frame, text_to_bits, FrameSpec, PayloadSpec, PreambleSpec};
use crate::shaping::{pulse_shape, PulseKind, PulseShape};
use crate::signal::iqfile::{decode_iq, encode_iq, IqMeta};
use crate::signal::{IqSignal, SimRng};

const WORDS: [&str; 32] = [
    "ALPHA", "BRAVO", "CEDAR", "DELTA", "EMBER", "FALCON", "GAMMA", "HARBOR", "IVORY", "JADE", "KAPPA", "LIMA",
    "MAPLE", "NOVA", "ORBIT", "PIXEL", "QUARTZ", "RADAR", "SIGMA", "TANGO", "UMBRA", "VECTOR", "WAVE", "XENON",
    "YANKEE", "ZULU", "COMET", "PRISM", "SONAR", "TIDAL", "LASER", "ZEPHYR",
];

pub const BLIND_CANDIDATES: [ModulationScheme; 6] = [
    ModulationScheme::Bpsk,
    ModulationScheme::Pi2Bpsk,
    ModulationScheme::Qpsk,
    ModulationScheme::Psk8,
    ModulationScheme::Qam16,
    ModulationScheme::Qam64,
];
const BLIND_SYMBOLS: usize = 2048;
const BLIND_SPS: usize = 16;
const FILTER_SYMBOLS: usize = 4000;
const TDMA_SLOT_SYMBOLS: usize = 128;
const TDMA_GUARD_SYMBOLS: usize = 16;
const HOP_LEN: usize = 2048;
const HOP_SPS: usize = 32;
const HOP_PATTERNS: usize = 4;
const HOP_PATTERN_LEN: usize = 6;
const HOP_REPEATS: usize = 2;
const HOP_GRID_HZ: f64 = 16e3;
const HOP_INTERFERER_DB: f64 = -6.0;
const CFO_HUNT_DEGREE: u32 = 8;
const TAIL_SAMPLES: usize = 600;
/// Quantizer full scale as a multiple of the per-rail RMS.
const QUANTIZER_CREST: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Challenge {
    pub scenario: ChallengeScenario,
    pub signal: IqSignal,
    pub truth: Truth,
}

impl Challenge {
    /// `challenge.iq`, its sidecar and `scenario.json`.
    pub fn trainee_artifacts(&self) -> Result<Vec<Artifact>> {
        let meta = IqMeta::for_signal(&self.signal, None);
        Ok(vec![
            Artifact {
                name: "challenge.iq".into(),
                bytes: encode_iq(&self.signal.samples),
            },
            Artifact::json("challenge.meta.json", &meta)?,
            Artifact::json("scenario.json", &self.scenario)?,
        ])
    }

    /// Instructor-only `truth.json`.
    pub fn truth_artifact(&self) -> Result<Artifact> {
        Artifact::json("truth.json", &self.truth)
    }
}

/// Seed of every random draw in a challenge: the first eight bytes
/// (little-endian) of SHA-256 over kind, difficulty, trainee id and seed.
pub fn challenge_seed(kind: ChallengeKind, difficulty: Difficulty, trainee_id: &str, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(b"vlab-challenge\0");
    h.update(kind.name().as_bytes());
    h.update([0]);
    h.update(difficulty.name().as_bytes());
    h.update([0]);
    h.update(trainee_id.as_bytes());
    h.update([0]);
    h.update(seed.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

pub fn generate_challenge(
    kind: ChallengeKind,
    difficulty: Difficulty,
    trainee_id: &str,
    seed: u64,
) -> Result<Challenge> {
    if trainee_id.trim().is_empty() {
        return Err(VlabError::param("trainee", "must not be empty"));
    }
    let preset = difficulty.preset();
    let mut rng = SimRng::new(challenge_seed(kind, difficulty, trainee_id, seed));
    let fs = CHALLENGE_RATE_HZ;
    let (params, signal, truth) = match kind {
        ChallengeKind::HiddenMessage => hidden_message(&preset, &mut rng)?,
        ChallengeKind::BlindModulation => blind_modulation(&preset, &mut rng)?,
        ChallengeKind::FilterParams => filter_params(&preset, &mut rng)?,
        ChallengeKind::SlotLocation => slot_location(&preset, &mut rng)?,
        ChallengeKind::HopPattern => hop_pattern(&preset, &mut rng)?,
        ChallengeKind::CfoHunt => cfo_hunt(&preset, &mut rng)?,
    };
    // Solvers see exactly what the file holds.
    let samples = decode_iq(&encode_iq(&signal.samples))?;
    let signal = IqSignal::new(samples, fs)?.with_label(format!("challenge {kind}"));
    let scenario = ChallengeScenario {
        kind,
        difficulty,
        trainee_id: trainee_id.to_string(),
        seed,
        sample_rate_hz: fs,
        preset,
        params,
    };
    Ok(Challenge {
        scenario,
        signal,
        truth,
    })
}

type Parts = (PublicParams, IqSignal, Truth);

fn make_message(rng: &mut SimRng) -> String {
    let w: Vec<&str> = (0..3).map(|_| WORDS[rng.below(WORDS.len())]).collect();
    format!("{} {} {} {:02}", w[0], w[1], w[2], rng.below(100))
}

fn ambiguity_hz(spec: &FrameSpec) -> f64 {
    CHALLENGE_RATE_HZ / (2.0 * spec.seq_len_samples() as f64)
}

fn signed(rng: &mut SimRng, v: f64) -> f64 {
    if rng.bit() == 1 {
        v
    } else {
        -v
    }
}

/// Pads with `lead` and `tail` zeros, applies a random complex gain and the
/// preset's impairments: IQ imbalance, CFO, AWGN against the burst power,
/// phase noise, quantizer.
fn impair(
    burst: &IqSignal,
    preset: &DifficultyPreset,
    cfo_hz: f64,
    lead: usize,
    tail: usize,
    rng: &mut SimRng,
) -> Result<IqSignal> {
    let gain = Complex64::from_polar(rng.uniform_range(0.5, 1.0), rng.uniform_range(0.0, 2.0 * PI));
    let p_burst = burst.mean_power() * gain.norm_sqr();
    let mut samples = vec![Complex64::new(0.0, 0.0); lead];
    samples.extend(burst.samples.iter().map(|s| s * gain));
    samples.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), tail));
    let padded = IqSignal::new(samples, burst.sample_rate_hz)?;

    let mut stages = Vec::new();
    if preset.iq_gain_imbalance_db != 0.0 {
        stages.push(Stage::Iq {
            gain_imbalance_db: preset.iq_gain_imbalance_db,
            quadrature_offset_deg: 0.0,
            dc_offset: Complex64::new(0.0, 0.0),
        });
    }
    if cfo_hz != 0.0 {
        stages.push(Stage::Cfo {
            offset_hz: cfo_hz,
            phase0_rad: 0.0,
        });
    }
    stages.push(Stage::Awgn {
        snr_db: Some(preset.snr_db),
        reference_power: Some(p_burst),
    });
    if let Some(lw) = preset.phase_noise_linewidth_hz {
        stages.push(Stage::PhaseNoise { linewidth_hz: lw });
    }
    if let Some(bits) = preset.quantizer_bits {
        let p_noise = p_burst / 10f64.powf(preset.snr_db / 10.0);
        let full_scale = QUANTIZER_CREST * ((p_burst + p_noise) / 2.0).sqrt();
        stages.push(Stage::Quantizer { bits, full_scale });
    }
    apply_chain(&padded, &ImpairmentChain::new(stages), rng)
}

fn frame_challenge(spec: &FrameSpec, bits: &[u8], preset: &DifficultyPreset, rng: &mut SimRng) -> Result<IqSignal> {
    let tx = build_frame(bits, spec, CHALLENGE_RATE_HZ, rng)?;
    let cfo = signed(rng, preset.cfo_fraction * ambiguity_hz(spec));
    let lead = 200 + rng.below(800);
    impair(&tx.signal, preset, cfo, lead, TAIL_SAMPLES, rng)
}

fn hidden_message(preset: &DifficultyPreset, rng: &mut SimRng) -> Result<Parts> {
    let message = make_message(rng);
    let bits = text_to_bits(&message)?;
    let frame = FrameSpec::standard(ModulationScheme::Qpsk, bits.len());
    let signal = frame_challenge(&frame, &bits, preset, rng)?;
    Ok((
        PublicParams::HiddenMessage { frame },
        signal,
        Truth::HiddenMessage { message },
    ))
}

fn blind_modulation(preset: &DifficultyPreset, rng: &mut SimRng) -> Result<Parts> {
    let scheme = BLIND_CANDIDATES[rng.below(BLIND_CANDIDATES.len())];
    let bits = rng.bits(BLIND_SYMBOLS * scheme.bits_per_symbol());
    let spec = FrameSpec {
        sps: BLIND_SPS,
        ..FrameSpec::standard(scheme, bits.len())
    };
    let signal = frame_challenge(&spec, &bits, preset, rng)?;
    let params = PublicParams::BlindModulation {
        preamble: spec.preamble,
        shape: spec.shape,
        sps: spec.sps,
        n_payload_symbols: BLIND_SYMBOLS,
        candidates: BLIND_CANDIDATES.to_vec(),
    };
    Ok((params, signal, Truth::BlindModulation { scheme }))
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn filter_params(preset: &DifficultyPreset, rng: &mut SimRng) -> Result<Parts> {
    let sps = 8;
    let (family, parameter, shape) = match rng.below(3) {
        0 => {
            let b = round2(rng.uniform_range(0.15, 0.9));
            (PulseKind::Rrc, b, PulseShape::rrc(b))
        }
        1 => {
            let b = round2(rng.uniform_range(0.15, 0.9));
            (PulseKind::Rc, b, PulseShape::rc(b))
        }
        _ => {
            let bt = round2(rng.uniform_range(0.3, 1.0));
            (PulseKind::Gaussian, bt, PulseShape::gaussian(bt))
        }
    };
    let bits = rng.bits(2 * FILTER_SYMBOLS);
    let stream = map_bits(&bits, ModulationScheme::Qpsk, rng)?;
    let shaped = pulse_shape(&stream, &shape.with_sps(sps), CHALLENGE_RATE_HZ)?;
    let cfo = signed(
        rng,
        preset.cfo_fraction * ambiguity_hz(&FrameSpec::standard(ModulationScheme::Qpsk, 2)),
    );
    let signal = impair(&shaped.signal, preset, cfo, 0, 0, rng)?;
    let params = PublicParams::FilterParams {
        family,
        symbol_rate_hz: CHALLENGE_RATE_HZ / sps as f64,
    };
    Ok((params, signal, Truth::FilterParams { family, parameter }))
}

fn slot_location(preset: &DifficultyPreset, rng: &mut SimRng) -> Result<Parts> {
    let sps = 8;
    let n_slots = 4 + rng.below(5);
    let slot_index = rng.below(n_slots);
    let frame = TdmaFrame {
        slot_len_symbols: TDMA_SLOT_SYMBOLS,
        guard_symbols: TDMA_GUARD_SYMBOLS,
        slots: (0..n_slots)
            .map(|i| TdmaSlot {
                user_id: i as u32,
                relative_power_db: rng.uniform_range(-6.0, 0.0),
                payload: vec![],
            })
            .collect(),
    };
    let burst = tdma_compose(
        &frame,
        ModulationScheme::Qpsk,
        &PulseShape::rrc(0.35).with_sps(sps),
        CHALLENGE_RATE_HZ,
        rng,
    )?;
    let cfo = signed(
        rng,
        preset.cfo_fraction * ambiguity_hz(&FrameSpec::standard(ModulationScheme::Qpsk, 2)),
    );
    let lead = 200 + rng.below(800);
    let signal = impair(&burst.signal, preset, cfo, lead, TAIL_SAMPLES, rng)?;
    let b = burst.slots[slot_index];
    let start_sample = lead + b.start_sample;
    let params = PublicParams::SlotLocation {
        slot_len_symbols: TDMA_SLOT_SYMBOLS,
        guard_symbols: TDMA_GUARD_SYMBOLS,
        n_slots,
        slot_index,
        sps,
    };
    Ok((
        params,
        signal,
        Truth::SlotLocation {
            start_sample,
            end_sample: start_sample + b.len_samples,
        },
    ))
}

fn hop_signal(n: usize, rng: &mut SimRng) -> Result<IqSignal> {
    let n_sym = n / HOP_SPS + 1;
    let bits = rng.bits(2 * n_sym);
    let stream = map_bits(&bits, ModulationScheme::Qpsk, rng)?;
    let shaped = pulse_shape(&stream, &PulseShape::rrc(0.35).with_sps(HOP_SPS), CHALLENGE_RATE_HZ)?;
    let gd = shaped.group_delay_samples;
    IqSignal::new(shaped.signal.samples[gd..gd + n].to_vec(), CHALLENGE_RATE_HZ)
}

fn hop_pattern(preset: &DifficultyPreset, rng: &mut SimRng) -> Result<Parts> {
    let grid: Vec<f64> = (-6..=6).map(|k| k as f64 * HOP_GRID_HZ).collect();
    let candidates: Vec<Vec<f64>> = (0..HOP_PATTERNS)
        .map(|_| {
            let mut g = grid.clone();
            // Partial Fisher-Yates for the first HOP_PATTERN_LEN entries.
            for i in 0..HOP_PATTERN_LEN {
                let j = i + rng.below(g.len() - i);
                g.swap(i, j);
            }
            g.truncate(HOP_PATTERN_LEN);
            g
        })
        .collect();
    let pattern_id = rng.below(HOP_PATTERNS);
    let other = (pattern_id + 1 + rng.below(HOP_PATTERNS - 1)) % HOP_PATTERNS;
    let n = HOP_LEN * HOP_PATTERN_LEN * HOP_REPEATS;
    let mine = fhss_apply(&hop_signal(n, rng)?, &candidates[pattern_id], HOP_LEN)?;
    let theirs = fhss_apply(&hop_signal(n, rng)?, &candidates[other], HOP_LEN)?;
    let g = 10f64.powf(HOP_INTERFERER_DB / 20.0);
    let mut sum = mine.clone();
    sum.samples
        .iter_mut()
        .zip(&theirs.samples)
        .for_each(|(a, b)| *a += b * g);
    let cfo = signed(
        rng,
        preset.cfo_fraction * ambiguity_hz(&FrameSpec::standard(ModulationScheme::Qpsk, 2)),
    );
    let signal = impair(&sum, preset, cfo, 0, 0, rng)?;
    Ok((
        PublicParams::HopPattern {
            candidates,
            hop_len: HOP_LEN,
        },
        signal,
        Truth::HopPattern { pattern_id },
    ))
}

fn cfo_hunt(preset: &DifficultyPreset, rng: &mut SimRng) -> Result<Parts> {
    let spec = FrameSpec {
        preamble: PreambleSpec {
            degree: CFO_HUNT_DEGREE,
            poly: None,
            repeats: 2,
            init: 1,
        },
        payload: PayloadSpec {
            scheme: ModulationScheme::Qpsk,
            n_bits: 128,
        },
        shape: PulseShape::rrc(0.35),
        sps: 8,
    };
    let amb = ambiguity_hz(&spec);
    let mag = rng.uniform_range(0.1, 0.9) * amb;
    let cfo_hz = signed(rng, mag);
    let bits = rng.bits(spec.payload.n_bits);
    let tx = build_frame(&bits, &spec, CHALLENGE_RATE_HZ, rng)?;
    let lead = 200 + rng.below(800);
    let signal = impair(&tx.signal, preset, cfo_hz, lead, TAIL_SAMPLES, rng)?;
    let params = PublicParams::CfoHunt {
        preamble: spec.preamble,
        shape: spec.shape,
        sps: spec.sps,
        ambiguity_hz: amb,
    };
    Ok((params, signal, Truth::CfoHunt { cfo_hz }))
}
