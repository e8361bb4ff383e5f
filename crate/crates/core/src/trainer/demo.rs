use std::f64::consts::PI;
use std::fmt::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::analyze::{ccdf_csv, eye_csv, points_csv, psd_csv, psd_view};
use super::{generate_challenge, Artifact, ChallengeKind, Difficulty, PublicParams};
use crate::channel::{
    apply_tdl, coherence_metrics, fit_path_loss, fm_survey, preset, FmStation, PathLossModel, PathLossSample,
    PRESET_NAMES,
};
use crate::error::{Result, VlabError};
use crate::impairments::add_noise;
use crate::impairments::{apply_cfo, apply_iq_impairments, image_rejection_ratio_db, pa_nonlinearity, quantize};
use crate::modem::{demap_symbols, map_bits, ModulationScheme};
use crate::multiaccess::cdma_sum;
use crate::ofdm::{parameter_sweep, Multipath, OfdmConfig, SweepFixture};
use crate::rx::{build_frame, run_receiver, text_to_bits, FrameSpec};
use crate::shaping::{isi_db, matched_filter, pulse_shape, sample_symbols, PulseShape};
use crate::signal::{
    default_ccdf_thresholds, evm_rms, eye_diagram, measure_ber, papr_at_probability, papr_ccdf, q_function, welch_psd,
    IqSignal, Rail, SimRng, Window,
};

pub const MODULE_TITLES: [&str; 9] = [
    "Introductory transceiver",
    "SDR test-bed spectrum survey",
    "Digital modulation",
    "Pulse shaping",
    "Multiple accessing",
    "RF front-end impairments",
    "Propagation channel",
    "Receiver design",
    "OFDM",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoOutput {
    pub module: u8,
    pub title: String,
    pub headline: String,
    /// Key numbers behind the headline; also written to `summary.json`.
    pub data: Value,
    pub artifacts: Vec<Artifact>,
}

/// Reproduces one module's headline observation as data files.
pub fn run_module_demo(module: u8, seed: u64) -> Result<DemoOutput> {
    let (headline, data, mut artifacts) = match module {
        1 => intro(seed)?,
        2 => survey(seed)?,
        3 => modulation(seed)?,
        4 => shaping(seed)?,
        5 => multiple_access(seed)?,
        6 => front_end(seed)?,
        7 => propagation(seed)?,
        8 => receiver(seed)?,
        9 => ofdm(seed)?,
        _ => return Err(VlabError::param("module", "must be in 1..=9")),
    };
    let title = MODULE_TITLES[module as usize - 1].to_string();
    let summary = json!({ "module": module, "title": title, "headline": headline, "seed": seed, "data": data });
    artifacts.push(Artifact::json("summary.json", &summary)?);
    Ok(DemoOutput {
        module,
        title,
        headline,
        data,
        artifacts,
    })
}

type Demo = (String, Value, Vec<Artifact>);

fn table(header: &str, rows: &[Vec<f64>]) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

fn intro(seed: u64) -> Result<Demo> {
    let ch = generate_challenge(ChallengeKind::HiddenMessage, Difficulty::Medium, "demo", seed)?;
    let PublicParams::HiddenMessage { frame } = &ch.scenario.params else {
        unreachable!()
    };
    let rx = run_receiver(&ch.signal, frame, None)?;
    let decoded = rx.message_text.clone().unwrap_or_default();
    let super::Truth::HiddenMessage { message } = &ch.truth else {
        unreachable!()
    };
    let mf = matched_filter(&ch.signal, &frame.pulse())?;
    let eye = eye_diagram(
        &mf,
        frame.sps,
        rx.fine_offset_samples % frame.sps + frame.pulse().group_delay_samples() - frame.sps / 2,
        Rail::I,
    )?;
    let artifacts = vec![
        Artifact::text("constellation.csv", points_csv(&rx.symbols)),
        Artifact::text("psd.csv", psd_csv(&psd_view(&ch.signal)?)),
        Artifact::text("eye.csv", eye_csv(&eye)),
    ];
    let data = json!({ "sent": message, "decoded": decoded, "evm_pct": rx.evm_pct, "cfo_hat_hz": rx.cfo_hat_hz });
    Ok((
        format!("sent \"{message}\", decoded \"{decoded}\" at EVM {:.1}%", rx.evm_pct),
        data,
        artifacts,
    ))
}

fn survey(seed: u64) -> Result<Demo> {
    let model = PathLossModel {
        exponent_n: 3.0,
        ref_loss_db_at_d0: 30.0,
        d0_m: 1.0,
        shadowing_sigma_db: 2.0,
    };
    let fs = 1e6;
    let stations: Vec<FmStation> = (0..6)
        .map(|i| FmStation {
            offset_hz: -375e3 + 150e3 * i as f64,
            distance_m: 100.0 * 2f64.powi(i),
            tx_power_db: 60.0,
            deviation_hz: 15e3,
            tone_hz: 1e3,
        })
        .collect();
    let s = fm_survey(&stations, &model, fs, 1 << 16, &mut SimRng::new(seed))?;
    let psd = welch_psd(&s.signal, 4096, 0.5, Window::Hann)?;
    let meas: Vec<PathLossSample> = stations
        .iter()
        .map(|st| {
            let p = psd.band_power(st.offset_hz - 40e3, st.offset_hz + 40e3);
            PathLossSample {
                distance_m: st.distance_m,
                loss_db: st.tx_power_db - 10.0 * p.log10(),
            }
        })
        .collect();
    let fit = fit_path_loss(&meas, 1.0)?;
    let rows: Vec<Vec<f64>> = stations
        .iter()
        .zip(&meas)
        .map(|(st, m)| {
            vec![
                st.offset_hz,
                st.distance_m,
                m.loss_db,
                model.mean_loss_db(st.distance_m),
            ]
        })
        .collect();
    let artifacts = vec![
        Artifact::text("psd.csv", psd_csv(&psd)),
        Artifact::text(
            "stations.csv",
            table("offset_hz,distance_m,measured_loss_db,mean_model_loss_db", &rows),
        ),
    ];
    let data = json!({ "true_exponent": model.exponent_n, "fitted_exponent": fit.exponent_n, "fitted_sigma_db": fit.sigma_db });
    Ok((
        format!(
            "path-loss exponent fitted from the survey: {:.2} (model {:.1})",
            fit.exponent_n, model.exponent_n
        ),
        data,
        artifacts,
    ))
}

fn shaped_scheme(scheme: ModulationScheme, n: usize, rng: &mut SimRng) -> Result<IqSignal> {
    let shape = if scheme == ModulationScheme::Msk {
        PulseShape::half_sine()
    } else {
        PulseShape::rrc(0.35)
    };
    let bits = rng.bits(n * scheme.bits_per_symbol());
    let st = map_bits(&bits, scheme, rng)?;
    let sh = pulse_shape(&st, &shape, 8.0)?;
    let span = sh.shape.span * sh.shape.sps;
    IqSignal::new(sh.signal.samples[span..sh.signal.len() - span].to_vec(), 8.0)
}

fn modulation(seed: u64) -> Result<Demo> {
    use ModulationScheme::*;
    let mut rng = SimRng::new(seed);
    let schemes = [Pi2Bpsk, Bpsk, Oqpsk, Msk, Pi4Dqpsk, Qpsk, Psk8, Qam16];
    let mut curves = Vec::new();
    let mut papr = serde_json::Map::new();
    let mut rows = Vec::new();
    for (i, &s) in schemes.iter().enumerate() {
        let sig = shaped_scheme(s, 20_000, &mut rng.fork(i as u64))?;
        let p = papr_at_probability(&sig.samples, 1e-3)?;
        papr.insert(s.name().to_string(), json!(p));
        rows.push(vec![i as f64, p]);
        curves.push((s.name(), papr_ccdf(&sig, &default_ccdf_thresholds())?));
    }
    let named: Vec<(&str, &_)> = curves.iter().map(|(n, c)| (*n, c)).collect();
    // Symbol-level AWGN BER against theory.
    let mut ber_rows = Vec::new();
    for es_n0 in (0..=12).step_by(2) {
        let mut row = vec![es_n0 as f64];
        for (scheme, theory) in [
            (Qpsk, q_function((10f64.powf(es_n0 as f64 / 10.0)).sqrt())),
            (Qam16, 0.75 * q_function((10f64.powf(es_n0 as f64 / 10.0) / 5.0).sqrt())),
        ] {
            let bits = rng.bits(40_000);
            let st = map_bits(&bits, scheme, &mut rng)?;
            let n0 = 10f64.powf(-(es_n0 as f64) / 10.0);
            let rx: Vec<Complex64> = st.symbols.iter().map(|s| s + rng.complex_gaussian(n0)).collect();
            row.push(measure_ber(&bits, &demap_symbols(&rx, scheme))?.rate);
            row.push(theory);
        }
        ber_rows.push(row);
    }
    let legend: Vec<String> = schemes.iter().enumerate().map(|(i, s)| format!("{i}={s}")).collect();
    let artifacts = vec![
        Artifact::text("ccdf.csv", ccdf_csv(&named)),
        Artifact::text(
            "papr.csv",
            table(&format!("scheme_index,papr_db_at_1e-3  # {}", legend.join(" ")), &rows),
        ),
        Artifact::text(
            "ber.csv",
            table(
                "es_n0_db,qpsk_measured,qpsk_theory,qam16_measured,qam16_theory",
                &ber_rows,
            ),
        ),
    ];
    let lo = papr["pi2-bpsk"].as_f64().unwrap();
    let hi = papr["qpsk"].as_f64().unwrap();
    Ok((
        format!("PAPR at 1e-3: pi/2-BPSK {lo:.2} dB vs QPSK {hi:.2} dB"),
        json!({ "papr_db": papr }),
        artifacts,
    ))
}

fn shaping(seed: u64) -> Result<Demo> {
    let betas = [0.1, 0.22, 0.35, 0.5, 1.0];
    let rows: Vec<Vec<f64>> = betas
        .iter()
        .map(|&b| {
            let s = PulseShape::rrc(b);
            Ok(vec![b, isi_db(&s, Some(&s))?, isi_db(&s, None)?])
        })
        .collect::<Result<_>>()?;
    let mut rng = SimRng::new(seed);
    let mut psd_cols = Vec::new();
    for &b in &[0.22, 0.5, 1.0] {
        let bits = rng.bits(2 * 8000);
        let st = map_bits(&bits, ModulationScheme::Qpsk, &mut rng)?;
        let sig = pulse_shape(&st, &PulseShape::rrc(b), 8.0)?.signal;
        psd_cols.push(welch_psd(&sig, 512, 0.5, Window::Hann)?);
    }
    let mut psd = String::from("freq_symbol_rates,rolloff_0.22,rolloff_0.5,rolloff_1.0\n");
    for i in 0..psd_cols[0].freq_bins_hz.len() {
        write!(psd, "{}", psd_cols[0].freq_bins_hz[i]).unwrap();
        for c in &psd_cols {
            write!(psd, ",{}", c.power_db[i]).unwrap();
        }
        psd.push('\n');
    }
    let shape = PulseShape::rrc(0.22);
    let bits = rng.bits(2 * 600);
    let st = map_bits(&bits, ModulationScheme::Qpsk, &mut rng)?;
    let sh = pulse_shape(&st, &shape, 8.0)?;
    let mf = matched_filter(&sh.signal, &shape)?;
    let off = sh.group_delay_samples - 4;
    let artifacts = vec![
        Artifact::text("isi.csv", table("rolloff,isi_matched_db,isi_unmatched_db", &rows)),
        Artifact::text("psd.csv", psd),
        Artifact::text("eye_unmatched.csv", eye_csv(&eye_diagram(&sh.signal, 8, off, Rail::I)?)),
        Artifact::text("eye_matched.csv", eye_csv(&eye_diagram(&mf, 8, off, Rail::I)?)),
    ];
    let m = rows[1][1];
    let u = rows[1][2];
    let data = json!({ "rolloff": 0.22, "isi_matched_db": m, "isi_unmatched_db": u });
    Ok((
        format!("at rolloff 0.22 the matched receiver leaves {m:.1} dB ISI, no matched filter {u:.1} dB"),
        data,
        artifacts,
    ))
}

fn multiple_access(seed: u64) -> Result<Demo> {
    let mut rng = SimRng::new(seed);
    let mut curves = Vec::new();
    let mut papr = Vec::new();
    for (i, users) in [1usize, 2, 4, 8].into_iter().enumerate() {
        let sig = cdma_sum(users, 8, 2000, &PulseShape::rrc(0.35), 1.0, &mut rng.fork(i as u64))?;
        papr.push(vec![users as f64, papr_at_probability(&sig.samples, 1e-3)?]);
        curves.push((format!("codes_{users}"), papr_ccdf(&sig, &default_ccdf_thresholds())?));
    }
    let named: Vec<(&str, &_)> = curves.iter().map(|(n, c)| (n.as_str(), c)).collect();
    let ordered = papr.windows(2).all(|w| w[1][1] >= w[0][1]);
    let artifacts = vec![
        Artifact::text("cdma_ccdf.csv", ccdf_csv(&named)),
        Artifact::text("papr.csv", table("codes,papr_db_at_1e-3", &papr)),
    ];
    let values: Vec<f64> = papr.iter().map(|r| r[1]).collect();
    let data = json!({ "codes": [1, 2, 4, 8], "papr_db": values, "non_decreasing": ordered });
    let list: Vec<String> = values.iter().map(|v| format!("{v:.2}")).collect();
    Ok((
        format!("PAPR at 1e-3 for 1/2/4/8 codes: {} dB", list.join(" / ")),
        data,
        artifacts,
    ))
}

fn front_end(seed: u64) -> Result<Demo> {
    let mut rng = SimRng::new(seed);
    let shape = PulseShape::rrc(0.35);
    let n = 4000;
    let bits = rng.bits(2 * n);
    let st = map_bits(&bits, ModulationScheme::Qpsk, &mut rng)?;
    let sh = pulse_shape(&st, &shape, 8.0)?;
    let start = sh.group_delay_samples * 2;
    let clean = sample_symbols(&matched_filter(&sh.signal, &shape)?.samples, start, 8, n, 0);
    let full_scale = 4.0 * (sh.signal.mean_power() / 2.0).sqrt();
    let mut q_rows = Vec::new();
    for b in 3..=12u32 {
        let q = quantize(&sh.signal, b, full_scale)?;
        let y = sample_symbols(&matched_filter(&q, &shape)?.samples, start, 8, n, 0);
        q_rows.push(vec![b as f64, evm_rms(&y, &clean)?]);
    }
    let mut irr_rows = Vec::new();
    let tone: Vec<Complex64> = (0..4096)
        .map(|k| Complex64::from_polar(1.0, 2.0 * PI * 0.1 * k as f64))
        .collect();
    let tone = IqSignal::new(tone, 1.0)?;
    for g in [0.25, 0.5, 1.0, 2.0] {
        for e in [0.0, 2.0, 5.0] {
            let y = apply_iq_impairments(&tone, g, e, Complex64::new(0.0, 0.0))?;
            let (mut want, mut image) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for (k, v) in y.samples.iter().enumerate() {
                let w = Complex64::from_polar(1.0, -2.0 * PI * 0.1 * k as f64);
                want += v * w;
                image += v * w.conj();
            }
            let measured = 10.0 * (want.norm_sqr() / image.norm_sqr()).log10();
            irr_rows.push(vec![g, e, measured, image_rejection_ratio_db(g, e)]);
        }
    }
    let mut pa_rows = Vec::new();
    let ref_syms: Vec<Complex64> = clean.clone();
    for backoff in [0.0, 2.0, 4.0, 6.0, 8.0, 10.0] {
        let y = pa_nonlinearity(&sh.signal, 2.0, backoff)?;
        let z = sample_symbols(&matched_filter(&y, &shape)?.samples, start, 8, n, 0);
        // Remove the linear gain before comparing.
        let g: Complex64 = z.iter().zip(&ref_syms).map(|(a, b)| a * b.conj()).sum::<Complex64>()
            / ref_syms.iter().map(|b| b.norm_sqr()).sum::<f64>();
        let zn: Vec<Complex64> = z.iter().map(|v| v / g).collect();
        pa_rows.push(vec![backoff, evm_rms(&zn, &ref_syms)?]);
    }
    let evm: Vec<f64> = q_rows.iter().map(|r| r[1]).collect();
    let monotone = evm.windows(2).all(|w| w[1] < w[0]);
    let artifacts = vec![
        Artifact::text("quantizer_evm.csv", table("bits,evm_pct", &q_rows)),
        Artifact::text(
            "image_rejection.csv",
            table(
                "gain_imbalance_db,quadrature_offset_deg,measured_db,analytic_db",
                &irr_rows,
            ),
        ),
        Artifact::text("pa_backoff_evm.csv", table("input_backoff_db,evm_pct", &pa_rows)),
    ];
    let data = json!({ "bits": (3..=12).collect::<Vec<u32>>(), "evm_pct": evm, "monotone_decrease": monotone });
    Ok((
        format!(
            "quantizer EVM falls from {:.1}% at 3 bits to {:.3}% at 12 bits",
            evm[0],
            evm[evm.len() - 1]
        ),
        data,
        artifacts,
    ))
}

fn propagation(seed: u64) -> Result<Demo> {
    let mut rng = SimRng::new(seed);
    let model = PathLossModel {
        exponent_n: 3.2,
        ref_loss_db_at_d0: 40.0,
        d0_m: 1.0,
        shadowing_sigma_db: 6.0,
    };
    let samples: Vec<PathLossSample> = (0..200)
        .map(|_| {
            let d = 10f64.powf(rng.uniform_range(0.0, 3.0));
            Ok(PathLossSample {
                distance_m: d,
                loss_db: model.loss_db(d, &mut rng)?,
            })
        })
        .collect::<Result<_>>()?;
    let fit = fit_path_loss(&samples, 1.0)?;
    let pl_rows: Vec<Vec<f64>> = samples.iter().map(|s| vec![s.distance_m, s.loss_db]).collect();

    let fs = 1e6;
    let white = IqSignal::new((0..1 << 16).map(|_| rng.complex_gaussian(1.0)).collect(), fs)?;
    let two_ray = apply_tdl(&white, &preset("two-ray", seed)?, &mut rng)?;
    let fan_fs = 2000.0;
    let tone = IqSignal::new(vec![Complex64::new(1.0, 0.0); 1 << 15], fan_fs)?;
    let fan = apply_tdl(&tone, &preset("fan-fast", seed)?, &mut rng)?;
    let coh: Vec<Vec<f64>> = PRESET_NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let m = coherence_metrics(&preset(name, seed)?)?;
            Ok(vec![
                i as f64,
                m.rms_delay_spread_s,
                m.max_doppler_hz,
                m.coherence_bw_hz,
                m.coherence_time_s,
            ])
        })
        .collect::<Result<_>>()?;
    let artifacts = vec![
        Artifact::text("path_loss.csv", table("distance_m,loss_db", &pl_rows)),
        Artifact::text(
            "two_ray_psd.csv",
            psd_csv(&welch_psd(&two_ray, 1024, 0.5, Window::Hann)?),
        ),
        Artifact::text(
            "fan_doppler_psd.csv",
            psd_csv(&welch_psd(&fan, 1024, 0.5, Window::Hann)?),
        ),
        Artifact::text(
            "coherence.csv",
            table(
                &format!(
                    "preset_index,rms_delay_spread_s,max_doppler_hz,coherence_bw_hz,coherence_time_s  # {}",
                    PRESET_NAMES.join(" ")
                ),
                &coh,
            ),
        ),
    ];
    let data = json!({ "fitted_exponent": fit.exponent_n, "true_exponent": model.exponent_n, "two_ray_null_spacing_hz": 1.0 / 5e-6 });
    Ok((
        format!(
            "path-loss exponent {:.2} recovered from 200 shadowed points (true 3.2); two-ray nulls every 200 kHz",
            fit.exponent_n
        ),
        data,
        artifacts,
    ))
}

fn receiver(seed: u64) -> Result<Demo> {
    let mut rng = SimRng::new(seed);
    let fs = 256e3;
    let msg = "RECEIVER DESIGN LAB";
    let bits = text_to_bits(msg)?;
    let spec = FrameSpec::standard(ModulationScheme::Qpsk, bits.len());
    let tx = build_frame(&bits, &spec, fs, &mut rng)?;
    let mut s = vec![Complex64::new(0.0, 0.0); 400];
    let g = Complex64::from_polar(0.4, 1.0);
    s.extend(tx.signal.samples.iter().map(|v| v * g));
    s.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), 600));
    let sig = apply_cfo(&IqSignal::new(s, fs)?, 120.0, 0.0)?;
    let sig = add_noise(&sig, tx.signal.mean_power() * g.norm_sqr() / 10.0, &mut rng)?;
    let rx = run_receiver(&sig, &spec, Some(&bits))?;
    let before: Vec<Complex64> = rx.symbols.iter().map(|v| v * rx.channel_gain).collect();
    let artifacts = vec![
        Artifact::text("constellation_before_equalizer.csv", points_csv(&before)),
        Artifact::text("constellation.csv", points_csv(&rx.symbols)),
    ];
    let data = json!({
        "true_start_sample": 400 + tx.first_peak_sample,
        "fine_offset_samples": rx.fine_offset_samples,
        "coarse_metric": rx.coarse_metric,
        "cfo_true_hz": 120.0,
        "cfo_hat_hz": rx.cfo_hat_hz,
        "channel_gain_true": [g.re, g.im],
        "channel_gain_hat": [rx.channel_gain.re, rx.channel_gain.im],
        "evm_pct": rx.evm_pct,
        "ber": rx.ber,
        "message": rx.message_text,
    });
    Ok((
        format!(
            "CFO {:.1} Hz (true 120), BER {}, message \"{}\"",
            rx.cfo_hat_hz,
            rx.ber.unwrap_or(1.0),
            rx.message_text.clone().unwrap_or_default()
        ),
        data,
        artifacts,
    ))
}

fn ofdm(seed: u64) -> Result<Demo> {
    let cps = [8usize, 16, 24, 32];
    let grid: Vec<OfdmConfig> = cps
        .iter()
        .map(|&cp| OfdmConfig::new(64, cp, 52, ModulationScheme::Qam16, 200))
        .collect();
    let fixture = SweepFixture {
        channel: Multipath::two_tap(20, -3.0),
        snr_db: 40.0,
        eps: 0.0,
        seed,
    };
    let rows = parameter_sweep(&grid, &fixture)?;
    let cp_rows: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.config.cp_len as f64, r.ber, r.evm_pct])
        .collect();
    let fft_grid: Vec<OfdmConfig> = [64usize, 256, 1024]
        .iter()
        .map(|&n| OfdmConfig::new(n, n / 4, n * 13 / 16, ModulationScheme::Qpsk, 200_000 / n))
        .collect();
    let clean = SweepFixture {
        channel: Multipath::default(),
        snr_db: f64::INFINITY,
        eps: 0.0,
        seed,
    };
    let papr_rows: Vec<Vec<f64>> = parameter_sweep(&fft_grid, &clean)?
        .iter()
        .map(|r| vec![r.config.fft_size as f64, r.papr_db])
        .collect();
    let artifacts = vec![
        Artifact::text("ber_vs_cp.csv", table("cp_len,ber,evm_pct", &cp_rows)),
        Artifact::text("papr_vs_fft.csv", table("fft_size,papr_db_at_1e-3", &papr_rows)),
    ];
    let ber: Vec<f64> = cp_rows.iter().map(|r| r[1]).collect();
    let data = json!({ "echo_delay_samples": 20, "cp_len": cps, "ber": ber });
    Ok((
        format!(
            "echo at 20 samples: BER {:.2e}/{:.2e} for CP 8/16, {:.0e}/{:.0e} for CP 24/32",
            ber[0], ber[1], ber[2], ber[3]
        ),
        data,
        artifacts,
    ))
}
