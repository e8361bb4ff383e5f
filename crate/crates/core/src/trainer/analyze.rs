use std::fmt::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::Artifact;
use crate::error::{Result, VlabError};
use crate::signal::{
    default_ccdf_thresholds, eye_diagram, linear_to_db, papr_at_probability, papr_ccdf, spectrogram, welch_psd,
    CcdfCurve, EyeGrid, IqSignal, PsdEstimate, Rail, Spectrogram, Window,
};

const MAX_EYE_TRACES: usize = 200;
const SPECTROGRAM_FFT: usize = 256;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOptions {
    #[serde(default)]
    pub psd: bool,
    #[serde(default)]
    pub ccdf: bool,
    #[serde(default)]
    pub eye_sps: Option<usize>,
    #[serde(default)]
    pub spectrogram: bool,
}

pub(crate) fn psd_view(signal: &IqSignal) -> Result<PsdEstimate> {
    let seg = 1024usize.min(1 << signal.len().max(2).ilog2());
    welch_psd(signal, seg, 0.5, Window::Hann)
}

pub(crate) fn psd_csv(psd: &PsdEstimate) -> String {
    let mut s = String::from("freq_hz,power_db\n");
    for (f, p) in psd.freq_bins_hz.iter().zip(&psd.power_db) {
        writeln!(s, "{f},{p}").unwrap();
    }
    s
}

pub(crate) fn ccdf_csv(curves: &[(&str, &CcdfCurve)]) -> String {
    let mut s = String::from("threshold_db");
    for (name, _) in curves {
        write!(s, ",{name}").unwrap();
    }
    s.push('\n');
    for (i, t) in curves[0].1.threshold_db.iter().enumerate() {
        write!(s, "{t}").unwrap();
        for (_, c) in curves {
            write!(s, ",{}", c.prob_exceed[i]).unwrap();
        }
        s.push('\n');
    }
    s
}

pub(crate) fn eye_csv(eye: &EyeGrid) -> String {
    let mut s = String::new();
    for row in eye.traces.iter().take(MAX_EYE_TRACES) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub(crate) fn spectrogram_csv(sg: &Spectrogram) -> String {
    let mut s = String::from("time_s");
    for f in &sg.freq_bins_hz {
        write!(s, ",{f}").unwrap();
    }
    s.push('\n');
    for (t, row) in sg.frame_times_s.iter().zip(&sg.power_db) {
        write!(s, "{t}").unwrap();
        for p in row {
            write!(s, ",{p}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub(crate) fn points_csv(points: &[num_complex::Complex64]) -> String {
    let mut s = String::from("i,q\n");
    for p in points {
        writeln!(s, "{},{}", p.re, p.im).unwrap();
    }
    s
}

/// Requested views as CSV files plus `summary.json`.
pub fn analyze(signal: &IqSignal, opts: &AnalyzeOptions) -> Result<Vec<Artifact>> {
    if signal.is_empty() {
        return Err(VlabError::EmptySignal);
    }
    let mut out = Vec::new();
    let mut views = Vec::new();
    if opts.psd {
        let psd = psd_view(signal)?;
        out.push(Artifact::text("psd.csv", psd_csv(&psd)));
        views.push("psd");
    }
    if opts.ccdf {
        let c = papr_ccdf(signal, &default_ccdf_thresholds())?;
        out.push(Artifact::text("ccdf.csv", ccdf_csv(&[("prob_exceed", &c)])));
        views.push("ccdf");
    }
    if let Some(sps) = opts.eye_sps {
        if sps == 0 {
            return Err(VlabError::param("eye", "samples per symbol must be >= 1"));
        }
        let eye = eye_diagram(signal, sps, 0, Rail::I)?;
        out.push(Artifact::text("eye.csv", eye_csv(&eye)));
        views.push("eye");
    }
    if opts.spectrogram {
        let n = SPECTROGRAM_FFT.min(signal.len());
        let sg = spectrogram(signal, n, n.div_ceil(2), Window::Hann)?;
        out.push(Artifact::text("spectrogram.csv", spectrogram_csv(&sg)));
        views.push("spectrogram");
    }
    let mean = signal.mean_power();
    let summary = json!({
        "n_samples": signal.len(),
        "sample_rate_hz": signal.sample_rate_hz,
        "duration_s": signal.duration_s(),
        "mean_power_db": if mean > 0.0 { Some(linear_to_db(mean)) } else { None },
        "papr_db_at_1e-3": if mean > 0.0 { Some(papr_at_probability(&signal.samples, 1e-3)?) } else { None },
        "views": views,
    });
    out.push(Artifact::json("summary.json", &summary)?);
    Ok(out)
}
