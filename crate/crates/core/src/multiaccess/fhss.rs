use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VlabError};
use crate::signal::{spectrogram, IqSignal, Spectrogram, Window};

/// Translates hop `i` (samples `[i*hop_len, (i+1)*hop_len)`) by
/// `hop_pattern[i % len]`.
pub fn fhss_apply(signal: &IqSignal, hop_pattern: &[f64], hop_len: usize) -> Result<IqSignal> {
    if hop_pattern.is_empty() || hop_len == 0 {
        return Err(VlabError::param(
            "hop_pattern",
            "need at least one hop and hop_len >= 1",
        ));
    }
    let fs = signal.sample_rate_hz;
    if let Some(f) = hop_pattern.iter().find(|f| f.abs() >= fs / 2.0) {
        return Err(VlabError::param("hop_pattern", format!("{f} Hz outside Nyquist")));
    }
    let mut out = signal.clone();
    for (k, s) in out.samples.iter_mut().enumerate() {
        let f = hop_pattern[(k / hop_len) % hop_pattern.len()] / fs;
        *s *= Complex64::from_polar(1.0, 2.0 * PI * (f * k as f64).fract());
    }
    Ok(out)
}

/// One spectrogram ridge attributed to a candidate pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopRidge {
    /// 0 is the strongest ridge.
    pub rank: usize,
    pub pattern_id: usize,
    pub mean_power_db: f64,
    pub match_fraction: f64,
}

fn min_spacing(candidates: &[Vec<f64>]) -> f64 {
    let mut f: Vec<f64> = candidates.iter().flatten().copied().collect();
    f.sort_by(|a, b| a.partial_cmp(b).unwrap());
    f.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    f.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

fn frames(signal: &IqSignal, hop_len: usize) -> Result<Spectrogram> {
    let n = (hop_len / 2).max(16).min(signal.len());
    spectrogram(signal, n, n, Window::Hann)
}

/// Separates the `n_ridges` strongest simultaneous ridges per frame and
/// attributes each (strongest first) to the candidate pattern it follows
/// most often. Hops are assumed to start at sample 0.
pub fn identify_hop_pattern(
    composite: &IqSignal,
    candidates: &[Vec<f64>],
    hop_len: usize,
    n_ridges: usize,
) -> Result<Vec<HopRidge>> {
    if candidates.is_empty() || candidates.iter().any(Vec::is_empty) {
        return Err(VlabError::param("candidates", "need non-empty patterns"));
    }
    if n_ridges == 0 || n_ridges > candidates.len() {
        return Err(VlabError::param("n_ridges", "must be in 1..=candidates"));
    }
    let sg = frames(composite, hop_len)?;
    let df = sg.freq_bins_hz[1] - sg.freq_bins_hz[0];
    let spacing = min_spacing(candidates);
    let tol = if spacing.is_finite() {
        spacing / 2.0
    } else {
        composite.sample_rate_hz
    };
    let excl = ((tol / df).floor() as usize).max(1);
    let n_frames = sg.power_db.len();
    // ridge[r][frame] = (freq, power_db)
    let mut ridge = vec![Vec::with_capacity(n_frames); n_ridges];
    for row in &sg.power_db {
        let mut taken = vec![false; row.len()];
        for r in ridge.iter_mut() {
            let (b, p) =
                row.iter()
                    .enumerate()
                    .filter(|(i, _)| !taken[*i])
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc },
                    );
            for t in taken
                .iter_mut()
                .take((b + excl + 1).min(row.len()))
                .skip(b.saturating_sub(excl))
            {
                *t = true;
            }
            r.push((sg.freq_bins_hz[b], p));
        }
    }
    let mut used = vec![false; candidates.len()];
    let mut out = Vec::new();
    for (rank, track) in ridge.iter().enumerate() {
        let score = |pat: &Vec<f64>| {
            let hits = track
                .iter()
                .enumerate()
                .filter(|(fi, (f, _))| {
                    let mid = fi * sg.hop + sg.fft_len / 2;
                    (f - pat[(mid / hop_len) % pat.len()]).abs() <= tol
                })
                .count();
            hits as f64 / n_frames as f64
        };
        let (id, frac) = candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, p)| (i, score(p)))
            .fold((usize::MAX, -1.0), |acc, (i, s)| if s > acc.1 { (i, s) } else { acc });
        used[id] = true;
        let mean_power_db = track.iter().map(|t| t.1).sum::<f64>() / n_frames as f64;
        out.push(HopRidge {
            rank,
            pattern_id: id,
            mean_power_db,
            match_fraction: frac,
        });
    }
    Ok(out)
}

/// Sample positions where the dominant ridge moves, from a spectrogram with
/// frames of half a hop.
pub fn hop_boundaries(signal: &IqSignal, hop_len: usize) -> Result<Vec<usize>> {
    let sg = frames(signal, hop_len)?;
    let bins = sg.ridge_bins();
    Ok(bins
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].abs_diff(w[1]) > 1)
        .map(|(i, _)| (i + 1) * sg.hop)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impairments::add_noise;
    use crate::modem::{map_bits, ModulationScheme};
    use crate::shaping::{pulse_shape, PulseShape};
    use crate::signal::{tone, SimRng};

    fn narrowband(n_sym: usize, fs: f64, power_db: f64, rng: &mut SimRng) -> IqSignal {
        let bits = rng.bits(2 * n_sym);
        let st = map_bits(&bits, ModulationScheme::Qpsk, rng).unwrap();
        let mut s = pulse_shape(&st, &PulseShape::rrc(0.35).with_sps(32), fs)
            .unwrap()
            .signal;
        let g = 10f64.powf(power_db / 20.0);
        s.samples.iter_mut().for_each(|v| *v *= g);
        s
    }

    #[test]
    fn single_hop_is_plain_shift() {
        let s = tone(0.0, 1000.0, 500);
        let y = fhss_apply(&s, &[100.0], 50).unwrap();
        for (a, b) in y.samples.iter().zip(&tone(100.0, 1000.0, 500).samples) {
            assert!((a - b).norm() < 1e-9);
        }
        assert!(fhss_apply(&s, &[600.0], 50).is_err());
    }

    #[test]
    fn clean_boundaries_within_one_frame() {
        let fs = 1e5;
        let hop = 1000;
        let pat = [-30e3, 10e3, 25e3, -5e3];
        let y = fhss_apply(&tone(0.0, fs, 8 * hop), &pat, hop).unwrap();
        let b = hop_boundaries(&y, hop).unwrap();
        let want: Vec<usize> = (1..8).map(|i| i * hop).collect();
        assert_eq!(b.len(), want.len(), "{b:?}");
        for (g, w) in b.iter().zip(&want) {
            assert!(g.abs_diff(*w) <= hop / 2, "{g} vs {w}");
        }
    }

    #[test]
    fn two_users_attributed_by_power() {
        let fs = 1e5;
        let hop = 2048;
        let candidates = vec![
            vec![-40e3, -10e3, 20e3, 35e3, 0.0, -25e3],
            vec![30e3, 5e3, -30e3, -15e3, 40e3, 15e3],
            vec![10e3, 25e3, -5e3, -35e3, 20e3, 45e3],
        ];
        let mut ok = 0;
        for seed in 0..100 {
            let mut rng = SimRng::new(seed);
            let (p_strong, p_weak) = if seed % 2 == 0 { (0, 1) } else { (1, 0) };
            let n = 12 * hop;
            let mut a = narrowband(n / 32, fs, 0.0, &mut rng);
            let mut b = narrowband(n / 32, fs, -10.0, &mut rng);
            a.samples.truncate(n);
            b.samples.truncate(n);
            let a = fhss_apply(&a, &candidates[p_strong], hop).unwrap();
            let b = fhss_apply(&b, &candidates[p_weak], hop).unwrap();
            let mut sum = a.clone();
            sum.samples.iter_mut().zip(&b.samples).for_each(|(x, y)| *x += y);
            let noisy = add_noise(&sum, a.mean_power() / 100.0, &mut rng).unwrap();
            let r = identify_hop_pattern(&noisy, &candidates, hop, 2).unwrap();
            if r[0].pattern_id == p_strong && r[1].pattern_id == p_weak && r[0].mean_power_db > r[1].mean_power_db {
                ok += 1;
            }
        }
        assert!(ok >= 95, "{ok}/100");
    }
}
