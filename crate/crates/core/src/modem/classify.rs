//! Blind scheme ranking on synchronized symbols.
//!
//! Score: mean per-symbol log-likelihood of a Gaussian mixture centred on the
//! candidate alphabet, after a phase search over the alphabet's rotational
//! symmetry and an EM fit of amplitude scale and noise variance. Mixture
//! weights are uniform, so an alphabet that contains the true one as a subset
//! pays `log(M_big / M_small)` per symbol.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{alphabet_at, ModulationScheme};
use crate::error::{Result, VlabError};

pub const MIN_SYMBOLS: usize = 256;
const SIGMA2_FLOOR: f64 = 1e-4;
const COARSE_STEPS: usize = 64;
const FINE_STEPS: usize = 16;
const EM_ITERATIONS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeScore {
    pub scheme: ModulationScheme,
    /// Mean log-likelihood per symbol (nats); higher is better.
    pub score: f64,
    pub phase_rad: f64,
    pub noise_var: f64,
}

fn symmetry_period(s: ModulationScheme) -> f64 {
    use ModulationScheme::*;
    match s {
        Bpsk | Pi2Bpsk => PI,
        Psk8 => FRAC_PI_4,
        _ => FRAC_PI_2,
    }
}

struct Model {
    /// Alphabet for even and odd symbol indices.
    even: Vec<Complex64>,
    odd: Vec<Complex64>,
}

impl Model {
    fn new(s: ModulationScheme) -> Self {
        Model {
            even: alphabet_at(s, 0),
            odd: alphabet_at(s, 1),
        }
    }

    // pi/2-BPSK has period 4 in k, but j^2 = -1 leaves the pair unchanged.
    fn at(&self, k: usize) -> &[Complex64] {
        if k.is_multiple_of(2) {
            &self.even
        } else {
            &self.odd
        }
    }
}

fn hard_cost(r: &[Complex64], model: &Model, rot: Complex64) -> f64 {
    r.iter()
        .enumerate()
        .map(|(k, x)| {
            let y = x * rot;
            model
                .at(k)
                .iter()
                .map(|c| (y - c).norm_sqr())
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

fn em_fit(r: &[Complex64], model: &Model) -> (f64, f64) {
    let n = r.len() as f64;
    let mut a = 1.0f64;
    let mut s2 = (r
        .iter()
        .enumerate()
        .map(|(k, x)| {
            model
                .at(k)
                .iter()
                .map(|c| (x - c).norm_sqr())
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / n)
        .max(SIGMA2_FLOOR);
    let mut loglik = 0.0;
    let mut resp = Vec::new();
    for _ in 0..EM_ITERATIONS {
        let mut num_a = 0.0;
        let mut den_a = 0.0;
        let mut err = 0.0;
        loglik = 0.0;
        for (k, x) in r.iter().enumerate() {
            let alpha = model.at(k);
            resp.clear();
            resp.extend(alpha.iter().map(|c| -(x - a * c).norm_sqr() / s2));
            let mx = resp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = resp.iter().map(|v| (v - mx).exp()).sum();
            loglik += mx + sum.ln() - (alpha.len() as f64).ln() - (PI * s2).ln();
            for (g, c) in resp.iter().zip(alpha) {
                let w = (g - mx).exp() / sum;
                num_a += w * (c.conj() * x).re;
                den_a += w * c.norm_sqr();
                err += w * (x - a * c).norm_sqr();
            }
        }
        s2 = (err / n).max(SIGMA2_FLOOR);
        if den_a > 0.0 {
            a = (num_a / den_a).max(1e-3);
        }
    }
    (loglik / n, s2)
}

/// Ranks candidate schemes, best first. Symbols must be at symbol rate and
/// timing-synchronized; carrier phase may be arbitrary.
pub fn classify_modulation(symbols: &[Complex64], candidates: &[ModulationScheme]) -> Result<Vec<SchemeScore>> {
    if symbols.len() < MIN_SYMBOLS {
        return Err(VlabError::InsufficientSamples {
            needed: MIN_SYMBOLS,
            got: symbols.len(),
        });
    }
    if candidates.is_empty() {
        return Err(VlabError::param("candidates", "empty candidate set"));
    }
    let p = crate::signal::mean_power(symbols);
    if p <= 0.0 {
        return Err(VlabError::ZeroPower);
    }
    let norm: Vec<Complex64> = symbols.iter().map(|s| s / p.sqrt()).collect();

    let mut out = Vec::with_capacity(candidates.len());
    for &scheme in candidates {
        let model = Model::new(scheme);
        let period = symmetry_period(scheme);
        let step = period / COARSE_STEPS as f64;
        let search = |thetas: &mut dyn Iterator<Item = f64>| {
            thetas
                .map(|t| (t, hard_cost(&norm, &model, Complex64::from_polar(1.0, t))))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap()
                .0
        };
        let coarse = search(&mut (0..COARSE_STEPS).map(|i| i as f64 * step));
        let fine = search(&mut (0..=2 * FINE_STEPS).map(|i| coarse - step + i as f64 * step / FINE_STEPS as f64));
        let rot = Complex64::from_polar(1.0, fine);
        let derot: Vec<Complex64> = norm.iter().map(|x| x * rot).collect();
        let (score, noise_var) = em_fit(&derot, &model);
        out.push(SchemeScore {
            scheme,
            score,
            phase_rad: -fine,
            noise_var,
        });
    }
    out.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
    Ok(out)
}
