use serde::{Deserialize, Serialize};

use crate::error::{Result, VlabError};
use crate::signal::{db_to_amplitude, IqSignal, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub exponent_n: f64,
    pub ref_loss_db_at_d0: f64,
    pub d0_m: f64,
    #[serde(default)]
    pub shadowing_sigma_db: f64,
}

impl PathLossModel {
    fn validate(&self) -> Result<()> {
        if !(self.d0_m > 0.0) {
            return Err(VlabError::param("d0_m", "must be positive"));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(VlabError::param("shadowing_sigma_db", "must be non-negative"));
        }
        Ok(())
    }

    /// Deterministic part of the loss.
    pub fn mean_loss_db(&self, distance_m: f64) -> f64 {
        self.ref_loss_db_at_d0 + 10.0 * self.exponent_n * (distance_m / self.d0_m).log10()
    }

    /// One loss draw including shadowing.
    pub fn loss_db(&self, distance_m: f64, rng: &mut SimRng) -> Result<f64> {
        self.validate()?;
        if !(distance_m >= self.d0_m) {
            return Err(VlabError::param(
                "distance_m",
                format!("{distance_m} is below d0 = {}", self.d0_m),
            ));
        }
        let shadow = if self.shadowing_sigma_db > 0.0 {
            self.shadowing_sigma_db * rng.gaussian()
        } else {
            0.0
        };
        Ok(self.mean_loss_db(distance_m) + shadow)
    }
}

/// Scales the signal by one loss draw.
pub fn path_loss_apply(
    signal: &IqSignal,
    model: &PathLossModel,
    distance_m: f64,
    rng: &mut SimRng,
) -> Result<IqSignal> {
    let g = db_to_amplitude(-model.loss_db(distance_m, rng)?);
    let mut out = signal.clone();
    out.samples.iter_mut().for_each(|s| *s *= g);
    Ok(out)
}

/// One measured (distance, path loss) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossSample {
    pub distance_m: f64,
    pub loss_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossFit {
    pub exponent_n: f64,
    pub ref_loss_db: f64,
    /// Residual standard deviation (n - 2 degrees of freedom; 0 for two points).
    pub sigma_db: f64,
}

/// Least squares of loss on `10*log10(d/d0)`. Needs at least two distinct
/// distances.
pub fn fit_path_loss(measurements: &[PathLossSample], d0_m: f64) -> Result<PathLossFit> {
    if !(d0_m > 0.0) {
        return Err(VlabError::param("d0_m", "must be positive"));
    }
    if measurements
        .iter()
        .any(|m| !(m.distance_m > 0.0) || !m.loss_db.is_finite())
    {
        return Err(VlabError::param(
            "measurements",
            "distances must be positive, losses finite",
        ));
    }
    let xs: Vec<f64> = measurements
        .iter()
        .map(|m| 10.0 * (m.distance_m / d0_m).log10())
        .collect();
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return Err(VlabError::InsufficientSamples {
            needed: 2,
            got: xs.len(),
        });
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = measurements.iter().map(|m| m.loss_db).sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-12 * n {
        return Err(VlabError::param("measurements", "all distances identical"));
    }
    let sxy: f64 = xs
        .iter()
        .zip(measurements)
        .map(|(x, m)| (x - mx) * (m.loss_db - my))
        .sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(measurements)
        .map(|(x, m)| (m.loss_db - icept - slope * x).powi(2))
        .sum();
    let sigma = if xs.len() > 2 { (rss / (n - 2.0)).sqrt() } else { 0.0 };
    Ok(PathLossFit {
        exponent_n: slope,
        ref_loss_db: icept,
        sigma_db: sigma,
    })
}
