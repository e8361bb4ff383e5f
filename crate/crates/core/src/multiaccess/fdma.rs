use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VlabError};
use crate::signal::{resample, welch_psd, IqSignal, Window};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub user_id: u32,
    pub center_offset_hz: f64,
    pub bandwidth_hz: f64,
}

impl Allocation {
    pub fn low_hz(&self) -> f64 {
        self.center_offset_hz - self.bandwidth_hz / 2.0
    }

    pub fn high_hz(&self) -> f64 {
        self.center_offset_hz + self.bandwidth_hz / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPlan {
    pub users: Vec<Allocation>,
    /// Gap between neighbouring allocations; negative means overlap.
    #[serde(default)]
    pub guard_hz: f64,
}

impl BandPlan {
    /// `n` equal allocations side by side, centred on 0 Hz.
    pub fn contiguous(n: usize, bandwidth_hz: f64, guard_hz: f64) -> Self {
        let step = bandwidth_hz + guard_hz;
        let first = -(n as f64 - 1.0) * step / 2.0;
        let users = (0..n)
            .map(|i| Allocation {
                user_id: i as u32,
                center_offset_hz: first + i as f64 * step,
                bandwidth_hz,
            })
            .collect();
        BandPlan { users, guard_hz }
    }

    pub fn span_hz(&self) -> f64 {
        let lo = self.users.iter().map(Allocation::low_hz).fold(f64::INFINITY, f64::min);
        let hi = self
            .users
            .iter()
            .map(Allocation::high_hz)
            .fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    pub fn validate(&self, composite_rate_hz: f64) -> Result<()> {
        if self.users.is_empty() {
            return Err(VlabError::param("plan", "no allocations"));
        }
        if self.users.iter().any(|a| !(a.bandwidth_hz > 0.0)) {
            return Err(VlabError::param("plan", "bandwidths must be positive"));
        }
        let nyq = composite_rate_hz / 2.0;
        if self.span_hz() >= composite_rate_hz || self.users.iter().any(|a| a.low_hz() < -nyq || a.high_hz() > nyq) {
            return Err(VlabError::param(
                "plan",
                format!("band plan exceeds Nyquist at {composite_rate_hz} Hz"),
            ));
        }
        Ok(())
    }
}

/// Smallest power-of-two multiple of `max_user_rate_hz` whose Nyquist band
/// holds the plan.
pub fn composite_rate(max_user_rate_hz: f64, plan: &BandPlan) -> f64 {
    let mut rate = max_user_rate_hz;
    while plan.validate(rate).is_err() && rate < max_user_rate_hz * 65536.0 {
        rate *= 2.0;
    }
    rate
}

/// Resamples each user to the composite rate, shifts it to its allocation
/// and sums. Output length is the longest resampled user.
pub fn fdma_compose(signals: &[IqSignal], plan: &BandPlan, composite_rate_hz: f64) -> Result<IqSignal> {
    plan.validate(composite_rate_hz)?;
    if signals.len() != plan.users.len() {
        return Err(VlabError::LengthMismatch {
            left: signals.len(),
            right: plan.users.len(),
        });
    }
    let shifted: Vec<Vec<Complex64>> = signals
        .iter()
        .zip(&plan.users)
        .map(|(s, a)| {
            let r = resample(s, composite_rate_hz)?;
            let step = a.center_offset_hz / composite_rate_hz;
            Ok(r.samples
                .iter()
                .enumerate()
                .map(|(k, v)| v * Complex64::from_polar(1.0, 2.0 * PI * (step * k as f64).fract()))
                .collect())
        })
        .collect::<Result<_>>()?;
    let n = shifted.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for s in &shifted {
        for (o, v) in out.iter_mut().zip(s) {
            *o += v;
        }
    }
    Ok(IqSignal::new(out, composite_rate_hz)?.with_label("fdma"))
}

/// Signal-to-interference ratio inside `user`'s allocation: that user's
/// band power over everyone else's, from Welch PSDs of the two partial
/// compositions.
pub fn fdma_sir_db(signals: &[IqSignal], plan: &BandPlan, composite_rate_hz: f64, user: usize) -> Result<f64> {
    if user >= signals.len() {
        return Err(VlabError::param("user", "index out of range"));
    }
    let silent = |keep: &dyn Fn(usize) -> bool| -> Vec<IqSignal> {
        signals
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut c = s.clone();
                if !keep(i) {
                    c.samples.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                }
                c
            })
            .collect()
    };
    let wanted = fdma_compose(&silent(&|i| i == user), plan, composite_rate_hz)?;
    let others = fdma_compose(&silent(&|i| i != user), plan, composite_rate_hz)?;
    let seg = 1024.min(wanted.len());
    let a = plan.users[user];
    let ps = welch_psd(&wanted, seg, 0.5, Window::Hann)?.band_power(a.low_hz(), a.high_hz());
    let pi = welch_psd(&others, seg, 0.5, Window::Hann)?.band_power(a.low_hz(), a.high_hz());
    if pi <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (ps / pi).log10())
}
