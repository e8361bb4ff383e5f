use super::{Doppler, FanParams, Tap, TdlChannel};
use crate::error::{Result, VlabError};

pub const PRESET_NAMES: [&str; 7] = [
    "flat",
    "two-ray",
    "exp-pdp-short",
    "exp-pdp-long",
    "fan-slow",
    "fan-fast",
    "doubly-dispersive",
];

fn exp_pdp(n: usize, step_s: f64, decay_db_per_tap: f64, doppler: Doppler) -> Vec<Tap> {
    (0..n)
        .map(|i| Tap {
            delay_s: i as f64 * step_s,
            power_db: -decay_db_per_tap * i as f64,
            doppler,
        })
        .collect()
}

fn fan(rot_hz: f64) -> Doppler {
    Doppler::Fan(FanParams {
        rot_hz,
        blades: 3,
        f_max_hz: 4.0 * rot_hz,
        duty: 0.3,
    })
}

/// Named channel profiles. Delays suit sample rates around 1 MHz.
pub fn preset(name: &str, seed: u64) -> Result<TdlChannel> {
    let taps = match name {
        "flat" => vec![Tap {
            delay_s: 0.0,
            power_db: 0.0,
            doppler: Doppler::Static,
        }],
        "two-ray" => vec![
            Tap {
                delay_s: 0.0,
                power_db: 0.0,
                doppler: Doppler::Fixed { phase_rad: 0.0 },
            },
            Tap {
                delay_s: 5e-6,
                power_db: 0.0,
                doppler: Doppler::Fixed { phase_rad: 0.0 },
            },
        ],
        "exp-pdp-short" => exp_pdp(5, 1e-6, 3.0, Doppler::Static),
        "exp-pdp-long" => exp_pdp(9, 2e-6, 1.5, Doppler::Static),
        "fan-slow" => vec![Tap {
            delay_s: 0.0,
            power_db: 0.0,
            doppler: fan(2.0),
        }],
        "fan-fast" => vec![Tap {
            delay_s: 0.0,
            power_db: 0.0,
            doppler: fan(10.0),
        }],
        "doubly-dispersive" => {
            let mut t = exp_pdp(5, 1e-6, 3.0, Doppler::Jakes { f_max_hz: 50.0 });
            t[0].doppler = fan(5.0);
            t
        }
        other => return Err(VlabError::param("channel", format!("unknown preset `{other}`"))),
    };
    Ok(TdlChannel::new(taps, seed))
}
