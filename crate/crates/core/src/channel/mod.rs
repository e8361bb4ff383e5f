//! Propagation: log-distance path loss with shadowing, tapped delay lines
//! with Doppler (Jakes and the rotating-fan emulator), and coherence
//! rules of thumb.

mod pathloss;
mod presets;
mod survey;
mod tdl;

pub use pathloss::{fit_path_loss, path_loss_apply, PathLossFit, PathLossModel, PathLossSample};
pub use presets::{preset, PRESET_NAMES};
pub use survey::{fm_survey, FmStation, FmSurvey};
pub use tdl::{
    apply_tdl, coherence_metrics, fan_doppler, CoherenceMetrics, Doppler, FanParams, Tap, TdlChannel, JAKES_SINUSOIDS,
};
