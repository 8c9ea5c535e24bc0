//! Synthetic physiological recordings with known ground truth.
//!
//! Every generator is seeded through [`crate::seed`], so the same master
//! seed reproduces bit-identical sessions. Signal content is built from
//! calibrated parts: band-limited noise whose in-band power matches the
//! request, event-locked potential bumps, biphasic blink artifacts that
//! bleed into frontal channels, and an eye-openness trace whose closure
//! fraction follows a drowsiness profile.

mod script;
mod signal;
mod usecase;

pub use script::{Block, EyePlan, OcularPlan, SessionScript, Stimulus, TelemetryPlan};
pub use signal::{
    blink_times, blink_waveform, gen_background_eeg, gen_eye_openness, gen_modulated_eeg,
    inject_erp, render_pulses, ErpTemplate,
};
pub use usecase::{
    build_distraction, build_drowsiness, build_emotions, build_p300_auth, simulate_session,
    SubjectParams, UC1_CHANNELS, UC2_CHANNELS, UC3_CHANNELS, UC3_LEVELS, UC4_CHANNELS,
};

use crate::dsp::DspError;
use crate::features::FeatureError;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("band ({low}, {high}) Hz does not fit inside (0, {nyquist}) Hz at this rate")]
    BandOutsideNyquist { low: f64, high: f64, nyquist: f64 },
    #[error("{message}")]
    Shape { message: String },
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

pub(crate) fn shape_err(message: impl Into<String>) -> SynthError {
    SynthError::Shape { message: message.into() }
}
