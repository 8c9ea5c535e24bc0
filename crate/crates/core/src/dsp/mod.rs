//! Digital signal processing: filter design and application, rational
//! resampling, FastICA-based artifact removal, and epoching.
//!
//! Conventions used throughout:
//!
//! * Signals are `ndarray::Array2<f64>` with shape samples x channels.
//! * Sample rates are Hz as `f64`; frequencies are Hz.
//! * All filters are cascades of second-order sections (biquads), which
//!   stay numerically well behaved at the orders used here.

pub mod epoch;
pub mod filter;
pub mod ica;
pub mod resample;

pub use epoch::{epoch_around_events, epoch_fixed, Epoch, EventEpochReport};
pub use filter::{apply_filter, design_bandpass, design_notch, FilterMode, SosFilter, StreamingFilter};
pub use ica::{fast_ica, remove_artifact_components, IcaModel, IcaReport};
pub use resample::{resample, Resampler};

/// Errors raised by DSP operations. Every variant names the parameter that
/// was rejected so scenario authors can fix the document, not read code.
#[derive(Debug, thiserror::Error)]
pub enum DspError {
    #[error("filter frequency {f} Hz outside (0, {nyquist}) for srate {srate} Hz")]
    FrequencyOutOfRange { f: f64, nyquist: f64, srate: f64 },
    #[error("band edges ({low}, {high}) invalid: need 0 < low < high < {nyquist} Hz")]
    BadBandEdges { low: f64, high: f64, nyquist: f64 },
    #[error("filter order {order} unsupported (expected 1..={max})")]
    BadOrder { order: usize, max: usize },
    #[error("notch quality factor must be positive, got {q}")]
    BadQ { q: f64 },
    #[error("resample ratio {from} Hz -> {to} Hz needs denominator {denom} > {max}")]
    RatioTooFine { from: f64, to: f64, denom: u64, max: u64 },
    #[error("sample rate must be positive and finite, got {srate}")]
    BadSampleRate { srate: f64 },
    #[error("{op}: input must be non-empty")]
    EmptyInput { op: &'static str },
    #[error("ICA component count {requested} exceeds channel count {channels}")]
    TooManyComponents { requested: usize, channels: usize },
    #[error("ICA needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("epoch duration {duration} s at {srate} Hz yields no samples")]
    EmptyEpoch { duration: f64, srate: f64 },
}
