//! Session scripts: the declarative ground-truth plan a synthetic
//! recording is generated from.

use ndarray::Array2;

use super::signal::ErpTemplate;

/// One experimental block: a time span with a condition label, the EEG
/// band-power profile active inside it, and a latent drowsiness level.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub t0: f64,
    pub t1: f64,
    pub label: String,
    /// Latent drowsiness in [0, 1]; drives eye closures.
    pub drowsiness: f64,
    /// channel x band in-band power for this block.
    pub band_powers: Array2<f64>,
}

/// One stimulus presentation.
#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    pub t: f64,
    pub label: String,
    pub target: bool,
}

/// Electro-oculogram plan: a two-channel (`heog`, `veog`) stream at the
/// EEG rate plus blink bleed-through into the EEG channels.
#[derive(Debug, Clone, PartialEq)]
pub struct OcularPlan {
    pub srate: f64,
    /// Blinks per second.
    pub blink_rate: f64,
    /// Peak blink amplitude on `veog`.
    pub blink_amplitude: f64,
    /// Additive blink weight per EEG channel (frontal sites large).
    pub bleed: Vec<f64>,
}

/// Eye-tracker plan: a single `openness` channel.
#[derive(Debug, Clone, PartialEq)]
pub struct EyePlan {
    pub srate: f64,
}

/// Vehicle telemetry plan: `speed` and `steering` channels. Steering
/// variability can differ per block (distraction shows up in corrections).
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryPlan {
    pub srate: f64,
    pub speed_mean: f64,
    /// Baseline steering power.
    pub steering_base: f64,
    /// Per-block steering power (same length as the block list).
    pub steering_by_block: Vec<f64>,
}

/// Everything needed to synthesize one session deterministically.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionScript {
    pub session: String,
    pub subject: String,
    pub scenario: String,
    /// Master seed; every internal generator derives from it and the
    /// session name, while subject traits derive from the seed alone so a
    /// subject keeps their physiology across sessions.
    pub seed: u64,
    pub duration: f64,
    pub eeg_channels: Vec<String>,
    pub eeg_srate: f64,
    /// Band grid the power profiles refer to.
    pub bands: Vec<(f64, f64)>,
    /// channel x band baseline powers (the "no condition" profile).
    pub baseline: Array2<f64>,
    /// Blocks must tile [0, duration] without gaps.
    pub blocks: Vec<Block>,
    pub stimuli: Vec<Stimulus>,
    /// Added at every target stimulus onset.
    pub erp: Option<ErpTemplate>,
    pub ocular: Option<OcularPlan>,
    pub eye: Option<EyePlan>,
    pub telemetry: Option<TelemetryPlan>,
    /// Condition strength in [0, 1]: 0 collapses every block profile to
    /// the baseline (and silences the ERP), 1 applies them fully.
    pub effect: f64,
}

impl SessionScript {
    /// Effective band powers for block `k`: baseline plus `effect` times
    /// the block's deviation.
    pub fn effective_powers(&self, k: usize) -> Array2<f64> {
        let block = &self.blocks[k].band_powers;
        let mut out = self.baseline.clone();
        out.zip_mut_with(block, |base, b| *base += self.effect * (*b - *base));
        out
    }
}
