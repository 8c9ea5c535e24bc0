//! Ready-made session builders for the four driving use cases, the
//! subject model, and the simulator that turns a script into a recording.

use ndarray::Array2;
use rand::Rng;
use serde_json::json;

use super::script::{Block, EyePlan, OcularPlan, SessionScript, Stimulus, TelemetryPlan};
use super::signal::{
    blink_times, blink_waveform, gen_eye_openness, gen_modulated_eeg, inject_erp, render_pulses,
    ErpTemplate,
};
use super::{shape_err, SynthError};
use crate::acquire::session::{SessionData, SessionRecord};
use crate::acquire::{EventRecord, SampleChunk, StreamKind, StreamMeta};
use crate::features::CANONICAL_BANDS;
use crate::seed;

/// Montage for the distraction sessions.
pub const UC1_CHANNELS: [&str; 8] = ["Fp1", "Fp2", "Fz", "P3", "Pz", "P4", "O1", "O2"];
/// Montage for the emotion sessions.
pub const UC2_CHANNELS: [&str; 6] = ["F3", "F4", "C3", "C4", "P3", "P4"];
/// Montage for the drowsiness sessions.
pub const UC3_CHANNELS: [&str; 16] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T7", "C3", "Cz", "C4", "T8", "P3", "Pz", "P4",
    "Oz",
];
/// Montage for the stimulus-response sessions.
pub const UC4_CHANNELS: [&str; 4] = ["Fz", "Cz", "Pz", "Oz"];

/// Drowsiness level per 120 s segment in the drowsiness sessions.
pub const UC3_LEVELS: [f64; 8] = [0.0, 0.45, 0.1, 0.7, 0.0, 1.0, 0.1, 0.45];

fn band_grid() -> Vec<(f64, f64)> {
    CANONICAL_BANDS.iter().map(|&(_, lo, hi)| (lo, hi)).collect()
}

/// Stable physiology of one synthetic subject.
///
/// Traits derive from the master seed and the subject index only, so the
/// same subject keeps the same evoked response and blink habits across
/// every session, day, and repetition. The population is laid out on
/// trait grids with small per-subject jitter, which keeps any two
/// subjects separable instead of leaving that to chance.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectParams {
    pub id: String,
    /// Seconds from stimulus onset to the evoked peak.
    pub erp_latency: f64,
    /// Gaussian width (sigma) of the evoked bump, seconds.
    pub erp_width: f64,
    /// Peak amplitude at a spatial weight of 1.0.
    pub erp_amplitude: f64,
    /// Spatial weights over [`UC4_CHANNELS`].
    pub erp_weights: Vec<f64>,
    /// Blinks per second.
    pub blink_rate: f64,
}

impl SubjectParams {
    pub fn derive(master_seed: u64, index: usize) -> Self {
        let mut r = seed::rng(master_seed, &format!("subject.{index:02}"));
        let erp_latency = 0.25 + 0.025 * (index % 10) as f64 + r.gen_range(-0.004..0.004);
        let erp_width = 0.042 + 0.005 * (index % 4) as f64 + r.gen_range(-0.002..0.002);
        let erp_amplitude = 5.5 + 0.8 * (index % 5) as f64 + r.gen_range(-0.2..0.2);
        const PROFILES: [[f64; 4]; 4] = [
            [0.5, 0.8, 1.0, 0.6],
            [0.7, 1.0, 0.8, 0.4],
            [0.4, 0.7, 1.0, 0.8],
            [0.6, 1.0, 0.9, 0.5],
        ];
        let erp_weights = PROFILES[index % 4]
            .iter()
            .map(|w| w + r.gen_range(-0.05..0.05))
            .collect();
        let blink_rate = 0.22 + 0.03 * (index % 4) as f64 + r.gen_range(-0.02..0.02);
        SubjectParams {
            id: format!("s{:02}", index + 1),
            erp_latency,
            erp_width,
            erp_amplitude,
            erp_weights,
            blink_rate,
        }
    }
}

/// Uniform channel x band profile.
fn profile(channels: usize, per_band: [f64; 5]) -> Array2<f64> {
    Array2::from_shape_fn((channels, 5), |(_, b)| per_band[b])
}

/// Blink bleed-through weights for a montage: strong at the front,
/// fading toward the back of the head.
fn bleed_for(channels: &[&str]) -> Vec<f64> {
    channels
        .iter()
        .map(|c| match *c {
            "Fp1" | "Fp2" => 0.35,
            "F3" | "F4" | "F7" | "F8" | "Fz" => 0.15,
            "C3" | "C4" | "Cz" | "T7" | "T8" => 0.08,
            _ => 0.03,
        })
        .collect()
}

/// Distraction-monitoring session: 600 s of alternating 30 s blocks of
/// focused driving, a visual search task (posterior/frontal beta rises,
/// occipital alpha drops), and mental arithmetic (frontal-midline theta
/// rises). Steering corrections get noisier in the task blocks.
pub fn build_distraction(master_seed: u64, subject_index: usize, effect: f64) -> SessionScript {
    let channels: Vec<String> = UC1_CHANNELS.iter().map(|s| s.to_string()).collect();
    let mut baseline = profile(channels.len(), [18.0, 8.0, 10.0, 10.0, 2.5]);
    for (i, name) in UC1_CHANNELS.iter().enumerate() {
        baseline[(i, 2)] = match *name {
            "O1" | "O2" => 20.0,
            "P3" | "Pz" | "P4" => 14.0,
            _ => 8.0,
        };
    }
    let mut visual = baseline.clone();
    for (i, name) in UC1_CHANNELS.iter().enumerate() {
        match *name {
            "O1" | "O2" => {
                visual[(i, 3)] = 30.0;
                visual[(i, 2)] = 10.0;
            }
            "Fp1" | "Fp2" => visual[(i, 3)] = 24.0,
            _ => {}
        }
    }
    let mut math = baseline.clone();
    for (i, name) in UC1_CHANNELS.iter().enumerate() {
        if matches!(*name, "Fz" | "Fp1" | "Fp2" | "P3" | "Pz" | "P4") {
            math[(i, 1)] = 22.0;
        }
    }

    let cycle = ["focused", "visual", "focused", "math"];
    let mut blocks = Vec::new();
    let mut steering = Vec::new();
    for k in 0..20 {
        let label = cycle[k % cycle.len()];
        let band_powers = match label {
            "visual" => visual.clone(),
            "math" => math.clone(),
            _ => baseline.clone(),
        };
        blocks.push(Block {
            t0: k as f64 * 30.0,
            t1: (k + 1) as f64 * 30.0,
            label: label.to_string(),
            drowsiness: 0.0,
            band_powers,
        });
        steering.push(if label == "focused" { 0.0004 } else { 0.0025 });
    }

    let subject = SubjectParams::derive(master_seed, subject_index);
    SessionScript {
        session: format!("uc1_{}", subject.id),
        subject: subject.id.clone(),
        scenario: "uc1".to_string(),
        seed: master_seed,
        duration: 600.0,
        eeg_channels: channels,
        eeg_srate: 250.0,
        bands: band_grid(),
        baseline,
        blocks,
        stimuli: Vec::new(),
        erp: None,
        ocular: Some(OcularPlan {
            srate: 250.0,
            blink_rate: subject.blink_rate,
            blink_amplitude: 120.0,
            bleed: bleed_for(&UC1_CHANNELS),
        }),
        eye: Some(EyePlan { srate: 60.0 }),
        telemetry: Some(TelemetryPlan {
            srate: 32.0,
            speed_mean: 25.0,
            steering_base: 0.0004,
            steering_by_block: steering,
        }),
        effect,
    }
}

/// Emotion-monitoring session: 480 s of 60 s blocks cycling through no
/// induction, a relaxing clip (alpha rises everywhere), a joyful clip
/// (frontal beta rises left-dominant, gamma rises, alpha drops), and an
/// anger-inducing clip (beta rises right-dominant and spreads centrally,
/// frontal theta rises).
pub fn build_emotions(master_seed: u64, subject_index: usize, effect: f64) -> SessionScript {
    let channels: Vec<String> = UC2_CHANNELS.iter().map(|s| s.to_string()).collect();
    let baseline = profile(channels.len(), [15.0, 7.0, 12.0, 9.0, 2.0]);

    let mut neutral = baseline.clone();
    for i in 0..channels.len() {
        neutral[(i, 2)] = 26.0;
    }
    let mut joy = baseline.clone();
    for (i, name) in UC2_CHANNELS.iter().enumerate() {
        joy[(i, 2)] = 9.0;
        joy[(i, 4)] = 6.0;
        match *name {
            "F3" => joy[(i, 3)] = 24.0,
            "F4" => joy[(i, 3)] = 16.0,
            "C3" | "C4" => joy[(i, 3)] = 14.0,
            _ => {}
        }
    }
    let mut angry = baseline.clone();
    for (i, name) in UC2_CHANNELS.iter().enumerate() {
        angry[(i, 4)] = 5.0;
        match *name {
            "F3" => {
                angry[(i, 3)] = 22.0;
                angry[(i, 1)] = 16.0;
            }
            "F4" => {
                angry[(i, 3)] = 30.0;
                angry[(i, 1)] = 16.0;
            }
            "C3" | "C4" => {
                angry[(i, 3)] = 24.0;
                angry[(i, 1)] = 12.0;
            }
            _ => angry[(i, 3)] = 12.0,
        }
    }

    let cycle: [(&str, &Array2<f64>); 4] =
        [("none", &baseline), ("neutral", &neutral), ("joy", &joy), ("angry", &angry)];
    let mut blocks = Vec::new();
    for k in 0..8 {
        let (label, powers) = cycle[k % cycle.len()];
        blocks.push(Block {
            t0: k as f64 * 60.0,
            t1: (k + 1) as f64 * 60.0,
            label: label.to_string(),
            drowsiness: 0.0,
            band_powers: powers.clone(),
        });
    }

    let subject = SubjectParams::derive(master_seed, subject_index);
    SessionScript {
        session: format!("uc2_{}", subject.id),
        subject: subject.id.clone(),
        scenario: "uc2".to_string(),
        seed: master_seed,
        duration: 480.0,
        eeg_channels: channels,
        eeg_srate: 250.0,
        bands: band_grid(),
        baseline,
        blocks,
        stimuli: Vec::new(),
        erp: None,
        ocular: Some(OcularPlan {
            srate: 250.0,
            blink_rate: subject.blink_rate,
            blink_amplitude: 120.0,
            bleed: bleed_for(&UC2_CHANNELS),
        }),
        eye: None,
        telemetry: None,
        effect,
    }
}

/// Drowsiness-monitoring session: 960 s of 120 s segments whose latent
/// drowsiness follows [`UC3_LEVELS`]. Theta and (posterior) alpha climb
/// with drowsiness while beta sags; the eye tracker closes for longer
/// fractions of each segment and steering wanders more.
pub fn build_drowsiness(master_seed: u64, subject_index: usize, effect: f64) -> SessionScript {
    let channels: Vec<String> = UC3_CHANNELS.iter().map(|s| s.to_string()).collect();
    let posterior = |name: &str| matches!(name, "P3" | "Pz" | "P4" | "Oz");
    let mut baseline = profile(channels.len(), [16.0, 7.0, 11.0, 10.0, 2.0]);
    for (i, name) in UC3_CHANNELS.iter().enumerate() {
        if posterior(name) {
            baseline[(i, 2)] = 16.0;
        }
    }

    let powers_at = |d: f64| {
        let mut p = baseline.clone();
        for (i, name) in UC3_CHANNELS.iter().enumerate() {
            p[(i, 1)] = 7.0 + 14.0 * d;
            p[(i, 2)] += if posterior(name) { 16.0 * d } else { 6.0 * d };
            p[(i, 3)] = 10.0 - 5.0 * d;
        }
        p
    };

    let mut blocks = Vec::new();
    let mut steering = Vec::new();
    for (k, &d) in UC3_LEVELS.iter().enumerate() {
        blocks.push(Block {
            t0: k as f64 * 120.0,
            t1: (k + 1) as f64 * 120.0,
            label: format!("d{d:.2}"),
            drowsiness: d,
            band_powers: powers_at(d),
        });
        steering.push(0.0004 + 0.003 * d);
    }

    let subject = SubjectParams::derive(master_seed, subject_index);
    SessionScript {
        session: format!("uc3_{}", subject.id),
        subject: subject.id.clone(),
        scenario: "uc3".to_string(),
        seed: master_seed,
        duration: 960.0,
        eeg_channels: channels,
        eeg_srate: 250.0,
        bands: band_grid(),
        baseline,
        blocks,
        stimuli: Vec::new(),
        erp: None,
        ocular: Some(OcularPlan {
            srate: 250.0,
            blink_rate: subject.blink_rate,
            blink_amplitude: 120.0,
            bleed: bleed_for(&UC3_CHANNELS),
        }),
        eye: Some(EyePlan { srate: 60.0 }),
        telemetry: Some(TelemetryPlan {
            srate: 32.0,
            speed_mean: 25.0,
            steering_base: 0.0004,
            steering_by_block: steering,
        }),
        effect,
    }
}

/// Stimulus-response session for one subject: an oddball run with
/// `n_stimuli` presentations at 0.9 s intervals, 20% of them targets that
/// evoke the subject's characteristic response. `day` and `repetition`
/// only alter the session name (and with it every noise draw), never the
/// subject's physiology.
pub fn build_p300_auth(
    master_seed: u64,
    subject_index: usize,
    day: usize,
    repetition: usize,
    n_stimuli: usize,
    effect: f64,
) -> SessionScript {
    let sp = SubjectParams::derive(master_seed, subject_index);
    let session = format!("uc4_{}_d{day:02}_r{repetition:02}", sp.id);
    let soa = 0.9;
    let lead_in = 2.0;
    let duration = lead_in + n_stimuli as f64 * soa + 1.0;

    let mut r = seed::rng(master_seed, &format!("{session}.stimuli"));
    let n_targets = (n_stimuli / 5).max(1);
    let mut order: Vec<usize> = (0..n_stimuli).collect();
    for k in 0..n_targets {
        let j = r.gen_range(k..n_stimuli);
        order.swap(k, j);
    }
    let mut is_target = vec![false; n_stimuli];
    for &i in &order[..n_targets] {
        is_target[i] = true;
    }
    let stimuli = (0..n_stimuli)
        .map(|k| Stimulus {
            t: lead_in + k as f64 * soa,
            label: if is_target[k] { "target" } else { "nontarget" }.to_string(),
            target: is_target[k],
        })
        .collect();

    let channels: Vec<String> = UC4_CHANNELS.iter().map(|s| s.to_string()).collect();
    let baseline = profile(channels.len(), [14.0, 6.0, 10.0, 8.0, 2.0]);
    let blocks = vec![Block {
        t0: 0.0,
        t1: duration,
        label: "oddball".to_string(),
        drowsiness: 0.0,
        band_powers: baseline.clone(),
    }];

    SessionScript {
        session,
        subject: sp.id.clone(),
        scenario: "uc4".to_string(),
        seed: master_seed,
        duration,
        eeg_channels: channels,
        eeg_srate: 250.0,
        bands: band_grid(),
        baseline,
        blocks,
        stimuli,
        erp: Some(ErpTemplate {
            latency: sp.erp_latency,
            width: sp.erp_width,
            amplitude: sp.erp_amplitude,
            weights: sp.erp_weights,
        }),
        ocular: Some(OcularPlan {
            srate: 250.0,
            blink_rate: sp.blink_rate,
            blink_amplitude: 100.0,
            bleed: bleed_for(&UC4_CHANNELS),
        }),
        eye: None,
        telemetry: None,
        effect,
    }
}

fn check_script(script: &SessionScript) -> Result<(), SynthError> {
    if !(script.duration > 0.0) {
        return Err(shape_err(format!("duration {} must be positive", script.duration)));
    }
    if script.eeg_channels.is_empty() {
        return Err(shape_err("script declares no EEG channels".to_string()));
    }
    if !(0.0..=1.0).contains(&script.effect) {
        return Err(shape_err(format!("effect {} outside [0, 1]", script.effect)));
    }
    if script.blocks.is_empty() {
        return Err(shape_err("script declares no blocks".to_string()));
    }
    let mut cursor = 0.0;
    for (k, b) in script.blocks.iter().enumerate() {
        if (b.t0 - cursor).abs() > 1e-9 || b.t1 <= b.t0 {
            return Err(shape_err(format!(
                "block {k} spans {}..{} but must start at {cursor}",
                b.t0, b.t1
            )));
        }
        if b.band_powers.dim() != (script.eeg_channels.len(), script.bands.len()) {
            return Err(shape_err(format!(
                "block {k} power profile is {:?}, expected ({}, {})",
                b.band_powers.dim(),
                script.eeg_channels.len(),
                script.bands.len()
            )));
        }
        if !(0.0..=1.0).contains(&b.drowsiness) {
            return Err(shape_err(format!("block {k} drowsiness {} outside [0, 1]", b.drowsiness)));
        }
        cursor = b.t1;
    }
    if (cursor - script.duration).abs() > 1e-9 {
        return Err(shape_err(format!(
            "blocks cover [0, {cursor}) but the session lasts {}",
            script.duration
        )));
    }
    if script.baseline.dim() != (script.eeg_channels.len(), script.bands.len()) {
        return Err(shape_err(format!(
            "baseline profile is {:?}, expected ({}, {})",
            script.baseline.dim(),
            script.eeg_channels.len(),
            script.bands.len()
        )));
    }
    for (k, s) in script.stimuli.iter().enumerate() {
        if !(0.0 <= s.t && s.t < script.duration) {
            return Err(shape_err(format!(
                "stimulus {k} at {} outside the session [0, {})",
                s.t, script.duration
            )));
        }
    }
    if let Some(erp) = &script.erp {
        if erp.weights.len() != script.eeg_channels.len() {
            return Err(shape_err(format!(
                "{} ERP weights for {} EEG channels",
                erp.weights.len(),
                script.eeg_channels.len()
            )));
        }
    }
    if let Some(oc) = &script.ocular {
        if oc.bleed.len() != script.eeg_channels.len() {
            return Err(shape_err(format!(
                "{} bleed weights for {} EEG channels",
                oc.bleed.len(),
                script.eeg_channels.len()
            )));
        }
    }
    if let Some(tp) = &script.telemetry {
        if tp.steering_by_block.len() != script.blocks.len() {
            return Err(shape_err(format!(
                "{} steering levels for {} blocks",
                tp.steering_by_block.len(),
                script.blocks.len()
            )));
        }
    }
    Ok(())
}

fn grid_timestamps(n: usize, srate: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 / srate).collect()
}

fn sample_ranges(blocks: &[Block], srate: f64) -> Vec<(usize, usize)> {
    blocks
        .iter()
        .map(|b| (((b.t0 * srate).round()) as usize, ((b.t1 * srate).round()) as usize))
        .collect()
}

/// Render a script into a full multi-stream recording.
///
/// Streams are declared in the order `eeg`, `eog`, `eye`, `telemetry`
/// (optional ones omitted), each on a perfect sample grid. Ground truth
/// goes to the event log: a `block` event per block (label, index, and
/// latent drowsiness) and a `stimulus` event per presentation. All
/// randomness derives from the script's seed and session name, so equal
/// scripts render bit-identical recordings.
pub fn simulate_session(script: &SessionScript) -> Result<SessionData, SynthError> {
    check_script(script)?;
    let sr = script.eeg_srate;
    let n = (script.duration * sr).round() as usize;
    let ranges = sample_ranges(&script.blocks, sr);
    let powers: Vec<Array2<f64>> =
        (0..script.blocks.len()).map(|k| script.effective_powers(k)).collect();

    let mut r_eeg = seed::rng(script.seed, &format!("{}.eeg", script.session));
    let mut eeg = gen_modulated_eeg(n, sr, &script.bands, &ranges, &powers, &mut r_eeg)?;

    if let Some(erp) = &script.erp {
        let scaled = ErpTemplate { amplitude: erp.amplitude * script.effect, ..erp.clone() };
        if scaled.amplitude > 0.0 {
            for s in script.stimuli.iter().filter(|s| s.target) {
                inject_erp(&mut eeg, sr, 0.0, s.t, &scaled)?;
            }
        }
    }

    let mut streams = Vec::new();
    let mut data = Vec::new();

    // The EEG stream goes first so it wins rate ties when a fusion master
    // is picked.
    streams.push(StreamMeta {
        name: "eeg".to_string(),
        kind: StreamKind::Eeg,
        channels: script.eeg_channels.clone(),
        srate: sr,
        units: "uV".to_string(),
    });

    if let Some(oc) = &script.ocular {
        let n_eog = (script.duration * oc.srate).round() as usize;
        let mut r_blink = seed::rng(script.seed, &format!("{}.blinks", script.session));
        let times = blink_times(script.duration, oc.blink_rate, 0.2, &mut r_blink);

        let mut r_eog = seed::rng(script.seed, &format!("{}.eog", script.session));
        let mut eog = gen_modulated_eeg(
            n_eog,
            oc.srate,
            &[(0.5, 8.0)],
            &[(0, n_eog)],
            &[Array2::from_elem((2, 1), 25.0)],
            &mut r_eog,
        )?;
        let veog_pulses =
            render_pulses(n_eog, oc.srate, &times, &blink_waveform(oc.srate), oc.blink_amplitude);
        for (i, v) in veog_pulses.iter().enumerate() {
            eog[(i, 1)] += v;
        }

        let eeg_pulses =
            render_pulses(n, sr, &times, &blink_waveform(sr), oc.blink_amplitude);
        for (ch, w) in oc.bleed.iter().enumerate() {
            if *w != 0.0 {
                for i in 0..n {
                    eeg[(i, ch)] += w * eeg_pulses[i];
                }
            }
        }

        streams.push(StreamMeta {
            name: "eog".to_string(),
            kind: StreamKind::Eog,
            channels: vec!["heog".to_string(), "veog".to_string()],
            srate: oc.srate,
            units: "uV".to_string(),
        });
        data.push(SampleChunk::new(grid_timestamps(n_eog, oc.srate), eog).map_err(|e| shape_err(e.to_string()))?);
    }

    if let Some(eye) = &script.eye {
        let n_eye = (script.duration * eye.srate).round() as usize;
        let segments: Vec<(usize, usize, f64)> = script
            .blocks
            .iter()
            .map(|b| {
                (
                    (b.t0 * eye.srate).round() as usize,
                    (b.t1 * eye.srate).round() as usize,
                    b.drowsiness * script.effect,
                )
            })
            .collect();
        let mut r_eye = seed::rng(script.seed, &format!("{}.eye", script.session));
        let trace = gen_eye_openness(n_eye, eye.srate, &segments, &mut r_eye)?;
        let values = Array2::from_shape_vec((n_eye, 1), trace)
            .map_err(|e| shape_err(format!("eye trace: {e}")))?;
        streams.push(StreamMeta {
            name: "eye".to_string(),
            kind: StreamKind::EyeTracking,
            channels: vec!["openness".to_string()],
            srate: eye.srate,
            units: "ratio".to_string(),
        });
        data.push(SampleChunk::new(grid_timestamps(n_eye, eye.srate), values).map_err(|e| shape_err(e.to_string()))?);
    }

    if let Some(tp) = &script.telemetry {
        let n_tel = (script.duration * tp.srate).round() as usize;
        let tel_ranges = sample_ranges(&script.blocks, tp.srate);
        let steering_powers: Vec<Array2<f64>> = tp
            .steering_by_block
            .iter()
            .map(|&p| {
                let eff = tp.steering_base + (p - tp.steering_base) * script.effect;
                ndarray::array![[4.0, 0.0], [0.0, eff]]
            })
            .collect();
        let mut r_tel = seed::rng(script.seed, &format!("{}.telemetry", script.session));
        let mut tel = gen_modulated_eeg(
            n_tel,
            tp.srate,
            &[(0.05, 0.5), (0.1, 3.0)],
            &tel_ranges,
            &steering_powers,
            &mut r_tel,
        )?;
        for i in 0..n_tel {
            tel[(i, 0)] += tp.speed_mean;
        }
        streams.push(StreamMeta {
            name: "telemetry".to_string(),
            kind: StreamKind::Telemetry,
            channels: vec!["speed".to_string(), "steering".to_string()],
            srate: tp.srate,
            units: "si".to_string(),
        });
        data.push(SampleChunk::new(grid_timestamps(n_tel, tp.srate), tel).map_err(|e| shape_err(e.to_string()))?);
    }

    // EEG occupies slot 0; artifact bleed is final now.
    data.insert(0, SampleChunk::new(grid_timestamps(n, sr), eeg).map_err(|e| shape_err(e.to_string()))?);

    let mut events = Vec::new();
    for (k, b) in script.blocks.iter().enumerate() {
        events.push(EventRecord::new(
            b.t0,
            "block",
            json!({ "label": b.label, "index": k, "d": b.drowsiness }),
        ));
    }
    for s in &script.stimuli {
        events.push(EventRecord::new(
            s.t,
            "stimulus",
            json!({ "label": s.label, "target": s.target }),
        ));
    }
    events.sort_by(|a, b| a.t.partial_cmp(&b.t).expect("finite event times"));

    let end = streams
        .iter()
        .zip(&data)
        .map(|(_, chunk)| *chunk.timestamps.last().expect("non-empty stream"))
        .fold(0.0, f64::max);
    let mut annotations = serde_json::Map::new();
    annotations.insert("effect".to_string(), json!(script.effect));

    Ok(SessionData {
        record: SessionRecord {
            session: script.session.clone(),
            subject: script.subject.clone(),
            scenario: script.scenario.clone(),
            seed: script.seed,
            start: 0.0,
            end,
            streams,
            annotations,
        },
        data,
        events,
    })
}
