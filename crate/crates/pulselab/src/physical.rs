//! Simulated LED attack: spatially uniform additive light whose color
//! follows the fitted RGB orbit, with inverse-square intensity falloff in
//! the light-to-face distance.
//!
//! Unlike the digital attacks, this path clamps pixels to `[0,255]` (a
//! camera cannot record negative or super-saturated light) and reports how
//! many pixels clamped, since heavy clamping means the simulated LED is
//! unrealistically strong.

use serde::{Deserialize, Serialize};

use crate::attack::{general_attack, AttackLine};
use crate::estimators::PulseEstimator;
use crate::eval::{mask_success_rate, success_rate};
use crate::pipeline::{align_series, extract_heart_rate, sliding_predict, PipelineConfig};
use crate::scalar::Real;
use crate::signal::{mean_std, HeartRateSeries, Perturbation, VideoClip, Waveform};
use crate::synth::{generate_clip, make_mask_medium, SceneConfig};
use crate::{Error, Result};

/// Attack target frequencies for the physical scenario, in bpm.
pub const PHYSICAL_TARGETS: [f64; 4] = [40.0, 120.0, 200.0, 300.0];

/// Light source with inverse-square falloff: the gain at frame `t` is
/// `reference_gain * (reference_distance / distance(t))^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedModel {
    /// Intensity scale when the LED sits at the reference distance.
    pub reference_gain: f64,
    pub reference_distance: f64,
    /// Per-frame LED-to-face distance, same units as the reference.
    pub distances: Vec<f64>,
}

impl LedModel {
    /// LED held at one fixed distance for the whole clip.
    pub fn constant(
        reference_gain: f64,
        reference_distance: f64,
        distance: f64,
        n_frames: usize,
    ) -> Self {
        Self {
            reference_gain,
            reference_distance,
            distances: vec![distance; n_frames],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reference_gain >= 0.0) || !self.reference_gain.is_finite() {
            return Err(Error::Config(format!(
                "reference_gain must be finite and nonnegative, got {}",
                self.reference_gain
            )));
        }
        if !(self.reference_distance > 0.0) {
            return Err(Error::Config(format!(
                "reference_distance must be positive, got {}",
                self.reference_distance
            )));
        }
        if self.distances.is_empty() {
            return Err(Error::EmptyInput);
        }
        if self.distances.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Config("all distances must be positive".to_string()));
        }
        Ok(())
    }

    /// Intensity gain at frame `t`.
    pub fn gain_at(&self, t: usize) -> f64 {
        let ratio = self.reference_distance / self.distances[t];
        self.reference_gain * ratio * ratio
    }
}

/// How many pixel values hit the `[0,255]` bounds during simulation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClampStats {
    pub clamped: usize,
    pub total: usize,
}

impl ClampStats {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.clamped as f64 / self.total as f64
        }
    }
}

/// Adds `gain(t) * offsets[t]` to every pixel of frame `t` and clamps to
/// the valid pixel range. Offsets must be per-frame and nonnegative (an
/// LED cannot remove light).
pub fn simulate_led<F: Real>(
    clip: &VideoClip<F>,
    offsets: &Perturbation<F>,
    led: &LedModel,
) -> Result<(VideoClip<F>, ClampStats)> {
    led.validate()?;
    let pf = offsets.per_frame().ok_or_else(|| {
        Error::ShapeMismatch("LED offsets must be per-frame RGB values".to_string())
    })?;
    if pf.dim().0 != clip.n_frames() {
        return Err(Error::ShapeMismatch(format!(
            "offsets cover {} frames, clip has {}",
            pf.dim().0,
            clip.n_frames()
        )));
    }
    if led.distances.len() != clip.n_frames() {
        return Err(Error::ShapeMismatch(format!(
            "distance profile covers {} frames, clip has {}",
            led.distances.len(),
            clip.n_frames()
        )));
    }
    if offsets.min_value() < F::zero() {
        return Err(Error::Config(
            "LED offsets must be nonnegative".to_string(),
        ));
    }

    let lo = F::zero();
    let hi = F::from_f64_c(255.0);
    let mut clamped = 0usize;
    let mut data = clip.data().clone();
    for ((t, _, _, ch), v) in data.indexed_iter_mut() {
        let gain = F::from_f64_c(led.gain_at(t));
        let raw = *v + gain * pf[[t, ch]];
        let clipped = if raw < lo {
            lo
        } else if raw > hi {
            hi
        } else {
            raw
        };
        if clipped != raw {
            clamped += 1;
        }
        *v = clipped;
    }
    let total = data.len();
    Ok((
        VideoClip::new(data, clip.fps())?,
        ClampStats { clamped, total },
    ))
}

/// Success rate of the LED attack at one distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceEntry {
    pub distance: f64,
    pub success_rate_pct: f64,
    pub clamp_fraction: f64,
}

/// Sweep result, ordered far to near.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSweepReport {
    pub entries: Vec<DistanceEntry>,
    /// Largest distance at which the success rate first exceeds 50%, if
    /// any.
    pub threshold_distance: Option<f64>,
}

/// Runs the LED attack at each candidate distance and reports the success
/// rate against ground truth, ordered from farthest to nearest.
#[allow(clippy::too_many_arguments)]
pub fn run_distance_sweep<F: Real>(
    estimator: &dyn PulseEstimator<F>,
    clip: &VideoClip<F>,
    bvp: &Waveform<F>,
    offsets: &Perturbation<F>,
    reference_gain: f64,
    reference_distance: f64,
    distances: &[f64],
    target_bpm: f64,
    pipe: &PipelineConfig,
) -> Result<DistanceSweepReport> {
    if distances.len() < 2 {
        return Err(Error::InvalidLength(format!(
            "distance sweep needs at least 2 distances, got {}",
            distances.len()
        )));
    }
    let truth = extract_heart_rate(bvp, pipe)?;

    let mut order: Vec<f64> = distances.to_vec();
    order.sort_by(|a, b| b.partial_cmp(a).expect("distances must be comparable"));

    let mut entries = Vec::with_capacity(order.len());
    for d in order {
        let led = LedModel::constant(reference_gain, reference_distance, d, clip.n_frames());
        let (attacked, stats) = simulate_led(clip, offsets, &led)?;
        let wave = sliding_predict(estimator, &attacked, pipe)?;
        let pred = extract_heart_rate(&wave, pipe)?;
        let (p, t) = align_series(&pred, &truth)?;
        let n = p.len();
        let pred_s = HeartRateSeries::new(p, 1.0)?;
        let truth_s = HeartRateSeries::new(t, 1.0)?;
        let target_s = HeartRateSeries::constant(target_bpm, n, 1.0)?;
        entries.push(DistanceEntry {
            distance: d,
            success_rate_pct: success_rate(&pred_s, &truth_s, &target_s)?,
            clamp_fraction: stats.fraction(),
        });
    }
    let threshold_distance = entries
        .iter()
        .find(|e| e.success_rate_pct > 50.0)
        .map(|e| e.distance);
    Ok(DistanceSweepReport {
        entries,
        threshold_distance,
    })
}

/// One (video, estimator) evaluation from the physical scenario.
#[derive(Debug, Clone)]
pub struct PhysicalRecord {
    pub subject: usize,
    pub estimator: String,
    /// `None` marks the control video (no LED).
    pub target_bpm: Option<f64>,
    pub pred: HeartRateSeries,
    pub truth: HeartRateSeries,
    pub clamp_fraction: f64,
}

/// Simulates the LED scenario: per subject one control video plus one
/// attacked video per target frequency, each evaluated with every
/// estimator. Ground-truth heart rate comes from the synthetic pulse
/// waveform run through the same spectral extraction.
#[allow(clippy::too_many_arguments)]
pub fn run_physical_scenario<F: Real>(
    subjects: &[SceneConfig],
    line: &AttackLine,
    reference_gain: f64,
    reference_distance: f64,
    distance: f64,
    epsilon: f64,
    estimators: &[&dyn PulseEstimator<F>],
    pipe: &PipelineConfig,
) -> Result<Vec<PhysicalRecord>> {
    if subjects.is_empty() || estimators.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut records = Vec::new();
    for (subject, cfg) in subjects.iter().enumerate() {
        if !cfg.has_pulse {
            return Err(Error::Config(format!(
                "subject {subject} has no pulse; scenario subjects must be live"
            )));
        }
        let (clip, gt) = generate_clip::<F>(cfg)?;
        let bvp = gt
            .bvp
            .as_ref()
            .expect("live scenes always carry a pulse waveform");
        let truth = extract_heart_rate(bvp, pipe)?;

        for est in estimators {
            let wave = sliding_predict(*est, &clip, pipe)?;
            let pred = extract_heart_rate(&wave, pipe)?;
            let (p, t) = align_series(&pred, &truth)?;
            records.push(PhysicalRecord {
                subject,
                estimator: est.name().to_string(),
                target_bpm: None,
                pred: HeartRateSeries::new(p, pred.fps())?,
                truth: HeartRateSeries::new(t, truth.fps())?,
                clamp_fraction: 0.0,
            });
        }

        for &target in &PHYSICAL_TARGETS {
            let offsets =
                general_attack::<F>(line, target, clip.n_frames(), clip.fps(), epsilon)?;
            let led = LedModel::constant(
                reference_gain,
                reference_distance,
                distance,
                clip.n_frames(),
            );
            let (attacked, stats) = simulate_led(&clip, &offsets, &led)?;
            for est in estimators {
                let wave = sliding_predict(*est, &attacked, pipe)?;
                let pred = extract_heart_rate(&wave, pipe)?;
                let (p, t) = align_series(&pred, &truth)?;
                records.push(PhysicalRecord {
                    subject,
                    estimator: est.name().to_string(),
                    target_bpm: Some(target),
                    pred: HeartRateSeries::new(p, pred.fps())?,
                    truth: HeartRateSeries::new(t, truth.fps())?,
                    clamp_fraction: stats.fraction(),
                });
            }
        }
    }
    Ok(records)
}

/// Result of attacking a pulse-free mask medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskAttackReport {
    /// Fraction of frames (percent) where the estimator reports within
    /// 2 bpm of the attack target.
    pub success_pct: f64,
    /// Mean per-window standard deviation of the raw estimator output on
    /// the attacked mask.
    pub mask_amplitude: f64,
    /// Same measurement on a live subject, for comparison.
    pub live_amplitude: f64,
    pub clamp_fraction: f64,
}

/// Mean per-clip standard deviation of the raw (unstandardized) estimator
/// output, a scale-bearing amplitude measurement.
fn raw_amplitude<F: Real>(
    estimator: &dyn PulseEstimator<F>,
    clip: &VideoClip<F>,
    pipe: &PipelineConfig,
) -> Result<f64> {
    let starts = crate::pipeline::window_starts(clip.n_frames(), pipe.clip_len, pipe.clip_stride);
    let mut total = 0.0;
    let mut count = 0usize;
    for start in starts {
        let piece = clip.slice_frames(start, pipe.clip_len)?;
        let wave = estimator.estimate(&piece)?;
        let (_, sd) = mean_std(wave.samples().view());
        total += sd.to_f64_c();
        count += 1;
    }
    Ok(total / count as f64)
}

/// Attacks a pulse-free mask with the LED at the target frequency, then
/// measures how often the estimator reports the target and how large its
/// output swings compared to a live subject.
#[allow(clippy::too_many_arguments)]
pub fn run_mask_attack<F: Real>(
    mask_cfg: &SceneConfig,
    live_cfg: &SceneConfig,
    line: &AttackLine,
    target_bpm: f64,
    reference_gain: f64,
    reference_distance: f64,
    distance: f64,
    epsilon: f64,
    estimator: &dyn PulseEstimator<F>,
    pipe: &PipelineConfig,
) -> Result<MaskAttackReport> {
    let (mask, _) = make_mask_medium::<F>(mask_cfg)?;
    let offsets = general_attack::<F>(line, target_bpm, mask.n_frames(), mask.fps(), epsilon)?;
    let led = LedModel::constant(reference_gain, reference_distance, distance, mask.n_frames());
    let (attacked, stats) = simulate_led(&mask, &offsets, &led)?;

    let wave = sliding_predict(estimator, &attacked, pipe)?;
    let pred = extract_heart_rate(&wave, pipe)?;
    let success_pct = mask_success_rate(&pred, target_bpm)?;

    let mask_amplitude = raw_amplitude(estimator, &attacked, pipe)?;
    let (live, _) = generate_clip::<F>(live_cfg)?;
    let live_amplitude = raw_amplitude(estimator, &live, pipe)?;

    Ok(MaskAttackReport {
        success_pct,
        mask_amplitude,
        live_amplitude,
        clamp_fraction: stats.fraction(),
    })
}
