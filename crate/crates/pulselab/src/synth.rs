//! Synthetic pre-cropped face clips with a known embedded blood-volume
//! pulse, plus pulse-free "mask" media.
//!
//! A clip is a base skin color modulated along a fixed RGB direction by the
//! pulse waveform, weighted by a smooth elliptical skin mask, with optional
//! slow illumination drift, per-pixel Gaussian sensor noise, and integer-
//! pixel motion jitter. Everything is deterministic given the seed.

use ndarray::{Array1, Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::signal::{HeartRateSeries, VideoClip, Waveform};
use crate::{Error, Result};

/// Frequency of the slow illumination drift sinusoid, well below any
/// plausible pulse band.
const DRIFT_HZ: f64 = 0.08;

/// The pulse waveform: fundamental plus one harmonic at a quarter the
/// amplitude, so spectral peak picking faces a non-sinusoidal signal.
pub fn bvp_value(f_hz: f64, t_s: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * f_hz * t_s;
    w.sin() + 0.25 * (2.0 * w).sin()
}

/// Peak magnitude bound of [`bvp_value`], used for range budgeting.
pub const BVP_PEAK: f64 = 1.25;

/// Scene description for one synthetic clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub fps: f64,
    pub duration_s: f64,
    pub height: usize,
    pub width: usize,
    pub heart_rate_bpm: f64,
    /// Peak per-channel modulation on the [0,255] scale.
    pub pulse_amplitude: f64,
    /// Unit RGB direction of the pulse modulation. Negative entries mean
    /// the pulse darkens the skin, strongest in green.
    pub pulse_direction: [f64; 3],
    pub base_color: [f64; 3],
    pub illumination_drift_amp: f64,
    pub sensor_noise_std: f64,
    /// Standard deviation of the integer-pixel mask translation per frame.
    pub motion_jitter_std: f64,
    pub seed: u64,
    /// False for mask media: the pulse term is omitted entirely.
    pub has_pulse: bool,
}

impl Default for SceneConfig {
    fn default() -> Self {
        let d = [-0.37_f64, -0.81, -0.45];
        let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        Self {
            fps: 30.0,
            duration_s: 60.0,
            height: 8,
            width: 8,
            heart_rate_bpm: 72.0,
            pulse_amplitude: 2.0,
            pulse_direction: [d[0] / norm, d[1] / norm, d[2] / norm],
            base_color: [165.0, 135.0, 115.0],
            illumination_drift_amp: 1.0,
            sensor_noise_std: 0.5,
            motion_jitter_std: 0.0,
            seed: 0,
            has_pulse: true,
        }
    }
}

impl SceneConfig {
    pub fn n_frames(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }

    /// Checks every invariant, including the pixel-range margin: base color
    /// plus worst-case pulse and drift must stay inside `[0,255]` with at
    /// least 3 noise standard deviations to spare. Sensor noise itself is
    /// clipped at 3 sigma, so valid configs always produce valid pixels.
    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if self.n_frames() < 1 {
            return Err(Error::Config("duration yields zero frames".to_string()));
        }
        if self.height < 1 || self.width < 1 {
            return Err(Error::Config("frame dimensions must be at least 1x1".to_string()));
        }
        if !(30.0..=300.0).contains(&self.heart_rate_bpm) {
            return Err(Error::Config(format!(
                "heart rate {} bpm outside [30,300]",
                self.heart_rate_bpm
            )));
        }
        if self.pulse_amplitude < 0.0 {
            return Err(Error::Config("pulse amplitude must be >= 0".to_string()));
        }
        if self.sensor_noise_std < 0.0 || self.illumination_drift_amp < 0.0 || self.motion_jitter_std < 0.0 {
            return Err(Error::Config("noise, drift, and jitter magnitudes must be >= 0".to_string()));
        }
        let norm = self
            .pulse_direction
            .iter()
            .map(|d| d * d)
            .sum::<f64>()
            .sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "pulse direction must be a unit vector, norm is {norm}"
            )));
        }
        let amp = if self.has_pulse { self.pulse_amplitude } else { 0.0 };
        for (c, &base) in self.base_color.iter().enumerate() {
            let modulation =
                amp * BVP_PEAK * self.pulse_direction[c].abs() + self.illumination_drift_amp;
            let margin = 3.0 * self.sensor_noise_std;
            if base - modulation < margin || base + modulation > 255.0 - margin {
                return Err(Error::Config(format!(
                    "channel {c}: base {base} with modulation {modulation} leaves less than \
                     3 noise std ({margin}) of range margin"
                )));
            }
        }
        Ok(())
    }
}

/// Known signal content of a generated clip.
#[derive(Debug, Clone)]
pub struct GroundTruth<F: Real = f64> {
    /// The embedded pulse; `None` for mask media.
    pub bvp: Option<Waveform<F>>,
    /// The configured heart rate as a constant per-frame series.
    pub hr: HeartRateSeries,
    pub config: SceneConfig,
}

/// Smooth elliptical "skin" weighting in `[0,1]`, covering at least 60% of
/// the frame for all supported sizes (raised-cosine taper, semi-axes at
/// 0.55 of each dimension).
pub fn spatial_mask(height: usize, width: usize) -> Array2<f64> {
    let cy = (height as f64 - 1.0) / 2.0;
    let cx = (width as f64 - 1.0) / 2.0;
    let ry = 0.55 * height as f64;
    let rx = 0.55 * width as f64;
    Array2::from_shape_fn((height, width), |(y, x)| {
        let dy = (y as f64 - cy) / ry;
        let dx = (x as f64 - cx) / rx;
        let r = (dy * dy + dx * dx).sqrt();
        if r >= 1.0 {
            0.0
        } else {
            let c = (std::f64::consts::FRAC_PI_2 * r).cos();
            c * c
        }
    })
}

/// Renders one clip and its ground truth. Deterministic given the config.
pub fn generate_clip<F: Real>(cfg: &SceneConfig) -> Result<(VideoClip<F>, GroundTruth<F>)> {
    cfg.validate()?;
    let n = cfg.n_frames();
    let (h, w) = (cfg.height, cfg.width);
    let mask = spatial_mask(h, w);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Sampling order is part of the format: drift phase first, then per
    // frame two jitter draws followed by row-major noise draws.
    let drift_phase: f64 = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;

    let f_hz = cfg.heart_rate_bpm / 60.0;
    let amp = if cfg.has_pulse { cfg.pulse_amplitude } else { 0.0 };
    let bvp: Vec<f64> = (0..n).map(|t| bvp_value(f_hz, t as f64 / cfg.fps)).collect();

    let mut data = Array4::<F>::zeros((n, h, w, 3));
    for t in 0..n {
        let jy: f64 = rng.sample(StandardNormal);
        let jx: f64 = rng.sample(StandardNormal);
        let dy = (jy * cfg.motion_jitter_std).round() as isize;
        let dx = (jx * cfg.motion_jitter_std).round() as isize;

        let drift = cfg.illumination_drift_amp
            * (2.0 * std::f64::consts::PI * DRIFT_HZ * t as f64 / cfg.fps + drift_phase).sin();
        let pulse = amp * bvp[t];

        for y in 0..h {
            for x in 0..w {
                let sy = y as isize - dy;
                let sx = x as isize - dx;
                let m = if sy >= 0 && sy < h as isize && sx >= 0 && sx < w as isize {
                    mask[[sy as usize, sx as usize]]
                } else {
                    0.0
                };
                for c in 0..3 {
                    let mut v = cfg.base_color[c] + cfg.pulse_direction[c] * pulse * m + drift;
                    if cfg.sensor_noise_std > 0.0 {
                        let z: f64 = rng.sample(StandardNormal);
                        v += (z * cfg.sensor_noise_std)
                            .clamp(-3.0 * cfg.sensor_noise_std, 3.0 * cfg.sensor_noise_std);
                    }
                    data[[t, y, x, c]] = F::from_f64_c(v);
                }
            }
        }
    }

    let clip = VideoClip::new(data, cfg.fps)?;
    let truth = GroundTruth {
        bvp: if cfg.has_pulse {
            Some(Waveform::new(
                Array1::from_iter(bvp.iter().map(|&v| F::from_f64_c(v))),
                cfg.fps,
            )?)
        } else {
            None
        },
        hr: HeartRateSeries::constant(cfg.heart_rate_bpm, n, cfg.fps)?,
        config: cfg.clone(),
    };
    Ok((clip, truth))
}

/// Renders a list of scenes in order, deriving per-item seeds as
/// `seed + index` so identical configs in one list still differ.
pub fn generate_dataset<F: Real>(
    cfgs: &[SceneConfig],
) -> Result<Vec<(VideoClip<F>, GroundTruth<F>)>> {
    if cfgs.is_empty() {
        return Err(Error::EmptyInput);
    }
    cfgs.iter()
        .enumerate()
        .map(|(i, cfg)| {
            let mut item = cfg.clone();
            item.seed = cfg.seed.wrapping_add(i as u64);
            generate_clip(&item)
        })
        .collect()
}

/// Renders a pulse-free medium: same nuisances, no embedded pulse, and a
/// ground truth whose `bvp` is absent.
pub fn make_mask_medium<F: Real>(cfg: &SceneConfig) -> Result<(VideoClip<F>, GroundTruth<F>)> {
    if cfg.has_pulse {
        return Err(Error::Config(
            "mask media require has_pulse = false".to_string(),
        ));
    }
    generate_clip(cfg)
}
