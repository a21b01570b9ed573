//! Clip-windowed inference: sliding-window pulse prediction with
//! overlap-add stitching, spectral heart-rate extraction, and series
//! alignment utilities.
//!
//! The flow is: cut the video into fixed-length clips on a stride, run the
//! estimator on each, standardize each clip's output, taper it with a
//! periodic Hann window, and overlap-add into one full-length waveform.
//! Heart rate then comes from a sliding Hamming-windowed, zero-padded FFT
//! of that waveform, followed by a short moving-average smoother.

use ndarray::{s, Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::estimators::PulseEstimator;
use crate::scalar::Real;
use crate::signal::{
    hamming_window, hann_window, real_fft_magnitude, standardize, HeartRateSeries, VideoClip,
    Waveform,
};
use crate::{Error, Result};

/// Windowing and spectral-search settings for the inference pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Frames per estimator clip.
    pub clip_len: usize,
    /// Frames between consecutive clip starts.
    pub clip_stride: usize,
    /// Length of the heart-rate analysis window in seconds.
    pub hr_window_s: f64,
    /// Frames between consecutive heart-rate windows.
    pub hr_stride: usize,
    /// Moving-average span for the heart-rate series, in seconds.
    pub smooth_s: f64,
    /// Inclusive frequency band searched for the pulse peak, in beats per
    /// minute.
    pub search_band_bpm: (f64, f64),
    /// Zero-padding multiple for the FFT (pad length = window length times
    /// this).
    pub fft_pad_factor: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            clip_len: 135,
            clip_stride: 67,
            hr_window_s: 30.0,
            hr_stride: 1,
            smooth_s: 5.0,
            search_band_bpm: (30.0, 306.0),
            fft_pad_factor: 8,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clip_len < 2 {
            return Err(Error::Config(format!(
                "clip_len must be >= 2, got {}",
                self.clip_len
            )));
        }
        if self.clip_stride == 0 || self.clip_stride > self.clip_len {
            return Err(Error::Config(format!(
                "clip_stride must be in 1..={}, got {}",
                self.clip_len, self.clip_stride
            )));
        }
        if !(self.hr_window_s > 0.0) {
            return Err(Error::Config(format!(
                "hr_window_s must be positive, got {}",
                self.hr_window_s
            )));
        }
        if self.hr_stride == 0 {
            return Err(Error::Config("hr_stride must be >= 1".to_string()));
        }
        if !(self.smooth_s >= 0.0) {
            return Err(Error::Config(format!(
                "smooth_s must be nonnegative, got {}",
                self.smooth_s
            )));
        }
        let (lo, hi) = self.search_band_bpm;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::Config(format!(
                "search band must satisfy 0 < lo < hi, got ({lo}, {hi})"
            )));
        }
        if self.fft_pad_factor == 0 {
            return Err(Error::Config("fft_pad_factor must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// Clip start offsets covering `n_frames`: multiples of the stride, plus an
/// end-aligned tail so the last frames are always covered.
pub(crate) fn window_starts(n_frames: usize, len: usize, stride: usize) -> Vec<usize> {
    let mut starts: Vec<usize> = (0..)
        .map(|i| i * stride)
        .take_while(|&s| s + len <= n_frames)
        .collect();
    let tail = n_frames - len;
    if starts.last() != Some(&tail) {
        starts.push(tail);
    }
    starts
}

/// Runs `estimator` over sliding clips and stitches the per-clip outputs
/// into one waveform covering every input frame.
///
/// Each clip's estimate is standardized (flat outputs contribute zeros
/// rather than failing), tapered with a periodic Hann window, and
/// overlap-added. At the default 50% overlap the Hann tapers sum to one,
/// so the stitched waveform keeps unit scale except near the video edges.
pub fn sliding_predict<F: Real>(
    estimator: &dyn PulseEstimator<F>,
    clip: &VideoClip<F>,
    cfg: &PipelineConfig,
) -> Result<Waveform<F>> {
    cfg.validate()?;
    let n = clip.n_frames();
    if n < cfg.clip_len {
        return Err(Error::TooShort(format!(
            "video has {n} frames, need at least clip_len = {}",
            cfg.clip_len
        )));
    }
    let taper = hann_window::<F>(cfg.clip_len)?;
    let mut out = Array1::<F>::zeros(n);
    for start in window_starts(n, cfg.clip_len, cfg.clip_stride) {
        let piece = clip.slice_frames(start, cfg.clip_len)?;
        let wave = estimator.estimate(&piece)?;
        if wave.len() != cfg.clip_len {
            return Err(Error::ShapeMismatch(format!(
                "estimator returned {} samples for a {}-frame clip",
                wave.len(),
                cfg.clip_len
            )));
        }
        let contrib = match standardize(&wave) {
            Ok(w) => w.samples().clone(),
            Err(Error::ZeroVariance) => Array1::zeros(cfg.clip_len),
            Err(e) => return Err(e),
        };
        let mut seg = out.slice_mut(s![start..start + cfg.clip_len]);
        for (o, (&c, &t)) in seg.iter_mut().zip(contrib.iter().zip(taper.iter())) {
            *o += c * t;
        }
    }
    Waveform::new(out, clip.fps())
}

/// Length-preserving centered moving average. Windows are truncated at the
/// series edges, so each output is the mean of the available neighbors.
pub fn moving_average(x: ArrayView1<f64>, window: usize) -> Result<Array1<f64>> {
    if window == 0 {
        return Err(Error::InvalidLength(
            "moving average window must be >= 1".to_string(),
        ));
    }
    let n = x.len();
    let half_lo = (window - 1) / 2;
    let half_hi = window / 2;
    let out = Array1::from_shape_fn(n, |i| {
        let lo = i.saturating_sub(half_lo);
        let hi = (i + half_hi + 1).min(n);
        x.slice(s![lo..hi]).mean().expect("window is never empty")
    });
    Ok(out)
}

/// Sliding spectral heart-rate estimate.
///
/// Each window of `hr_window_s` seconds is tapered with a Hamming window,
/// zero-padded by `fft_pad_factor`, and the FFT magnitude is searched over
/// `search_band_bpm` (inclusive). Ties resolve to the lower frequency. The
/// resulting series is smoothed with a centered `smooth_s`-second moving
/// average and sampled once per `hr_stride` input frames.
pub fn extract_heart_rate<F: Real>(
    wave: &Waveform<F>,
    cfg: &PipelineConfig,
) -> Result<HeartRateSeries> {
    cfg.validate()?;
    let fps = wave.fps();
    let w = (cfg.hr_window_s * fps).round() as usize;
    if w < 2 {
        return Err(Error::Config(format!(
            "hr_window_s = {} spans under 2 frames at {fps} fps",
            cfg.hr_window_s
        )));
    }
    if wave.len() < w {
        return Err(Error::TooShort(format!(
            "waveform has {} samples, heart-rate window needs {w}",
            wave.len()
        )));
    }

    let pad = w * cfg.fft_pad_factor;
    // Frequency of bin k in bpm, multiplied out before dividing so bins
    // that are exact in f64 stay exact.
    let bin_bpm = |k: usize| (k as f64) * 60.0 * fps / (pad as f64);
    let (lo, hi) = cfg.search_band_bpm;
    let band: Vec<usize> = (0..=pad / 2)
        .filter(|&k| {
            let b = bin_bpm(k);
            b >= lo && b <= hi
        })
        .collect();
    if band.is_empty() {
        return Err(Error::Config(format!(
            "search band ({lo}, {hi}) bpm contains no FFT bins at resolution {} bpm",
            bin_bpm(1)
        )));
    }

    let taper = hamming_window::<F>(w)?;
    let n_windows = (wave.len() - w) / cfg.hr_stride + 1;
    let mut bpm = Array1::<f64>::zeros(n_windows);
    let mut buf = Array1::<F>::zeros(w);
    for i in 0..n_windows {
        let start = i * cfg.hr_stride;
        let seg = wave.samples().slice(s![start..start + w]);
        for ((b, &v), &t) in buf.iter_mut().zip(seg.iter()).zip(taper.iter()) {
            *b = v * t;
        }
        let (_, mags) = real_fft_magnitude(buf.view(), pad, fps)?;
        let mut best_k = band[0];
        let mut best_mag = mags[band[0]];
        for &k in &band[1..] {
            if mags[k] > best_mag {
                best_mag = mags[k];
                best_k = k;
            }
        }
        bpm[i] = bin_bpm(best_k);
    }

    let series_fps = fps / cfg.hr_stride as f64;
    let smooth_len = (cfg.smooth_s * series_fps).round() as usize;
    if smooth_len > 1 {
        bpm = moving_average(bpm.view(), smooth_len)?;
    }
    HeartRateSeries::new(bpm, series_fps)
}

/// Truncates two series to their common prefix so they can be compared
/// index by index.
pub fn align_series(
    a: &HeartRateSeries,
    b: &HeartRateSeries,
) -> Result<(Array1<f64>, Array1<f64>)> {
    if (a.fps() - b.fps()).abs() > 1e-9 {
        return Err(Error::ShapeMismatch(format!(
            "series sample rates differ: {} vs {}",
            a.fps(),
            b.fps()
        )));
    }
    let n = a.len().min(b.len());
    if n == 0 {
        return Err(Error::EmptyOverlap);
    }
    Ok((
        a.bpm().slice(s![..n]).to_owned(),
        b.bpm().slice(s![..n]).to_owned(),
    ))
}
