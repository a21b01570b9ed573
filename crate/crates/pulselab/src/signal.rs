//! Domain types and deterministic signal primitives shared by every module.
//!
//! Pixels are real values on the `[0,255]` scale. Range is enforced when a
//! clip is constructed from generated or imported imagery; attack iterates
//! are allowed to leave the range (see [`VideoClip::new_unbounded`]), and
//! clamping happens only where a clip is exported as physical imagery.

use ndarray::{Array1, Array2, Array4, ArrayView1, s};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::scalar::Real;
use crate::{Error, Result};

/// Standard deviations below this are treated as zero variance.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// A 4-D video volume, dimension order `(frame, row, column, channel)`,
/// channels fixed at R, G, B.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip<F: Real = f64> {
    data: Array4<F>,
    fps: f64,
}

impl<F: Real> VideoClip<F> {
    /// Builds a clip and checks every invariant, including the `[0,255]`
    /// pixel range. Use for generated or imported imagery.
    pub fn new(data: Array4<F>, fps: f64) -> Result<Self> {
        let clip = Self::new_unbounded(data, fps)?;
        let lo = F::zero();
        let hi = F::from_f64_c(255.0);
        if clip.data.iter().any(|&v| v < lo || v > hi) {
            return Err(Error::Config(
                "pixel values outside [0,255]".to_string(),
            ));
        }
        Ok(clip)
    }

    /// Builds a clip without the pixel-range check. Attack iterates move up
    /// to epsilon outside `[0,255]` by design and are stored through here.
    pub fn new_unbounded(data: Array4<F>, fps: f64) -> Result<Self> {
        let (n, h, w, c) = data.dim();
        if n < 1 || h < 1 || w < 1 {
            return Err(Error::ShapeMismatch(format!(
                "clip dims must be at least 1x1x1, got {n}x{h}x{w}"
            )));
        }
        if c != 3 {
            return Err(Error::ShapeMismatch(format!(
                "clip must have 3 channels, got {c}"
            )));
        }
        if !fps.is_finite() || fps <= 0.0 {
            return Err(Error::Config(format!("fps must be positive, got {fps}")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("clip contains non-finite values".to_string()));
        }
        Ok(Self { data, fps })
    }

    pub fn data(&self) -> &Array4<F> {
        &self.data
    }

    pub fn into_data(self) -> Array4<F> {
        self.data
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn n_frames(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    /// Spatial mean per frame and channel, shape `(frames, 3)`.
    pub fn mean_rgb(&self) -> Array2<F> {
        let (n, h, w, _) = self.data.dim();
        let scale = F::from_f64_c(1.0 / (h as f64 * w as f64));
        let mut out = Array2::zeros((n, 3));
        for t in 0..n {
            for c in 0..3 {
                let sum = self.data.slice(s![t, .., .., c]).iter().copied().sum::<F>();
                out[[t, c]] = sum * scale;
            }
        }
        out
    }

    /// Copy of a contiguous frame range as a new clip.
    pub fn slice_frames(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.n_frames() || len == 0 {
            return Err(Error::ShapeMismatch(format!(
                "frame slice {start}..{} out of range for {} frames",
                start + len,
                self.n_frames()
            )));
        }
        Ok(Self {
            data: self.data.slice(s![start..start + len, .., .., ..]).to_owned(),
            fps: self.fps,
        })
    }
}

/// A per-frame real-valued signal with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<F: Real = f64> {
    samples: Array1<F>,
    fps: f64,
}

impl<F: Real> Waveform<F> {
    pub fn new(samples: Array1<F>, fps: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidLength("waveform must be non-empty".to_string()));
        }
        if !fps.is_finite() || fps <= 0.0 {
            return Err(Error::Config(format!("fps must be positive, got {fps}")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("waveform contains non-finite values".to_string()));
        }
        Ok(Self { samples, fps })
    }

    pub fn samples(&self) -> &Array1<F> {
        &self.samples
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Per-frame heart-rate values in bpm.
///
/// Heart rates derive from FFT bin indices and the sample rate, so they are
/// kept in f64 regardless of the waveform scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct HeartRateSeries {
    bpm: Array1<f64>,
    fps: f64,
}

impl HeartRateSeries {
    pub fn new(bpm: Array1<f64>, fps: f64) -> Result<Self> {
        if bpm.is_empty() {
            return Err(Error::InvalidLength("heart-rate series must be non-empty".to_string()));
        }
        if !fps.is_finite() || fps <= 0.0 {
            return Err(Error::Config(format!("fps must be positive, got {fps}")));
        }
        if bpm.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("heart-rate series contains non-finite values".to_string()));
        }
        Ok(Self { bpm, fps })
    }

    /// Constant series, the usual representation of a configured or target
    /// heart rate.
    pub fn constant(bpm: f64, len: usize, fps: f64) -> Result<Self> {
        Self::new(Array1::from_elem(len, bpm), fps)
    }

    pub fn bpm(&self) -> &Array1<f64> {
        &self.bpm
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.bpm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bpm.is_empty()
    }
}

/// An additive perturbation, either one value per pixel or one RGB offset
/// per frame (the spatially uniform case).
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation<F: Real = f64> {
    /// Shape `(frame, row, column, channel)`, matching the attacked clip.
    Full(Array4<F>),
    /// Shape `(frame, channel)`, broadcast over rows and columns.
    PerFrame(Array2<F>),
}

impl<F: Real> Perturbation<F> {
    pub fn n_frames(&self) -> usize {
        match self {
            Perturbation::Full(a) => a.dim().0,
            Perturbation::PerFrame(a) => a.dim().0,
        }
    }

    /// Largest absolute entry.
    pub fn linf_norm(&self) -> F {
        let fold = |acc: F, &v: &F| acc.max(v.abs());
        match self {
            Perturbation::Full(a) => a.iter().fold(F::zero(), fold),
            Perturbation::PerFrame(a) => a.iter().fold(F::zero(), fold),
        }
    }

    /// Smallest entry; nonnegative-constrained attacks keep this at >= 0.
    pub fn min_value(&self) -> F {
        let fold = |acc: F, &v: &F| acc.min(v);
        match self {
            Perturbation::Full(a) => a.iter().fold(F::infinity(), fold),
            Perturbation::PerFrame(a) => a.iter().fold(F::infinity(), fold),
        }
    }

    pub fn per_frame(&self) -> Option<&Array2<F>> {
        match self {
            Perturbation::PerFrame(a) => Some(a),
            Perturbation::Full(_) => None,
        }
    }

    /// Materializes the full `(frame, row, column, channel)` tensor.
    pub fn to_full(&self, height: usize, width: usize) -> Array4<F> {
        match self {
            Perturbation::Full(a) => a.clone(),
            Perturbation::PerFrame(a) => {
                let n = a.dim().0;
                let mut out = Array4::zeros((n, height, width, 3));
                for t in 0..n {
                    for c in 0..3 {
                        out.slice_mut(s![t, .., .., c]).fill(a[[t, c]]);
                    }
                }
                out
            }
        }
    }

    /// Largest spatial variance over all `(frame, channel)` slices of the
    /// full tensor; exactly zero for per-frame perturbations.
    pub fn max_spatial_variance(&self) -> F {
        match self {
            Perturbation::PerFrame(_) => F::zero(),
            Perturbation::Full(a) => {
                let (n, h, w, _) = a.dim();
                let m = F::from_f64_c(1.0 / (h as f64 * w as f64));
                let mut worst = F::zero();
                for t in 0..n {
                    for c in 0..3 {
                        let plane = a.slice(s![t, .., .., c]);
                        let mean = plane.iter().copied().sum::<F>() * m;
                        let var = plane
                            .iter()
                            .map(|&v| (v - mean) * (v - mean))
                            .sum::<F>()
                            * m;
                        worst = worst.max(var);
                    }
                }
                worst
            }
        }
    }
}

/// Mean and population standard deviation of a slice.
pub(crate) fn mean_std<F: Real>(xs: ArrayView1<F>) -> (F, F) {
    let n = F::from_f64_c(xs.len() as f64);
    let mean = xs.iter().copied().sum::<F>() / n;
    let var = xs.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / n;
    (mean, var.sqrt())
}

/// Shifts and scales a waveform to mean 0 and population standard
/// deviation 1.
///
/// Returns [`Error::ZeroVariance`] for (near-)constant input; callers that
/// assemble windows into a longer signal map that case to all-zeros, since a
/// constant prediction carries no pulse information.
pub fn standardize<F: Real>(w: &Waveform<F>) -> Result<Waveform<F>> {
    if w.len() < 2 {
        return Err(Error::InvalidLength(format!(
            "standardize needs at least 2 samples, got {}",
            w.len()
        )));
    }
    let (mean, std) = mean_std(w.samples().view());
    if std < F::from_f64_c(VARIANCE_FLOOR) {
        return Err(Error::ZeroVariance);
    }
    let out = w.samples().mapv(|v| (v - mean) / std);
    Waveform::new(out, w.fps())
}

/// Periodic Hann window, `w[k] = 0.5 (1 - cos(2 pi k / n))`.
///
/// The periodic form (denominator `n`, not `n-1`) sums to exactly 1 when
/// copies are overlap-added at a stride of `n/2`, which keeps sliding-clip
/// reconstruction artifact-free.
pub fn hann_window<F: Real>(n: usize) -> Result<Array1<F>> {
    if n < 2 {
        return Err(Error::InvalidLength(format!("window length must be >= 2, got {n}")));
    }
    let mut w = Array1::zeros(n);
    for k in 0..n {
        let phase = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        w[k] = F::from_f64_c(0.5 * (1.0 - phase.cos()));
    }
    Ok(w)
}

/// Symmetric Hamming window, `w[k] = 0.54 - 0.46 cos(2 pi k / (n-1))`.
pub fn hamming_window<F: Real>(n: usize) -> Result<Array1<F>> {
    if n < 2 {
        return Err(Error::InvalidLength(format!("window length must be >= 2, got {n}")));
    }
    let mut w = Array1::zeros(n);
    for k in 0..n {
        let phase = 2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64;
        w[k] = F::from_f64_c(0.54 - 0.46 * phase.cos());
    }
    Ok(w)
}

/// Magnitude spectrum of a zero-padded real signal.
///
/// Returns `(freqs, mags)` where `freqs[k] = k * fps / pad_to` in Hz for
/// `k` in `0..=pad_to/2`. Frequencies are f64 metadata regardless of the
/// sample scalar.
pub fn real_fft_magnitude<F: Real>(
    x: ArrayView1<F>,
    pad_to: usize,
    fps: f64,
) -> Result<(Array1<f64>, Array1<F>)> {
    if pad_to < x.len() {
        return Err(Error::InvalidLength(format!(
            "pad_to ({pad_to}) must be >= signal length ({})",
            x.len()
        )));
    }
    if pad_to == 0 {
        return Err(Error::InvalidLength("pad_to must be positive".to_string()));
    }
    let mut buf: Vec<Complex<F>> = x
        .iter()
        .map(|&v| Complex::new(v, F::zero()))
        .chain(std::iter::repeat(Complex::new(F::zero(), F::zero())))
        .take(pad_to)
        .collect();
    FftPlanner::<F>::new().plan_fft_forward(pad_to).process(&mut buf);

    let n_bins = pad_to / 2 + 1;
    let freqs = Array1::from_iter((0..n_bins).map(|k| k as f64 * fps / pad_to as f64));
    let mags = Array1::from_iter(buf[..n_bins].iter().map(|c| c.norm()));
    Ok((freqs, mags))
}
