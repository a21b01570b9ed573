//! CHROM chrominance-based pulse estimation (De Haan & Jeanne, 2013).
//!
//! Two fixed chrominance projections of temporally normalized RGB traces
//! cancel intensity variation; an adaptive recombination of the band-passed
//! projections yields the pulse signal.

use nalgebra::RealField;
use ndarray::Array1;
use num_traits::Float;

use crate::filter::bandpass_filtfilt;
use crate::scalar::Real;
use crate::signal::{mean_std, VideoClip, Waveform, VARIANCE_FLOOR};
use crate::{Error, Result};

/// Passband in Hz (42 to 240 beats per minute).
pub const CHROM_BAND_HZ: (f64, f64) = (0.7, 4.0);

/// Minimum frame count; below this the zero-phase bandpass has too little
/// signal to pad against.
pub const CHROM_MIN_FRAMES: usize = 64;

/// Marker type for trait-object use; the work happens in [`chrom_estimate`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Chrom;

/// Estimates the pulse waveform of a clip via the CHROM projections.
///
/// Steps: spatial-mean RGB per frame; per-channel temporal normalization
/// `Cn = C / mean(C)`; projections `X = 3 Rn - 2 Gn` and
/// `Y = 1.5 Rn + Gn - 1.5 Bn`; both band-passed to [`CHROM_BAND_HZ`]; output
/// `S = Xf - (sigma(Xf) / sigma(Yf)) * Yf`.
pub fn chrom_estimate<F: Real + RealField>(clip: &VideoClip<F>) -> Result<Waveform<F>> {
    let n = clip.n_frames();
    if n < CHROM_MIN_FRAMES {
        return Err(Error::TooShort(format!(
            "CHROM needs at least {CHROM_MIN_FRAMES} frames, got {n}"
        )));
    }
    let rgb = clip.mean_rgb();
    let inv_n = F::from_f64_c(1.0 / n as f64);
    let mut normalized = [Array1::<F>::zeros(n), Array1::zeros(n), Array1::zeros(n)];
    for c in 0..3 {
        let col = rgb.column(c);
        let mean = col.iter().copied().sum::<F>() * inv_n;
        if Float::abs(mean) < F::from_f64_c(1e-9) {
            return Err(Error::DegenerateInput(format!(
                "channel {c} mean is near zero"
            )));
        }
        normalized[c] = col.mapv(|v| v / mean);
    }
    let [rn, gn, bn] = normalized;

    let three = F::from_f64_c(3.0);
    let two = F::from_f64_c(2.0);
    let one_half = F::from_f64_c(1.5);
    let x = Array1::from_shape_fn(n, |i| three * rn[i] - two * gn[i]);
    let y = Array1::from_shape_fn(n, |i| one_half * rn[i] + gn[i] - one_half * bn[i]);

    let xf = bandpass_filtfilt(&x, CHROM_BAND_HZ.0, CHROM_BAND_HZ.1, clip.fps())?;
    let yf = bandpass_filtfilt(&y, CHROM_BAND_HZ.0, CHROM_BAND_HZ.1, clip.fps())?;

    let (_, sx) = mean_std(xf.view());
    let (_, sy) = mean_std(yf.view());
    let s = if sy < F::from_f64_c(VARIANCE_FLOOR) {
        xf
    } else {
        let alpha = sx / sy;
        Array1::from_shape_fn(n, |i| xf[i] - alpha * yf[i])
    };
    Waveform::new(s, clip.fps())
}
