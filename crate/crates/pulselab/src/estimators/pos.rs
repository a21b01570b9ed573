//! POS plane-orthogonal-to-skin pulse estimation (Wang et al., 2017).
//!
//! Projects temporally normalized RGB onto two rows orthogonal to the
//! intensity direction, recombines them adaptively per sliding window, and
//! overlap-adds the mean-subtracted window estimates.

use ndarray::Array1;

use crate::scalar::Real;
use crate::signal::{mean_std, VideoClip, Waveform, VARIANCE_FLOOR};
use crate::{Error, Result};

/// Sliding-window length in seconds, the standard POS choice.
pub const POS_WINDOW_S: f64 = 1.6;

/// Marker type for trait-object use; the work happens in [`pos_estimate`].
#[derive(Debug, Clone, Copy, Default)]
pub struct Pos;

/// Estimates the pulse waveform of a clip via the POS projections.
///
/// Per window of 1.6 s with 1-frame stride: `Cn = C / mean(C)` over the
/// window; `S1 = Gn - Bn` (row `[0,1,-1]`), `S2 = -2 Rn + Gn + Bn` (row
/// `[-2,1,1]`); `h = S1 + (sigma(S1)/sigma(S2)) S2`, mean-subtracted, then
/// overlap-added into the output.
pub fn pos_estimate<F: Real>(clip: &VideoClip<F>) -> Result<Waveform<F>> {
    let n = clip.n_frames();
    let win = (POS_WINDOW_S * clip.fps()).round() as usize;
    if win < 2 {
        return Err(Error::Config(format!(
            "fps {} makes the POS window degenerate",
            clip.fps()
        )));
    }
    if n < win {
        return Err(Error::TooShort(format!(
            "POS needs at least {win} frames at {} fps, got {n}",
            clip.fps()
        )));
    }
    let rgb = clip.mean_rgb();
    let inv_w = F::from_f64_c(1.0 / win as f64);
    let two = F::from_f64_c(2.0);
    let floor = F::from_f64_c(VARIANCE_FLOOR);

    let mut out = Array1::<F>::zeros(n);
    let mut s1 = Array1::<F>::zeros(win);
    let mut s2 = Array1::<F>::zeros(win);
    for start in 0..=n - win {
        let mut means = [F::zero(); 3];
        for c in 0..3 {
            let mut sum = F::zero();
            for t in start..start + win {
                sum += rgb[[t, c]];
            }
            means[c] = sum * inv_w;
            if means[c].abs() < F::from_f64_c(1e-9) {
                return Err(Error::DegenerateInput(format!(
                    "channel {c} mean is near zero in window starting at {start}"
                )));
            }
        }
        for i in 0..win {
            let rn = rgb[[start + i, 0]] / means[0];
            let gn = rgb[[start + i, 1]] / means[1];
            let bn = rgb[[start + i, 2]] / means[2];
            s1[i] = gn - bn;
            s2[i] = gn + bn - two * rn;
        }
        let (_, sd1) = mean_std(s1.view());
        let (_, sd2) = mean_std(s2.view());
        let alpha = if sd2 < floor { F::zero() } else { sd1 / sd2 };
        let mut h_mean = F::zero();
        for i in 0..win {
            s1[i] = s1[i] + alpha * s2[i];
            h_mean += s1[i];
        }
        h_mean = h_mean * inv_w;
        for i in 0..win {
            out[start + i] += s1[i] - h_mean;
        }
    }
    Waveform::new(out, clip.fps())
}
