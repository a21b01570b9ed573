//! Pulse estimators sharing one interface: CHROM and POS (classical color
//! projections) and a small trainable 3-D convolutional network.

mod chrom;
mod loss;
mod micro;
mod pos;
mod train;

pub use chrom::{chrom_estimate, Chrom, CHROM_BAND_HZ};
pub use loss::{pearson_loss, LossValue};
pub use micro::{
    micro_backward, micro_forward, ConvLayer, ForwardCache, MicroGradients, MicroNetParams,
    MICRO_MIN_FRAMES,
};
pub use pos::{pos_estimate, Pos, POS_WINDOW_S};
pub use train::{train_micro, EpochStats, TrainLog};

use nalgebra::RealField;

use crate::scalar::Real;
use crate::signal::{VideoClip, Waveform};
use crate::Result;

/// A pulse estimator maps a video clip to a waveform with one value per
/// frame.
pub trait PulseEstimator<F: Real> {
    fn estimate(&self, clip: &VideoClip<F>) -> Result<Waveform<F>>;
    fn name(&self) -> &'static str;
}

impl<F: Real + RealField> PulseEstimator<F> for Chrom {
    fn estimate(&self, clip: &VideoClip<F>) -> Result<Waveform<F>> {
        chrom_estimate(clip)
    }

    fn name(&self) -> &'static str {
        "chrom"
    }
}

impl<F: Real> PulseEstimator<F> for Pos {
    fn estimate(&self, clip: &VideoClip<F>) -> Result<Waveform<F>> {
        pos_estimate(clip)
    }

    fn name(&self) -> &'static str {
        "pos"
    }
}

impl<F: Real> PulseEstimator<F> for MicroNetParams<F> {
    fn estimate(&self, clip: &VideoClip<F>) -> Result<Waveform<F>> {
        micro_forward(self, clip).map(|(wave, _)| wave)
    }

    fn name(&self) -> &'static str {
        "micro"
    }
}
