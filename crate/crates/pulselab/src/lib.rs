//! A desk-scale laboratory for remote photoplethysmography (rPPG) and for
//! frequency-targeted attacks against it.
//!
//! The crate covers the full loop:
//!
//! - [`synth`] renders small face-like video clips with a known embedded
//!   blood-volume pulse, plus pulse-free "mask" media.
//! - [`estimators`] recovers the pulse waveform from video three ways:
//!   CHROM and POS (classical color projections) and [`estimators::micro`],
//!   a small temporally dilated 3-D convolutional network with hand-written
//!   forward and backward passes.
//! - [`pipeline`] turns waveforms into heart-rate series: sliding-clip
//!   inference with Hann overlap-add, then Hamming/FFT spectral-peak
//!   extraction with moving-average smoothing.
//! - [`attack`] perturbs clips so estimators report an attacker-chosen
//!   frequency: single-step and momentum-iterative sign-gradient attacks,
//!   optionally constrained to be spatially uniform and light-adding, and a
//!   model-free variant that replays a sinusoid along a fitted RGB line.
//! - [`physical`] replays those per-frame RGB offsets through a simulated
//!   LED with inverse-square distance falloff.
//! - [`eval`] scores everything (MAE, RMSE, success rates) and emits CSV,
//!   JSON, and SVG reports; [`harness`] wires the standard desk-scale
//!   experiment grid together.
//!
//! Pixels live on the `[0,255]` scale end to end, so perturbation budgets
//! are in raw 8-bit counts. All randomness is seeded; equal seeds give
//! byte-identical outputs.

pub mod attack;
pub mod estimators;
pub mod eval;
pub mod filter;
pub mod harness;
pub mod npy;
pub mod physical;
pub mod pipeline;
pub mod scalar;
pub mod signal;
pub mod synth;

mod error;

pub use error::Error;
pub use scalar::Real;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Default scalar for full-precision runs. Spectral-peak bookkeeping and the
/// standardization tolerance both assume f64; f32 stays available through the
/// generic APIs for storage-sized workloads.
pub type Scalar = f64;

/// Video clip at the default scalar.
pub type Clip = signal::VideoClip<Scalar>;

/// Waveform at the default scalar.
pub type Wave = signal::Waveform<Scalar>;

/// Perturbation at the default scalar.
pub type Eta = signal::Perturbation<Scalar>;
