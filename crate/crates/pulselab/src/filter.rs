//! Zero-phase Butterworth bandpass filtering.
//!
//! Filter design and the forward-backward pass are delegated to sci-rs,
//! whose `butter` and `sosfiltfilt` are ports of the SciPy functions of the
//! same names; tests in `tests/filter_response.rs` pin the output against
//! values frozen from SciPy itself.

use nalgebra::RealField;
use ndarray::Array1;
use sci_rs::signal::filter::design::{
    butter_dyn, DigitalFilter, FilterBandType, FilterOutputType, Sos,
};
use sci_rs::signal::filter::sosfiltfilt_dyn;

use crate::scalar::Real;
use crate::{Error, Result};

/// Designs a digital Butterworth bandpass as second-order sections.
///
/// `order` is the prototype order; the bandpass transform doubles the pole
/// count, so `order` 4 yields 4 biquad sections.
pub fn butter_bandpass_sos<F: Real + RealField>(
    order: usize,
    lo_hz: f64,
    hi_hz: f64,
    fps: f64,
) -> Result<Vec<Sos<F>>> {
    if !(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < fps / 2.0) {
        return Err(Error::Config(format!(
            "bandpass edges must satisfy 0 < {lo_hz} < {hi_hz} < fps/2 ({})",
            fps / 2.0
        )));
    }
    if order == 0 {
        return Err(Error::Config("filter order must be >= 1".to_string()));
    }
    let filt = butter_dyn::<F>(
        order,
        vec![F::from_f64_c(lo_hz), F::from_f64_c(hi_hz)],
        Some(FilterBandType::Bandpass),
        Some(false),
        Some(FilterOutputType::Sos),
        Some(F::from_f64_c(fps)),
    );
    match filt {
        DigitalFilter::Sos(sos) => Ok(sos.sos),
        _ => Err(Error::Config("filter design did not return sections".to_string())),
    }
}

/// Minimum input length for [`sosfiltfilt`] given a section count; the
/// padded extension is 3x the effective tap count.
pub fn filtfilt_min_len(n_sections: usize) -> usize {
    3 * (2 * n_sections + 1) + 1
}

/// Forward-backward (zero-phase) application of second-order sections.
pub fn sosfiltfilt<F: Real + RealField>(x: &Array1<F>, sos: &[Sos<F>]) -> Result<Array1<F>> {
    let min_len = filtfilt_min_len(sos.len());
    if x.len() < min_len {
        return Err(Error::TooShort(format!(
            "zero-phase filtering needs at least {min_len} samples, got {}",
            x.len()
        )));
    }
    Ok(Array1::from_vec(sosfiltfilt_dyn(x.iter(), sos)))
}

/// Fourth-order zero-phase Butterworth bandpass, the standard band-limiting
/// step for pulse signals.
pub fn bandpass_filtfilt<F: Real + RealField>(
    x: &Array1<F>,
    lo_hz: f64,
    hi_hz: f64,
    fps: f64,
) -> Result<Array1<F>> {
    let sos = butter_bandpass_sos::<F>(4, lo_hz, hi_hz, fps)?;
    sosfiltfilt(x, &sos)
}
