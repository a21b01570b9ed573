//! Negative-correlation training loss.
//!
//! `J = 1 - pearson(prediction, target)` ranges over `[0, 2]`: 0 at perfect
//! positive correlation, 2 at perfect anticorrelation. Scale and offset of
//! the prediction are irrelevant, which matches how the pulse estimate is
//! consumed downstream (only its spectrum matters).

use ndarray::Array1;

use crate::scalar::Real;
use crate::signal::{mean_std, VARIANCE_FLOOR};
use crate::{Error, Result};

/// Loss value together with its gradient with respect to the prediction.
#[derive(Debug, Clone)]
pub struct LossValue<F: Real> {
    pub value: F,
    pub grad: Array1<F>,
}

/// Computes `1 - pearson(prediction, target)` and its exact gradient.
///
/// With `p̂` and `t̂` the standardized inputs (population statistics) and
/// `ρ` their mean product, the gradient is
/// `dJ/dp_i = -(t̂_i - ρ·p̂_i) / (N·σ_p)`.
///
/// Errors with [`Error::ZeroVariance`] when either input is constant, since
/// the correlation is undefined there.
pub fn pearson_loss<F: Real>(prediction: &Array1<F>, target: &Array1<F>) -> Result<LossValue<F>> {
    if prediction.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "prediction has {} samples, target has {}",
            prediction.len(),
            target.len()
        )));
    }
    if prediction.len() < 2 {
        return Err(Error::InvalidLength(format!(
            "correlation needs at least 2 samples, got {}",
            prediction.len()
        )));
    }
    let floor = F::from_f64_c(VARIANCE_FLOOR);
    let (mp, sp) = mean_std(prediction.view());
    let (mt, st) = mean_std(target.view());
    if sp < floor || st < floor {
        return Err(Error::ZeroVariance);
    }

    let n = F::from_f64_c(prediction.len() as f64);
    let p_hat = prediction.mapv(|v| (v - mp) / sp);
    let t_hat = target.mapv(|v| (v - mt) / st);
    let rho = p_hat
        .iter()
        .zip(t_hat.iter())
        .map(|(&a, &b)| a * b)
        .sum::<F>()
        / n;

    let coef = F::one() / (n * sp);
    let grad = Array1::from_shape_fn(prediction.len(), |i| {
        -(t_hat[i] - rho * p_hat[i]) * coef
    });

    Ok(LossValue {
        value: F::one() - rho,
        grad,
    })
}
