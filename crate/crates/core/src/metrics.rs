//! Evaluation metrics: phase-aligned error, MSE in dB, success rate, SNR.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{inner, norm_sq, norm_sq_real};

/// Success threshold on the aligned squared error used by the benchmarks.
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 1e-4;

/// `min_phi || x_hat - e^{j phi} x_true ||^2`; the minimizer is
/// `phi* = angle(x_true^H x_hat)`.
pub fn aligned_error(x_hat: &[Complex64], x_true: &[Complex64]) -> Result<f64> {
    if x_hat.len() != x_true.len() {
        return Err(Error::DimensionMismatch {
            context: "aligned_error",
            expected: x_true.len(),
            got: x_hat.len(),
        });
    }
    if norm_sq(x_true) == 0.0 {
        return Err(Error::invalid("x_true", "reference signal must be nonzero"));
    }
    let rotation = {
        let z = inner(x_true, x_hat);
        let r = z.norm();
        if r == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            z / r
        }
    };
    Ok(x_hat
        .iter()
        .zip(x_true)
        .map(|(h, t)| (h - rotation * t).norm_sqr())
        .sum())
}

/// `10 log10(mean(errors))`.
pub fn mse_db(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::invalid("errors", "need at least one error value"));
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    Ok(10.0 * mean.log10())
}

/// Fraction of errors at or below the threshold (inclusive).
pub fn success_rate(errors: &[f64], threshold: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::invalid("errors", "need at least one error value"));
    }
    let hits = errors.iter().filter(|&&e| e <= threshold).count();
    Ok(hits as f64 / errors.len() as f64)
}

/// `10 log10(||clean||^2 / ||noise||^2)`.
pub fn realized_snr_db(clean: &[Complex64], noise: &[f64]) -> Result<f64> {
    let cs = norm_sq(clean);
    let ns = norm_sq_real(noise);
    if cs == 0.0 {
        return Err(Error::invalid("clean", "clean vector must be nonzero"));
    }
    if ns == 0.0 {
        return Err(Error::invalid("noise", "noise vector must be nonzero"));
    }
    Ok(10.0 * (cs / ns).log10())
}
