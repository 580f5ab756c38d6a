//! Heavy-tailed noise generators and SNR-controlled scaling.
//!
//! All noise here is real-valued; it is added to the measured magnitudes.
//! Samplers are pure functions of an explicit generator, so a Monte-Carlo
//! trial that owns its generator is reproducible.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::signal::norm_sq;

/// Tagged description of a noise distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// Zero-mean Laplacian with variance `sigma^2`, density
    /// `1/(sqrt(2) sigma) * exp(-sqrt(2) |v| / sigma)`.
    Laplacian { sigma: f64 },
    /// Alpha-stable with stability `alpha`, asymmetry `beta`, scale `gamma`
    /// and shift `mu`. `beta = 0` gives the symmetric family.
    AlphaStable {
        alpha: f64,
        beta: f64,
        gamma: f64,
        mu: f64,
    },
    /// Two-component zero-mean Gaussian mixture; component `i` occurs with
    /// probability `probabilities[i]` and has variance `variances[i]`.
    Gmm {
        probabilities: [f64; 2],
        variances: [f64; 2],
    },
}

impl NoiseModel {
    /// The symmetric alpha-stable setting used by the impulsive-noise
    /// benchmarks: `alpha = 0.8`, `beta = 0`, `gamma = 2`, `mu = 0`.
    pub fn alpha_stable_default() -> Self {
        NoiseModel::AlphaStable {
            alpha: 0.8,
            beta: 0.0,
            gamma: 2.0,
            mu: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::Laplacian { sigma } => {
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return Err(Error::invalid("sigma", "must be positive and finite"));
                }
            }
            NoiseModel::AlphaStable {
                alpha,
                beta,
                gamma,
                mu,
            } => {
                if !(alpha > 0.0 && alpha <= 2.0) {
                    return Err(Error::invalid("alpha", "must lie in (0, 2]"));
                }
                if !(-1.0..=1.0).contains(&beta) {
                    return Err(Error::invalid("beta", "must lie in [-1, 1]"));
                }
                if !(gamma > 0.0) || !gamma.is_finite() {
                    return Err(Error::invalid("gamma", "must be positive and finite"));
                }
                if !mu.is_finite() {
                    return Err(Error::invalid("mu", "must be finite"));
                }
            }
            NoiseModel::Gmm {
                probabilities,
                variances,
            } => {
                let sum: f64 = probabilities.iter().sum();
                if (sum - 1.0).abs() > 1e-12
                    || probabilities.iter().any(|&c| !(0.0..=1.0).contains(&c))
                {
                    return Err(Error::invalid(
                        "probabilities",
                        "component probabilities must lie in [0,1] and sum to 1",
                    ));
                }
                if variances.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                    return Err(Error::invalid("variances", "must be nonnegative and finite"));
                }
            }
        }
        Ok(())
    }
}

/// Draws `m` i.i.d. samples from `model`.
pub fn sample<R: Rng + ?Sized>(model: &NoiseModel, m: usize, rng: &mut R) -> Result<Vec<f64>> {
    model.validate()?;
    let mut out = Vec::with_capacity(m);
    match *model {
        NoiseModel::Laplacian { sigma } => {
            // Signed exponential magnitude: scale b = sigma / sqrt(2).
            let b = sigma / std::f64::consts::SQRT_2;
            let exp = Exp::new(1.0 / b).expect("positive rate");
            for _ in 0..m {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                out.push(sign * exp.sample(rng));
            }
        }
        NoiseModel::AlphaStable {
            alpha,
            beta,
            gamma,
            mu,
        } => {
            for _ in 0..m {
                out.push(sample_stable(alpha, beta, gamma, mu, rng));
            }
        }
        NoiseModel::Gmm {
            probabilities,
            variances,
        } => {
            let sigmas = [variances[0].sqrt(), variances[1].sqrt()];
            for _ in 0..m {
                let u: f64 = rng.gen();
                let idx = usize::from(u >= probabilities[0]);
                let g: f64 = rng.sample(StandardNormal);
                out.push(g * sigmas[idx]);
            }
        }
    }
    Ok(out)
}

/// One draw by the Chambers-Mallows-Stuck construction.
fn sample_stable<R: Rng + ?Sized>(alpha: f64, beta: f64, gamma: f64, mu: f64, rng: &mut R) -> f64 {
    let v = (rng.gen::<f64>() - 0.5) * PI;
    let w: f64 = Exp::new(1.0).expect("unit rate").sample(rng);
    let x = if alpha == 1.0 {
        let t = FRAC_PI_2 + beta * v;
        let base = (2.0 / PI) * (t * v.tan() - beta * ((FRAC_PI_2 * w * v.cos()) / t).ln());
        gamma * base + (2.0 / PI) * beta * gamma * gamma.ln()
    } else {
        let zeta = beta * (FRAC_PI_2 * alpha).tan();
        let b = zeta.atan() / alpha;
        let s = (1.0 + zeta * zeta).powf(1.0 / (2.0 * alpha));
        let num = (alpha * (v + b)).sin();
        let den = v.cos().powf(1.0 / alpha);
        let tail = ((v - alpha * (v + b)).cos() / w).powf((1.0 - alpha) / alpha);
        gamma * s * num / den * tail
    };
    x + mu
}

/// Rescales `noise` so that `10 log10(||clean||^2 / ||noise||^2)` equals
/// `snr_db` exactly for this realization. Preserves the noise direction.
pub fn scale_to_snr(noise: &[f64], clean: &[Complex64], snr_db: f64) -> Result<Vec<f64>> {
    let clean_energy = norm_sq(clean);
    if clean_energy == 0.0 {
        return Err(Error::invalid("clean", "clean vector must be nonzero"));
    }
    let noise_energy: f64 = noise.iter().map(|v| v * v).sum();
    if noise_energy == 0.0 {
        return Err(Error::invalid("noise", "noise vector must be nonzero"));
    }
    let target = clean_energy / 10f64.powf(snr_db / 10.0);
    let factor = (target / noise_energy).sqrt();
    Ok(noise.iter().map(|v| v * factor).collect())
}

/// Zero vector with `round(fraction * m)` positions (chosen uniformly without
/// replacement) carrying zero-mean Gaussian draws of the given variance.
/// Rounding is to the nearest integer, ties away from zero.
pub fn sparse_outliers<R: Rng + ?Sized>(
    fraction: f64,
    variance: f64,
    m: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid("fraction", "must lie in [0, 1]"));
    }
    if variance < 0.0 || !variance.is_finite() {
        return Err(Error::invalid("variance", "must be nonnegative and finite"));
    }
    let count = ((fraction * m as f64).round() as usize).min(m);
    let mut out = vec![0.0; m];
    if count == 0 {
        return Ok(out);
    }
    let mut positions = rand::seq::index::sample(rng, m, count).into_vec();
    positions.sort_unstable();
    let sigma = variance.sqrt();
    for idx in positions {
        let g: f64 = rng.sample(StandardNormal);
        out[idx] = g * sigma;
    }
    Ok(out)
}
