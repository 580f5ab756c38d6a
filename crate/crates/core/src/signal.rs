//! Complex signal vector and small complex-arithmetic helpers.

use num_complex::Complex64;
use std::ops::Deref;

use crate::error::{Error, Result};

/// A finite complex vector of length `N >= 1`; the unknown of the retrieval
/// problem or an estimate of it.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    entries: Vec<Complex64>,
}

impl ComplexSignal {
    /// Validates finiteness and non-emptiness.
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("signal", "length must be at least 1"));
        }
        for (i, z) in entries.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite {
                    context: "signal",
                    index: i,
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn to_vec(&self) -> Vec<Complex64> {
        self.entries.clone()
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.entries
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.entries)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            entries: self.entries.iter().map(|z| z * factor).collect(),
        }
    }
}

impl Deref for ComplexSignal {
    type Target = [Complex64];

    fn deref(&self) -> &[Complex64] {
        &self.entries
    }
}

impl AsRef<[Complex64]> for ComplexSignal {
    fn as_ref(&self) -> &[Complex64] {
        &self.entries
    }
}

/// `sum_i conj(a_i) b_i`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| x.conj() * y)
        .fold(Complex64::new(0.0, 0.0), |acc, z| acc + z)
}

pub fn norm_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm_sq_real(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `z / |z|`, with the zero convention `phase_factor(0) = 1`.
pub fn phase_factor(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        z / r
    }
}
