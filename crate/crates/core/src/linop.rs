//! Measurement operators for the magnitude model `y = |A x|`.
//!
//! Three backends are provided: an explicit dense matrix, a coded-diffraction
//! ensemble stacking `K` masked DFT blocks `D Λ_k`, and a 2-D Fourier
//! transform with integer oversampling (zero padding). All of them expose the
//! forward map `A x`, the true conjugate-transpose adjoint `A^H v`, and the
//! measured magnitudes `|A x|`.
//!
//! Conventions: the DFT is unnormalized with kernel `e^{-j 2π k n / N}`, so
//! `D D^H = N I`. The zero padding of the 2-D backend places the signal grid
//! in the top-left corner of the oversampled grid. Operators are immutable
//! after construction and safe to share across threads.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Distribution of one coded-diffraction mask entry, the product `b1 * b2` of
/// two independent factors.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskLaw {
    pub b1_values: [Complex64; 4],
    pub b1_probabilities: [f64; 4],
    pub b2_values: [f64; 2],
    pub b2_probabilities: [f64; 2],
}

impl Default for MaskLaw {
    /// `b1` uniform on `{1, -1, -j, j}`; `b2 = sqrt(2)/2` with probability
    /// 0.8 and `sqrt(3)` with probability 0.2.
    fn default() -> Self {
        Self {
            b1_values: [
                Complex64::new(1.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
            ],
            b1_probabilities: [0.25; 4],
            b2_values: [std::f64::consts::SQRT_2 / 2.0, 3.0_f64.sqrt()],
            b2_probabilities: [0.8, 0.2],
        }
    }
}

impl MaskLaw {
    pub fn validate(&self) -> Result<()> {
        let s1: f64 = self.b1_probabilities.iter().sum();
        let s2: f64 = self.b2_probabilities.iter().sum();
        if (s1 - 1.0).abs() > 1e-12 || self.b1_probabilities.iter().any(|&p| p < 0.0) {
            return Err(Error::invalid("mask_law", "b1 probabilities must sum to 1"));
        }
        if (s2 - 1.0).abs() > 1e-12 || self.b2_probabilities.iter().any(|&p| p < 0.0) {
            return Err(Error::invalid("mask_law", "b2 probabilities must sum to 1"));
        }
        Ok(())
    }

    /// Draws one mask entry `b1 * b2`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let b1 = pick(&self.b1_values, &self.b1_probabilities, rng);
        let b2 = pick(&self.b2_values, &self.b2_probabilities, rng);
        b1 * b2
    }
}

fn pick<T: Copy, R: Rng + ?Sized>(values: &[T], probs: &[f64], rng: &mut R) -> T {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (v, &p) in values.iter().zip(probs) {
        acc += p;
        if u < acc {
            return *v;
        }
    }
    values[values.len() - 1]
}

#[derive(Clone)]
enum Backend {
    Dense {
        matrix: DMatrix<Complex64>,
    },
    MaskedDft {
        masks: Vec<Vec<Complex64>>,
        fft_fwd: Arc<dyn Fft<f64>>,
        fft_inv: Arc<dyn Fft<f64>>,
    },
    Fourier2d {
        rows: usize,
        cols: usize,
        padded_rows: usize,
        padded_cols: usize,
        row_fwd: Arc<dyn Fft<f64>>,
        row_inv: Arc<dyn Fft<f64>>,
        col_fwd: Arc<dyn Fft<f64>>,
        col_inv: Arc<dyn Fft<f64>>,
    },
}

/// Which backend a [`MeasurementOperator`] is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Dense,
    MaskedDft,
    Fourier2d,
}

/// The forward map `x -> A x` together with its adjoint, `M` measurements on
/// signals of length `N`.
#[derive(Clone)]
pub struct MeasurementOperator {
    m: usize,
    n: usize,
    backend: Backend,
    dense_cache: OnceLock<Arc<DMatrix<Complex64>>>,
}

impl std::fmt::Debug for MeasurementOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeasurementOperator")
            .field("m", &self.m)
            .field("n", &self.n)
            .field("backend", &self.backend_kind())
            .finish()
    }
}

/// Dense operator from an explicit `M x N` matrix.
pub fn make_dense(matrix: DMatrix<Complex64>) -> Result<MeasurementOperator> {
    let (m, n) = (matrix.nrows(), matrix.ncols());
    if m == 0 || n == 0 {
        return Err(Error::invalid("matrix", "both dimensions must be at least 1"));
    }
    for (i, z) in matrix.iter().enumerate() {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::NonFinite {
                context: "dense operator",
                index: i,
            });
        }
    }
    Ok(MeasurementOperator {
        m,
        n,
        backend: Backend::Dense { matrix },
        dense_cache: OnceLock::new(),
    })
}

/// Coded-diffraction operator with `K` masks drawn once from [`MaskLaw`];
/// `M = K * N`. The masks are sampled at construction, so the seed of `rng`
/// fully determines the operator.
pub fn make_masked_dft<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<MeasurementOperator> {
    let law = MaskLaw::default();
    let masks = (0..k)
        .map(|_| (0..n).map(|_| law.sample(rng)).collect())
        .collect();
    masked_dft_with_masks(n, masks)
}

/// Coded-diffraction operator from explicitly supplied diagonal masks.
pub fn masked_dft_with_masks(
    n: usize,
    masks: Vec<Vec<Complex64>>,
) -> Result<MeasurementOperator> {
    if n == 0 {
        return Err(Error::invalid("n", "signal length must be at least 1"));
    }
    if masks.is_empty() {
        return Err(Error::invalid("k", "at least one mask is required"));
    }
    for mask in &masks {
        if mask.len() != n {
            return Err(Error::DimensionMismatch {
                context: "mask diagonal",
                expected: n,
                got: mask.len(),
            });
        }
    }
    let mut planner = FftPlanner::new();
    let fft_fwd = planner.plan_fft_forward(n);
    let fft_inv = planner.plan_fft_inverse(n);
    Ok(MeasurementOperator {
        m: masks.len() * n,
        n,
        backend: Backend::MaskedDft {
            masks,
            fft_fwd,
            fft_inv,
        },
        dense_cache: OnceLock::new(),
    })
}

/// 2-D Fourier operator: the `rows x cols` signal grid is zero-padded to
/// `(factor*rows) x (factor*cols)` and transformed by the unnormalized 2-D
/// DFT. Measurements and signals are row-major vectors.
pub fn make_fourier2d(rows: usize, cols: usize, factor: usize) -> Result<MeasurementOperator> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("grid", "both dimensions must be at least 1"));
    }
    if factor == 0 {
        return Err(Error::invalid("factor", "oversampling factor must be at least 1"));
    }
    let padded_rows = rows * factor;
    let padded_cols = cols * factor;
    let mut planner = FftPlanner::new();
    Ok(MeasurementOperator {
        m: padded_rows * padded_cols,
        n: rows * cols,
        backend: Backend::Fourier2d {
            rows,
            cols,
            padded_rows,
            padded_cols,
            row_fwd: planner.plan_fft_forward(padded_cols),
            row_inv: planner.plan_fft_inverse(padded_cols),
            col_fwd: planner.plan_fft_forward(padded_rows),
            col_inv: planner.plan_fft_inverse(padded_rows),
        },
        dense_cache: OnceLock::new(),
    })
}

impl MeasurementOperator {
    pub fn measurements(&self) -> usize {
        self.m
    }

    pub fn signal_len(&self) -> usize {
        self.n
    }

    pub fn backend_kind(&self) -> BackendKind {
        match self.backend {
            Backend::Dense { .. } => BackendKind::Dense,
            Backend::MaskedDft { .. } => BackendKind::MaskedDft,
            Backend::Fourier2d { .. } => BackendKind::Fourier2d,
        }
    }

    /// `(rows, cols, padded_rows, padded_cols)` for the 2-D Fourier backend.
    pub fn fourier2d_dims(&self) -> Option<(usize, usize, usize, usize)> {
        match self.backend {
            Backend::Fourier2d {
                rows,
                cols,
                padded_rows,
                padded_cols,
                ..
            } => Some((rows, cols, padded_rows, padded_cols)),
            _ => None,
        }
    }

    /// Diagonal of `A^H A` when it is exactly diagonal (masked DFT and 2-D
    /// Fourier backends), `None` for dense matrices.
    pub fn gram_diagonal(&self) -> Option<Vec<f64>> {
        match &self.backend {
            Backend::Dense { .. } => None,
            Backend::MaskedDft { masks, .. } => {
                // A^H A = N * sum_k |Λ_k|^2 since D D^H = N I.
                let mut diag = vec![0.0; self.n];
                for mask in masks {
                    for (d, z) in diag.iter_mut().zip(mask) {
                        *d += z.norm_sqr();
                    }
                }
                for d in &mut diag {
                    *d *= self.n as f64;
                }
                Some(diag)
            }
            Backend::Fourier2d {
                padded_rows,
                padded_cols,
                ..
            } => Some(vec![(padded_rows * padded_cols) as f64; self.n]),
        }
    }

    /// `A x`.
    pub fn forward(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "forward",
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(match &self.backend {
            Backend::Dense { matrix } => {
                let xv = nalgebra::DVector::from_column_slice(x);
                (matrix * xv).data.into()
            }
            Backend::MaskedDft { masks, fft_fwd, .. } => {
                let mut out = Vec::with_capacity(self.m);
                let mut buf = vec![Complex64::default(); self.n];
                for mask in masks {
                    for ((b, &z), &l) in buf.iter_mut().zip(x).zip(mask) {
                        *b = z * l;
                    }
                    fft_fwd.process(&mut buf);
                    out.extend_from_slice(&buf);
                }
                out
            }
            Backend::Fourier2d {
                rows,
                cols,
                padded_rows,
                padded_cols,
                row_fwd,
                col_fwd,
                ..
            } => {
                let mut buf = vec![Complex64::default(); padded_rows * padded_cols];
                for r in 0..*rows {
                    buf[r * padded_cols..r * padded_cols + cols]
                        .copy_from_slice(&x[r * cols..(r + 1) * cols]);
                }
                fft2(&mut buf, *padded_rows, *padded_cols, row_fwd, col_fwd);
                buf
            }
        })
    }

    /// `A^H v`, the exact conjugate transpose of [`Self::forward`].
    pub fn adjoint(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.m {
            return Err(Error::DimensionMismatch {
                context: "adjoint",
                expected: self.m,
                got: v.len(),
            });
        }
        Ok(match &self.backend {
            Backend::Dense { matrix } => {
                let vv = nalgebra::DVector::from_column_slice(v);
                matrix.ad_mul(&vv).data.into()
            }
            Backend::MaskedDft { masks, fft_inv, .. } => {
                // A^H v = sum_k conj(Λ_k) D^H v_k, and D^H is the
                // unnormalized inverse DFT.
                let mut out = vec![Complex64::default(); self.n];
                let mut buf = vec![Complex64::default(); self.n];
                for (k, mask) in masks.iter().enumerate() {
                    buf.copy_from_slice(&v[k * self.n..(k + 1) * self.n]);
                    fft_inv.process(&mut buf);
                    for ((o, &b), &l) in out.iter_mut().zip(&buf).zip(mask) {
                        *o += l.conj() * b;
                    }
                }
                out
            }
            Backend::Fourier2d {
                rows,
                cols,
                padded_rows,
                padded_cols,
                row_inv,
                col_inv,
                ..
            } => {
                let mut buf = v.to_vec();
                fft2(&mut buf, *padded_rows, *padded_cols, row_inv, col_inv);
                let mut out = vec![Complex64::default(); self.n];
                for r in 0..*rows {
                    out[r * cols..(r + 1) * cols]
                        .copy_from_slice(&buf[r * padded_cols..r * padded_cols + cols]);
                }
                out
            }
        })
    }

    /// Elementwise `|A x|`.
    pub fn magnitudes(&self, x: &[Complex64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.iter().map(|z| z.norm()).collect())
    }

    /// Materializes `A` column by column. O(N) forward applications; cached.
    pub fn dense_matrix(&self) -> Arc<DMatrix<Complex64>> {
        self.dense_cache
            .get_or_init(|| match &self.backend {
                Backend::Dense { matrix } => Arc::new(matrix.clone()),
                _ => {
                    let mut a = DMatrix::<Complex64>::zeros(self.m, self.n);
                    let mut basis = vec![Complex64::default(); self.n];
                    for j in 0..self.n {
                        basis[j] = Complex64::new(1.0, 0.0);
                        let col = self.forward(&basis).expect("basis length matches");
                        basis[j] = Complex64::default();
                        for i in 0..self.m {
                            a[(i, j)] = col[i];
                        }
                    }
                    Arc::new(a)
                }
            })
            .clone()
    }
}

/// Unnormalized 2-D FFT over a row-major buffer; the row and column plans
/// fix the direction.
fn fft2(
    buf: &mut [Complex64],
    rows: usize,
    cols: usize,
    row_fft: &Arc<dyn Fft<f64>>,
    col_fft: &Arc<dyn Fft<f64>>,
) {
    for r in 0..rows {
        row_fft.process(&mut buf[r * cols..(r + 1) * cols]);
    }
    let mut t = vec![Complex64::default(); buf.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = buf[r * cols + c];
        }
    }
    for c in 0..cols {
        col_fft.process(&mut t[c * rows..(c + 1) * rows]);
    }
    for r in 0..rows {
        for c in 0..cols {
            buf[r * cols + c] = t[c * rows + r];
        }
    }
}
