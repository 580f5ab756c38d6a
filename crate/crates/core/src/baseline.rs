//! Classical baselines: Gerchberg-Saxton error reduction and Fienup's
//! hybrid-input-output with a support constraint on the oversampled grid.

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linop::MeasurementOperator;
use crate::signal::{phase_factor, ComplexSignal};
use crate::solver::{self, SolverConfig, SolverTrace, Variant};

/// Boolean mask over the padded grid marking where the signal may live.
#[derive(Debug, Clone)]
pub struct SupportMask {
    rows: usize,
    cols: usize,
    inside: Vec<bool>,
}

impl SupportMask {
    pub fn new(rows: usize, cols: usize, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "support mask",
                expected: rows * cols,
                got: inside.len(),
            });
        }
        if !inside.iter().any(|&b| b) {
            return Err(Error::invalid("support", "mask must contain at least one true entry"));
        }
        Ok(Self { rows, cols, inside })
    }

    /// Rectangle of `inner_rows x inner_cols` in the top-left corner, the
    /// padding convention of the 2-D Fourier operator.
    pub fn top_left(
        rows: usize,
        cols: usize,
        inner_rows: usize,
        inner_cols: usize,
    ) -> Result<Self> {
        if inner_rows > rows || inner_cols > cols {
            return Err(Error::invalid("support", "inner grid exceeds the padded grid"));
        }
        let mut inside = vec![false; rows * cols];
        for r in 0..inner_rows {
            for c in 0..inner_cols {
                inside[r * cols + c] = true;
            }
        }
        Self::new(rows, cols, inside)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_inside(&self, idx: usize) -> bool {
        self.inside[idx]
    }

    /// Values at the support positions, in row-major index order.
    pub fn extract(&self, padded: &[Complex64]) -> Vec<Complex64> {
        padded
            .iter()
            .zip(&self.inside)
            .filter_map(|(z, &inside)| inside.then_some(*z))
            .collect()
    }
}

/// Gerchberg-Saxton error reduction: `x <- A^+ (y .* u)`, `u <- phase(A x)`.
/// Identical to the lp solver at `p = 2`, where all the surrogate weights
/// collapse to one.
pub fn gs(
    y: &[f64],
    op: &MeasurementOperator,
    x0: &ComplexSignal,
    iters: usize,
) -> Result<(ComplexSignal, SolverTrace)> {
    let cfg = SolverConfig {
        p: 2.0,
        epsilon: 0.0,
        max_iters: iters,
        rel_tol: 0.0,
        variant: Variant::Irls,
        ..Default::default()
    };
    solver::alt_irls(y, op, x0, &cfg)
}

#[derive(Debug, Clone)]
pub struct HioConfig {
    /// Feedback strength outside the constraint set.
    pub beta: f64,
    /// Keep only the real part inside the support.
    pub real_signal: bool,
    /// Additionally clamp the in-support values to be nonnegative
    /// (implies the real constraint when enforced).
    pub nonnegative: bool,
}

impl Default for HioConfig {
    fn default() -> Self {
        Self {
            beta: 0.9,
            real_signal: true,
            nonnegative: false,
        }
    }
}

/// Hybrid input-output on the padded grid of a 2-D Fourier operator.
///
/// Each iteration replaces the Fourier magnitudes by `|y|`, transforms back,
/// keeps the projected image where the object constraints hold and applies
/// the `beta` feedback elsewhere. The returned estimate lives on the padded
/// grid and is zero outside the support.
pub fn hio<R: Rng + ?Sized>(
    y: &[f64],
    op: &MeasurementOperator,
    support: &SupportMask,
    config: &HioConfig,
    iters: usize,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let (_, _, padded_rows, padded_cols) = op
        .fourier2d_dims()
        .ok_or_else(|| Error::invalid("op", "hio requires a 2-D Fourier operator"))?;
    if support.dims() != (padded_rows, padded_cols) {
        return Err(Error::DimensionMismatch {
            context: "support mask",
            expected: padded_rows * padded_cols,
            got: support.dims().0 * support.dims().1,
        });
    }
    if y.len() != op.measurements() {
        return Err(Error::DimensionMismatch {
            context: "measurements",
            expected: op.measurements(),
            got: y.len(),
        });
    }
    if !(config.beta > 0.0 && config.beta < 1.0) {
        return Err(Error::invalid("beta", "must lie in (0, 1)"));
    }

    let total = padded_rows * padded_cols;
    let mut planner = FftPlanner::new();
    let row_fwd = planner.plan_fft_forward(padded_cols);
    let row_inv = planner.plan_fft_inverse(padded_cols);
    let col_fwd = planner.plan_fft_forward(padded_rows);
    let col_inv = planner.plan_fft_inverse(padded_rows);
    let norm = total as f64;

    let fft2 = |buf: &mut Vec<Complex64>, forward: bool| {
        let (rf, cf) = if forward {
            (&row_fwd, &col_fwd)
        } else {
            (&row_inv, &col_inv)
        };
        for r in 0..padded_rows {
            rf.process(&mut buf[r * padded_cols..(r + 1) * padded_cols]);
        }
        let mut t = vec![Complex64::default(); total];
        for r in 0..padded_rows {
            for c in 0..padded_cols {
                t[c * padded_rows + r] = buf[r * padded_cols + c];
            }
        }
        for c in 0..padded_cols {
            cf.process(&mut t[c * padded_rows..(c + 1) * padded_rows]);
        }
        for r in 0..padded_rows {
            for c in 0..padded_cols {
                buf[r * padded_cols + c] = t[c * padded_rows + r];
            }
        }
    };

    // Start from the measured magnitudes with a random spectrum phase.
    let mut x: Vec<Complex64> = {
        let mut spectrum: Vec<Complex64> = y
            .iter()
            .map(|&yi| {
                let phi: f64 = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
                Complex64::from_polar(yi.abs(), phi)
            })
            .collect();
        fft2(&mut spectrum, false);
        spectrum.iter().map(|z| z / norm).collect()
    };

    for _ in 0..iters {
        let mut z = x.clone();
        fft2(&mut z, true);
        for (zi, &yi) in z.iter_mut().zip(y) {
            *zi = phase_factor(*zi) * yi.abs();
        }
        fft2(&mut z, false);
        // z now holds the magnitude-projected image (normalized inverse).
        for (i, zi) in z.iter().enumerate() {
            let projected = zi / norm;
            let inside = support.is_inside(i);
            let value = if config.real_signal || config.nonnegative {
                Complex64::new(projected.re, 0.0)
            } else {
                projected
            };
            let satisfied = inside && (!config.nonnegative || value.re >= 0.0);
            x[i] = if satisfied {
                value
            } else {
                x[i] - config.beta * projected
            };
        }
    }

    for (i, xi) in x.iter_mut().enumerate() {
        if !support.is_inside(i) {
            *xi = Complex64::default();
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::{make_fourier2d, make_masked_dft};
    use crate::metrics::aligned_error;
    use crate::signal::norm_sq;
    use crate::solver::{alt_irls, spectral_init};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn support_mask_validation_and_extract() {
        assert!(SupportMask::new(2, 2, vec![false; 4]).is_err());
        assert!(SupportMask::new(2, 2, vec![true; 3]).is_err());
        let mask = SupportMask::top_left(4, 4, 2, 2).unwrap();
        let padded: Vec<Complex64> = (0..16).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let inner = mask.extract(&padded);
        let want = [0.0, 1.0, 4.0, 5.0];
        assert_eq!(inner.len(), 4);
        for (z, w) in inner.iter().zip(want) {
            assert_eq!(z.re, w);
        }
    }

    #[test]
    fn gs_iterates_equal_alt_irls_at_p2() {
        let mut r = rng(3);
        let op = make_masked_dft(8, 4, &mut r).unwrap();
        let x_true: Vec<Complex64> = (0..8)
            .map(|_| Complex64::new(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5))
            .collect();
        let y = op.magnitudes(&x_true).unwrap();
        let x0 = spectral_init(&y, &op, &mut r).unwrap();
        let (xg, tg) = gs(&y, &op, &x0, 25).unwrap();
        let cfg = SolverConfig {
            p: 2.0,
            epsilon: 0.0,
            max_iters: 25,
            rel_tol: 0.0,
            ..Default::default()
        };
        let (xi, ti) = alt_irls(&y, &op, &x0, &cfg).unwrap();
        assert_eq!(xg.as_slice(), xi.as_slice());
        assert_eq!(tg.costs, ti.costs);
    }

    #[test]
    fn gs_fixed_point_and_monotone_misfit() {
        let mut r = rng(5);
        for trial in 0..100 {
            let op = make_masked_dft(8, 4, &mut rng(100 + trial)).unwrap();
            let x_true: Vec<Complex64> = (0..8)
                .map(|_| Complex64::new(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5))
                .collect();
            let y = op.magnitudes(&x_true).unwrap();
            let x0 = spectral_init(&y, &op, &mut rng(200 + trial)).unwrap();
            let (_, trace) = gs(&y, &op, &x0, 30).unwrap();
            // At p = 2 and eps = 0 the reported cost is the misfit.
            for pair in trace.costs.windows(2) {
                assert!(pair[1] <= pair[0] * (1.0 + 1e-13), "misfit ascent {pair:?}");
            }
        }

        let op = make_masked_dft(8, 4, &mut r).unwrap();
        let x_true = ComplexSignal::new(
            (0..8)
                .map(|_| Complex64::new(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5))
                .collect(),
        )
        .unwrap();
        let y = op.magnitudes(&x_true).unwrap();
        let (x, _) = gs(&y, &op, &x_true, 10).unwrap();
        assert!(aligned_error(&x, &x_true).unwrap() <= 1e-12 * x_true.norm_sq());
    }

    #[test]
    fn hio_requires_fourier_backend_and_valid_beta() {
        let mut r = rng(7);
        let masked = make_masked_dft(4, 2, &mut r).unwrap();
        let mask = SupportMask::top_left(2, 4, 2, 4).unwrap();
        let cfg = HioConfig::default();
        assert!(hio(&vec![1.0; 8], &masked, &mask, &cfg, 5, &mut r).is_err());

        let op = make_fourier2d(2, 2, 2).unwrap();
        let support = SupportMask::top_left(4, 4, 2, 2).unwrap();
        let bad = HioConfig {
            beta: 1.5,
            ..Default::default()
        };
        assert!(hio(&vec![1.0; 16], &op, &support, &bad, 5, &mut r).is_err());
    }

    #[test]
    fn hio_truth_is_a_fixed_point() {
        let mut r = rng(11);
        let rows = 4;
        let cols = 4;
        let op = make_fourier2d(rows, cols, 2).unwrap();
        let x_true: Vec<Complex64> = (0..rows * cols)
            .map(|_| Complex64::new(r.gen::<f64>() - 0.5, 0.0))
            .collect();
        let y = op.magnitudes(&x_true).unwrap();

        // The update map fixes the truth: magnitude projection of the true
        // padded image is the identity (the spectrum already has magnitudes
        // |y|), inside the support the projected image is kept, and outside
        // it the feedback stays 0 - beta * 0 = 0.
        let spectrum = op.forward(&x_true).unwrap();
        for (s, &yi) in spectrum.iter().zip(&y) {
            assert!((s.norm() - yi).abs() <= 1e-12 * yi.max(1.0));
        }
        // Magnitude replacement with |y| leaves the spectrum unchanged,
        // hence the projected image equals the iterate everywhere: inside
        // support it is kept, outside it is 0 - beta * 0 = 0.
        let projected: Vec<Complex64> = spectrum
            .iter()
            .zip(&y)
            .map(|(z, &yi)| phase_factor(*z) * yi)
            .collect();
        let back = op.adjoint(&projected).unwrap();
        // adjoint = unnormalized inverse cropped; normalize by the grid size
        // to compare against x_true.
        for (b, t) in back.iter().zip(&x_true) {
            assert!((b / 64.0 - t).norm() <= 1e-10 * (1.0 + t.norm()));
        }
    }

    #[test]
    fn hio_output_is_zero_outside_support_and_magnitude_projection_exact() {
        let mut r = rng(13);
        let rows = 4;
        let cols = 4;
        let op = make_fourier2d(rows, cols, 2).unwrap();
        let x_true: Vec<Complex64> = (0..rows * cols)
            .map(|_| Complex64::new(r.gen::<f64>(), 0.0))
            .collect();
        let y = op.magnitudes(&x_true).unwrap();
        let support = SupportMask::top_left(8, 8, rows, cols).unwrap();
        let cfg = HioConfig::default();
        let out = hio(&y, &op, &support, &cfg, 50, &mut r).unwrap();
        assert!(out.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        for (i, z) in out.iter().enumerate() {
            if !support.is_inside(i) {
                assert_eq!(*z, Complex64::default());
            }
        }

        // The magnitude projection reproduces |y| exactly.
        let mut spectrum: Vec<Complex64> = (0..op.measurements())
            .map(|_| Complex64::new(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5))
            .collect();
        for (s, &yi) in spectrum.iter_mut().zip(&y) {
            *s = phase_factor(*s) * yi;
        }
        for (s, &yi) in spectrum.iter().zip(&y) {
            assert!((s.norm() - yi).abs() <= f64::EPSILON * yi.max(1.0) * 4.0);
        }
    }

    /// Noiseless recovery rate on small oversampled grids.
    #[test]
    fn hio_recovers_most_noiseless_instances() {
        let rows = 16;
        let cols = 16;
        let op = make_fourier2d(rows, cols, 2).unwrap();
        let support = SupportMask::top_left(32, 32, rows, cols).unwrap();
        let cfg = HioConfig::default();
        let mut hits = 0;
        let trials = 100;
        for seed in 0..trials {
            let mut r = rng(3000 + seed);
            let x_true: Vec<Complex64> = (0..rows * cols)
                .map(|_| Complex64::new(r.gen::<f64>() - 0.5, 0.0))
                .collect();
            let y = op.magnitudes(&x_true).unwrap();
            let out = hio(&y, &op, &support, &cfg, 5000, &mut r).unwrap();
            let inner = support.extract(&out);
            let y_hat = op.magnitudes(&inner).unwrap();
            let misfit: f64 = y
                .iter()
                .zip(&y_hat)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let rel = misfit / norm_sq(&op.forward(&x_true).unwrap()).sqrt();
            if rel <= 0.05 {
                hits += 1;
            }
        }
        assert!(hits >= 70, "only {hits}/{trials} HIO runs reached 5% misfit");
    }
}
