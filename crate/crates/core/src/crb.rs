//! Fisher information and Cramer-Rao bounds for the model `y = |A x| + n`.
//!
//! Under Laplacian noise of variance `sigma^2` the Fisher information of the
//! stacked real parameters `beta = (Re x, Im x)` is
//! `F = (2/sigma^2) G diag(|A x|^-2) G^T` with
//! `G = [Re{A^H diag(A x)}; Im{A^H diag(A x)}]`. For complex signals `F` is
//! singular with rank `2N - 1`; the only null direction is the global-phase
//! rotation `(-Im x, Re x)`, so bounds are reported through the trace of the
//! pseudo-inverse. Gaussian noise of the same variance carries exactly half
//! of that information, so its bound is exactly twice the Laplacian one.
//!
//! The bounds are undefined wherever some `a_m^H x = 0` (the magnitude map
//! is not differentiable there); constructors reject such instances.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linop::MeasurementOperator;

/// Coordinates in which a Fisher information matrix is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    /// `(Re x, Im x)`, a `2N x 2N` matrix.
    CartesianComplex,
    /// Real signal, `N x N`.
    CartesianReal,
    /// `(|x|, angle x)`, a `2N x 2N` matrix.
    AmplitudePhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Laplacian,
    Gaussian,
}

/// Measurements with `|a_m^H x|` at or below this are rejected.
pub const DEGENERATE_MEASUREMENT_THRESHOLD: f64 = 1e-12;

/// Relative eigenvalue cutoff of the pseudo-inverse.
pub const PSEUDO_INVERSE_REL_THRESHOLD: f64 = 1e-10;

/// A real symmetric positive semidefinite Fisher information matrix.
#[derive(Debug, Clone)]
pub struct FimMatrix {
    pub entries: DMatrix<f64>,
    pub parameterization: Parameterization,
    pub noise_variance: f64,
}

impl FimMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Expected numerical rank under the full-column-rank assumptions.
    pub fn expected_rank(&self) -> usize {
        match self.parameterization {
            Parameterization::CartesianReal => self.dim(),
            Parameterization::CartesianComplex | Parameterization::AmplitudePhase => {
                self.dim() - 1
            }
        }
    }
}

/// Bound report: total bound (trace of the inverse or pseudo-inverse), its
/// per-parameter split, and the numerical rank used.
#[derive(Debug, Clone)]
pub struct CrbReport {
    pub bound_total: f64,
    pub per_parameter: Vec<f64>,
    pub rank: usize,
    pub parameterization: Parameterization,
    pub noise: NoiseKind,
}

impl CrbReport {
    /// Sum of the amplitude-block diagonal, defined for the amplitude/phase
    /// parameterization.
    pub fn amplitude_bound(&self) -> Option<f64> {
        match self.parameterization {
            Parameterization::AmplitudePhase => {
                let n = self.per_parameter.len() / 2;
                Some(self.per_parameter[..n].iter().sum())
            }
            _ => None,
        }
    }

    /// Sum of the phase-block diagonal.
    pub fn phase_bound(&self) -> Option<f64> {
        match self.parameterization {
            Parameterization::AmplitudePhase => {
                let n = self.per_parameter.len() / 2;
                Some(self.per_parameter[n..].iter().sum())
            }
            _ => None,
        }
    }
}

fn validate_sigma(sigma_sq: f64) -> Result<()> {
    if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
        return Err(Error::invalid("sigma_sq", "noise variance must be positive and finite"));
    }
    Ok(())
}

/// `B = A^H diag(A x)` as a dense `N x M` complex matrix, guarding against
/// degenerate measurements. Returns `(B, |A x|)`.
fn sensitivity_matrix(
    op: &MeasurementOperator,
    x: &[Complex64],
) -> Result<(DMatrix<Complex64>, Vec<f64>)> {
    let ax = op.forward(x)?;
    let mags: Vec<f64> = ax.iter().map(|z| z.norm()).collect();
    for (i, &mag) in mags.iter().enumerate() {
        if mag <= DEGENERATE_MEASUREMENT_THRESHOLD {
            return Err(Error::DegenerateMeasurement {
                index: i,
                magnitude: mag,
                threshold: DEGENERATE_MEASUREMENT_THRESHOLD,
            });
        }
    }
    let a = op.dense_matrix();
    let mut b = a.adjoint();
    for (m, axm) in ax.iter().enumerate() {
        for i in 0..op.signal_len() {
            b[(i, m)] *= axm;
        }
    }
    Ok((b, mags))
}

/// Assembles `(2/sigma^2) G diag(|Ax|^-2) G^T` from the stacked real matrix
/// `G` and symmetrizes the floating-point result.
fn assemble_fim(g: &DMatrix<f64>, mags: &[f64], sigma_sq: f64) -> DMatrix<f64> {
    let mut scaled = g.clone();
    let factor = (2.0 / sigma_sq).sqrt();
    for (m, &mag) in mags.iter().enumerate() {
        let s = factor / mag;
        for r in 0..scaled.nrows() {
            scaled[(r, m)] *= s;
        }
    }
    let mut f = &scaled * scaled.transpose();
    // Kill round-off asymmetry.
    for r in 0..f.nrows() {
        for c in 0..r {
            let sym = 0.5 * (f[(r, c)] + f[(c, r)]);
            f[(r, c)] = sym;
            f[(c, r)] = sym;
        }
    }
    f
}

/// Fisher information of a complex signal under Laplacian noise.
pub fn fim_laplacian_complex(
    op: &MeasurementOperator,
    x: &[Complex64],
    sigma_sq: f64,
) -> Result<FimMatrix> {
    validate_sigma(sigma_sq)?;
    let (b, mags) = sensitivity_matrix(op, x)?;
    let n = op.signal_len();
    let m = op.measurements();
    let mut g = DMatrix::<f64>::zeros(2 * n, m);
    for i in 0..n {
        for j in 0..m {
            g[(i, j)] = b[(i, j)].re;
            g[(n + i, j)] = b[(i, j)].im;
        }
    }
    Ok(FimMatrix {
        entries: assemble_fim(&g, &mags, sigma_sq),
        parameterization: Parameterization::CartesianComplex,
        noise_variance: sigma_sq,
    })
}

/// Fisher information of a real signal under Laplacian noise; full rank for
/// a nontrivial operator.
pub fn fim_laplacian_real(
    op: &MeasurementOperator,
    x: &[f64],
    sigma_sq: f64,
) -> Result<FimMatrix> {
    validate_sigma(sigma_sq)?;
    let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let (b, mags) = sensitivity_matrix(op, &xc)?;
    let n = op.signal_len();
    let m = op.measurements();
    let mut g = DMatrix::<f64>::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            g[(i, j)] = b[(i, j)].re;
        }
    }
    Ok(FimMatrix {
        entries: assemble_fim(&g, &mags, sigma_sq),
        parameterization: Parameterization::CartesianReal,
        noise_variance: sigma_sq,
    })
}

/// Fisher information in `(|x|, angle x)` coordinates under Laplacian noise;
/// rank deficit one (the global phase).
pub fn fim_amplitude_phase(
    op: &MeasurementOperator,
    x: &[Complex64],
    sigma_sq: f64,
) -> Result<FimMatrix> {
    validate_sigma(sigma_sq)?;
    for (i, z) in x.iter().enumerate() {
        if z.norm() == 0.0 {
            return Err(Error::ZeroSignalEntry { index: i });
        }
    }
    let (b, mags) = sensitivity_matrix(op, x)?;
    let n = op.signal_len();
    let m = op.measurements();
    let mut g = DMatrix::<f64>::zeros(2 * n, m);
    for i in 0..n {
        let amp = x[i].norm();
        for j in 0..m {
            let scaled = x[i].conj() * b[(i, j)];
            g[(i, j)] = scaled.re / amp;
            g[(n + i, j)] = scaled.im;
        }
    }
    Ok(FimMatrix {
        entries: assemble_fim(&g, &mags, sigma_sq),
        parameterization: Parameterization::AmplitudePhase,
        noise_variance: sigma_sq,
    })
}

/// Sorted eigen-decomposition (descending eigenvalues) of a symmetric FIM.
fn sorted_eigen(fim: &FimMatrix) -> (Vec<f64>, DMatrix<f64>) {
    let eig = fim.entries.clone().symmetric_eigen();
    let dim = fim.dim();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<f64>::zeros(dim, dim);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..dim {
            vectors[(r, new_col)] = eig.eigenvectors[(r, old_col)];
        }
    }
    (values, vectors)
}

/// Laplacian bound from a FIM: trace of the inverse for the real
/// parameterization, trace of the pseudo-inverse otherwise. The
/// pseudo-inverse must drop exactly the expected one-dimensional null space;
/// any other numerical rank is reported as an error instead of silently
/// truncated.
pub fn crb_laplacian(fim: &FimMatrix) -> Result<CrbReport> {
    let dim = fim.dim();
    let (values, vectors) = sorted_eigen(fim);
    let lambda_max = values[0];
    if !(lambda_max > 0.0) {
        return Err(Error::UnexpectedFimRank {
            found: 0,
            expected: fim.expected_rank(),
        });
    }
    let threshold = PSEUDO_INVERSE_REL_THRESHOLD * lambda_max;
    let kept = values.iter().filter(|&&v| v > threshold).count();
    if kept != fim.expected_rank() {
        return Err(Error::UnexpectedFimRank {
            found: kept,
            expected: fim.expected_rank(),
        });
    }
    let mut per_parameter = vec![0.0; dim];
    for k in 0..kept {
        let inv = 1.0 / values[k];
        for i in 0..dim {
            per_parameter[i] += vectors[(i, k)] * vectors[(i, k)] * inv;
        }
    }
    Ok(CrbReport {
        bound_total: per_parameter.iter().sum(),
        per_parameter,
        rank: kept,
        parameterization: fim.parameterization,
        noise: NoiseKind::Laplacian,
    })
}

/// Gaussian bound: exactly twice the Laplacian bound computed from the
/// Laplacian FIM of the same instance.
pub fn crb_gaussian(fim_laplacian: &FimMatrix) -> Result<CrbReport> {
    let base = crb_laplacian(fim_laplacian)?;
    Ok(CrbReport {
        bound_total: 2.0 * base.bound_total,
        per_parameter: base.per_parameter.iter().map(|v| 2.0 * v).collect(),
        rank: base.rank,
        parameterization: base.parameterization,
        noise: NoiseKind::Gaussian,
    })
}

/// Numerical rank (eigenvalues above `1e-10 * lambda_max`) and an
/// orthonormal basis of the numerical null space.
pub fn rank_diagnostics(fim: &FimMatrix) -> (usize, Vec<DVector<f64>>) {
    let dim = fim.dim();
    let (values, vectors) = sorted_eigen(fim);
    let lambda_max = values[0].max(0.0);
    if lambda_max == 0.0 {
        let basis = (0..dim).map(|i| vectors.column(i).into_owned()).collect();
        return (0, basis);
    }
    let threshold = PSEUDO_INVERSE_REL_THRESHOLD * lambda_max;
    let rank = values.iter().filter(|&&v| v > threshold).count();
    let basis = (rank..dim).map(|i| vectors.column(i).into_owned()).collect();
    (rank, basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::{make_dense, make_masked_dft};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_complex_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect()
    }

    fn random_dense_op(rng: &mut ChaCha8Rng, m: usize, n: usize) -> MeasurementOperator {
        make_dense(DMatrix::from_fn(m, n, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        }))
        .unwrap()
    }

    /// Brute-force FIM assembly from the per-measurement magnitude
    /// derivatives d|a_i^H x| / d beta.
    fn brute_force_fim_complex(
        op: &MeasurementOperator,
        x: &[Complex64],
        sigma_sq: f64,
    ) -> DMatrix<f64> {
        let n = op.signal_len();
        let m = op.measurements();
        let a = op.dense_matrix();
        let ax = op.forward(x).unwrap();
        let mut derivs = DMatrix::<f64>::zeros(2 * n, m);
        for i in 0..m {
            // a_i a_i^H x with A's row i being a_i^H.
            let aihx = ax[i];
            for k in 0..n {
                let a_ik = a[(i, k)].conj(); // (a_i)_k
                let v = a_ik * aihx;
                derivs[(k, i)] = v.re / aihx.norm();
                derivs[(n + k, i)] = v.im / aihx.norm();
            }
        }
        let mut f = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for r in 0..2 * n {
            for c in 0..2 * n {
                let mut acc = 0.0;
                for i in 0..m {
                    acc += derivs[(r, i)] * derivs[(c, i)];
                }
                f[(r, c)] = 2.0 / sigma_sq * acc;
            }
        }
        f
    }

    #[test]
    fn scalar_complex_instance_by_hand() {
        let op = make_dense(DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0))).unwrap();
        let x = [Complex64::new(1.0, 0.0)];
        let sigma_sq = 0.5;
        let fim = fim_laplacian_complex(&op, &x, sigma_sq).unwrap();
        // G = [1; 0], F = (2/sigma^2) [[1,0],[0,0]].
        assert!((fim.entries[(0, 0)] - 4.0).abs() < 1e-12);
        assert!(fim.entries[(0, 1)].abs() < 1e-12);
        assert!(fim.entries[(1, 1)].abs() < 1e-12);
    }

    #[test]
    fn scalar_real_instance_by_hand() {
        let op = make_dense(DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0))).unwrap();
        let sigma_sq = 2.0;
        let fim = fim_laplacian_real(&op, &[2.0], sigma_sq).unwrap();
        assert_eq!(fim.dim(), 1);
        assert!((fim.entries[(0, 0)] - 2.0 / sigma_sq).abs() < 1e-12);
        let report = crb_laplacian(&fim).unwrap();
        assert!((report.bound_total - sigma_sq / 2.0).abs() < 1e-12);
    }

    #[test]
    fn complex_fim_annihilates_phase_direction() {
        let mut r = rng(7);
        for _ in 0..20 {
            let op = random_dense_op(&mut r, 12, 4);
            let x = random_complex_vec(&mut r, 4);
            let fim = fim_laplacian_complex(&op, &x, 1.0).unwrap();
            let mut v = DVector::<f64>::zeros(8);
            for i in 0..4 {
                v[i] = -x[i].im;
                v[4 + i] = x[i].re;
            }
            let fv = &fim.entries * &v;
            let f_norm = fim.entries.norm();
            assert!(fv.norm() <= 1e-10 * f_norm, "null vector not annihilated");
        }
    }

    #[test]
    fn fim_scales_inversely_with_noise_variance() {
        let mut r = rng(11);
        let op = random_dense_op(&mut r, 8, 3);
        let x = random_complex_vec(&mut r, 3);
        let f1 = fim_laplacian_complex(&op, &x, 1.0).unwrap();
        let f4 = fim_laplacian_complex(&op, &x, 4.0).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert!((f4.entries[(i, j)] - f1.entries[(i, j)] / 4.0).abs() < 1e-12 * f1.entries.norm());
            }
        }
    }

    #[test]
    fn degenerate_measurement_is_reported_with_index() {
        // Second row orthogonal to x makes a_2^H x = 0.
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        );
        let op = make_dense(a).unwrap();
        let x = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        match fim_laplacian_complex(&op, &x, 1.0) {
            Err(Error::DegenerateMeasurement { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected degenerate-measurement error, got {other:?}"),
        }
    }

    #[test]
    fn real_fim_full_rank_and_matches_top_left_block() {
        let mut r = rng(13);
        // Real operator and real signal: Im parts vanish.
        let a_re = DMatrix::from_fn(8, 3, |_, _| Complex64::new(r.gen::<f64>() - 0.5, 0.0));
        let op = make_dense(a_re).unwrap();
        let x: Vec<f64> = (0..3).map(|_| r.gen::<f64>() + 0.5).collect();
        let fim_r = fim_laplacian_real(&op, &x, 1.0).unwrap();
        let (rank, _) = rank_diagnostics(&fim_r);
        assert_eq!(rank, 3);

        let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let fim_c = fim_laplacian_complex(&op, &xc, 1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((fim_r.entries[(i, j)] - fim_c.entries[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn real_fim_full_rank_on_random_instances() {
        let mut r = rng(17);
        for _ in 0..10 {
            let op = random_dense_op(&mut r, 32, 4);
            let x: Vec<f64> = (0..4).map(|_| r.gen::<f64>() + 0.2).collect();
            let fim = fim_laplacian_real(&op, &x, 1.0).unwrap();
            // Independent rank check through the SVD.
            let svd = fim.entries.clone().svd(false, false);
            let smax = svd.singular_values.max();
            let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count();
            assert_eq!(rank, 4);
        }
    }

    #[test]
    fn pseudo_inverse_of_diagonal_fim() {
        let fim = FimMatrix {
            entries: DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 0.0])),
            parameterization: Parameterization::CartesianComplex,
            noise_variance: 1.0,
        };
        // dim 2 means N = 1: expected rank 2N-1 = 1.
        let report = crb_laplacian(&fim).unwrap();
        assert!((report.bound_total - 0.5).abs() < 1e-15);
        assert_eq!(report.rank, 1);
        assert!((report.per_parameter[0] - 0.5).abs() < 1e-15);
        assert_eq!(report.per_parameter[1], 0.0);
    }

    #[test]
    fn real_bound_matches_dense_solve_oracle() {
        let mut r = rng(19);
        let op = random_dense_op(&mut r, 16, 4);
        let x: Vec<f64> = (0..4).map(|_| r.gen::<f64>() + 0.3).collect();
        let fim = fim_laplacian_real(&op, &x, 1.3).unwrap();
        let report = crb_laplacian(&fim).unwrap();
        // Oracle: solve F z_i = e_i and sum the diagonal entries.
        let lu = fim.entries.clone().lu();
        let mut trace_inv = 0.0;
        for i in 0..4 {
            let mut e = DVector::<f64>::zeros(4);
            e[i] = 1.0;
            let z = lu.solve(&e).unwrap();
            trace_inv += z[i];
        }
        assert!((report.bound_total - trace_inv).abs() < 1e-10 * trace_inv.abs());
    }

    #[test]
    fn duplicating_measurements_halves_the_bound() {
        let mut r = rng(23);
        let a = DMatrix::from_fn(10, 3, |_, _| {
            Complex64::new(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5)
        });
        let mut doubled = DMatrix::<Complex64>::zeros(20, 3);
        for i in 0..10 {
            for j in 0..3 {
                doubled[(i, j)] = a[(i, j)];
                doubled[(10 + i, j)] = a[(i, j)];
            }
        }
        let x = random_complex_vec(&mut r, 3);
        let op1 = make_dense(a).unwrap();
        let op2 = make_dense(doubled).unwrap();
        let b1 = crb_laplacian(&fim_laplacian_complex(&op1, &x, 1.0).unwrap()).unwrap();
        let b2 = crb_laplacian(&fim_laplacian_complex(&op2, &x, 1.0).unwrap()).unwrap();
        assert!((b2.bound_total - 0.5 * b1.bound_total).abs() < 1e-9 * b1.bound_total);
    }

    #[test]
    fn appending_independent_measurements_decreases_the_bound() {
        let mut r = rng(29);
        let big = DMatrix::from_fn(24, 3, |_, _| {
            Complex64::new(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5)
        });
        let small = big.rows(0, 12).into_owned();
        let x = random_complex_vec(&mut r, 3);
        let op_small = make_dense(small).unwrap();
        let op_big = make_dense(big).unwrap();
        let b_small = crb_laplacian(&fim_laplacian_complex(&op_small, &x, 1.0).unwrap()).unwrap();
        let b_big = crb_laplacian(&fim_laplacian_complex(&op_big, &x, 1.0).unwrap()).unwrap();
        assert!(b_big.bound_total <= b_small.bound_total);
    }

    #[test]
    fn gaussian_bound_is_exactly_twice_laplacian() {
        let mut r = rng(31);
        let op = random_dense_op(&mut r, 10, 3);
        let x = random_complex_vec(&mut r, 3);
        let fim = fim_laplacian_complex(&op, &x, 0.7).unwrap();
        let lap = crb_laplacian(&fim).unwrap();
        let gau = crb_gaussian(&fim).unwrap();
        assert_eq!(gau.bound_total, 2.0 * lap.bound_total);
        for (g, l) in gau.per_parameter.iter().zip(&lap.per_parameter) {
            assert_eq!(*g, 2.0 * l);
        }
        assert_eq!(gau.noise, NoiseKind::Gaussian);
    }

    #[test]
    fn gaussian_bound_matches_direct_gaussian_fim_assembly() {
        let mut r = rng(37);
        let op = random_dense_op(&mut r, 12, 3);
        let x = random_complex_vec(&mut r, 3);
        let sigma_sq = 0.9;
        let fim_l = fim_laplacian_complex(&op, &x, sigma_sq).unwrap();
        let gau = crb_gaussian(&fim_l).unwrap();

        // Gaussian FIM carries 1/sigma^2 instead of 2/sigma^2: half of the
        // Laplacian matrix; pseudo-invert it independently.
        let fim_g = FimMatrix {
            entries: fim_l.entries.clone() * 0.5,
            parameterization: Parameterization::CartesianComplex,
            noise_variance: sigma_sq,
        };
        let direct = crb_laplacian(&fim_g).unwrap();
        assert!((gau.bound_total - direct.bound_total).abs() < 1e-9 * direct.bound_total);
    }

    #[test]
    fn fim_matches_brute_force_on_small_instances() {
        let mut r = rng(41);
        for (n, m) in [(1usize, 3usize), (2, 6), (3, 8)] {
            let op = random_dense_op(&mut r, m, n);
            let x = random_complex_vec(&mut r, n);
            let sigma_sq = 0.8;
            let fim = fim_laplacian_complex(&op, &x, sigma_sq).unwrap();
            let brute = brute_force_fim_complex(&op, &x, sigma_sq);
            let scale = brute.norm().max(1.0);
            for i in 0..2 * n {
                for j in 0..2 * n {
                    assert!(
                        (fim.entries[(i, j)] - brute[(i, j)]).abs() <= 1e-10 * scale,
                        "entry ({i},{j}) mismatch"
                    );
                }
            }
        }
    }

    #[test]
    fn magnitude_derivatives_match_finite_differences() {
        let mut r = rng(43);
        let op = random_dense_op(&mut r, 6, 2);
        let x = random_complex_vec(&mut r, 2);
        let a = op.dense_matrix();
        let h = 1e-6;
        for i in 0..6 {
            let mag = |xv: &[Complex64]| -> f64 {
                let mut acc = Complex64::default();
                for k in 0..2 {
                    acc += a[(i, k)] * xv[k];
                }
                acc.norm()
            };
            for k in 0..2 {
                for im_part in [false, true] {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    if im_part {
                        xp[k].im += h;
                        xm[k].im -= h;
                    } else {
                        xp[k].re += h;
                        xm[k].re -= h;
                    }
                    let fd = (mag(&xp) - mag(&xm)) / (2.0 * h);
                    let aihx = op.forward(&x).unwrap()[i];
                    let v = a[(i, k)].conj() * aihx / aihx.norm();
                    let analytic = if im_part { v.im } else { v.re };
                    assert!(
                        (fd - analytic).abs() <= 1e-4 * (1.0 + analytic.abs()),
                        "derivative mismatch fd={fd} analytic={analytic}"
                    );
                }
            }
        }
    }

    #[test]
    fn rank_diagnostics_complex_and_real() {
        let mut r = rng(47);
        let op = random_dense_op(&mut r, 16, 4);
        let x = random_complex_vec(&mut r, 4);
        let fim = fim_laplacian_complex(&op, &x, 1.0).unwrap();
        let (rank, basis) = rank_diagnostics(&fim);
        assert_eq!(rank, 7);
        assert_eq!(basis.len(), 1);
        // The null vector matches (-Im x, Re x) up to sign and scale.
        let mut v = DVector::<f64>::zeros(8);
        for i in 0..4 {
            v[i] = -x[i].im;
            v[4 + i] = x[i].re;
        }
        let cos = basis[0].dot(&v).abs() / (basis[0].norm() * v.norm());
        assert!(cos >= 1.0 - 1e-8, "cosine {cos}");

        let xr: Vec<f64> = (0..4).map(|_| r.gen::<f64>() + 0.1).collect();
        let fim_r = fim_laplacian_real(&op, &xr, 1.0).unwrap();
        let (rank_r, basis_r) = rank_diagnostics(&fim_r);
        assert_eq!(rank_r, 4);
        assert!(basis_r.is_empty());
    }

    #[test]
    fn crb_rejects_unexpected_rank() {
        // A 1-measurement complex instance with N = 2 has rank <= 2 < 2N-1.
        let a = DMatrix::from_row_slice(
            1,
            2,
            &[Complex64::new(1.0, 0.0), Complex64::new(0.5, -0.25)],
        );
        let op = make_dense(a).unwrap();
        let x = [Complex64::new(1.0, 0.2), Complex64::new(-0.3, 0.8)];
        let fim = fim_laplacian_complex(&op, &x, 1.0).unwrap();
        match crb_laplacian(&fim) {
            Err(Error::UnexpectedFimRank { found, expected }) => {
                assert!(found < expected);
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn amplitude_phase_structure() {
        let mut r = rng(53);
        let op = random_dense_op(&mut r, 16, 4);
        let x = random_complex_vec(&mut r, 4);
        let fim = fim_amplitude_phase(&op, &x, 1.0).unwrap();
        let (rank, _) = rank_diagnostics(&fim);
        assert_eq!(rank, 7, "rank deficit must be one");

        // Constant phase shift lies in the null space: F (0_N; 1_N) ~ 0.
        let mut v = DVector::<f64>::zeros(8);
        for i in 4..8 {
            v[i] = 1.0;
        }
        let fv = &fim.entries * &v;
        assert!(fv.norm() <= 1e-10 * fim.entries.norm());

        let report = crb_laplacian(&fim).unwrap();
        let amp = report.amplitude_bound().unwrap();
        let phase = report.phase_bound().unwrap();
        assert!((amp + phase - report.bound_total).abs() < 1e-12 * report.bound_total);
        assert!(amp > 0.0 && phase > 0.0);

        // Zero entry in the signal is rejected.
        let mut x0 = x.clone();
        x0[1] = Complex64::default();
        assert!(matches!(
            fim_amplitude_phase(&op, &x0, 1.0),
            Err(Error::ZeroSignalEntry { index: 1 })
        ));
    }

    #[test]
    fn amplitude_phase_decouples_for_real_instances() {
        let mut r = rng(59);
        // Real positive signal, real operator: amplitude and phase blocks
        // decouple. Oracle on N = 2 by dense assembly.
        let a = DMatrix::from_fn(6, 2, |_, _| Complex64::new(r.gen::<f64>() - 0.5, 0.0));
        let op = make_dense(a).unwrap();
        let x = [Complex64::new(0.8, 0.0), Complex64::new(1.4, 0.0)];
        let fim = fim_amplitude_phase(&op, &x, 1.0).unwrap();
        for i in 0..2 {
            for j in 2..4 {
                assert!(
                    fim.entries[(i, j)].abs() <= 1e-12 * fim.entries.norm(),
                    "cross block not zero"
                );
            }
        }
    }

    #[test]
    fn pseudo_inverse_bound_invariant_to_global_phase() {
        let mut r = rng(61);
        let op = random_dense_op(&mut r, 12, 3);
        let x = random_complex_vec(&mut r, 3);
        let rot = Complex64::from_polar(1.0, 1.1);
        let xr: Vec<Complex64> = x.iter().map(|z| z * rot).collect();
        let b1 = crb_laplacian(&fim_laplacian_complex(&op, &x, 1.0).unwrap()).unwrap();
        let b2 = crb_laplacian(&fim_laplacian_complex(&op, &xr, 1.0).unwrap()).unwrap();
        assert!(
            (b1.bound_total - b2.bound_total).abs() <= 1e-8 * b1.bound_total,
            "{} vs {}",
            b1.bound_total,
            b2.bound_total
        );
    }

    #[test]
    fn masked_dft_instance_rank() {
        let mut r = rng(67);
        let op = make_masked_dft(4, 2, &mut r).unwrap();
        let x = random_complex_vec(&mut r, 4);
        let fim = fim_laplacian_complex(&op, &x, 1.0).unwrap();
        let (rank, _) = rank_diagnostics(&fim);
        assert_eq!(rank, 7);
    }
}
