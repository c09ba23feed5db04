//! Dense symmetric eigen-machinery.
//!
//! A [`SymmetricSpectrum`] is the eigen view of a positive semidefinite matrix
//! that the barrier walks carry from step to step. The walks only ever touch
//! the matrix through its spectrum: rank-one updates, Stieltjes potentials and
//! the Sherman–Morrison trace identity are all evaluated in the eigenbasis.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, BarrierSide, Error, Result};
use crate::secular;

/// Symmetry tolerance (relative to the largest entry) accepted by [`eigendecompose`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Components with `|<x, x_i>| <= DEFLATION_RATIO * |x|` are treated as zero by
/// the incremental update.
pub const DEFLATION_RATIO: f64 = 1e-12;

/// Sherman–Morrison denominators closer than this to zero are rejected.
pub const SINGULAR_DENOMINATOR: f64 = 1e-12;

/// Eigenvalues (non-increasing) and an orthonormal eigenbasis of an n x n
/// symmetric matrix. Column `i` of the eigenvector matrix pairs with
/// eigenvalue `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSpectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SymmetricSpectrum {
    /// Spectrum of the n x n zero matrix with the canonical basis.
    pub fn zeros(n: usize) -> Self {
        Self {
            eigenvalues: vec![0.0; n],
            eigenvectors: DMatrix::identity(n, n),
        }
    }

    /// Spectrum of `diag(values)`.
    pub fn from_diagonal(values: &[f64]) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: i });
        }
        let n = values.len();
        Ok(Self::sorted(values.to_vec(), DMatrix::identity(n, n)))
    }

    /// Builds a spectrum from eigenpairs, sorting them into non-increasing
    /// order. The basis is checked for orthonormality to 1e-10.
    pub fn from_parts(eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>) -> Result<Self> {
        let n = eigenvalues.len();
        if eigenvectors.nrows() != n || eigenvectors.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: eigenvectors.ncols(),
            });
        }
        let spectrum = Self::sorted(eigenvalues, eigenvectors);
        let defect = spectrum.orthogonality_defect();
        if defect > 1e-10 {
            return Err(invalid(format!(
                "eigenvector basis is not orthonormal (Gram defect {defect:e})"
            )));
        }
        Ok(spectrum)
    }

    /// Stable sort into non-increasing order; ties keep their input order.
    pub(crate) fn sorted(eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>) -> Self {
        let n = eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));
        if order.iter().enumerate().all(|(i, &j)| i == j) {
            return Self {
                eigenvalues,
                eigenvectors,
            };
        }
        let values = order.iter().map(|&j| eigenvalues[j]).collect();
        let vectors = eigenvectors.select_columns(order.iter());
        Self {
            eigenvalues: values,
            eigenvectors: vectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues λ₁ ≥ … ≥ λₙ.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Σ λᵢ xᵢ xᵢᵀ.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (mut col, &l) in scaled.column_iter_mut().zip(&self.eigenvalues) {
            col *= l;
        }
        let mut out = &scaled * self.eigenvectors.transpose();
        symmetrize(&mut out);
        out
    }

    /// Largest absolute entry of VᵀV − I.
    pub fn orthogonality_defect(&self) -> f64 {
        let gram = self.eigenvectors.tr_mul(&self.eigenvectors);
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Caches the projections of `x` on this eigenbasis.
    pub fn project(&self, x: &[f64]) -> Result<RankOneVector> {
        RankOneVector::new(self, x)
    }
}

/// A vector together with its coordinates `<x, x_i>` in a spectrum's eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneVector {
    entries: DVector<f64>,
    projections: Vec<f64>,
    norm_sq: f64,
}

impl RankOneVector {
    pub fn new(spectrum: &SymmetricSpectrum, x: &[f64]) -> Result<Self> {
        if x.len() != spectrum.dim() {
            return Err(Error::DimensionMismatch {
                expected: spectrum.dim(),
                got: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        let entries = DVector::from_column_slice(x);
        let projections = spectrum.eigenvectors.tr_mul(&entries);
        let norm_sq = entries.norm_squared();
        Ok(Self {
            entries,
            projections: projections.as_slice().to_vec(),
            norm_sq,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &DVector<f64> {
        &self.entries
    }

    /// `<x, x_i>` in the order of the spectrum's eigenvalues.
    pub fn projections(&self) -> &[f64] {
        &self.projections
    }

    /// ‖x‖².
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn is_zero(&self) -> bool {
        self.norm_sq == 0.0
    }

    /// `<x, x_i>²`.
    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.projections.iter().map(|p| p * p)
    }
}

/// How [`rank_one_update`] computes the spectrum of A + xxᵀ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateMode {
    /// Rebuild the matrix and re-decompose it from scratch.
    Full,
    /// Solve the secular equation on the projected spectrum.
    #[default]
    Incremental,
}

/// Eigendecomposition of a real symmetric matrix.
pub fn eigendecompose(matrix: &DMatrix<f64>) -> Result<SymmetricSpectrum> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let mut scale = 1.0f64;
    for j in 0..cols {
        for i in 0..rows {
            let v = matrix[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            scale = scale.max(v.abs());
        }
    }
    let mut asym = 0.0f64;
    for j in 0..cols {
        for i in (j + 1)..rows {
            asym = asym.max((matrix[(i, j)] - matrix[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let mut sym = matrix.clone();
    symmetrize(&mut sym);
    let eig = sym.symmetric_eigen();
    Ok(SymmetricSpectrum::sorted(
        eig.eigenvalues.as_slice().to_vec(),
        eig.eigenvectors,
    ))
}

/// Spectrum of A + xxᵀ where `spectrum` describes A and `x` carries its
/// projections on that spectrum's eigenbasis.
pub fn rank_one_update(
    spectrum: &SymmetricSpectrum,
    x: &RankOneVector,
    mode: UpdateMode,
) -> Result<SymmetricSpectrum> {
    if x.dim() != spectrum.dim() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.dim(),
            got: x.dim(),
        });
    }
    match mode {
        UpdateMode::Full => {
            let mut a = spectrum.reconstruct();
            a.ger(1.0, x.entries(), x.entries(), 1.0);
            symmetrize(&mut a);
            eigendecompose(&a)
        }
        UpdateMode::Incremental => Ok(secular::rank_one_incremental(spectrum, x)),
    }
}

/// m̲(u) = Σ 1/(λᵢ − u) for u strictly below every eigenvalue. Unchecked.
pub(crate) fn lower_potential(eigenvalues: &[f64], u: f64) -> f64 {
    eigenvalues.iter().map(|&l| 1.0 / (l - u)).sum()
}

/// m̄(u) = Σ 1/(u − λᵢ) for u strictly above every eigenvalue. Unchecked.
pub(crate) fn upper_potential(eigenvalues: &[f64], u: f64) -> f64 {
    eigenvalues.iter().map(|&l| 1.0 / (u - l)).sum()
}

pub(crate) fn check_below(spectrum: &SymmetricSpectrum, u: f64) -> Result<()> {
    let edge = spectrum.lambda_min();
    if u < edge {
        Ok(())
    } else {
        Err(Error::BarrierViolation {
            barrier: u,
            edge,
            side: BarrierSide::Below,
        })
    }
}

pub(crate) fn check_above(spectrum: &SymmetricSpectrum, u: f64) -> Result<()> {
    let edge = spectrum.lambda_max();
    if u > edge {
        Ok(())
    } else {
        Err(Error::BarrierViolation {
            barrier: u,
            edge,
            side: BarrierSide::Above,
        })
    }
}

/// Lower Stieltjes potential tr((A − u)⁻¹); positive and strictly increasing
/// on (−∞, λ_min).
pub fn stieltjes_lower(spectrum: &SymmetricSpectrum, u: f64) -> Result<f64> {
    check_below(spectrum, u)?;
    Ok(lower_potential(spectrum.eigenvalues(), u))
}

/// Upper Stieltjes potential tr((u − A)⁻¹); positive and strictly decreasing
/// on (λ_max, ∞).
pub fn stieltjes_upper(spectrum: &SymmetricSpectrum, u: f64) -> Result<f64> {
    check_above(spectrum, u)?;
    Ok(upper_potential(spectrum.eigenvalues(), u))
}

/// tr((A − u + xxᵀ)⁻¹) through the Sherman–Morrison formula:
///
/// tr((A−u)⁻¹) − xᵀ(A−u)⁻²x / (1 + xᵀ(A−u)⁻¹x).
///
/// For u below the spectrum this is the lower potential of A + xxᵀ; for u
/// above it is minus the upper potential.
pub fn sherman_morrison_trace(spectrum: &SymmetricSpectrum, x: &RankOneVector, u: f64) -> Result<f64> {
    if x.dim() != spectrum.dim() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.dim(),
            got: x.dim(),
        });
    }
    if !u.is_finite() {
        return Err(invalid("shift u must be finite"));
    }
    let mut trace = 0.0;
    let mut first = 0.0;
    let mut second = 0.0;
    for (&l, w) in spectrum.eigenvalues().iter().zip(x.weights()) {
        let r = l - u;
        if r == 0.0 {
            return Err(Error::Precondition(format!("u = {u} is an eigenvalue of A")));
        }
        trace += 1.0 / r;
        first += w / r;
        second += w / (r * r);
    }
    let denom = 1.0 + first;
    if denom.abs() <= SINGULAR_DENOMINATOR {
        return Err(Error::SingularUpdate(denom));
    }
    Ok(trace - second / denom)
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psd(n: usize, rank: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
        let mut a = &g * g.transpose();
        symmetrize(&mut a);
        a
    }

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    /// Frobenius distance relative to the norm of `b`.
    fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let s = eigendecompose(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 1.0]);
        assert!(s.orthogonality_defect() < 1e-12);
    }

    #[test]
    fn diagonal_eigenpairs_up_to_sign() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let s = eigendecompose(&a).unwrap();
        assert!((s.eigenvalues()[0] - 3.0).abs() < 1e-14);
        assert!((s.eigenvalues()[1] - 1.0).abs() < 1e-14);
        assert!((s.eigenvectors()[(0, 0)].abs() - 1.0).abs() < 1e-14);
        assert!((s.eigenvectors()[(1, 1)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_psd_reconstructs() {
        let a = random_psd(16, 16, 3);
        let s = eigendecompose(&a).unwrap();
        assert!(rel_frobenius(&s.reconstruct(), &a) <= 1e-9);
        assert!(s.orthogonality_defect() <= 1e-10);
        assert!(s.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_asymmetric_and_non_finite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(eigendecompose(&a), Err(Error::NotSymmetric(_))));
        let b = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert!(matches!(eigendecompose(&b), Err(Error::NonFinite { .. })));
        let c = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(eigendecompose(&c), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn update_of_zero_matrix() {
        let s = SymmetricSpectrum::zeros(2);
        let x = s.project(&[1.0, 0.0]).unwrap();
        for mode in [UpdateMode::Full, UpdateMode::Incremental] {
            let t = rank_one_update(&s, &x, mode).unwrap();
            assert!((t.eigenvalues()[0] - 1.0).abs() < 1e-14);
            assert!(t.eigenvalues()[1].abs() < 1e-14);
        }
    }

    #[test]
    fn update_of_identity_along_diagonal() {
        // I + (1,1)(1,1)ᵀ has eigenvalues 3 (along (1,1)/√2) and 1.
        let s = eigendecompose(&DMatrix::identity(2, 2)).unwrap();
        let x = s.project(&[1.0, 1.0]).unwrap();
        for mode in [UpdateMode::Full, UpdateMode::Incremental] {
            let t = rank_one_update(&s, &x, mode).unwrap();
            assert!((t.eigenvalues()[0] - 3.0).abs() < 1e-12, "{mode:?}");
            assert!((t.eigenvalues()[1] - 1.0).abs() < 1e-12, "{mode:?}");
            let v = t.eigenvectors().column(0);
            assert!((v[0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
            assert!((v[0] - v[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn incremental_matches_full_on_random_32() {
        let a = random_psd(32, 32, 11);
        let s = eigendecompose(&a).unwrap();
        let x = s.project(&random_vec(32, 12)).unwrap();
        let full = rank_one_update(&s, &x, UpdateMode::Full).unwrap();
        let inc = rank_one_update(&s, &x, UpdateMode::Incremental).unwrap();
        for (f, i) in full.eigenvalues().iter().zip(inc.eigenvalues()) {
            assert!((f - i).abs() <= 1e-8, "{f} vs {i}");
        }
        assert!(inc.orthogonality_defect() <= 1e-10);
        let mut target = a.clone();
        let xv = DVector::from_column_slice(&random_vec(32, 12));
        target.ger(1.0, &xv, &xv, 1.0);
        assert!(rel_frobenius(&inc.reconstruct(), &target) <= 1e-9);
    }

    #[test]
    fn incremental_handles_repeated_and_deflated_components() {
        // Rank-deficient A with a repeated zero eigenvalue and x orthogonal to
        // part of the eigenbasis.
        let a = random_psd(12, 4, 5);
        let s = eigendecompose(&a).unwrap();
        let mut x = vec![0.0; 12];
        x[0] = 1.0;
        x[5] = -0.5;
        let x = s.project(&x).unwrap();
        let full = rank_one_update(&s, &x, UpdateMode::Full).unwrap();
        let inc = rank_one_update(&s, &x, UpdateMode::Incremental).unwrap();
        for (f, i) in full.eigenvalues().iter().zip(inc.eigenvalues()) {
            assert!((f - i).abs() <= 1e-8, "{f} vs {i}");
        }
        assert!(inc.orthogonality_defect() <= 1e-10);

        // x along a single eigenvector: everything else deflates.
        let e = s.eigenvectors().column(2).clone_owned();
        let x = s.project(e.as_slice()).unwrap();
        let inc = rank_one_update(&s, &x, UpdateMode::Incremental).unwrap();
        let full = rank_one_update(&s, &x, UpdateMode::Full).unwrap();
        for (f, i) in full.eigenvalues().iter().zip(inc.eigenvalues()) {
            assert!((f - i).abs() <= 1e-8, "{f} vs {i}");
        }
    }

    #[test]
    fn zero_update_is_identity() {
        let s = eigendecompose(&random_psd(6, 6, 9)).unwrap();
        let x = s.project(&[0.0; 6]).unwrap();
        let t = rank_one_update(&s, &x, UpdateMode::Incremental).unwrap();
        assert_eq!(t.eigenvalues(), s.eigenvalues());
    }

    #[test]
    fn update_dimension_mismatch() {
        let s = SymmetricSpectrum::zeros(3);
        let other = SymmetricSpectrum::zeros(2);
        let x = other.project(&[1.0, 0.0]).unwrap();
        assert!(matches!(
            rank_one_update(&s, &x, UpdateMode::Full),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
        assert!(s.project(&[1.0]).is_err());
    }

    #[test]
    fn stieltjes_examples() {
        let ones = SymmetricSpectrum::from_diagonal(&[1.0, 1.0]).unwrap();
        assert_eq!(stieltjes_lower(&ones, 0.0).unwrap(), 2.0);
        assert_eq!(stieltjes_upper(&ones, 2.0).unwrap(), 2.0);

        // A = 0, n = 4, m = 16: u0 = n - sqrt(mn) = -4 gives n / (sqrt(mn) - n) = 1,
        // u0 = n + sqrt(mn) = 12 gives n / (n + sqrt(mn)) = 1/3.
        let zero = SymmetricSpectrum::zeros(4);
        assert!((stieltjes_lower(&zero, -4.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((stieltjes_upper(&zero, 12.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);

        let two_three = SymmetricSpectrum::from_diagonal(&[2.0, 3.0]).unwrap();
        assert!((stieltjes_lower(&two_three, 1.0).unwrap() - 1.5).abs() < 1e-15);
        assert!((stieltjes_upper(&two_three, 5.0).unwrap() - (1.0 / 3.0 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn stieltjes_barrier_violations() {
        let s = SymmetricSpectrum::from_diagonal(&[2.0, 3.0]).unwrap();
        assert!(matches!(
            stieltjes_lower(&s, 2.0),
            Err(Error::BarrierViolation { side: BarrierSide::Below, .. })
        ));
        assert!(matches!(
            stieltjes_upper(&s, 3.0),
            Err(Error::BarrierViolation { side: BarrierSide::Above, .. })
        ));
    }

    #[test]
    fn sherman_morrison_small_examples() {
        let s = SymmetricSpectrum::from_diagonal(&[1.0, 1.0]).unwrap();
        let x = s.project(&[1.0, 0.0]).unwrap();
        assert!((sherman_morrison_trace(&s, &x, 0.0).unwrap() - 1.5).abs() < 1e-15);

        let zero = s.project(&[0.0, 0.0]).unwrap();
        assert_eq!(
            sherman_morrison_trace(&s, &zero, 0.25).unwrap(),
            stieltjes_lower(&s, 0.25).unwrap()
        );
    }

    #[test]
    fn sherman_morrison_matches_dense_inverse() {
        let a = random_psd(16, 16, 21);
        let s = eigendecompose(&a).unwrap();
        let xs = random_vec(16, 22);
        let x = s.project(&xs).unwrap();
        let u = s.lambda_min() - 1.0;
        let xv = DVector::from_column_slice(&xs);
        let mut m = &a - DMatrix::identity(16, 16) * u;
        m.ger(1.0, &xv, &xv, 1.0);
        let direct = m.try_inverse().unwrap().trace();
        let formula = sherman_morrison_trace(&s, &x, u).unwrap();
        assert!(((formula - direct) / direct).abs() <= 1e-10);
    }

    #[test]
    fn sherman_morrison_rejects_singular_denominator() {
        // 1 + x^T (A - u)^{-1} x = 1 - 1 = 0 with A = 0, u = 1, x = e1.
        let s = SymmetricSpectrum::zeros(2);
        let x = s.project(&[1.0, 0.0]).unwrap();
        assert!(matches!(
            sherman_morrison_trace(&s, &x, 1.0),
            Err(Error::SingularUpdate(_))
        ));
        assert!(matches!(
            sherman_morrison_trace(&s, &x, 0.0),
            Err(Error::Precondition(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn update_interlaces_and_adds_trace(seed in 0u64..10_000, n in 2usize..24, rank in 1usize..24) {
            let a = random_psd(n, rank.min(n), seed);
            let s = eigendecompose(&a).unwrap();
            let x = s.project(&random_vec(n, seed ^ 0xABCD)).unwrap();
            let t = rank_one_update(&s, &x, UpdateMode::Incremental).unwrap();
            let scale = s.lambda_max().abs().max(1.0);
            let old = s.eigenvalues();
            let new = t.eigenvalues();
            for i in 0..n {
                prop_assert!(new[i] >= old[i] - 1e-9 * scale);
                if i + 1 < n {
                    prop_assert!(old[i] >= new[i + 1] - 1e-9 * scale);
                }
            }
            let expected = s.trace() + x.norm_sq();
            prop_assert!((t.trace() - expected).abs() <= 1e-9 * expected.abs().max(1.0));
            prop_assert!(t.orthogonality_defect() <= 1e-10);
        }

        #[test]
        fn sherman_morrison_equals_updated_potential(seed in 0u64..10_000, below in any::<bool>()) {
            let a = random_psd(16, 16, seed);
            let s = eigendecompose(&a).unwrap();
            let x = s.project(&random_vec(16, seed + 1)).unwrap();
            let t = rank_one_update(&s, &x, UpdateMode::Full).unwrap();
            if below {
                let u = s.lambda_min() - 0.5;
                let lhs = sherman_morrison_trace(&s, &x, u).unwrap();
                let rhs = stieltjes_lower(&t, u).unwrap();
                prop_assert!(((lhs - rhs) / rhs).abs() <= 1e-10);
            } else {
                let u = t.lambda_max() + 0.5;
                let lhs = sherman_morrison_trace(&s, &x, u).unwrap();
                let rhs = -stieltjes_upper(&t, u).unwrap();
                prop_assert!(((lhs - rhs) / rhs).abs() <= 1e-10);
            }
        }

        #[test]
        fn potentials_are_monotone(seed in 0u64..10_000) {
            let s = eigendecompose(&random_psd(8, 8, seed)).unwrap();
            let lo = s.lambda_min();
            let hi = s.lambda_max();
            let mut prev = 0.0;
            for k in 1..=40 {
                let u = lo - 10.0 + 9.99 * k as f64 / 40.0;
                let v = stieltjes_lower(&s, u).unwrap();
                prop_assert!(v > prev);
                prev = v;
            }
            let mut prev = f64::INFINITY;
            for k in 1..=40 {
                let u = hi + 0.01 + 10.0 * k as f64 / 40.0;
                let v = stieltjes_upper(&s, u).unwrap();
                prop_assert!(v < prev && v > 0.0);
                prev = v;
            }
        }
    }
}
