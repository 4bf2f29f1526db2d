use std::sync::OnceLock;

use nalgebra::{Cholesky, Dyn, SymmetricEigen};
use rand::Rng;

use super::{c64, complex_normal_vec, hermitian_defect, max_abs, symmetrize, trace_re};
use super::{ComplexMatrix, ComplexVector};
use crate::error::{Error, Result};

/// Relative Hermitian tolerance accepted on construction.
const HERMITIAN_TOL: f64 = 1e-12;
/// Most negative eigenvalue, relative to the largest, that is clipped to zero.
const CLIP_TOL: f64 = 1e-10;
/// Eigenvalues below this fraction of the largest carry no usable signal.
const RANK_FLOOR: f64 = 1e-15;

/// Hermitian positive semi-definite matrix with a lazily computed factor
/// `L` such that `L L^H` equals the matrix.
#[derive(Debug, Clone)]
pub struct HermitianPsd {
    matrix: ComplexMatrix,
    factor: OnceLock<PsdFactor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    Cholesky,
    EigenClipped { rank: usize, clipped: usize },
    Zero,
}

/// Square-root factor of a PSD matrix, `n × rank`.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    pub lower: ComplexMatrix,
    pub kind: FactorKind,
}

impl HermitianPsd {
    /// Wraps a Hermitian matrix. The input is symmetrized; PSD-ness is
    /// checked when the factor is first requested.
    pub fn new(mut matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::dim(format!(
                "Hermitian matrix must be square and nonempty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Model("covariance has non-finite entries".into()));
        }
        let scale = max_abs(&matrix);
        let defect = hermitian_defect(&matrix);
        if defect > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Model(format!(
                "matrix is not Hermitian (defect {defect:.3e}, scale {scale:.3e})"
            )));
        }
        symmetrize(&mut matrix);
        Ok(HermitianPsd {
            matrix,
            factor: OnceLock::new(),
        })
    }

    pub fn zeros(n: usize) -> Self {
        HermitianPsd {
            matrix: ComplexMatrix::zeros(n, n),
            factor: OnceLock::new(),
        }
    }

    pub fn identity(n: usize, scale: f64) -> Self {
        HermitianPsd {
            matrix: ComplexMatrix::identity(n, n) * c64::new(scale, 0.0),
            factor: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.matrix)
    }

    pub fn has_factor(&self) -> bool {
        self.factor.get().is_some()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.matrix.clone());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Fails when the smallest eigenvalue is below `-1e-10 · λ_max`.
    pub fn check_psd(&self) -> Result<()> {
        let ev = self.eigenvalues();
        let max = ev.last().copied().unwrap_or(0.0).max(0.0);
        let min = ev.first().copied().unwrap_or(0.0);
        if min < -CLIP_TOL * max.max(f64::MIN_POSITIVE) {
            return Err(Error::Model(format!(
                "matrix is not PSD: λ_min = {min:.3e}, λ_max = {max:.3e}"
            )));
        }
        Ok(())
    }

    /// Closest PSD matrix obtained by zeroing eigenvalues that are negative
    /// within tolerance.
    pub fn clipped(&self) -> Result<HermitianPsd> {
        let f = self.factor()?;
        let m = &f.lower * f.lower.adjoint();
        HermitianPsd::new(m)
    }

    pub fn factor(&self) -> Result<&PsdFactor> {
        if let Some(f) = self.factor.get() {
            return Ok(f);
        }
        let f = PsdFactor::compute(&self.matrix)?;
        Ok(self.factor.get_or_init(|| f))
    }
}

impl PsdFactor {
    fn compute(m: &ComplexMatrix) -> Result<Self> {
        let n = m.nrows();
        if max_abs(m) == 0.0 {
            return Ok(PsdFactor {
                lower: ComplexMatrix::zeros(n, 0),
                kind: FactorKind::Zero,
            });
        }
        if let Some(chol) = Cholesky::new(m.clone()) {
            let lower = chol.l();
            if real_pivots(&lower) && lower.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Ok(PsdFactor {
                    lower,
                    kind: FactorKind::Cholesky,
                });
            }
        }
        let eig = SymmetricEigen::new(m.clone());
        let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -CLIP_TOL * max.max(f64::MIN_POSITIVE) {
            return Err(Error::Model(format!(
                "covariance is not PSD: λ_min = {min:.3e}, λ_max = {max:.3e}"
            )));
        }
        let keep: Vec<usize> = (0..n)
            .filter(|&i| eig.eigenvalues[i] > RANK_FLOOR * max)
            .collect();
        let clipped = (0..n).filter(|&i| eig.eigenvalues[i] < 0.0).count();
        let mut lower = ComplexMatrix::zeros(n, keep.len());
        for (col, &i) in keep.iter().enumerate() {
            let s = eig.eigenvalues[i].sqrt();
            for r in 0..n {
                lower[(r, col)] = eig.eigenvectors[(r, i)] * s;
            }
        }
        Ok(PsdFactor {
            kind: FactorKind::EigenClipped {
                rank: keep.len(),
                clipped,
            },
            lower,
        })
    }

    pub fn rank(&self) -> usize {
        self.lower.ncols()
    }
}

/// Reusable Cholesky solver for `(A + ridge·I) X = B` with ridge escalation.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    chol: Cholesky<c64, Dyn>,
    ridge: f64,
}

impl SpdSolver {
    /// Factors `A + ridge·I`. On failure the ridge is raised tenfold (from
    /// `1e-12·trace/n` when it starts at zero) up to `1e-6·trace/n`.
    pub fn new(a: &ComplexMatrix, ridge: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::dim("solver matrix must be square and nonempty"));
        }
        let n = a.nrows();
        let scale = trace_re(a) / n as f64;
        let limit = 1e-6 * scale;
        let mut r = ridge.max(0.0);
        loop {
            let mut shifted = a.clone();
            if r > 0.0 {
                for i in 0..n {
                    shifted[(i, i)] += c64::new(r, 0.0);
                }
            }
            if let Some(chol) = Cholesky::new(shifted) {
                if real_pivots(chol.l_dirty()) {
                    return Ok(SpdSolver { chol, ridge: r });
                }
            }
            let next = if r == 0.0 { 1e-12 * scale } else { r * 10.0 };
            if !(next > 0.0) || next > limit * (1.0 + 1e-9) {
                break;
            }
            r = next;
        }
        Err(Error::Singular {
            condition: condition_estimate(a),
        })
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &ComplexMatrix) -> ComplexMatrix {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &[c64]) -> Vec<c64> {
        let mut v = ComplexVector::from_column_slice(b);
        self.chol.solve_mut(&mut v);
        v.as_slice().to_vec()
    }

    pub fn inverse(&self) -> ComplexMatrix {
        self.chol.inverse()
    }

    /// `L⁻¹ B` for the Cholesky factor `L` of the shifted matrix.
    pub fn solve_lower(&self, b: &ComplexMatrix) -> ComplexMatrix {
        self.chol
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a nonzero diagonal")
    }
}

/// Complex Cholesky takes square roots of negative pivots without failing.
fn real_pivots(lower: &ComplexMatrix) -> bool {
    (0..lower.nrows()).all(|i| {
        let d = lower[(i, i)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re
    })
}

fn condition_estimate(a: &ComplexMatrix) -> f64 {
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `(A + ridge·I) X = B`.
pub fn hermitian_solve(a: &HermitianPsd, b: &ComplexMatrix, ridge: f64) -> Result<ComplexMatrix> {
    if b.nrows() != a.dim() {
        return Err(Error::dim(format!(
            "right-hand side has {} rows, matrix is {}x{}",
            b.nrows(),
            a.dim(),
            a.dim()
        )));
    }
    Ok(SpdSolver::new(a.matrix(), ridge)?.solve(b))
}

/// Draws a circularly-symmetric complex Gaussian vector with covariance `cov`.
pub fn sample_correlated<R: Rng + ?Sized>(cov: &HermitianPsd, rng: &mut R) -> Result<ComplexVector> {
    let f = cov.factor()?;
    let w = ComplexVector::from_vec(complex_normal_vec(rng, f.rank(), 1.0));
    Ok(&f.lower * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lin::trial_rng;

    fn random_psd(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = trial_rng(seed, 0, 0);
        let a = ComplexMatrix::from_fn(n, n, |_, _| crate::lin::complex_normal(&mut rng, 1.0));
        &a * a.adjoint() + ComplexMatrix::identity(n, n) * c64::new(0.1, 0.0)
    }

    #[test]
    fn solve_identity_and_scaled() {
        let b = ComplexMatrix::from_fn(3, 2, |i, j| c64::new(i as f64, j as f64));
        let id = HermitianPsd::identity(3, 1.0);
        assert_eq!(hermitian_solve(&id, &b, 0.0).unwrap(), b);

        let two = HermitianPsd::identity(3, 2.0);
        let x = hermitian_solve(&two, &ComplexMatrix::identity(3, 3), 0.0).unwrap();
        assert!(max_abs(&(x - ComplexMatrix::identity(3, 3) * c64::new(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn solve_matches_explicit_inverse() {
        let a = random_psd(6, 11);
        let b = ComplexMatrix::from_fn(6, 3, |i, j| c64::new((i + j) as f64, 1.0 - i as f64));
        let psd = HermitianPsd::new(a.clone()).unwrap();
        let x = hermitian_solve(&psd, &b, 0.0).unwrap();
        let oracle = a.clone().try_inverse().unwrap() * &b;
        assert!(max_abs(&(&x - oracle)) < 1e-9);
        let residual = max_abs(&(&a * &x - &b));
        assert!(residual <= 1e-8 * max_abs(&b));
    }

    #[test]
    fn lower_solve_splits_the_inverse() {
        let a = random_psd(5, 12);
        let solver = SpdSolver::new(&a, 0.0).unwrap();
        let b = ComplexMatrix::from_fn(5, 2, |i, j| c64::new(i as f64 - j as f64, 0.5));
        let u = solver.solve_lower(&b);
        let quad = u.adjoint() * &u;
        let oracle = b.adjoint() * solver.solve(&b);
        assert!(max_abs(&(quad - oracle)) < 1e-9);
    }

    #[test]
    fn singular_matrix_reports_condition() {
        let z = HermitianPsd::zeros(3);
        let err = hermitian_solve(&z, &ComplexMatrix::identity(3, 3), 0.0).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }

    #[test]
    fn ridge_rescues_rank_deficient() {
        // rank-1 PSD: Cholesky fails without ridge, succeeds after escalation
        let v = ComplexVector::from_vec(vec![c64::new(1.0, 0.0), c64::new(1.0, 0.0)]);
        let a = &v * v.adjoint();
        let s = SpdSolver::new(&a, 0.0).unwrap();
        assert!(s.ridge() > 0.0 && s.ridge() <= 1e-6);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = ComplexMatrix::identity(2, 2);
        m[(0, 1)] = c64::new(1.0, 0.0);
        assert!(HermitianPsd::new(m).is_err());
    }

    #[test]
    fn rejects_indefinite_on_factor() {
        let mut m = ComplexMatrix::identity(2, 2);
        m[(1, 1)] = c64::new(-1.0, 0.0);
        let p = HermitianPsd::new(m).unwrap();
        assert!(p.factor().is_err());
        assert!(p.check_psd().is_err());
    }

    #[test]
    fn zero_covariance_samples_zero() {
        let z = HermitianPsd::zeros(4);
        let mut rng = trial_rng(1, 2, 3);
        let v = sample_correlated(&z, &mut rng).unwrap();
        assert_eq!(v.len(), 4);
        assert!(v.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn rank_deficient_factor_reproduces_matrix() {
        let v = ComplexVector::from_vec(vec![
            c64::new(1.0, 0.5),
            c64::new(-0.2, 1.0),
            c64::new(0.3, 0.0),
        ]);
        let a = &v * v.adjoint();
        let p = HermitianPsd::new(a.clone()).unwrap();
        let f = p.factor().unwrap();
        assert!(max_abs(&(&f.lower * f.lower.adjoint() - a)) < 1e-12);
        assert!(p.has_factor());
    }
}
