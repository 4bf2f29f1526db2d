//! Numerical kernels shared by the link model.

mod dft;
mod psd;
mod rng;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub use dft::{dd_forward, dd_inverse, dd_transform, dft_matrix, Dft, Direction};
pub use psd::{hermitian_solve, sample_correlated, FactorKind, HermitianPsd, PsdFactor, SpdSolver};
pub use rng::{complex_normal, complex_normal_vec, trial_rng, TrialRng};

#[allow(non_camel_case_types)]
pub type c64 = Complex<f64>;

/// Dense complex matrix, column-major.
pub type ComplexMatrix = DMatrix<c64>;

/// Dense complex column vector.
pub type ComplexVector = DVector<c64>;

pub(crate) const ZERO: c64 = c64::new(0.0, 0.0);
pub(crate) const ONE: c64 = c64::new(1.0, 0.0);

/// Largest entry-wise modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max |A - A^H|` entry-wise.
pub fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Replaces `m` by `(m + m^H) / 2`.
pub fn symmetrize(m: &mut ComplexMatrix) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
        let d = m[(j, j)].re;
        m[(j, j)] = c64::new(d, 0.0);
    }
}

/// `max |U U^H - I|` entry-wise.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let g = u * u.adjoint();
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((g[(i, j)] - target).norm());
        }
    }
    worst
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Diagonal matrix with the given entries.
pub fn diag(entries: &[c64]) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&ComplexVector::from_column_slice(entries))
}

/// Real trace of a square complex matrix.
pub fn trace_re(m: &ComplexMatrix) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}
