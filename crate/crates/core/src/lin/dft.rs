use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::{c64, ComplexMatrix};
use crate::error::{Error, Result};

/// Unitary `n`-point DFT matrix, `[m, k] = exp(-j 2π m k / n) / √n`.
pub fn dft_matrix(n: usize) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::dim("DFT size must be at least 1"));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(ComplexMatrix::from_fn(n, n, |m, k| {
        // reduce the exponent first so large sizes keep full phase accuracy
        let e = ((m * k) % n) as f64;
        c64::from_polar(scale, -2.0 * PI * e / n as f64)
    }))
}

/// Delay-Doppler transform `F = F_N ⊗ I_M` of size `NM × NM`.
pub fn dd_transform(m: usize, n: usize) -> Result<ComplexMatrix> {
    if m == 0 {
        return Err(Error::dim("delay dimension must be at least 1"));
    }
    let fnn = dft_matrix(n)?;
    Ok(fnn.kronecker(&ComplexMatrix::identity(m, m)))
}

/// `F x` for `x` in column-major `M × N` ordering (delay index fastest).
/// Applies the unitary `N`-point DFT across the Doppler axis of every delay row.
pub fn dd_forward(x: &[c64], m: usize, n: usize) -> Vec<c64> {
    dd_apply(x, m, n, -1.0)
}

/// `F^H y`, the inverse of [`dd_forward`].
pub fn dd_inverse(y: &[c64], m: usize, n: usize) -> Vec<c64> {
    dd_apply(y, m, n, 1.0)
}

fn dd_apply(x: &[c64], m: usize, n: usize, sign: f64) -> Vec<c64> {
    assert_eq!(x.len(), m * n, "vector length must equal M·N");
    let scale = 1.0 / (n as f64).sqrt();
    let twiddles: Vec<c64> = (0..n)
        .map(|e| c64::from_polar(scale, sign * 2.0 * PI * e as f64 / n as f64))
        .collect();
    let mut out = vec![c64::new(0.0, 0.0); m * n];
    for k in 0..n {
        for nn in 0..n {
            let w = twiddles[(k * nn) % n];
            let src = &x[nn * m..(nn + 1) * m];
            let dst = &mut out[k * m..(k + 1) * m];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    out
}

/// Which unitary operator to apply: `F` or `F^H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// FFT-backed unitary DFT of a fixed size, applied to matrix rows or columns.
#[derive(Clone)]
pub struct Dft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Dft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft").field("n", &self.n).finish()
    }
}

impl Dft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Dft {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place `x ← F x` or `x ← F^H x`.
    pub fn apply(&self, x: &mut [c64], dir: Direction) {
        match dir {
            Direction::Forward => self.forward.process(x),
            Direction::Inverse => self.inverse.process(x),
        }
        let scale = 1.0 / (self.n as f64).sqrt();
        x.iter_mut().for_each(|v| *v *= scale);
    }

    /// `X ← F X` (or `F^H X`).
    pub fn apply_columns(&self, x: &mut ComplexMatrix, dir: Direction) {
        assert_eq!(x.nrows(), self.n);
        let rows = self.n;
        for col in x.as_mut_slice().chunks_mut(rows) {
            self.apply(col, dir);
        }
    }

    /// `X ← X F` for `Forward`, `X ← X F^H` for `Inverse`.
    ///
    /// `F` is symmetric, so right-multiplication transforms each row.
    pub fn apply_rows(&self, x: &mut ComplexMatrix, dir: Direction) {
        assert_eq!(x.ncols(), self.n);
        let mut buf = vec![c64::new(0.0, 0.0); self.n];
        for i in 0..x.nrows() {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = x[(i, j)];
            }
            self.apply(&mut buf, dir);
            for (j, b) in buf.iter().enumerate() {
                x[(i, j)] = *b;
            }
        }
    }

    /// `F X F^H`.
    pub fn similarity_forward(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut y = x.clone();
        self.apply_columns(&mut y, Direction::Forward);
        self.apply_rows(&mut y, Direction::Inverse);
        y
    }

    /// `F^H X F`.
    pub fn similarity_inverse(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut y = x.clone();
        self.apply_columns(&mut y, Direction::Inverse);
        self.apply_rows(&mut y, Direction::Forward);
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lin::{max_abs, unitarity_defect};

    #[test]
    fn dft_small_cases() {
        let f1 = dft_matrix(1).unwrap();
        assert_eq!(f1[(0, 0)], c64::new(1.0, 0.0));

        let f2 = dft_matrix(2).unwrap();
        let h = 1.0 / 2f64.sqrt();
        let expected = [[h, h], [h, -h]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((f2[(i, j)] - c64::new(expected[i][j], 0.0)).norm() < 1e-15);
            }
        }
        assert!(dft_matrix(0).is_err());
    }

    #[test]
    fn dft_is_unitary() {
        for n in [3, 8, 64, 256] {
            assert!(unitarity_defect(&dft_matrix(n).unwrap()) <= 1e-12, "n = {n}");
        }
    }

    #[test]
    fn dd_transform_special_cases() {
        let f = dd_transform(5, 1).unwrap();
        assert!(max_abs(&(f - ComplexMatrix::identity(5, 5))) < 1e-15);

        let f = dd_transform(1, 6).unwrap();
        assert!(max_abs(&(f - dft_matrix(6).unwrap())) < 1e-15);

        let f = dd_transform(4, 2).unwrap();
        assert!(unitarity_defect(&f) <= 1e-12);
    }

    #[test]
    fn fast_dd_matches_dense() {
        let (m, n) = (4, 8);
        let x: Vec<c64> = (0..m * n)
            .map(|i| c64::new((i as f64).sin(), (0.3 * i as f64).cos()))
            .collect();
        let f = dd_transform(m, n).unwrap();
        let dense = &f * nalgebra::DVector::from_column_slice(&x);
        let fast = dd_forward(&x, m, n);
        for (a, b) in dense.iter().zip(&fast) {
            assert!((a - b).norm() < 1e-13);
        }
        let back = dd_inverse(&fast, m, n);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn fft_similarities_match_dense() {
        let n = 12;
        let x = ComplexMatrix::from_fn(n, n, |i, j| c64::new((i * 3 + j) as f64 % 5.0, (i as f64 - j as f64) * 0.1));
        let f = dft_matrix(n).unwrap();
        let dft = Dft::new(n);
        let fwd = dft.similarity_forward(&x);
        let inv = dft.similarity_inverse(&x);
        assert!(max_abs(&(fwd - &f * &x * f.adjoint())) < 1e-12);
        assert!(max_abs(&(inv - f.adjoint() * &x * &f)) < 1e-12);
    }
}
