//! Power maps and the structured covariances shared by estimator and detector.

use std::f64::consts::PI;

use crate::bem::{BemConfig, ModelingError};
use crate::frame::{layout, CellKind, OtfsParams, PilotConfig};
use crate::lin::{c64, dd_forward, dd_inverse, ComplexMatrix, ZERO};

/// Diagonal DD power maps: `Φ_d = diag(data)`, `Φ_p = diag(pilot)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerMap {
    pub data: Vec<f64>,
    pub pilot: Vec<f64>,
}

impl PowerMap {
    /// Data power zeroed on the box `|m − l_p| ≤ L`, `|n − k_p| ≤ Q_L`
    /// (`(2L+1)(2Q_L+1)` cells), the interference map of the closed-form
    /// noise covariance.
    pub fn zero_region(params: &OtfsParams, pilot: &PilotConfig) -> Self {
        let mut data = vec![pilot.data_power; params.nm()];
        for n in 0..params.n {
            for m in 0..params.m {
                if m.abs_diff(pilot.l_p) <= pilot.delay_spread && n.abs_diff(pilot.k_p) <= pilot.q_l {
                    data[params.cell_index(m, n)] = 0.0;
                }
            }
        }
        PowerMap {
            data,
            pilot: pilot_map(params, pilot),
        }
    }

    /// Data power on exactly the frame's data cells.
    pub fn frame(params: &OtfsParams, pilot: &PilotConfig) -> Self {
        let data = layout(params, pilot)
            .iter()
            .map(|c| if *c == CellKind::Data { pilot.data_power } else { 0.0 })
            .collect();
        PowerMap {
            data,
            pilot: pilot_map(params, pilot),
        }
    }

    /// Diagonal of `Φ = Φ_d + Φ_p`.
    pub fn total(&self) -> Vec<f64> {
        self.data.iter().zip(&self.pilot).map(|(d, p)| d + p).collect()
    }

    pub fn data_trace(&self) -> f64 {
        self.data.iter().sum()
    }

    /// `E|s|² = Tr(Φ)/NM`.
    pub fn signal_power(&self) -> f64 {
        (self.data_trace() + self.pilot.iter().sum::<f64>()) / self.data.len() as f64
    }
}

fn pilot_map(params: &OtfsParams, pilot: &PilotConfig) -> Vec<f64> {
    let mut p = vec![0.0; params.nm()];
    p[params.cell_index(pilot.l_p, pilot.k_p)] = pilot.pilot_power;
    p
}

/// Time-domain covariance `F^H diag(γ) F` of an OTFS frame with independent
/// zero-mean DD symbols of power `γ`.
///
/// Only samples with the same delay index couple:
/// `R[nM+m, n'M+m] = (1/N) Σ_k γ[kM+m] e^{j2πk(n−n')/N}`.
#[derive(Debug, Clone)]
pub struct DdCovariance {
    m: usize,
    n: usize,
    gamma: Vec<f64>,
    /// `rho[m·N + d]` for Doppler lag `d = (n − n') mod N`
    rho: Vec<c64>,
}

impl DdCovariance {
    pub fn new(params: &OtfsParams, gamma: &[f64]) -> Self {
        let (m, n) = (params.m, params.n);
        assert_eq!(gamma.len(), m * n);
        let mut rho = vec![ZERO; m * n];
        for row in 0..m {
            for d in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    let g = gamma[k * m + row];
                    if g != 0.0 {
                        let phase = 2.0 * PI * ((k * d) % n) as f64 / n as f64;
                        acc += c64::from_polar(g, phase);
                    }
                }
                rho[row * n + d] = acc / n as f64;
            }
        }
        DdCovariance {
            m,
            n,
            gamma: gamma.to_vec(),
            rho,
        }
    }

    pub fn dim(&self) -> usize {
        self.m * self.n
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> c64 {
        let (mi, ni) = (i % self.m, i / self.m);
        let (mj, nj) = (j % self.m, j / self.m);
        if mi != mj {
            return ZERO;
        }
        self.rho[mi * self.n + (ni + self.n - nj) % self.n]
    }

    pub fn dense(&self) -> ComplexMatrix {
        let nm = self.dim();
        ComplexMatrix::from_fn(nm, nm, |i, j| self.entry(i, j))
    }

    /// `F^H diag(γ) F x`.
    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        let mut y = dd_forward(x, self.m, self.n);
        for (v, g) in y.iter_mut().zip(&self.gamma) {
            *v *= *g;
        }
        dd_inverse(&y, self.m, self.n)
    }
}

/// `Σ_{l,l'} (Π^l R_s Π^{l',H}) ⊙ (B R^{(l,l')} B^H)` restricted to
/// `rows × cols`, where `R^{(l,l')}` is the `(Q_L+1)²` block of the
/// coefficient covariance `coeff_cov` (basis-major, path inner) for paths
/// `l, l'`.
///
/// This is the time-domain covariance of `Σ_q diag(b_q) C_q s` for a random
/// circulant channel `C_q` with taps `c_q` independent of `s`.
pub fn shifted_hadamard(
    r_s: &DdCovariance,
    coeff_cov: &ComplexMatrix,
    bem: &BemConfig,
    paths: usize,
    rows: &[usize],
    cols: &[usize],
) -> ComplexMatrix {
    let nm = r_s.dim();
    let order = bem.order();
    assert_eq!(coeff_cov.nrows(), order * paths);
    let b = &bem.basis;
    let b_cols: Vec<Vec<c64>> = cols
        .iter()
        .map(|&t| (0..order).map(|q| b[(t, q)].conj()).collect())
        .collect();
    let mut out = ComplexMatrix::zeros(rows.len(), cols.len());
    for l in 0..paths {
        for lp in 0..paths {
            let block = ComplexMatrix::from_fn(order, order, |q, p| coeff_cov[(q * paths + l, p * paths + lp)]);
            if block.iter().all(|z| *z == ZERO) {
                continue;
            }
            // y[r] = b(t_r)^T R^{(l,l')}
            let y: Vec<Vec<c64>> = rows
                .iter()
                .map(|&t| {
                    (0..order)
                        .map(|p| (0..order).fold(ZERO, |acc, q| acc + b[(t, q)] * block[(q, p)]))
                        .collect()
                })
                .collect();
            for (jc, &tp) in cols.iter().enumerate() {
                let bc = &b_cols[jc];
                let sj = (tp + nm - lp % nm) % nm;
                for (ir, &t) in rows.iter().enumerate() {
                    let si = (t + nm - l % nm) % nm;
                    let rs = r_s.entry(si, sj);
                    if rs == ZERO {
                        continue;
                    }
                    let w = y[ir].iter().zip(bc).fold(ZERO, |acc, (a, c)| acc + a * c);
                    out[(ir, jc)] += rs * w;
                }
            }
        }
    }
    out
}

/// `Σ_{l'} (Π^{l'} R_s Π^{l',H}) ⊙ R_{e_mod,l'}` restricted to `rows × cols`.
pub fn shifted_modeling(
    r_s: &DdCovariance,
    modeling: &ModelingError,
    rows: &[usize],
    cols: &[usize],
) -> ComplexMatrix {
    let nm = r_s.dim();
    let gjg = modeling.normalized_covariance.matrix();
    let mut out = ComplexMatrix::zeros(rows.len(), cols.len());
    for (jc, &tp) in cols.iter().enumerate() {
        for (ir, &t) in rows.iter().enumerate() {
            let e = gjg[(t, tp)];
            if e == ZERO {
                continue;
            }
            let mut acc = ZERO;
            for (l, &power) in modeling.path_powers.iter().enumerate() {
                if power == 0.0 {
                    continue;
                }
                acc += r_s.entry((t + nm - l % nm) % nm, (tp + nm - l % nm) % nm) * power;
            }
            out[(ir, jc)] = acc * e;
        }
    }
    out
}

/// All time indices `0..NM`.
pub fn all_samples(nm: usize) -> Vec<usize> {
    (0..nm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelProfile;
    use crate::lin::{complex_normal, dd_transform, diag, max_abs, trial_rng};
    use crate::frame::ModulationSpec;

    fn params(m: usize, n: usize) -> OtfsParams {
        OtfsParams::new(m, n, 30e3, 4e9, 3, ModulationSpec::qam(4).unwrap()).unwrap()
    }

    #[test]
    fn zero_region_cell_count() {
        let p = params(64, 16);
        let pilot = PilotConfig::centered(&p, 5, 2, 4);
        let map = PowerMap::zero_region(&p, &pilot);
        assert_eq!(map.data.iter().filter(|g| **g == 0.0).count(), 99);
        assert!((map.data_trace() - (1024 - 99) as f64).abs() < 1e-12);
        let total: f64 = map.total().iter().sum();
        assert!((total - map.data_trace() - 1.0).abs() < 1e-12);

        let mut silent = pilot.clone();
        silent.data_power = 0.0;
        assert_eq!(PowerMap::zero_region(&p, &silent).data_trace(), 0.0);
    }

    #[test]
    fn desk_scale_maps_coincide() {
        let p = params(32, 8);
        let pilot = PilotConfig::centered(&p, 3, 2, 2);
        assert_eq!(PowerMap::zero_region(&p, &pilot), PowerMap::frame(&p, &pilot));
        assert_eq!(PowerMap::frame(&p, &pilot).data.iter().filter(|g| **g > 0.0).count(), 256 - 35);
    }

    #[test]
    fn dd_covariance_matches_dense() {
        let p = params(4, 3);
        let mut rng = trial_rng(1, 0, 0);
        let gamma: Vec<f64> = (0..12).map(|_| complex_normal(&mut rng, 1.0).norm()).collect();
        let f = dd_transform(4, 3).unwrap();
        let g: Vec<c64> = gamma.iter().map(|v| c64::new(*v, 0.0)).collect();
        let oracle = f.adjoint() * diag(&g) * &f;
        let cov = DdCovariance::new(&p, &gamma);
        assert!(max_abs(&(cov.dense() - &oracle)) < 1e-12);
        let x: Vec<c64> = (0..12).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let y = cov.apply(&x);
        let yo = &oracle * nalgebra::DVector::from_column_slice(&x);
        for (a, b) in y.iter().zip(yo.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn submatrix_is_consistent_with_full() {
        let p = params(4, 2);
        let prof = ChannelProfile::new(vec![0.6, 0.4], 3000.0, 0.0, p.sample_interval()).unwrap();
        let bem = BemConfig::new(&p, 2, 2, 2).unwrap();
        let mut rng = trial_rng(2, 0, 0);
        let a = ComplexMatrix::from_fn(6, 6, |_, _| complex_normal(&mut rng, 1.0));
        let r = &a * a.adjoint();
        let cov = DdCovariance::new(&p, &[1.0; 8]);
        let all = all_samples(8);
        let full = shifted_hadamard(&cov, &r, &bem, 2, &all, &all);
        let rows = [1, 5, 6];
        let cols = [0, 3];
        let sub = shifted_hadamard(&cov, &r, &bem, 2, &rows, &cols);
        for (i, &ri) in rows.iter().enumerate() {
            for (j, &cj) in cols.iter().enumerate() {
                assert!((sub[(i, j)] - full[(ri, cj)]).norm() < 1e-12);
            }
        }
        let modeling = crate::bem::modeling_error(&bem, &prof).unwrap();
        let mfull = shifted_modeling(&cov, &modeling, &all, &all);
        let msub = shifted_modeling(&cov, &modeling, &rows, &cols);
        assert!((msub[(2, 1)] - mfull[(6, 3)]).norm() < 1e-14);
    }
}
