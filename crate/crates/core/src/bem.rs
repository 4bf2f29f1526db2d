//! GCE-BEM basis, coefficient fitting and modeling-error analysis.
//!
//! Stacking conventions used throughout the crate:
//!
//! * `h` (time-major, path inner): `h[t·(L+1) + l'] = h_{l'}[t]`, so that
//!   `(B ⊗ I_{L+1}) c` reproduces `h` block-per-time.
//! * `c` (basis-major, path inner): `c[q·(L+1) + l'] = c_q[l']`.
//! * `h̄` (path-major): `h̄[l'·NM + t] = h_{l'}[t]`, the output of
//!   `Ω = (I_{L+1} ⊗ B)·P`, where `P` reorders `c` to path-major
//!   `[l'·(Q_L+1) + q]`.

use std::f64::consts::PI;

use crate::channel::{jakes_correlation, ChannelProfile, ChannelRealization};
use crate::error::{Error, Result};
use crate::frame::OtfsParams;
use crate::lin::{c64, dft_matrix, diag, ComplexMatrix, HermitianPsd, ZERO};

/// Basis orders `(Q_S, Q_L)` from `Q = 2⌈R·N·f_max/Δf⌉`, with `R = 1` for `Q_S`.
pub fn derive_orders(params: &OtfsParams, profile: &ChannelProfile, resolution: usize) -> Result<(usize, usize)> {
    if resolution == 0 {
        return Err(Error::config("channel.r", "resolution factor must be at least 1"));
    }
    let order = |r: usize| {
        let x = r as f64 * params.n as f64 * profile.f_max / params.delta_f;
        // guard against 2.0000000000000004 style round-off
        2 * (x - 1e-9).ceil().max(0.0) as usize
    };
    Ok((order(1), order(resolution)))
}

/// Complex-exponential basis `B = [b_0 … b_{Q_L}]`, `b_q[t] = e^{j w_q t}`.
#[derive(Debug, Clone)]
pub struct BemConfig {
    pub resolution: usize,
    pub q_l: usize,
    pub q_s: usize,
    /// `w_q` in rad/sample
    pub frequencies: Vec<f64>,
    /// `NM × (Q_L+1)`
    pub basis: ComplexMatrix,
    /// orthonormal basis of `span(B)`
    ortho: ComplexMatrix,
    /// `B† = R⁻¹ Q^H`
    pinv: ComplexMatrix,
}

impl BemConfig {
    pub fn new(params: &OtfsParams, q_l: usize, q_s: usize, resolution: usize) -> Result<Self> {
        let nm = params.nm();
        if resolution == 0 {
            return Err(Error::config("channel.r", "resolution factor must be at least 1"));
        }
        if q_l + 1 > nm {
            return Err(Error::config(
                "pilot.q_l",
                format!("basis order {q_l} needs {} samples, frame has {nm}", q_l + 1),
            ));
        }
        let period = (nm * resolution) as i64;
        let center = q_l.div_ceil(2) as i64;
        let frequencies = (0..=q_l)
            .map(|q| 2.0 * PI * (q as i64 - center) as f64 / period as f64)
            .collect();
        let basis = ComplexMatrix::from_fn(nm, q_l + 1, |t, q| {
            // exact integer phase before converting to radians
            let k = ((q as i64 - center) * t as i64).rem_euclid(period);
            c64::from_polar(1.0, 2.0 * PI * k as f64 / period as f64)
        });
        let qr = basis.clone().qr();
        let r = qr.r();
        let largest = (0..=q_l).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
        let smallest = (0..=q_l).map(|i| r[(i, i)].norm()).fold(f64::INFINITY, f64::min);
        if !(smallest > 1e-10 * largest) {
            return Err(Error::Singular {
                condition: largest / smallest,
            });
        }
        let ortho = qr.q();
        let pinv = r
            .solve_upper_triangular(&ortho.adjoint())
            .ok_or(Error::Singular { condition: f64::INFINITY })?;
        Ok(BemConfig {
            resolution,
            q_l,
            q_s,
            frequencies,
            basis,
            ortho,
            pinv,
        })
    }

    /// Orders derived from the channel profile via [`derive_orders`].
    pub fn auto(params: &OtfsParams, profile: &ChannelProfile, resolution: usize) -> Result<Self> {
        let (q_s, q_l) = derive_orders(params, profile, resolution)?;
        BemConfig::new(params, q_l, q_s, resolution)
    }

    /// Number of basis functions, `Q_L + 1`.
    pub fn order(&self) -> usize {
        self.q_l + 1
    }

    pub fn len(&self) -> usize {
        self.basis.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.nrows() == 0
    }

    /// Index of the DC column, `⌈Q_L/2⌉`.
    pub fn dc_index(&self) -> usize {
        self.q_l.div_ceil(2)
    }

    pub fn column(&self, q: usize) -> Vec<c64> {
        self.basis.column(q).iter().copied().collect()
    }

    /// `B† = (B^H B)⁻¹ B^H`, from the QR factors.
    pub fn pinv(&self) -> &ComplexMatrix {
        &self.pinv
    }

    /// Orthonormal basis of `span(B)`.
    pub fn orthonormal(&self) -> &ComplexMatrix {
        &self.ortho
    }

    pub fn gram(&self) -> ComplexMatrix {
        self.basis.adjoint() * &self.basis
    }
}

/// BEM coefficients, `coeffs[(q, l')] = c_q[l']`.
#[derive(Debug, Clone, PartialEq)]
pub struct BemCoefficients {
    pub coeffs: ComplexMatrix,
}

impl BemCoefficients {
    pub fn zeros(order: usize, paths: usize) -> Self {
        BemCoefficients {
            coeffs: ComplexMatrix::zeros(order, paths),
        }
    }

    /// From the stacked vector `c[q·(L+1) + l']`.
    pub fn from_stacked(order: usize, paths: usize, c: &[c64]) -> Result<Self> {
        if c.len() != order * paths {
            return Err(Error::dim(format!(
                "coefficient vector has {} entries, expected {order}·{paths}",
                c.len()
            )));
        }
        Ok(BemCoefficients {
            coeffs: ComplexMatrix::from_fn(order, paths, |q, l| c[q * paths + l]),
        })
    }

    pub fn stacked(&self) -> Vec<c64> {
        let (order, paths) = self.coeffs.shape();
        (0..order * paths)
            .map(|i| self.coeffs[(i / paths, i % paths)])
            .collect()
    }

    pub fn order(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn paths(&self) -> usize {
        self.coeffs.ncols()
    }

    /// `c_q`, one entry per path.
    pub fn block(&self, q: usize) -> Vec<c64> {
        self.coeffs.row(q).iter().copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Per-path least-squares fit `c_{·}[l'] = B† h_{l'}`.
pub fn fit_coefficients(h: &ChannelRealization, bem: &BemConfig) -> Result<BemCoefficients> {
    if h.len() != bem.len() {
        return Err(Error::dim(format!(
            "channel has {} samples, basis has {}",
            h.len(),
            bem.len()
        )));
    }
    Ok(BemCoefficients {
        coeffs: bem.pinv() * h.gains.transpose(),
    })
}

/// Tap gains of the BEM channel, `ĥ_{l'}[t] = Σ_q c_q[l'] e^{j w_q t}`.
pub fn to_taps(c: &BemCoefficients, bem: &BemConfig) -> ChannelRealization {
    ChannelRealization::new((&bem.basis * &c.coeffs).transpose())
}

/// Time-varying convolution matrix of the BEM channel, by tap placement.
pub fn reconstruct_channel(c: &BemCoefficients, bem: &BemConfig) -> ComplexMatrix {
    to_taps(c, bem).matrix()
}

/// Unnormalized `NM × (L+1)` DFT, `F[i, l] = e^{-j2π i l / NM}`.
///
/// With this scaling `F_MN^H diag(F_{MN×L} g) F_MN` is exactly the circulant
/// matrix whose first column is `g` zero-padded.
pub fn tap_dft(nm: usize, paths: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(nm, paths, |i, l| {
        let k = (i * l) % nm;
        c64::from_polar(1.0, -2.0 * PI * k as f64 / nm as f64)
    })
}

/// `Ĥ_t = Σ_q diag(b_q) F_MN^H diag(F_{MN×L} c_q) F_MN`, assembled densely.
pub fn reconstruct_channel_operator(c: &BemCoefficients, bem: &BemConfig) -> Result<ComplexMatrix> {
    let nm = bem.len();
    let f = dft_matrix(nm)?;
    let lambda = tap_dft(nm, c.paths());
    let mut h = ComplexMatrix::zeros(nm, nm);
    for q in 0..c.order() {
        let cq = c.coeffs.row(q).transpose();
        let eig = &lambda * cq;
        let circ = f.adjoint() * diag(eig.as_slice()) * &f;
        h += diag(&bem.column(q)) * circ;
    }
    Ok(h)
}

/// `G = I − B(B^H B)⁻¹B^H`.
pub fn projection(bem: &BemConfig) -> ComplexMatrix {
    let q = bem.orthonormal();
    ComplexMatrix::identity(bem.len(), bem.len()) - q * q.adjoint()
}

/// Modeling error `e_{mod,l'} = G h_{l'}` statistics.
///
/// Every path shares the normalized Jakes correlation `J`, so the per-path
/// covariance is `σ_{l'}² G J G`.
#[derive(Debug, Clone)]
pub struct ModelingError {
    pub path_powers: Vec<f64>,
    /// `Tr(G J)`
    pub normalized_trace: f64,
    /// `G J G`
    pub normalized_covariance: HermitianPsd,
}

impl ModelingError {
    /// `Σ_{l'} Tr(G R_{h,l'})`.
    pub fn total(&self) -> f64 {
        self.path_powers.iter().sum::<f64>() * self.normalized_trace
    }

    pub fn path_trace(&self, path: usize) -> f64 {
        self.path_powers[path] * self.normalized_trace
    }

    /// `R_{e_mod,l'} = G R_{h,l'} G`.
    pub fn path_covariance(&self, path: usize) -> ComplexMatrix {
        self.normalized_covariance.matrix() * c64::new(self.path_powers[path], 0.0)
    }
}

pub fn modeling_error(bem: &BemConfig, profile: &ChannelProfile) -> Result<ModelingError> {
    let j = jakes_correlation(profile, bem.len());
    let q = bem.orthonormal();
    let jq = &j * q;
    let qjq = q.adjoint() * &jq;
    let trace_j = bem.len() as f64;
    let trace_qjq: f64 = (0..qjq.nrows()).map(|i| qjq[(i, i)].re).sum();
    let mut gjg = j - q * jq.adjoint() - &jq * q.adjoint() + q * qjq * q.adjoint();
    crate::lin::symmetrize(&mut gjg);
    Ok(ModelingError {
        path_powers: profile.path_powers.clone(),
        normalized_trace: (trace_j - trace_qjq).max(0.0),
        normalized_covariance: HermitianPsd::new(gjg)?,
    })
}

/// Permutation `P` taking basis-major `c` to path-major order:
/// `(P c)[l'·(Q_L+1) + q] = c[q·(L+1) + l']`.
pub fn stacking_permutation(order: usize, paths: usize) -> ComplexMatrix {
    let n = order * paths;
    let mut p = ComplexMatrix::zeros(n, n);
    for q in 0..order {
        for l in 0..paths {
            p[(l * order + q, q * paths + l)] = c64::new(1.0, 0.0);
        }
    }
    p
}

/// `Ω = (I_{L+1} ⊗ B)·P`, mapping `c` to path-major `h̄`.
pub fn omega(bem: &BemConfig, paths: usize) -> ComplexMatrix {
    let eye = ComplexMatrix::identity(paths, paths);
    eye.kronecker(&bem.basis) * stacking_permutation(bem.order(), paths)
}

/// `B ⊗ I_{L+1}`, mapping `c` to time-major `h`.
pub fn kron_basis(bem: &BemConfig, paths: usize) -> ComplexMatrix {
    bem.basis.kronecker(&ComplexMatrix::identity(paths, paths))
}

/// `Tr(Ω R Ω^H)` for a covariance over basis-major `c`, without forming `Ω`.
pub fn omega_trace(bem: &BemConfig, paths: usize, r: &ComplexMatrix) -> f64 {
    let gram = bem.gram();
    let order = bem.order();
    let mut acc = ZERO;
    for l in 0..paths {
        for q in 0..order {
            for p in 0..order {
                acc += r[(q * paths + l, p * paths + l)] * gram[(p, q)];
            }
        }
    }
    acc.re
}

/// Time-major stacking of a realization, `h[t·(L+1) + l']`.
pub fn stack_time_major(h: &ChannelRealization) -> Vec<c64> {
    h.gains.as_slice().to_vec()
}

/// Path-major stacking of a realization, `h̄[l'·NM + t]`.
pub fn stack_path_major(h: &ChannelRealization) -> Vec<c64> {
    h.gains.transpose().as_slice().to_vec()
}
