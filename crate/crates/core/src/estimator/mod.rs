//! MMSE estimation of BEM coefficients from the embedded pilot.
//!
//! With `ξ = ξ_o ξ_i`, the observation region of the DD frame obeys
//! `E y = √ξ E A_p c + E z`. The estimator is the Wiener filter
//! `ĉ = √ξ D E y`, `D = R_c A^H (ξ A R_c A^H + R_z)⁻¹` with `A = E A_p`, and
//! its error covariance is `K R_c K^H + ξ D R_z D^H`, `K = I − ξ D A`.
//!
//! `R_z` collects data interference through the BEM part of the channel,
//! the modeling error acting on the whole frame, transmitter distortion
//! passed through the channel, and white receiver noise and distortion.

mod covariance;
mod operator;

pub use covariance::{all_samples, shifted_hadamard, shifted_modeling, DdCovariance, PowerMap};
pub use operator::{basis_operator, pilot_block, PilotOperator};

use std::f64::consts::PI;

use crate::bem::{modeling_error, omega_trace, BemCoefficients, BemConfig, ModelingError};
use crate::channel::{jakes_correlation, ChannelProfile};
use crate::error::{Error, Result};
use crate::frame::{OtfsParams, PilotConfig};
use crate::impairments::{Distortion, HardwareProfile};
use crate::lin::{c64, dd_transform, trace_re, ComplexMatrix, HermitianPsd, SpdSolver, ZERO};

/// `R_c = (B ⊗ I)† R_hh (B ⊗ I)†^H`.
///
/// Paths are uncorrelated and share the normalized Jakes correlation `J`, so
/// `R_c[(q,l'),(p,l'')] = δ_{l'l''} σ_{l'}² (B† J B†^H)[q,p]`.
pub fn coefficient_prior(bem: &BemConfig, profile: &ChannelProfile) -> Result<HermitianPsd> {
    let j = jakes_correlation(profile, bem.len());
    let pinv = bem.pinv();
    let block = pinv * j * pinv.adjoint();
    let paths = profile.paths();
    let order = bem.order();
    let mut r = ComplexMatrix::zeros(order * paths, order * paths);
    for (l, &power) in profile.path_powers.iter().enumerate() {
        for q in 0..order {
            for p in 0..order {
                r[(q * paths + l, p * paths + l)] = block[(q, p)] * power;
            }
        }
    }
    HermitianPsd::new(r)
}

/// Configuration-dependent pieces of the estimator, independent of SNR and
/// hardware quality. Built once and shared across trials.
#[derive(Debug, Clone)]
pub struct EstimatorContext {
    pub params: OtfsParams,
    pub paths: usize,
    pub order: usize,
    pub operator: PilotOperator,
    /// `E A_p`
    pub observed: ComplexMatrix,
    /// `R_c`
    pub prior: HermitianPsd,
    pub modeling: ModelingError,
    /// data power map driving the interference term
    pub interference_map: PowerMap,
    /// `E|s|²` of the transmitted frame
    pub signal_power: f64,
    /// `Σ σ_{l'}²`
    pub channel_gain: f64,
    /// `E F X F^H E^H` with `X` the data interference covariance
    pub interference_obs: ComplexMatrix,
    /// `E F M F^H E^H` with `M` the modeling-noise covariance
    pub modeling_obs: ComplexMatrix,
    gram: ComplexMatrix,
    frame_samples: usize,
}

impl EstimatorContext {
    /// Context with the zero-region interference map.
    pub fn new(params: &OtfsParams, pilot: &PilotConfig, bem: &BemConfig, profile: &ChannelProfile) -> Result<Self> {
        EstimatorContext::with_map(params, pilot, bem, profile, PowerMap::zero_region(params, pilot))
    }

    pub fn with_map(
        params: &OtfsParams,
        pilot: &PilotConfig,
        bem: &BemConfig,
        profile: &ChannelProfile,
        interference_map: PowerMap,
    ) -> Result<Self> {
        pilot.validate(params)?;
        profile.check_fits(params)?;
        let paths = profile.paths();
        if pilot.delay_spread != profile.max_delay {
            return Err(Error::config(
                "pilot.l",
                format!(
                    "guard delay half-width {} differs from channel delay spread {}",
                    pilot.delay_spread, profile.max_delay
                ),
            ));
        }
        let operator = PilotOperator::new(params, pilot, bem, paths)?;
        let observed = operator.observed();
        let prior = coefficient_prior(bem, profile)?;
        let modeling = modeling_error(bem, profile)?;
        let signal_power = PowerMap::frame(params, pilot).signal_power();

        // time samples feeding the observed delay bins, ordered (m − l_p)·N + n
        let mut samples = Vec::with_capacity(paths * params.n);
        for m in pilot.l_p..pilot.l_p + paths {
            for n in 0..params.n {
                samples.push(n * params.m + m);
            }
        }
        let w = observed_rows(params, &operator, pilot.l_p);
        let data_cov = DdCovariance::new(params, &interference_map.data);
        let signal_cov = DdCovariance::new(params, &interference_map.total());
        let x = shifted_hadamard(&data_cov, prior.matrix(), bem, paths, &samples, &samples);
        let m = shifted_modeling(&signal_cov, &modeling, &samples, &samples);
        let interference_obs = &w * x * w.adjoint();
        let modeling_obs = &w * m * w.adjoint();

        Ok(EstimatorContext {
            params: params.clone(),
            paths,
            order: bem.order(),
            operator,
            observed,
            prior,
            modeling,
            interference_map,
            signal_power,
            channel_gain: profile.total_power(),
            interference_obs,
            modeling_obs,
            gram: bem.gram(),
            frame_samples: params.nm(),
        })
    }

    pub fn coefficients(&self) -> usize {
        self.order * self.paths
    }

    pub fn distortion(&self, hw: &HardwareProfile) -> Distortion {
        hw.distortion(self.signal_power, self.channel_gain)
    }

    /// `Tr(Ω R Ω^H)` for a coefficient covariance `R`.
    pub fn channel_energy(&self, r: &ComplexMatrix) -> f64 {
        let order = self.order;
        let paths = self.paths;
        let mut acc = ZERO;
        for l in 0..paths {
            for q in 0..order {
                for p in 0..order {
                    acc += r[(q * paths + l, p * paths + l)] * self.gram[(p, q)];
                }
            }
        }
        acc.re
    }

    /// `MN(L+1)`, the MSE normalization.
    pub fn mse_normalizer(&self) -> f64 {
        (self.frame_samples * self.paths) as f64
    }
}

/// Rows of `E F` restricted to the samples feeding the observed delay bins.
fn observed_rows(params: &OtfsParams, op: &PilotOperator, l_p: usize) -> ComplexMatrix {
    let n = params.n;
    let scale = 1.0 / (n as f64).sqrt();
    let mut w = ComplexMatrix::zeros(op.observations(), op.paths * n);
    for (i, &(l, k)) in op.observation_cells.iter().enumerate() {
        for t in 0..n {
            let phase = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
            w[(i, (l - l_p) * n + t)] = c64::from_polar(scale, phase);
        }
    }
    w
}

/// Full DD-domain data interference covariance `F X F^H` (before `ξ`).
pub fn interference_covariance(ctx: &EstimatorContext, bem: &BemConfig) -> Result<ComplexMatrix> {
    let nm = ctx.params.nm();
    let all = all_samples(nm);
    let cov = DdCovariance::new(&ctx.params, &ctx.interference_map.data);
    let x = shifted_hadamard(&cov, ctx.prior.matrix(), bem, ctx.paths, &all, &all);
    let f = dd_transform(ctx.params.m, ctx.params.n)?;
    Ok(&f * x * f.adjoint())
}

/// Full DD-domain modeling-noise covariance `F M F^H` (before `ξ`).
pub fn modeling_noise_covariance(ctx: &EstimatorContext) -> Result<ComplexMatrix> {
    let nm = ctx.params.nm();
    let all = all_samples(nm);
    let cov = DdCovariance::new(&ctx.params, &ctx.interference_map.total());
    let m = shifted_modeling(&cov, &ctx.modeling, &all, &all);
    let f = dd_transform(ctx.params.m, ctx.params.n)?;
    Ok(&f * m * f.adjoint())
}

/// `R_z` and its three addends.
#[derive(Debug, Clone)]
pub struct NoiseCovariance {
    /// `ξ E F X F^H E^H`
    pub interference: ComplexMatrix,
    /// `ξ E F M F^H E^H`
    pub modeling: ComplexMatrix,
    /// `ξ_o σ_zi² Σσ² + σ_w² + σ_zo²`
    pub white: f64,
    pub total: HermitianPsd,
}

pub fn noise_covariance_rz(ctx: &EstimatorContext, hw: &HardwareProfile) -> Result<NoiseCovariance> {
    let xi = c64::new(hw.xi(), 0.0);
    let interference = &ctx.interference_obs * xi;
    let modeling = &ctx.modeling_obs * xi;
    let white = ctx.distortion(hw).white_variance(hw);
    let mut total = &interference + &modeling;
    for i in 0..total.nrows() {
        total[(i, i)] += c64::new(white, 0.0);
    }
    Ok(NoiseCovariance {
        interference,
        modeling,
        white,
        total: HermitianPsd::new(total)?,
    })
}

/// Closed-form channel MSE and its two addends, each normalized by `MN(L+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseBreakdown {
    /// `Tr(Ω R_c̃ Ω^H)/(MN(L+1))`
    pub estimation: f64,
    /// `Σ Tr(G R_{h,l'})/(MN(L+1))`
    pub modeling: f64,
}

impl MseBreakdown {
    pub fn total(&self) -> f64 {
        self.estimation + self.modeling
    }
}

/// Linear MMSE estimator for one hardware/SNR operating point.
#[derive(Debug, Clone)]
pub struct MmseEstimator {
    pub hw: HardwareProfile,
    pub noise: NoiseCovariance,
    /// `D`
    pub gain: ComplexMatrix,
    /// `K = I − ξ D E A_p`
    pub k: ComplexMatrix,
    /// `R_c̃`
    pub error_cov: HermitianPsd,
    pub mse: MseBreakdown,
    /// diagonal loading applied to the innovation covariance
    pub ridge: f64,
    observation_index: Vec<usize>,
    order: usize,
    paths: usize,
}

impl MmseEstimator {
    pub fn new(ctx: &EstimatorContext, hw: &HardwareProfile) -> Result<Self> {
        let xi = hw.xi();
        let noise = noise_covariance_rz(ctx, hw)?;
        let a = &ctx.observed;
        let r_c = ctx.prior.matrix();
        let ar = a * r_c;
        let mut s = &ar * a.adjoint() * c64::new(xi, 0.0) + noise.total.matrix();
        crate::lin::symmetrize(&mut s);
        let n = s.nrows();
        let solver = SpdSolver::new(&s, 1e-12 * trace_re(&s) / n as f64)?;
        // D = R_c A^H S⁻¹ = (S⁻¹ A R_c)^H
        let gain = solver.solve(&ar).adjoint();
        let dim = ctx.coefficients();
        let k = ComplexMatrix::identity(dim, dim) - &gain * a * c64::new(xi, 0.0);
        let mut r_ct = &k * r_c * k.adjoint() + &gain * noise.total.matrix() * gain.adjoint() * c64::new(xi, 0.0);
        crate::lin::symmetrize(&mut r_ct);
        let error_cov = HermitianPsd::new(r_ct)?;
        let norm = ctx.mse_normalizer();
        let mse = MseBreakdown {
            estimation: ctx.channel_energy(error_cov.matrix()) / norm,
            modeling: ctx.modeling.total() / norm,
        };
        Ok(MmseEstimator {
            hw: *hw,
            noise,
            gain,
            k,
            error_cov,
            mse,
            ridge: solver.ridge(),
            observation_index: ctx.operator.observation_index.clone(),
            order: ctx.order,
            paths: ctx.paths,
        })
    }

    /// `ĉ = √ξ D E y` from the full DD observation `y`.
    pub fn estimate(&self, y: &[c64]) -> Result<BemCoefficients> {
        let y_o: Vec<c64> = self.observation_index.iter().map(|&i| y[i]).collect();
        self.estimate_observed(&y_o)
    }

    /// `ĉ = √ξ D y_o` from the already-selected observation `y_o = E y`.
    pub fn estimate_observed(&self, y_o: &[c64]) -> Result<BemCoefficients> {
        if y_o.len() != self.gain.ncols() {
            return Err(Error::dim(format!(
                "observation has {} entries, expected {}",
                y_o.len(),
                self.gain.ncols()
            )));
        }
        let v = &self.gain * nalgebra::DVector::from_column_slice(y_o) * c64::new(self.hw.xi().sqrt(), 0.0);
        BemCoefficients::from_stacked(self.order, self.paths, v.as_slice())
    }

    /// `R_c − ξ D E A_p R_c`, the Gaussian posterior form of `R_c̃`.
    pub fn posterior_covariance(&self, ctx: &EstimatorContext) -> ComplexMatrix {
        let r_c = ctx.prior.matrix();
        r_c - &self.gain * &ctx.observed * r_c * c64::new(self.hw.xi(), 0.0)
    }
}

/// `MSE = (Tr(Ω R_c̃ Ω^H) + Σ Tr(G R_{h,l'}))/(MN(L+1))` for a given `R_c̃`.
pub fn theoretical_mse(ctx: &EstimatorContext, bem: &BemConfig, error_cov: &ComplexMatrix) -> MseBreakdown {
    let norm = ctx.mse_normalizer();
    MseBreakdown {
        estimation: omega_trace(bem, ctx.paths, error_cov) / norm,
        modeling: ctx.modeling.total() / norm,
    }
}
