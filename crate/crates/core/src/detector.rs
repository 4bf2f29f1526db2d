//! Pilot cancellation, time-domain MMSE detection and the effective-channel BER.
//!
//! After the pilot is removed with the estimated channel,
//! `r̂ = √ξ Ĥ_t s_d + n`, and the detector is
//! `G_t = √ξ R_sd Ĥ_t^H (ξ Ĥ_t R_sd Ĥ_t^H + R_n)⁻¹`. The effective DD matrix
//! `T = √ξ F G_t H_t F^H` gives the per-symbol SINR `T_ii/(1−T_ii)`.

use libm::erfc;

use crate::bem::BemConfig;
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::estimator::{all_samples, shifted_hadamard, shifted_modeling, DdCovariance, EstimatorContext, MmseEstimator, PowerMap};
use crate::frame::{data_cells, ModulationSpec, OtfsParams, PilotConfig};
use crate::impairments::{Distortion, HardwareProfile};
use crate::lin::{c64, dd_forward, dd_inverse, dd_transform, trace_re, ComplexMatrix, HermitianPsd, SpdSolver, ZERO};

/// Clamp for the diagonal of `T` before forming `T/(1−T)`.
pub const SINR_EPS: f64 = 1e-9;

/// `r̂_o = r_o − √ξ Ĥ_t s_p`.
pub fn cancel_pilot(r_o: &[c64], h_hat: &ChannelRealization, s_p: &[c64], hw: &HardwareProfile) -> Result<Vec<c64>> {
    if r_o.len() != h_hat.len() || s_p.len() != h_hat.len() {
        return Err(Error::dim(format!(
            "received {}, pilot {}, channel {} samples",
            r_o.len(),
            s_p.len(),
            h_hat.len()
        )));
    }
    let g = hw.xi().sqrt();
    let hp = h_hat.apply_circular(s_p);
    Ok(r_o.iter().zip(hp).map(|(r, p)| r - p * g).collect())
}

/// Configuration-dependent detector pieces under the frame's power map.
#[derive(Debug, Clone)]
pub struct DetectorContext {
    pub params: OtfsParams,
    pub data_cells: Vec<usize>,
    pub power: PowerMap,
    /// `R_sd = F^H Φ_d F`
    pub data_cov: DdCovariance,
    /// `R_s = F^H Φ F`
    pub signal_cov: DdCovariance,
    /// `Σ_{l'} (Π^{l'} R_s Π^{l',H}) ⊙ R_{e_mod,l'}`
    pub modeling: ComplexMatrix,
    pub pilot_signal: Vec<c64>,
    pub paths: usize,
    r_sd_dense: ComplexMatrix,
    /// columns `F^H e_i` of the data cells
    data_waveforms: ComplexMatrix,
    /// `F^H A_p`
    pilot_response: ComplexMatrix,
    /// `E F`
    observation_rows: ComplexMatrix,
}

impl DetectorContext {
    pub fn new(params: &OtfsParams, pilot: &PilotConfig, estimator: &EstimatorContext) -> Result<Self> {
        pilot.validate(params)?;
        let modeling = &estimator.modeling;
        let nm = params.nm();
        let power = PowerMap::frame(params, pilot);
        let data_cov = DdCovariance::new(params, &power.data);
        let signal_cov = DdCovariance::new(params, &power.total());
        let all = all_samples(nm);
        let modeling_cov = shifted_modeling(&signal_cov, modeling, &all, &all);
        let cells = data_cells(params, pilot);
        let f = dd_transform(params.m, params.n)?;
        let mut data_waveforms = ComplexMatrix::zeros(nm, cells.len());
        for (j, &c) in cells.iter().enumerate() {
            for t in 0..nm {
                data_waveforms[(t, j)] = f[(c, t)].conj();
            }
        }
        let op = &estimator.operator;
        let mut pilot_response = ComplexMatrix::zeros(nm, op.a_p.ncols());
        for j in 0..op.a_p.ncols() {
            let col: Vec<c64> = op.a_p.column(j).iter().copied().collect();
            pilot_response
                .column_mut(j)
                .copy_from_slice(&dd_inverse(&col, params.m, params.n));
        }
        let observation_rows = ComplexMatrix::from_fn(op.observations(), nm, |i, t| f[(op.observation_index[i], t)]);
        Ok(DetectorContext {
            params: params.clone(),
            data_cells: cells,
            r_sd_dense: data_cov.dense(),
            power,
            data_cov,
            signal_cov,
            modeling: modeling_cov,
            pilot_signal: crate::frame::pilot_signal(params, pilot),
            paths: modeling.path_powers.len(),
            data_waveforms,
            pilot_response,
            observation_rows,
        })
    }

    /// Dense `R_sd`.
    pub fn data_covariance(&self) -> &ComplexMatrix {
        &self.r_sd_dense
    }

    pub fn data_symbols(&self) -> usize {
        self.data_cells.len()
    }
}

/// How the detector noise covariance treats the pilot-cancellation residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseModel {
    /// coefficient error independent of the receiver noise
    Independent,
    /// adds the negative correlation between the pilot residual and the
    /// white noise the estimate was fitted to
    #[default]
    PilotCorrelated,
}

/// `R_n = ξ C_err + ξ C_mod + σ² I`, with
/// `σ² = ξ_o σ_zi² Σσ² + σ_w² + σ_zo²`,
/// `C_err = Σ_{l,l'} (Π^l R_s Π^{l',H}) ⊙ (B R_c̃^{(l,l')} B^H)` for the
/// coefficient error and `C_mod` for the modeling error, both over the whole
/// frame.
///
/// The coefficient error contains `−√ξ D E F v`, where `v = √ξ e + u` is the
/// modeling error plus white receiver noise, so the pilot residual
/// `√ξ F^H A_p c̃` correlates with `v`. [`NoiseModel::PilotCorrelated`] adds
/// that cross term, `−ξ (F^H A_p D E F R_v + h.c.)` with
/// `R_v = ξ C_mod + σ² I`.
pub fn detector_noise_covariance(
    ctx: &DetectorContext,
    bem: &BemConfig,
    est: &MmseEstimator,
    dist: &Distortion,
    model: NoiseModel,
) -> Result<HermitianPsd> {
    let hw = &est.hw;
    let nm = ctx.params.nm();
    let all = all_samples(nm);
    let c_err = shifted_hadamard(&ctx.signal_cov, est.error_cov.matrix(), bem, ctx.paths, &all, &all);
    let mut r_n = (c_err + &ctx.modeling) * c64::new(hw.xi(), 0.0);
    let white = dist.white_variance(hw);
    for i in 0..nm {
        r_n[(i, i)] += c64::new(white, 0.0);
    }
    if model == NoiseModel::PilotCorrelated {
        // R_v = ξ C_mod + σ² I is the part of r the estimate absorbs besides c
        let mut r_v = &ctx.modeling * c64::new(hw.xi(), 0.0);
        for i in 0..nm {
            r_v[(i, i)] += c64::new(white, 0.0);
        }
        let cross = &ctx.pilot_response * &est.gain * (&ctx.observation_rows * r_v) * c64::new(hw.xi(), 0.0);
        r_n -= &cross + cross.adjoint();
    }
    crate::lin::symmetrize(&mut r_n);
    HermitianPsd::new(r_n)
}

/// Time-domain MMSE detector for one operating point.
#[derive(Debug, Clone)]
pub struct MmseDetector {
    pub hw: HardwareProfile,
    pub noise: HermitianPsd,
}

/// Per-frame detector output.
#[derive(Debug, Clone)]
pub struct Detection {
    /// `x̂_d` at the data cells
    pub symbols: Vec<c64>,
    /// `T_ii` against the true channel, data cells only
    pub t_diag: Vec<c64>,
    /// `T_ii` the receiver predicts from `Ĥ_t`
    pub t_diag_est: Vec<c64>,
}

impl MmseDetector {
    pub fn new(ctx: &DetectorContext, bem: &BemConfig, est: &MmseEstimator, dist: &Distortion) -> Result<Self> {
        Self::with_model(ctx, bem, est, dist, NoiseModel::default())
    }

    pub fn with_model(
        ctx: &DetectorContext,
        bem: &BemConfig,
        est: &MmseEstimator,
        dist: &Distortion,
        model: NoiseModel,
    ) -> Result<Self> {
        let noise = detector_noise_covariance(ctx, bem, est, dist, model)?;
        Ok(MmseDetector { hw: est.hw, noise })
    }

    pub fn with_noise(hw: HardwareProfile, noise: HermitianPsd) -> Self {
        MmseDetector { hw, noise }
    }

    /// `S = ξ Ĥ_t R_sd Ĥ_t^H + R_n`, factored.
    pub fn innovation(&self, ctx: &DetectorContext, h_hat: &ChannelRealization) -> Result<SpdSolver> {
        let hr = h_hat.mul_left(ctx.data_covariance());
        let mut s = h_hat.mul_right_adjoint(&hr) * c64::new(self.hw.xi(), 0.0) + self.noise.matrix();
        crate::lin::symmetrize(&mut s);
        let n = s.nrows();
        SpdSolver::new(&s, 1e-12 * trace_re(&s) / n as f64)
    }

    /// Dense `G_t`.
    pub fn detection_matrix(&self, ctx: &DetectorContext, h_hat: &ChannelRealization) -> Result<ComplexMatrix> {
        let solver = self.innovation(ctx, h_hat)?;
        // G_t = √ξ R_sd Ĥ^H S⁻¹ = √ξ (S⁻¹ Ĥ R_sd)^H
        let hr = h_hat.mul_left(ctx.data_covariance());
        Ok(solver.solve(&hr).adjoint() * c64::new(self.hw.xi().sqrt(), 0.0))
    }

    /// Detects the data symbols of `r̂` and evaluates `diag(T)` on the data
    /// cells for the true channel `h`.
    pub fn detect(
        &self,
        ctx: &DetectorContext,
        r_hat: &[c64],
        h_hat: &ChannelRealization,
        h: &ChannelRealization,
    ) -> Result<Detection> {
        let xi = self.hw.xi();
        let solver = self.innovation(ctx, h_hat)?;
        let v = solver.solve_vec(r_hat);
        let w = h_hat.apply_adjoint_circular(&v);
        let fw = dd_forward(&w, ctx.params.m, ctx.params.n);
        let g = xi.sqrt();
        let symbols = ctx
            .data_cells
            .iter()
            .map(|&i| fw[i] * (ctx.power.data[i] * g))
            .collect();

        // T_ii = ξ γ_i (Ĥ g_i)^H S⁻¹ (H g_i), through S = L L^H
        let u = solver.solve_lower(&h_hat.mul_left(&ctx.data_waveforms));
        let t = solver.solve_lower(&h.mul_left(&ctx.data_waveforms));
        let mut t_diag = Vec::with_capacity(ctx.data_symbols());
        let mut t_diag_est = Vec::with_capacity(ctx.data_symbols());
        for (j, &cell) in ctx.data_cells.iter().enumerate() {
            let scale = xi * ctx.power.data[cell];
            let uj = u.column(j);
            t_diag.push(uj.dotc(&t.column(j)) * scale);
            t_diag_est.push(c64::new(uj.norm_squared() * scale, 0.0));
        }
        Ok(Detection {
            symbols,
            t_diag,
            t_diag_est,
        })
    }
}

/// Dense `T = √ξ F G_t H_t F^H`.
pub fn effective_matrix_t(g_t: &ComplexMatrix, h: &ComplexMatrix, hw: &HardwareProfile, params: &OtfsParams) -> Result<ComplexMatrix> {
    let f = dd_transform(params.m, params.n)?;
    Ok(&f * g_t * h * f.adjoint() * c64::new(hw.xi().sqrt(), 0.0))
}

/// `Re T_ii` clamped to `(ε, 1−ε)`.
pub fn clamp_diagonal(t_ii: c64) -> f64 {
    t_ii.re.clamp(SINR_EPS, 1.0 - SINR_EPS)
}

/// `SINR_i = T_ii/(1 − T_ii)`.
pub fn sinr_per_symbol(t_diag: &[c64]) -> Vec<f64> {
    t_diag
        .iter()
        .map(|&t| {
            let x = clamp_diagonal(t);
            x / (1.0 - x)
        })
        .collect()
}

/// Gray-mapped square QAM bit error probability `a_M erfc(√(b_M γ))`.
pub fn qam_ber(modulation: &ModulationSpec, sinr: f64) -> f64 {
    modulation.a_m() * erfc((modulation.b_m() * sinr).sqrt())
}

/// Average BER over the data symbols and its Jensen lower bound, which uses
/// the mean of `T_ii` over the data cells in place of each `T_ii`.
///
/// The mean-T value is a true lower bound for 4-QAM only. For 16-QAM and
/// above the map `T ↦ BER` is not convex for mid-range `T`.
pub fn theoretical_ber(t_diag: &[c64], modulation: &ModulationSpec) -> (f64, f64) {
    if t_diag.is_empty() {
        return (0.0, 0.0);
    }
    let n = t_diag.len() as f64;
    let avg = sinr_per_symbol(t_diag).iter().map(|&s| qam_ber(modulation, s)).sum::<f64>() / n;
    let mean = t_diag.iter().map(|&t| clamp_diagonal(t)).sum::<f64>() / n;
    (avg, qam_ber(modulation, mean / (1.0 - mean)))
}

/// Hamming distance between two bit streams.
pub fn count_errors(tx: &[u8], rx: &[u8]) -> Result<usize> {
    if tx.len() != rx.len() {
        return Err(Error::Input(format!(
            "bit streams differ in length: {} vs {}",
            tx.len(),
            rx.len()
        )));
    }
    Ok(tx.iter().zip(rx).filter(|(a, b)| a != b).count())
}

/// Link metrics accumulated over frames.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkMetrics {
    pub bit_errors: u64,
    pub bits_total: u64,
    /// sum over frames of the per-frame theoretical average BER
    pub ber_theory_sum: f64,
    /// sum over frames of the per-frame bound
    pub ber_bound_sum: f64,
    pub frames: u64,
    /// largest `|Im T_ii| / Re T_ii` seen
    pub max_imag_ratio: f64,
}

impl LinkMetrics {
    pub fn add_frame(&mut self, errors: usize, bits: usize, t_diag: &[c64], modulation: &ModulationSpec) {
        let (avg, bound) = theoretical_ber(t_diag, modulation);
        self.bit_errors += errors as u64;
        self.bits_total += bits as u64;
        self.ber_theory_sum += avg;
        self.ber_bound_sum += bound;
        self.frames += 1;
        for t in t_diag {
            if t.re > 0.0 {
                self.max_imag_ratio = self.max_imag_ratio.max(t.im.abs() / t.re);
            }
        }
    }

    pub fn merge(&mut self, other: &LinkMetrics) {
        self.bit_errors += other.bit_errors;
        self.bits_total += other.bits_total;
        self.ber_theory_sum += other.ber_theory_sum;
        self.ber_bound_sum += other.ber_bound_sum;
        self.frames += other.frames;
        self.max_imag_ratio = self.max_imag_ratio.max(other.max_imag_ratio);
    }

    pub fn ber_sim(&self) -> f64 {
        if self.bits_total == 0 {
            return f64::NAN;
        }
        self.bit_errors as f64 / self.bits_total as f64
    }

    pub fn ber_theory_avg(&self) -> f64 {
        self.ber_theory_sum / self.frames as f64
    }

    pub fn ber_bound(&self) -> f64 {
        self.ber_bound_sum / self.frames as f64
    }

    /// Binomial standard error of `ber_sim`.
    pub fn standard_error(&self) -> f64 {
        let p = self.ber_sim();
        (p * (1.0 - p) / self.bits_total as f64).sqrt()
    }

    /// `SE ≤ ber_sim/3`, which needs at least nine errors.
    pub fn converged(&self) -> bool {
        self.bit_errors > 0 && self.standard_error() <= self.ber_sim() / 3.0
    }
}

/// Hard decisions with the per-symbol MMSE bias removed for multi-level
/// constellations; QPSK decisions are scale invariant and used as is.
pub fn decide(symbols: &[c64], t_diag_est: &[c64], modulation: &ModulationSpec) -> Vec<u8> {
    if modulation.order() == 4 {
        return modulation.demap(symbols);
    }
    let unbiased: Vec<c64> = symbols
        .iter()
        .zip(t_diag_est)
        .map(|(x, t)| if t.re > SINR_EPS { x / t.re } else { ZERO })
        .collect();
    modulation.demap(&unbiased)
}
