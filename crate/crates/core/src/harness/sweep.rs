use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::bem::{to_taps, BemConfig};
use crate::channel::JakesSampler;
use crate::detector::{cancel_pilot, count_errors, decide, DetectorContext, LinkMetrics, MmseDetector};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorContext, MmseEstimator};
use crate::frame::{bits_per_frame, build_frame, demodulate, modulate, OtfsParams, PilotConfig};
use crate::impairments::{impair_transmit, receive_chain, Distortion, HardwareProfile};
use crate::lin::trial_rng;

use super::config::{Mode, SweepConfig};

/// Which quantity a sweep targets; BER sweeps also report MSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Mse,
    Ber,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Mse => "mse",
            SweepKind::Ber => "ber",
        }
    }

    pub fn for_mode(mode: Mode) -> Vec<SweepKind> {
        match mode {
            Mode::Mse => vec![SweepKind::Mse],
            Mode::Ber => vec![SweepKind::Ber],
            Mode::Both => vec![SweepKind::Mse, SweepKind::Ber],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    NotConverged,
    Failed(String),
}

/// One grid cell's results.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub snr_db: f64,
    pub xi_i: f64,
    pub xi_o: f64,
    pub mse_sim: f64,
    pub mse_theory: f64,
    pub ber_sim: f64,
    pub ber_theory_avg: f64,
    pub ber_bound: f64,
    pub trials: usize,
    pub bit_errors: u64,
    pub elapsed_s: f64,
    pub status: CellStatus,
}

impl ResultRow {
    fn failed(snr_db: f64, xi: (f64, f64), message: String) -> Self {
        ResultRow {
            snr_db,
            xi_i: xi.0,
            xi_o: xi.1,
            mse_sim: f64::NAN,
            mse_theory: f64::NAN,
            ber_sim: f64::NAN,
            ber_theory_avg: f64::NAN,
            ber_bound: f64::NAN,
            trials: 0,
            bit_errors: 0,
            elapsed_s: 0.0,
            status: CellStatus::Failed(message),
        }
    }
}

/// Configuration-level state shared by every cell.
pub struct SweepContext {
    pub params: OtfsParams,
    pub pilot: PilotConfig,
    pub bem: BemConfig,
    pub estimator: EstimatorContext,
    pub sampler: JakesSampler,
    detector: Option<DetectorContext>,
}

impl SweepContext {
    pub fn new(cfg: &SweepConfig, with_detector: bool) -> Result<Self> {
        let bem = BemConfig::new(&cfg.params, cfg.pilot.q_l, cfg.pilot.q_s, cfg.resolution)?;
        let estimator = EstimatorContext::new(&cfg.params, &cfg.pilot, &bem, &cfg.profile)?;
        let detector = if with_detector {
            Some(DetectorContext::new(&cfg.params, &cfg.pilot, &estimator)?)
        } else {
            None
        };
        Ok(SweepContext {
            sampler: JakesSampler::new(&cfg.profile, cfg.params.nm())?,
            params: cfg.params.clone(),
            pilot: cfg.pilot.clone(),
            bem,
            estimator,
            detector,
        })
    }

    pub fn detector(&self) -> Option<&DetectorContext> {
        self.detector.as_ref()
    }
}

/// Per-cell receiver state.
pub struct CellPlan {
    pub hw: HardwareProfile,
    pub distortion: Distortion,
    pub estimator: MmseEstimator,
    pub detector: Option<MmseDetector>,
}

impl CellPlan {
    pub fn new(ctx: &SweepContext, hw: HardwareProfile) -> Result<Self> {
        let distortion = ctx.estimator.distortion(&hw);
        let estimator = MmseEstimator::new(&ctx.estimator, &hw)?;
        let detector = match ctx.detector() {
            Some(d) => Some(MmseDetector::new(d, &ctx.bem, &estimator, &distortion)?),
            None => None,
        };
        Ok(CellPlan {
            hw,
            distortion,
            estimator,
            detector,
        })
    }
}

/// Outcome of one frame.
#[derive(Debug, Clone, Default)]
pub struct TrialOutcome {
    /// `‖h − ĥ‖²/(NM(L+1))`
    pub mse: f64,
    pub link: LinkMetrics,
}

/// Runs one frame through transmitter, channel, estimator and, when the plan
/// has a detector, the detector.
///
/// Draw order: data bits, channel, transmit distortion, AWGN, receive
/// distortion.
pub fn run_trial<R: Rng + ?Sized>(ctx: &SweepContext, plan: &CellPlan, rng: &mut R) -> Result<TrialOutcome> {
    let bits: Vec<u8> = (0..bits_per_frame(&ctx.params, &ctx.pilot))
        .map(|_| rng.random_range(0..2u8))
        .collect();
    let frame = build_frame(&ctx.params, &ctx.pilot, &bits)?;
    let s = modulate(&frame, &ctx.params)?;
    let h = ctx.sampler.sample(rng);
    let s_i = impair_transmit(&s, &plan.hw, &plan.distortion, rng);
    let r = receive_chain(&s_i, &h, &plan.hw, &plan.distortion, rng)?;
    let y = demodulate(&r, &ctx.params)?;
    let c_hat = plan.estimator.estimate(&y)?;
    let h_hat = to_taps(&c_hat, &ctx.bem);
    let err = (&h.gains - &h_hat.gains).norm_squared();
    let mut out = TrialOutcome {
        mse: err / ctx.estimator.mse_normalizer(),
        link: LinkMetrics::default(),
    };
    if let (Some(det_ctx), Some(det)) = (ctx.detector(), &plan.detector) {
        let r_hat = cancel_pilot(&r, &h_hat, &det_ctx.pilot_signal, &plan.hw)?;
        let d = det.detect(det_ctx, &r_hat, &h_hat, &h)?;
        let rx = decide(&d.symbols, &d.t_diag_est, &ctx.params.modulation);
        let errors = count_errors(&bits, &rx)?;
        out.link.add_frame(errors, bits.len(), &d.t_diag, &ctx.params.modulation);
    }
    Ok(out)
}

/// Runs `trials` frames of one cell in parallel and reduces them in trial
/// order, so the result does not depend on scheduling.
pub fn run_cell(ctx: &SweepContext, plan: &CellPlan, seed: u64, stream: u64, trials: usize) -> Result<(f64, LinkMetrics)> {
    let outcomes: Vec<Result<TrialOutcome>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, stream, t);
            run_trial(ctx, plan, &mut rng)
        })
        .collect();
    let mut mse_sum = 0.0;
    let mut link = LinkMetrics::default();
    for o in outcomes {
        let o = o?;
        mse_sum += o.mse;
        link.merge(&o.link);
    }
    Ok((mse_sum / trials as f64, link))
}

/// Sweeps every `(ξ_i, ξ_o)` pair over the SNR grid. Rows are ordered by
/// pair, then SNR.
///
/// Trial `t` at SNR index `j` draws from stream `(seed, j, t)` for every
/// pair, so hardware comparisons at a given SNR are paired.
pub fn run_sweep(cfg: &SweepConfig, kind: SweepKind) -> Result<Vec<ResultRow>> {
    let ctx = SweepContext::new(cfg, kind == SweepKind::Ber)?;
    run_sweep_with(cfg, &ctx, kind)
}

pub fn run_sweep_with(cfg: &SweepConfig, ctx: &SweepContext, kind: SweepKind) -> Result<Vec<ResultRow>> {
    if kind == SweepKind::Ber && ctx.detector().is_none() {
        return Err(Error::Input("BER sweep needs a detector context".into()));
    }
    let trials = match kind {
        SweepKind::Mse => cfg.mse_trials,
        SweepKind::Ber => cfg.ber_frames(),
    };
    let mut rows = Vec::with_capacity(cfg.xi_grid.len() * cfg.snr_grid.len());
    for &xi in &cfg.xi_grid {
        for (j, &snr) in cfg.snr_grid.iter().enumerate() {
            let start = Instant::now();
            let row = HardwareProfile::from_snr_db(xi.0, xi.1, snr, cfg.pilot.data_power)
                .and_then(|hw| CellPlan::new(ctx, hw))
                .and_then(|plan| {
                    let (mse_sim, link) = run_cell(ctx, &plan, cfg.seed, j as u64, trials)?;
                    Ok(summarize(kind, snr, xi, mse_sim, plan.estimator.mse.total(), &link, trials))
                });
            let mut row = row.unwrap_or_else(|e| ResultRow::failed(snr, xi, e.to_string()));
            row.elapsed_s = if cfg.timing { start.elapsed().as_secs_f64() } else { 0.0 };
            rows.push(row);
        }
    }
    Ok(rows)
}

fn summarize(
    kind: SweepKind,
    snr_db: f64,
    xi: (f64, f64),
    mse_sim: f64,
    mse_theory: f64,
    link: &LinkMetrics,
    trials: usize,
) -> ResultRow {
    let mut row = ResultRow {
        snr_db,
        xi_i: xi.0,
        xi_o: xi.1,
        mse_sim,
        mse_theory,
        ber_sim: f64::NAN,
        ber_theory_avg: f64::NAN,
        ber_bound: f64::NAN,
        trials,
        bit_errors: 0,
        elapsed_s: 0.0,
        status: CellStatus::Ok,
    };
    if kind == SweepKind::Ber {
        row.ber_sim = link.ber_sim();
        row.ber_theory_avg = link.ber_theory_avg();
        row.ber_bound = link.ber_bound();
        row.bit_errors = link.bit_errors;
        if !link.converged() {
            row.status = CellStatus::NotConverged;
        }
    }
    row
}

/// Runs `f` on a pool of `threads` workers, or the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Input(format!("cannot start {t} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
