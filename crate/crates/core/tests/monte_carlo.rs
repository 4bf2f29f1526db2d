//! Sampling oracles for the closed-form covariances.

use ddlink::bem::{fit_coefficients, to_taps, BemConfig};
use ddlink::channel::{ChannelProfile, JakesSampler};
use ddlink::detector::{cancel_pilot, detector_noise_covariance, DetectorContext, MmseDetector, NoiseModel};
use ddlink::estimator::{EstimatorContext, MmseEstimator};
use ddlink::frame::{bits_per_frame, build_frame, demodulate, modulate, ModulationSpec, OtfsParams, PilotConfig};
use ddlink::impairments::{impair_transmit, receive_chain, HardwareProfile};
use ddlink::lin::{max_abs, trial_rng, ComplexVector};
use ddlink::{c64, ComplexMatrix};
use rand::Rng;

struct Tiny {
    params: OtfsParams,
    pilot: PilotConfig,
    bem: BemConfig,
    est_ctx: EstimatorContext,
    sampler: JakesSampler,
}

/// `M = 4`, `N = 2`, two paths, DC-only basis, Doppler strong enough for
/// visible modeling error and inter-Doppler leakage.
fn tiny() -> Tiny {
    let params = OtfsParams::new(4, 2, 1e4, 4e9, 1, ModulationSpec::qam(4).unwrap()).unwrap();
    let mut pilot = PilotConfig::centered(&params, 1, 0, 0);
    pilot.l_p = 1;
    pilot.k_p = 0;
    pilot.pilot_power = 3.0;
    let profile = ChannelProfile::new(vec![0.6, 0.4], 2500.0, 0.0, params.sample_interval()).unwrap();
    let bem = BemConfig::new(&params, 0, 0, 1).unwrap();
    let est_ctx = EstimatorContext::new(&params, &pilot, &bem, &profile).unwrap();
    Tiny {
        sampler: JakesSampler::new(&profile, params.nm()).unwrap(),
        params,
        pilot,
        bem,
        est_ctx,
    }
}

fn random_bits(t: &Tiny, rng: &mut impl Rng) -> Vec<u8> {
    (0..bits_per_frame(&t.params, &t.pilot)).map(|_| rng.random_range(0..2u8)).collect()
}

fn outer(acc: &mut ComplexMatrix, v: &[c64]) {
    let v = ComplexVector::from_column_slice(v);
    *acc += &v * v.adjoint();
}

fn relative_gap(empirical: &ComplexMatrix, theory: &ComplexMatrix) -> f64 {
    max_abs(&(empirical - theory)) / max_abs(theory)
}

const TRIALS: u64 = 10_000;

#[test]
fn observation_noise_covariance_matches_sampling() {
    let t = tiny();
    let hw = HardwareProfile::new(0.9, 0.8, 0.1).unwrap();
    let dist = t.est_ctx.distortion(&hw);
    let est = MmseEstimator::new(&t.est_ctx, &hw).unwrap();
    let g = hw.xi().sqrt();
    let k = t.est_ctx.operator.observations();
    let mut acc = ComplexMatrix::zeros(k, k);
    for trial in 0..TRIALS {
        let mut rng = trial_rng(101, 0, trial);
        let frame = build_frame(&t.params, &t.pilot, &random_bits(&t, &mut rng)).unwrap();
        let s = modulate(&frame, &t.params).unwrap();
        let h = t.sampler.sample(&mut rng);
        let s_i = impair_transmit(&s, &hw, &dist, &mut rng);
        let r = receive_chain(&s_i, &h, &hw, &dist, &mut rng).unwrap();
        let y_o = t.est_ctx.operator.select(&demodulate(&r, &t.params).unwrap());
        let c = ComplexVector::from_vec(fit_coefficients(&h, &t.bem).unwrap().stacked());
        let model = &t.est_ctx.observed * c * c64::new(g, 0.0);
        let z: Vec<c64> = y_o.iter().zip(model.iter()).map(|(a, b)| a - b).collect();
        outer(&mut acc, &z);
    }
    let empirical = acc / c64::new(TRIALS as f64, 0.0);
    let theory = est.noise.total.matrix();
    let gap = relative_gap(&empirical, theory);
    assert!(gap < 0.10, "R_z sampling gap {gap:.4}");
    // modeling error reaches the observation cells on this instance
    assert!(max_abs(&est.noise.modeling) > 0.01 * max_abs(theory));
}

#[test]
fn coefficient_error_covariance_matches_sampling() {
    let t = tiny();
    let hw = HardwareProfile::new(0.95, 0.9, 0.05).unwrap();
    let dist = t.est_ctx.distortion(&hw);
    let est = MmseEstimator::new(&t.est_ctx, &hw).unwrap();
    let n = t.est_ctx.coefficients();
    let mut acc = ComplexMatrix::zeros(n, n);
    let mut prior = ComplexMatrix::zeros(n, n);
    for trial in 0..TRIALS {
        let mut rng = trial_rng(102, 0, trial);
        let frame = build_frame(&t.params, &t.pilot, &random_bits(&t, &mut rng)).unwrap();
        let s = modulate(&frame, &t.params).unwrap();
        let h = t.sampler.sample(&mut rng);
        let s_i = impair_transmit(&s, &hw, &dist, &mut rng);
        let r = receive_chain(&s_i, &h, &hw, &dist, &mut rng).unwrap();
        let c_hat = est.estimate(&demodulate(&r, &t.params).unwrap()).unwrap().stacked();
        let c = fit_coefficients(&h, &t.bem).unwrap().stacked();
        let e: Vec<c64> = c.iter().zip(&c_hat).map(|(a, b)| a - b).collect();
        outer(&mut acc, &e);
        outer(&mut prior, &c);
    }
    let scale = c64::new(TRIALS as f64, 0.0);
    let gap = relative_gap(&(acc / scale), est.error_cov.matrix());
    assert!(gap < 0.10, "R_c-tilde sampling gap {gap:.4}");
    let gap = relative_gap(&(prior / scale), t.est_ctx.prior.matrix());
    assert!(gap < 0.05, "R_c sampling gap {gap:.4}");
}

#[test]
fn modeling_error_energy_matches_sampling() {
    let t = tiny();
    let mut energy = 0.0;
    for trial in 0..TRIALS {
        let mut rng = trial_rng(103, 0, trial);
        let h = t.sampler.sample(&mut rng);
        let fit = to_taps(&fit_coefficients(&h, &t.bem).unwrap(), &t.bem);
        energy += (&h.gains - &fit.gains).norm_squared();
    }
    let empirical = energy / TRIALS as f64;
    let theory = t.est_ctx.modeling.total();
    assert!(((empirical - theory) / theory).abs() < 0.05, "{empirical} vs {theory}");
}

struct DetectorRun {
    /// `E n n^H` with `n = r̂ − √ξ Ĥ s_d`
    noise_cov: ComplexMatrix,
    theory: ComplexMatrix,
    literal: ComplexMatrix,
    /// pooled `Σ T_ii²`, `Σ |x̂_i − T_ii x_i|²`, `Σ T_ii (1 − T_ii)`
    signal: f64,
    residual: f64,
    predicted: f64,
}

fn run_detector(seed: u64, hw: HardwareProfile) -> DetectorRun {
    let t = tiny();
    let dist = t.est_ctx.distortion(&hw);
    let est = MmseEstimator::new(&t.est_ctx, &hw).unwrap();
    let det_ctx = DetectorContext::new(&t.params, &t.pilot, &t.est_ctx).unwrap();
    let det = MmseDetector::new(&det_ctx, &t.bem, &est, &dist).unwrap();
    let g = hw.xi().sqrt();
    let nm = t.params.nm();
    let mut acc = ComplexMatrix::zeros(nm, nm);
    let (mut signal, mut residual, mut predicted) = (0.0, 0.0, 0.0);
    for trial in 0..TRIALS {
        let mut rng = trial_rng(seed, 0, trial);
        let frame = build_frame(&t.params, &t.pilot, &random_bits(&t, &mut rng)).unwrap();
        let s = modulate(&frame, &t.params).unwrap();
        let h = t.sampler.sample(&mut rng);
        let s_i = impair_transmit(&s, &hw, &dist, &mut rng);
        let r = receive_chain(&s_i, &h, &hw, &dist, &mut rng).unwrap();
        let c_hat = est.estimate(&demodulate(&r, &t.params).unwrap()).unwrap();
        let h_hat = to_taps(&c_hat, &t.bem);
        let r_hat = cancel_pilot(&r, &h_hat, &det_ctx.pilot_signal, &hw).unwrap();

        let x = frame.to_vec();
        let mut x_d = vec![c64::new(0.0, 0.0); nm];
        for &cell in &det_ctx.data_cells {
            x_d[cell] = x[cell];
        }
        let s_d = ddlink::lin::dd_inverse(&x_d, t.params.m, t.params.n);
        let hs: Vec<c64> = h_hat.apply_circular(&s_d);
        let n: Vec<c64> = r_hat.iter().zip(&hs).map(|(a, b)| a - b * g).collect();
        outer(&mut acc, &n);

        let d = det.detect(&det_ctx, &r_hat, &h_hat, &h).unwrap();
        for (j, &cell) in det_ctx.data_cells.iter().enumerate() {
            let tii = d.t_diag[j].re;
            signal += tii * tii;
            residual += (d.symbols[j] - d.t_diag[j] * x[cell]).norm_sqr();
            predicted += tii * (1.0 - tii);
        }
    }
    DetectorRun {
        noise_cov: acc / c64::new(TRIALS as f64, 0.0),
        theory: det.noise.matrix().clone(),
        literal: detector_noise_covariance(&det_ctx, &t.bem, &est, &dist, NoiseModel::Independent)
            .unwrap()
            .into_matrix(),
        signal,
        residual,
        predicted,
    }
}

#[test]
fn detector_noise_covariance_matches_sampling() {
    let run = run_detector(104, HardwareProfile::new(0.9, 0.9, 0.1).unwrap());
    let gap = relative_gap(&run.noise_cov, &run.theory);
    assert!(gap < 0.15, "R_n sampling gap {gap:.4}");
    // without the pilot-residual cross term the pilot-bearing samples are
    // overstated well beyond the sampling tolerance
    let literal = relative_gap(&run.noise_cov, &run.literal);
    assert!(literal > 0.3 && literal > 2.0 * gap, "literal {literal:.4} vs corrected {gap:.4}");
}

#[test]
fn per_symbol_sinr_matches_sampling() {
    let run = run_detector(105, HardwareProfile::new(0.9, 0.9, 0.1).unwrap());
    let empirical = run.signal / run.residual;
    let theory = run.signal / run.predicted;
    assert!(((empirical - theory) / theory).abs() < 0.15, "SINR {empirical} vs {theory}");
}
