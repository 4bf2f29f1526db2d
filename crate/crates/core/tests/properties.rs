use ddlink::bem::{fit_coefficients, projection, reconstruct_channel, reconstruct_channel_operator, BemConfig};
use ddlink::channel::{apply_channel, channel_matrix, ChannelProfile, ChannelRealization};
use ddlink::detector::theoretical_ber;
use ddlink::estimator::{EstimatorContext, MmseEstimator};
use ddlink::frame::{add_cp, ModulationSpec, OtfsParams, PilotConfig};
use ddlink::impairments::HardwareProfile;
use ddlink::lin::{complex_normal, dd_transform, hermitian_defect, max_abs, trial_rng, unitarity_defect, ComplexVector};
use ddlink::{c64, ComplexMatrix};
use proptest::prelude::*;

fn params(m: usize, n: usize, cp: usize) -> OtfsParams {
    OtfsParams::new(m, n, 15e3, 4e9, cp, ModulationSpec::qam(4).unwrap()).unwrap()
}

fn random_channel(paths: usize, len: usize, seed: u64) -> ChannelRealization {
    let mut rng = trial_rng(seed, 1, 0);
    ChannelRealization::new(ComplexMatrix::from_fn(paths, len, |_, _| complex_normal(&mut rng, 1.0)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dd_transform_is_unitary(m in 1usize..12, n in 1usize..9) {
        let f = dd_transform(m, n).unwrap();
        prop_assert!(unitarity_defect(&f) <= 1e-12);
    }

    #[test]
    fn banded_channel_matches_dense(m in 2usize..8, n in 1usize..5, l in 0usize..2, seed in 0u64..1000) {
        let nm = m * n;
        let h = random_channel(l + 1, nm, seed);
        let mut rng = trial_rng(seed, 2, 0);
        let s: Vec<c64> = (0..nm).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let r = apply_channel(&h, &add_cp(&s, l), l).unwrap();
        let dense = channel_matrix(&h) * ComplexVector::from_column_slice(&s);
        for (a, b) in r.iter().zip(dense.iter()) {
            prop_assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn projector_is_idempotent_with_complement_rank(m in 4usize..9, n in 2usize..5, half in 0usize..2, r in 1usize..3) {
        let p = params(m, n, 1);
        let q = 2 * half;
        prop_assume!(q < m * n);
        let bem = BemConfig::new(&p, q, q, r).unwrap();
        let g = projection(&bem);
        prop_assert!(max_abs(&(&g * &g - &g)) <= 1e-10);
        prop_assert!(hermitian_defect(&g) <= 1e-12);
        let trace: f64 = (0..m * n).map(|i| g[(i, i)].re).sum();
        prop_assert!((trace - (m * n - q - 1) as f64).abs() <= 1e-9);
    }

    #[test]
    fn reconstruction_forms_agree(m in 4usize..9, n in 2usize..5, seed in 0u64..1000) {
        let p = params(m, n, 1);
        let bem = BemConfig::new(&p, 2, 2, 2).unwrap();
        let c = fit_coefficients(&random_channel(2, m * n, seed), &bem).unwrap();
        let direct = reconstruct_channel(&c, &bem);
        let operator = reconstruct_channel_operator(&c, &bem).unwrap();
        prop_assert!(max_abs(&(direct - operator)) <= 1e-12);
    }

    #[test]
    fn gray_mapping_round_trips(order_log in 1u32..4, seed in 0u64..1000) {
        use rand::Rng;
        let spec = ModulationSpec::qam(4usize.pow(order_log)).unwrap();
        let mut rng = trial_rng(seed, 3, 0);
        let bits: Vec<u8> = (0..spec.bits_per_symbol() * 40).map(|_| rng.random_range(0..2u8)).collect();
        let symbols = spec.map(&bits).unwrap();
        prop_assert_eq!(spec.demap(&symbols), bits);
        let energy: f64 = spec.points().iter().map(|z| z.norm_sqr()).sum::<f64>() / spec.order() as f64;
        prop_assert!((energy - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn jensen_bound_never_exceeds_average_for_qpsk(t in proptest::collection::vec(0.0f64..1.0, 1..40)) {
        // erfc(√(T/(1−T))) is convex on (0, 1); larger orders lose convexity
        // at moderate T and the mean-T value is then only an approximation
        let spec = ModulationSpec::qam(4).unwrap();
        let diag: Vec<c64> = t.iter().map(|&v| c64::new(v, 0.0)).collect();
        let (avg, bound) = theoretical_ber(&diag, &spec);
        prop_assert!(bound <= avg * (1.0 + 1e-12) + 1e-300);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn estimator_covariances_are_psd_and_selection_is_orthonormal(
        xi_i in 0.5f64..=1.0,
        xi_o in 0.5f64..=1.0,
        noise in 1e-4f64..2.0,
        f_max in 0.0f64..3000.0,
        pilot_power in 0.0f64..20.0,
    ) {
        let p = params(8, 6, 1);
        let mut pilot = PilotConfig::centered(&p, 1, 2, 2);
        pilot.pilot_power = pilot_power;
        let profile = ChannelProfile::new(vec![0.7, 0.3], f_max, 0.0, p.sample_interval()).unwrap();
        let bem = BemConfig::new(&p, 2, 2, 2).unwrap();
        let ctx = EstimatorContext::new(&p, &pilot, &bem, &profile).unwrap();
        let e = ctx.operator.selection_matrix(p.nm());
        let k = ctx.operator.observations();
        prop_assert!(max_abs(&(&e * e.adjoint() - ComplexMatrix::identity(k, k))) == 0.0);

        let hw = HardwareProfile::new(xi_i, xi_o, noise).unwrap();
        let est = MmseEstimator::new(&ctx, &hw).unwrap();
        for cov in [&est.noise.total, &est.error_cov, &ctx.prior] {
            prop_assert!(hermitian_defect(cov.matrix()) <= 1e-10);
            prop_assert!(cov.clipped().is_ok());
            let min = cov.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
            prop_assert!(min >= -1e-10 * cov.trace().max(1.0), "min eigenvalue {min}");
        }
        prop_assert!(est.mse.total() > 0.0 && est.mse.total().is_finite());
    }
}
