use gsverify_core::cv::{
    cv_deviation_model, pass_probability, prepare_cv_graph_state, residual_moments, run_cv_stabilizer_test,
    CvBackend, CvModel, NoiseModel,
};
use gsverify_core::graph::{build_nullifiers, WeightedHypergraph};
use gsverify_core::rng::{stream, Purpose};
use proptest::prelude::*;

fn weighted_square() -> WeightedHypergraph {
    WeightedHypergraph::new(
        4,
        vec![vec![1, 2], vec![2, 3], vec![3, 4], vec![1, 4], vec![1, 3]],
        vec![1.0, -0.5, 2.0, 0.75, 1.25],
    )
    .unwrap()
}

fn sample_moments(model: &CvModel, vertex: usize, tau: f64, samples: usize, seed: u64) -> (f64, f64, f64) {
    let spec = &model.nullifiers()[vertex - 1];
    let mut rng = stream(seed, vertex as u64, Purpose::Physics);
    let (mut sum, mut sq, mut passed) = (0.0, 0.0, 0usize);
    for _ in 0..samples {
        let out = run_cv_stabilizer_test(&mut model.register(), spec, tau, &mut rng).unwrap();
        sum += out.residual;
        sq += out.residual * out.residual;
        passed += out.passed as usize;
    }
    let mean = sum / samples as f64;
    (mean, sq / samples as f64 - mean * mean, passed as f64 / samples as f64)
}

#[test]
fn prepared_states_obey_uncertainty_and_nullifier_variance() {
    let g = weighted_square();
    for sigma in [0.01, 0.1, 0.7] {
        let s = prepare_cv_graph_state(&g, sigma).unwrap();
        s.check_uncertainty().unwrap();
        for spec in build_nullifiers(&g) {
            let (m, v) = s.nullifier_moments(&spec).unwrap();
            assert_eq!(m, 0.0);
            assert!((v - sigma * sigma).abs() < 1e-9 * (1.0 + sigma * sigma));
        }
    }
    let hyper = WeightedHypergraph::new(3, vec![vec![1, 2, 3]], vec![1.0]).unwrap();
    assert!(prepare_cv_graph_state(&hyper, 0.1).is_err());
}

#[test]
fn backends_agree_on_moments() {
    let g = weighted_square();
    let noise = NoiseModel::new(0.2, 0.05, 10.0).unwrap();
    let shifts = [0.3, 0.0, -0.7, 0.0];
    let gauss = cv_deviation_model(&g, &shifts, noise, CvBackend::Gaussian).unwrap();
    let null = cv_deviation_model(&g, &shifts, noise, CvBackend::Nullifier).unwrap();
    let samples = 40_000;
    for spec in gauss.nullifiers() {
        let (mean, var) = residual_moments(spec, &noise, shifts[spec.vertex - 1]).unwrap();
        // Analytic check of the Gaussian state against the closed form.
        let state = prepare_cv_graph_state(&g, 0.2).unwrap();
        let (_, v_state) = state.nullifier_moments(spec).unwrap();
        let weights_sq: f64 = spec.terms.iter().map(|t| t.weight * t.weight).sum();
        assert!((v_state + 0.05f64.powi(2) * (1.0 + weights_sq) - var).abs() < 1e-6);
        for model in [&gauss, &null] {
            let (m, v, _) = sample_moments(model, spec.vertex, 1.0, samples, 5);
            let se_mean = (var / samples as f64).sqrt();
            let se_var = var * (2.0 / samples as f64).sqrt();
            assert!((m - mean).abs() < 3.0 * se_mean, "{:?} mean {m} vs {mean}", model.backend());
            assert!((v - var).abs() < 3.0 * se_var, "{:?} var {v} vs {var}", model.backend());
        }
    }
}

#[test]
fn shift_moves_only_its_own_residual() {
    let g = WeightedHypergraph::path(2).unwrap();
    let noise = NoiseModel::new(0.1, 0.0, 10.0).unwrap();
    let m = cv_deviation_model(&g, &[1.5, 0.0], noise, CvBackend::Gaussian).unwrap();
    let samples = 20_000;
    let (m1, _, p1) = sample_moments(&m, 1, 0.5, samples, 1);
    let (m2, _, _) = sample_moments(&m, 2, 0.5, samples, 1);
    let se = 0.1 / (samples as f64).sqrt();
    assert!((m1 - 1.5).abs() < 3.0 * se && m2.abs() < 3.0 * se);
    // 1.5 is ten standard deviations outside tau = 0.5.
    assert_eq!(p1, 0.0);
    assert!(cv_deviation_model(&g, &[1.0], noise, CvBackend::Gaussian).is_err());
}

#[test]
fn symbolic_hypergraph_residuals_are_exact() {
    let g = WeightedHypergraph::new(5, vec![vec![1, 2, 3], vec![3, 4], vec![2, 4, 5], vec![5]], vec![1.5, -1.0, 0.25, 3.0]).unwrap();
    let shifts = [0.0, 0.25, 0.0, -4.0, 1e-3];
    let m = cv_deviation_model(&g, &shifts, NoiseModel::symbolic(), CvBackend::Nullifier).unwrap();
    let mut rng = stream(8, 0, Purpose::Physics);
    for spec in m.nullifiers() {
        for _ in 0..2000 {
            let out = run_cv_stabilizer_test(&mut m.register(), spec, 0.0, &mut rng).unwrap();
            assert!((out.residual - shifts[spec.vertex - 1]).abs() < 1e-9);
        }
    }
}

#[test]
fn pass_rate_matches_cdf() {
    let g = WeightedHypergraph::cycle(3).unwrap();
    let noise = NoiseModel::new(0.3, 0.1, 10.0).unwrap();
    let model = CvModel::honest(&g, noise, CvBackend::Gaussian).unwrap();
    let spec = &model.nullifiers()[0];
    let (mean, var) = residual_moments(spec, &noise, 0.0).unwrap();
    let tau = 0.4;
    let p = pass_probability(mean, var, tau);
    let samples = 100_000;
    let (_, _, rate) = sample_moments(&model, 1, tau, samples, 12);
    let sigma = (p * (1.0 - p) / samples as f64).sqrt();
    assert!((rate - p).abs() < 3.0 * sigma, "{rate} vs {p}");
}

#[test]
fn bad_vertices_rejected() {
    let g = WeightedHypergraph::path(3).unwrap();
    let small = CvModel::honest(&WeightedHypergraph::path(2).unwrap(), NoiseModel::symbolic(), CvBackend::Nullifier).unwrap();
    let spec = &build_nullifiers(&g)[2];
    let mut rng = stream(0, 0, Purpose::Physics);
    assert!(run_cv_stabilizer_test(&mut small.register(), spec, 0.0, &mut rng).is_err());
    assert!(run_cv_stabilizer_test(&mut small.register(), &small.nullifiers()[0], -1.0, &mut rng).is_err());
}

proptest! {
    #[test]
    fn pass_probability_monotone(sigma in 0.01f64..2.0, tau in 0.01f64..3.0, mean in -2.0f64..2.0) {
        let p = pass_probability(mean, sigma * sigma, tau);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(pass_probability(mean, sigma * sigma, tau + 0.1) >= p);
        if mean == 0.0 || mean.abs() < tau {
            prop_assert!(pass_probability(0.0, (sigma + 0.1).powi(2), tau) <= pass_probability(0.0, sigma * sigma, tau));
        }
    }
}
