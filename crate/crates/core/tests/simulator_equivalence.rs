//! Exact agreement of the three qudit backends on every stabilizer test.

use gsverify_core::graph::{build_stabilizers, WeightedHypergraph};
use gsverify_core::qudit::{
    dense_statevector_oracle, graph_basis_test_distribution, residual_distribution, tableau_test_distribution,
    DeviationVector, GraphBasisState,
};
use gsverify_core::tableau::StabilizerTableau;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn presets() -> Vec<(String, WeightedHypergraph)> {
    let mut out = Vec::new();
    for n in 1..=5 {
        out.push((format!("path({n})"), WeightedHypergraph::path(n).unwrap()));
        if n >= 2 {
            out.push((format!("complete({n})"), WeightedHypergraph::complete(n).unwrap()));
        }
        if n >= 3 {
            out.push((format!("cycle({n})"), WeightedHypergraph::cycle(n).unwrap()));
        }
    }
    out.push(("cluster2d(2,2)".into(), WeightedHypergraph::cluster2d(2, 2).unwrap()));
    out.push(("star(5)".into(), WeightedHypergraph::graph(5, &[(1, 2), (1, 3), (1, 4), (1, 5)]).unwrap()));
    out
}

fn deviations(n: usize, d: u32, rng: &mut ChaCha8Rng) -> Vec<DeviationVector> {
    let mut out = vec![DeviationVector::zeros(n)];
    while out.len() < 16 {
        out.push(DeviationVector::new((0..n).map(|_| rng.random_range(0..d)).collect(), d).unwrap());
    }
    out
}

#[test]
fn tableau_matches_dense_on_presets() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    for (name, g) in presets() {
        for d in [2u32, 3, 5] {
            let specs = build_stabilizers(&g, d).unwrap();
            for a in deviations(g.n(), d, &mut rng) {
                let mut t = StabilizerTableau::graph_state(&g, d).unwrap();
                t.apply_deviation(&a).unwrap();
                for spec in &specs {
                    let exact = tableau_test_distribution(&t, spec).unwrap();
                    let dense = dense_statevector_oracle(&g, d, &a, spec).unwrap();
                    assert_eq!(exact, dense, "{name}, d={d}, a={:?}, g_{}", a.entries(), spec.vertex);
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn graph_basis_matches_dense_including_composite_d() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for (name, g) in presets() {
        for d in [2u32, 3, 4, 5, 6] {
            if (d as u64).pow(g.n() as u32) > 1 << 14 {
                continue;
            }
            let specs = build_stabilizers(&g, d).unwrap();
            for a in deviations(g.n(), d, &mut rng).into_iter().take(6) {
                let st = GraphBasisState::new(&g, d, Some(&a)).unwrap();
                for spec in &specs {
                    let exact = graph_basis_test_distribution(&st, spec).unwrap();
                    let dense = dense_statevector_oracle(&g, d, &a, spec).unwrap();
                    assert_eq!(exact, dense, "{name}, d={d}, a={:?}, g_{}", a.entries(), spec.vertex);
                }
            }
        }
    }
}

#[test]
fn residual_is_minus_deviation_with_certainty() {
    let g = WeightedHypergraph::cycle(5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in [2u32, 3, 4, 7] {
        let specs = build_stabilizers(&g, d).unwrap();
        for a in deviations(5, d, &mut rng) {
            let st = GraphBasisState::new(&g, d, Some(&a)).unwrap();
            for spec in &specs {
                let res = residual_distribution(&graph_basis_test_distribution(&st, spec).unwrap(), d);
                let expected = (d - a.entries()[spec.vertex - 1]) % d;
                assert_eq!(res.len(), 1);
                assert_eq!(res[&expected], Ratio::new(1, 1));
            }
        }
    }
}
