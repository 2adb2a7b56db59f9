//! Quick end-to-end checks of an installed binary, a few seconds in total.

use gsverify_core::bounds::{serfling_tail, SerflingQuery};
use gsverify_core::cv::{cv_deviation_model, run_cv_stabilizer_test, CvBackend, NoiseModel};
use gsverify_core::graph::{build_stabilizers, WeightedHypergraph};
use gsverify_core::qudit::{dense_statevector_oracle, tableau_test_distribution, DeviationVector};
use gsverify_core::rng::{stream, Purpose};
use gsverify_core::tableau::StabilizerTableau;

use crate::config::{ExperimentConfig, TransportKind};
use crate::experiment::Experiment;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// Counts populations where the sampled-mean deviation is more likely than
/// the tail bound allows, over every population of size up to 8.
fn serfling_violations() -> u64 {
    let mut violations = 0;
    for t in 2u32..=8 {
        for pop in 0u32..(1 << t) {
            let w = pop.count_ones() as i64;
            for k in 1..t as i64 {
                let rest = t as i64 - k;
                let (mut hits, mut total) = (0u64, 0u64);
                for mask in (0u32..(1 << t)).filter(|m| m.count_ones() as i64 == k) {
                    total += 1;
                    let s = (mask & pop).count_ones() as i64;
                    // w - s >= (rest / k) s + rest / 2, i.e. nu = 0.5.
                    if 2 * k * (w - s) >= 2 * rest * s + rest * k {
                        hits += 1;
                    }
                }
                let q = SerflingQuery::new(rest as u64, k as u64, 0.5).expect("valid query");
                if hits as f64 > serfling_tail(&q) * total as f64 {
                    violations += 1;
                }
            }
        }
    }
    violations
}

fn small_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        n: 4,
        d: 3,
        graph: "cycle".into(),
        n_test: Some(6),
        seed,
        ..ExperimentConfig::default()
    }
}

pub fn run_selftest() -> Vec<Check> {
    vec![
        check("serfling bound on exhaustive small populations", || {
            let v = serfling_violations();
            Ok((v == 0, format!("{v} violations")))
        }),
        check("tableau and dense simulators agree", || {
            let mut compared = 0;
            for d in [2u32, 3] {
                let g = WeightedHypergraph::cycle(3)?;
                let a = DeviationVector::new(vec![1, 0, d - 1], d)?;
                let mut t = StabilizerTableau::graph_state(&g, d)?;
                t.apply_deviation(&a)?;
                for spec in build_stabilizers(&g, d)? {
                    if tableau_test_distribution(&t, &spec)? != dense_statevector_oracle(&g, d, &a, &spec)? {
                        return Ok((false, format!("d={d}, test {}", spec.vertex)));
                    }
                    compared += 1;
                }
            }
            Ok((true, format!("{compared} distributions")))
        }),
        check("honest prover is accepted with every test passing", || {
            let exp = Experiment::new(small_config(1))?;
            let r = exp.run_trial(0)?;
            let full = exp.params.n as u64 * exp.params.n_test;
            Ok((r.verdict.accepted && r.verdict.n_pass == full, format!("N_pass = {}/{full}", r.verdict.n_pass)))
        }),
        check("loopback TCP session reproduces the in-process verdict", || {
            let mut cfg = small_config(2);
            cfg.adversary = crate::config::AdversaryKind::SingleBad;
            let local = Experiment::new(cfg.clone())?.run_trial(3)?;
            cfg.transport = TransportKind::Tcp;
            let remote = Experiment::new(cfg)?.run_trial(3)?;
            Ok((local == remote, format!("N_pass = {}", remote.verdict.n_pass)))
        }),
        check("CV shift shows up as the nullifier residual", || {
            let g = WeightedHypergraph::new(3, vec![vec![1, 2, 3], vec![1, 3]], vec![0.5, 2.0])?;
            let shifts = [0.25, -1.0, 0.0];
            let m = cv_deviation_model(&g, &shifts, NoiseModel::symbolic(), CvBackend::Nullifier)?;
            let mut rng = stream(0, 0, Purpose::Physics);
            let mut worst: f64 = 0.0;
            for spec in m.nullifiers() {
                let out = run_cv_stabilizer_test(&mut m.register(), spec, 0.0, &mut rng)?;
                worst = worst.max((out.residual - shifts[spec.vertex - 1]).abs());
            }
            Ok((worst < 1e-9, format!("max error {worst:e}")))
        }),
    ]
}
