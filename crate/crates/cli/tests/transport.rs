use std::net::{SocketAddr, TcpListener};
use std::sync::Arc;
use std::thread;

use gsverify::config::{AdversaryKind, BadSpec, ExperimentConfig, ModeKind};
use gsverify::experiment::Experiment;
use gsverify::transport::{hello, loopback, prover_session, run_verifier_client, Connection};
use gsverify::wire::{Peer, WireMessage};
use gsverify::CliError;
use gsverify_core::verifier::{run_protocol, MeasureOutcome, MeasureRequest, OutcomeValue, SiteBasis};
use gsverify_core::qudit::QuditBasis;

fn small(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        n: 4,
        d: 3,
        graph: "cycle".into(),
        n_test: Some(5),
        seed,
        record_transcript: true,
        ..ExperimentConfig::default()
    }
}

fn in_process(exp: &Experiment, trial: u64) -> gsverify_core::verifier::ProtocolRun {
    run_protocol(&exp.params, &exp.graph, exp.assignment(trial).unwrap(), trial, true).unwrap()
}

fn listener() -> (TcpListener, SocketAddr) {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let a = l.local_addr().unwrap();
    (l, a)
}

#[test]
fn loopback_equals_in_process_for_qudit_adversaries() {
    for (seed, adversary) in [(1, AdversaryKind::Honest), (2, AdversaryKind::SingleBad), (3, AdversaryKind::Iid)] {
        let cfg = ExperimentConfig {
            adversary,
            epsilon: 0.2,
            bad_model: BadSpec::UniformNonzero,
            ..small(seed)
        };
        let exp = Experiment::new(cfg).unwrap();
        for trial in 0..3 {
            let remote = loopback(&exp, trial).unwrap();
            assert_eq!(remote, in_process(&exp, trial), "seed {seed} trial {trial}");
            assert!(remote.pending_high_water <= exp.params.n);
        }
    }
}

#[test]
fn loopback_reproduces_gaussian_outcomes_bit_for_bit() {
    let cfg = ExperimentConfig {
        mode: ModeKind::Cv,
        squeeze_sigma: 0.2,
        meas_sigma: 0.05,
        tolerance_tau: 0.5,
        adversary: AdversaryKind::SingleBad,
        bad_model: BadSpec::Shift(vec![0.0, 0.3, 0.0, -0.1]),
        ..small(11)
    };
    let exp = Experiment::new(cfg).unwrap();
    let remote = loopback(&exp, 4).unwrap();
    let local = in_process(&exp, 4);
    // PartialEq on f64 outcomes inside the transcript is exact equality.
    assert_eq!(remote, local);
    assert!(!local.transcript.unwrap().tests.is_empty());
}

#[test]
fn verifier_aborts_on_outcome_before_request() {
    let exp = Experiment::new(small(5)).unwrap();
    let (l, addr) = listener();
    let fake = thread::spawn({
        let exp = exp.clone();
        move || {
            let (s, _) = l.accept().unwrap();
            let mut conn = Connection::new(s).unwrap();
            let WireMessage::Hello(_) = conn.recv().unwrap() else { panic!() };
            conn.send(&WireMessage::Hello(hello(&exp, Peer::Prover, 0))).unwrap();
            conn.send(&WireMessage::RegisterAnnounce { register: 1 }).unwrap();
            // Answer a request that has not been sent yet.
            let _ = conn.recv().unwrap();
            conn.send(&WireMessage::Outcome {
                outcome: MeasureOutcome { register: 1, site: 1, value: OutcomeValue::Discarded },
                basis: SiteBasis::Discard,
            })
            .unwrap();
            conn.recv()
        }
    });
    let err = run_verifier_client(&exp, addr, 0).unwrap_err();
    assert!(matches!(err, CliError::Simulation(_) | CliError::Wire(_)), "{err}");
    let reply = fake.join().unwrap();
    assert!(matches!(reply, Err(CliError::Peer(_))), "{reply:?}");
}

#[test]
fn prover_aborts_on_out_of_order_request() {
    let exp = Experiment::new(small(6)).unwrap();
    let (l, addr) = listener();
    let server = thread::spawn({
        let exp = exp.clone();
        move || {
            let (s, _) = l.accept().unwrap();
            prover_session(&exp, s)
        }
    });
    let mut conn = Connection::connect(addr).unwrap();
    conn.send(&WireMessage::Hello(hello(&exp, Peer::Verifier, 0))).unwrap();
    assert!(matches!(conn.recv().unwrap(), WireMessage::Hello(_)));
    assert_eq!(conn.recv().unwrap(), WireMessage::RegisterAnnounce { register: 1 });
    conn.send(&WireMessage::MeasureRequest(MeasureRequest {
        register: 1,
        site: 2,
        basis: SiteBasis::Qudit(QuditBasis::Z),
    }))
    .unwrap();
    assert!(matches!(conn.recv(), Err(CliError::Peer(_))));
    assert!(server.join().unwrap().is_err());
}

#[test]
fn mismatched_sessions_are_refused() {
    let prover_exp = Experiment::new(small(7)).unwrap();
    let verifier_exp = Experiment::new(small(8)).unwrap();
    let (l, addr) = listener();
    let server = thread::spawn(move || {
        let (s, _) = l.accept().unwrap();
        prover_session(&prover_exp, s)
    });
    assert!(run_verifier_client(&verifier_exp, addr, 0).is_err());
    assert!(server.join().unwrap().is_err());
}

#[test]
fn dropped_connection_is_an_io_error() {
    let exp = Arc::new(Experiment::new(small(9)).unwrap());
    let (l, addr) = listener();
    let fake = thread::spawn({
        let exp = Arc::clone(&exp);
        move || {
            let (s, _) = l.accept().unwrap();
            let mut conn = Connection::new(s).unwrap();
            let _ = conn.recv().unwrap();
            conn.send(&WireMessage::Hello(hello(&exp, Peer::Prover, 0))).unwrap();
            conn.send(&WireMessage::RegisterAnnounce { register: 1 }).unwrap();
        }
    });
    let err = run_verifier_client(&exp, addr, 0).unwrap_err();
    fake.join().unwrap();
    assert!(matches!(err, CliError::Io(_)), "{err}");
}
