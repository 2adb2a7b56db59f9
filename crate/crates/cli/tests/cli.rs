//! The `gsverify` binary end to end.

use std::fs;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::thread::sleep;
use std::time::Duration;

use gsverify::config::ExperimentConfig;
use gsverify::experiment::Experiment;
use gsverify_core::verifier::{run_protocol, Verdict};

const BIN: &str = env!("CARGO_BIN_EXE_gsverify");

fn gsverify(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

const SMALL: &[&str] = &["--n", "4", "--d", "3", "--set", "graph=cycle", "--set", "n_test=5"];

fn with_small<'a>(mut args: Vec<&'a str>) -> Vec<&'a str> {
    args.extend_from_slice(SMALL);
    args
}

#[test]
fn run_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    let out_s = out.to_str().unwrap();
    let o = gsverify(&with_small(vec!["run", "--trials", "3", "--seed", "4", "--adversary", "single_bad", "--out", out_s]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("# adversary=single_bad\n"));
    assert_eq!(fs::read_to_string(out.join("verdicts.jsonl")).unwrap().lines().count(), 4);
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, "# small run\nn = 4\nd = 3\ngraph = cycle\nn_test = 5\ntrials = 2\nseed = 1\n").unwrap();
    let out = dir.path().join("res");
    let o = gsverify(&["run", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("# rng=chacha8 seed=9\n"));
    assert!(summary.contains("# trials=2\n"));
}

#[test]
fn exit_codes() {
    assert_eq!(gsverify(&["run", "--set", "colour=red"]).status.code(), Some(2));
    assert_eq!(gsverify(&["run", "--config", "/no/such/file"]).status.code(), Some(2));
    assert_eq!(gsverify(&with_small(vec!["run", "--trials", "0"])).status.code(), Some(2));
    // Output directory blocked by a regular file: fails while running.
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = gsverify(&with_small(vec!["run", "--out", blocker.to_str().unwrap()]));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = gsverify(&["sweep", "--n", "9,16", "--c", "13,192", "--epsilon", "0.01", "--ntilde", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,c,epsilon,n_test,n_total,bound,confidence,m,t,p_acc,p_acc_prior,ntilde");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("9,192.0,0.01,2253,40554,"));
    assert_eq!(rows[1].split(',').nth(8), Some("15.0"));
}

#[test]
fn selftest_passes() {
    let o = gsverify(&["selftest"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("ok")).count(), 5);
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn write_small_config(dir: &Path, seed: u64) -> ExperimentConfig {
    let cfg = ExperimentConfig {
        n: 4,
        d: 3,
        graph: "cycle".into(),
        n_test: Some(5),
        seed,
        adversary: gsverify::config::AdversaryKind::SingleBad,
        ..ExperimentConfig::default()
    };
    fs::write(dir.join("exp.cfg"), cfg.render()).unwrap();
    cfg
}

#[test]
fn two_process_session_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path(), 17);
    let cfg_path = dir.path().join("exp.cfg");
    let endpoint = format!("127.0.0.1:{}", free_port());
    let mut server = Command::new(BIN)
        .args(["serve-prover", "--config", cfg_path.to_str().unwrap(), "--endpoint", &endpoint])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut client = None;
    for _ in 0..100 {
        let o = gsverify(&["verify-client", "--config", cfg_path.to_str().unwrap(), "--endpoint", &endpoint, "--trial", "2"]);
        if o.status.success() {
            client = Some(o);
            break;
        }
        sleep(Duration::from_millis(100));
    }
    let client = client.expect("verifier never connected");
    assert!(server.wait().unwrap().success());
    let remote: Verdict = serde_json::from_slice(&client.stdout).unwrap();
    let exp = Experiment::new(cfg).unwrap();
    let local = run_protocol(&exp.params, &exp.graph, exp.assignment(2).unwrap(), 2, false).unwrap();
    assert_eq!(remote, local.verdict);
    assert_eq!(
        String::from_utf8(client.stdout).unwrap().trim_end(),
        serde_json::to_string(&local.verdict).unwrap()
    );
}
