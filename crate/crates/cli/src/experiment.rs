//! Batches of independent protocol trials and their result files.
//!
//! Trial `t` of an experiment with seed `s` is fully determined by `(s, t)`:
//! the adversary draws its assignment from `adversary_seed(s, t)`, and the
//! verifier and prover use the selection and physics streams of `(s, t)`.
//! Trials therefore run in parallel without changing any output byte.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gsverify_core::adversary::{BadModel, RegisterAssignment, Strategy};
use gsverify_core::bounds::p_acc;
use gsverify_core::graph::WeightedHypergraph;
use gsverify_core::rng::{adversary_seed, GENERATOR_NAME};
use gsverify_core::verifier::{
    ensemble_target_fidelity, run_protocol, Mode, ProtocolParams, ProtocolRun, Transcript, Verdict,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, TransportKind};
use crate::{invalid, transport, Result};

/// A validated configuration with everything the trials share.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub graph: WeightedHypergraph,
    pub params: ProtocolParams,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub verdict: Verdict,
    /// Ensemble target fidelity of the untested registers.
    pub target_fidelity: f64,
    /// Accepted while the target fidelity is below the certified bound.
    pub violation: bool,
    pub non_ideal_registers: usize,
    pub pending_high_water: usize,
    #[serde(skip)]
    pub transcript: Option<Transcript>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub trials: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    pub mean_bound: f64,
    pub violations: u64,
    pub violation_rate: f64,
    pub mean_n_pass: f64,
    pub mean_target_fidelity: f64,
    /// Closed-form acceptance probability, for i.i.d. adversaries whose bad
    /// registers fail every test.
    pub p_acc: Option<f64>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let graph = config.graph()?;
        let params = config.params(&graph)?;
        let strategy = config.strategy()?;
        // Surface assignment errors (lengths, ranges, mode mismatches) as
        // configuration errors before any trial starts.
        strategy
            .assign(&params, adversary_seed(params.seed, 0))
            .map_err(invalid)?;
        Ok(Self {
            config,
            graph,
            params,
            strategy,
        })
    }

    pub fn assignment(&self, trial: u64) -> Result<Arc<RegisterAssignment>> {
        let a = self.strategy.assign(&self.params, adversary_seed(self.params.seed, trial))?;
        Ok(Arc::new(a))
    }

    /// Scores a finished run against the assignment it was played on.
    pub fn record(&self, trial: u64, assignment: &RegisterAssignment, run: ProtocolRun) -> Result<TrialRecord> {
        let fids = assignment.fidelities(&self.graph, self.params.mode)?;
        let target_fidelity = ensemble_target_fidelity(&fids, &run.roles, self.params.ntilde);
        Ok(TrialRecord {
            trial,
            violation: run.verdict.accepted && target_fidelity < run.verdict.fidelity_bound,
            target_fidelity,
            non_ideal_registers: assignment.non_ideal_count(),
            pending_high_water: run.pending_high_water,
            verdict: run.verdict,
            transcript: run.transcript,
        })
    }

    pub fn run_trial(&self, trial: u64) -> Result<TrialRecord> {
        let assignment = self.assignment(trial)?;
        let run = match self.config.transport {
            TransportKind::InProcess => run_protocol(
                &self.params,
                &self.graph,
                Arc::clone(&assignment),
                trial,
                self.config.record_transcript,
            )?,
            TransportKind::Tcp => transport::loopback(self, trial)?,
        };
        self.record(trial, &assignment, run)
    }

    /// Runs trials `0..trials` in parallel, returned in trial order.
    pub fn run_trials(&self) -> Result<Vec<TrialRecord>> {
        (0..self.config.trials).into_par_iter().map(|t| self.run_trial(t)).collect()
    }

    pub fn p_acc(&self) -> Option<f64> {
        match (&self.strategy, self.params.mode) {
            (Strategy::IidNoise { epsilon, bad: BadModel::AllNonzero }, Mode::Qudit { .. }) => {
                p_acc(self.params.n as u64, self.params.n_test, *epsilon).ok()
            }
            _ => None,
        }
    }

    pub fn summarize(&self, records: &[TrialRecord]) -> Summary {
        let t = records.len() as f64;
        let accepted = records.iter().filter(|r| r.verdict.accepted).count() as u64;
        let violations = records.iter().filter(|r| r.violation).count() as u64;
        let mean = |f: &dyn Fn(&TrialRecord) -> f64| records.iter().map(f).sum::<f64>() / t;
        Summary {
            trials: records.len() as u64,
            accepted,
            acceptance_rate: accepted as f64 / t,
            mean_bound: mean(&|r| r.verdict.fidelity_bound),
            violations,
            violation_rate: violations as f64 / t,
            mean_n_pass: mean(&|r| r.verdict.n_pass as f64),
            mean_target_fidelity: mean(&|r| r.target_fidelity),
            p_acc: self.p_acc(),
        }
    }

    fn header(&self) -> Value {
        let config: Map<String, Value> = self
            .config
            .pairs()
            .into_iter()
            .map(|(k, v)| (k.to_string(), Value::String(v)))
            .collect();
        json!({ "rng": GENERATOR_NAME, "seed": self.params.seed, "config": config })
    }

    fn comment_header(&self) -> String {
        let mut s = format!("# rng={GENERATOR_NAME} seed={}\n", self.params.seed);
        for (k, v) in self.config.pairs() {
            s.push_str(&format!("# {k}={v}\n"));
        }
        s
    }

    /// Writes `verdicts.jsonl`, `summary.csv` and, when transcripts are
    /// recorded, `transcripts.jsonl` into `dir`.
    pub fn write_outputs(&self, dir: &Path, records: &[TrialRecord], summary: &Summary) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();

        let path = dir.join("verdicts.jsonl");
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "{}", self.header())?;
        for r in records {
            serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
            writeln!(w)?;
        }
        w.flush()?;
        written.push(path);

        let path = dir.join("summary.csv");
        let mut f = BufWriter::new(File::create(&path)?);
        f.write_all(self.comment_header().as_bytes())?;
        let mut csv = csv::Writer::from_writer(f);
        csv.serialize(summary).map_err(std::io::Error::from)?;
        csv.flush()?;
        written.push(path);

        if self.config.record_transcript {
            let path = dir.join("transcripts.jsonl");
            let mut w = BufWriter::new(File::create(&path)?);
            writeln!(w, "{}", self.header())?;
            for t in records.iter().filter_map(|r| r.transcript.as_ref()) {
                serde_json::to_writer(&mut w, t).map_err(std::io::Error::from)?;
                writeln!(w)?;
            }
            w.flush()?;
            written.push(path);
        }
        Ok(written)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

/// Runs every trial of `config` and writes the result files into `config.out`.
pub fn run_experiment(config: ExperimentConfig) -> Result<ExperimentReport> {
    let exp = Experiment::new(config)?;
    let records = exp.run_trials()?;
    let summary = exp.summarize(&records);
    let files = exp.write_outputs(&exp.config.out, &records, &summary)?;
    Ok(ExperimentReport { records, summary, files })
}
