use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gsverify::config::{ExperimentConfig, ModeKind};
use gsverify::experiment::{run_experiment, Experiment};
use gsverify::selftest::run_selftest;
use gsverify::sweep::{sweep_rows, write_sweep, SweepGrid};
use gsverify::transport::{run_verifier_client, serve_prover};
use gsverify::{CliError, Result};

#[derive(Parser)]
#[command(name = "gsverify", version, about = "Simulate and check stabilizer-test verification of graph states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of trials and write verdicts.jsonl and summary.csv.
    Run(Overrides),
    /// Tabulate the closed-form bounds over a grid.
    Sweep(SweepArgs),
    /// Play the prover for verifiers connecting to the endpoint.
    ServeProver {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = 1)]
        sessions: usize,
    },
    /// Run one trial as the verifier against a remote prover.
    VerifyClient {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Run quick consistency checks.
    Selftest,
}

/// Command-line settings, applied on top of the config file.
#[derive(Args)]
struct Overrides {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<u32>,
    /// Continuous-variable mode.
    #[arg(long)]
    cv: bool,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// honest, iid, single_bad or scripted.
    #[arg(long)]
    adversary: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ntilde: Option<u64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Prover address for serve-prover and verify-client.
    #[arg(long)]
    endpoint: Option<String>,
    /// Any other config key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        let numbers = [
            ("n", self.n.map(|v| v.to_string())),
            ("d", self.d.map(|v| v.to_string())),
            ("c", self.c.map(|v| v.to_string())),
            ("epsilon", self.epsilon.map(|v| v.to_string())),
            ("adversary", self.adversary.clone()),
            ("trials", self.trials.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("ntilde", self.ntilde.map(|v| v.to_string())),
            ("tolerance_tau", self.tau.map(|v| v.to_string())),
            ("endpoint", self.endpoint.clone()),
        ];
        for (k, v) in numbers {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        if self.cv {
            cfg.mode = ModeKind::Cv;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_values_t = SweepGrid::default().ns)]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = SweepGrid::default().cs)]
    c: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = SweepGrid::default().epsilons)]
    epsilon: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = SweepGrid::default().ntildes)]
    ntilde: Vec<u64>,
    /// Output file.
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(o) => {
            let report = run_experiment(o.config()?)?;
            let s = &report.summary;
            println!(
                "{} trials, acceptance rate {}, mean bound {}, violation rate {}",
                s.trials, s.acceptance_rate, s.mean_bound, s.violation_rate
            );
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Sweep(a) => {
            let rows = sweep_rows(&SweepGrid {
                ns: a.n,
                cs: a.c,
                epsilons: a.epsilon,
                ntildes: a.ntilde,
            })?;
            write_sweep(&a.out, &rows)?;
            println!("wrote {} rows to {}", rows.len(), a.out.display());
        }
        Command::ServeProver { overrides, sessions } => {
            let exp = Experiment::new(overrides.config()?)?;
            let listener = TcpListener::bind(&exp.config.endpoint)?;
            eprintln!("prover listening on {}", listener.local_addr()?);
            for r in serve_prover(&exp, &listener, sessions)? {
                println!("trial {}: {} registers, accepted = {}", r.trial, r.registers_sent, r.verdict.accepted);
            }
        }
        Command::VerifyClient { overrides, trial } => {
            let exp = Experiment::new(overrides.config()?)?;
            let run = run_verifier_client(&exp, exp.config.endpoint.as_str(), trial)?;
            let line = serde_json::to_string(&run.verdict).map_err(std::io::Error::from)?;
            println!("{line}");
        }
        Command::Selftest => {
            let checks = run_selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gsverify: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
