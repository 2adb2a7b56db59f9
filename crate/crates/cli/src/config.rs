//! Flat `key = value` experiment configuration.
//!
//! Every key has a default, unknown keys are rejected, and [`ExperimentConfig::pairs`]
//! lists every key with its effective value so outputs can echo the full
//! configuration.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gsverify_core::adversary::{BadModel, Position, RegisterState, Strategy};
use gsverify_core::cv::{CvBackend, NoiseModel, DEFAULT_X_WINDOW};
use gsverify_core::graph::WeightedHypergraph;
use gsverify_core::verifier::{compute_n_test, Mode, ProtocolParams};

use crate::formats::{parse_assignment, parse_graph, parse_preset};
use crate::{config_err, invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Qudit,
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversaryKind {
    Honest,
    Iid,
    SingleBad,
    Scripted,
}

/// How a non-ideal register is drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum BadSpec {
    AllNonzero,
    UniformNonzero,
    Dev(Vec<u32>),
    Shift(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    InProcess,
    /// Every trial runs over a loopback TCP session.
    Tcp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub d: u32,
    pub mode: ModeKind,
    pub c: f64,
    /// `None` means `ceil(5 n^4 ln n / 32)`.
    pub n_test: Option<u64>,
    /// `None` means `2 n N_test`.
    pub n_total: Option<u64>,
    pub ntilde: u64,
    pub epsilon: f64,
    pub adversary: AdversaryKind,
    pub bad_model: BadSpec,
    /// `None` picks a uniform position per trial.
    pub bad_position: Option<u64>,
    pub assignment_file: Option<PathBuf>,
    /// Preset expression, used when `graph_file` is unset.
    pub graph: String,
    pub graph_file: Option<PathBuf>,
    pub trials: u64,
    pub seed: u64,
    pub out: PathBuf,
    pub strict: bool,
    pub squeeze_sigma: f64,
    pub meas_sigma: f64,
    pub tolerance_tau: f64,
    pub x_window: f64,
    pub transport: TransportKind,
    pub endpoint: String,
    /// `None` picks per graph and noise level.
    pub cv_backend: Option<CvBackend>,
    pub record_transcript: bool,
}

pub const KEYS: &[&str] = &[
    "n",
    "d",
    "mode",
    "c",
    "n_test",
    "n_total",
    "ntilde",
    "epsilon",
    "adversary",
    "bad_model",
    "bad_position",
    "assignment_file",
    "graph",
    "graph_file",
    "trials",
    "seed",
    "out",
    "strict",
    "squeeze_sigma",
    "meas_sigma",
    "tolerance_tau",
    "x_window",
    "transport",
    "endpoint",
    "cv_backend",
    "record_transcript",
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 9,
            d: 2,
            mode: ModeKind::Qudit,
            c: 14.0,
            n_test: None,
            n_total: None,
            ntilde: 1,
            epsilon: 0.0,
            adversary: AdversaryKind::Honest,
            bad_model: BadSpec::AllNonzero,
            bad_position: None,
            assignment_file: None,
            graph: "path".to_string(),
            graph_file: None,
            trials: 1,
            seed: 0,
            out: PathBuf::from("out"),
            strict: false,
            squeeze_sigma: 0.0,
            meas_sigma: 0.0,
            tolerance_tau: 0.0,
            x_window: DEFAULT_X_WINDOW,
            transport: TransportKind::InProcess,
            endpoint: "127.0.0.1:7878".to_string(),
            cv_backend: None,
            record_transcript: false,
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| config_err(format!("{key}: cannot parse {value:?}")))
}

fn auto<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "auto" {
        Ok(None)
    } else {
        num(key, value).map(Some)
    }
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(config_err(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

fn show_opt<T: fmt::Display>(v: &Option<T>, none: &str) -> String {
    v.as_ref().map_or_else(|| none.to_string(), T::to_string)
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl BadSpec {
    fn parse(value: &str) -> Result<Self> {
        if let Some(body) = value.strip_prefix("dev:") {
            return body.split(',').map(|t| num("bad_model", t.trim())).collect::<Result<_>>().map(BadSpec::Dev);
        }
        if let Some(body) = value.strip_prefix("shift:") {
            return body.split(',').map(|t| num("bad_model", t.trim())).collect::<Result<_>>().map(BadSpec::Shift);
        }
        match value {
            "all_nonzero" => Ok(BadSpec::AllNonzero),
            "uniform_nonzero" => Ok(BadSpec::UniformNonzero),
            _ => Err(config_err(format!(
                "bad_model: expected all_nonzero, uniform_nonzero, dev:a1,... or shift:s1,..., got {value:?}"
            ))),
        }
    }

    fn model(&self) -> BadModel {
        match self {
            BadSpec::AllNonzero => BadModel::AllNonzero,
            BadSpec::UniformNonzero => BadModel::UniformNonzero,
            BadSpec::Dev(a) => BadModel::Fixed(RegisterState::Deviated(a.clone().into())),
            BadSpec::Shift(s) => BadModel::Fixed(RegisterState::Shifted(s.clone().into())),
        }
    }
}

impl fmt::Display for BadSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BadSpec::AllNonzero => f.write_str("all_nonzero"),
            BadSpec::UniformNonzero => f.write_str("uniform_nonzero"),
            BadSpec::Dev(a) => write!(f, "dev:{}", join(a)),
            BadSpec::Shift(s) => write!(f, "shift:{}", join(s)),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = num(key, value)?,
            "d" => self.d = num(key, value)?,
            "mode" => {
                self.mode = match value {
                    "qudit" => ModeKind::Qudit,
                    "cv" => ModeKind::Cv,
                    _ => return Err(config_err(format!("mode: expected qudit or cv, got {value:?}"))),
                }
            }
            "c" => self.c = num(key, value)?,
            "n_test" => self.n_test = auto(key, value)?,
            "n_total" => self.n_total = auto(key, value)?,
            "ntilde" => self.ntilde = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "adversary" => {
                self.adversary = match value {
                    "honest" => AdversaryKind::Honest,
                    "iid" => AdversaryKind::Iid,
                    "single_bad" => AdversaryKind::SingleBad,
                    "scripted" => AdversaryKind::Scripted,
                    _ => {
                        return Err(config_err(format!(
                            "adversary: expected honest, iid, single_bad or scripted, got {value:?}"
                        )))
                    }
                }
            }
            "bad_model" => self.bad_model = BadSpec::parse(value)?,
            "bad_position" => {
                self.bad_position = if value == "uniform" { None } else { Some(num(key, value)?) }
            }
            "assignment_file" => self.assignment_file = path(value),
            "graph" => self.graph = value.to_string(),
            "graph_file" => self.graph_file = path(value),
            "trials" => self.trials = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "strict" => self.strict = flag(key, value)?,
            "squeeze_sigma" => self.squeeze_sigma = num(key, value)?,
            "meas_sigma" => self.meas_sigma = num(key, value)?,
            "tolerance_tau" => self.tolerance_tau = num(key, value)?,
            "x_window" => self.x_window = num(key, value)?,
            "transport" => {
                self.transport = match value {
                    "inprocess" => TransportKind::InProcess,
                    "tcp" => TransportKind::Tcp,
                    _ => return Err(config_err(format!("transport: expected inprocess or tcp, got {value:?}"))),
                }
            }
            "endpoint" => self.endpoint = value.to_string(),
            "cv_backend" => {
                self.cv_backend = match value {
                    "auto" => None,
                    "gaussian" => Some(CvBackend::Gaussian),
                    "nullifier" => Some(CvBackend::Nullifier),
                    _ => {
                        return Err(config_err(format!(
                            "cv_backend: expected auto, gaussian or nullifier, got {value:?}"
                        )))
                    }
                }
            }
            "record_transcript" => self.record_transcript = flag(key, value)?,
            _ => return Err(config_err(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "n" => self.n.to_string(),
            "d" => self.d.to_string(),
            "mode" => match self.mode {
                ModeKind::Qudit => "qudit",
                ModeKind::Cv => "cv",
            }
            .to_string(),
            "c" => self.c.to_string(),
            "n_test" => show_opt(&self.n_test, "auto"),
            "n_total" => show_opt(&self.n_total, "auto"),
            "ntilde" => self.ntilde.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "adversary" => match self.adversary {
                AdversaryKind::Honest => "honest",
                AdversaryKind::Iid => "iid",
                AdversaryKind::SingleBad => "single_bad",
                AdversaryKind::Scripted => "scripted",
            }
            .to_string(),
            "bad_model" => self.bad_model.to_string(),
            "bad_position" => show_opt(&self.bad_position, "uniform"),
            "assignment_file" => show_path(&self.assignment_file),
            "graph" => self.graph.clone(),
            "graph_file" => show_path(&self.graph_file),
            "trials" => self.trials.to_string(),
            "seed" => self.seed.to_string(),
            "out" => self.out.display().to_string(),
            "strict" => self.strict.to_string(),
            "squeeze_sigma" => self.squeeze_sigma.to_string(),
            "meas_sigma" => self.meas_sigma.to_string(),
            "tolerance_tau" => self.tolerance_tau.to_string(),
            "x_window" => self.x_window.to_string(),
            "transport" => match self.transport {
                TransportKind::InProcess => "inprocess",
                TransportKind::Tcp => "tcp",
            }
            .to_string(),
            "endpoint" => self.endpoint.clone(),
            "cv_backend" => match self.cv_backend {
                None => "auto",
                Some(CvBackend::Gaussian) => "gaussian",
                Some(CvBackend::Nullifier) => "nullifier",
            }
            .to_string(),
            "record_transcript" => self.record_transcript.to_string(),
            _ => return None,
        })
    }

    /// Every key with its effective value, in [`KEYS`] order.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        KEYS.iter().map(|&k| (k, self.get(k).expect("every key has a value"))).collect()
    }

    /// Renders a file that [`ExperimentConfig::parse`] reads back unchanged.
    pub fn render(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Checks that do not need the graph or the simulator.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        for p in [&self.graph_file, &self.assignment_file].into_iter().flatten() {
            if !p.is_file() {
                return Err(config_err(format!("{} does not exist", p.display())));
            }
        }
        if self.adversary == AdversaryKind::Scripted && self.assignment_file.is_none() {
            return Err(config_err("adversary = scripted needs assignment_file"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(config_err(format!("epsilon = {} is outside [0, 1]", self.epsilon)));
        }
        Ok(())
    }

    pub fn graph(&self) -> Result<WeightedHypergraph> {
        let g = match &self.graph_file {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?;
                parse_graph(&text)?
            }
            None => parse_preset(&self.graph, self.n)?,
        };
        if g.n() != self.n {
            return Err(config_err(format!("graph has {} vertices but n = {}", g.n(), self.n)));
        }
        Ok(g)
    }

    pub fn protocol_mode(&self, graph: &WeightedHypergraph) -> Result<Mode> {
        Ok(match self.mode {
            ModeKind::Qudit => Mode::Qudit { d: self.d },
            ModeKind::Cv => {
                let noise = NoiseModel::new(self.squeeze_sigma, self.meas_sigma, self.x_window).map_err(invalid)?;
                Mode::Cv {
                    noise,
                    tau: self.tolerance_tau,
                    backend: self.cv_backend.unwrap_or_else(|| CvBackend::auto(graph, &noise)),
                }
            }
        })
    }

    pub fn params(&self, graph: &WeightedHypergraph) -> Result<ProtocolParams> {
        let n_test = match self.n_test {
            Some(v) => v,
            None => compute_n_test(self.n as u64).map_err(invalid)?,
        };
        let params = ProtocolParams {
            n: self.n,
            mode: self.protocol_mode(graph)?,
            c: self.c,
            n_test,
            n_total: self.n_total.unwrap_or(2 * self.n as u64 * n_test),
            ntilde: self.ntilde,
            seed: self.seed,
            strict: self.strict,
        };
        params.validate().map_err(invalid)?;
        Ok(params)
    }

    pub fn strategy(&self) -> Result<Strategy> {
        Ok(match self.adversary {
            AdversaryKind::Honest => Strategy::Honest,
            AdversaryKind::Iid => Strategy::IidNoise {
                epsilon: self.epsilon,
                bad: self.bad_model.model(),
            },
            AdversaryKind::SingleBad => Strategy::SingleBad {
                bad: self.bad_model.model(),
                position: self.bad_position.map_or(Position::Uniform, Position::Fixed),
            },
            AdversaryKind::Scripted => {
                let p = self
                    .assignment_file
                    .as_ref()
                    .ok_or_else(|| config_err("adversary = scripted needs assignment_file"))?;
                let text = fs::read_to_string(p)
                    .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?;
                Strategy::Scripted(parse_assignment(&text)?.into())
            }
        })
    }
}
