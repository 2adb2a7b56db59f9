//! Framed messages between a prover and a verifier process.
//!
//! A frame is a 4-byte big-endian length followed by that many bytes of a
//! UTF-8 JSON object with a `kind` field. Every number travels as a decimal
//! string: integers verbatim, floats in shortest round-trip form, so values
//! survive the trip bit for bit.
//!
//! ```text
//! {"kind":"HELLO","role":"verifier","version":"1","n":"9","n_test":"2253","n_total":"40554","seed":"7","trial":"0","mode":"qudit:2"}
//! {"kind":"REGISTER_ANNOUNCE","register":"1"}
//! {"kind":"MEASURE_REQUEST","register":"1","site":"0","basis":"X"}
//! {"kind":"OUTCOME","register":"1","site":"0","basis":"X","value":"1"}
//! {"kind":"VERDICT","verdict":{...}}
//! {"kind":"ERROR","message":"..."}
//! ```
//!
//! Bases are `X` and `Z` for qudits, `x` and `p` for CV quadratures, and
//! `DISCARD` for a site that is not measured; its outcome value is also
//! `DISCARD`.

use std::io::{self, Read, Write};

use gsverify_core::cv::Quadrature;
use gsverify_core::qudit::QuditBasis;
use gsverify_core::verifier::{Mode, MeasureOutcome, MeasureRequest, OutcomeValue, SiteBasis, Verdict};
use serde_json::{Map, Value};

use crate::{CliError, Result};

pub const PROTOCOL_VERSION: &str = "1";

/// Frames longer than this are refused before allocating.
pub const MAX_FRAME: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Peer {
    Prover,
    Verifier,
}

/// Opens a session. Both sides send one; the session only proceeds when
/// everything but `role` matches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hello {
    pub role: Peer,
    pub version: String,
    pub n: usize,
    pub n_test: u64,
    pub n_total: u64,
    pub seed: u64,
    pub trial: u64,
    /// See [`mode_tag`].
    pub mode: String,
}

impl Hello {
    /// True when both ends describe the same session.
    pub fn agrees_with(&self, other: &Hello) -> bool {
        (&self.version, self.n, self.n_test, self.n_total, self.seed, self.trial, &self.mode)
            == (&other.version, other.n, other.n_test, other.n_total, other.seed, other.trial, &other.mode)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WireMessage {
    Hello(Hello),
    RegisterAnnounce { register: u64 },
    MeasureRequest(MeasureRequest),
    /// The basis is repeated so the value can be decoded without context.
    Outcome { outcome: MeasureOutcome, basis: SiteBasis },
    Verdict(Box<Verdict>),
    Error { message: String },
}

/// `qudit:<d>`, or `cv:<squeeze_sigma>:<meas_sigma>:<x_window>:<tau>:<backend>`.
pub fn mode_tag(mode: &Mode) -> String {
    match mode {
        Mode::Qudit { d } => format!("qudit:{d}"),
        Mode::Cv { noise, tau, backend } => format!(
            "cv:{}:{}:{}:{}:{:?}",
            noise.squeeze_sigma, noise.meas_sigma, noise.x_window, tau, backend
        ),
    }
}

pub fn basis_tag(b: SiteBasis) -> &'static str {
    match b {
        SiteBasis::Qudit(QuditBasis::X) => "X",
        SiteBasis::Qudit(QuditBasis::Z) => "Z",
        SiteBasis::Cv(Quadrature::X) => "x",
        SiteBasis::Cv(Quadrature::P) => "p",
        SiteBasis::Discard => "DISCARD",
    }
}

fn parse_basis(tag: &str) -> Result<SiteBasis> {
    Ok(match tag {
        "X" => SiteBasis::Qudit(QuditBasis::X),
        "Z" => SiteBasis::Qudit(QuditBasis::Z),
        "x" => SiteBasis::Cv(Quadrature::X),
        "p" => SiteBasis::Cv(Quadrature::P),
        "DISCARD" => SiteBasis::Discard,
        _ => return Err(CliError::Wire(format!("unknown basis {tag:?}"))),
    })
}

fn value_text(v: OutcomeValue) -> String {
    match v {
        OutcomeValue::Qudit(m) => m.to_string(),
        OutcomeValue::Cv(x) => x.to_string(),
        OutcomeValue::Discarded => "DISCARD".to_string(),
    }
}

fn parse_value(basis: SiteBasis, text: &str) -> Result<OutcomeValue> {
    let bad = || CliError::Wire(format!("bad outcome value {text:?} for basis {}", basis_tag(basis)));
    Ok(match basis {
        SiteBasis::Qudit(_) => OutcomeValue::Qudit(text.parse().map_err(|_| bad())?),
        SiteBasis::Cv(_) => OutcomeValue::Cv(text.parse().map_err(|_| bad())?),
        SiteBasis::Discard if text == "DISCARD" => OutcomeValue::Discarded,
        SiteBasis::Discard => return Err(bad()),
    })
}

/// Replaces every number in `v` by its decimal string.
pub fn stringify_numbers(v: Value) -> Value {
    match v {
        Value::Number(n) => Value::String(n.to_string()),
        Value::Array(xs) => Value::Array(xs.into_iter().map(stringify_numbers).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, stringify_numbers(v))).collect()),
        other => other,
    }
}

/// Inverse of [`stringify_numbers`] for documents whose only strings are
/// non-numeric text.
pub fn parse_numbers(v: Value) -> Value {
    match v {
        Value::String(s) => match s.parse::<serde_json::Number>() {
            Ok(n) => Value::Number(n),
            Err(_) => Value::String(s),
        },
        Value::Array(xs) => Value::Array(xs.into_iter().map(parse_numbers).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, parse_numbers(v))).collect()),
        other => other,
    }
}

struct Fields(Map<String, Value>);

impl Fields {
    fn text(&self, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| CliError::Wire(format!("missing string field {key:?}")))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let t = self.text(key)?;
        t.parse().map_err(|_| CliError::Wire(format!("field {key:?}: bad number {t:?}")))
    }
}

impl WireMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            WireMessage::Hello(_) => "HELLO",
            WireMessage::RegisterAnnounce { .. } => "REGISTER_ANNOUNCE",
            WireMessage::MeasureRequest(_) => "MEASURE_REQUEST",
            WireMessage::Outcome { .. } => "OUTCOME",
            WireMessage::Verdict(_) => "VERDICT",
            WireMessage::Error { .. } => "ERROR",
        }
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("kind".into(), self.kind().into());
        let mut put = |k: &str, v: String| {
            m.insert(k.into(), Value::String(v));
        };
        match self {
            WireMessage::Hello(h) => {
                put(
                    "role",
                    match h.role {
                        Peer::Prover => "prover",
                        Peer::Verifier => "verifier",
                    }
                    .into(),
                );
                put("version", h.version.clone());
                put("n", h.n.to_string());
                put("n_test", h.n_test.to_string());
                put("n_total", h.n_total.to_string());
                put("seed", h.seed.to_string());
                put("trial", h.trial.to_string());
                put("mode", h.mode.clone());
            }
            WireMessage::RegisterAnnounce { register } => put("register", register.to_string()),
            WireMessage::MeasureRequest(r) => {
                put("register", r.register.to_string());
                put("site", r.site.to_string());
                put("basis", basis_tag(r.basis).into());
            }
            WireMessage::Outcome { outcome, basis } => {
                put("register", outcome.register.to_string());
                put("site", outcome.site.to_string());
                put("basis", basis_tag(*basis).into());
                put("value", value_text(outcome.value));
            }
            WireMessage::Verdict(v) => {
                let body = serde_json::to_value(v.as_ref()).expect("verdicts serialize");
                m.insert("verdict".into(), stringify_numbers(body));
            }
            WireMessage::Error { message } => put("message", message.clone()),
        }
        Value::Object(m)
    }

    pub fn encode(&self) -> Vec<u8> {
        serde_json::to_vec(&self.to_json()).expect("JSON values serialize")
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let v: Value = serde_json::from_slice(bytes).map_err(|e| CliError::Wire(format!("not a JSON object: {e}")))?;
        let Value::Object(map) = v else {
            return Err(CliError::Wire("frame is not a JSON object".into()));
        };
        let f = Fields(map);
        Ok(match f.text("kind")? {
            "HELLO" => WireMessage::Hello(Hello {
                role: match f.text("role")? {
                    "prover" => Peer::Prover,
                    "verifier" => Peer::Verifier,
                    r => return Err(CliError::Wire(format!("unknown role {r:?}"))),
                },
                version: f.text("version")?.to_string(),
                n: f.num("n")?,
                n_test: f.num("n_test")?,
                n_total: f.num("n_total")?,
                seed: f.num("seed")?,
                trial: f.num("trial")?,
                mode: f.text("mode")?.to_string(),
            }),
            "REGISTER_ANNOUNCE" => WireMessage::RegisterAnnounce {
                register: f.num("register")?,
            },
            "MEASURE_REQUEST" => WireMessage::MeasureRequest(MeasureRequest {
                register: f.num("register")?,
                site: f.num("site")?,
                basis: parse_basis(f.text("basis")?)?,
            }),
            "OUTCOME" => {
                let basis = parse_basis(f.text("basis")?)?;
                WireMessage::Outcome {
                    outcome: MeasureOutcome {
                        register: f.num("register")?,
                        site: f.num("site")?,
                        value: parse_value(basis, f.text("value")?)?,
                    },
                    basis,
                }
            }
            "VERDICT" => {
                let body = f.0.get("verdict").cloned().ok_or_else(|| CliError::Wire("missing verdict".into()))?;
                let v: Verdict = serde_json::from_value(parse_numbers(body))
                    .map_err(|e| CliError::Wire(format!("bad verdict record: {e}")))?;
                WireMessage::Verdict(Box::new(v))
            }
            "ERROR" => WireMessage::Error {
                message: f.text("message")?.to_string(),
            },
            k => return Err(CliError::Wire(format!("unknown kind {k:?}"))),
        })
    }
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> io::Result<()> {
    if payload.len() > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "frame too long"));
    }
    w.write_all(&(payload.len() as u32).to_be_bytes())?;
    w.write_all(payload)
}

pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Vec<u8>> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("frame of {len} bytes exceeds the limit")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

/// Writes one frame and flushes.
pub fn send<W: Write>(w: &mut W, msg: &WireMessage) -> Result<()> {
    write_frame(w, &msg.encode())?;
    w.flush()?;
    Ok(())
}

pub fn recv<R: Read>(r: &mut R) -> Result<WireMessage> {
    WireMessage::decode(&read_frame(r)?)
}
