//! Prover and verifier sessions over TCP.
//!
//! The prover announces each register, then answers exactly `n` measurement
//! requests for it, one site at a time; the verifier only sends the next
//! request after the previous outcome has arrived. After the last register
//! the verifier sends its VERDICT. Either side answers a message it did not
//! expect with ERROR and closes the session.

use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::thread;
use std::time::Duration;

use gsverify_core::verifier::{ProtocolRun, ProverSession, Verdict, VerifierSession};

use crate::experiment::Experiment;
use crate::wire::{self, mode_tag, Hello, Peer, WireMessage, PROTOCOL_VERSION};
use crate::{CliError, Result};

/// Read, write and connect timeout. A silent peer fails the session after this long.
pub const IO_TIMEOUT: Duration = Duration::from_secs(30);

pub fn hello(exp: &Experiment, role: Peer, trial: u64) -> Hello {
    Hello {
        role,
        version: PROTOCOL_VERSION.to_string(),
        n: exp.params.n,
        n_test: exp.params.n_test,
        n_total: exp.params.n_total,
        seed: exp.params.seed,
        trial,
        mode: mode_tag(&exp.params.mode),
    }
}

fn unexpected(got: &WireMessage, wanted: &str) -> CliError {
    CliError::Simulation(gsverify_core::Error::ProtocolOrder(format!(
        "expected {wanted}, got {}",
        got.kind()
    )))
}

/// A connected stream with buffered halves.
pub struct Connection {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Connection {
    pub fn new(stream: TcpStream) -> Result<Self> {
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(IO_TIMEOUT))?;
        stream.set_write_timeout(Some(IO_TIMEOUT))?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }

    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let mut last = None;
        for a in addr.to_socket_addrs()? {
            match TcpStream::connect_timeout(&a, IO_TIMEOUT) {
                Ok(s) => return Self::new(s),
                Err(e) => last = Some(e),
            }
        }
        Err(last
            .unwrap_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "endpoint resolves to nothing"))
            .into())
    }

    pub fn send(&mut self, msg: &WireMessage) -> Result<()> {
        wire::send(&mut self.writer, msg)
    }

    /// Next message; an ERROR from the peer becomes [`CliError::Peer`].
    pub fn recv(&mut self) -> Result<WireMessage> {
        match wire::recv(&mut self.reader)? {
            WireMessage::Error { message } => Err(CliError::Peer(message)),
            m => Ok(m),
        }
    }

    /// Tells the peer why the session ends, unless the link itself failed or
    /// the peer ended it first.
    fn abort<T>(&mut self, r: Result<T>) -> Result<T> {
        if let Err(e) = &r {
            if !matches!(e, CliError::Io(_) | CliError::Peer(_)) {
                let _ = self.send(&WireMessage::Error { message: e.to_string() });
            }
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProverReport {
    pub trial: u64,
    pub registers_sent: u64,
    /// As received from the verifier.
    pub verdict: Verdict,
}

/// Serves one verifier on an accepted connection.
pub fn prover_session(exp: &Experiment, stream: TcpStream) -> Result<ProverReport> {
    let mut conn = Connection::new(stream)?;
    let r = prover_loop(exp, &mut conn);
    conn.abort(r)
}

fn prover_loop(exp: &Experiment, conn: &mut Connection) -> Result<ProverReport> {
    let theirs = match conn.recv()? {
        WireMessage::Hello(h) if h.role == Peer::Verifier => h,
        m => return Err(unexpected(&m, "verifier HELLO")),
    };
    let ours = hello(exp, Peer::Prover, theirs.trial);
    if !ours.agrees_with(&theirs) {
        return Err(CliError::Wire(format!("session mismatch: verifier {theirs:?}, prover {ours:?}")));
    }
    conn.send(&WireMessage::Hello(ours))?;
    let trial = theirs.trial;
    let mut prover = ProverSession::new(&exp.params, &exp.graph, exp.assignment(trial)?, trial)?;
    let mut sent = 0;
    while let Some(id) = prover.announce()? {
        conn.send(&WireMessage::RegisterAnnounce { register: id })?;
        sent += 1;
        for _ in 0..exp.params.n {
            let req = match conn.recv()? {
                WireMessage::MeasureRequest(r) => r,
                m => return Err(unexpected(&m, "MEASURE_REQUEST")),
            };
            let outcome = prover.respond(req)?;
            conn.send(&WireMessage::Outcome { outcome, basis: req.basis })?;
        }
    }
    match conn.recv()? {
        WireMessage::Verdict(v) => Ok(ProverReport {
            trial,
            registers_sent: sent,
            verdict: *v,
        }),
        m => Err(unexpected(&m, "VERDICT")),
    }
}

/// Accepts `sessions` verifiers one after another.
pub fn serve_prover(exp: &Experiment, listener: &TcpListener, sessions: usize) -> Result<Vec<ProverReport>> {
    (0..sessions)
        .map(|_| {
            let (stream, _) = listener.accept()?;
            prover_session(exp, stream)
        })
        .collect()
}

/// Runs trial `trial` as the verifier against a prover at `addr`.
pub fn run_verifier_client(exp: &Experiment, addr: impl ToSocketAddrs, trial: u64) -> Result<ProtocolRun> {
    let mut conn = Connection::connect(addr)?;
    let r = verifier_loop(exp, &mut conn, trial);
    conn.abort(r)
}

fn verifier_loop(exp: &Experiment, conn: &mut Connection, trial: u64) -> Result<ProtocolRun> {
    let ours = hello(exp, Peer::Verifier, trial);
    conn.send(&WireMessage::Hello(ours.clone()))?;
    match conn.recv()? {
        WireMessage::Hello(h) if h.role == Peer::Prover && h.agrees_with(&ours) => {}
        WireMessage::Hello(h) => {
            return Err(CliError::Wire(format!("session mismatch: verifier {ours:?}, prover {h:?}")));
        }
        m => return Err(unexpected(&m, "prover HELLO")),
    }
    let mut verifier = VerifierSession::new(&exp.params, &exp.graph, trial, exp.config.record_transcript)?;
    while !verifier.is_complete() {
        match conn.recv()? {
            WireMessage::RegisterAnnounce { register } => verifier.on_announce(register)?,
            m => return Err(unexpected(&m, "REGISTER_ANNOUNCE")),
        }
        for _ in 0..exp.params.n {
            let req = verifier.next_request()?;
            conn.send(&WireMessage::MeasureRequest(req))?;
            match conn.recv()? {
                WireMessage::Outcome { outcome, basis } if basis == req.basis => verifier.on_outcome(outcome)?,
                m => return Err(unexpected(&m, "OUTCOME in the requested basis")),
            }
        }
    }
    let verdict = verifier.verdict()?;
    conn.send(&WireMessage::Verdict(Box::new(verdict.clone())))?;
    Ok(ProtocolRun {
        verdict,
        roles: verifier.selection().roles.clone(),
        pending_high_water: verifier.pending_high_water(),
        transcript: verifier.into_transcript(),
    })
}

/// One trial with both roles in this process, talking over 127.0.0.1.
pub fn loopback(exp: &Experiment, trial: u64) -> Result<ProtocolRun> {
    let listener = TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0)))?;
    let addr = listener.local_addr()?;
    thread::scope(|s| {
        let server = s.spawn(|| {
            let (stream, _) = listener.accept()?;
            prover_session(exp, stream)
        });
        let client = run_verifier_client(exp, addr, trial);
        let server = server.join().expect("prover thread panicked");
        let run = client?;
        let report = server?;
        if report.verdict != run.verdict {
            return Err(CliError::Wire("prover received a different verdict than the verifier sent".into()));
        }
        Ok(run)
    })
}
