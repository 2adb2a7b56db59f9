//! The verification protocol.
//!
//! 1. The prover streams `N_total` registers, one site at a time.
//! 2. Before anything arrives, the verifier draws one uniform permutation of
//!    the register ids and cuts it into `n` test groups of `N_test` (group `i`
//!    is tested with `g_i`), then `ntilde` targets; the rest are discarded.
//! 3. Every test outcome is folded into per-group pass counts as soon as its
//!    register ends, so at most one register's outcomes are ever held.
//! 4. The run is accepted iff `2n N_pass >= (2n^2 - 1) N_test`, evaluated in
//!    integers.
//!
//! [`VerifierSession`] and [`ProverSession`] are the two ends of that
//! exchange. [`run_protocol`] wires them together in-process; the `gsverify`
//! crate carries the same calls over TCP, so both paths consume randomness in
//! the same order and produce the same verdict.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{RegisterAssignment, RegisterState};
use crate::bounds::{certified_count, total_confidence};
use crate::cv::{cv_test_sites, CvBackend, CvModel, CvRegister, CvTestOutcome, NoiseModel, Quadrature};
use crate::graph::{build_nullifiers, build_stabilizers, CvNullifierSpec, QuditStabilizerSpec, WeightedHypergraph};
use crate::qudit::{GraphBasisState, QuditBasis, QuditRegister, TableauRegister, TestOutcome};
use crate::rng::{stream, Purpose, GENERATOR_NAME};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mode {
    Qudit {
        d: u32,
    },
    Cv {
        noise: NoiseModel,
        tau: f64,
        backend: CvBackend,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Sites per register.
    pub n: usize,
    pub mode: Mode,
    pub c: f64,
    pub n_test: u64,
    pub n_total: u64,
    /// Number of target registers.
    pub ntilde: u64,
    pub seed: u64,
    /// Refuse parameters outside the theorem regime instead of flagging them.
    pub strict: bool,
}

/// Where the parameters fall outside the range the fidelity bound is proven
/// for. Any set flag marks the bound as a non-theorem output.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeFlags {
    /// `c <= 64/5`.
    pub c_too_small: bool,
    /// `c >= [n/ntilde - 32(ntilde-1)/(5 ntilde n^4 ln n) - 1]^2 / 4`.
    pub c_too_large: bool,
    /// `n < 9 ntilde`.
    pub n_too_small: bool,
    /// `N_total != 2 n N_test`.
    pub n_total_off: bool,
}

impl RegimeFlags {
    pub fn in_regime(&self) -> bool {
        !(self.c_too_small || self.c_too_large || self.n_too_small || self.n_total_off)
    }

    fn describe(&self) -> String {
        let mut parts = Vec::new();
        if self.c_too_small {
            parts.push("c <= 64/5");
        }
        if self.c_too_large {
            parts.push("c above the upper limit for n");
        }
        if self.n_too_small {
            parts.push("n < 9 ntilde");
        }
        if self.n_total_off {
            parts.push("N_total != 2 n N_test");
        }
        parts.join(", ")
    }
}

/// Upper limit on `c`: `[n/ntilde - 32(ntilde-1)/(5 ntilde n^4 ln n) - 1]^2 / 4`.
pub fn c_upper_limit(n: usize, ntilde: u64) -> f64 {
    let nf = n as f64;
    let k = ntilde as f64;
    let correction = if ntilde > 1 {
        32.0 * (k - 1.0) / (5.0 * k * libm::pow(nf, 4.0) * libm::log(nf))
    } else {
        0.0
    };
    let base = nf / k - correction - 1.0;
    base * base / 4.0
}

impl ProtocolParams {
    /// `N_test = ceil(5 n^4 ln n / 32)`, `N_total = 2 n N_test`, one target.
    pub fn theorem(n: usize, mode: Mode, c: f64, seed: u64) -> Result<Self> {
        let n_test = compute_n_test(n as u64)?;
        Ok(Self {
            n,
            mode,
            c,
            n_test,
            n_total: 2 * n as u64 * n_test,
            ntilde: 1,
            seed,
            strict: false,
        })
    }

    pub fn regime(&self) -> RegimeFlags {
        RegimeFlags {
            c_too_small: !(self.c > 64.0 / 5.0),
            c_too_large: !(self.c < c_upper_limit(self.n, self.ntilde)),
            n_too_small: (self.n as u64) < 9 * self.ntilde,
            n_total_off: self.n_total != 2 * self.n as u64 * self.n_test,
        }
    }

    /// Hard errors for unusable parameters; regime violations are errors only
    /// in strict mode.
    pub fn validate(&self) -> Result<RegimeFlags> {
        if self.n == 0 {
            return Err(Error::EmptyGraph);
        }
        if self.n_test == 0 {
            return Err(Error::domain("N_test", 0.0, "N_test >= 1"));
        }
        if self.ntilde == 0 {
            return Err(Error::domain("ntilde", 0.0, "ntilde >= 1"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::domain("c", self.c, "finite and > 0"));
        }
        match self.mode {
            Mode::Qudit { d } if d < 2 => return Err(Error::Dimension(d)),
            Mode::Cv { noise, tau, .. } => noise.check_tolerance(tau)?,
            _ => {}
        }
        let needed = self.n as u64 * self.n_test + self.ntilde;
        if self.n_total < needed {
            return Err(Error::InsufficientRegisters {
                needed,
                have: self.n_total,
            });
        }
        let flags = self.regime();
        if self.strict && !flags.in_regime() {
            return Err(Error::Regime(flags.describe()));
        }
        Ok(flags)
    }
}

/// `ceil(5 n^4 ln n / 32)`, natural log.
pub fn compute_n_test(n: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::domain("n", 0.0, "n >= 1"));
    }
    let nf = n as f64;
    Ok(libm::ceil(5.0 * libm::pow(nf, 4.0) * libm::log(nf) / 32.0) as u64)
}

/// `2n N_pass >= (2n^2 - 1) N_test`.
pub fn accepts(n: usize, n_pass: u64, n_test: u64) -> bool {
    let n = n as u128;
    2 * n * n_pass as u128 >= (2 * n * n - 1) * n_test as u128
}

/// `1 - 2 sqrt(c)/n - 2n (1 - N_pass / (n N_test))`.
pub fn certified_fidelity_bound(n: usize, c: f64, n_pass: u64, n_test: u64) -> Result<f64> {
    if n_test == 0 {
        return Err(Error::domain("N_test", 0.0, "N_test >= 1"));
    }
    let nf = n as f64;
    let ratio = n_pass as f64 / (nf * n_test as f64);
    Ok(1.0 - 2.0 * libm::sqrt(c) / nf - 2.0 * nf * (1.0 - ratio))
}

/// Bound on `ntilde` targets jointly:
/// `1 - (2 sqrt c + 2n^2 - 2n N_pass/N_test) ntilde N_test / (n N_test - (ntilde - 1))`.
pub fn multi_copy_bound(n: usize, c: f64, ntilde: u64, n_pass: u64, n_test: u64) -> Result<f64> {
    if n_test == 0 {
        return Err(Error::domain("N_test", 0.0, "N_test >= 1"));
    }
    let nf = n as f64;
    let nt = n_test as f64;
    let denom = nf * nt - (ntilde as f64 - 1.0);
    if !(denom > 0.0) {
        return Err(Error::domain("n N_test - (ntilde - 1)", denom, "> 0"));
    }
    let gap = 2.0 * libm::sqrt(c) + 2.0 * nf * nf - 2.0 * nf * n_pass as f64 / nt;
    Ok(1.0 - gap * ntilde as f64 * nt / denom)
}

/// Single-target bound at the acceptance threshold: `1 - (2 sqrt c + 1)/n`.
pub fn threshold_bound(n: usize, c: f64) -> f64 {
    1.0 - (2.0 * libm::sqrt(c) + 1.0) / n as f64
}

/// Multi-target bound at the threshold with the un-rounded `N_test`:
/// `1 - (2 sqrt c + 1) 5 ntilde n^4 ln n / (5 n^5 ln n - 32 (ntilde - 1))`.
pub fn threshold_multi_copy_bound(n: usize, c: f64, ntilde: u64) -> f64 {
    let nf = n as f64;
    let k = ntilde as f64;
    let ln = libm::log(nf);
    1.0 - (2.0 * libm::sqrt(c) + 1.0) * 5.0 * k * libm::pow(nf, 4.0) * ln / (5.0 * libm::pow(nf, 5.0) * ln - 32.0 * (k - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    /// Tested with `g_vertex`.
    Test(usize),
    Target,
    Discard,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSelection {
    /// `groups[i]` holds the 1-based ids tested with `g_{i+1}`, in draw order.
    pub groups: Vec<Vec<u64>>,
    pub targets: Vec<u64>,
    /// Role of register `r` at index `r - 1`.
    pub roles: Vec<Role>,
}

/// One uniform permutation of `1..=N_total`, cut in order into the groups,
/// then the targets; everything after is discarded.
pub fn sample_groups<R: Rng + ?Sized>(params: &ProtocolParams, rng: &mut R) -> Result<GroupSelection> {
    let needed = params.n as u64 * params.n_test + params.ntilde;
    if params.n_total < needed {
        return Err(Error::InsufficientRegisters {
            needed,
            have: params.n_total,
        });
    }
    let mut perm: Vec<u64> = (1..=params.n_total).collect();
    perm.shuffle(rng);
    let nt = params.n_test as usize;
    let mut roles = vec![Role::Discard; params.n_total as usize];
    let mut groups = Vec::with_capacity(params.n);
    for i in 0..params.n {
        let group = perm[i * nt..(i + 1) * nt].to_vec();
        for &r in &group {
            roles[(r - 1) as usize] = Role::Test(i + 1);
        }
        groups.push(group);
    }
    let start = params.n * nt;
    let targets = perm[start..start + params.ntilde as usize].to_vec();
    for &r in &targets {
        roles[(r - 1) as usize] = Role::Target;
    }
    Ok(GroupSelection { groups, targets, roles })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SiteBasis {
    Qudit(QuditBasis),
    Cv(Quadrature),
    /// The site is not measured.
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OutcomeValue {
    Qudit(u32),
    Cv(f64),
    /// Acknowledges a discarded site.
    Discarded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureRequest {
    pub register: u64,
    pub site: usize,
    pub basis: SiteBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureOutcome {
    pub register: u64,
    pub site: usize,
    pub value: OutcomeValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TestResult {
    Qudit(TestOutcome),
    Cv(CvTestOutcome),
}

impl TestResult {
    pub fn passed(&self) -> bool {
        match self {
            Self::Qudit(o) => o.passed,
            Self::Cv(o) => o.passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub register: u64,
    /// Vertex of the tested stabilizer.
    pub group: usize,
    pub result: TestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub params: ProtocolParams,
    pub trial: u64,
    pub groups: Vec<Vec<u64>>,
    /// In streaming (register id) order.
    pub tests: Vec<TestRecord>,
    pub n_pass_per_group: Vec<u64>,
    pub target_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub accepted: bool,
    pub n_pass: u64,
    pub n_pass_per_group: Vec<u64>,
    pub n: usize,
    pub c: f64,
    pub n_test: u64,
    pub n_total: u64,
    pub ntilde: u64,
    /// Theorem bound capped at 1.
    pub fidelity_bound: f64,
    pub fidelity_bound_raw: f64,
    /// `1 - n^{1 - 5c/64}` clamped to `[0, 1]`.
    pub confidence: f64,
    pub confidence_raw: f64,
    /// Remainder registers certified to pass every stabilizer.
    pub certified_count: u64,
    pub regime: RegimeFlags,
    pub in_regime: bool,
    pub target_ids: Vec<u64>,
    pub seed: u64,
    pub trial: u64,
    pub rng: String,
}

fn order(msg: String) -> Error {
    Error::ProtocolOrder(msg)
}

/// The measuring side. Holds the role table and per-group counters; test
/// outcomes live only until their register ends.
#[derive(Debug, Clone)]
pub struct VerifierSession {
    params: ProtocolParams,
    trial: u64,
    regime: RegimeFlags,
    qudit_specs: Vec<QuditStabilizerSpec>,
    cv_specs: Vec<CvNullifierSpec>,
    /// `plans[i][site]`: basis for `site` when testing `g_{i+1}`.
    plans: Vec<Vec<SiteBasis>>,
    selection: GroupSelection,
    next_register: u64,
    current: Option<u64>,
    next_site: usize,
    awaiting: Option<MeasureRequest>,
    pending: Vec<OutcomeValue>,
    high_water: usize,
    pass_counts: Vec<u64>,
    transcript: Option<Transcript>,
}

impl VerifierSession {
    /// Validates `params` and draws the group selection from the
    /// `(seed, trial)` selection stream.
    pub fn new(params: &ProtocolParams, graph: &WeightedHypergraph, trial: u64, record_transcript: bool) -> Result<Self> {
        let regime = params.validate()?;
        if graph.n() != params.n {
            return Err(Error::LengthMismatch {
                expected: params.n,
                got: graph.n(),
            });
        }
        let (qudit_specs, cv_specs, plans) = match params.mode {
            Mode::Qudit { d } => {
                let specs = build_stabilizers(graph, d)?;
                let plans = specs
                    .iter()
                    .map(|s| {
                        let mut plan = vec![SiteBasis::Discard; params.n];
                        for (site, is_x) in s.measured_sites() {
                            plan[site] = SiteBasis::Qudit(if is_x { QuditBasis::X } else { QuditBasis::Z });
                        }
                        plan
                    })
                    .collect();
                (specs, Vec::new(), plans)
            }
            Mode::Cv { .. } => {
                let specs = build_nullifiers(graph);
                let plans = specs
                    .iter()
                    .map(|s| {
                        let mut plan = vec![SiteBasis::Discard; params.n];
                        for (site, q) in cv_test_sites(s) {
                            plan[site] = SiteBasis::Cv(q);
                        }
                        plan
                    })
                    .collect();
                (Vec::new(), specs, plans)
            }
        };
        let mut rng = stream(params.seed, trial, Purpose::Selection);
        let selection = sample_groups(params, &mut rng)?;
        let transcript = record_transcript.then(|| Transcript {
            params: params.clone(),
            trial,
            groups: selection.groups.clone(),
            tests: Vec::new(),
            n_pass_per_group: Vec::new(),
            target_ids: selection.targets.clone(),
        });
        Ok(Self {
            params: params.clone(),
            trial,
            regime,
            qudit_specs,
            cv_specs,
            plans,
            selection,
            next_register: 1,
            current: None,
            next_site: 0,
            awaiting: None,
            pending: Vec::with_capacity(params.n),
            high_water: 0,
            pass_counts: vec![0; params.n],
            transcript,
        })
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn selection(&self) -> &GroupSelection {
        &self.selection
    }

    /// Largest number of outcome values held at once.
    pub fn pending_high_water(&self) -> usize {
        self.high_water
    }

    pub fn transcript(&self) -> Option<&Transcript> {
        self.transcript.as_ref()
    }

    pub fn is_complete(&self) -> bool {
        self.current.is_none() && self.next_register > self.params.n_total
    }

    pub fn on_announce(&mut self, register: u64) -> Result<()> {
        if let Some(cur) = self.current {
            return Err(order(format!("register {register} announced before register {cur} finished")));
        }
        if register != self.next_register || register > self.params.n_total {
            return Err(order(format!("expected register {}, got {register}", self.next_register)));
        }
        self.current = Some(register);
        self.next_site = 0;
        Ok(())
    }

    pub fn next_request(&mut self) -> Result<MeasureRequest> {
        let Some(register) = self.current else {
            return Err(order("measurement requested with no register announced".to_string()));
        };
        if let Some(req) = self.awaiting {
            return Err(order(format!("site {} of register {} still awaits its outcome", req.site, req.register)));
        }
        let basis = match self.selection.roles[(register - 1) as usize] {
            Role::Test(v) => self.plans[v - 1][self.next_site],
            Role::Target | Role::Discard => SiteBasis::Discard,
        };
        let req = MeasureRequest {
            register,
            site: self.next_site,
            basis,
        };
        self.awaiting = Some(req);
        Ok(req)
    }

    pub fn on_outcome(&mut self, outcome: MeasureOutcome) -> Result<()> {
        let Some(req) = self.awaiting else {
            return Err(order(format!(
                "unrequested outcome for register {} site {}",
                outcome.register, outcome.site
            )));
        };
        if outcome.register != req.register || outcome.site != req.site {
            return Err(order(format!(
                "outcome for register {} site {} while awaiting register {} site {}",
                outcome.register, outcome.site, req.register, req.site
            )));
        }
        match (req.basis, outcome.value) {
            (SiteBasis::Discard, OutcomeValue::Discarded) => {}
            (SiteBasis::Qudit(_), OutcomeValue::Qudit(v)) => {
                let Mode::Qudit { d } = self.params.mode else { unreachable!() };
                if v >= d {
                    return Err(order(format!("qudit outcome {v} outside 0..{d}")));
                }
                self.pending.push(outcome.value);
            }
            (SiteBasis::Cv(_), OutcomeValue::Cv(v)) if v.is_finite() => self.pending.push(outcome.value),
            _ => return Err(order(format!("outcome kind does not match the requested basis at site {}", req.site))),
        }
        self.high_water = self.high_water.max(self.pending.len());
        self.awaiting = None;
        self.next_site += 1;
        if self.next_site == self.params.n {
            self.finish_register(req.register);
        }
        Ok(())
    }

    fn finish_register(&mut self, register: u64) {
        if let Role::Test(v) = self.selection.roles[(register - 1) as usize] {
            let result = match self.params.mode {
                Mode::Qudit { d } => {
                    let spec = &self.qudit_specs[v - 1];
                    let mut x = 0;
                    let mut z = Vec::with_capacity(spec.neighbors.len());
                    for ((site, is_x), value) in spec.measured_sites().zip(&self.pending) {
                        let OutcomeValue::Qudit(m) = *value else { unreachable!() };
                        if is_x {
                            x = m;
                        } else {
                            z.push((site + 1, m));
                        }
                    }
                    TestResult::Qudit(TestOutcome::from_raw(d, x, z))
                }
                Mode::Cv { tau, .. } => {
                    let spec = &self.cv_specs[v - 1];
                    let mut p = 0.0;
                    let mut x = Vec::new();
                    for ((site, q), value) in cv_test_sites(spec).into_iter().zip(&self.pending) {
                        let OutcomeValue::Cv(val) = *value else { unreachable!() };
                        match q {
                            Quadrature::P => p = val,
                            Quadrature::X => x.push((site + 1, val)),
                        }
                    }
                    TestResult::Cv(CvTestOutcome::from_raw(spec, p, x, tau))
                }
            };
            if result.passed() {
                self.pass_counts[v - 1] += 1;
            }
            if let Some(t) = &mut self.transcript {
                t.tests.push(TestRecord {
                    register,
                    group: v,
                    result,
                });
            }
        }
        self.pending.clear();
        self.current = None;
        self.next_register += 1;
    }

    pub fn verdict(&self) -> Result<Verdict> {
        if !self.is_complete() {
            return Err(order(format!(
                "verdict requested after {} of {} registers",
                self.next_register - 1,
                self.params.n_total
            )));
        }
        let p = &self.params;
        let n_pass: u64 = self.pass_counts.iter().sum();
        let raw = if p.ntilde == 1 {
            certified_fidelity_bound(p.n, p.c, n_pass, p.n_test)?
        } else {
            multi_copy_bound(p.n, p.c, p.ntilde, n_pass, p.n_test)?
        };
        let conf = total_confidence(p.n as u64, p.c);
        Ok(Verdict {
            accepted: accepts(p.n, n_pass, p.n_test),
            n_pass,
            n_pass_per_group: self.pass_counts.clone(),
            n: p.n,
            c: p.c,
            n_test: p.n_test,
            n_total: p.n_total,
            ntilde: p.ntilde,
            fidelity_bound: raw.min(1.0),
            fidelity_bound_raw: raw,
            confidence: conf.value,
            confidence_raw: conf.raw,
            certified_count: certified_count(p.n as u64, p.n_test, n_pass, p.c)?,
            regime: self.regime,
            in_regime: self.regime.in_regime(),
            target_ids: self.selection.targets.clone(),
            seed: p.seed,
            trial: self.trial,
            rng: GENERATOR_NAME.to_string(),
        })
    }

    /// Final transcript with pass counts filled in.
    pub fn into_transcript(self) -> Option<Transcript> {
        let counts = self.pass_counts;
        self.transcript.map(|mut t| {
            t.n_pass_per_group = counts;
            t
        })
    }
}

enum ActiveRegister {
    Qudit(QuditRegister),
    Cv(CvRegister),
}

/// The preparing side: turns the committed assignment into per-register
/// simulators and answers measurement requests with the `(seed, trial)`
/// physics stream.
pub struct ProverSession {
    n: usize,
    mode: Mode,
    assignment: Arc<RegisterAssignment>,
    rng: ChaCha8Rng,
    adjacency: Arc<Vec<Vec<usize>>>,
    cv_model: Option<CvModel>,
    next_register: u64,
    current: Option<(u64, ActiveRegister)>,
    next_site: usize,
    scratch: Option<GraphBasisState>,
}

impl ProverSession {
    pub fn new(
        params: &ProtocolParams,
        graph: &WeightedHypergraph,
        assignment: Arc<RegisterAssignment>,
        trial: u64,
    ) -> Result<Self> {
        params.validate()?;
        assignment.validate(params)?;
        let cv_model = match params.mode {
            Mode::Qudit { d } => {
                build_stabilizers(graph, d)?;
                None
            }
            Mode::Cv { noise, backend, .. } => Some(CvModel::honest(graph, noise, backend)?),
        };
        Ok(Self {
            n: params.n,
            mode: params.mode,
            assignment,
            rng: stream(params.seed, trial, Purpose::Physics),
            adjacency: Arc::new(graph.adjacency0()),
            cv_model,
            next_register: 1,
            current: None,
            next_site: 0,
            scratch: None,
        })
    }

    /// Prepares the next register and returns its id, or `None` when all
    /// registers have been sent.
    pub fn announce(&mut self) -> Result<Option<u64>> {
        if let Some((id, _)) = &self.current {
            return Err(order(format!("register {id} is not finished")));
        }
        let total = self.assignment.len() as u64;
        if self.next_register > total {
            return Ok(None);
        }
        let id = self.next_register;
        let assignment = Arc::clone(&self.assignment);
        let state = assignment.states()[(id - 1) as usize].sample_component(&mut self.rng);
        let active = self.prepare(state)?;
        self.current = Some((id, active));
        self.next_site = 0;
        self.next_register += 1;
        Ok(Some(id))
    }

    fn prepare(&mut self, state: &RegisterState) -> Result<ActiveRegister> {
        match self.mode {
            Mode::Qudit { d } => {
                let reg = match state {
                    RegisterState::Ideal | RegisterState::Deviated(_) => {
                        let mut g = self
                            .scratch
                            .take()
                            .unwrap_or_else(|| GraphBasisState::with_adjacency(Arc::clone(&self.adjacency), d));
                        match state {
                            RegisterState::Deviated(a) => g.reset(Some(a))?,
                            _ => g.reset(None)?,
                        }
                        QuditRegister::GraphBasis(g)
                    }
                    RegisterState::Stabilizer(t) => QuditRegister::Tableau(TableauRegister::new((**t).clone())),
                    RegisterState::Dense(s) => QuditRegister::Dense((**s).clone()),
                    RegisterState::Shifted(_) | RegisterState::Mixture(_) => {
                        return Err(Error::UnsupportedPattern("register state does not match qudit mode"));
                    }
                };
                Ok(ActiveRegister::Qudit(reg))
            }
            Mode::Cv { .. } => {
                let model = self.cv_model.as_ref().expect("CV mode has a model");
                let reg = match state {
                    RegisterState::Ideal => model.register(),
                    RegisterState::Shifted(s) => model.register_with_shifts(s)?,
                    _ => return Err(Error::UnsupportedPattern("register state does not match CV mode")),
                };
                Ok(ActiveRegister::Cv(reg))
            }
        }
    }

    pub fn respond(&mut self, req: MeasureRequest) -> Result<MeasureOutcome> {
        let Some((id, active)) = &mut self.current else {
            return Err(order(format!("request for register {} with none announced", req.register)));
        };
        if req.register != *id || req.site != self.next_site {
            return Err(order(format!(
                "request for register {} site {} but next is register {} site {}",
                req.register, req.site, id, self.next_site
            )));
        }
        let rng = &mut self.rng;
        let value = match (active, req.basis) {
            (ActiveRegister::Qudit(r), SiteBasis::Discard) => {
                r.discard_site(req.site)?;
                OutcomeValue::Discarded
            }
            (ActiveRegister::Cv(r), SiteBasis::Discard) => {
                r.discard_site(req.site)?;
                OutcomeValue::Discarded
            }
            (ActiveRegister::Qudit(r), SiteBasis::Qudit(b)) => OutcomeValue::Qudit(r.measure_site(req.site, b, rng)?),
            (ActiveRegister::Cv(r), SiteBasis::Cv(q)) => OutcomeValue::Cv(r.measure_site(req.site, q, rng)?),
            _ => return Err(Error::WrongBasis("basis kind does not match the register")),
        };
        self.next_site += 1;
        if self.next_site == self.n {
            if let Some((_, ActiveRegister::Qudit(QuditRegister::GraphBasis(g)))) = self.current.take() {
                self.scratch = Some(g);
            }
        }
        Ok(MeasureOutcome {
            register: req.register,
            site: req.site,
            value,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub verdict: Verdict,
    pub transcript: Option<Transcript>,
    pub roles: Vec<Role>,
    pub pending_high_water: usize,
}

/// Both sessions connected directly.
pub fn run_protocol(
    params: &ProtocolParams,
    graph: &WeightedHypergraph,
    assignment: Arc<RegisterAssignment>,
    trial: u64,
    record_transcript: bool,
) -> Result<ProtocolRun> {
    let mut verifier = VerifierSession::new(params, graph, trial, record_transcript)?;
    let mut prover = ProverSession::new(params, graph, assignment, trial)?;
    while let Some(id) = prover.announce()? {
        verifier.on_announce(id)?;
        for _ in 0..params.n {
            let req = verifier.next_request()?;
            verifier.on_outcome(prover.respond(req)?)?;
        }
    }
    let verdict = verifier.verdict()?;
    let roles = verifier.selection.roles.clone();
    let pending_high_water = verifier.pending_high_water();
    Ok(ProtocolRun {
        verdict,
        transcript: verifier.into_transcript(),
        roles,
        pending_high_water,
    })
}

/// Expected product of fidelities over a uniformly random `ntilde`-subset of
/// the untested registers, i.e. the target fidelity of the ensemble.
pub fn ensemble_target_fidelity(fidelities: &[f64], roles: &[Role], ntilde: u64) -> f64 {
    let k = ntilde as usize;
    // avg[j] = mean product over j-subsets of the registers seen so far.
    let mut avg = vec![0.0; k + 1];
    avg[0] = 1.0;
    let mut m = 0usize;
    for (f, role) in fidelities.iter().zip(roles) {
        if matches!(role, Role::Test(_)) {
            continue;
        }
        m += 1;
        let mf = m as f64;
        for j in (1..=k.min(m)).rev() {
            avg[j] = (mf - j as f64) / mf * avg[j] + j as f64 / mf * f * avg[j - 1];
        }
    }
    avg[k]
}

/// Product of the fidelities of the chosen targets.
pub fn realized_target_fidelity(fidelities: &[f64], targets: &[u64]) -> f64 {
    targets.iter().map(|&r| fidelities[(r - 1) as usize]).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{BadModel, Position, Strategy};

    fn small(n: usize, d: u32, n_test: u64, seed: u64) -> ProtocolParams {
        ProtocolParams {
            n,
            mode: Mode::Qudit { d },
            c: 16.0,
            n_test,
            n_total: 2 * n as u64 * n_test,
            ntilde: 1,
            seed,
            strict: false,
        }
    }

    #[test]
    fn n_test_values() {
        assert_eq!(compute_n_test(1).unwrap(), 0);
        assert_eq!(compute_n_test(9).unwrap(), 2253);
        assert_eq!(compute_n_test(10).unwrap(), 3598);
        assert!(compute_n_test(0).is_err());
    }

    #[test]
    fn acceptance_threshold_is_integer_exact() {
        // n = 3, N_test = 18: threshold N_pass = (3 - 1/6) 18 = 51.
        assert!(accepts(3, 51, 18));
        assert!(!accepts(3, 50, 18));
        assert!(accepts(9, 9 * 2253, 2253));
    }

    #[test]
    fn bound_examples() {
        let b = certified_fidelity_bound(16, 13.0, 16 * 40, 40).unwrap();
        assert!((b - (1.0 - 2.0 * libm::sqrt(13.0) / 16.0)).abs() < 1e-15);
        assert!((b - 0.549306).abs() < 1e-6);
        assert!(certified_fidelity_bound(16, 13.0, 0, 0).is_err());
        assert!(multi_copy_bound(2, 13.0, 10, 2, 1).is_err());
    }

    #[test]
    fn regime_flags() {
        let p = ProtocolParams::theorem(9, Mode::Qudit { d: 2 }, 16.0, 0).unwrap();
        let f = p.regime();
        assert!(f.c_too_large && !f.c_too_small && !f.n_too_small && !f.n_total_off);
        let p = ProtocolParams::theorem(16, Mode::Qudit { d: 2 }, 13.0, 0).unwrap();
        assert!(p.regime().in_regime());
        let strict = ProtocolParams { strict: true, ..ProtocolParams::theorem(9, Mode::Qudit { d: 2 }, 16.0, 0).unwrap() };
        assert!(matches!(strict.validate(), Err(Error::Regime(_))));
    }

    #[test]
    fn groups_partition() {
        let p = ProtocolParams { ntilde: 2, ..small(3, 2, 4, 0) };
        let mut rng = stream(5, 0, Purpose::Selection);
        let sel = sample_groups(&p, &mut rng).unwrap();
        let mut seen: Vec<u64> = sel.groups.iter().flatten().chain(&sel.targets).copied().collect();
        assert_eq!(seen.len(), 14);
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 14);
        let bad = ProtocolParams { n_total: 12, ..p };
        assert!(matches!(sample_groups(&bad, &mut rng), Err(Error::InsufficientRegisters { .. })));
    }

    #[test]
    fn honest_small_run() {
        let g = WeightedHypergraph::cycle(4).unwrap();
        let p = small(4, 3, 20, 11);
        let a = Arc::new(Strategy::Honest.assign(&p, 0).unwrap());
        let run = run_protocol(&p, &g, a, 0, true).unwrap();
        assert!(run.verdict.accepted);
        assert_eq!(run.verdict.n_pass, 80);
        assert!(run.pending_high_water <= 4);
        let t = run.transcript.unwrap();
        assert_eq!(t.tests.len(), 80);
        assert_eq!(t.n_pass_per_group, vec![20; 4]);
    }

    #[test]
    fn all_deviated_rejected() {
        let g = WeightedHypergraph::path(3).unwrap();
        let p = small(3, 5, 10, 2);
        let bad = Strategy::IidNoise { epsilon: 1.0, bad: BadModel::AllNonzero };
        let a = Arc::new(bad.assign(&p, 3).unwrap());
        let run = run_protocol(&p, &g, a, 0, false).unwrap();
        assert_eq!(run.verdict.n_pass, 0);
        assert!(!run.verdict.accepted);
    }

    #[test]
    fn single_bad_costs_at_most_one() {
        let g = WeightedHypergraph::path(3).unwrap();
        let p = small(3, 2, 10, 4);
        let s = Strategy::SingleBad { bad: BadModel::AllNonzero, position: Position::Uniform };
        for trial in 0..20 {
            let a = Arc::new(s.assign(&p, trial).unwrap());
            let run = run_protocol(&p, &g, a, trial, false).unwrap();
            assert!(run.verdict.n_pass + 1 >= 30);
        }
    }

    #[test]
    fn out_of_order_rejected() {
        let g = WeightedHypergraph::path(2).unwrap();
        let p = small(2, 2, 2, 0);
        let mut v = VerifierSession::new(&p, &g, 0, false).unwrap();
        assert!(v.next_request().is_err());
        assert!(v.on_announce(2).is_err());
        v.on_announce(1).unwrap();
        let req = v.next_request().unwrap();
        let wrong = MeasureOutcome { register: 1, site: 1, value: OutcomeValue::Discarded };
        assert!(v.on_outcome(wrong).is_err());
        assert!(v.verdict().is_err());
        let _ = req;
    }

    #[test]
    fn ensemble_fidelity_matches_hypergeometric() {
        let roles = [Role::Test(1), Role::Discard, Role::Target, Role::Discard, Role::Discard];
        let f = [0.0, 1.0, 1.0, 0.0, 1.0];
        assert!((ensemble_target_fidelity(&f, &roles, 1) - 0.75).abs() < 1e-15);
        // Pairs from {1, 1, 0, 1}: 3 of 6 are all-ideal.
        assert!((ensemble_target_fidelity(&f, &roles, 2) - 0.5).abs() < 1e-15);
        assert_eq!(realized_target_fidelity(&f, &[3]), 1.0);
    }
}
