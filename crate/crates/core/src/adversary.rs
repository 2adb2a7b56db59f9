//! Prover strategies. Every strategy commits to a full register assignment
//! from public parameters and a correlation seed alone, before the verifier
//! draws anything.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseState;
use crate::graph::WeightedHypergraph;
use crate::qudit::DeviationVector;
use crate::tableau::StabilizerTableau;
use crate::verifier::{Mode, ProtocolParams};
use crate::{Error, Result};

/// State of one register. `Mixture` is a classical mixture; a component is
/// drawn when the register is prepared.
#[derive(Debug, Clone, PartialEq)]
pub enum RegisterState {
    Ideal,
    /// `|G(a)>`, qudit mode.
    Deviated(Arc<[u32]>),
    /// `prod Z_i(s_i) |G_CV>`, CV mode.
    Shifted(Arc<[f64]>),
    /// Arbitrary stabilizer state, prime `d`.
    Stabilizer(Arc<StabilizerTableau>),
    /// Arbitrary pure state, small `n`.
    Dense(Arc<DenseState>),
    Mixture(Arc<[(f64, RegisterState)]>),
}

impl RegisterState {
    pub fn deviated(a: &DeviationVector) -> Self {
        if a.is_zero() {
            Self::Ideal
        } else {
            Self::Deviated(a.entries().into())
        }
    }

    pub fn shifted(s: &[f64]) -> Self {
        if s.iter().all(|&v| v == 0.0) {
            Self::Ideal
        } else {
            Self::Shifted(s.into())
        }
    }

    pub fn mixture(components: Vec<(f64, RegisterState)>) -> Result<Self> {
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if components.is_empty() || components.iter().any(|(w, _)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain("mixture weight total", total, "non-negative weights summing to 1"));
        }
        Ok(Self::Mixture(components.into()))
    }

    pub fn is_ideal(&self) -> bool {
        matches!(self, Self::Ideal)
    }

    /// Draws a mixture component (recursively); other states return themselves.
    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> &RegisterState {
        let Self::Mixture(parts) = self else {
            return self;
        };
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, s) in parts.iter() {
            acc += w;
            if u < acc {
                return s.sample_component(rng);
            }
        }
        parts[parts.len() - 1].1.sample_component(rng)
    }

    fn check(&self, n: usize, mode: &Mode) -> Result<()> {
        match (self, mode) {
            (Self::Ideal, _) => Ok(()),
            (Self::Deviated(a), Mode::Qudit { d }) => {
                if a.len() != n {
                    return Err(Error::LengthMismatch { expected: n, got: a.len() });
                }
                match a.iter().find(|&&v| v >= *d) {
                    Some(&v) => Err(Error::domain("deviation entry", v as f64, "entries in 0..d")),
                    None => Ok(()),
                }
            }
            (Self::Shifted(s), Mode::Cv { .. }) => {
                if s.len() != n {
                    return Err(Error::LengthMismatch { expected: n, got: s.len() });
                }
                match s.iter().find(|v| !v.is_finite()) {
                    Some(&v) => Err(Error::domain("shift", v, "finite")),
                    None => Ok(()),
                }
            }
            (Self::Stabilizer(t), Mode::Qudit { d }) => {
                if t.d() != *d {
                    return Err(Error::DimensionMismatch { expected: *d, got: t.d() });
                }
                if t.n() != n {
                    return Err(Error::LengthMismatch { expected: n, got: t.n() });
                }
                Ok(())
            }
            (Self::Dense(s), Mode::Qudit { d }) => {
                if s.d() != *d {
                    return Err(Error::DimensionMismatch { expected: *d, got: s.d() });
                }
                if s.n() != n {
                    return Err(Error::LengthMismatch { expected: n, got: s.n() });
                }
                Ok(())
            }
            (Self::Mixture(parts), _) => parts.iter().try_for_each(|(_, s)| s.check(n, mode)),
            (_, Mode::Qudit { .. }) => Err(Error::UnsupportedPattern("CV register state in qudit mode")),
            (_, Mode::Cv { .. }) => Err(Error::UnsupportedPattern("qudit register state in CV mode")),
        }
    }
}

/// Fidelities `<G|rho|G>` of register states against the ideal state.
///
/// Graph-basis states are orthogonal to `|G>` unless `a = 0`, and so are
/// Weyl-shifted CV states at infinite squeezing unless `s = 0`. Tableau and
/// dense states are compared against the dense ideal state.
pub struct FidelityOracle<'a> {
    graph: &'a WeightedHypergraph,
    mode: Mode,
    ideal: Option<DenseState>,
}

impl<'a> FidelityOracle<'a> {
    pub fn new(graph: &'a WeightedHypergraph, mode: Mode) -> Self {
        Self { graph, mode, ideal: None }
    }

    pub fn fidelity(&mut self, state: &RegisterState) -> Result<f64> {
        Ok(match state {
            RegisterState::Ideal => 1.0,
            RegisterState::Deviated(a) => f64::from(u8::from(a.iter().all(|&v| v == 0))),
            RegisterState::Shifted(s) => f64::from(u8::from(s.iter().all(|&v| v == 0.0))),
            RegisterState::Stabilizer(t) => {
                let dense = DenseState::from_tableau(t)?;
                self.ideal()?.fidelity(&dense).clamp(0.0, 1.0)
            }
            RegisterState::Dense(s) => self.ideal()?.fidelity(s).clamp(0.0, 1.0),
            RegisterState::Mixture(parts) => {
                let mut f = 0.0;
                for (w, s) in parts.iter() {
                    f += w * self.fidelity(s)?;
                }
                f
            }
        })
    }

    fn ideal(&mut self) -> Result<&DenseState> {
        let Mode::Qudit { d } = self.mode else {
            return Err(Error::UnsupportedPattern("dense fidelity needs qudit mode"));
        };
        if self.ideal.is_none() {
            self.ideal = Some(DenseState::graph_state(self.graph, d, None)?);
        }
        Ok(self.ideal.as_ref().expect("just built"))
    }
}

/// The prover's full commitment: one state per register, in streaming order.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisterAssignment {
    states: Vec<RegisterState>,
    correlation_seed: u64,
}

impl RegisterAssignment {
    pub fn new(states: Vec<RegisterState>, correlation_seed: u64) -> Self {
        Self { states, correlation_seed }
    }

    pub fn states(&self) -> &[RegisterState] {
        &self.states
    }

    pub fn correlation_seed(&self) -> u64 {
        self.correlation_seed
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn non_ideal_count(&self) -> usize {
        self.states.iter().filter(|s| !s.is_ideal()).count()
    }

    /// Length `N_total` and every state compatible with `(n, mode)`.
    pub fn validate(&self, params: &ProtocolParams) -> Result<()> {
        if self.states.len() as u64 != params.n_total {
            return Err(Error::LengthMismatch {
                expected: params.n_total as usize,
                got: self.states.len(),
            });
        }
        self.states.iter().try_for_each(|s| s.check(params.n, &params.mode))
    }

    pub fn fidelities(&self, graph: &WeightedHypergraph, mode: Mode) -> Result<Vec<f64>> {
        let mut oracle = FidelityOracle::new(graph, mode);
        self.states.iter().map(|s| oracle.fidelity(s)).collect()
    }
}

/// Distribution of a non-ideal register.
#[derive(Debug, Clone, PartialEq)]
pub enum BadModel {
    Fixed(RegisterState),
    /// `a` uniform over the `d^n - 1` nonzero vectors.
    UniformNonzero,
    /// Each `a_i` uniform over `1..d`; such a register fails every test.
    AllNonzero,
}

impl BadModel {
    fn sample(&self, n: usize, mode: &Mode, rng: &mut ChaCha8Rng) -> Result<RegisterState> {
        let d = match (self, mode) {
            (Self::Fixed(s), _) => return Ok(s.clone()),
            (_, Mode::Qudit { d }) => *d,
            (_, Mode::Cv { .. }) => {
                return Err(Error::UnsupportedPattern("CV bad registers take a fixed shift"));
            }
        };
        Ok(match self {
            Self::UniformNonzero => loop {
                let a: Vec<u32> = (0..n).map(|_| rng.random_range(0..d)).collect();
                if a.iter().any(|&v| v != 0) {
                    break RegisterState::Deviated(a.into());
                }
            },
            Self::AllNonzero => RegisterState::Deviated((0..n).map(|_| rng.random_range(1..d)).collect()),
            Self::Fixed(_) => unreachable!(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    Uniform,
    /// 1-based register id.
    Fixed(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    Honest,
    /// Each register independently ideal with probability `1 - epsilon`,
    /// otherwise drawn from `bad`.
    IidNoise { epsilon: f64, bad: BadModel },
    SingleBad { bad: BadModel, position: Position },
    /// Verbatim list; length must equal `N_total`.
    Scripted(Arc<[RegisterState]>),
}

impl Strategy {
    /// A pure function of `(params, self, correlation_seed)`.
    pub fn assign(&self, params: &ProtocolParams, correlation_seed: u64) -> Result<RegisterAssignment> {
        let n_total = params.n_total as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(correlation_seed);
        let states = match self {
            Self::Honest => vec![RegisterState::Ideal; n_total],
            Self::IidNoise { epsilon, bad } => {
                if !(0.0..=1.0).contains(epsilon) {
                    return Err(Error::domain("epsilon", *epsilon, "0 <= epsilon <= 1"));
                }
                let mut states = Vec::with_capacity(n_total);
                for _ in 0..n_total {
                    let u: f64 = rng.random();
                    states.push(if u < *epsilon {
                        bad.sample(params.n, &params.mode, &mut rng)?
                    } else {
                        RegisterState::Ideal
                    });
                }
                states
            }
            Self::SingleBad { bad, position } => {
                let pos = match *position {
                    Position::Uniform => rng.random_range(0..n_total),
                    Position::Fixed(p) if p >= 1 && p <= params.n_total => (p - 1) as usize,
                    Position::Fixed(p) => return Err(Error::domain("position", p as f64, "1 <= position <= N_total")),
                };
                let mut states = vec![RegisterState::Ideal; n_total];
                states[pos] = bad.sample(params.n, &params.mode, &mut rng)?;
                states
            }
            Self::Scripted(list) => list.to_vec(),
        };
        let a = RegisterAssignment::new(states, correlation_seed);
        a.validate(params)?;
        Ok(a)
    }
}
