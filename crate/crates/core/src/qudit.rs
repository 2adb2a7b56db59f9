//! Qudit graph-state registers and the stabilizer test.
//!
//! The test for `g_i` measures `X` on site `i` and `Z` on every neighbor, and
//! passes iff `x_i + sum_j z_j = 0 (mod d)`. On `|G(a)> = prod Z^{a_i} |G>` the
//! residual is always `-a_i mod d`.
//!
//! Three interchangeable backends:
//!
//! * [`GraphBasisState`] for `|G(a)>`, any `d >= 2`, O(degree) per site;
//! * [`StabilizerTableau`] for arbitrary stabilizer states, prime `d`;
//! * [`DenseState`] for anything up to `2^20` amplitudes.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dense::DenseState;
use crate::graph::{QuditStabilizerSpec, WeightedHypergraph};
use crate::tableau::StabilizerTableau;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuditBasis {
    X,
    Z,
}

/// Labels `a` of `|G(a)>`; entries reduced into `0..d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeviationVector(Vec<u32>);

impl DeviationVector {
    pub fn new(entries: Vec<u32>, d: u32) -> Result<Self> {
        if d < 2 {
            return Err(Error::Dimension(d));
        }
        Ok(Self(entries.into_iter().map(|a| a % d).collect()))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    /// `x_i + sum z_j mod d`.
    pub residual: u32,
    pub passed: bool,
    pub x: u32,
    /// `(vertex, z_j)` for each neighbor, ascending.
    pub z: Vec<(usize, u32)>,
}

impl TestOutcome {
    pub fn from_raw(d: u32, x: u32, z: Vec<(usize, u32)>) -> Self {
        let residual = ((x as u64 + z.iter().map(|&(_, v)| v as u64).sum::<u64>()) % d as u64) as u32;
        Self { residual, passed: residual == 0, x, z }
    }
}

/// Exact outcome distribution; keys list outcomes in ascending site order.
pub type ExactDistribution = BTreeMap<Vec<u32>, Ratio<u64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Site {
    Live,
    Measured,
    /// Discarded but not yet traced out; resolved as a hidden Z measurement
    /// only if some later outcome depends on it.
    Discarded,
}

/// `|G(a)>` under single-site measurements.
///
/// Z on site `j` is uniform, removes `j` and shifts each remaining neighbor's
/// deviation by the outcome. X on a site without remaining neighbors returns
/// `-a_i`; with neighbors it is uniform and leaves the linear constraint
/// `sum_{remaining N(i)} z_j = -a_i - x` on the Z values of those neighbors.
/// At most one constraint may be pending.
#[derive(Debug, Clone)]
pub struct GraphBasisState {
    d: u32,
    adj: Arc<Vec<Vec<usize>>>,
    dev: Vec<u32>,
    sites: Vec<Site>,
    in_constraint: Vec<bool>,
    /// `(target sum, members still unmeasured)`.
    constraint: Option<(u32, usize)>,
}

impl GraphBasisState {
    pub fn new(graph: &WeightedHypergraph, d: u32, a: Option<&DeviationVector>) -> Result<Self> {
        graph.require_plain_graph()?;
        if d < 2 {
            return Err(Error::Dimension(d));
        }
        let mut s = Self::with_adjacency(Arc::new(graph.adjacency0()), d);
        s.reset(a.map(|a| a.entries()))?;
        Ok(s)
    }

    pub(crate) fn with_adjacency(adj: Arc<Vec<Vec<usize>>>, d: u32) -> Self {
        let n = adj.len();
        Self {
            d,
            adj,
            dev: vec![0; n],
            sites: vec![Site::Live; n],
            in_constraint: vec![false; n],
            constraint: None,
        }
    }

    /// Reinitializes to `|G(a)>` without reallocating.
    pub fn reset(&mut self, a: Option<&[u32]>) -> Result<()> {
        let n = self.adj.len();
        match a {
            Some(a) if a.len() != n => return Err(Error::LengthMismatch { expected: n, got: a.len() }),
            Some(a) => self.dev.iter_mut().zip(a).for_each(|(v, &x)| *v = x % self.d),
            None => self.dev.fill(0),
        }
        self.sites.fill(Site::Live);
        self.in_constraint.fill(false);
        self.constraint = None;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    fn check(&self, site: usize) -> Result<()> {
        match self.sites.get(site) {
            None => Err(Error::SiteOutOfRange { site, n: self.n() }),
            Some(Site::Live) => Ok(()),
            Some(_) => Err(Error::SiteConsumed(site)),
        }
    }

    fn z_unchecked(&mut self, site: usize, choose: &mut impl FnMut(u32) -> u32) -> u32 {
        let d = self.d;
        let z = if self.in_constraint[site] {
            let (target, remaining) = self.constraint.as_mut().expect("member of a live constraint");
            *remaining -= 1;
            if *remaining == 0 {
                let z = *target;
                self.constraint = None;
                z
            } else {
                let z = choose(d) % d;
                *target = (*target + d - z) % d;
                z
            }
        } else {
            choose(d) % d
        };
        self.in_constraint[site] = false;
        self.sites[site] = Site::Measured;
        for &k in self.adj[site].iter() {
            if self.sites[k] != Site::Measured {
                self.dev[k] = (self.dev[k] + z) % d;
            }
        }
        z
    }

    pub fn measure_with(
        &mut self,
        site: usize,
        basis: QuditBasis,
        mut choose: impl FnMut(u32) -> u32,
    ) -> Result<u32> {
        self.check(site)?;
        let d = self.d;
        match basis {
            QuditBasis::Z => Ok(self.z_unchecked(site, &mut choose)),
            QuditBasis::X => {
                if self.in_constraint[site] {
                    return Err(Error::UnsupportedPattern("X on a site bound by a pending constraint"));
                }
                let adj = Arc::clone(&self.adj);
                for &k in adj[site].iter() {
                    if self.sites[k] == Site::Discarded {
                        self.z_unchecked(k, &mut choose);
                    }
                }
                let live = adj[site].iter().filter(|&&k| self.sites[k] == Site::Live).count();
                self.sites[site] = Site::Measured;
                if live == 0 {
                    return Ok((d - self.dev[site]) % d);
                }
                if self.constraint.is_some() {
                    return Err(Error::UnsupportedPattern("second X measurement with a pending constraint"));
                }
                let x = choose(d) % d;
                let target = ((2 * d as u64 - self.dev[site] as u64 - x as u64) % d as u64) as u32;
                for &k in adj[site].iter() {
                    if self.sites[k] == Site::Live {
                        self.in_constraint[k] = true;
                    }
                }
                self.constraint = Some((target, live));
                Ok(x)
            }
        }
    }

    pub fn discard_site(&mut self, site: usize) -> Result<()> {
        self.check(site)?;
        self.sites[site] = Site::Discarded;
        Ok(())
    }
}

/// Tableau plus per-site bookkeeping so a register is measured site by site.
#[derive(Debug, Clone)]
pub struct TableauRegister {
    tableau: StabilizerTableau,
    consumed: Vec<bool>,
}

impl TableauRegister {
    pub fn new(tableau: StabilizerTableau) -> Self {
        let n = tableau.n();
        Self { tableau, consumed: vec![false; n] }
    }

    pub fn tableau(&self) -> &StabilizerTableau {
        &self.tableau
    }

    pub fn measure_with(&mut self, site: usize, basis: QuditBasis, choose: impl FnOnce(u32) -> u32) -> Result<u32> {
        match self.consumed.get(site) {
            None => return Err(Error::SiteOutOfRange { site, n: self.consumed.len() }),
            Some(true) => return Err(Error::SiteConsumed(site)),
            Some(false) => {}
        }
        self.consumed[site] = true;
        self.tableau.measure_site(site, basis, choose)
    }

    pub fn discard_site(&mut self, site: usize) -> Result<()> {
        match self.consumed.get_mut(site) {
            None => Err(Error::SiteOutOfRange { site, n: self.tableau.n() }),
            Some(true) => Err(Error::SiteConsumed(site)),
            Some(c) => {
                *c = true;
                Ok(())
            }
        }
    }
}

/// One register as seen by the measuring party.
#[derive(Debug, Clone)]
pub enum QuditRegister {
    GraphBasis(GraphBasisState),
    Tableau(TableauRegister),
    Dense(DenseState),
}

impl QuditRegister {
    pub fn n(&self) -> usize {
        match self {
            Self::GraphBasis(s) => s.n(),
            Self::Tableau(t) => t.tableau.n(),
            Self::Dense(s) => s.n(),
        }
    }

    pub fn d(&self) -> u32 {
        match self {
            Self::GraphBasis(s) => s.d(),
            Self::Tableau(t) => t.tableau.d(),
            Self::Dense(s) => s.d(),
        }
    }

    pub fn measure_site<R: Rng + ?Sized>(&mut self, site: usize, basis: QuditBasis, rng: &mut R) -> Result<u32> {
        match self {
            Self::GraphBasis(s) => s.measure_with(site, basis, |d| rng.random_range(0..d)),
            Self::Tableau(t) => t.measure_with(site, basis, |d| rng.random_range(0..d)),
            Self::Dense(s) => s.measure_site(site, basis, rng),
        }
    }

    pub fn discard_site(&mut self, site: usize) -> Result<()> {
        match self {
            Self::GraphBasis(s) => s.discard_site(site),
            Self::Tableau(t) => t.discard_site(site),
            Self::Dense(s) => s.discard_site(site),
        }
    }
}

/// Runs the stabilizer test for `spec` on `state`, measuring sites in
/// ascending order. Sites outside `{i} + N(i)` are left untouched.
pub fn measure_stabilizer_test<R: Rng + ?Sized>(
    state: &mut QuditRegister,
    spec: &QuditStabilizerSpec,
    rng: &mut R,
) -> Result<TestOutcome> {
    check_spec(state.n(), state.d(), spec)?;
    let mut x = 0;
    let mut z = Vec::with_capacity(spec.neighbors.len());
    for (site, is_x) in spec.measured_sites() {
        if is_x {
            x = state.measure_site(site, QuditBasis::X, rng)?;
        } else {
            z.push((site + 1, state.measure_site(site, QuditBasis::Z, rng)?));
        }
    }
    Ok(TestOutcome::from_raw(spec.d, x, z))
}

fn check_spec(n: usize, d: u32, spec: &QuditStabilizerSpec) -> Result<()> {
    if spec.d != d {
        return Err(Error::DimensionMismatch { expected: spec.d, got: d });
    }
    let max = spec.neighbors.iter().copied().chain([spec.vertex]).max().unwrap_or(0);
    if spec.vertex == 0 || max > n {
        return Err(Error::SiteOutOfRange { site: max.saturating_sub(1), n });
    }
    Ok(())
}

fn test_sites(spec: &QuditStabilizerSpec) -> Vec<(usize, QuditBasis)> {
    spec.measured_sites()
        .map(|(s, is_x)| (s, if is_x { QuditBasis::X } else { QuditBasis::Z }))
        .collect()
}

/// Enumerates every branch of a backend whose random draws are uniform over
/// `0..d`. A single measurement may draw more than once.
fn branch_distribution<S: Clone>(
    state: &S,
    d: u32,
    sites: &[(usize, QuditBasis)],
    measure: &impl Fn(&mut S, usize, QuditBasis, &mut dyn FnMut(u32) -> u32) -> Result<u32>,
) -> Result<ExactDistribution> {
    let mut out = ExactDistribution::new();
    let mut stack = vec![(state.clone(), Vec::new(), Ratio::new(1u64, 1u64))];
    while let Some((st, prefix, prob)) = stack.pop() {
        if prefix.len() == sites.len() {
            *out.entry(prefix).or_insert(Ratio::new(0, 1)) += prob;
            continue;
        }
        let (site, basis) = sites[prefix.len()];
        let mut pending: Vec<Vec<u32>> = vec![Vec::new()];
        while let Some(choices) = pending.pop() {
            let mut s = st.clone();
            let mut calls = 0;
            let mut short = false;
            let got = measure(&mut s, site, basis, &mut |_| {
                let v = choices.get(calls).copied().unwrap_or_else(|| {
                    short = true;
                    0
                });
                calls += 1;
                v
            })?;
            if short {
                for m in 0..d {
                    let mut c = choices.clone();
                    c.push(m);
                    pending.push(c);
                }
                continue;
            }
            let mut p = prefix.clone();
            p.push(got);
            let weight = (d as u64).pow(choices.len() as u32);
            stack.push((s, p, prob / weight));
        }
    }
    Ok(out)
}

pub fn tableau_test_distribution(t: &StabilizerTableau, spec: &QuditStabilizerSpec) -> Result<ExactDistribution> {
    check_spec(t.n(), t.d(), spec)?;
    branch_distribution(t, t.d(), &test_sites(spec), &|s: &mut StabilizerTableau, site, b, c| {
        s.measure_site(site, b, c)
    })
}

pub fn graph_basis_test_distribution(g: &GraphBasisState, spec: &QuditStabilizerSpec) -> Result<ExactDistribution> {
    check_spec(g.n(), g.d(), spec)?;
    branch_distribution(g, g.d(), &test_sites(spec), &|s: &mut GraphBasisState, site, b, c| {
        s.measure_with(site, b, c)
    })
}

/// Exact outcome distribution of a test on `|G(a)>` from a full statevector.
/// Probabilities of stabilizer states are multiples of `d^-n`; each dense
/// value is snapped to that grid after checking it lies within `1e-9`.
pub fn dense_statevector_oracle(
    graph: &WeightedHypergraph,
    d: u32,
    a: &DeviationVector,
    spec: &QuditStabilizerSpec,
) -> Result<ExactDistribution> {
    let state = DenseState::graph_state(graph, d, Some(a))?;
    check_spec(state.n(), d, spec)?;
    let raw = state.joint_distribution(&test_sites(spec))?;
    let denom = (d as u64).pow(graph.n() as u32);
    let mut out = ExactDistribution::new();
    for (k, p) in raw {
        let num = libm::round(p * denom as f64);
        assert!(
            libm::fabs(p - num / denom as f64) < 1e-9,
            "dense probability {p} is not a multiple of 1/{denom}"
        );
        if num > 0.0 {
            out.insert(k, Ratio::new(num as u64, denom));
        }
    }
    Ok(out)
}

/// Residual distribution implied by a joint distribution keyed in site order.
pub fn residual_distribution(dist: &ExactDistribution, d: u32) -> BTreeMap<u32, Ratio<u64>> {
    let mut out = BTreeMap::new();
    for (k, p) in dist {
        let r = (k.iter().map(|&v| v as u64).sum::<u64>() % d as u64) as u32;
        *out.entry(r).or_insert(Ratio::new(0, 1)) += *p;
    }
    out
}
