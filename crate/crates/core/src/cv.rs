//! Continuous-variable weighted hypergraph states and the nullifier test.
//!
//! Units: `hbar = 1`, `[x, p] = i`, vacuum quadrature variance `1/2`.
//! Quadrature vectors are ordered `(x_1 .. x_n, p_1 .. p_n)`.
//!
//! The test for vertex `i` homodynes `p_i` and `x_k` for every `k` sharing a
//! hyperedge with `i`, and passes iff
//! `|p_i - sum_j weight_j prod_{k in e_j - i} x_k| <= tau`.
//!
//! Two samplers produce those outcomes:
//!
//! * Gaussian: exact joint sampling from a [`GaussianState`] (plain weighted
//!   graphs at finite squeezing). Quadratures are drawn one at a time from
//!   their conditional distribution, so the register can be measured site by
//!   site.
//! * Nullifier: each `x_k` uniform on `[-x_window, x_window]`, and
//!   `p_i = polynomial(x) + s_i + N(0, squeeze_sigma^2)`. Works for any
//!   hypergraph and is the only option at infinite squeezing.
//!
//! Detector noise `N(0, meas_sigma^2)` is added to every reported value.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::graph::{build_nullifiers, CvNullifierSpec, WeightedHypergraph};
use crate::linalg::Matrix;
use crate::{Error, Result};

pub const DEFAULT_X_WINDOW: f64 = 10.0;

/// Tolerance on the smallest eigenvalue in the uncertainty check.
pub const UNCERTAINTY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Standard deviation of each nullifier due to finite squeezing.
    pub squeeze_sigma: f64,
    /// Homodyne detector noise.
    pub meas_sigma: f64,
    /// Half-width of the uniform `x` window of the nullifier sampler.
    pub x_window: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::symbolic()
    }
}

impl NoiseModel {
    pub fn new(squeeze_sigma: f64, meas_sigma: f64, x_window: f64) -> Result<Self> {
        for (name, v) in [("squeeze_sigma", squeeze_sigma), ("meas_sigma", meas_sigma), ("x_window", x_window)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(name, v, "finite and >= 0"));
            }
        }
        Ok(Self { squeeze_sigma, meas_sigma, x_window })
    }

    /// Infinite squeezing, perfect detectors.
    pub fn symbolic() -> Self {
        Self {
            squeeze_sigma: 0.0,
            meas_sigma: 0.0,
            x_window: DEFAULT_X_WINDOW,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        self.squeeze_sigma == 0.0 && self.meas_sigma == 0.0
    }

    /// `tau >= 0`, and `tau = 0` only in symbolic mode.
    pub fn check_tolerance(&self, tau: f64) -> Result<()> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::domain("tau", tau, "finite and >= 0"));
        }
        if tau == 0.0 && !self.is_symbolic() {
            return Err(Error::domain("tau", tau, "tau > 0 unless all noise is zero"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    X,
    P,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    n: usize,
    mean: Vec<f64>,
    cov: Matrix,
}

impl GaussianState {
    /// Validates symmetry, positive definiteness and the uncertainty relation.
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        if mean.len() % 2 != 0 || cov.dim() != mean.len() {
            return Err(Error::LengthMismatch {
                expected: mean.len(),
                got: cov.dim(),
            });
        }
        if !cov.is_symmetric(1e-12) {
            return Err(Error::NotPositiveDefinite);
        }
        cov.cholesky()?;
        let s = Self { n: mean.len() / 2, mean, cov };
        s.check_uncertainty()?;
        Ok(s)
    }

    /// `n` vacua squeezed in `p`: `Var p = sigma^2`, `Var x = 1/(4 sigma^2)`.
    pub fn squeezed_vacuum(n: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain("squeeze_sigma", sigma, "finite and > 0 for a Gaussian state"));
        }
        let mut cov = Matrix::zeros(2 * n);
        for i in 0..n {
            cov[(i, i)] = 0.25 / (sigma * sigma);
            cov[(n + i, n + i)] = sigma * sigma;
        }
        Ok(Self { n, mean: vec![0.0; 2 * n], cov })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix {
        &self.cov
    }

    pub fn index(&self, site: usize, q: Quadrature) -> usize {
        match q {
            Quadrature::X => site,
            Quadrature::P => self.n + site,
        }
    }

    /// `CZ(weight)` on sites `j != k`: `p_j += weight x_k`, `p_k += weight x_j`.
    pub fn apply_cz(&mut self, j: usize, k: usize, weight: f64) {
        let n = self.n;
        let (pj, pk) = (n + j, n + k);
        self.mean[pj] += weight * self.mean[k];
        self.mean[pk] += weight * self.mean[j];
        let dim = 2 * n;
        for c in 0..dim {
            let (xj, xk) = (self.cov[(j, c)], self.cov[(k, c)]);
            self.cov[(pj, c)] += weight * xk;
            self.cov[(pk, c)] += weight * xj;
        }
        for r in 0..dim {
            let (xj, xk) = (self.cov[(r, j)], self.cov[(r, k)]);
            self.cov[(r, pj)] += weight * xk;
            self.cov[(r, pk)] += weight * xj;
        }
    }

    /// Weyl operator `Z_site(s) = exp(i s x)`: shifts the mean of `p_site` by `s`.
    pub fn displace_p(&mut self, site: usize, s: f64) {
        self.mean[self.n + site] += s;
    }

    /// Smallest eigenvalue of `cov + (i/2) Omega`, via its real embedding.
    pub fn uncertainty_margin(&self) -> f64 {
        let dim = 2 * self.n;
        let mut big = Matrix::zeros(2 * dim);
        for r in 0..dim {
            for c in 0..dim {
                big[(r, c)] = self.cov[(r, c)];
                big[(dim + r, dim + c)] = self.cov[(r, c)];
            }
        }
        // Omega = [[0, I], [-I, 0]]; embedding [[A, -B], [B, A]] with B = Omega/2.
        for i in 0..self.n {
            let (x, p) = (i, self.n + i);
            big[(x, dim + p)] = -0.5;
            big[(p, dim + x)] = 0.5;
            big[(dim + x, p)] = 0.5;
            big[(dim + p, x)] = -0.5;
        }
        big.symmetric_eigenvalues()[0]
    }

    pub fn check_uncertainty(&self) -> Result<()> {
        let m = self.uncertainty_margin();
        if m < -UNCERTAINTY_TOLERANCE {
            return Err(Error::Uncertainty(m));
        }
        Ok(())
    }

    /// Mean and variance of `sum_r coeffs[r] q_r`.
    pub fn linear_moments(&self, coeffs: &[f64]) -> (f64, f64) {
        let mean = coeffs.iter().zip(&self.mean).map(|(a, m)| a * m).sum();
        (mean, self.cov.quadratic_form(coeffs))
    }

    /// Moments of the nullifier `p_i - sum weight_j x_k`; plain graphs only.
    pub fn nullifier_moments(&self, spec: &CvNullifierSpec) -> Result<(f64, f64)> {
        let mut coeffs = vec![0.0; 2 * self.n];
        coeffs[self.index(spec.vertex - 1, Quadrature::P)] = 1.0;
        let mut constant = 0.0;
        for t in &spec.terms {
            match t.factors.as_slice() {
                [] => constant += t.weight,
                [k] => coeffs[self.index(k - 1, Quadrature::X)] -= t.weight,
                _ => return Err(Error::UnsupportedPattern("nonlinear nullifier on a Gaussian state")),
            }
        }
        let (m, v) = self.linear_moments(&coeffs);
        Ok((m - constant, v))
    }

    /// Draws the quadrature at `idx` and conditions the remaining ones on it.
    fn sample_and_condition<R: Rng + ?Sized>(&mut self, idx: usize, rng: &mut R) -> f64 {
        let dim = 2 * self.n;
        let var = self.cov[(idx, idx)];
        let mu = self.mean[idx];
        if !(var > 0.0) {
            return mu;
        }
        let z: f64 = rng.sample(StandardNormal);
        let v = mu + libm::sqrt(var) * z;
        let col: Vec<f64> = (0..dim).map(|r| self.cov[(r, idx)]).collect();
        for r in 0..dim {
            self.mean[r] += col[r] / var * (v - mu);
        }
        for r in 0..dim {
            if col[r] == 0.0 {
                continue;
            }
            for c in 0..dim {
                self.cov[(r, c)] -= col[r] * col[c] / var;
            }
        }
        v
    }
}

/// CZ network on `p`-squeezed vacua for a plain weighted graph; every
/// nullifier then has variance `squeeze_sigma^2`.
pub fn prepare_cv_graph_state(graph: &WeightedHypergraph, squeeze_sigma: f64) -> Result<GaussianState> {
    graph.require_plain_graph()?;
    let mut s = GaussianState::squeezed_vacuum(graph.n(), squeeze_sigma)?;
    for (e, &w) in graph.edges().iter().zip(graph.weights()) {
        s.apply_cz(e[0] - 1, e[1] - 1, w);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CvBackend {
    Gaussian,
    Nullifier,
}

impl CvBackend {
    /// Gaussian when the graph is plain and squeezing is finite.
    pub fn auto(graph: &WeightedHypergraph, noise: &NoiseModel) -> Self {
        if graph.is_plain_graph() && noise.squeeze_sigma > 0.0 {
            Self::Gaussian
        } else {
            Self::Nullifier
        }
    }
}

/// Honest `prod_i Z_i(s_i) |G_CV>` at a given noise level; hands out fresh
/// registers.
#[derive(Debug, Clone)]
pub struct CvModel {
    backend: CvBackend,
    noise: NoiseModel,
    nullifiers: Arc<Vec<CvNullifierSpec>>,
    gaussian: Option<Arc<GaussianState>>,
    shifts: Vec<f64>,
}

impl CvModel {
    pub fn honest(graph: &WeightedHypergraph, noise: NoiseModel, backend: CvBackend) -> Result<Self> {
        let gaussian = match backend {
            CvBackend::Gaussian => Some(Arc::new(prepare_cv_graph_state(graph, noise.squeeze_sigma)?)),
            CvBackend::Nullifier => None,
        };
        Ok(Self {
            backend,
            noise,
            nullifiers: Arc::new(build_nullifiers(graph)),
            gaussian,
            shifts: vec![0.0; graph.n()],
        })
    }

    pub fn n(&self) -> usize {
        self.shifts.len()
    }

    pub fn backend(&self) -> CvBackend {
        self.backend
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn nullifiers(&self) -> &[CvNullifierSpec] {
        &self.nullifiers
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    /// Register for this model's shifts.
    pub fn register(&self) -> CvRegister {
        self.register_with_shifts(&self.shifts).expect("model shifts have length n")
    }

    /// Register for `prod Z_i(shifts_i) |G_CV>`.
    pub fn register_with_shifts(&self, shifts: &[f64]) -> Result<CvRegister> {
        let n = self.n();
        if shifts.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: shifts.len() });
        }
        Ok(match &self.gaussian {
            Some(g) => {
                let mut state = GaussianState::clone(g);
                for (i, &s) in shifts.iter().enumerate() {
                    state.displace_p(i, s);
                }
                CvRegister::Gaussian(GaussianRegister {
                    state,
                    consumed: vec![false; n],
                    meas_sigma: self.noise.meas_sigma,
                })
            }
            None => CvRegister::Nullifier(NullifierRegister {
                nullifiers: Arc::clone(&self.nullifiers),
                shifts: shifts.to_vec(),
                noise: self.noise,
                latent_x: vec![None; n],
                consumed: vec![false; n],
            }),
        })
    }
}

/// Honest model with Weyl shifts: nullifier `i` has residual mean `shifts_i`.
pub fn cv_deviation_model(
    graph: &WeightedHypergraph,
    shifts: &[f64],
    noise: NoiseModel,
    backend: CvBackend,
) -> Result<CvModel> {
    if shifts.len() != graph.n() {
        return Err(Error::LengthMismatch {
            expected: graph.n(),
            got: shifts.len(),
        });
    }
    let mut m = CvModel::honest(graph, noise, backend)?;
    m.shifts = shifts.to_vec();
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct GaussianRegister {
    state: GaussianState,
    consumed: Vec<bool>,
    meas_sigma: f64,
}

#[derive(Debug, Clone)]
pub struct NullifierRegister {
    nullifiers: Arc<Vec<CvNullifierSpec>>,
    shifts: Vec<f64>,
    noise: NoiseModel,
    latent_x: Vec<Option<f64>>,
    consumed: Vec<bool>,
}

impl NullifierRegister {
    fn latent_x<R: Rng + ?Sized>(&mut self, site: usize, rng: &mut R) -> f64 {
        match self.latent_x[site] {
            Some(v) => v,
            None => {
                let w = self.noise.x_window;
                let v = if w > 0.0 { rng.random_range(-w..=w) } else { 0.0 };
                self.latent_x[site] = Some(v);
                v
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum CvRegister {
    Gaussian(GaussianRegister),
    Nullifier(NullifierRegister),
}

fn gaussian_noise<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma > 0.0 {
        sigma * rng.sample::<f64, _>(StandardNormal)
    } else {
        0.0
    }
}

impl CvRegister {
    pub fn n(&self) -> usize {
        match self {
            Self::Gaussian(g) => g.consumed.len(),
            Self::Nullifier(s) => s.consumed.len(),
        }
    }

    fn consume(&mut self, site: usize) -> Result<()> {
        let consumed = match self {
            Self::Gaussian(g) => &mut g.consumed,
            Self::Nullifier(s) => &mut s.consumed,
        };
        match consumed.get_mut(site) {
            None => Err(Error::SiteOutOfRange { site, n: consumed.len() }),
            Some(true) => Err(Error::SiteConsumed(site)),
            Some(c) => {
                *c = true;
                Ok(())
            }
        }
    }

    /// Homodyne outcome (detector noise included).
    pub fn measure_site<R: Rng + ?Sized>(&mut self, site: usize, q: Quadrature, rng: &mut R) -> Result<f64> {
        self.consume(site)?;
        Ok(match self {
            Self::Gaussian(g) => {
                let idx = g.state.index(site, q);
                let v = g.state.sample_and_condition(idx, rng);
                v + gaussian_noise(g.meas_sigma, rng)
            }
            Self::Nullifier(s) => {
                let latent = match q {
                    Quadrature::X => s.latent_x(site, rng),
                    Quadrature::P => {
                        let nullifiers = Arc::clone(&s.nullifiers);
                        let spec = &nullifiers[site];
                        for k in spec.x_vertices() {
                            s.latent_x(k - 1, rng);
                        }
                        let latent = &s.latent_x;
                        let poly = spec.polynomial(|k| latent[k].expect("drawn above"));
                        poly + s.shifts[site] + gaussian_noise(s.noise.squeeze_sigma, rng)
                    }
                };
                latent + gaussian_noise(s.noise.meas_sigma, rng)
            }
        })
    }

    pub fn discard_site(&mut self, site: usize) -> Result<()> {
        self.consume(site)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTestOutcome {
    /// `p_i - sum weight_j prod x_k` from the reported values.
    pub residual: f64,
    pub passed: bool,
    pub p: f64,
    /// `(vertex, x_k)` ascending.
    pub x: Vec<(usize, f64)>,
}

impl CvTestOutcome {
    pub fn from_raw(spec: &CvNullifierSpec, p: f64, x: Vec<(usize, f64)>, tau: f64) -> Self {
        let lookup = |site: usize| {
            x.iter()
                .find(|&&(v, _)| v == site + 1)
                .map(|&(_, val)| val)
                .expect("every factor vertex measured")
        };
        let residual = p - spec.polynomial(lookup);
        Self {
            residual,
            passed: residual.abs() <= tau,
            p,
            x,
        }
    }
}

/// Sites measured by the test of `spec`: 0-based, ascending, with quadrature.
pub fn cv_test_sites(spec: &CvNullifierSpec) -> Vec<(usize, Quadrature)> {
    let mut sites: Vec<(usize, Quadrature)> = spec.x_vertices().into_iter().map(|v| (v - 1, Quadrature::X)).collect();
    sites.push((spec.vertex - 1, Quadrature::P));
    sites.sort_unstable_by_key(|&(s, _)| s);
    sites
}

/// Runs the nullifier test for `spec`, measuring sites in ascending order.
pub fn run_cv_stabilizer_test<R: Rng + ?Sized>(
    register: &mut CvRegister,
    spec: &CvNullifierSpec,
    tau: f64,
    rng: &mut R,
) -> Result<CvTestOutcome> {
    if !(tau >= 0.0) {
        return Err(Error::domain("tau", tau, "tau >= 0"));
    }
    let n = register.n();
    if spec.vertex == 0 || spec.vertex > n {
        return Err(Error::VertexOutOfRange { vertex: spec.vertex, n });
    }
    if let Some(&bad) = spec.x_vertices().iter().find(|&&v| v > n) {
        return Err(Error::VertexOutOfRange { vertex: bad, n });
    }
    let mut p = 0.0;
    let mut x = Vec::new();
    for (site, q) in cv_test_sites(spec) {
        let v = register.measure_site(site, q, rng)?;
        match q {
            Quadrature::P => p = v,
            Quadrature::X => x.push((site + 1, v)),
        }
    }
    Ok(CvTestOutcome::from_raw(spec, p, x, tau))
}

/// Mean and variance of the reported residual for a nullifier with at most
/// one factor per term: `(shift, squeeze^2 + meas^2 (1 + sum weight_j^2))`.
pub fn residual_moments(spec: &CvNullifierSpec, noise: &NoiseModel, shift: f64) -> Result<(f64, f64)> {
    let mut weights_sq = 0.0;
    for t in &spec.terms {
        match t.factors.len() {
            0 => {}
            1 => weights_sq += t.weight * t.weight,
            _ => return Err(Error::UnsupportedPattern("residual of a nonlinear nullifier is not Gaussian")),
        }
    }
    let (s, m) = (noise.squeeze_sigma, noise.meas_sigma);
    Ok((shift, s * s + m * m * (1.0 + weights_sq)))
}

/// `Pr[|N(mean, var)| <= tau]`.
pub fn pass_probability(mean: f64, var: f64, tau: f64) -> f64 {
    if var <= 0.0 {
        return if mean.abs() <= tau { 1.0 } else { 0.0 };
    }
    let scale = libm::sqrt(2.0 * var);
    0.5 * (libm::erf((tau - mean) / scale) - libm::erf((-tau - mean) / scale))
}
