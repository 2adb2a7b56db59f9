//! Dense statevectors over `d^n` amplitudes.
//!
//! Independent of the tableau: states are built directly from the CZ circuit
//! on `|+_d>^n`, measurement probabilities come from explicit basis changes.
//! Site `s` has stride `d^s` in the amplitude index.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::graph::WeightedHypergraph;
use crate::pauli::QuditPauli;
use crate::qudit::{DeviationVector, QuditBasis};
use crate::tableau::StabilizerTableau;
use crate::{Error, Result};

/// `d^n` must not exceed this.
pub const MAX_AMPLITUDES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    d: u32,
    n: usize,
    amps: Vec<Complex64>,
    consumed: Vec<bool>,
}

fn checked_dim(d: u32, n: usize) -> Result<usize> {
    if d < 2 {
        return Err(Error::Dimension(d));
    }
    let mut dim: usize = 1;
    for _ in 0..n {
        dim = dim.checked_mul(d as usize).filter(|&v| v <= MAX_AMPLITUDES).ok_or(Error::DenseTooLarge { d, n })?;
    }
    Ok(dim)
}

pub(crate) fn roots_of_unity(d: u32) -> Vec<Complex64> {
    (0..d)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / d as f64;
            Complex64::new(libm::cos(t), libm::sin(t))
        })
        .collect()
}

impl DenseState {
    /// `prod Z_i^{a_i} prod_{edges} CZ |+_d>^n`.
    pub fn graph_state(graph: &WeightedHypergraph, d: u32, a: Option<&DeviationVector>) -> Result<Self> {
        graph.require_plain_graph()?;
        let n = graph.n();
        let dim = checked_dim(d, n)?;
        if let Some(a) = a {
            if a.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: a.len() });
            }
        }
        let w = roots_of_unity(d);
        let norm = 1.0 / libm::sqrt(dim as f64);
        let dm = d as u64;
        let mut digits = vec![0u32; n];
        let amps = (0..dim)
            .map(|idx| {
                decode(idx, d, &mut digits);
                let mut phase: u64 = 0;
                for e in graph.edges() {
                    phase += digits[e[0] - 1] as u64 * digits[e[1] - 1] as u64;
                }
                if let Some(a) = a {
                    for (k, &aq) in digits.iter().zip(a.entries()) {
                        phase += *k as u64 * aq as u64;
                    }
                }
                w[(phase % dm) as usize] * norm
            })
            .collect();
        Ok(Self { d, n, amps, consumed: vec![false; n] })
    }

    pub fn from_amplitudes(d: u32, n: usize, amps: Vec<Complex64>) -> Result<Self> {
        let dim = checked_dim(d, n)?;
        if amps.len() != dim {
            return Err(Error::LengthMismatch { expected: dim, got: amps.len() });
        }
        let mut s = Self { d, n, amps, consumed: vec![false; n] };
        s.normalize();
        Ok(s)
    }

    /// The unique state stabilized by the tableau.
    pub fn from_tableau(t: &StabilizerTableau) -> Result<Self> {
        let (d, n) = (t.d(), t.n());
        let dim = checked_dim(d, n)?;
        for k in 0..dim {
            let mut amps = vec![Complex64::new(0.0, 0.0); dim];
            amps[k] = Complex64::new(1.0, 0.0);
            let mut v = Self { d, n, amps, consumed: vec![false; n] };
            for g in t.generators() {
                v = v.project_onto_eigenspace(g);
            }
            if v.norm_sqr() > 1e-6 {
                v.normalize();
                return Ok(v);
            }
        }
        Err(Error::InvalidTableau)
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn normalize(&mut self) {
        let s = libm::sqrt(self.norm_sqr());
        if s > 0.0 {
            for a in &mut self.amps {
                *a /= s;
            }
        }
    }

    pub fn apply_pauli(&self, p: &QuditPauli) -> Self {
        let w = roots_of_unity(self.d);
        let dm = self.d as u64;
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        let mut digits = vec![0u32; self.n];
        for (idx, &amp) in self.amps.iter().enumerate() {
            decode(idx, self.d, &mut digits);
            let mut phase = p.phase() as u64;
            for q in 0..self.n {
                phase += p.z_exponents()[q] as u64 * digits[q] as u64;
                digits[q] = (digits[q] + p.x_exponents()[q]) % self.d;
            }
            out[encode(&digits, self.d)] += w[(phase % dm) as usize] * amp;
        }
        Self { d: self.d, n: self.n, amps: out, consumed: self.consumed.clone() }
    }

    /// `(1/d) sum_j g^j |v>`, the projection onto the `+1` eigenspace of `g`.
    fn project_onto_eigenspace(&self, g: &QuditPauli) -> Self {
        let mut acc = self.clone();
        let mut term = self.clone();
        for _ in 1..self.d {
            term = term.apply_pauli(g);
            for (a, t) in acc.amps.iter_mut().zip(&term.amps) {
                *a += t;
            }
        }
        for a in &mut acc.amps {
            *a /= self.d as f64;
        }
        acc
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr()
    }

    /// Amplitudes with `site` rotated into the X eigenbasis: index digit `m`
    /// now labels the eigenvalue `w^m`.
    fn to_x_basis(&self, site: usize) -> Vec<Complex64> {
        let w = roots_of_unity(self.d);
        let d = self.d as usize;
        let stride = d.pow(site as u32);
        let scale = 1.0 / libm::sqrt(self.d as f64);
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for base in 0..self.amps.len() {
            if (base / stride) % d != 0 {
                continue;
            }
            for m in 0..d {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..d {
                    s += w[(m * k) % d] * self.amps[base + k * stride];
                }
                out[base + m * stride] = s * scale;
            }
        }
        out
    }

    /// Exact joint distribution of commuting single-site measurements.
    /// Keys list outcomes in the order of `sites`.
    pub fn joint_distribution(&self, sites: &[(usize, QuditBasis)]) -> Result<BTreeMap<Vec<u32>, f64>> {
        for &(s, _) in sites {
            if s >= self.n {
                return Err(Error::SiteOutOfRange { site: s, n: self.n });
            }
        }
        let mut rotated = self.clone();
        for &(s, b) in sites {
            if b == QuditBasis::X {
                rotated.amps = rotated.to_x_basis(s);
            }
        }
        let mut dist = BTreeMap::new();
        let mut digits = vec![0u32; self.n];
        for (idx, a) in rotated.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            decode(idx, self.d, &mut digits);
            let key: Vec<u32> = sites.iter().map(|&(s, _)| digits[s]).collect();
            *dist.entry(key).or_insert(0.0) += p;
        }
        // Interference leaves rounding dust where the exact probability is 0.
        dist.retain(|_, p| *p > 1e-14);
        Ok(dist)
    }

    pub fn site_probabilities(&self, site: usize, basis: QuditBasis) -> Result<Vec<f64>> {
        let dist = self.joint_distribution(&[(site, basis)])?;
        let mut out = vec![0.0; self.d as usize];
        for (k, p) in dist {
            out[k[0] as usize] = p;
        }
        Ok(out)
    }

    /// Projects `site` onto outcome `m` and renormalizes.
    pub fn collapse(&mut self, site: usize, basis: QuditBasis, m: u32) {
        let d = self.d as usize;
        let stride = d.pow(site as u32);
        let m = m as usize;
        match basis {
            QuditBasis::Z => {
                for (idx, a) in self.amps.iter_mut().enumerate() {
                    if (idx / stride) % d != m {
                        *a = Complex64::new(0.0, 0.0);
                    }
                }
            }
            QuditBasis::X => {
                // Keep the w^m component, then rotate back: |x_m> = d^{-1/2} sum_k w^{-mk} |k>.
                let rotated = self.to_x_basis(site);
                let w = roots_of_unity(self.d);
                let scale = 1.0 / libm::sqrt(self.d as f64);
                for base in 0..self.amps.len() {
                    if (base / stride) % d != 0 {
                        continue;
                    }
                    let c = rotated[base + m * stride];
                    for k in 0..d {
                        self.amps[base + k * stride] = w[(d - (m * k) % d) % d] * c * scale;
                    }
                }
            }
        }
        self.normalize();
    }

    pub fn measure_site<R: Rng + ?Sized>(&mut self, site: usize, basis: QuditBasis, rng: &mut R) -> Result<u32> {
        if site >= self.n {
            return Err(Error::SiteOutOfRange { site, n: self.n });
        }
        if self.consumed[site] {
            return Err(Error::SiteConsumed(site));
        }
        let probs = self.site_probabilities(site, basis)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut m = probs.len() - 1;
        for (k, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                m = k;
                break;
            }
        }
        self.collapse(site, basis, m as u32);
        self.consumed[site] = true;
        Ok(m as u32)
    }

    /// Marks a site as never to be measured. Its reduced effect on the rest is
    /// unchanged, so no state update is needed.
    pub fn discard_site(&mut self, site: usize) -> Result<()> {
        if site >= self.n {
            return Err(Error::SiteOutOfRange { site, n: self.n });
        }
        if self.consumed[site] {
            return Err(Error::SiteConsumed(site));
        }
        self.consumed[site] = true;
        Ok(())
    }
}

fn decode(mut idx: usize, d: u32, digits: &mut [u32]) {
    for dig in digits.iter_mut() {
        *dig = (idx % d as usize) as u32;
        idx /= d as usize;
    }
}

fn encode(digits: &[u32], d: u32) -> usize {
    digits.iter().rev().fold(0usize, |acc, &k| acc * d as usize + k as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plus_state_x_outcome() {
        let g = WeightedHypergraph::graph(1, &[]).unwrap();
        let s = DenseState::graph_state(&g, 3, None).unwrap();
        let p = s.site_probabilities(0, QuditBasis::X).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        let p = s.site_probabilities(0, QuditBasis::Z).unwrap();
        assert!(p.iter().all(|&q| (q - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn deviation_sign_convention() {
        // Z^2 |+_3> is the X eigenstate with eigenvalue w^{-2} = w^1.
        let g = WeightedHypergraph::graph(1, &[]).unwrap();
        let a = DeviationVector::new(vec![2], 3).unwrap();
        let s = DenseState::graph_state(&g, 3, Some(&a)).unwrap();
        let p = s.site_probabilities(0, QuditBasis::X).unwrap();
        assert!((p[1] - 1.0).abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn graph_state_is_stabilized() {
        let g = WeightedHypergraph::complete(3).unwrap();
        for d in [2, 3, 4] {
            let s = DenseState::graph_state(&g, d, None).unwrap();
            for spec in crate::graph::build_stabilizers(&g, d).unwrap() {
                let mut gi = QuditPauli::single_x(d, 3, spec.vertex - 1);
                for &j in &spec.neighbors {
                    gi.z_mut()[j - 1] = 1;
                }
                assert!((s.fidelity(&s.apply_pauli(&gi)) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn tableau_round_trip() {
        let g = WeightedHypergraph::complete(3).unwrap();
        let t = StabilizerTableau::graph_state(&g, 3).unwrap();
        let a = DenseState::from_tableau(&t).unwrap();
        let b = DenseState::graph_state(&g, 3, None).unwrap();
        assert!((a.fidelity(&b) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn x_collapse_repeats() {
        let g = WeightedHypergraph::path(2).unwrap();
        let mut s = DenseState::graph_state(&g, 3, None).unwrap();
        s.collapse(0, QuditBasis::X, 2);
        let p = s.site_probabilities(0, QuditBasis::X).unwrap();
        assert!((p[2] - 1.0).abs() < 1e-10, "{p:?}");
    }

    #[test]
    fn size_guard() {
        let g = WeightedHypergraph::path(21).unwrap();
        assert!(matches!(DenseState::graph_state(&g, 2, None), Err(Error::DenseTooLarge { .. })));
    }
}
