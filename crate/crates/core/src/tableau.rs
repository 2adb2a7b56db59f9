//! Stabilizer tableaux over prime local dimension.
//!
//! A state is stored as `n` commuting, independent generators `S_k` with
//! `S_k |psi> = |psi>`. Single-qudit Pauli measurements follow the prime-field
//! update rule: if some generator fails to commute with the measured word the
//! outcome is uniform over `Z_d`; otherwise it is fixed by the phase of the
//! stabilizer element equal to the word.

use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{build_stabilizers, WeightedHypergraph};
use crate::pauli::{inv_mod_prime, is_prime, QuditPauli};
use crate::qudit::{DeviationVector, QuditBasis};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilizerTableau {
    d: u32,
    generators: Vec<QuditPauli>,
}

impl StabilizerTableau {
    pub fn from_generators(d: u32, generators: Vec<QuditPauli>) -> Result<Self> {
        if d < 2 {
            return Err(Error::Dimension(d));
        }
        if !is_prime(d) {
            return Err(Error::CompositeDimension(d));
        }
        let n = generators.len();
        if generators.iter().any(|g| g.len() != n || g.d() != d) {
            return Err(Error::InvalidTableau);
        }
        let t = Self { d, generators };
        if !t.is_valid() {
            return Err(Error::InvalidTableau);
        }
        Ok(t)
    }

    /// Generators `g_i = X_i prod_{N(i)} Z_j`, all with phase 0.
    pub fn graph_state(graph: &WeightedHypergraph, d: u32) -> Result<Self> {
        let specs = build_stabilizers(graph, d)?;
        if !is_prime(d) {
            return Err(Error::CompositeDimension(d));
        }
        let n = graph.n();
        let generators = specs
            .iter()
            .map(|s| {
                let mut g = QuditPauli::single_x(d, n, s.vertex - 1);
                for &j in &s.neighbors {
                    g.z_mut()[j - 1] = 1;
                }
                g
            })
            .collect();
        Ok(Self { d, generators })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[QuditPauli] {
        &self.generators
    }

    /// Conjugates by `prod Z_i^{a_i}`: each generator picks up `w^{sum a_q x_q}`.
    pub fn apply_deviation(&mut self, a: &DeviationVector) -> Result<()> {
        if a.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                got: a.len(),
            });
        }
        let d = self.d as u64;
        for g in &mut self.generators {
            let shift: u64 = g
                .x_exponents()
                .iter()
                .zip(a.entries())
                .map(|(&x, &aq)| x as u64 * aq as u64)
                .sum();
            g.add_phase((shift % d) as u32);
        }
        Ok(())
    }

    /// Pairwise commuting and independent.
    pub fn is_valid(&self) -> bool {
        let n = self.n();
        for i in 0..n {
            for j in i + 1..n {
                if !self.generators[i].commutes_with(&self.generators[j]) {
                    return false;
                }
            }
        }
        let rows: Vec<Vec<u32>> = self.generators.iter().map(|g| g.symplectic_vector()).collect();
        rank_mod_p(rows, self.d) == n
    }

    pub fn measure_site(
        &mut self,
        site: usize,
        basis: QuditBasis,
        choose: impl FnOnce(u32) -> u32,
    ) -> Result<u32> {
        let n = self.n();
        if site >= n {
            return Err(Error::SiteOutOfRange { site, n });
        }
        let p = match basis {
            QuditBasis::X => QuditPauli::single_x(self.d, n, site),
            QuditBasis::Z => QuditPauli::single_z(self.d, n, site),
        };
        Ok(self.measure(&p, choose))
    }

    /// Measures a Pauli word with phase 0; returns `m` for eigenvalue `w^m`.
    /// `choose(d)` is called only when the outcome is uniformly random and
    /// must return a value in `0..d`.
    pub fn measure(&mut self, p: &QuditPauli, choose: impl FnOnce(u32) -> u32) -> u32 {
        let d = self.d;
        let lambdas: Vec<u32> = self.generators.iter().map(|g| g.symplectic(p)).collect();
        match lambdas.iter().position(|&l| l != 0) {
            Some(pivot) => {
                let inv = inv_mod_prime(lambdas[pivot], d);
                let pivot_gen = self.generators[pivot].clone();
                for (k, &l) in lambdas.iter().enumerate() {
                    if k != pivot && l != 0 {
                        let t = ((d - l) as u64 * inv as u64 % d as u64) as u32;
                        self.generators[k] = self.generators[k].mul(&pivot_gen.pow(t));
                    }
                }
                let m = choose(d) % d;
                let mut g = p.clone();
                g.set_phase((d - m) % d);
                self.generators[pivot] = g;
                m
            }
            None => {
                let coeffs = solve_mod_p(&self.generators, &p.symplectic_vector(), d)
                    .expect("commuting Pauli lies in a maximal stabilizer group");
                let mut q = QuditPauli::identity(d, self.n());
                for (g, &c) in self.generators.iter().zip(&coeffs) {
                    if c != 0 {
                        q = q.mul(&g.pow(c));
                    }
                }
                // q = w^phi P stabilizes, so P has eigenvalue w^{-phi}.
                (d - q.phase()) % d
            }
        }
    }
}

/// Rank of `rows` over `GF(p)`.
pub(crate) fn rank_mod_p(mut rows: Vec<Vec<u32>>, p: u32) -> usize {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..cols {
        let Some(piv) = (rank..rows.len()).find(|&r| rows[r][col] != 0) else {
            continue;
        };
        rows.swap(rank, piv);
        let inv = inv_mod_prime(rows[rank][col], p);
        let pivot_row = rows[rank].clone();
        for r in 0..rows.len() {
            if r != rank && rows[r][col] != 0 {
                let f = rows[r][col] as u64 * inv as u64 % p as u64;
                for c in 0..cols {
                    let sub = f * pivot_row[c] as u64 % p as u64;
                    rows[r][c] = ((rows[r][c] as u64 + p as u64 - sub) % p as u64) as u32;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Coefficients `c` with `sum_k c_k v(g_k) = target` over `GF(p)`.
fn solve_mod_p(generators: &[QuditPauli], target: &[u32], p: u32) -> Option<Vec<u32>> {
    let n = generators.len();
    let rows = target.len();
    let pm = p as u64;
    // Augmented matrix: rows are symplectic coordinates, columns generators.
    let mut m: Vec<Vec<u32>> = (0..rows)
        .map(|r| {
            let mut row: Vec<u32> = generators
                .iter()
                .map(|g| {
                    if r < n {
                        g.x_exponents()[r]
                    } else {
                        g.z_exponents()[r - n]
                    }
                })
                .collect();
            row.push(target[r]);
            row
        })
        .collect();
    let mut pivots = vec![usize::MAX; n];
    let mut rank = 0;
    for col in 0..n {
        let Some(piv) = (rank..rows).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, piv);
        let inv = inv_mod_prime(m[rank][col], p) as u64;
        for c in 0..=n {
            m[rank][c] = (m[rank][c] as u64 * inv % pm) as u32;
        }
        let pivot_row = m[rank].clone();
        for r in 0..rows {
            if r != rank && m[r][col] != 0 {
                let f = m[r][col] as u64;
                for c in 0..=n {
                    let sub = f * pivot_row[c] as u64 % pm;
                    m[r][c] = ((m[r][c] as u64 + pm - sub) % pm) as u32;
                }
            }
        }
        pivots[col] = rank;
        rank += 1;
    }
    if m[rank..].iter().any(|row| row[n] != 0) {
        return None;
    }
    Some(
        pivots
            .iter()
            .map(|&r| if r == usize::MAX { 0 } else { m[r][n] })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_string(t: &StabilizerTableau, k: usize) -> (Vec<u32>, Vec<u32>, u32) {
        let g = &t.generators()[k];
        (g.x_exponents().to_vec(), g.z_exponents().to_vec(), g.phase())
    }

    #[test]
    fn single_vertex_is_plus_state() {
        let t = StabilizerTableau::graph_state(&WeightedHypergraph::graph(1, &[]).unwrap(), 2).unwrap();
        assert_eq!(pauli_string(&t, 0), (vec![1], vec![0], 0));
    }

    #[test]
    fn edge_generators() {
        let t = StabilizerTableau::graph_state(&WeightedHypergraph::path(2).unwrap(), 2).unwrap();
        assert_eq!(pauli_string(&t, 0), (vec![1, 0], vec![0, 1], 0));
        assert_eq!(pauli_string(&t, 1), (vec![0, 1], vec![1, 0], 0));
        assert!(t.is_valid());
    }

    #[test]
    fn deviation_sets_phase() {
        let mut t = StabilizerTableau::graph_state(&WeightedHypergraph::path(2).unwrap(), 2).unwrap();
        let before = t.clone();
        t.apply_deviation(&DeviationVector::zeros(2)).unwrap();
        assert_eq!(t, before);
        t.apply_deviation(&DeviationVector::new(vec![1, 0], 2).unwrap()).unwrap();
        assert_eq!(t.generators()[0].phase(), 1);
        assert_eq!(t.generators()[1].phase(), 0);
        assert!(t.apply_deviation(&DeviationVector::zeros(3)).is_err());
    }

    #[test]
    fn composite_dimension_rejected() {
        let g = WeightedHypergraph::path(2).unwrap();
        assert_eq!(StabilizerTableau::graph_state(&g, 4), Err(Error::CompositeDimension(4)));
    }

    #[test]
    fn invalid_generators_rejected() {
        let x = QuditPauli::single_x(3, 2, 0);
        let z = QuditPauli::single_z(3, 2, 0);
        assert_eq!(StabilizerTableau::from_generators(3, vec![x.clone(), z]), Err(Error::InvalidTableau));
        assert_eq!(StabilizerTableau::from_generators(3, vec![x.clone(), x]), Err(Error::InvalidTableau));
    }

    #[test]
    fn deterministic_and_random_measurements() {
        let g = WeightedHypergraph::graph(1, &[]).unwrap();
        let mut t = StabilizerTableau::graph_state(&g, 3).unwrap();
        // |+> gives X outcome 0 deterministically.
        assert_eq!(t.measure_site(0, QuditBasis::X, |_| unreachable!()).unwrap(), 0);
        // Z outcome is uniform; forced to 2 it must then repeat.
        assert_eq!(t.measure_site(0, QuditBasis::Z, |_| 2).unwrap(), 2);
        assert_eq!(t.measure_site(0, QuditBasis::Z, |_| unreachable!()).unwrap(), 2);
        assert!(t.is_valid());
    }
}
