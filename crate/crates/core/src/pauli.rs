//! Generalized Pauli words over `Z_d`.
//!
//! Conventions used everywhere in the crate: `X|k> = |k+1 mod d>`,
//! `Z|k> = w^k |k>` with `w = exp(2 pi i / d)`, hence `Z X = w X Z`. A word is
//! `w^phase prod_q X_q^{x_q} Z_q^{z_q}` with the X factor written first on
//! every qudit.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuditPauli {
    d: u32,
    x: Vec<u32>,
    z: Vec<u32>,
    phase: u32,
}

impl QuditPauli {
    pub fn identity(d: u32, n: usize) -> Self {
        Self {
            d,
            x: vec![0; n],
            z: vec![0; n],
            phase: 0,
        }
    }

    /// Exponents are reduced mod `d`.
    pub fn new(d: u32, x: Vec<u32>, z: Vec<u32>, phase: u32) -> Self {
        assert_eq!(x.len(), z.len());
        let red = |v: Vec<u32>| v.into_iter().map(|e| e % d).collect();
        Self {
            d,
            x: red(x),
            z: red(z),
            phase: phase % d,
        }
    }

    pub fn single_x(d: u32, n: usize, site: usize) -> Self {
        let mut p = Self::identity(d, n);
        p.x[site] = 1;
        p
    }

    pub fn single_z(d: u32, n: usize, site: usize) -> Self {
        let mut p = Self::identity(d, n);
        p.z[site] = 1;
        p
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x_exponents(&self) -> &[u32] {
        &self.x
    }

    pub fn z_exponents(&self) -> &[u32] {
        &self.z
    }

    pub fn phase(&self) -> u32 {
        self.phase
    }

    pub fn set_phase(&mut self, phase: u32) {
        self.phase = phase % self.d;
    }

    pub fn add_phase(&mut self, delta: u32) {
        self.phase = ((self.phase as u64 + delta as u64) % self.d as u64) as u32;
    }

    pub(crate) fn z_mut(&mut self) -> &mut [u32] {
        &mut self.z
    }

    /// `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.d, other.d);
        debug_assert_eq!(self.len(), other.len());
        let d = self.d as u64;
        // Z^{z1} X^{x2} = w^{z1 x2} X^{x2} Z^{z1}
        let mut phase = self.phase as u64 + other.phase as u64;
        for q in 0..self.len() {
            phase += self.z[q] as u64 * other.x[q] as u64;
        }
        Self {
            d: self.d,
            x: self.x.iter().zip(&other.x).map(|(a, b)| ((a + b) as u64 % d) as u32).collect(),
            z: self.z.iter().zip(&other.z).map(|(a, b)| ((a + b) as u64 % d) as u32).collect(),
            phase: (phase % d) as u32,
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::identity(self.d, self.len());
        for _ in 0..k % self.d {
            out = out.mul(self);
        }
        out
    }

    /// `lambda` with `self * other = w^lambda other * self`.
    pub fn symplectic(&self, other: &Self) -> u32 {
        let d = self.d as i64;
        let mut acc: i64 = 0;
        for q in 0..self.len() {
            acc += self.z[q] as i64 * other.x[q] as i64 - self.x[q] as i64 * other.z[q] as i64;
        }
        acc.rem_euclid(d) as u32
    }

    pub fn commutes_with(&self, other: &Self) -> bool {
        self.symplectic(other) == 0
    }

    /// Exponent vector `(x | z)` ignoring the phase.
    pub fn symplectic_vector(&self) -> Vec<u32> {
        self.x.iter().chain(&self.z).copied().collect()
    }
}

pub(crate) fn mod_pow(base: u64, mut exp: u64, m: u64) -> u64 {
    let mut b = base % m;
    let mut acc = 1 % m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    acc
}

/// Inverse in `GF(p)`; `p` must be prime and `a` nonzero mod `p`.
pub(crate) fn inv_mod_prime(a: u32, p: u32) -> u32 {
    mod_pow(a as u64, p as u64 - 2, p as u64) as u32
}

pub fn is_prime(d: u32) -> bool {
    if d < 2 {
        return false;
    }
    let mut k = 2u32;
    while (k as u64) * (k as u64) <= d as u64 {
        if d % k == 0 {
            return false;
        }
        k += 1;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zx_commutation_phase() {
        for d in 2..7 {
            let x = QuditPauli::single_x(d, 1, 0);
            let z = QuditPauli::single_z(d, 1, 0);
            let zx = z.mul(&x);
            let xz = x.mul(&z);
            // ZX = w XZ
            assert_eq!(zx.phase(), (xz.phase() + 1) % d);
            assert_eq!(z.symplectic(&x), 1);
        }
    }

    #[test]
    fn powers_wrap() {
        let x = QuditPauli::single_x(3, 2, 1);
        assert_eq!(x.pow(3), QuditPauli::identity(3, 2));
        assert_eq!(x.pow(2).x_exponents(), &[0, 2]);
    }

    #[test]
    fn primes() {
        let p: Vec<u32> = (0..20).filter(|&d| is_prime(d)).collect();
        assert_eq!(p, vec![2, 3, 5, 7, 11, 13, 17, 19]);
        assert_eq!(inv_mod_prime(3, 7), 5);
    }

    fn arb_pauli(d: u32, n: usize) -> impl Strategy<Value = QuditPauli> {
        (
            proptest::collection::vec(0..d, n),
            proptest::collection::vec(0..d, n),
            0..d,
        )
            .prop_map(move |(x, z, p)| QuditPauli::new(d, x, z, p))
    }

    proptest! {
        #[test]
        fn multiplication_is_associative(
            (a, b, c) in (arb_pauli(5, 3), arb_pauli(5, 3), arb_pauli(5, 3))
        ) {
            prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        }

        #[test]
        fn symplectic_form_matches_products((a, b) in (arb_pauli(3, 4), arb_pauli(3, 4))) {
            let ab = a.mul(&b);
            let mut ba = b.mul(&a);
            ba.add_phase(a.symplectic(&b));
            prop_assert_eq!(ab, ba);
        }
    }
}
