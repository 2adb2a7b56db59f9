//! Closed-form statistics behind the verdict: Serfling's tail bound, the
//! per-group confidences of the soundness argument, the certified count of
//! ideal registers, and the efficiency and robustness comparison formulas.
//!
//! All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `Pr[sum_{complement} Y >= (N/K) sum_{sample} Y + N nu]` for a sample of
/// `K` drawn without replacement from `N + K` binary values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerflingQuery {
    pub complement: u64,
    pub sample: u64,
    pub nu: f64,
}

impl SerflingQuery {
    pub fn new(complement: u64, sample: u64, nu: f64) -> Result<Self> {
        if complement == 0 {
            return Err(Error::domain("N", 0.0, "N >= 1"));
        }
        if sample == 0 {
            return Err(Error::domain("K", 0.0, "K >= 1"));
        }
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::domain("nu", nu, "0 < nu < 1"));
        }
        Ok(Self { complement, sample, nu })
    }
}

/// `exp[-2 nu^2 N K^2 / ((N + K)(K + 1))]`.
pub fn serfling_tail(q: &SerflingQuery) -> f64 {
    let n = q.complement as f64;
    let k = q.sample as f64;
    libm::exp(-2.0 * q.nu * q.nu * n * k * k / ((n + k) * (k + 1.0)))
}

/// `q_i = 1 - exp[-2 nu^2 N_test / (1 + 1/(2n - i)) / (1 + 1/N_test)]`, the
/// probability that the group-`i` estimate holds when `N_total = 2 n N_test`.
pub fn group_confidence(n: u64, n_test: u64, i: u64, nu: f64) -> Result<f64> {
    if i == 0 || i > n {
        return Err(Error::domain("i", i as f64, "1 <= i <= n"));
    }
    if n_test == 0 {
        return Err(Error::domain("N_test", 0.0, "N_test >= 1"));
    }
    Ok(1.0 - group_tail(n, n_test, i, nu))
}

/// `nu = sqrt(c) / n^2`, the deviation used on the protocol path.
pub fn protocol_nu(n: u64, c: f64) -> f64 {
    libm::sqrt(c) / (n as f64 * n as f64)
}

/// `N_cor^L = max{ceil((n - 2 sqrt c - 2 n^2 + 2 n N_pass / N_test) N_test), 0}`:
/// registers among the `n N_test` untested ones guaranteed to pass every
/// stabilizer test.
pub fn certified_count(n: u64, n_test: u64, n_pass: u64, c: f64) -> Result<u64> {
    if n_test == 0 {
        return Err(Error::domain("N_test", 0.0, "N_test >= 1"));
    }
    let nf = n as f64;
    let raw = (nf - 2.0 * libm::sqrt(c) - 2.0 * nf * nf) * n_test as f64 + 2.0 * nf * n_pass as f64;
    let v = libm::ceil(raw);
    Ok(if v > 0.0 { v as u64 } else { 0 })
}

/// `1 - n^{1 - 5c/64}` clamped to `[0, 1]`, with the raw value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confidence {
    pub value: f64,
    pub raw: f64,
}

pub fn total_confidence(n: u64, c: f64) -> Confidence {
    let raw = 1.0 - libm::pow(n as f64, 1.0 - 5.0 * c / 64.0);
    Confidence {
        value: raw.clamp(0.0, 1.0),
        raw,
    }
}

/// The chain `prod q_i >= q_n^n >= (1 - n^{-5c/64})^n > 1 - n^{1-5c/64}`,
/// stored as deficits `1 - value` (computed with `expm1`/`log1p`) so that the
/// links stay distinguishable when every value rounds to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceChain {
    pub product_q_deficit: f64,
    pub q_n_pow_n_deficit: f64,
    pub power_form_deficit: f64,
    pub final_form_deficit: f64,
}

/// `exp[-2 nu^2 N_test / (1 + 1/(2n - i)) / (1 + 1/N_test)] = 1 - q_i`.
fn group_tail(n: u64, n_test: u64, i: u64, nu: f64) -> f64 {
    let nt = n_test as f64;
    let a = 1.0 / (1.0 + 1.0 / (2 * n - i) as f64);
    let b = 1.0 / (1.0 + 1.0 / nt);
    libm::exp(-2.0 * nu * nu * nt * a * b)
}

/// Evaluates each link of the confidence chain at `N_test = n_test(n)`.
pub fn confidence_chain(n: u64, c: f64) -> Result<ConfidenceChain> {
    let n_test = crate::verifier::compute_n_test(n)?;
    if n_test == 0 {
        return Err(Error::domain("n", n as f64, "n >= 2"));
    }
    let nu = protocol_nu(n, c);
    let nf = n as f64;
    let log_product: f64 = (1..=n).map(|i| libm::log1p(-group_tail(n, n_test, i, nu))).sum();
    let x = libm::pow(nf, -5.0 * c / 64.0);
    Ok(ConfidenceChain {
        product_q_deficit: -libm::expm1(log_product),
        q_n_pow_n_deficit: -libm::expm1(nf * libm::log1p(-group_tail(n, n_test, n, nu))),
        power_form_deficit: -libm::expm1(nf * libm::log1p(-x)),
        final_form_deficit: nf * x,
    })
}

/// Copies needed by the single-test-per-copy comparison protocol to match the
/// same fidelity and confidence: `M = n^{5c/64} / (2 sqrt c + 1)` with growth
/// exponent `t = 5c/64`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonM {
    pub m: f64,
    pub exponent: f64,
}

pub fn comparison_m(n: u64, c: f64) -> Result<ComparisonM> {
    if !(c > 64.0 / 5.0) {
        return Err(Error::domain("c", c, "c > 64/5"));
    }
    let t = 5.0 * c / 64.0;
    Ok(ComparisonM {
        m: libm::pow(n as f64, t) / (2.0 * libm::sqrt(c) + 1.0),
        exponent: t,
    })
}

fn ln_choose(n: u64, k: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// Acceptance probability for i.i.d. registers that fail every test with
/// probability `eps`:
/// `sum_{k <= floor(N_test / 2n)} C(n N_test, k) (1-eps)^{n N_test - k} eps^k`.
pub fn p_acc(n: u64, n_test: u64, eps: f64) -> Result<f64> {
    Ok(libm::exp(ln_p_acc(n, n_test, eps)?).min(1.0))
}

/// Natural log of [`p_acc`], accumulated in log space so it stays finite when
/// the probability itself underflows.
pub fn ln_p_acc(n: u64, n_test: u64, eps: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::domain("epsilon", eps, "0 <= epsilon <= 1"));
    }
    if n == 0 {
        return Err(Error::domain("n", 0.0, "n >= 1"));
    }
    let total = n * n_test;
    let kmax = (n_test / (2 * n)).min(total);
    if eps == 0.0 {
        return Ok(0.0);
    }
    if eps == 1.0 {
        return Ok(if kmax >= total { 0.0 } else { f64::NEG_INFINITY });
    }
    let (ln_e, ln_1e) = (libm::log(eps), libm::log1p(-eps));
    let terms = (0..=kmax).map(|k| ln_choose(total, k) + (total - k) as f64 * ln_1e + k as f64 * ln_e);
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.map(|t| libm::exp(t - max)).sum();
    Ok((max + libm::log(sum)).min(0.0))
}

/// `(1 - eps)^{M - 1}`.
pub fn p_acc_prior(m: f64, eps: f64) -> Result<f64> {
    if !(m >= 1.0) {
        return Err(Error::domain("M", m, "M >= 1"));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::domain("epsilon", eps, "0 <= epsilon <= 1"));
    }
    if m == 1.0 {
        return Ok(1.0);
    }
    Ok(libm::exp((m - 1.0) * libm::log1p(-eps)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serfling_small_case() {
        let q = SerflingQuery::new(1, 1, 0.5).unwrap();
        assert!((serfling_tail(&q) - libm::exp(-0.125)).abs() < 1e-15);
        assert!((serfling_tail(&q) - 0.882497).abs() < 1e-6);
        let tiny = SerflingQuery::new(5, 5, 1e-9).unwrap();
        assert!((serfling_tail(&tiny) - 1.0).abs() < 1e-12);
        assert!(SerflingQuery::new(0, 1, 0.5).is_err());
        assert!(SerflingQuery::new(1, 1, 1.0).is_err());
    }

    #[test]
    fn group_confidence_matches_serfling() {
        for (n, nt) in [(9u64, 2253u64), (3, 7), (16, 40)] {
            for i in 1..=n {
                for nu in [0.01, 0.1, 0.3] {
                    let q = group_confidence(n, nt, i, nu).unwrap();
                    let s = SerflingQuery::new(2 * n * nt - i * nt, nt, nu).unwrap();
                    assert!((q - (1.0 - serfling_tail(&s))).abs() < 1e-12);
                }
            }
        }
        assert_eq!(group_confidence(4, 10, 2, 0.0).unwrap(), 0.0);
        assert!(group_confidence(4, 10, 5, 0.1).is_err());
        let qs: Vec<f64> = (1..=6).map(|i| group_confidence(6, 30, i, 0.05).unwrap()).collect();
        // The complement shrinks as i grows, so q_n is the smallest.
        assert!(qs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn certified_count_cases() {
        let (n, nt, c) = (9u64, 2253u64, 16.0);
        assert_eq!(certified_count(n, nt, n * nt, c).unwrap(), ((9.0 - 8.0) * 2253.0) as u64);
        assert_eq!(certified_count(n, nt, 0, c).unwrap(), 0);
        assert!(certified_count(n, 0, 0, c).is_err());
    }

    #[test]
    fn confidence_values() {
        assert_eq!(total_confidence(9, 64.0 / 5.0).raw, 0.0);
        let c = total_confidence(9, 192.0);
        assert!((c.raw - (1.0 - libm::pow(9.0, -14.0))).abs() < 1e-16);
        let small = total_confidence(9, 5.0);
        assert!(small.raw < 0.0 && small.value == 0.0);
    }

    #[test]
    fn comparison_exponents() {
        let m = comparison_m(10, 192.0).unwrap();
        assert_eq!(m.exponent, 15.0);
        assert!((m.m - 1e15 / (2.0 * libm::sqrt(192.0) + 1.0)).abs() / m.m < 1e-12);
        assert_eq!(comparison_m(20, 64.0).unwrap().exponent, 5.0);
        assert!(comparison_m(20, 12.0).is_err());
    }

    #[test]
    fn p_acc_direct_binomial() {
        let expected = libm::pow(0.9, 8.0) + 8.0 * libm::pow(0.9, 7.0) * 0.1;
        assert!((p_acc(2, 4, 0.1).unwrap() - expected).abs() < 1e-12);
        assert!((p_acc(2, 4, 0.1).unwrap() - 0.8131047).abs() < 1e-7);
        assert_eq!(p_acc(9, 2253, 0.0).unwrap(), 1.0);
        assert!(p_acc(2, 4, 1.5).is_err());
    }

    #[test]
    fn p_acc_prior_cases() {
        assert_eq!(p_acc_prior(100.0, 0.0).unwrap(), 1.0);
        assert_eq!(p_acc_prior(1.0, 0.3).unwrap(), 1.0);
        assert!(p_acc_prior(0.5, 0.3).is_err());
    }
}
