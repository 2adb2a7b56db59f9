//! Tables of the closed-form bounds over parameter grids.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use gsverify_core::bounds::{comparison_m, p_acc, p_acc_prior, total_confidence};
use gsverify_core::verifier::{compute_n_test, threshold_multi_copy_bound};
use serde::Serialize;

use crate::{config_err, invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub ns: Vec<usize>,
    pub cs: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub ntildes: Vec<u64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            ns: vec![9, 16, 25, 50, 100],
            cs: vec![13.0, 16.0, 64.0, 100.0, 192.0],
            epsilons: vec![0.001, 0.01],
            ntildes: vec![1],
        }
    }
}

/// One grid point. `bound` is the certified fidelity at the acceptance
/// threshold; `m` and `t` are the copy count of the single-test comparison
/// protocol and its exponent, empty when `c <= 64/5`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub c: f64,
    pub epsilon: f64,
    pub n_test: u64,
    pub n_total: u64,
    pub bound: f64,
    pub confidence: f64,
    pub m: Option<f64>,
    pub t: Option<f64>,
    pub p_acc: f64,
    pub p_acc_prior: Option<f64>,
    pub ntilde: u64,
}

pub fn sweep_rows(grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &n in &grid.ns {
        if n < 2 {
            return Err(config_err(format!("sweep needs n >= 2, got {n}")));
        }
        let n_test = compute_n_test(n as u64).map_err(invalid)?;
        for &ntilde in &grid.ntildes {
            for &c in &grid.cs {
                let cmp = comparison_m(n as u64, c).ok();
                for &epsilon in &grid.epsilons {
                    rows.push(SweepRow {
                        n,
                        c,
                        epsilon,
                        n_test,
                        n_total: 2 * n as u64 * n_test,
                        bound: threshold_multi_copy_bound(n, c, ntilde),
                        confidence: total_confidence(n as u64, c).value,
                        m: cmp.map(|x| x.m),
                        t: cmp.map(|x| x.exponent),
                        p_acc: p_acc(n as u64, n_test, epsilon).map_err(invalid)?,
                        p_acc_prior: match cmp {
                            Some(x) => Some(p_acc_prior(x.m, epsilon).map_err(invalid)?),
                            None => None,
                        },
                        ntilde,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for r in rows {
        w.serialize(r).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c192_row_has_exponent_15() {
        let rows = sweep_rows(&SweepGrid {
            ns: vec![9],
            cs: vec![12.0, 192.0],
            epsilons: vec![0.01],
            ntildes: vec![1],
        })
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].t, None);
        assert_eq!(rows[1].t, Some(15.0));
        assert_eq!((rows[1].n_test, rows[1].n_total), (2253, 40554));
    }
}
