#![cfg_attr(not(test), no_std)]

//! Stabilizer-test verification of qudit graph states and continuous-variable
//! weighted hypergraph states.
//!
//! A measurement-limited verifier receives `N_total` registers of `n` sites
//! each from an untrusted prover. It tests `n` disjoint groups of `N_test`
//! registers with the graph stabilizers `g_1 .. g_n`, picks target registers
//! from the untouched remainder and, if enough tests pass, certifies a lower
//! bound on the fidelity of the targets with the ideal state. The bound rests
//! on Serfling's tail inequality for sampling without replacement.
//!
//! The crate is `no_std` with `alloc`; file formats, transport and the CLI live
//! in the companion `gsverify` crate.
//!
//! Module map:
//!
//! * [`graph`]: weighted hypergraphs, presets, stabilizer and nullifier families.
//! * [`pauli`], [`tableau`], [`dense`], [`qudit`]: qudit stabilizer simulation
//!   and the stabilizer test.
//! * [`linalg`], [`cv`]: Gaussian states and the CV nullifier test.
//! * [`adversary`]: prover strategies, fixed before any verifier randomness.
//! * [`verifier`]: group sampling, the streaming verifier/prover sessions and
//!   the verdict.
//! * [`bounds`]: closed-form statistics.
//!
//! Vertex indices are 1-based in every public graph type; simulators address
//! sites 0-based (`site = vertex - 1`).

extern crate alloc;

pub mod adversary;
pub mod bounds;
pub mod cv;
pub mod dense;
mod error;
pub mod graph;
pub mod linalg;
pub mod pauli;
pub mod qudit;
pub mod rng;
pub mod tableau;
pub mod verifier;

pub use error::{Error, Result};
