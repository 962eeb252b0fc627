//! Numerical laboratory for one-dimensional backward doubly stochastic
//! differential equations (BDSDEs)
//!
//! ```text
//! Y_t = ξ + ∫_t^T f(s, Y_s, Z_s) ds + ∫_t^T g(s, Y_s, Z_s) dB_s − ∫_t^T Z_s dW_s
//! ```
//!
//! where the `dB` integral is a backward Itô integral and the `dW` integral a
//! forward one. The crate provides:
//!
//! * [`model`]: problems, hypothesis falsifiers and a catalog of oracle problems,
//! * [`noise`]: time grids, keyed Brownian increments and discrete Itô sums,
//! * [`regularize`]: Lipschitz envelopes (inf/sup-convolutions) with brute-force oracles,
//! * [`solver`]: frozen-B regression scheme and the discrete residual,
//! * [`schemes`]: envelope ladders and the penalized monotone iteration,
//! * [`harness`]: comparison reports, norms and the property suite.
//!
//! The crate is `no_std` and only needs `alloc`. Parallelism is injected
//! through the [`Executor`] trait; [`Sequential`] is the in-crate default.
//!
//! Float math goes through `num_traits::Float` (backed by `libm`). Those
//! imports are marked `allow(unused_imports)` because std's inherent methods
//! take over whenever std is in the build graph.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

mod error;
mod exec;
pub mod harness;
pub mod model;
pub mod noise;
pub mod regression;
pub mod regularize;
pub mod rng;
pub mod schemes;
pub mod solver;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
