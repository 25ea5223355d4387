//! Lyapunov exponents of simple symmetric random walks on `Z^d` killed by
//! i.i.d. non-negative random potentials.
//!
//! The walk survives each visit to a site `x` with probability `e^{-V(x)}`.
//! The passage function `e(0,y,V)` (probability of reaching `y` alive) and
//! the Green's function `g(0,y,V)` (expected visits to `y` before death)
//! decay exponentially in `|y|`; the decay rates are the quenched exponent
//! `alpha_V` (rate for a fixed potential realization) and the annealed
//! exponent `beta_V` (rate after averaging over the potential first).
//!
//! This crate computes those exponents three independent ways and checks the
//! routes against each other:
//!
//! * exact finite-box linear algebra for `e`, `g`, and the operator Green's
//!   function of `-Laplacian + V` ([`green`]),
//! * closed forms for constant potentials: the arsinh root formula and the
//!   point-to-hyperplane martingale inverse ([`exponents`]),
//! * seeded Monte Carlo over paths, including an annealed estimator that
//!   integrates the potential out exactly through the log-MGF of the local
//!   times ([`walk`], [`exponents`]).
//!
//! [`lab`] bundles the experiment drivers: small-potential scaling sweeps
//! (`value / sqrt(gamma)` against `sqrt(2 d E[V]) * |l|_2`), the Brownian
//! hitting-time Laplace limit, two counterexample families that break the
//! `sqrt(gamma)` law, and the exact path/solver invariant suite.
//!
//! The crate is `no_std` (with `alloc`); float math comes from `libm` via
//! `num-traits`, so results are bit-reproducible across platforms. All
//! randomness flows from explicit `u64` seeds through counter-derived
//! streams, so any fan-out over threads (see [`exec::Executor`]) returns
//! bit-identical results to a sequential run.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod exec;
pub mod exponents;
pub mod green;
pub mod lab;
pub mod lattice;
pub mod potential;
pub mod rng;
pub mod stats;
pub mod walk;

pub use exec::{Executor, Sequential};
pub use exponents::{ExponentEstimate, Method};
pub use lattice::{BoxRegion, Direction, LatticeIsometry, Site};
pub use potential::{PotentialSpec, ScalarField};
