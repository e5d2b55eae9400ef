//! Exact values, bounds and protocol simulation for k-party
//! entanglement cloning games.
//!
//! A referee holds a reference register and announces a uniformly random
//! party index; the announced party must end up maximally entangled with
//! the referee. This crate computes the exact optimal winning probability
//! of that game (and of its arbitrary-target and parallel-repetition
//! generalizations) through operator norms, evaluates explicit
//! strategies, searches for good strategies by alternating optimization,
//! and reuses the game machinery to analyze a qubit-routing
//! position-verification protocol, including a hash-based variant in a
//! reprogrammable-random-oracle security model.
//!
//! Modules:
//! - [`layout`] / [`operator`]: labeled-register dense linear algebra
//!   (tensor products, embeddings, partial traces, Hermitian norms).
//! - [`game`]: the k-party game, exact values and strategy evaluation.
//! - [`parallel`]: parallel repetition of the two-party game, analytic
//!   bounds, overlap machinery and a see-saw optimizer.
//! - [`qpv`]: routing position-verification rounds, the optimal
//!   unentangled attack, exact and Monte-Carlo acceptance.
//! - [`rom`]: reprogrammable random-oracle tables and the hash-routing
//!   soundness harness.
//! - [`io`]: JSON interchange formats shared with the CLI.

pub mod error;
pub mod game;
pub mod io;
pub mod layout;
pub mod operator;
pub mod parallel;
pub mod qpv;
pub mod rng;
pub mod rom;
pub mod seesaw;
pub mod tol;

pub use error::{Error, Result};
pub use layout::RegisterLayout;
pub use operator::{max_entangled, Operator, StateVector};
