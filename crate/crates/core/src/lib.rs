//! Simulator and library for Byzantine-resilient federated finite-sum
//! optimization.
//!
//! Honest workers hold private shards of a finite-sum objective and send
//! stochastic (SGD, mini-batch SGD) or variance-reduced (SAGA) gradient
//! messages to a master node. A subset of workers is Byzantine and may send
//! arbitrary vectors; the master combines the round's messages with a robust
//! aggregation rule (geometric median, coordinate-wise median, Krum) and
//! takes a gradient step.
//!
//! Module map:
//!
//! * [`losses`]: finite-sum losses, gradients and problem constants.
//! * [`aggregate`]: mean, ε-approximate geometric median, coordinate median, Krum.
//! * [`workers`]: honest message generation, including the SAGA gradient table.
//! * [`attacks`]: Gaussian, sign-flipping and zero-gradient adversaries.
//! * [`engine`]: synchronous round loop, metrics and the reference solver.
//! * [`ingest`]: LIBSVM parsing, synthetic datasets and partitioning.
//! * [`theory`]: convergence-bound calculators and Monte-Carlo checkers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod attacks;
pub mod engine;
mod error;
pub mod ingest;
pub mod losses;
pub mod theory;
mod vector;
pub mod workers;

pub use error::{Error, Result};
pub use vector::ModelVector;
