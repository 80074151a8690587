//! Config-driven experiment runner on top of `byrd-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;
pub mod summarize;
