//! Multi-zone RC building thermal models, their single-zone aggregation, and
//! joint identification of aggregate parameters and the unmeasured aggregate
//! heat load.

// NaN-rejecting `!(x > 0.0)` checks and index loops over coupled arrays are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod aggregation;
pub mod config;
pub mod error;
pub mod estimation;
pub mod heuristics;
pub mod io;
pub mod scenarios;
pub mod thermal;
pub mod trace;

pub use error::{Error, Result};
