#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anchoring;
pub mod convergence;
pub mod curve;
pub mod error;
pub mod evalframe;
pub mod fit;
pub mod io;
pub mod par;
pub mod trace;
pub mod synth;
