//! Pseudo-population bootstrap for superpopulation inference under
//! unequal-probability sampling designs.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod designs;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod infer;
pub mod par;
pub mod popgen;
pub mod resample;
pub mod rng;

pub use error::{Error, Result};
pub use estimate::{Functional, Sample, WeightedEdf};

/// Borrow a slice of functionals as trait objects.
pub fn functional_refs<F: Functional>(fs: &[F]) -> Vec<&dyn Functional> {
    fs.iter().map(|f| f as &dyn Functional).collect()
}
