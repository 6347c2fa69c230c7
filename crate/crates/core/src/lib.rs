#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod frame;
pub mod geometry;
pub mod grassmann;
pub mod harmonics;
pub mod inequalities;
pub mod hull;
pub mod linalg;
pub mod mixed;
pub mod montecarlo;
pub mod special;
pub mod spherical;
pub mod verdict;

pub use error::{Error, Result};
pub use verdict::Verdict;
