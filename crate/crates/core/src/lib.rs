//! Branching-stable point processes: branching random walks, the branching
//! convolution of point-measure laws, shifted decorated Poisson point
//! processes, and statistical checks that such processes are fixed points
//! of the convolution with an offspring law.
//!
//! Every random object is drawn from an explicit [`rng::SimRng`] stream,
//! and replicate `i` of an experiment always uses stream `i` of its key,
//! so results do not depend on scheduling.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN.

pub mod branching;
pub mod error;
pub mod martingale;
pub mod point_measure;
pub mod reproduction;
pub mod rng;
pub mod sdppp;
pub mod stats;
pub mod test_function;
pub mod verifier;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
