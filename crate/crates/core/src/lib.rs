//! Kernels of infinitely wide ReLU networks with injected noise, and exact
//! Gaussian-process inference on them.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, data loading and
//! the experiment drivers live in the `nngp` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod math;

pub mod codec;
pub mod error;
pub mod gp;
pub mod gram;
pub mod kernel;
pub mod matrix;
pub mod mc;

pub use error::{NngpError, Result};
pub use gp::{fit, predict, Posterior, PosteriorPredictive};
pub use gram::{build_train_gram, CrossCovariance, Dataset, GramMatrix};
pub use kernel::{
    classify_regime, KernelParams, KernelState, NoiseMode, NoiseSpec, Regime, RegimeLabel,
    TableCase,
};
pub use matrix::Matrix;
