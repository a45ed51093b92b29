//! Explanation maps for dense classifiers, targeted manipulation of those
//! maps, the level-set geometry behind their fragility, and smoothing
//! defenses.
//!
//! The crate is organised by task:
//!
//! - [`net`]: dense networks, first and second order input derivatives,
//!   SGD training, weight files.
//! - [`explain`]: Gradient, Gradient×Input, Integrated Gradients, guided
//!   backprop, LRP and PatternAttribution, plus β-smoothing and SmoothGrad.
//! - [`attack`]: optimisation of an input so its explanation matches a target
//!   while the logits stay put.
//! - [`geometry`]: normals, second fundamental form and principal curvatures
//!   of `{x : g(x) = c}`, contour tracing, and numerical checks of the
//!   curvature bound and of the SmoothGrad/softplus correspondence.
//! - [`metrics`]: SSIM, Pearson correlation and MSE.
//! - [`experiment`]: IDX loading and the seeded campaign runners behind the
//!   `xmanip` binary.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activation;
pub mod artifact;
pub mod attack;
pub mod defaults;
pub mod error;
pub mod experiment;
pub mod explain;
pub mod geometry;
mod graph;
pub mod metrics;
pub mod net;
pub mod tape;
pub mod tensor;

#[cfg(test)]
pub(crate) mod testutil;

pub use activation::Activation;
pub use error::{Error, Result};
pub use net::{DenseLayer, ForwardTrace, Network};
pub use tensor::Tensor;
