//! Weight-space toolkit for transfer-based black-box attacks on small
//! differentiable classifiers.
//!
//! The crate is organised around a single currency: the flat `f64` weight
//! vector of a multi-layer perceptron. On top of it live
//!
//! - [`model`]: the classifier itself (loss, input/weight gradients,
//!   Hessian-vector products),
//! - [`data`]: deterministic synthetic datasets and IDX parsing,
//! - [`train`]: SGD training and LGV weight collection along a
//!   constant-high-learning-rate trajectory,
//! - [`surrogate`]: every weight-space surrogate family (random-direction
//!   vicinities, the LGV deviation subspace, PCA projections, shifted
//!   deviations),
//! - [`attack`]: iterative projected gradient attacks over multi-weight
//!   surrogates and transfer evaluation,
//! - [`geometry`]: sharpness metrics, loss rays, interpolation paths and
//!   feature-space disk maps.
//!
//! Everything is deterministic given its seeds and free of interior
//! mutability; the crate is `no_std` (with `alloc`) so the numerical core
//! stays independent of any IO layer.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod attack;
pub mod data;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod surrogate;
pub mod train;

pub use error::{Error, Result};
pub use model::{Activation, Batch, Matrix, Model, ModelSpec, WeightVector};
pub use train::WeightCollection;
