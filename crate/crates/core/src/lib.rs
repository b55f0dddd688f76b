//! Binary neural network training and inference with learnable filter masks.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense `f64` tensors, bitpacked ±1 tensors and the XNOR/popcount substrate.
//! - [`binops`]: sign/STE, binary and full-precision convolution, affine-free batch norm, losses.
//! - [`graph`]: a small reverse-mode engine over a static node list with freezable parameter groups.
//! - [`models`]: the mini model zoo and the checkpoint format.
//! - [`subsidiary`]: per-filter masks, the `Iden`/`Bin` transforms and the selection loss.
//! - [`pipeline`]: feature learning, bottom-up selection and retraining, MSF baselines, oracles.
//! - [`analysis`]: FLOPs, memory and pruned-filter-ratio accounting.
//! - [`data`]: MNIST IDX, CIFAR-10 binary and synthetic datasets.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the `parallel`
//! feature is enabled and falls back to plain iterators otherwise. Results are
//! bitwise identical either way: parallel work is collected in order and
//! reduced sequentially.

pub mod analysis;
pub mod binops;
pub mod data;
mod error;
pub mod graph;
pub mod models;
pub mod par;
pub mod pipeline;
pub mod subsidiary;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{BitTensor, Tensor};
