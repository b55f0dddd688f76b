//! Dense real tensors, bitpacked ±1 tensors and convolution window helpers.
//!
//! Layout is row-major throughout. Convolution weights are `[filters, channels, k, k]`
//! and activations `[batch, channels, height, width]`.

pub(crate) mod bits;
mod dense;
pub(crate) mod im2col;

pub use bits::{xnor_popcount_dot, BitRows, BitTensor};
pub use dense::Tensor;
pub use im2col::{col2im, conv2d_direct, im2col, ConvGeometry};

/// `Sign` with the `Sign(0) = +1` convention used by every binary path in the crate.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}
