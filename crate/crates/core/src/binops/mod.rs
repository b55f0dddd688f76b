//! Forward and backward primitives for binary networks.
//!
//! Binary convolution has two routes: the bitpacked XNOR/popcount kernel used
//! for inference ([`binary_conv2d_forward`]) and a dense ±1 route used during
//! training ([`binary_conv2d_train`]). Both compute `alpha[n] * (x ⋆ sign(W_n))`
//! and agree exactly.

mod batchnorm;
mod conv;
mod gemm;
mod linear;
mod loss;
mod pool;
mod sign;

pub use batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormCtx, BatchNormState, BnMode};
pub(crate) use conv::gate_weights;
pub use conv::{
    binary_conv2d_backward, binary_conv2d_forward, binary_conv2d_train, binary_conv2d_train_fixed, conv2d_backward,
    conv2d_forward, BinaryConvCtx, BinaryConvGrads, ConvGrads, ScalingFactors,
};
pub use linear::{linear_backward, linear_forward};
pub use loss::{distill_loss, log_softmax_rows, softmax_cross_entropy, softmax_rows, LossOutput};
pub use pool::{
    global_avg_pool, global_avg_pool_backward, maxpool2d, maxpool2d_backward, MaxPoolCtx,
};
pub use sign::{sign_forward, ste_backward, ste_mask};

