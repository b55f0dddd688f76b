use crate::tensor::{sign, Tensor};
use crate::Result;

pub fn sign_forward(x: &Tensor) -> Tensor {
    x.map(sign)
}

/// Straight-through derivative of `Sign`: `1` when `|x| <= 1`, else `0`.
#[inline]
pub fn ste_mask(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        1.0
    } else {
        0.0
    }
}

/// `grad_out[k] * 1{|x[k]| <= 1}`.
pub fn ste_backward(grad_out: &Tensor, x: &Tensor) -> Result<Tensor> {
    grad_out.zip_map(x, |g, v| g * ste_mask(v))
}
