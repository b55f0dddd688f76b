use crate::tensor::im2col::dims4;
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct MaxPoolCtx {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

/// Non-overlapping `k×k` max pooling. Trailing rows/columns that do not fill a window are dropped.
/// Ties go to the first element in row-major window order.
pub fn maxpool2d(x: &Tensor, k: usize) -> Result<(Tensor, MaxPoolCtx)> {
    let (n, c, h, w) = dims4(x)?;
    if k == 0 || k > h || k > w {
        return Err(Error::invalid(format!("pool size {k} does not fit {h}x{w}")));
    }
    let (oh, ow) = (h / k, w / k);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    let data = x.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * k * w + ox * k;
                for dy in 0..k {
                    for dx in 0..k {
                        let idx = base + (oy * k + dy) * w + ox * k + dx;
                        if data[idx] > data[best] {
                            best = idx;
                        }
                    }
                }
                out.push(data[best]);
                argmax.push(best);
            }
        }
    }
    let ctx = MaxPoolCtx {
        input_shape: x.shape().to_vec(),
        argmax,
    };
    Ok((Tensor::new(vec![n, c, oh, ow], out)?, ctx))
}

pub fn maxpool2d_backward(grad_out: &Tensor, ctx: &MaxPoolCtx) -> Result<Tensor> {
    if grad_out.len() != ctx.argmax.len() {
        return Err(Error::LengthMismatch {
            left: grad_out.len(),
            right: ctx.argmax.len(),
        });
    }
    let mut dx = Tensor::zeros(&ctx.input_shape);
    let d = dx.data_mut();
    for (&g, &i) in grad_out.data().iter().zip(&ctx.argmax) {
        d[i] += g;
    }
    Ok(dx)
}

/// `[N, C, H, W] -> [N, C]` spatial mean.
pub fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = dims4(x)?;
    let s = (h * w) as f64;
    let data = x.data().chunks(h * w).map(|p| p.iter().sum::<f64>() / s).collect();
    Tensor::new(vec![n, c], data)
}

pub fn global_avg_pool_backward(grad_out: &Tensor, input_shape: &[usize]) -> Result<Tensor> {
    let s: usize = input_shape[2..].iter().product();
    let mut data = Vec::with_capacity(grad_out.len() * s);
    for &g in grad_out.data() {
        data.extend(std::iter::repeat_n(g / s as f64, s));
    }
    Tensor::new(input_shape.to_vec(), data)
}
