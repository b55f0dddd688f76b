use crate::tensor::Tensor;
use crate::{Error, Result};

/// Running statistics of an affine-free batch norm. There are no learnable
/// scale or shift parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNormState {
    pub fn new(channels: usize) -> Self {
        BatchNormState {
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }

    /// Trainable parameter count, which is always zero.
    pub fn trainable_params(&self) -> usize {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Normalise with batch statistics and update the running averages.
    Train,
    /// Normalise with the running statistics.
    Eval,
}

#[derive(Debug, Clone)]
pub struct BatchNormCtx {
    normalized: Tensor,
    inv_std: Vec<f64>,
    mode: BnMode,
}

fn channel_layout(x: &Tensor) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [n, c, h, w] => Ok((n, c, h * w)),
        [n, c] => Ok((n, c, 1)),
        _ => Err(Error::invalid("batch norm expects [N, C, H, W] or [N, C]")),
    }
}

/// `y = (x - mean) / sqrt(var + eps)` per channel. Variance is the biased batch
/// variance; running averages use `r <- (1 - m) r + m * batch`.
pub fn batchnorm_forward(
    x: &Tensor,
    state: &mut BatchNormState,
    mode: BnMode,
) -> Result<(Tensor, BatchNormCtx)> {
    let (n, c, s) = channel_layout(x)?;
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if c != state.channels() {
        return Err(Error::LengthMismatch {
            left: c,
            right: state.channels(),
        });
    }
    let (mean, var) = match mode {
        BnMode::Eval => (state.running_mean.clone(), state.running_var.clone()),
        BnMode::Train => {
            let count = (n * s) as f64;
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for (i, chunk) in x.data().chunks(s).enumerate() {
                mean[i % c] += chunk.iter().sum::<f64>();
            }
            mean.iter_mut().for_each(|m| *m /= count);
            for (i, chunk) in x.data().chunks(s).enumerate() {
                let m = mean[i % c];
                var[i % c] += chunk.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
            }
            var.iter_mut().for_each(|v| *v /= count);
            let mo = state.momentum;
            for ch in 0..c {
                state.running_mean[ch] = (1.0 - mo) * state.running_mean[ch] + mo * mean[ch];
                state.running_var[ch] = (1.0 - mo) * state.running_var[ch] + mo * var[ch];
            }
            (mean, var)
        }
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + state.eps).sqrt()).collect();
    let mut y = x.clone();
    for (i, chunk) in y.data_mut().chunks_mut(s).enumerate() {
        let ch = i % c;
        chunk
            .iter_mut()
            .for_each(|v| *v = (*v - mean[ch]) * inv_std[ch]);
    }
    let ctx = BatchNormCtx {
        normalized: y.clone(),
        inv_std,
        mode,
    };
    Ok((y, ctx))
}

pub fn batchnorm_backward(grad_out: &Tensor, ctx: &BatchNormCtx) -> Result<Tensor> {
    grad_out.expect_shape(ctx.normalized.shape())?;
    let (n, c, s) = channel_layout(grad_out)?;
    let mut dx = grad_out.clone();
    match ctx.mode {
        BnMode::Eval => {
            for (i, chunk) in dx.data_mut().chunks_mut(s).enumerate() {
                let k = ctx.inv_std[i % c];
                chunk.iter_mut().for_each(|g| *g *= k);
            }
        }
        BnMode::Train => {
            let count = (n * s) as f64;
            let mut g_mean = vec![0.0; c];
            let mut gx_mean = vec![0.0; c];
            for (i, (g, xh)) in grad_out
                .data()
                .chunks(s)
                .zip(ctx.normalized.data().chunks(s))
                .enumerate()
            {
                g_mean[i % c] += g.iter().sum::<f64>();
                gx_mean[i % c] += g.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>();
            }
            for ch in 0..c {
                g_mean[ch] /= count;
                gx_mean[ch] /= count;
            }
            for (i, (d, xh)) in dx
                .data_mut()
                .chunks_mut(s)
                .zip(ctx.normalized.data().chunks(s))
                .enumerate()
            {
                let ch = i % c;
                for (dv, &xv) in d.iter_mut().zip(xh) {
                    *dv = ctx.inv_std[ch] * (*dv - g_mean[ch] - xv * gx_mean[ch]);
                }
            }
        }
    }
    Ok(dx)
}
