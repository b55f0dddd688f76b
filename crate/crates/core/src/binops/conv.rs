use super::gemm::gemm;
use super::sign::ste_mask;
use crate::par;
use crate::tensor::im2col::dims4;
use crate::tensor::{col2im, im2col, sign, BitRows, BitTensor, ConvGeometry, Tensor};
use crate::{Error, Result};

/// Per-filter scaling factors `alpha[n] = mean(|W_n|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFactors {
    alpha: Vec<f64>,
}

impl ScalingFactors {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::invalid("scaling factors must be non-negative"));
        }
        Ok(ScalingFactors { alpha })
    }

    pub fn from_weights(w: &Tensor) -> Self {
        let l = w.inner_len() as f64;
        let alpha = (0..w.dim0())
            .map(|n| w.outer(n).iter().map(|v| v.abs()).sum::<f64>() / l)
            .collect();
        ScalingFactors { alpha }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Pulls `dL/dalpha` back onto the weights: `dL/dW_n[k] += dalpha[n] * sign(W_n[k]) / L`.
    pub fn backward_into(w: &Tensor, dalpha: &[f64], dw: &mut Tensor) {
        let l = w.inner_len();
        for n in 0..w.dim0() {
            let s = dalpha[n] / l as f64;
            for (d, &v) in dw.outer_mut(n).iter_mut().zip(w.outer(n)) {
                *d += s * sign(v);
            }
        }
    }
}

fn geometry_for(x: &Tensor, w: &Tensor, stride: usize, pad: usize) -> Result<ConvGeometry> {
    let (_, c, h, wd) = dims4(x)?;
    let (f, wc, k, k2) = dims4(w)?;
    if wc != c || k != k2 {
        return Err(Error::ShapeMismatch {
            expected: vec![f, c, k, k],
            got: w.shape().to_vec(),
        });
    }
    ConvGeometry::new(c, h, wd, k, stride, pad)
}

/// Dense convolution core: `out[n] = W · im2col(x[n])`, samples in parallel.
fn conv_core(x: &Tensor, w: &Tensor, g: &ConvGeometry) -> Tensor {
    let n = x.dim0();
    let f = w.dim0();
    let p = g.positions();
    let window = g.window();
    let per_sample = par::map_range(n, |b| {
        let cols = im2col(x.outer(b), g);
        let mut out = vec![0.0; f * p];
        gemm(f, window, p, w.data(), false, &cols, false, 0.0, &mut out);
        out
    });
    let data = per_sample.concat();
    Tensor::new(vec![n, f, g.out_height(), g.out_width()], data).expect("conv output shape")
}

/// Backward of [`conv_core`]. Weight gradients are reduced over samples in index order.
fn conv_core_backward(
    x: &Tensor,
    w: &Tensor,
    grad: &Tensor,
    g: &ConvGeometry,
    need_input: bool,
    need_weight: bool,
) -> (Option<Tensor>, Option<Tensor>) {
    let n = x.dim0();
    let f = w.dim0();
    let p = g.positions();
    let window = g.window();
    let per_sample = par::map_range(n, |b| {
        let gb = grad.outer(b);
        let cols = im2col(x.outer(b), g);
        let dw = need_weight.then(|| {
            let mut dw = vec![0.0; f * window];
            gemm(f, p, window, gb, false, &cols, true, 0.0, &mut dw);
            dw
        });
        let dx = need_input.then(|| {
            let mut dcols = vec![0.0; window * p];
            gemm(window, f, p, w.data(), true, gb, false, 0.0, &mut dcols);
            let mut dx = vec![0.0; g.input_len()];
            col2im(&dcols, g, &mut dx);
            dx
        });
        (dx, dw)
    });
    let mut dx_all = need_input.then(|| Vec::with_capacity(n * g.input_len()));
    let mut dw_all = need_weight.then(|| Tensor::zeros(w.shape()));
    for (dx, dw) in per_sample {
        if let (Some(all), Some(dx)) = (dx_all.as_mut(), dx) {
            all.extend(dx);
        }
        if let (Some(all), Some(dw)) = (dw_all.as_mut(), dw) {
            for (a, d) in all.data_mut().iter_mut().zip(dw) {
                *a += d;
            }
        }
    }
    let dx = dx_all.map(|d| Tensor::new(x.shape().to_vec(), d).expect("input grad shape"));
    (dx, dw_all)
}

/// Full-precision convolution with optional per-filter bias.
pub fn conv2d_forward(
    x: &Tensor,
    w: &Tensor,
    bias: Option<&[f64]>,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    if x.dim0() == 0 {
        return Err(Error::EmptyBatch);
    }
    let g = geometry_for(x, w, stride, pad)?;
    let mut out = conv_core(x, w, &g);
    if let Some(b) = bias {
        if b.len() != w.dim0() {
            return Err(Error::LengthMismatch {
                left: b.len(),
                right: w.dim0(),
            });
        }
        add_channel_bias(&mut out, b);
    }
    Ok(out)
}

fn add_channel_bias(out: &mut Tensor, b: &[f64]) {
    let f = b.len();
    let p = out.inner_len() / f;
    for (i, chunk) in out.data_mut().chunks_mut(p).enumerate() {
        let v = b[i % f];
        chunk.iter_mut().for_each(|o| *o += v);
    }
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Option<Tensor>,
    pub weight: Option<Tensor>,
    pub bias: Vec<f64>,
}

pub fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    pad: usize,
    need_input: bool,
    need_weight: bool,
) -> Result<ConvGrads> {
    let g = geometry_for(x, w, stride, pad)?;
    let f = w.dim0();
    grad_out.expect_shape(&[x.dim0(), f, g.out_height(), g.out_width()])?;
    let (input, weight) = conv_core_backward(x, w, grad_out, &g, need_input, need_weight);
    let p = g.positions();
    let mut bias = vec![0.0; f];
    for (i, chunk) in grad_out.data().chunks(p).enumerate() {
        bias[i % f] += chunk.iter().sum::<f64>();
    }
    Ok(ConvGrads {
        input,
        weight,
        bias,
    })
}

/// Bitpacked binary convolution: `out[b, n, y, x] = alpha[n] * Σ xnor-popcount(filter n, window)`.
///
/// Zero padding is realised by a per-window validity mask, so padded taps contribute
/// nothing, exactly as in a zero-padded dense ±1 convolution.
pub fn binary_conv2d_forward(
    input: &BitTensor,
    weights: &BitTensor,
    alpha: &ScalingFactors,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let (n, c, h, w) = match *input.shape() {
        [a, b, c, d] => (a, b, c, d),
        _ => return Err(Error::invalid("binary conv input must be [N, C, H, W]")),
    };
    let (f, wc, k) = match *weights.shape() {
        [f, wc, k, k2] if k == k2 => (f, wc, k),
        _ => return Err(Error::invalid("binary conv weights must be [F, C, K, K]")),
    };
    if wc != c {
        return Err(Error::ShapeMismatch {
            expected: vec![f, c, k, k],
            got: weights.shape().to_vec(),
        });
    }
    if alpha.len() != f {
        return Err(Error::LengthMismatch {
            left: alpha.len(),
            right: f,
        });
    }
    let g = ConvGeometry::new(c, h, w, k, stride, pad)?;
    let window = g.window();
    let (oh, ow) = (g.out_height(), g.out_width());
    let p = oh * ow;

    // Bits are regrouped tap-major: each (ky, kx) tap owns `cw` words holding the
    // C channel bits, so a window is K*K word copies of per-pixel channel words.
    let cw = c.div_ceil(64);
    let row_bits = k * k * cw * 64;
    let mut channel_mask = vec![0u64; cw];
    for ch in 0..c {
        channel_mask[ch / 64] |= 1 << (ch % 64);
    }
    let mut filters = BitRows::zeros(f, row_bits);
    for fi in 0..f {
        for ch in 0..c {
            for t in 0..k * k {
                if weights.bit(fi * window + ch * k * k + t) {
                    filters.set(fi, t * cw * 64 + ch);
                }
            }
        }
    }
    // Pixel index of every (position, tap), None for padding.
    let mut taps: Vec<Option<usize>> = Vec::with_capacity(p * k * k);
    let mut valid = BitRows::zeros(p, row_bits);
    for oy in 0..oh {
        for ox in 0..ow {
            for t in 0..k * k {
                let src = g.source(t, oy, ox);
                if src.is_some() {
                    let row = valid.row_mut(oy * ow + ox);
                    row[t * cw..(t + 1) * cw].copy_from_slice(&channel_mask);
                }
                taps.push(src);
            }
        }
    }

    let counts: Vec<u32> = (0..p).map(|q| valid.row(q).iter().map(|v| v.count_ones()).sum()).collect();
    let sample_len = g.input_len();
    let plane = h * w;
    let per_sample = par::map_range(n, |b| {
        let base = b * sample_len;
        let mut pixels = vec![0u64; plane * cw];
        for ch in 0..c {
            for px in 0..plane {
                if input.bit(base + ch * plane + px) {
                    pixels[px * cw + ch / 64] |= 1 << (ch % 64);
                }
            }
        }
        let mut windows = BitRows::zeros(p, row_bits);
        for q in 0..p {
            let row = windows.row_mut(q);
            for (t, src) in taps[q * k * k..(q + 1) * k * k].iter().enumerate() {
                if let Some(px) = *src {
                    row[t * cw..(t + 1) * cw].copy_from_slice(&pixels[px * cw..(px + 1) * cw]);
                }
            }
        }
        let mut out = vec![0.0; f * p];
        for fi in 0..f {
            let a = alpha.as_slice()[fi];
            let frow = filters.row(fi);
            for q in 0..p {
                let agree = crate::tensor::bits::masked_agree(frow, windows.row(q), valid.row(q));
                let dot = 2 * agree as i64 - counts[q] as i64;
                out[fi * p + q] = a * dot as f64;
            }
        }
        out
    });
    Tensor::new(vec![n, f, oh, ow], per_sample.concat())
}

/// Saved forward state of a dense-route binary convolution.
#[derive(Debug, Clone)]
pub struct BinaryConvCtx {
    input: Tensor,
    masked: Tensor,
    signs: Tensor,
    alpha: ScalingFactors,
    alpha_fixed: bool,
    raw: Tensor,
    geom: ConvGeometry,
}

impl BinaryConvCtx {
    pub fn alpha(&self) -> &ScalingFactors {
        &self.alpha
    }

    pub fn binary_weights(&self) -> &Tensor {
        &self.signs
    }
}

/// Applies a per-filter gate: `Ŵ_n = O_n · W_n`.
pub(crate) fn gate_weights(latent: &Tensor, gate: Option<&[f64]>) -> Result<Tensor> {
    let Some(o) = gate else {
        return Ok(latent.clone());
    };
    if o.len() != latent.dim0() {
        return Err(Error::LengthMismatch {
            left: o.len(),
            right: latent.dim0(),
        });
    }
    let mut w = latent.clone();
    for (n, &on) in o.iter().enumerate() {
        w.outer_mut(n).iter_mut().for_each(|v| *v *= on);
    }
    Ok(w)
}

/// Dense ±1 route of binary convolution used in training.
///
/// Latent weights are gated per filter (`Ŵ = O ⊗ W`), binarized to `sign(Ŵ)` and
/// scaled by `alpha = mean|Ŵ_n|`. The input is used as given, so callers pass
/// sign activations (or zeros for gated-off channels).
pub fn binary_conv2d_train(
    x: &Tensor,
    latent: &Tensor,
    gate: Option<&[f64]>,
    stride: usize,
    pad: usize,
) -> Result<(Tensor, BinaryConvCtx)> {
    binary_conv2d_train_fixed(x, latent, gate, None, stride, pad)
}

/// As [`binary_conv2d_train`], optionally with stored scaling factors in place of
/// `mean|Ŵ_n|`. Stored factors are constants: no gradient flows through them.
pub fn binary_conv2d_train_fixed(
    x: &Tensor,
    latent: &Tensor,
    gate: Option<&[f64]>,
    fixed_alpha: Option<&[f64]>,
    stride: usize,
    pad: usize,
) -> Result<(Tensor, BinaryConvCtx)> {
    if x.dim0() == 0 {
        return Err(Error::EmptyBatch);
    }
    let geom = geometry_for(x, latent, stride, pad)?;
    let masked = gate_weights(latent, gate)?;
    let alpha = match fixed_alpha {
        Some(a) if a.len() != latent.dim0() => {
            return Err(Error::LengthMismatch {
                left: a.len(),
                right: latent.dim0(),
            })
        }
        Some(a) => ScalingFactors::new(a.to_vec())?,
        None => ScalingFactors::from_weights(&masked),
    };
    let signs = masked.map(sign);
    let raw = conv_core(x, &signs, &geom);
    let mut out = raw.clone();
    let p = geom.positions();
    let f = latent.dim0();
    for (i, chunk) in out.data_mut().chunks_mut(p).enumerate() {
        let a = alpha.as_slice()[i % f];
        chunk.iter_mut().for_each(|v| *v *= a);
    }
    let ctx = BinaryConvCtx {
        input: x.clone(),
        masked,
        signs,
        alpha,
        alpha_fixed: fixed_alpha.is_some(),
        raw,
        geom,
    };
    Ok((out, ctx))
}

#[derive(Debug, Clone)]
pub struct BinaryConvGrads {
    pub input: Option<Tensor>,
    /// Gradient with respect to the latent (ungated) weights.
    pub latent: Option<Tensor>,
    /// `dL/dO_n`, summed over the filter's broadcast positions.
    pub gate: Option<Vec<f64>>,
}

/// Backward of [`binary_conv2d_train`].
///
/// The weight path applies the straight-through estimator at weight binarization
/// (`1{|Ŵ| <= 1}`) and differentiates `alpha` through `mean|Ŵ_n|`.
pub fn binary_conv2d_backward(
    grad_out: &Tensor,
    ctx: Option<&BinaryConvCtx>,
    latent: &Tensor,
    gate: Option<&[f64]>,
    need_input: bool,
    need_weight: bool,
) -> Result<BinaryConvGrads> {
    let ctx = ctx.ok_or(Error::MissingContext(0))?;
    grad_out.expect_shape(ctx.raw.shape())?;
    let f = latent.dim0();
    let p = ctx.geom.positions();
    let alpha = ctx.alpha.as_slice();

    let mut dalpha = vec![0.0; f];
    let mut draw = grad_out.clone();
    for (i, (gchunk, rchunk)) in draw
        .data_mut()
        .chunks_mut(p)
        .zip(ctx.raw.data().chunks(p))
        .enumerate()
    {
        let n = i % f;
        dalpha[n] += gchunk.iter().zip(rchunk).map(|(g, r)| g * r).sum::<f64>();
        gchunk.iter_mut().for_each(|g| *g *= alpha[n]);
    }

    let want_weights = need_weight || gate.is_some();
    let (input, dsigns) =
        conv_core_backward(&ctx.input, &ctx.signs, &draw, &ctx.geom, need_input, want_weights);

    let (latent_grad, gate_grad) = match dsigns {
        None => (None, None),
        Some(dsigns) => {
            let mut dmasked = dsigns.zip_map(&ctx.masked, |d, w| d * ste_mask(w))?;
            if !ctx.alpha_fixed {
                ScalingFactors::backward_into(&ctx.masked, &dalpha, &mut dmasked);
            }
            let gate_grad = gate.map(|_| {
                (0..f)
                    .map(|n| {
                        dmasked
                            .outer(n)
                            .iter()
                            .zip(latent.outer(n))
                            .map(|(d, w)| d * w)
                            .sum()
                    })
                    .collect::<Vec<f64>>()
            });
            let latent_grad = need_weight.then(|| {
                let mut d = dmasked;
                if let Some(o) = gate {
                    for (n, &on) in o.iter().enumerate() {
                        d.outer_mut(n).iter_mut().for_each(|v| *v *= on);
                    }
                }
                d
            });
            (latent_grad, gate_grad)
        }
    };
    Ok(BinaryConvGrads {
        input,
        latent: latent_grad,
        gate: gate_grad,
    })
}
