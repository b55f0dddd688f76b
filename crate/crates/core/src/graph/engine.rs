use std::collections::BTreeMap;

use super::{Network, Op, Precision};
use crate::binops::{
    batchnorm_backward, batchnorm_forward, binary_conv2d_backward, binary_conv2d_train_fixed,
    conv2d_backward, conv2d_forward, global_avg_pool, global_avg_pool_backward, linear_backward,
    linear_forward, maxpool2d, maxpool2d_backward, ste_backward, BatchNormCtx, BinaryConvCtx,
    BnMode, MaxPoolCtx,
};
use crate::tensor::{sign, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch norm of trainable layers uses batch statistics and updates running averages.
    Train,
    /// Every batch norm uses running statistics; nothing is mutated.
    Eval,
}

#[derive(Debug, Clone)]
enum Ctx {
    None,
    Binary(Box<BinaryConvCtx>),
    Bn(BatchNormCtx),
    Pool(MaxPoolCtx),
}

/// Forward values and saved contexts of one pass.
#[derive(Debug, Clone)]
pub struct Tape {
    values: Vec<Tensor>,
    ctx: Vec<Ctx>,
    requires_grad: Vec<bool>,
}

impl Tape {
    pub fn output(&self) -> &Tensor {
        self.values.last().expect("tape is never empty")
    }

    pub fn value(&self, node: usize) -> &Tensor {
        &self.values[node]
    }

    pub fn into_output(mut self) -> Tensor {
        self.values.pop().expect("tape is never empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Tensor,
    pub bias: Option<Vec<f64>>,
}

/// Gradients of trainable groups. Mask entries hold `dL/dO` per filter;
/// the mask's own straight-through factor is applied by the optimizer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    pub main: BTreeMap<usize, LayerGrad>,
    pub mask_o: BTreeMap<usize, Vec<f64>>,
}

impl Gradients {
    fn add_main(&mut self, l: usize, w: Tensor, b: Option<Vec<f64>>) {
        match self.main.get_mut(&l) {
            Some(g) => {
                g.weight.add_assign(&w).expect("same layer, same shape");
                if let (Some(acc), Some(b)) = (g.bias.as_mut(), b) {
                    acc.iter_mut().zip(b).for_each(|(a, v)| *a += v);
                }
            }
            None => {
                self.main.insert(l, LayerGrad { weight: w, bias: b });
            }
        }
    }

    pub fn add_mask(&mut self, l: usize, d: &[f64]) {
        let e = self.mask_o.entry(l).or_insert_with(|| vec![0.0; d.len()]);
        e.iter_mut().zip(d).for_each(|(a, v)| *a += v);
    }
}

fn channel_planes(x: &Tensor) -> (usize, usize) {
    let c = x.shape()[1];
    (c, x.len() / (x.dim0() * c))
}

/// Runs the network on a `[N, C, H, W]` batch.
pub fn forward(net: &mut Network, input: &Tensor, mode: Mode) -> Result<Tape> {
    let [c, h, w] = net.input_shape;
    if input.dim0() == 0 {
        return Err(Error::EmptyBatch);
    }
    input.expect_shape(&[input.dim0(), c, h, w])?;
    let n_nodes = net.nodes.len();
    let mut values: Vec<Tensor> = Vec::with_capacity(n_nodes);
    let mut ctx = Vec::with_capacity(n_nodes);
    let mut requires_grad = Vec::with_capacity(n_nodes);
    for id in 0..n_nodes {
        let node = &net.nodes[id];
        let inputs_rg = node.inputs.iter().any(|&i| requires_grad[i]);
        let x = node.inputs.first().map(|&i| &values[i]);
        let (out, c, rg) = match node.op {
            Op::Input => (input.clone(), Ctx::None, false),
            Op::Conv(l) => {
                let layer = &net.layers[l];
                let x = x.unwrap();
                let rg = inputs_rg || layer.trainable || layer.mask_trainable();
                match layer.precision {
                    Precision::Full => {
                        let out = conv2d_forward(
                            x,
                            &layer.weight,
                            layer.bias.as_deref(),
                            layer.stride,
                            layer.pad,
                        )?;
                        (out, Ctx::None, rg)
                    }
                    Precision::Binary => {
                        let gate = layer.weight_gate();
                        let (out, bctx) = binary_conv2d_train_fixed(
                            x,
                            &layer.weight,
                            gate.as_deref(),
                            layer.fixed_alpha.as_deref(),
                            layer.stride,
                            layer.pad,
                        )?;
                        (out, Ctx::Binary(Box::new(bctx)), rg)
                    }
                }
            }
            Op::Linear(l) => {
                let layer = &net.layers[l];
                let x = x.unwrap();
                let zero;
                let bias = match layer.bias.as_deref() {
                    Some(b) => b,
                    None => {
                        zero = vec![0.0; layer.out_channels()];
                        &zero
                    }
                };
                let flat = x.clone().reshape(vec![x.dim0(), x.inner_len()])?;
                let out = linear_forward(&flat, &layer.weight, bias)?;
                (out, Ctx::None, inputs_rg || layer.trainable)
            }
            Op::BatchNorm(l) => {
                let trainable = net.layers[l].trainable;
                let state = net.layers[l]
                    .bn
                    .as_mut()
                    .ok_or_else(|| Error::invalid(format!("layer {l} has no batch norm")))?;
                let bn_mode = if mode == Mode::Train && trainable {
                    BnMode::Train
                } else {
                    BnMode::Eval
                };
                let (out, bctx) = batchnorm_forward(x.unwrap(), state, bn_mode)?;
                (out, Ctx::Bn(bctx), inputs_rg)
            }
            Op::Sign => (x.unwrap().map(sign), Ctx::None, inputs_rg),
            Op::Gate(l) => {
                let layer = &net.layers[l];
                let x = x.unwrap();
                let rg = inputs_rg || layer.mask_trainable();
                match layer.gate() {
                    None => (x.clone(), Ctx::None, rg),
                    Some(o) => {
                        let mut out = x.clone();
                        let (c, s) = channel_planes(x);
                        for (i, chunk) in out.data_mut().chunks_mut(s).enumerate() {
                            let v = o[i % c];
                            chunk.iter_mut().for_each(|e| *e *= v);
                        }
                        (out, Ctx::None, rg)
                    }
                }
            }
            Op::MaxPool(k) => {
                let (out, pctx) = maxpool2d(x.unwrap(), k)?;
                (out, Ctx::Pool(pctx), inputs_rg)
            }
            Op::GlobalAvgPool => (global_avg_pool(x.unwrap())?, Ctx::None, inputs_rg),
            Op::Add => {
                let mut out = values[node.inputs[0]].clone();
                out.add_assign(&values[node.inputs[1]])?;
                (out, Ctx::None, inputs_rg)
            }
            Op::Downsample { stride, channels } => {
                (downsample(x.unwrap(), stride, channels)?, Ctx::None, inputs_rg)
            }
        };
        if !out.is_finite() {
            return Err(Error::invalid(format!("non-finite value produced at node {id}")));
        }
        values.push(out);
        ctx.push(c);
        requires_grad.push(rg);
    }
    Ok(Tape {
        values,
        ctx,
        requires_grad,
    })
}

fn downsample(x: &Tensor, stride: usize, channels: usize) -> Result<Tensor> {
    let (n, c, h, w) = match *x.shape() {
        [a, b, c, d] => (a, b, c, d),
        _ => return Err(Error::invalid("downsample expects [N, C, H, W]")),
    };
    if channels < c || stride == 0 {
        return Err(Error::invalid("downsample cannot drop channels"));
    }
    let (oh, ow) = (h.div_ceil(stride), w.div_ceil(stride));
    let mut out = Tensor::zeros(&[n, channels, oh, ow]);
    let o = out.data_mut();
    let d = x.data();
    for b in 0..n {
        for ch in 0..c {
            for y in 0..oh {
                for xx in 0..ow {
                    o[((b * channels + ch) * oh + y) * ow + xx] =
                        d[((b * c + ch) * h + y * stride) * w + xx * stride];
                }
            }
        }
    }
    Ok(out)
}

fn downsample_backward(g: &Tensor, in_shape: &[usize], stride: usize) -> Tensor {
    let (n, c, h, w) = (in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
    let (channels, oh, ow) = (g.shape()[1], g.shape()[2], g.shape()[3]);
    let mut dx = Tensor::zeros(in_shape);
    let d = dx.data_mut();
    let gd = g.data();
    for b in 0..n {
        for ch in 0..c {
            for y in 0..oh {
                for xx in 0..ow {
                    d[((b * c + ch) * h + y * stride) * w + xx * stride] +=
                        gd[((b * channels + ch) * oh + y) * ow + xx];
                }
            }
        }
    }
    dx
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => acc.add_assign(&g).expect("gradient shapes agree"),
        None => *slot = Some(g),
    }
}

/// Reverse pass from `dL/dlogits`. Only trainable groups receive gradients.
pub fn backward(net: &Network, tape: &Tape, grad_output: &Tensor) -> Result<Gradients> {
    let n_nodes = net.nodes.len();
    if tape.values.len() != n_nodes {
        return Err(Error::invalid("tape does not belong to this network"));
    }
    grad_output.expect_shape(tape.output().shape())?;
    let mut grads: Vec<Option<Tensor>> = vec![None; n_nodes];
    grads[n_nodes - 1] = Some(grad_output.clone());
    let mut out = Gradients::default();

    for id in (1..n_nodes).rev() {
        if !tape.requires_grad[id] {
            continue;
        }
        let Some(g) = grads[id].take() else { continue };
        let node = &net.nodes[id];
        let inp = node.inputs.first().copied();
        let need_input = |i: usize| tape.requires_grad[i];
        match node.op {
            Op::Input => {}
            Op::Conv(l) => {
                let layer = &net.layers[l];
                let i = inp.unwrap();
                match layer.precision {
                    Precision::Full => {
                        let cg = conv2d_backward(
                            &tape.values[i],
                            &layer.weight,
                            &g,
                            layer.stride,
                            layer.pad,
                            need_input(i),
                            layer.trainable,
                        )?;
                        if let Some(w) = cg.weight {
                            out.add_main(l, w, layer.bias.as_ref().map(|_| cg.bias));
                        }
                        if let Some(dx) = cg.input {
                            accumulate(&mut grads[i], dx);
                        }
                    }
                    Precision::Binary => {
                        let bctx = match &tape.ctx[id] {
                            Ctx::Binary(c) => Some(c.as_ref()),
                            _ => None,
                        };
                        if bctx.is_none() {
                            return Err(Error::MissingContext(id));
                        }
                        let gate = layer.weight_gate();
                        let bg = binary_conv2d_backward(
                            &g,
                            bctx,
                            &layer.weight,
                            gate.as_deref(),
                            need_input(i),
                            layer.trainable,
                        )?;
                        if let Some(w) = bg.latent {
                            out.add_main(l, w, None);
                        }
                        if layer.mask_trainable() {
                            if let Some(d) = bg.gate {
                                out.add_mask(l, &d);
                            }
                        }
                        if let Some(dx) = bg.input {
                            accumulate(&mut grads[i], dx);
                        }
                    }
                }
            }
            Op::Linear(l) => {
                let layer = &net.layers[l];
                let i = inp.unwrap();
                let x = &tape.values[i];
                let flat = x.clone().reshape(vec![x.dim0(), x.inner_len()])?;
                let (dx, dw, db) = linear_backward(&flat, &layer.weight, &g)?;
                if layer.trainable {
                    out.add_main(l, dw, layer.bias.as_ref().map(|_| db));
                }
                if need_input(i) {
                    accumulate(&mut grads[i], dx.reshape(x.shape().to_vec())?);
                }
            }
            Op::BatchNorm(_) => {
                let Ctx::Bn(bctx) = &tape.ctx[id] else {
                    return Err(Error::MissingContext(id));
                };
                let i = inp.unwrap();
                if need_input(i) {
                    accumulate(&mut grads[i], batchnorm_backward(&g, bctx)?);
                }
            }
            Op::Sign => {
                let i = inp.unwrap();
                if need_input(i) {
                    accumulate(&mut grads[i], ste_backward(&g, &tape.values[i])?);
                }
            }
            Op::Gate(l) => {
                let layer = &net.layers[l];
                let i = inp.unwrap();
                match layer.gate() {
                    None => {
                        if need_input(i) {
                            accumulate(&mut grads[i], g);
                        }
                    }
                    Some(o) => {
                        let x = &tape.values[i];
                        let (c, s) = channel_planes(x);
                        if layer.mask_trainable() {
                            let mut d = vec![0.0; c];
                            for (k, (gc, xc)) in g.data().chunks(s).zip(x.data().chunks(s)).enumerate() {
                                d[k % c] += gc.iter().zip(xc).map(|(a, b)| a * b).sum::<f64>();
                            }
                            out.add_mask(l, &d);
                        }
                        if need_input(i) {
                            let mut dx = g;
                            for (k, chunk) in dx.data_mut().chunks_mut(s).enumerate() {
                                let v = o[k % c];
                                chunk.iter_mut().for_each(|e| *e *= v);
                            }
                            accumulate(&mut grads[i], dx);
                        }
                    }
                }
            }
            Op::MaxPool(_) => {
                let Ctx::Pool(pctx) = &tape.ctx[id] else {
                    return Err(Error::MissingContext(id));
                };
                let i = inp.unwrap();
                accumulate(&mut grads[i], maxpool2d_backward(&g, pctx)?);
            }
            Op::GlobalAvgPool => {
                let i = inp.unwrap();
                accumulate(
                    &mut grads[i],
                    global_avg_pool_backward(&g, tape.values[i].shape())?,
                );
            }
            Op::Add => {
                let (a, b) = (node.inputs[0], node.inputs[1]);
                if need_input(b) {
                    accumulate(&mut grads[b], g.clone());
                }
                if need_input(a) {
                    accumulate(&mut grads[a], g);
                }
            }
            Op::Downsample { stride, .. } => {
                let i = inp.unwrap();
                let dx = downsample_backward(&g, tape.values[i].shape(), stride);
                accumulate(&mut grads[i], dx);
            }
        }
    }
    Ok(out)
}

/// Forward/backward driver that remembers the last tape.
#[derive(Debug, Default)]
pub struct Session {
    tape: Option<Tape>,
}

impl Session {
    pub fn new() -> Self {
        Session { tape: None }
    }

    pub fn forward(&mut self, net: &mut Network, input: &Tensor, mode: Mode) -> Result<&Tensor> {
        self.tape = Some(forward(net, input, mode)?);
        Ok(self.tape.as_ref().unwrap().output())
    }

    /// Consumes the stored tape; calling twice without a new forward is an error.
    pub fn backward(&mut self, net: &Network, grad_output: &Tensor) -> Result<Gradients> {
        let tape = self.tape.take().ok_or(Error::BackwardBeforeForward)?;
        backward(net, &tape, grad_output)
    }
}
