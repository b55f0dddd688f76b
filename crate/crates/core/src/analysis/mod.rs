//! FLOPs, memory and pruned-filter-ratio accounting.
//!
//! Costs are computed on a flat [`CostSpec`]: one entry per weighted layer with
//! its resolved output size. Binary layers cost `ops / 64` (64 XNOR/popcount
//! lanes per word). Batch norm, pooling, activations and scaling
//! multiplications carry no operations.

mod report;
mod resnet18;

pub use report::{emit_report, flops_csv, flops_table};
pub use resnet18::resnet18_imagenet;

use crate::graph::{Network, Op, Precision};
use crate::pipeline::{physical_shrink, PruneReport};
use crate::subsidiary::MaskMode;
use crate::tensor::ConvGeometry;
use crate::{Error, Result};

/// Counting convention. The default counts one operation per
/// multiply-accumulate; `ops_per_mac = 2` counts multiply and add separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convention {
    pub ops_per_mac: f64,
    pub binary_divisor: f64,
}

impl Default for Convention {
    fn default() -> Self {
        Convention {
            ops_per_mac: 1.0,
            binary_divisor: 64.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostLayer {
    pub name: String,
    pub precision: Precision,
    pub in_channels: usize,
    pub out_channels: usize,
    /// 1 for linear layers.
    pub kernel: usize,
    pub out_height: usize,
    pub out_width: usize,
    pub bias: bool,
    /// Channels carrying batch norm running mean and variance.
    pub bn_channels: usize,
}

impl CostLayer {
    pub fn weights(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    pub fn macs(&self) -> usize {
        self.weights() * self.out_height * self.out_width
    }

    /// Trainable scalars (weights and bias).
    pub fn params(&self) -> usize {
        self.weights() + if self.bias { self.out_channels } else { 0 }
    }

    /// 1 bit per binary weight, 32 per full-precision weight or bias, 32 per
    /// scaling factor and per batch norm statistic.
    pub fn memory_bits(&self) -> usize {
        let stats = 2 * self.bn_channels * 32;
        let bias = if self.bias { self.out_channels * 32 } else { 0 };
        match self.precision {
            Precision::Full => self.weights() * 32 + bias + stats,
            Precision::Binary => self.weights() + self.out_channels * 32 + bias + stats,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub layers: Vec<CostLayer>,
}

impl CostSpec {
    /// The same shapes with every layer full precision.
    pub fn full_precision(&self) -> CostSpec {
        CostSpec {
            layers: self
                .layers
                .iter()
                .map(|l| CostLayer {
                    precision: Precision::Full,
                    ..l.clone()
                })
                .collect(),
        }
    }

    /// Resolves the layer shapes of `net` with pruned filters removed (masks in
    /// `Bin` mode). `Iden` and `Bypass` masks count as unpruned.
    pub fn from_network(net: &Network) -> Result<CostSpec> {
        let mut net = net.clone();
        for l in net.masked_layers() {
            let m = net.layers[l].mask.as_mut().unwrap();
            if m.mode() == MaskMode::Iden {
                m.set_mode(MaskMode::Bypass);
            }
        }
        let net = physical_shrink(&net)?;
        let mut shapes: Vec<[usize; 3]> = Vec::with_capacity(net.nodes.len());
        let mut layers = Vec::new();
        for node in &net.nodes {
            let x = node.inputs.first().map(|&i| shapes[i]);
            let shape = match node.op {
                Op::Input => net.input_shape,
                Op::Conv(l) => {
                    let [c, h, w] = x.unwrap();
                    let layer = &net.layers[l];
                    if layer.in_channels() != c {
                        return Err(Error::invalid(format!("layer {} expects {} channels, gets {c}", layer.name, layer.in_channels())));
                    }
                    let g = ConvGeometry::new(c, h, w, layer.kernel(), layer.stride, layer.pad)?;
                    let out = [layer.out_channels(), g.out_height(), g.out_width()];
                    layers.push(cost_layer(layer, c, out));
                    out
                }
                Op::Linear(l) => {
                    let [c, h, w] = x.unwrap();
                    let layer = &net.layers[l];
                    if layer.in_channels() != c * h * w {
                        return Err(Error::invalid(format!("layer {} expects {} inputs, gets {}", layer.name, layer.in_channels(), c * h * w)));
                    }
                    let out = [layer.out_channels(), 1, 1];
                    layers.push(cost_layer(layer, c * h * w, out));
                    out
                }
                Op::MaxPool(k) => {
                    let [c, h, w] = x.unwrap();
                    [c, h / k, w / k]
                }
                Op::GlobalAvgPool => [x.unwrap()[0], 1, 1],
                Op::Downsample { stride, channels } => {
                    let [_, h, w] = x.unwrap();
                    [channels, h.div_ceil(stride), w.div_ceil(stride)]
                }
                Op::BatchNorm(_) | Op::Sign | Op::Gate(_) | Op::Add => x.unwrap(),
            };
            shapes.push(shape);
        }
        Ok(CostSpec { layers })
    }
}

fn cost_layer(layer: &crate::graph::Layer, cin: usize, out: [usize; 3]) -> CostLayer {
    CostLayer {
        name: layer.name.clone(),
        precision: layer.precision,
        in_channels: if layer.is_conv() { cin } else { layer.in_channels() },
        out_channels: out[0],
        kernel: layer.kernel(),
        out_height: out[1],
        out_width: out[2],
        bias: layer.bias.is_some(),
        bn_channels: layer.bn.as_ref().map_or(0, |b| b.channels()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCost {
    pub name: String,
    pub precision: Precision,
    pub ops: f64,
    /// `ops` for full-precision layers, `ops / divisor` for binary ones.
    pub effective: f64,
    pub params: usize,
    pub memory_bits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlopsReport {
    pub convention: Convention,
    pub layers: Vec<LayerCost>,
    pub fp_ops: f64,
    pub binary_ops: f64,
    /// `fp_ops + binary_ops / divisor`.
    pub effective_flops: f64,
    /// Operations of the full-precision variant of the same shapes.
    pub reference_flops: f64,
    pub speedup: f64,
    pub memory_bits: usize,
    pub reference_memory_bits: usize,
    pub memory_saving: f64,
}

pub fn count_spec(spec: &CostSpec, conv: Convention) -> FlopsReport {
    let layers: Vec<LayerCost> = spec
        .layers
        .iter()
        .map(|l| {
            let ops = l.macs() as f64 * conv.ops_per_mac;
            LayerCost {
                name: l.name.clone(),
                precision: l.precision,
                ops,
                effective: match l.precision {
                    Precision::Full => ops,
                    Precision::Binary => ops / conv.binary_divisor,
                },
                params: l.params(),
                memory_bits: l.memory_bits(),
            }
        })
        .collect();
    let sum = |p: Precision| -> f64 { layers.iter().filter(|l| l.precision == p).map(|l| l.ops).sum() };
    let fp_ops = sum(Precision::Full);
    let binary_ops = sum(Precision::Binary);
    let effective_flops = fp_ops + binary_ops / conv.binary_divisor;
    let reference = spec.full_precision();
    let reference_flops = reference.layers.iter().map(|l| l.macs() as f64 * conv.ops_per_mac).sum::<f64>();
    let memory_bits = layers.iter().map(|l| l.memory_bits).sum();
    let reference_memory_bits = reference.layers.iter().map(CostLayer::memory_bits).sum();
    FlopsReport {
        convention: conv,
        layers,
        fp_ops,
        binary_ops,
        effective_flops,
        reference_flops,
        speedup: reference_flops / effective_flops,
        memory_bits,
        reference_memory_bits,
        memory_saving: reference_memory_bits as f64 / memory_bits as f64,
    }
}

/// FLOPs and memory of `net` with pruned filters excluded.
pub fn count_flops(net: &Network, conv: Convention) -> Result<FlopsReport> {
    Ok(count_spec(&CostSpec::from_network(net)?, conv))
}

pub fn count_memory_bits(net: &Network) -> Result<usize> {
    Ok(CostSpec::from_network(net)?.layers.iter().map(CostLayer::memory_bits).sum())
}

/// Global pruned-filter ratio of a report.
pub fn pfr(report: &PruneReport) -> f64 {
    report.global_pfr()
}

#[cfg(test)]
mod tests;
