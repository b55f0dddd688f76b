//! Static computation graph with layer-level reverse-mode differentiation.
//!
//! A [`Network`] is a list of [`Layer`]s (parameter holders) and a list of
//! [`Node`]s in topological order. Each node reads the outputs of earlier
//! nodes. Parameter groups are the main weights of each layer and each
//! layer's filter mask; either can be frozen independently. Batch norm
//! statistics belong to the main group of their layer and are only updated
//! while that group is trainable.

mod engine;
mod optim;

pub use engine::{backward, forward, Gradients, LayerGrad, Mode, Session, Tape};
pub use optim::{LrSchedule, Optimizer, Rule};

use crate::binops::BatchNormState;
use crate::subsidiary::{FilterMask, MaskMode};
use crate::tensor::Tensor;
use crate::{Error, Result};

pub type NodeId = usize;
pub type LayerId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Full,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamGroup {
    Main(LayerId),
    Mask(LayerId),
}

/// A parameterised layer: convolution (`[F, C, K, K]`) or linear (`[out, in]`) weights,
/// an optional bias, an optional batch norm and an optional filter mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub precision: Precision,
    pub weight: Tensor,
    pub bias: Option<Vec<f64>>,
    /// Stored per-filter scaling factors replacing `mean|Ŵ_n|` (binary layers only).
    pub fixed_alpha: Option<Vec<f64>>,
    pub stride: usize,
    pub pad: usize,
    pub bn: Option<BatchNormState>,
    pub mask: Option<FilterMask>,
    pub trainable: bool,
}

impl Layer {
    /// Trainable layer with stride 1, no padding, and no bias, batch norm or mask.
    pub fn new(name: impl Into<String>, precision: Precision, weight: Tensor) -> Self {
        Layer {
            name: name.into(),
            precision,
            weight,
            bias: None,
            fixed_alpha: None,
            stride: 1,
            pad: 0,
            bn: None,
            mask: None,
            trainable: true,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim0()
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        if self.weight.ndim() == 4 {
            self.weight.shape()[2]
        } else {
            1
        }
    }

    pub fn is_conv(&self) -> bool {
        self.weight.ndim() == 4
    }

    /// Mask output `O` when a mask is attached and not bypassed.
    pub fn gate(&self) -> Option<Vec<f64>> {
        self.mask
            .as_ref()
            .filter(|m| m.mode() != MaskMode::Bypass)
            .map(|m| m.transform())
    }

    /// Gate applied to the binary weights (`Ŵ = O ⊗ W`): only in `Iden` mode.
    ///
    /// In `Bin` mode `O ∈ {0, 1}`, so gating the weights and gating the block
    /// output give the same forward values; the output [`Op::Gate`] alone is used
    /// and `dL/dO_n` is the chain rule of `y_n = O_n · s_n`.
    pub fn weight_gate(&self) -> Option<Vec<f64>> {
        self.mask
            .as_ref()
            .filter(|m| m.mode() == MaskMode::Iden)
            .map(|m| m.transform())
    }

    pub fn mask_trainable(&self) -> bool {
        self.mask
            .as_ref()
            .is_some_and(|m| m.trainable() && m.mode() != MaskMode::Bypass)
    }

    /// Trainable scalar count of the main group (weights and bias).
    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.as_ref().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Input,
    /// Convolution; binary layers binarize gated weights and scale by `mean|Ŵ_n|`.
    Conv(LayerId),
    Linear(LayerId),
    BatchNorm(LayerId),
    /// `Sign` forward, straight-through backward.
    Sign,
    /// Multiplies output channel `n` by the mask output `O_n` of the layer.
    Gate(LayerId),
    MaxPool(usize),
    GlobalAvgPool,
    Add,
    /// Parameter-free shortcut: spatial subsampling by `stride`, channels zero-padded to `channels`.
    Downsample { stride: usize, channels: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub op: Op,
    pub inputs: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub nodes: Vec<Node>,
    /// `[C, H, W]` of one sample.
    pub input_shape: [usize; 3],
    pub classes: usize,
}

impl Network {
    pub fn new(input_shape: [usize; 3], classes: usize) -> Self {
        Network {
            layers: Vec::new(),
            nodes: vec![Node {
                op: Op::Input,
                inputs: vec![],
            }],
            input_shape,
            classes,
        }
    }

    pub fn add_layer(&mut self, layer: Layer) -> LayerId {
        self.layers.push(layer);
        self.layers.len() - 1
    }

    /// Appends a node; inputs must refer to earlier nodes.
    pub fn push(&mut self, op: Op, inputs: &[NodeId]) -> Result<NodeId> {
        let id = self.nodes.len();
        if inputs.iter().any(|&i| i >= id) {
            return Err(Error::invalid("node inputs must precede the node"));
        }
        let arity = match op {
            Op::Input => 0,
            Op::Add => 2,
            _ => 1,
        };
        if inputs.len() != arity {
            return Err(Error::invalid(format!(
                "{op:?} takes {arity} inputs, got {}",
                inputs.len()
            )));
        }
        match op {
            Op::Conv(l) | Op::Linear(l) | Op::BatchNorm(l) | Op::Gate(l) if l >= self.layers.len() => {
                return Err(Error::invalid(format!("unknown layer {l}")));
            }
            _ => {}
        }
        self.nodes.push(Node {
            op,
            inputs: inputs.to_vec(),
        });
        Ok(id)
    }

    pub fn output(&self) -> NodeId {
        self.nodes.len() - 1
    }

    pub fn binary_layers(&self) -> Vec<LayerId> {
        (0..self.layers.len())
            .filter(|&l| self.layers[l].precision == Precision::Binary)
            .collect()
    }

    /// Layers carrying a filter mask, in network order (bottom-up).
    pub fn masked_layers(&self) -> Vec<LayerId> {
        (0..self.layers.len())
            .filter(|&l| self.layers[l].mask.is_some())
            .collect()
    }

    pub fn set_all_trainable(&mut self, trainable: bool) {
        for l in &mut self.layers {
            l.trainable = trainable;
        }
    }

    pub fn set_all_masks(&mut self, mode: Option<MaskMode>, trainable: bool) {
        for l in &mut self.layers {
            if let Some(m) = l.mask.as_mut() {
                if let Some(mode) = mode {
                    m.set_mode(mode);
                }
                m.set_trainable(trainable);
            }
        }
    }

    pub fn is_trainable(&self, g: ParamGroup) -> bool {
        match g {
            ParamGroup::Main(l) => self.layers[l].trainable,
            ParamGroup::Mask(l) => self.layers[l].mask_trainable(),
        }
    }
}
