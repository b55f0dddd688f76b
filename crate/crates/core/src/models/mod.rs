//! Mini model zoo and checkpoint persistence.
//!
//! Every model has exactly two full-precision layers: the first convolution
//! and the classifier. Every intermediate convolution is binary and is
//! followed by affine-free batch norm and `Sign`.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, RngState, FORMAT_VERSION};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binops::BatchNormState;
use crate::graph::{Layer, Network, NodeId, Op, Precision};
use crate::subsidiary::{FilterMask, MaskInitConfig};
use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    NinMini,
    VggMini,
    ResnetMini,
}

impl Arch {
    pub fn id(self) -> &'static str {
        match self {
            Arch::NinMini => "nin-mini",
            Arch::VggMini => "vgg-mini",
            Arch::ResnetMini => "resnet-mini",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Arch::NinMini => 0,
            Arch::VggMini => 1,
            Arch::ResnetMini => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        [Arch::NinMini, Arch::VggMini, Arch::ResnetMini]
            .into_iter()
            .find(|a| a.code() == c)
    }

    /// Default stage widths: a quarter of the full-size networks.
    pub fn default_widths(self) -> Vec<usize> {
        match self {
            Arch::NinMini => vec![48, 48, 48],
            Arch::VggMini => vec![16, 32, 64, 128, 128],
            Arch::ResnetMini => vec![16, 32, 64],
        }
    }

    fn width_count(self) -> usize {
        self.default_widths().len()
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nin-mini" => Ok(Arch::NinMini),
            "vgg-mini" => Ok(Arch::VggMini),
            "resnet-mini" => Ok(Arch::ResnetMini),
            other => Err(Error::UnknownArchitecture(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub arch: Arch,
    pub widths: Vec<usize>,
    /// `[C, H, W]`.
    pub input_shape: [usize; 3],
    pub classes: usize,
}

impl ModelSpec {
    pub fn new(arch: Arch, widths: Vec<usize>, input_shape: [usize; 3], classes: usize) -> Self {
        ModelSpec {
            arch,
            widths,
            input_shape,
            classes,
        }
    }

    /// Mini widths on CIFAR-shaped input.
    pub fn mini(arch: Arch) -> Self {
        ModelSpec::new(arch, arch.default_widths(), [3, 32, 32], 10)
    }

    /// Full-size widths (four times the mini defaults).
    pub fn full_size(arch: Arch) -> Self {
        let widths = arch.default_widths().iter().map(|w| w * 4).collect();
        ModelSpec::new(arch, widths, [3, 32, 32], 10)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() != self.arch.width_count() {
            return Err(Error::invalid(format!(
                "{} takes {} widths, got {}",
                self.arch.id(),
                self.arch.width_count(),
                self.widths.len()
            )));
        }
        if self.widths.contains(&0) || self.input_shape.contains(&0) {
            return Err(Error::invalid("widths and input dims must be positive"));
        }
        if self.classes < 2 {
            return Err(Error::invalid("class count must be at least 2"));
        }
        Ok(())
    }
}

struct Builder {
    net: Network,
    rng: ChaCha8Rng,
    mask_cfg: MaskInitConfig,
}

impl Builder {
    fn weights(&mut self, shape: &[usize], binary: bool) -> Tensor {
        let fan_in: usize = shape[1..].iter().product();
        let mut bound = (6.0 / fan_in as f64).sqrt();
        if binary {
            bound = bound.min(1.0);
        }
        Tensor::from_fn(shape, |_| self.rng.gen_range(-bound..bound))
    }

    fn conv(&mut self, name: &str, precision: Precision, cin: usize, cout: usize, k: usize, stride: usize, mask: bool) -> Result<usize> {
        let binary = precision == Precision::Binary;
        let weight = self.weights(&[cout, cin, k, k], binary);
        let mask = if mask {
            Some(FilterMask::init(cout, &self.mask_cfg, &mut self.rng)?)
        } else {
            None
        };
        Ok(self.net.add_layer(Layer {
            name: name.to_string(),
            precision,
            weight,
            bias: None,
            fixed_alpha: None,
            stride,
            pad: k / 2,
            bn: Some(BatchNormState::new(cout)),
            mask,
            trainable: true,
        }))
    }

    /// conv → batch norm, returning the pre-activation node.
    fn conv_bn(&mut self, l: usize, x: NodeId) -> Result<NodeId> {
        let x = self.net.push(Op::Conv(l), &[x])?;
        self.net.push(Op::BatchNorm(l), &[x])
    }

    /// conv → batch norm → sign → mask gate.
    fn binary_block(&mut self, l: usize, x: NodeId) -> Result<NodeId> {
        let x = self.conv_bn(l, x)?;
        let x = self.net.push(Op::Sign, &[x])?;
        self.net.push(Op::Gate(l), &[x])
    }
}

/// Builds a network from its spec. Weights use a uniform fan-in initialisation
/// from `seed`; every prunable binary layer gets a mask in `Bypass` mode.
pub fn build(spec: &ModelSpec, seed: u64) -> Result<Network> {
    build_with_masks(spec, seed, &MaskInitConfig::default())
}

pub fn build_with_masks(spec: &ModelSpec, seed: u64, mask_cfg: &MaskInitConfig) -> Result<Network> {
    spec.validate()?;
    let mut b = Builder {
        net: Network::new(spec.input_shape, spec.classes),
        rng: ChaCha8Rng::seed_from_u64(seed),
        mask_cfg: *mask_cfg,
    };
    let cin = spec.input_shape[0];
    let w = &spec.widths;
    let bin = Precision::Binary;
    match spec.arch {
        Arch::NinMini => {
            let l0 = b.conv("conv0", Precision::Full, cin, w[0], 5, 1, false)?;
            let mut x = b.conv_bn(l0, 0)?;
            x = b.net.push(Op::Sign, &[x])?;
            let plan = [
                (w[0], w[0], 1, false),
                (w[0], w[0], 1, true),
                (w[0], w[1], 5, false),
                (w[1], w[1], 1, false),
                (w[1], w[1], 1, true),
                (w[1], w[2], 3, false),
                (w[2], w[2], 1, false),
            ];
            for (i, &(ci, co, k, pool)) in plan.iter().enumerate() {
                let l = b.conv(&format!("bin{}", i + 1), bin, ci, co, k, 1, true)?;
                x = b.binary_block(l, x)?;
                if pool {
                    x = b.net.push(Op::MaxPool(2), &[x])?;
                }
            }
            let head = b.conv("head", Precision::Full, w[2], spec.classes, 1, 1, false)?;
            b.net.layers[head].bn = None;
            b.net.layers[head].bias = Some(vec![0.0; spec.classes]);
            x = b.net.push(Op::Conv(head), &[x])?;
            b.net.push(Op::GlobalAvgPool, &[x])?;
        }
        Arch::VggMini => {
            let l0 = b.conv("conv0", Precision::Full, cin, w[0], 3, 1, false)?;
            let mut x = b.conv_bn(l0, 0)?;
            x = b.net.push(Op::Sign, &[x])?;
            x = b.net.push(Op::MaxPool(2), &[x])?;
            let plan = [
                (w[0], w[1], true),
                (w[1], w[2], false),
                (w[2], w[2], true),
                (w[2], w[3], false),
                (w[3], w[3], true),
                (w[3], w[4], false),
                (w[4], w[4], false),
            ];
            for (i, &(ci, co, pool)) in plan.iter().enumerate() {
                let l = b.conv(&format!("bin{}", i + 1), bin, ci, co, 3, 1, true)?;
                x = b.binary_block(l, x)?;
                if pool {
                    x = b.net.push(Op::MaxPool(2), &[x])?;
                }
            }
            x = b.net.push(Op::GlobalAvgPool, &[x])?;
            let fc = b.linear("fc", w[4], spec.classes);
            b.net.push(Op::Linear(fc), &[x])?;
        }
        Arch::ResnetMini => {
            let l0 = b.conv("conv0", Precision::Full, cin, w[0], 3, 1, false)?;
            let mut r = b.conv_bn(l0, 0)?;
            let mut cur = w[0];
            for (s, &width) in w.iter().enumerate() {
                let stride = if s == 0 { 1 } else { 2 };
                let a = b.net.push(Op::Sign, &[r])?;
                let c1 = b.conv(&format!("block{}a", s + 1), bin, cur, width, 3, stride, true)?;
                let h = b.binary_block(c1, a)?;
                let c2 = b.conv(&format!("block{}b", s + 1), bin, width, width, 3, 1, false)?;
                let y = b.conv_bn(c2, h)?;
                let shortcut = if stride == 1 && width == cur {
                    r
                } else {
                    b.net.push(Op::Downsample { stride, channels: width }, &[r])?
                };
                r = b.net.push(Op::Add, &[y, shortcut])?;
                cur = width;
            }
            let a = b.net.push(Op::Sign, &[r])?;
            let x = b.net.push(Op::GlobalAvgPool, &[a])?;
            let fc = b.linear("fc", cur, spec.classes);
            b.net.push(Op::Linear(fc), &[x])?;
        }
    }
    Ok(b.net)
}

impl Builder {
    fn linear(&mut self, name: &str, fin: usize, fout: usize) -> usize {
        let weight = self.weights(&[fout, fin], false);
        self.net.add_layer(Layer {
            name: name.to_string(),
            precision: Precision::Full,
            weight,
            bias: Some(vec![0.0; fout]),
            fixed_alpha: None,
            stride: 1,
            pad: 0,
            bn: None,
            mask: None,
            trainable: true,
        })
    }
}

/// Minimal test network: full-precision 3×3 stem of width `stem`, one masked
/// binary 3×3 block per entry of `binary`, global average pooling and a linear head.
pub fn build_tiny(
    input_shape: [usize; 3],
    stem: usize,
    binary: &[usize],
    classes: usize,
    seed: u64,
    mask_cfg: &MaskInitConfig,
) -> Result<Network> {
    if stem == 0 || binary.contains(&0) || input_shape.contains(&0) || classes < 2 {
        return Err(Error::invalid("tiny network needs positive widths and >= 2 classes"));
    }
    let mut b = Builder {
        net: Network::new(input_shape, classes),
        rng: ChaCha8Rng::seed_from_u64(seed),
        mask_cfg: *mask_cfg,
    };
    let l0 = b.conv("conv0", Precision::Full, input_shape[0], stem, 3, 1, false)?;
    let mut x = b.conv_bn(l0, 0)?;
    x = b.net.push(Op::Sign, &[x])?;
    let mut cin = stem;
    for (i, &w) in binary.iter().enumerate() {
        let l = b.conv(&format!("bin{}", i + 1), Precision::Binary, cin, w, 3, 1, true)?;
        x = b.binary_block(l, x)?;
        cin = w;
    }
    x = b.net.push(Op::GlobalAvgPool, &[x])?;
    let fc = b.linear("fc", cin, classes);
    b.net.push(Op::Linear(fc), &[x])?;
    Ok(b.net)
}

/// Re-draws every attached mask from `cfg`, consuming `rng` in layer order.
pub fn reinit_masks(net: &mut Network, cfg: &MaskInitConfig, rng: &mut impl Rng) -> Result<()> {
    for layer in &mut net.layers {
        if let Some(m) = layer.mask.as_mut() {
            let mut fresh = FilterMask::init(m.len(), cfg, rng)?;
            fresh.set_mode(m.mode());
            fresh.set_trainable(m.trainable());
            *m = fresh;
        }
    }
    Ok(())
}

/// Trainable scalar count of each layer's main group, in layer order.
pub fn parameter_census(net: &Network) -> Vec<usize> {
    net.layers.iter().map(Layer::param_count).collect()
}
