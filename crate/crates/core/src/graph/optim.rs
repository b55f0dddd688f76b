use super::{Gradients, Network, ParamGroup};
use crate::Result;

/// Step decay: `rate(epoch) = initial · decay^(epoch / interval)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub initial: f64,
    pub decay: f64,
    pub interval: usize,
}

impl LrSchedule {
    pub fn constant(rate: f64) -> Self {
        LrSchedule {
            initial: rate,
            decay: 1.0,
            interval: usize::MAX,
        }
    }

    pub fn rate(&self, epoch: usize) -> f64 {
        let steps = if self.interval == 0 { 0 } else { epoch / self.interval };
        self.initial * self.decay.powi(steps as i32)
    }
}

/// Update rule of an [`Optimizer`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    /// `v = μv + g; p -= lr·v` (plain SGD when `μ = 0`).
    Sgd { momentum: f64 },
    /// Adam with bias correction.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Rule {
    pub fn adam() -> Self {
        Rule::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Slot {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// First-order optimizer over whichever groups are trainable.
///
/// Mask groups receive `dL/dm = dL/dO · ½ · 1{|m| <= 1}` before the update.
/// Binary latent weights are clipped to `[-1, 1]` after each step when
/// `clip_binary` is set. State is kept per parameter group.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub schedule: LrSchedule,
    pub rule: Rule,
    pub clip_binary: bool,
    state: std::collections::BTreeMap<ParamGroup, Slot>,
}

impl Optimizer {
    pub fn new(rule: Rule, schedule: LrSchedule) -> Self {
        Optimizer {
            schedule,
            rule,
            clip_binary: true,
            state: Default::default(),
        }
    }

    pub fn sgd(schedule: LrSchedule) -> Self {
        Optimizer::new(Rule::Sgd { momentum: 0.0 }, schedule)
    }

    pub fn adam(schedule: LrSchedule) -> Self {
        Optimizer::new(Rule::adam(), schedule)
    }

    pub fn with_momentum(mut self, momentum: f64) -> Self {
        self.rule = Rule::Sgd { momentum };
        self
    }

    fn update(&mut self, key: ParamGroup, params: &mut [f64], grad: &[f64], lr: f64) {
        match self.rule {
            Rule::Sgd { momentum } if momentum == 0.0 => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            Rule::Sgd { momentum } => {
                let slot = self.state.entry(key).or_default();
                slot.m.resize(params.len(), 0.0);
                for ((p, g), vi) in params.iter_mut().zip(grad).zip(slot.m.iter_mut()) {
                    *vi = momentum * *vi + g;
                    *p -= lr * *vi;
                }
            }
            Rule::Adam { beta1, beta2, eps } => {
                let slot = self.state.entry(key).or_default();
                slot.m.resize(params.len(), 0.0);
                slot.v.resize(params.len(), 0.0);
                slot.t += 1;
                let c1 = 1.0 - beta1.powi(slot.t);
                let c2 = 1.0 - beta2.powi(slot.t);
                for (i, (p, &g)) in params.iter_mut().zip(grad).enumerate() {
                    slot.m[i] = beta1 * slot.m[i] + (1.0 - beta1) * g;
                    slot.v[i] = beta2 * slot.v[i] + (1.0 - beta2) * g * g;
                    *p -= lr * (slot.m[i] / c1) / ((slot.v[i] / c2).sqrt() + eps);
                }
            }
        }
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients, epoch: usize) -> Result<()> {
        let lr = self.schedule.rate(epoch);
        for (&l, g) in &grads.main {
            if !net.is_trainable(ParamGroup::Main(l)) {
                continue;
            }
            let binary = net.layers[l].precision == super::Precision::Binary;
            let clip = self.clip_binary && binary;
            // weights and bias share one state buffer
            let layer = &mut net.layers[l];
            let nw = layer.weight.len();
            let mut flat: Vec<f64> = layer.weight.data().to_vec();
            let mut gflat: Vec<f64> = g.weight.data().to_vec();
            if let (Some(b), Some(gb)) = (layer.bias.as_ref(), g.bias.as_ref()) {
                flat.extend_from_slice(b);
                gflat.extend_from_slice(gb);
            }
            self.update(ParamGroup::Main(l), &mut flat, &gflat, lr);
            let layer = &mut net.layers[l];
            layer.weight.data_mut().copy_from_slice(&flat[..nw]);
            if let Some(b) = layer.bias.as_mut() {
                if g.bias.is_some() {
                    b.copy_from_slice(&flat[nw..]);
                }
            }
            if clip {
                layer
                    .weight
                    .data_mut()
                    .iter_mut()
                    .for_each(|w| *w = w.clamp(-1.0, 1.0));
            }
        }
        for (&l, d_o) in &grads.mask_o {
            if !net.is_trainable(ParamGroup::Mask(l)) {
                continue;
            }
            let mask = net.layers[l].mask.as_ref().expect("trainable mask exists");
            let dm = mask.mask_grad(d_o)?;
            let mut m = mask.values().to_vec();
            self.update(ParamGroup::Mask(l), &mut m, &dm, lr);
            net.layers[l]
                .mask
                .as_mut()
                .unwrap()
                .values_mut()
                .copy_from_slice(&m);
        }
        Ok(())
    }
}


#[cfg(test)]
mod rule_tests {
    use super::*;
    use crate::graph::{Layer, Precision};
    use crate::graph::LayerGrad;
    use crate::tensor::Tensor;

    fn one_param_net(w: f64) -> Network {
        let mut net = Network::new([1, 1, 1], 2);
        net.add_layer(Layer::new("fc", Precision::Full, Tensor::new(vec![1, 1], vec![w]).unwrap()));
        net
    }

    fn grad(g: f64) -> Gradients {
        let mut grads = Gradients::default();
        grads.main.insert(
            0,
            LayerGrad {
                weight: Tensor::new(vec![1, 1], vec![g]).unwrap(),
                bias: None,
            },
        );
        grads
    }

    #[test]
    fn adam_first_step_is_lr_times_sign() {
        let mut net = one_param_net(1.0);
        let mut opt = Optimizer::adam(LrSchedule::constant(0.01));
        opt.step(&mut net, &grad(-3.0), 0).unwrap();
        assert!((net.layers[0].weight.data()[0] - 1.01).abs() < 1e-9);
    }

    #[test]
    fn momentum_accumulates() {
        let mut net = one_param_net(0.0);
        let mut opt = Optimizer::sgd(LrSchedule::constant(1.0)).with_momentum(0.5);
        opt.step(&mut net, &grad(1.0), 0).unwrap();
        opt.step(&mut net, &grad(1.0), 0).unwrap();
        assert_eq!(net.layers[0].weight.data()[0], -2.5);
    }
}
