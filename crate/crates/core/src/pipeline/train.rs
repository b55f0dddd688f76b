use super::{stage_seed, PruneSchedule, Stage, TraceRow};
use crate::binops::softmax_cross_entropy;
use crate::data::Dataset;
use crate::graph::{backward, forward, LrSchedule, Mode, Network, Optimizer};
use crate::subsidiary::subsidiary_loss;
use crate::tensor::Tensor;
use crate::{Error, Result};

pub(crate) const EVAL_BATCH: usize = 256;

/// Logits of every sample in eval mode, `[N, classes]`.
pub fn predict(net: &mut Network, data: &Dataset) -> Result<Tensor> {
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut rows = Vec::with_capacity(data.len() * net.classes);
    for (x, _) in data.eval_batches(EVAL_BATCH) {
        rows.extend(forward(net, &x, Mode::Eval)?.into_output().into_data());
    }
    Tensor::new(vec![data.len(), net.classes], rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub error: f64,
}

pub fn evaluate(net: &mut Network, data: &Dataset) -> Result<Evaluation> {
    let logits = predict(net, data)?;
    let loss = softmax_cross_entropy(&logits, &data.labels)?.value;
    let wrong = (0..data.len())
        .filter(|&i| argmax(logits.outer(i)) != data.labels[i])
        .count();
    Ok(Evaluation {
        loss,
        error: wrong as f64 / data.len() as f64,
    })
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Selection objective terms on the full dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub total: f64,
    pub cross_entropy: f64,
    pub reg: f64,
    pub distill: f64,
}

/// `L_ce + alpha_reg·‖O_i‖₁ + beta·L_distill` over all of `data`, in eval mode.
pub fn selection_objective(
    net: &mut Network,
    layer: usize,
    data: &Dataset,
    teacher: Option<&Tensor>,
    s: &PruneSchedule,
) -> Result<Objective> {
    let o = net.layers[layer]
        .gate()
        .ok_or_else(|| Error::invalid(format!("layer {layer} has no active mask")))?;
    let logits = predict(net, data)?;
    let teacher = if s.beta > 0.0 { teacher } else { None };
    let l = subsidiary_loss(&logits, &data.labels, &o, teacher, s.alpha_reg, s.beta, s.temperature)?;
    Ok(Objective {
        total: l.total,
        cross_entropy: l.cross_entropy,
        reg: l.reg,
        distill: l.distill,
    })
}

/// Loss driving one training epoch.
pub(crate) enum Loss<'a> {
    /// Cross-entropy only.
    Task,
    /// Selection objective for the mask of `layer`.
    Select { layer: usize, teacher: Option<&'a Tensor> },
}

/// One pass over `data` in the `(seed, stage, layer, epoch)` order.
pub(crate) fn run_epoch(
    net: &mut Network,
    data: &Dataset,
    opt: &mut Optimizer,
    loss: &Loss<'_>,
    s: &PruneSchedule,
    stage: Stage,
    layer: Option<usize>,
    epoch: usize,
) -> Result<TraceRow> {
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let seed = stage_seed(s.seed, stage, layer.unwrap_or(usize::MAX >> 32));
    let mut total = 0.0;
    let mut correct = 0;
    for idx in data.batch_indices(seed, epoch, s.batch_size) {
        let (x, y) = data.gather(&idx);
        let tape = forward(net, &x, Mode::Train)?;
        let logits = tape.output();
        correct += (0..y.len()).filter(|&r| argmax(logits.outer(r)) == y[r]).count();
        let (value, grad_logits, reg) = match *loss {
            Loss::Task => {
                let ce = softmax_cross_entropy(logits, &y)?;
                (ce.value, ce.grad, None)
            }
            Loss::Select { layer, teacher } => {
                let o = net.layers[layer]
                    .gate()
                    .ok_or_else(|| Error::invalid(format!("layer {layer} has no active mask")))?;
                let t = match teacher {
                    Some(t) if s.beta > 0.0 => Some(t.select_outer(&idx)),
                    _ => None,
                };
                let l = subsidiary_loss(logits, &y, &o, t.as_ref(), s.alpha_reg, s.beta, s.temperature)?;
                (l.total, l.grad_logits, Some((layer, l.grad_reg)))
            }
        };
        let mut grads = backward(net, &tape, &grad_logits)?;
        if let Some((l, g)) = reg {
            grads.add_mask(l, &g);
        }
        opt.step(net, &grads, epoch)?;
        total += value * y.len() as f64;
    }
    Ok(TraceRow {
        stage,
        layer,
        epoch,
        loss: total / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
        kept: kept_filters(net),
    })
}

pub(crate) fn kept_filters(net: &Network) -> usize {
    net.masked_layers()
        .into_iter()
        .map(|l| {
            let m = net.layers[l].mask.as_ref().unwrap();
            match m.mode() {
                crate::subsidiary::MaskMode::Bypass => m.len(),
                _ => m.kept_indices().len(),
            }
        })
        .sum()
}

pub(crate) fn main_optimizer(s: &PruneSchedule) -> Optimizer {
    Optimizer::new(s.rule, s.main_lr)
}

pub(crate) fn sub_optimizer(s: &PruneSchedule) -> Optimizer {
    Optimizer::new(s.rule, LrSchedule::constant(s.sub_lr))
}
