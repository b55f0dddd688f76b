use crate::binops::{distill_loss, softmax_cross_entropy};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Value and gradients of `L_ce + alpha_reg · ‖O‖₁ + beta · L_distill`.
#[derive(Debug, Clone)]
pub struct SelectionLoss {
    pub total: f64,
    pub cross_entropy: f64,
    pub reg: f64,
    pub distill: f64,
    /// `dL/dlogits` of the data and distillation terms.
    pub grad_logits: Tensor,
    /// `d(alpha_reg · ‖O‖₁)/dO_n`, per filter.
    pub grad_reg: Vec<f64>,
}

/// Filter-selection objective for one layer.
///
/// `o` is the layer's mask output; in `Bin` mode every entry is 0 or 1 so the
/// regulariser counts kept filters. `teacher` may be omitted when `beta == 0`.
pub fn subsidiary_loss(
    logits: &Tensor,
    labels: &[usize],
    o: &[f64],
    teacher: Option<&Tensor>,
    alpha_reg: f64,
    beta: f64,
    temperature: f64,
) -> Result<SelectionLoss> {
    if !(alpha_reg >= 0.0) || !(beta >= 0.0) {
        return Err(Error::invalid("alpha_reg and beta must be non-negative"));
    }
    if !(temperature > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    let ce = softmax_cross_entropy(logits, labels)?;
    let mut grad_logits = ce.grad;
    let mut distill = 0.0;
    if beta > 0.0 {
        let t = teacher.ok_or_else(|| Error::invalid("distillation needs teacher logits"))?;
        if t.shape() != logits.shape() {
            return Err(Error::ShapeMismatch {
                expected: logits.shape().to_vec(),
                got: t.shape().to_vec(),
            });
        }
        let d = distill_loss(logits, t, temperature)?;
        distill = d.value;
        for (g, dg) in grad_logits.data_mut().iter_mut().zip(d.grad.data()) {
            *g += beta * dg;
        }
    }
    let reg: f64 = o.iter().map(|v| v.abs()).sum();
    let grad_reg = o
        .iter()
        .map(|&v| alpha_reg * if v >= 0.0 { 1.0 } else { -1.0 })
        .collect();
    Ok(SelectionLoss {
        total: ce.value + alpha_reg * reg + beta * distill,
        cross_entropy: ce.value,
        reg,
        distill,
        grad_logits,
        grad_reg,
    })
}
