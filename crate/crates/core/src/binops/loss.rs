use crate::tensor::Tensor;
use crate::{Error, Result};

/// Scalar loss with its gradient with respect to the first argument.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    pub grad: Tensor,
}

fn rows(x: &Tensor) -> Result<(usize, usize)> {
    match *x.shape() {
        [0, _] => Err(Error::EmptyBatch),
        [n, c] => Ok((n, c)),
        _ => Err(Error::invalid("logits must be [N, classes]")),
    }
}

/// Row-wise `log softmax(x / t)`.
pub fn log_softmax_rows(x: &Tensor, t: f64) -> Result<Tensor> {
    let (n, c) = rows(x)?;
    let mut out = Vec::with_capacity(n * c);
    for i in 0..n {
        let r = x.outer(i);
        let m = r.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b / t));
        let lse = m + r.iter().map(|&v| (v / t - m).exp()).sum::<f64>().ln();
        out.extend(r.iter().map(|&v| v / t - lse));
    }
    Tensor::new(vec![n, c], out)
}

pub fn softmax_rows(x: &Tensor, t: f64) -> Result<Tensor> {
    Ok(log_softmax_rows(x, t)?.map(f64::exp))
}

/// Mean cross-entropy over the batch.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<LossOutput> {
    let (n, c) = rows(logits)?;
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: n,
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::invalid(format!("label {bad} out of range for {c} classes")));
    }
    let logp = log_softmax_rows(logits, 1.0)?;
    let mut value = 0.0;
    let mut grad = logp.map(f64::exp);
    for (i, &l) in labels.iter().enumerate() {
        value -= logp.outer(i)[l];
        grad.outer_mut(i)[l] -= 1.0;
    }
    grad.scale(1.0 / n as f64);
    Ok(LossOutput {
        value: value / n as f64,
        grad,
    })
}

/// Soft-target cross-entropy `-Σ softmax(t/T) · log softmax(z/T)`, averaged over the batch.
///
/// This is `KL(p‖q) + H(p)` with `p` the teacher distribution; `H(p)` is left in
/// because it does not depend on the student. The gradient is with respect to `z`.
pub fn distill_loss(student: &Tensor, teacher: &Tensor, temperature: f64) -> Result<LossOutput> {
    if !(temperature > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    let (n, _) = rows(student)?;
    teacher.expect_shape(student.shape())?;
    let logq = log_softmax_rows(student, temperature)?;
    let p = softmax_rows(teacher, temperature)?;
    let value = -p
        .data()
        .iter()
        .zip(logq.data())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / n as f64;
    let scale = 1.0 / (temperature * n as f64);
    let grad = logq.zip_map(&p, |lq, pv| (lq.exp() - pv) * scale)?;
    Ok(LossOutput { value, grad })
}
