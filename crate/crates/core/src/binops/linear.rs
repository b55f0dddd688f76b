use super::gemm::gemm;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// `y = x Wᵀ + b` for `x: [N, in]`, `W: [out, in]`.
///
/// Accumulation runs as a plain left-to-right dot product so that inserting
/// exact zeros into the input (pruned features) leaves every output bitwise unchanged.
pub fn linear_forward(x: &Tensor, w: &Tensor, b: &[f64]) -> Result<Tensor> {
    let (n, fin) = match *x.shape() {
        [n, f] => (n, f),
        _ => return Err(Error::invalid("linear input must be [N, in]")),
    };
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let fout = w.dim0();
    w.expect_shape(&[fout, fin])?;
    if b.len() != fout {
        return Err(Error::LengthMismatch {
            left: b.len(),
            right: fout,
        });
    }
    let mut y = Vec::with_capacity(n * fout);
    for i in 0..n {
        let xi = x.outer(i);
        for o in 0..fout {
            let mut acc = 0.0;
            for (a, c) in xi.iter().zip(w.outer(o)) {
                acc += a * c;
            }
            y.push(acc + b[o]);
        }
    }
    Tensor::new(vec![n, fout], y)
}

/// Returns `(dx, dW, db)`.
pub fn linear_backward(
    x: &Tensor,
    w: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Vec<f64>)> {
    let (n, fin) = (x.dim0(), x.inner_len());
    let fout = w.dim0();
    grad_out.expect_shape(&[n, fout])?;
    let mut dx = Tensor::zeros(&[n, fin]);
    gemm(n, fout, fin, grad_out.data(), false, w.data(), false, 0.0, dx.data_mut());
    let mut dw = Tensor::zeros(&[fout, fin]);
    gemm(fout, n, fin, grad_out.data(), true, x.data(), false, 0.0, dw.data_mut());
    let mut db = vec![0.0; fout];
    for i in 0..n {
        for (d, g) in db.iter_mut().zip(grad_out.outer(i)) {
            *d += g;
        }
    }
    Ok((dx, dw, db))
}
