use super::Tensor;
use crate::{Error, Result};

/// Spatial geometry of a square-kernel 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeometry {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    ) -> Result<Self> {
        let g = ConvGeometry {
            channels,
            height,
            width,
            kernel,
            stride,
            pad,
        };
        if stride == 0 || kernel == 0 {
            return Err(Error::invalid("kernel and stride must be positive"));
        }
        if kernel > height + 2 * pad || kernel > width + 2 * pad {
            return Err(Error::KernelTooLarge {
                kernel,
                height,
                width,
                pad,
            });
        }
        Ok(g)
    }

    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.pad - self.kernel) / self.stride + 1
    }

    /// Number of receptive fields (columns of the im2col matrix).
    pub fn positions(&self) -> usize {
        self.out_height() * self.out_width()
    }

    /// Length of one receptive field (rows of the im2col matrix).
    pub fn window(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn input_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    /// Input offset of window row `r` at output position `(oy, ox)`, or `None` inside padding.
    #[inline]
    pub fn source(&self, r: usize, oy: usize, ox: usize) -> Option<usize> {
        let kk = self.kernel * self.kernel;
        let c = r / kk;
        let ky = (r % kk) / self.kernel;
        let kx = r % self.kernel;
        let y = (oy * self.stride + ky) as isize - self.pad as isize;
        let x = (ox * self.stride + kx) as isize - self.pad as isize;
        if y < 0 || x < 0 || y >= self.height as isize || x >= self.width as isize {
            return None;
        }
        Some((c * self.height + y as usize) * self.width + x as usize)
    }
}

/// Unfolds one `[C, H, W]` sample into a `[C*K*K, Hout*Wout]` matrix.
///
/// Row `r` is `(c, ky, kx)` in row-major order, column `p` is `(oy, ox)`
/// in row-major order. Padded positions are zero.
pub fn im2col(input: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let (oh, ow) = (g.out_height(), g.out_width());
    let p = oh * ow;
    let mut cols = vec![0.0; g.window() * p];
    for r in 0..g.window() {
        let row = &mut cols[r * p..(r + 1) * p];
        for oy in 0..oh {
            for ox in 0..ow {
                if let Some(src) = g.source(r, oy, ox) {
                    row[oy * ow + ox] = input[src];
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: accumulates a column matrix back onto a `[C, H, W]` buffer.
pub fn col2im(cols: &[f64], g: &ConvGeometry, out: &mut [f64]) {
    let (oh, ow) = (g.out_height(), g.out_width());
    let p = oh * ow;
    for r in 0..g.window() {
        let row = &cols[r * p..(r + 1) * p];
        for oy in 0..oh {
            for ox in 0..ow {
                if let Some(dst) = g.source(r, oy, ox) {
                    out[dst] += row[oy * ow + ox];
                }
            }
        }
    }
}

/// Nested-loop zero-padded cross-correlation of `[N, C, H, W]` input with `[F, C, K, K]` weights.
pub fn conv2d_direct(input: &Tensor, weights: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    let (n, c, h, w) = dims4(input)?;
    let (f, wc, k, k2) = dims4(weights)?;
    if wc != c || k != k2 {
        return Err(Error::ShapeMismatch {
            expected: vec![f, c, k, k],
            got: weights.shape().to_vec(),
        });
    }
    let g = ConvGeometry::new(c, h, w, k, stride, pad)?;
    let (oh, ow) = (g.out_height(), g.out_width());
    let mut out = Tensor::zeros(&[n, f, oh, ow]);
    let x = input.data();
    let wt = weights.data();
    let o = out.data_mut();
    for b in 0..n {
        for fi in 0..f {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ci in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let y = (oy * stride + ky) as isize - pad as isize;
                                let xx = (ox * stride + kx) as isize - pad as isize;
                                if y < 0 || xx < 0 || y >= h as isize || xx >= w as isize {
                                    continue;
                                }
                                let xi = ((b * c + ci) * h + y as usize) * w + xx as usize;
                                let wi = ((fi * c + ci) * k + ky) * k + kx;
                                acc += x[xi] * wt[wi];
                            }
                        }
                    }
                    o[((b * f + fi) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    Ok(out)
}

pub(crate) fn dims4(t: &Tensor) -> Result<(usize, usize, usize, usize)> {
    match *t.shape() {
        [a, b, c, d] => Ok((a, b, c, d)),
        _ => Err(Error::invalid(format!(
            "expected a 4-d tensor, got shape {:?}",
            t.shape()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_by_one_is_identity_layout() {
        let g = ConvGeometry::new(2, 3, 3, 1, 1, 0).unwrap();
        let x: Vec<f64> = (0..18).map(|i| i as f64).collect();
        assert_eq!(im2col(&x, &g), x);
    }

    #[test]
    fn three_by_three_pad_one_window_count() {
        let g = ConvGeometry::new(1, 4, 4, 3, 1, 1).unwrap();
        assert_eq!(g.positions(), 16);
        assert_eq!(g.window(), 9);
        assert_eq!(im2col(&[1.0; 16], &g).len(), 144);
    }

    #[test]
    fn kernel_too_large() {
        assert!(matches!(
            ConvGeometry::new(1, 2, 2, 5, 1, 1),
            Err(Error::KernelTooLarge { .. })
        ));
        assert!(ConvGeometry::new(1, 2, 2, 4, 1, 1).is_ok());
    }

    #[test]
    fn im2col_matmul_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let c = rng.gen_range(1..4);
            let h = rng.gen_range(3..8);
            let w = rng.gen_range(3..8);
            let k = rng.gen_range(1..4);
            let stride = rng.gen_range(1..3);
            let pad = rng.gen_range(0..2);
            let f = rng.gen_range(1..4);
            let x = Tensor::from_fn(&[1, c, h, w], |_| rng.gen_range(-1.0..1.0));
            let wt = Tensor::from_fn(&[f, c, k, k], |_| rng.gen_range(-1.0..1.0));
            let g = ConvGeometry::new(c, h, w, k, stride, pad).unwrap();
            let cols = im2col(x.data(), &g);
            let p = g.positions();
            let expect = conv2d_direct(&x, &wt, stride, pad).unwrap();
            for fi in 0..f {
                for j in 0..p {
                    let v: f64 = (0..g.window())
                        .map(|r| wt.outer(fi)[r] * cols[r * p + j])
                        .sum();
                    assert!((v - expect.data()[fi * p + j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn col2im_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = ConvGeometry::new(2, 5, 4, 3, 2, 1).unwrap();
        let x: Vec<f64> = (0..g.input_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..g.window() * g.positions())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let lhs: f64 = im2col(&x, &g).iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut back = vec![0.0; g.input_len()];
        col2im(&y, &g, &mut back);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
