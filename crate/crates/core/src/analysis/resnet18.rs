use super::{CostLayer, CostSpec};
use crate::graph::Precision;

fn layer(name: String, p: Precision, cin: usize, cout: usize, k: usize, out: usize) -> CostLayer {
    CostLayer {
        name,
        precision: p,
        in_channels: cin,
        out_channels: cout,
        kernel: k,
        out_height: out,
        out_width: out,
        bias: false,
        bn_channels: cout,
    }
}

/// ResNet-18 on 224×224 ImageNet input. With `binary`, every 3×3 convolution
/// inside the residual stages is binary; the stem, the 1×1 projection
/// shortcuts and the classifier stay full precision.
pub fn resnet18_imagenet(binary: bool) -> CostSpec {
    let inner = if binary { Precision::Binary } else { Precision::Full };
    let fp = Precision::Full;
    let mut layers = vec![layer("conv1".into(), fp, 3, 64, 7, 112)];
    let mut cin = 64;
    for (s, (&width, &out)) in [64, 128, 256, 512].iter().zip(&[56, 28, 14, 7]).enumerate() {
        for b in 0..2 {
            let tag = format!("layer{}.{}", s + 1, b);
            layers.push(layer(format!("{tag}.conv1"), inner, cin, width, 3, out));
            layers.push(layer(format!("{tag}.conv2"), inner, width, width, 3, out));
            if b == 0 && cin != width {
                layers.push(layer(format!("{tag}.downsample"), fp, cin, width, 1, out));
            }
            cin = width;
        }
    }
    let mut fc = layer("fc".into(), fp, 512, 1000, 1, 1);
    fc.bias = true;
    fc.bn_channels = 0;
    layers.push(fc);
    CostSpec { layers }
}
