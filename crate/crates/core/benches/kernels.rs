use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use bnnprune::binops::{binary_conv2d_forward, conv2d_forward, ScalingFactors};
use bnnprune::data::{synth_dataset, SynthSpec};
use bnnprune::graph::{backward, forward, Mode};
use bnnprune::models::{build_with_masks, Arch, ModelSpec};
use bnnprune::par::{with_policy, Policy};
use bnnprune::pipeline::{exhaustive_mask_search, prepare_selection, PruneSchedule};
use bnnprune::subsidiary::MaskInitConfig;
use bnnprune::tensor::sign;
use bnnprune::{BitTensor, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POLICIES: [(&str, Policy); 2] = [("sequential", Policy::Sequential), ("parallel", Policy::Parallel)];

fn pm1(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
}

fn binary_conv(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = pm1(&mut rng, &[8, 64, 16, 16]);
    let latent = Tensor::from_fn(&[64, 64, 3, 3], |_| rng.gen_range(-1.0..1.0));
    let signs = latent.map(sign);
    let alpha = ScalingFactors::from_weights(&latent);
    let (xb, wb) = (BitTensor::pack(&x).unwrap(), BitTensor::pack(&signs).unwrap());
    let mut g = c.benchmark_group("binary_conv_8x64x16x16_f64_k3");
    for (name, policy) in POLICIES {
        g.bench_function(BenchmarkId::new("bitpacked", name), |b| {
            b.iter(|| with_policy(policy, || binary_conv2d_forward(black_box(&xb), &wb, &alpha, 1, 1).unwrap()))
        });
        g.bench_function(BenchmarkId::new("dense", name), |b| {
            b.iter(|| with_policy(policy, || conv2d_forward(black_box(&x), &signs, None, 1, 1).unwrap()))
        });
    }
    g.finish();
}

fn train_step(c: &mut Criterion) {
    let spec = ModelSpec::new(Arch::VggMini, Arch::VggMini.default_widths(), [3, 32, 32], 10);
    let net = build_with_masks(&spec, 0, &MaskInitConfig::default()).unwrap();
    let data = synth_dataset(&SynthSpec::blobs(10, 32, [3, 32, 32]), 0).unwrap();
    let mut g = c.benchmark_group("vgg_mini_forward_backward_b32");
    g.sample_size(10);
    for (name, policy) in POLICIES {
        g.bench_function(name, |b| {
            b.iter(|| {
                with_policy(policy, || {
                    let mut n = net.clone();
                    let tape = forward(&mut n, &data.images, Mode::Train).unwrap();
                    let go = Tensor::from_fn(tape.output().shape(), |_| 1e-2);
                    backward(&n, &tape, &go).unwrap()
                })
            })
        });
    }
    g.finish();
}

fn mask_search(c: &mut Criterion) {
    let spec = ModelSpec::new(Arch::NinMini, vec![8, 8, 8], [3, 8, 8], 4);
    let mut net = build_with_masks(&spec, 0, &MaskInitConfig::default()).unwrap();
    let data = synth_dataset(&SynthSpec::blobs(4, 64, [3, 8, 8]), 0).unwrap();
    let layer = net.masked_layers()[0];
    prepare_selection(&mut net, layer).unwrap();
    let s = PruneSchedule { beta: 0.0, ..Default::default() };
    let mut g = c.benchmark_group("exhaustive_search_8_filters");
    g.sample_size(10);
    for (name, policy) in POLICIES {
        g.bench_function(name, |b| {
            b.iter(|| with_policy(policy, || exhaustive_mask_search(&net, layer, &data, None, &s).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, binary_conv, train_step, mask_search);
criterion_main!(benches);
