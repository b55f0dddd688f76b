use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Gaussian blobs around per-class prototype images.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: usize,
    pub samples: usize,
    pub shape: [usize; 3],
    /// Prototype amplitude; prototypes are `±separation` per pixel.
    pub separation: f64,
    /// Standard deviation of the per-pixel noise.
    pub noise: f64,
}

impl SynthSpec {
    pub fn blobs(classes: usize, samples: usize, shape: [usize; 3]) -> Self {
        SynthSpec {
            classes,
            samples,
            shape,
            separation: 1.0,
            noise: 0.5,
        }
    }
}

/// Labels cycle `0, 1, ..., classes-1`; prototypes are drawn first, then samples in order.
pub fn synth_dataset(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    if spec.classes < 2 || spec.samples == 0 || spec.shape.contains(&0) {
        return Err(Error::invalid("synthetic dataset needs >= 2 classes and non-empty shape"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim: usize = spec.shape.iter().product();
    let protos: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            (0..dim)
                .map(|_| if rng.gen_bool(0.5) { spec.separation } else { -spec.separation })
                .collect()
        })
        .collect();
    let mut data = Vec::with_capacity(spec.samples * dim);
    let mut labels = Vec::with_capacity(spec.samples);
    for i in 0..spec.samples {
        let c = i % spec.classes;
        labels.push(c);
        for &p in &protos[c] {
            let z: f64 = rng.sample(StandardNormal);
            data.push(p + spec.noise * z);
        }
    }
    let [c, h, w] = spec.shape;
    Dataset::new(Tensor::new(vec![spec.samples, c, h, w], data)?, labels, spec.classes)
}
