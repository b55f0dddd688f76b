//! Datasets: MNIST IDX, CIFAR-10 binary batches and synthetic Gaussian blobs.

mod cifar;
mod mnist;
mod synth;

pub use cifar::{load_cifar10_bin, CIFAR_RECORD};
pub use mnist::load_mnist_idx;
pub use synth::{synth_dataset, SynthSpec};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;
use crate::{Error, Result};

/// In-memory labelled image set, `[N, C, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
    /// Per-channel `(mean, std)` subtracted/divided at load time.
    pub normalization: Vec<(f64, f64)>,
}

impl Dataset {
    pub fn new(images: Tensor, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if images.ndim() != 4 {
            return Err(Error::invalid("images must be [N, C, H, W]"));
        }
        if images.dim0() != labels.len() {
            return Err(Error::LengthMismatch {
                left: images.dim0(),
                right: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::invalid(format!("label {bad} >= class count {classes}")));
        }
        let c = images.shape()[1];
        Ok(Dataset {
            images,
            labels,
            classes,
            normalization: vec![(0.0, 1.0); c],
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `[C, H, W]` of one sample.
    pub fn sample_shape(&self) -> [usize; 3] {
        let s = self.images.shape();
        [s[1], s[2], s[3]]
    }

    /// Standardises every channel to zero mean and unit variance, recording the statistics.
    pub fn normalize(&mut self) {
        let stats = channel_stats(&self.images);
        self.apply_normalization(&stats);
    }

    /// Applies externally computed statistics (e.g. the training set's to a test set).
    pub fn apply_normalization(&mut self, stats: &[(f64, f64)]) {
        let [c, h, w] = self.sample_shape();
        let plane = h * w;
        for (i, chunk) in self.images.data_mut().chunks_mut(plane).enumerate() {
            let (m, s) = stats[i % c];
            chunk.iter_mut().for_each(|v| *v = (*v - m) / s);
        }
        self.normalization = stats.to_vec();
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            images: self.images.select_outer(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            normalization: self.normalization.clone(),
        }
    }

    pub fn take(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Splits into the first `n` samples and the rest.
    pub fn split(&self, n: usize) -> (Dataset, Dataset) {
        let n = n.min(self.len());
        let a: Vec<usize> = (0..n).collect();
        let b: Vec<usize> = (n..self.len()).collect();
        (self.subset(&a), self.subset(&b))
    }

    /// Sample order for `epoch`: a pure function of `(seed, epoch)`.
    pub fn epoch_order(&self, seed: u64, epoch: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(epoch as u64);
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut rng);
        idx
    }

    /// Mini-batches for `epoch` as `(images, labels)`; the last batch may be short.
    pub fn batches(&self, seed: u64, epoch: usize, batch_size: usize) -> Vec<(Tensor, Vec<usize>)> {
        let order = self.epoch_order(seed, epoch);
        order
            .chunks(batch_size.max(1))
            .map(|idx| self.gather(idx))
            .collect()
    }

    /// Sequential (unshuffled) batches, for evaluation.
    pub fn eval_batches(&self, batch_size: usize) -> Vec<(Tensor, Vec<usize>)> {
        let idx: Vec<usize> = (0..self.len()).collect();
        idx.chunks(batch_size.max(1)).map(|c| self.gather(c)).collect()
    }

    /// Index chunks of the `epoch` order.
    pub fn batch_indices(&self, seed: u64, epoch: usize, batch_size: usize) -> Vec<Vec<usize>> {
        self.epoch_order(seed, epoch)
            .chunks(batch_size.max(1))
            .map(<[usize]>::to_vec)
            .collect()
    }

    pub fn gather(&self, idx: &[usize]) -> (Tensor, Vec<usize>) {
        (
            self.images.select_outer(idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

fn channel_stats(images: &Tensor) -> Vec<(f64, f64)> {
    let s = images.shape();
    let (c, plane) = (s[1], s[2] * s[3]);
    let mut sum = vec![0.0; c];
    let mut sq = vec![0.0; c];
    for (i, chunk) in images.data().chunks(plane).enumerate() {
        sum[i % c] += chunk.iter().sum::<f64>();
        sq[i % c] += chunk.iter().map(|v| v * v).sum::<f64>();
    }
    let count = (images.dim0() * plane) as f64;
    (0..c)
        .map(|k| {
            let m = sum[k] / count;
            let var = (sq[k] / count - m * m).max(0.0);
            (m, var.sqrt().max(1e-8))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_order_is_pure() {
        let d = synth_dataset(&SynthSpec::blobs(2, 50, [1, 4, 4]), 7).unwrap();
        assert_eq!(d.epoch_order(3, 1), d.epoch_order(3, 1));
        assert_ne!(d.epoch_order(3, 1), d.epoch_order(3, 2));
        let mut sorted = d.epoch_order(3, 5);
        sorted.sort();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn normalize_standardises() {
        let mut d = synth_dataset(&SynthSpec::blobs(3, 60, [2, 3, 3]), 1).unwrap();
        d.normalize();
        for (m, s) in channel_stats(&d.images) {
            assert!(m.abs() < 1e-9 && (s - 1.0).abs() < 1e-9);
        }
    }
}
