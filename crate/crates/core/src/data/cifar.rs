use std::path::Path;

use super::Dataset;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// One label byte followed by 3×32×32 channel-major pixel bytes.
pub const CIFAR_RECORD: usize = 1 + 3072;

/// Parses one or more CIFAR-10 binary batch files, concatenated in the order given.
/// Pixels are scaled to `[0, 1]`.
pub fn load_cifar10_bin(paths: &[impl AsRef<Path>]) -> Result<Dataset> {
    let mut bytes = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let b = std::fs::read(p).map_err(|e| Error::io(p, e))?;
        parse_cifar(&b).map_err(|e| e.in_stage(p.display().to_string()))?;
        bytes.extend(b);
    }
    parse_cifar(&bytes)
}

pub(crate) fn parse_cifar(b: &[u8]) -> Result<Dataset> {
    if b.is_empty() || b.len() % CIFAR_RECORD != 0 {
        let whole = b.len() / CIFAR_RECORD * CIFAR_RECORD;
        return Err(Error::Corrupt {
            offset: whole as u64,
            reason: format!(
                "{} bytes is not a whole number of {CIFAR_RECORD}-byte records",
                b.len()
            ),
        });
    }
    let n = b.len() / CIFAR_RECORD;
    let mut labels = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * 3072);
    for (i, rec) in b.chunks(CIFAR_RECORD).enumerate() {
        if rec[0] > 9 {
            return Err(Error::Corrupt {
                offset: (i * CIFAR_RECORD) as u64,
                reason: format!("label {} out of range", rec[0]),
            });
        }
        labels.push(rec[0] as usize);
        data.extend(rec[1..].iter().map(|&p| p as f64 / 255.0));
    }
    Dataset::new(Tensor::new(vec![n, 3, 32, 32], data)?, labels, 10)
}
