use std::path::Path;

use super::Dataset;
use crate::tensor::Tensor;
use crate::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(buf: &[u8], offset: usize, what: &str) -> Result<u32> {
    buf.get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Corrupt {
            offset: offset as u64,
            reason: format!("truncated IDX header ({what})"),
        })
}

/// Parses an MNIST image/label IDX pair. Pixels are scaled to `[0, 1]`; no
/// normalisation is applied.
pub fn load_mnist_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let ib = read(images)?;
    let lb = read(labels)?;
    parse_mnist(&ib, &lb)
}

pub(crate) fn parse_mnist(ib: &[u8], lb: &[u8]) -> Result<Dataset> {
    let magic = be_u32(ib, 0, "magic")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Corrupt {
            offset: 0,
            reason: format!("image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        });
    }
    let n = be_u32(ib, 4, "count")? as usize;
    let rows = be_u32(ib, 8, "rows")? as usize;
    let cols = be_u32(ib, 12, "cols")? as usize;
    let need = 16 + n * rows * cols;
    if ib.len() != need {
        return Err(Error::Corrupt {
            offset: ib.len().min(need) as u64,
            reason: format!("image file has {} bytes, header implies {need}", ib.len()),
        });
    }
    let lmagic = be_u32(lb, 0, "magic")?;
    if lmagic != LABELS_MAGIC {
        return Err(Error::Corrupt {
            offset: 0,
            reason: format!("label magic {lmagic:#010x}, expected {LABELS_MAGIC:#010x}"),
        });
    }
    let ln = be_u32(lb, 4, "count")? as usize;
    if ln != n {
        return Err(Error::Corrupt {
            offset: 4,
            reason: format!("label count {ln} differs from image count {n}"),
        });
    }
    if lb.len() != 8 + n {
        return Err(Error::Corrupt {
            offset: lb.len().min(8 + n) as u64,
            reason: format!("label file has {} bytes, header implies {}", lb.len(), 8 + n),
        });
    }
    let labels: Vec<usize> = lb[8..].iter().map(|&b| b as usize).collect();
    if let Some(pos) = labels.iter().position(|&l| l > 9) {
        return Err(Error::Corrupt {
            offset: (8 + pos) as u64,
            reason: format!("label {} out of range", labels[pos]),
        });
    }
    let data = ib[16..].iter().map(|&b| b as f64 / 255.0).collect();
    Dataset::new(Tensor::new(vec![n, 1, rows, cols], data)?, labels, 10)
}

#[cfg(test)]
pub(crate) fn encode_mnist(images: &[Vec<u8>], rows: usize, cols: usize, labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut ib = Vec::new();
    ib.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    ib.extend_from_slice(&(images.len() as u32).to_be_bytes());
    ib.extend_from_slice(&(rows as u32).to_be_bytes());
    ib.extend_from_slice(&(cols as u32).to_be_bytes());
    images.iter().for_each(|im| ib.extend_from_slice(im));
    let mut lb = Vec::new();
    lb.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lb.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lb.extend_from_slice(labels);
    (ib, lb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (Vec<u8>, Vec<u8>) {
        let imgs: Vec<Vec<u8>> = (0..3).map(|i| vec![i as u8 * 100; 4]).collect();
        encode_mnist(&imgs, 2, 2, &[1, 7, 3])
    }

    #[test]
    fn parses_header_and_pixels() {
        let (ib, lb) = sample();
        let d = parse_mnist(&ib, &lb).unwrap();
        assert_eq!(d.images.shape(), &[3, 1, 2, 2]);
        assert_eq!(d.labels, vec![1, 7, 3]);
        assert!((d.images.outer(2)[0] - 200.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn truncated_file_rejected() {
        let (ib, lb) = sample();
        let err = parse_mnist(&ib[..ib.len() - 1], &lb).unwrap_err();
        assert!(matches!(err, Error::Corrupt { offset: 27, .. }), "{err}");
        assert!(parse_mnist(&ib[..10], &lb).is_err());
        assert!(parse_mnist(&ib, &lb[..9]).is_err());
    }

    #[test]
    fn wrong_magic_rejected() {
        let (ib, lb) = sample();
        assert!(matches!(parse_mnist(&lb, &ib), Err(Error::Corrupt { offset: 0, .. })));
    }
}
