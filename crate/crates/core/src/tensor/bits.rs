use super::Tensor;
use crate::{Error, Result};

/// Bitpacked ±1 tensor, 64 values per word. Bit 1 encodes +1, bit 0 encodes -1.
///
/// Bits past `len` in the final word are always zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitTensor {
    shape: Vec<usize>,
    words: Vec<u64>,
    len: usize,
}

#[inline]
fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

#[inline]
fn tail_mask(len: usize) -> u64 {
    match len % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

impl BitTensor {
    /// Packs the signs of `x`; `x[k] >= 0` maps to bit 1.
    pub fn pack(x: &Tensor) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::EmptyTensor);
        }
        Ok(BitTensor {
            shape: x.shape().to_vec(),
            words: pack_slice(x.data()),
            len: x.len(),
        })
    }

    /// Builds from raw words, zeroing any padding bits.
    pub fn from_words(shape: Vec<usize>, mut words: Vec<u64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len == 0 {
            return Err(Error::EmptyTensor);
        }
        if words.len() != words_for(len) {
            return Err(Error::LengthMismatch {
                left: words.len(),
                right: words_for(len),
            });
        }
        *words.last_mut().unwrap() &= tail_mask(len);
        Ok(BitTensor { shape, words, len })
    }

    pub fn unpack(&self) -> Tensor {
        let data = (0..self.len)
            .map(|k| if self.bit(k) { 1.0 } else { -1.0 })
            .collect();
        Tensor::new(self.shape.clone(), data).expect("shape consistent by construction")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of meaningful bits in the final word.
    pub fn valid_in_last(&self) -> usize {
        match self.len % 64 {
            0 => 64,
            r => r,
        }
    }

    #[inline]
    pub fn bit(&self, k: usize) -> bool {
        (self.words[k / 64] >> (k % 64)) & 1 == 1
    }

    /// Bitwise complement (every ±1 value negated), padding kept at zero.
    pub fn complement(&self) -> BitTensor {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        *words.last_mut().unwrap() &= tail_mask(self.len);
        BitTensor {
            shape: self.shape.clone(),
            words,
            len: self.len,
        }
    }
}

fn pack_slice(x: &[f64]) -> Vec<u64> {
    let mut words = vec![0u64; words_for(x.len())];
    for (k, &v) in x.iter().enumerate() {
        if v >= 0.0 {
            words[k / 64] |= 1 << (k % 64);
        }
    }
    words
}

/// ±1 dot product of two bit tensors: `2 * popcount(xnor(a, b)) - n`.
pub fn xnor_popcount_dot(a: &BitTensor, b: &BitTensor) -> Result<i64> {
    if a.len != b.len {
        return Err(Error::LengthMismatch {
            left: a.len,
            right: b.len,
        });
    }
    let last = a.words.len() - 1;
    let mut agree = 0u32;
    for (i, (&x, &y)) in a.words.iter().zip(&b.words).enumerate() {
        let mut m = !(x ^ y);
        if i == last {
            m &= tail_mask(a.len);
        }
        agree += m.count_ones();
    }
    Ok(2 * agree as i64 - a.len as i64)
}

/// Row-aligned bit matrix: every row starts on a word boundary.
///
/// Used for filter banks and convolution windows, where each row is dotted
/// against many others and must not share words with its neighbours.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitRows {
    rows: usize,
    row_bits: usize,
    row_words: usize,
    words: Vec<u64>,
}

impl BitRows {
    /// Packs a `[rows, ...]` tensor, one row per leading index.
    pub fn pack(x: &Tensor) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::EmptyTensor);
        }
        let rows = x.dim0();
        let row_bits = x.inner_len();
        let row_words = words_for(row_bits);
        let mut words = Vec::with_capacity(rows * row_words);
        for r in 0..rows {
            words.extend(pack_slice(x.outer(r)));
        }
        Ok(BitRows {
            rows,
            row_bits,
            row_words,
            words,
        })
    }

    pub fn zeros(rows: usize, row_bits: usize) -> Self {
        let row_words = words_for(row_bits);
        BitRows {
            rows,
            row_bits,
            row_words,
            words: vec![0; rows * row_words],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row_bits(&self) -> usize {
        self.row_bits
    }

    pub fn row_words(&self) -> usize {
        self.row_words
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.words[r * self.row_words..(r + 1) * self.row_words]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, r: usize) -> &mut [u64] {
        &mut self.words[r * self.row_words..(r + 1) * self.row_words]
    }

    pub fn set(&mut self, r: usize, k: usize) {
        self.words[r * self.row_words + k / 64] |= 1 << (k % 64);
    }
}

/// Positions where `a` and `b` agree, counted only where `valid` is set.
#[inline]
pub(crate) fn masked_agree(a: &[u64], b: &[u64], valid: &[u64]) -> u32 {
    a.iter().zip(b).zip(valid).map(|((&x, &y), &v)| (!(x ^ y) & v).count_ones()).sum()
}

/// Masked ±1 dot product over the positions set in `valid`:
/// `2 * popcount(xnor(a, b) & valid) - popcount(valid)`.
#[cfg(test)]
fn masked_dot(a: &[u64], b: &[u64], valid: &[u64]) -> i64 {
    let total: u32 = valid.iter().map(|v| v.count_ones()).sum();
    2 * masked_agree(a, b, valid) as i64 - total as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signs(rng: &mut ChaCha8Rng, n: usize) -> Tensor {
        Tensor::from_fn(&[n], |_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
    }

    #[test]
    fn pack_uses_sign_zero_positive() {
        let x = Tensor::new(vec![3], vec![0.3, -0.2, 0.0]).unwrap();
        let b = BitTensor::pack(&x).unwrap();
        assert_eq!(b.words(), &[0b101]);
        assert_eq!(b.unpack().data(), &[1.0, -1.0, 1.0]);
    }

    #[test]
    fn padding_bits_are_zero() {
        let x = Tensor::full(&[130], 1.0);
        let b = BitTensor::pack(&x).unwrap();
        assert_eq!(b.words().len(), 3);
        assert_eq!(b.valid_in_last(), 2);
        assert_eq!(b.words()[2], 0b11);
        assert_eq!(b.complement().words()[2], 0);
    }

    #[test]
    fn from_words_clears_padding() {
        let b = BitTensor::from_words(vec![3], vec![u64::MAX]).unwrap();
        assert_eq!(b.words(), &[0b111]);
    }

    #[test]
    fn empty_tensor_rejected() {
        assert!(matches!(
            BitTensor::pack(&Tensor::zeros(&[0])),
            Err(Error::EmptyTensor)
        ));
    }

    #[test]
    fn unpack_matches_scalar_sign_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::from_fn(&[256], |_| rng.gen_range(-1.0..1.0));
        let got = BitTensor::pack(&x).unwrap().unpack();
        for (g, v) in got.data().iter().zip(x.data()) {
            assert_eq!(*g, if *v >= 0.0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn dot_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = BitTensor::pack(&random_signs(&mut rng, 64)).unwrap();
        assert_eq!(xnor_popcount_dot(&a, &a).unwrap(), 64);
        assert_eq!(xnor_popcount_dot(&a, &a.complement()).unwrap(), -64);
    }

    #[test]
    fn dot_matches_naive_n100() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_signs(&mut rng, 100);
        let y = random_signs(&mut rng, 100);
        let naive: f64 = x.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        let a = BitTensor::pack(&x).unwrap();
        let b = BitTensor::pack(&y).unwrap();
        assert_eq!(xnor_popcount_dot(&a, &b).unwrap(), naive as i64);
    }

    #[test]
    fn dot_length_mismatch() {
        let a = BitTensor::pack(&Tensor::full(&[10], 1.0)).unwrap();
        let b = BitTensor::pack(&Tensor::full(&[11], 1.0)).unwrap();
        assert!(matches!(
            xnor_popcount_dot(&a, &b),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn dot_equivalence_all_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=512 {
            let x = random_signs(&mut rng, n);
            let y = random_signs(&mut rng, n);
            let naive: f64 = x.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
            let a = BitTensor::pack(&x).unwrap();
            let b = BitTensor::pack(&y).unwrap();
            assert_eq!(xnor_popcount_dot(&a, &b).unwrap(), naive as i64, "n={n}");
        }
    }

    #[test]
    fn masked_dot_ignores_invalid_positions() {
        let a = [0b1010u64];
        let b = [0b1001u64];
        // positions 0..4: a=[-,+,-,+], b=[+,-,-,+]; products [-,-,+,+]
        assert_eq!(masked_dot(&a, &b, &[0b1111]), 0);
        assert_eq!(masked_dot(&a, &b, &[0b1100]), 2);
        assert_eq!(masked_dot(&a, &b, &[0b0011]), -2);
    }

    proptest::proptest! {
        #[test]
        fn padding_never_changes_dot(bits in proptest::collection::vec(proptest::bool::ANY, 1..300), seed in 0u64..1000) {
            let n = bits.len();
            let x = Tensor::from_fn(&[n], |k| if bits[k] { 1.0 } else { -1.0 });
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y = random_signs(&mut rng, n);
            let a = BitTensor::pack(&x).unwrap();
            let b = BitTensor::pack(&y).unwrap();
            let clean = xnor_popcount_dot(&a, &b).unwrap();
            // garbage past the end must be masked out
            let mut wa = a.words().to_vec();
            let mut wb = b.words().to_vec();
            if n % 64 != 0 {
                *wa.last_mut().unwrap() |= !tail_mask(n);
                *wb.last_mut().unwrap() &= tail_mask(n);
            }
            let dirty_a = BitTensor { shape: vec![n], words: wa, len: n };
            let dirty_b = BitTensor { shape: vec![n], words: wb, len: n };
            proptest::prop_assert_eq!(xnor_popcount_dot(&dirty_a, &dirty_b).unwrap(), clean);
        }

        #[test]
        fn pack_unpack_is_sign(v in proptest::collection::vec(-10.0f64..10.0, 1..400)) {
            let x = Tensor::new(vec![v.len()], v.clone()).unwrap();
            let u = BitTensor::pack(&x).unwrap().unpack();
            for (a, b) in u.data().iter().zip(&v) {
                proptest::prop_assert_eq!(*a, super::super::sign(*b));
            }
        }
    }
}
