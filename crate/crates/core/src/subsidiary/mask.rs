use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    /// `O = m`.
    Iden,
    /// `O = (Sign(m) + 1) / 2 ∈ {0, 1}`.
    Bin,
    /// `O = 1` for every filter; the mask has no effect.
    Bypass,
}

impl MaskMode {
    pub fn name(self) -> &'static str {
        match self {
            MaskMode::Iden => "Iden",
            MaskMode::Bin => "Bin",
            MaskMode::Bypass => "Bypass",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            MaskMode::Iden => 0,
            MaskMode::Bin => 1,
            MaskMode::Bypass => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(MaskMode::Iden),
            1 => Some(MaskMode::Bin),
            2 => Some(MaskMode::Bypass),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskInitConfig {
    /// Half-width of the initialisation interval; magnitudes are drawn from `(0, sigma)`.
    pub sigma: f64,
    /// Fraction of filters whose mask starts positive.
    pub pnr: f64,
}

impl Default for MaskInitConfig {
    fn default() -> Self {
        MaskInitConfig {
            sigma: 1e-6,
            pnr: 0.5,
        }
    }
}

/// Per-filter mask: one scalar per output filter of the attached layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterMask {
    m: Vec<f64>,
    mode: MaskMode,
    trainable: bool,
}

/// Draws a mask with exactly `round(pnr * n)` positive entries.
///
/// Magnitudes come first from the stream, then signs are assigned (positives
/// first) and shuffled. The mask starts in `Bypass` mode, frozen.
pub fn mask_init(n_filters: usize, cfg: &MaskInitConfig, seed: u64) -> Result<FilterMask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FilterMask::init(n_filters, cfg, &mut rng)
}

impl FilterMask {
    pub fn init(n_filters: usize, cfg: &MaskInitConfig, rng: &mut impl Rng) -> Result<Self> {
        if !(cfg.sigma > 0.0) {
            return Err(Error::invalid("mask sigma must be positive"));
        }
        if !(0.0..=1.0).contains(&cfg.pnr) {
            return Err(Error::invalid("pnr must lie in [0, 1]"));
        }
        if n_filters == 0 {
            return Err(Error::invalid("mask needs at least one filter"));
        }
        let mags: Vec<f64> = (0..n_filters)
            .map(|_| loop {
                let v = rng.gen_range(0.0..cfg.sigma);
                if v > 0.0 {
                    break v;
                }
            })
            .collect();
        let positives = (cfg.pnr * n_filters as f64).round() as usize;
        let mut signs: Vec<f64> = (0..n_filters)
            .map(|i| if i < positives { 1.0 } else { -1.0 })
            .collect();
        signs.shuffle(rng);
        Ok(FilterMask {
            m: mags.iter().zip(&signs).map(|(a, s)| a * s).collect(),
            mode: MaskMode::Bypass,
            trainable: false,
        })
    }

    pub fn from_values(m: Vec<f64>, mode: MaskMode) -> Self {
        FilterMask {
            m,
            mode,
            trainable: false,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.m
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.m
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn mode(&self) -> MaskMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: MaskMode) {
        self.mode = mode;
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn set_trainable(&mut self, t: bool) {
        self.trainable = t;
    }

    /// Mask output `O`, one value per filter.
    pub fn transform(&self) -> Vec<f64> {
        match self.mode {
            MaskMode::Iden => self.m.clone(),
            MaskMode::Bin => self
                .m
                .iter()
                .map(|&v| if v >= 0.0 { 1.0 } else { 0.0 })
                .collect(),
            MaskMode::Bypass => vec![1.0; self.m.len()],
        }
    }

    /// `dL/dm_n = dL/dO_n · ½ · 1{|m_n| <= 1}`.
    pub fn mask_grad(&self, dl_do: &[f64]) -> Result<Vec<f64>> {
        if self.mode != MaskMode::Bin {
            return Err(Error::MaskMode {
                mode: self.mode.name(),
                required: "Bin",
            });
        }
        if dl_do.len() != self.m.len() {
            return Err(Error::LengthMismatch {
                left: dl_do.len(),
                right: self.m.len(),
            });
        }
        Ok(dl_do
            .iter()
            .zip(&self.m)
            .map(|(&g, &m)| if m.abs() <= 1.0 { 0.5 * g } else { 0.0 })
            .collect())
    }

    /// Ω: filters whose binarized mask is zero.
    pub fn pruned_indices(&self) -> Vec<usize> {
        (0..self.m.len()).filter(|&n| self.m[n] < 0.0).collect()
    }

    pub fn kept_indices(&self) -> Vec<usize> {
        (0..self.m.len()).filter(|&n| self.m[n] >= 0.0).collect()
    }

    /// Mask equivalent to keeping exactly the filters in `kept` (Bin mode, values ±1).
    pub fn keeping(n_filters: usize, kept: &[usize]) -> Self {
        let mut m = vec![-1.0; n_filters];
        for &k in kept {
            m[k] = 1.0;
        }
        FilterMask::from_values(m, MaskMode::Bin)
    }
}

/// `Ŵ_n = O_n · W_n`, broadcast across each filter's block.
pub fn apply_mask(w: &Tensor, o: &[f64]) -> Result<Tensor> {
    crate::binops::gate_weights(w, Some(o))
}
