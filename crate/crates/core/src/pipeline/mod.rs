//! Main/subsidiary pruning pipeline, MSF baselines and small-scale oracles.
//!
//! Stage order: [`feature_learning`] trains the main network with masks bypassed,
//! then for every masked layer bottom-up [`select_layer`] trains that layer's mask
//! under the selection objective and [`retrain_after`] fine-tunes the layer and
//! everything above it. [`physical_shrink`] materialises the final masks.

mod msf;
mod oracle;
mod shrink;
mod stages;
mod train;

pub use msf::{compare, layer_alpha, msf_prune_cascade, msf_prune_layerwise, msf_rank, Comparison};
pub use oracle::{exhaustive_mask_search, l1_perturbation_bound, zero_rows, MaskSearch};
pub use shrink::physical_shrink;
pub use stages::{
    feature_learning, prepare_retrain, prepare_selection, prune_pipeline, retrain_after,
    select_layer, PipelineOutcome, Selection,
};
pub use train::{evaluate, predict, selection_objective, Evaluation, Objective};

use crate::graph::{LrSchedule, Network, Rule};
use crate::subsidiary::MaskInitConfig;
use crate::{Error, Result};

/// Hyperparameters of every stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneSchedule {
    pub feature_epochs: usize,
    /// Epochs of mask training per layer.
    pub select_epochs: usize,
    /// Epochs of main-network retraining per layer.
    pub retrain_epochs: usize,
    pub batch_size: usize,
    /// Weight of `‖O‖₁` in the selection objective.
    pub alpha_reg: f64,
    /// Weight of the distillation term in the selection objective.
    pub beta: f64,
    pub temperature: f64,
    /// Constant learning rate of the subsidiary component.
    pub sub_lr: f64,
    pub main_lr: LrSchedule,
    pub rule: Rule,
    pub mask_init: MaskInitConfig,
    pub seed: u64,
}

impl Default for PruneSchedule {
    fn default() -> Self {
        PruneSchedule {
            feature_epochs: 60,
            select_epochs: 10,
            retrain_epochs: 20,
            batch_size: 64,
            alpha_reg: 1e-3,
            beta: 1.0,
            temperature: 1.0,
            sub_lr: 1e-3,
            main_lr: LrSchedule {
                initial: 1e-4,
                decay: 0.1,
                interval: 20,
            },
            rule: Rule::adam(),
            mask_init: MaskInitConfig::default(),
            seed: 0,
        }
    }
}

impl PruneSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if !(self.alpha_reg >= 0.0) || !(self.beta >= 0.0) {
            return Err(Error::invalid("alpha_reg and beta must be non-negative"));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::invalid("temperature must be positive"));
        }
        if !(self.sub_lr > 0.0) || !(self.main_lr.initial > 0.0) {
            return Err(Error::invalid("learning rates must be positive"));
        }
        if !(self.mask_init.sigma > 0.0) || !(0.0..=1.0).contains(&self.mask_init.pnr) {
            return Err(Error::invalid("mask init needs sigma > 0 and pnr in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    FeatureLearning,
    Selection,
    Retrain,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::FeatureLearning => "feature",
            Stage::Selection => "select",
            Stage::Retrain => "retrain",
        }
    }
}

/// One epoch of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub stage: Stage,
    /// Layer under selection or retraining.
    pub layer: Option<usize>,
    pub epoch: usize,
    /// Mean training loss over the epoch's batches.
    pub loss: f64,
    /// Training accuracy over the epoch's batches.
    pub accuracy: f64,
    /// Kept filters across all masked layers at the end of the epoch.
    pub kept: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerReport {
    pub layer: usize,
    pub name: String,
    pub filters: usize,
    /// Ω: pruned filter indices, ascending.
    pub pruned: Vec<usize>,
    /// Selection pruned every filter and the fallback kept the largest `|m|`.
    pub degenerate: bool,
}

impl LayerReport {
    pub fn pfr(&self) -> f64 {
        self.pruned.len() as f64 / self.filters as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneReport {
    pub method: String,
    pub layers: Vec<LayerReport>,
    /// Test error of the unpruned network.
    pub error_before: f64,
    /// Test error after the final retraining.
    pub error_after: f64,
    pub trace: Vec<TraceRow>,
}

impl PruneReport {
    /// Total pruned filters over total original filters of the masked layers.
    pub fn global_pfr(&self) -> f64 {
        let pruned: usize = self.layers.iter().map(|l| l.pruned.len()).sum();
        let total: usize = self.layers.iter().map(|l| l.filters).sum();
        if total == 0 {
            0.0
        } else {
            pruned as f64 / total as f64
        }
    }

    /// Per-layer PFRs keyed by layer id, the input of the MSF baselines.
    pub fn layer_pfrs(&self) -> Vec<(usize, f64)> {
        self.layers.iter().map(|l| (l.layer, l.pfr())).collect()
    }
}

/// Per-layer pruning state read from the masks of `net`.
pub fn mask_report(net: &Network) -> Vec<LayerReport> {
    net.masked_layers()
        .into_iter()
        .map(|l| {
            let layer = &net.layers[l];
            let mask = layer.mask.as_ref().expect("masked layer");
            let pruned = match mask.mode() {
                crate::subsidiary::MaskMode::Bypass => Vec::new(),
                _ => mask.pruned_indices(),
            };
            LayerReport {
                layer: l,
                name: layer.name.clone(),
                filters: mask.len(),
                pruned,
                degenerate: false,
            }
        })
        .collect()
}

/// Seed of a stage's batch order, distinct per stage and layer.
pub(crate) fn stage_seed(seed: u64, stage: Stage, layer: usize) -> u64 {
    let tag = (stage as u64 + 1) << 32 | layer as u64;
    seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}
