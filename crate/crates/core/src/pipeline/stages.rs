use super::train::{kept_filters, main_optimizer, run_epoch, sub_optimizer, Loss};
use super::{
    evaluate, mask_report, physical_shrink, predict, selection_objective, PruneReport,
    PruneSchedule, Stage, TraceRow,
};
use crate::data::Dataset;
use crate::graph::Network;
use crate::models::{build_with_masks, ModelSpec};
use crate::subsidiary::{FilterMask, MaskMode};
use crate::tensor::Tensor;
use crate::{Error, Result};

fn freeze_err(msg: String) -> Error {
    Error::FreezeState(msg)
}

/// Trains the main network with every mask bypassed and frozen, then captures
/// the teacher logits on `train` (eval mode).
pub fn feature_learning(
    net: &mut Network,
    train: &Dataset,
    s: &PruneSchedule,
) -> Result<(Tensor, Vec<TraceRow>)> {
    if train.is_empty() {
        return Err(Error::invalid("feature learning needs a non-empty dataset"));
    }
    for l in net.masked_layers() {
        let m = net.layers[l].mask.as_ref().unwrap();
        if m.mode() != MaskMode::Bypass || m.trainable() {
            return Err(freeze_err(format!("mask of layer {l} must be bypassed and frozen")));
        }
    }
    if let Some(l) = (0..net.layers.len()).find(|&l| !net.layers[l].trainable) {
        return Err(freeze_err(format!("main layer {l} must be trainable")));
    }
    let mut opt = main_optimizer(s);
    let mut trace = Vec::with_capacity(s.feature_epochs);
    for epoch in 0..s.feature_epochs {
        trace.push(run_epoch(net, train, &mut opt, &Loss::Task, s, Stage::FeatureLearning, None, epoch)?);
    }
    Ok((predict(net, train)?, trace))
}

/// Puts `net` in the selection state for masked layer `i`: main frozen, earlier
/// masks binarised and frozen, mask `i` binarised and trainable, later masks bypassed.
pub fn prepare_selection(net: &mut Network, i: usize) -> Result<()> {
    if net.layers.get(i).and_then(|l| l.mask.as_ref()).is_none() {
        return Err(Error::invalid(format!("layer {i} has no mask")));
    }
    net.set_all_trainable(false);
    for l in net.masked_layers() {
        let m = net.layers[l].mask.as_mut().unwrap();
        match l.cmp(&i) {
            std::cmp::Ordering::Less => {
                m.set_mode(MaskMode::Bin);
                m.set_trainable(false);
            }
            std::cmp::Ordering::Equal => {
                m.set_mode(MaskMode::Bin);
                m.set_trainable(true);
            }
            std::cmp::Ordering::Greater => {
                m.set_mode(MaskMode::Bypass);
                m.set_trainable(false);
            }
        }
    }
    Ok(())
}

/// Puts `net` in the retraining state for layer `i`: masks frozen, main layers
/// `j < i` frozen, `j >= i` trainable.
pub fn prepare_retrain(net: &mut Network, i: usize) {
    net.set_all_masks(None, false);
    for (l, layer) in net.layers.iter_mut().enumerate() {
        layer.trainable = l >= i;
    }
}

fn check_selection_state(net: &Network, i: usize) -> Result<()> {
    if let Some(l) = (0..net.layers.len()).find(|&l| net.layers[l].trainable) {
        return Err(freeze_err(format!("main layer {l} must be frozen during selection")));
    }
    let mut seen = false;
    for l in net.masked_layers() {
        let m = net.layers[l].mask.as_ref().unwrap();
        let ok = match l.cmp(&i) {
            std::cmp::Ordering::Less => m.mode() == MaskMode::Bin && !m.trainable(),
            std::cmp::Ordering::Equal => {
                seen = true;
                m.mode() == MaskMode::Bin && m.trainable()
            }
            std::cmp::Ordering::Greater => m.mode() == MaskMode::Bypass && !m.trainable(),
        };
        if !ok {
            return Err(freeze_err(format!(
                "mask of layer {l} is {} (trainable: {}) while selecting layer {i}",
                m.mode().name(),
                m.trainable()
            )));
        }
    }
    if !seen {
        return Err(Error::invalid(format!("layer {i} has no mask")));
    }
    Ok(())
}

/// Result of selecting one layer's filters.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub mask: FilterMask,
    /// Selection objective of the returned mask on the training set.
    pub objective: f64,
    pub degenerate: bool,
    pub trace: Vec<TraceRow>,
}

/// Trains mask `i` for the scheduled epochs under the selection objective.
///
/// The objective is evaluated on the whole training set before training and after
/// every epoch; the best mask seen is kept. If it prunes every filter, the filter
/// with the largest `|m|` is restored and the result is flagged degenerate.
/// On return mask `i` is frozen.
pub fn select_layer(
    net: &mut Network,
    i: usize,
    train: &Dataset,
    teacher: Option<&Tensor>,
    s: &PruneSchedule,
) -> Result<Selection> {
    check_selection_state(net, i)?;
    if train.is_empty() {
        return Err(Error::invalid("selection needs a non-empty dataset"));
    }
    let mut opt = sub_optimizer(s);
    let mut best = selection_objective(net, i, train, teacher, s)?.total;
    let mut best_mask = net.layers[i].mask.clone().unwrap();
    let mut trace = Vec::with_capacity(s.select_epochs);
    let loss = Loss::Select { layer: i, teacher };
    for epoch in 0..s.select_epochs {
        trace.push(run_epoch(net, train, &mut opt, &loss, s, Stage::Selection, Some(i), epoch)?);
        let obj = selection_objective(net, i, train, teacher, s)?.total;
        if obj < best {
            best = obj;
            best_mask = net.layers[i].mask.clone().unwrap();
        }
    }
    let mut degenerate = false;
    if best_mask.kept_indices().is_empty() {
        let m = best_mask.values_mut();
        let mut keep = 0;
        for n in 1..m.len() {
            if m[n].abs() > m[keep].abs() {
                keep = n;
            }
        }
        m[keep] = m[keep].abs();
        degenerate = true;
    }
    best_mask.set_trainable(false);
    net.layers[i].mask = Some(best_mask.clone());
    if degenerate {
        best = selection_objective(net, i, train, teacher, s)?.total;
    }
    Ok(Selection {
        mask: best_mask,
        objective: best,
        degenerate,
        trace,
    })
}

/// Fine-tunes main layers `j >= i` with every mask frozen.
pub fn retrain_after(
    net: &mut Network,
    i: usize,
    train: &Dataset,
    s: &PruneSchedule,
    epochs: usize,
) -> Result<Vec<TraceRow>> {
    for (l, layer) in net.layers.iter().enumerate() {
        if layer.trainable != (l >= i) {
            return Err(freeze_err(format!(
                "main layer {l} must be {} when retraining after layer {i}",
                if l >= i { "trainable" } else { "frozen" }
            )));
        }
        if layer.mask.as_ref().is_some_and(FilterMask::trainable) {
            return Err(freeze_err(format!("mask of layer {l} must be frozen during retraining")));
        }
    }
    let mut opt = main_optimizer(s);
    (0..epochs)
        .map(|epoch| run_epoch(net, train, &mut opt, &Loss::Task, s, Stage::Retrain, Some(i), epoch))
        .collect()
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    /// Main network after feature learning, masks bypassed.
    pub trained: Network,
    /// Teacher logits on the training set.
    pub teacher: Tensor,
    /// Final network with masks applied.
    pub masked: Network,
    /// `masked` with pruned filters physically removed.
    pub pruned: Network,
    pub report: PruneReport,
}

/// Runs feature learning, then selection and retraining for every masked layer bottom-up.
pub fn prune_pipeline(
    spec: &ModelSpec,
    train: &Dataset,
    test: &Dataset,
    s: &PruneSchedule,
) -> Result<PipelineOutcome> {
    s.validate()?;
    let mut net = build_with_masks(spec, s.seed, &s.mask_init).map_err(|e| e.in_stage("build"))?;
    let (teacher, trace) =
        feature_learning(&mut net, train, s).map_err(|e| e.in_stage("feature learning"))?;
    let trained = net.clone();
    prune_trained(net, trained, teacher, train, test, s, trace)
}

/// Pruning stages on an already trained network.
pub(crate) fn prune_trained(
    mut net: Network,
    trained: Network,
    teacher: Tensor,
    train: &Dataset,
    test: &Dataset,
    s: &PruneSchedule,
    mut trace: Vec<TraceRow>,
) -> Result<PipelineOutcome> {
    let error_before = evaluate(&mut net, test).map_err(|e| e.in_stage("evaluate"))?.error;
    let mut degenerate = Vec::new();
    for i in net.masked_layers() {
        let name = net.layers[i].name.clone();
        prepare_selection(&mut net, i).map_err(|e| e.in_stage(format!("select {name}")))?;
        let sel = select_layer(&mut net, i, train, Some(&teacher), s)
            .map_err(|e| e.in_stage(format!("select {name}")))?;
        if sel.degenerate {
            degenerate.push(i);
        }
        trace.extend(sel.trace);
        prepare_retrain(&mut net, i);
        trace.extend(
            retrain_after(&mut net, i, train, s, s.retrain_epochs)
                .map_err(|e| e.in_stage(format!("retrain {name}")))?,
        );
    }
    net.set_all_trainable(false);
    let error_after = evaluate(&mut net, test).map_err(|e| e.in_stage("evaluate"))?.error;
    let mut layers = mask_report(&net);
    for l in &mut layers {
        l.degenerate = degenerate.contains(&l.layer);
    }
    let pruned = physical_shrink(&net).map_err(|e| e.in_stage("shrink"))?;
    debug_assert_eq!(kept_filters(&net), layers.iter().map(|l| l.filters - l.pruned.len()).sum::<usize>());
    Ok(PipelineOutcome {
        trained,
        teacher,
        masked: net,
        pruned,
        report: PruneReport {
            method: "learned".into(),
            layers,
            error_before,
            error_after,
            trace,
        },
    })
}
