use super::stages::{prepare_retrain, prune_trained, retrain_after, PipelineOutcome};
use super::{evaluate, mask_report, physical_shrink, PruneReport, PruneSchedule};
use crate::binops::{gate_weights, ScalingFactors};
use crate::data::Dataset;
use crate::graph::Network;
use crate::models::{build_with_masks, ModelSpec};
use crate::subsidiary::FilterMask;
use crate::{Error, Result};

/// Filter order by ascending scaling factor; ties go to the lower index.
pub fn msf_rank(alpha: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..alpha.len()).collect();
    idx.sort_by(|&a, &b| alpha[a].total_cmp(&alpha[b]).then(a.cmp(&b)));
    idx
}

/// Scaling factors the layer currently applies (stored, or `mean|Ŵ_n|`).
pub fn layer_alpha(net: &Network, l: usize) -> Result<Vec<f64>> {
    let layer = &net.layers[l];
    if let Some(a) = &layer.fixed_alpha {
        return Ok(a.clone());
    }
    let gated = gate_weights(&layer.weight, layer.weight_gate().as_deref())?;
    Ok(ScalingFactors::from_weights(&gated).as_slice().to_vec())
}

fn prune_count(filters: usize, pfr: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&pfr) {
        return Err(Error::invalid(format!("PFR target {pfr} must lie in [0, 1)")));
    }
    Ok((pfr * filters as f64).round() as usize)
}

fn validate_targets(net: &Network, targets: &[(usize, f64)]) -> Result<()> {
    for &(l, pfr) in targets {
        if net.layers.get(l).and_then(|x| x.mask.as_ref()).is_none() {
            return Err(Error::invalid(format!("layer {l} has no mask")));
        }
        prune_count(1, pfr)?;
    }
    Ok(())
}

/// Masks the `round(pfr · N)` lowest-alpha filters of layer `l` (frozen, `Bin` mode).
fn msf_mask(net: &mut Network, l: usize, pfr: f64) -> Result<()> {
    let alpha = layer_alpha(net, l)?;
    let k = prune_count(alpha.len(), pfr)?;
    let mut kept = msf_rank(&alpha)[k..].to_vec();
    kept.sort_unstable();
    net.layers[l].mask = Some(FilterMask::keeping(alpha.len(), &kept));
    Ok(())
}

fn finish(
    mut net: Network,
    trained: &Network,
    method: &str,
    test: &Dataset,
    trace: Vec<super::TraceRow>,
) -> Result<(Network, PruneReport)> {
    net.set_all_trainable(false);
    let error_before = evaluate(&mut trained.clone(), test)?.error;
    let error_after = evaluate(&mut net, test)?.error;
    let report = PruneReport {
        method: method.into(),
        layers: mask_report(&net),
        error_before,
        error_after,
        trace,
    };
    Ok((net, report))
}

/// Prunes every target layer at once by scaling factor, then retrains once for
/// `retrain_epochs ×` (number of target layers) epochs with every layer from the
/// first target upward trainable.
pub fn msf_prune_layerwise(
    trained: &Network,
    targets: &[(usize, f64)],
    train: &Dataset,
    test: &Dataset,
    s: &PruneSchedule,
) -> Result<(Network, PruneReport)> {
    validate_targets(trained, targets)?;
    let mut net = trained.clone();
    for &(l, pfr) in targets {
        msf_mask(&mut net, l, pfr)?;
    }
    let mut trace = Vec::new();
    if let Some(first) = targets.iter().map(|t| t.0).min() {
        prepare_retrain(&mut net, first);
        trace = retrain_after(&mut net, first, train, s, s.retrain_epochs * targets.len())
            .map_err(|e| e.in_stage("msf-layerwise retrain"))?;
    }
    finish(net, trained, "msf-layerwise", test, trace)
}

/// Bottom-up: prune one target layer by scaling factor, retrain it and the layers
/// above for `retrain_epochs`, then move to the next.
pub fn msf_prune_cascade(
    trained: &Network,
    targets: &[(usize, f64)],
    train: &Dataset,
    test: &Dataset,
    s: &PruneSchedule,
) -> Result<(Network, PruneReport)> {
    validate_targets(trained, targets)?;
    let mut net = trained.clone();
    let mut order = targets.to_vec();
    order.sort_by_key(|t| t.0);
    let mut trace = Vec::new();
    for (l, pfr) in order {
        msf_mask(&mut net, l, pfr)?;
        prepare_retrain(&mut net, l);
        trace.extend(
            retrain_after(&mut net, l, train, s, s.retrain_epochs)
                .map_err(|e| e.in_stage(format!("msf-cascade retrain {}", net.layers[l].name)))?,
        );
    }
    finish(net, trained, "msf-cascade", test, trace)
}

/// Learned method and both MSF baselines at matched per-layer PFRs.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub learned: PipelineOutcome,
    pub layerwise: PruneReport,
    pub cascade: PruneReport,
    pub layerwise_pruned: Network,
    pub cascade_pruned: Network,
}

/// Trains once, runs the learned pipeline and feeds its per-layer PFRs to both
/// baselines, which start from the same trained network.
pub fn compare(spec: &ModelSpec, train: &Dataset, test: &Dataset, s: &PruneSchedule) -> Result<Comparison> {
    s.validate()?;
    let mut net = build_with_masks(spec, s.seed, &s.mask_init).map_err(|e| e.in_stage("build"))?;
    let (teacher, trace) = super::feature_learning(&mut net, train, s).map_err(|e| e.in_stage("feature learning"))?;
    let trained = net.clone();
    let learned = prune_trained(net, trained.clone(), teacher, train, test, s, trace)?;
    let targets = learned.report.layer_pfrs();
    let (lw, layerwise) = msf_prune_layerwise(&trained, &targets, train, test, s)?;
    let (cc, cascade) = msf_prune_cascade(&trained, &targets, train, test, s)?;
    Ok(Comparison {
        learned,
        layerwise,
        cascade,
        layerwise_pruned: physical_shrink(&lw).map_err(|e| e.in_stage("shrink"))?,
        cascade_pruned: physical_shrink(&cc).map_err(|e| e.in_stage("shrink"))?,
    })
}
