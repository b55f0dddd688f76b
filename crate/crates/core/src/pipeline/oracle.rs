use super::{selection_objective, PruneSchedule};
use crate::data::Dataset;
use crate::graph::Network;
use crate::par;
use crate::subsidiary::{FilterMask, MaskMode};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Largest layer the exhaustive search accepts (`2^12` evaluations).
pub const SEARCH_LIMIT: usize = 12;

/// `Σ_{i ∈ pruned} ‖w_i‖₁ · tau`: bound on `‖Wx − W′x‖₁` for `‖x‖∞ <= tau`,
/// where `W′` is `W` with the pruned rows zeroed.
///
/// Exact when the sum and product are representable; otherwise rounded outward so
/// the result never falls below the real-valued bound.
pub fn l1_perturbation_bound(w: &Tensor, pruned_rows: &[usize], tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau must be positive"));
    }
    if let Some(&r) = pruned_rows.iter().find(|&&r| r >= w.dim0()) {
        return Err(Error::invalid(format!("row {r} out of range")));
    }
    let mut sum = 0.0f64;
    let mut exact = true;
    let mut terms = 0usize;
    for &r in pruned_rows {
        for v in w.outer(r) {
            let a = v.abs();
            let s = sum + a;
            let bb = s - sum;
            exact &= (sum - (s - bb)) + (a - bb) == 0.0;
            sum = s;
            terms += 1;
        }
    }
    let p = sum * tau;
    exact &= sum.mul_add(tau, -p) == 0.0;
    if exact {
        return Ok(p);
    }
    // Recursive summation of n non-negative terms has relative error below (n - 1)u.
    let margin = 1.0 + (terms as f64 + 2.0) * f64::EPSILON;
    Ok((p * margin).next_up())
}

/// `W′`: `w` with `rows` set to zero.
pub fn zero_rows(w: &Tensor, rows: &[usize]) -> Tensor {
    let mut out = w.clone();
    for &r in rows {
        out.outer_mut(r).iter_mut().for_each(|v| *v = 0.0);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskSearch {
    /// Kept filters of the minimiser, ascending.
    pub best_kept: Vec<usize>,
    pub best_value: f64,
    /// Objective of every mask; bit `n` of the index set means filter `n` is kept.
    pub table: Vec<f64>,
}

/// Evaluates the selection objective of layer `i` for every `{0,1}^N` mask.
/// Other masks are used as they are. Ties go to the lowest mask index.
pub fn exhaustive_mask_search(
    net: &Network,
    i: usize,
    data: &Dataset,
    teacher: Option<&Tensor>,
    s: &PruneSchedule,
) -> Result<MaskSearch> {
    let n = net
        .layers
        .get(i)
        .and_then(|l| l.mask.as_ref())
        .ok_or_else(|| Error::invalid(format!("layer {i} has no mask")))?
        .len();
    if n > SEARCH_LIMIT {
        return Err(Error::SearchTooLarge {
            filters: n,
            limit: SEARCH_LIMIT,
        });
    }
    let kept_of = |bits: usize| (0..n).filter(|b| bits >> b & 1 == 1).collect::<Vec<usize>>();
    let values = par::map_range(1 << n, |bits| {
        let mut trial = net.clone();
        let mut mask = FilterMask::keeping(n, &kept_of(bits));
        mask.set_mode(MaskMode::Bin);
        trial.layers[i].mask = Some(mask);
        selection_objective(&mut trial, i, data, teacher, s).map(|o| o.total)
    });
    let table = values.into_iter().collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (bits, &v) in table.iter().enumerate() {
        if v < table[best] {
            best = bits;
        }
    }
    Ok(MaskSearch {
        best_kept: kept_of(best),
        best_value: table[best],
        table,
    })
}
