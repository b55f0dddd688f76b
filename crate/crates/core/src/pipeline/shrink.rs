use crate::binops::{gate_weights, ScalingFactors};
use crate::graph::{Network, Op, Precision};
use crate::subsidiary::MaskMode;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Consumer {
    Conv(usize),
    /// Linear layer reading pooled channels.
    Linear(usize),
}

/// Layers that read the gated output channels of masked layer `l`.
fn consumers(net: &Network, l: usize) -> Result<Vec<Consumer>> {
    let gate = net
        .nodes
        .iter()
        .position(|n| n.op == Op::Gate(l))
        .ok_or_else(|| Error::invalid(format!("masked layer {l} has no gate node")))?;
    let mut reach = vec![false; net.nodes.len()];
    reach[gate] = true;
    let mut out = Vec::new();
    for id in gate + 1..net.nodes.len() {
        let node = &net.nodes[id];
        if !node.inputs.iter().any(|&i| reach[i]) {
            continue;
        }
        match node.op {
            Op::Sign | Op::MaxPool(_) | Op::GlobalAvgPool => reach[id] = true,
            Op::Conv(k) => out.push(Consumer::Conv(k)),
            Op::Linear(k) => {
                if net.nodes[node.inputs[0]].op != Op::GlobalAvgPool {
                    return Err(Error::invalid(format!(
                        "linear layer {k} reads unpooled channels of layer {l}"
                    )));
                }
                out.push(Consumer::Linear(k));
            }
            ref op => {
                return Err(Error::invalid(format!(
                    "cannot shrink layer {l}: its channels reach {op:?}"
                )))
            }
        }
    }
    Ok(out)
}

/// Removes every pruned filter (binarised mask entry 0) together with its batch norm
/// statistics and the matching input channels of the consuming layers.
///
/// Binary consumers losing input channels get their current scaling factors stored
/// in `fixed_alpha`, so the shrunk network computes exactly what the masked one does.
pub fn physical_shrink(net: &Network) -> Result<Network> {
    let mut kept_out: Vec<Option<Vec<usize>>> = vec![None; net.layers.len()];
    let mut kept_in: Vec<Option<Vec<usize>>> = vec![None; net.layers.len()];
    for l in net.masked_layers() {
        let mask = net.layers[l].mask.as_ref().unwrap();
        if mask.mode() == MaskMode::Bypass {
            continue;
        }
        if mask.mode() == MaskMode::Iden {
            return Err(Error::MaskMode {
                mode: "Iden",
                required: "Bin or Bypass",
            });
        }
        let kept = mask.kept_indices();
        if kept.len() == mask.len() {
            continue;
        }
        if kept.is_empty() {
            return Err(Error::invalid(format!("every filter of layer {l} is pruned")));
        }
        for c in consumers(net, l)? {
            let k = match c {
                Consumer::Conv(k) | Consumer::Linear(k) => k,
            };
            if kept_in[k].is_some() {
                return Err(Error::invalid(format!("layer {k} reads two pruned layers")));
            }
            kept_in[k] = Some(kept.clone());
        }
        kept_out[l] = Some(kept);
    }

    let mut out = net.clone();
    for k in 0..net.layers.len() {
        let src = &net.layers[k];
        let dst = &mut out.layers[k];
        if let Some(cols) = &kept_in[k] {
            if src.precision == Precision::Binary && src.fixed_alpha.is_none() {
                let gate = src.weight_gate();
                let gated = gate_weights(&src.weight, gate.as_deref())?;
                dst.fixed_alpha = Some(ScalingFactors::from_weights(&gated).as_slice().to_vec());
            }
            dst.weight = dst.weight.select_axis1(cols);
        }
        if let Some(rows) = &kept_out[k] {
            dst.weight = dst.weight.select_outer(rows);
            let pick = |v: &[f64]| rows.iter().map(|&r| v[r]).collect::<Vec<f64>>();
            if let Some(b) = dst.bias.as_mut() {
                *b = pick(b);
            }
            if let Some(a) = dst.fixed_alpha.as_mut() {
                *a = pick(a);
            }
            if let Some(bn) = dst.bn.as_mut() {
                bn.running_mean = pick(&bn.running_mean);
                bn.running_var = pick(&bn.running_var);
            }
            if let Some(m) = dst.mask.as_mut() {
                let vals = pick(m.values());
                let mut fresh = crate::subsidiary::FilterMask::from_values(vals, m.mode());
                fresh.set_trainable(m.trainable());
                *m = fresh;
            }
        }
    }
    Ok(out)
}
