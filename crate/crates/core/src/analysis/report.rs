use std::fmt::Write as _;
use std::path::Path;

use super::FlopsReport;
use crate::graph::Precision;
use crate::{Error, Result};

fn precision(p: Precision) -> &'static str {
    match p {
        Precision::Full => "fp",
        Precision::Binary => "binary",
    }
}

pub fn flops_table(r: &FlopsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<24} {:>7} {:>14} {:>14} {:>10} {:>12}", "layer", "prec", "ops", "effective", "params", "memory_bits");
    for l in &r.layers {
        let _ = writeln!(
            s,
            "{:<24} {:>7} {:>14.0} {:>14.1} {:>10} {:>12}",
            l.name,
            precision(l.precision),
            l.ops,
            l.effective,
            l.params,
            l.memory_bits
        );
    }
    let _ = writeln!(s, "ops_per_mac        {}", r.convention.ops_per_mac);
    let _ = writeln!(s, "effective_flops    {:.6e}", r.effective_flops);
    let _ = writeln!(s, "reference_flops    {:.6e}", r.reference_flops);
    let _ = writeln!(s, "speedup            {:.3}", r.speedup);
    let _ = writeln!(s, "memory_mbit        {:.3}", r.memory_bits as f64 / 1e6);
    let _ = writeln!(s, "reference_mbit     {:.3}", r.reference_memory_bits as f64 / 1e6);
    let _ = writeln!(s, "memory_saving      {:.3}", r.memory_saving);
    s
}

pub fn flops_csv(r: &FlopsReport) -> String {
    let mut s = String::from("layer,precision,ops,effective,params,memory_bits\n");
    for l in &r.layers {
        let _ = writeln!(s, "{},{},{},{},{},{}", l.name, precision(l.precision), l.ops, l.effective, l.params, l.memory_bits);
    }
    let _ = writeln!(s, "total,,{},{},,{}", r.fp_ops + r.binary_ops, r.effective_flops, r.memory_bits);
    let _ = writeln!(s, "reference,,{},{},,{}", r.reference_flops, r.reference_flops, r.reference_memory_bits);
    s
}

/// Writes `<stem>.txt` (aligned table) and `<stem>.csv`.
pub fn emit_report(r: &FlopsReport, stem: &Path) -> Result<()> {
    for (ext, body) in [("txt", flops_table(r)), ("csv", flops_csv(r))] {
        let path = stem.with_extension(ext);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
