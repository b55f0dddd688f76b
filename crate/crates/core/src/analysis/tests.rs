use super::*;
use crate::models::{build_with_masks, parameter_census, Arch, ModelSpec};
use crate::pipeline::{LayerReport, PruneReport};
use crate::subsidiary::{MaskInitConfig, MaskMode};
use crate::tensor::Tensor;

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol * target
}

#[test]
fn hand_count_binary_pointwise() {
    let spec = CostSpec {
        layers: vec![CostLayer {
            name: "b".into(),
            precision: Precision::Binary,
            in_channels: 64,
            out_channels: 64,
            kernel: 1,
            out_height: 8,
            out_width: 8,
            bias: false,
            bn_channels: 0,
        }],
    };
    let two = Convention { ops_per_mac: 2.0, ..Convention::default() };
    assert_eq!(count_spec(&spec, two).effective_flops, 8192.0);
    assert_eq!(count_spec(&spec, Convention::default()).effective_flops, 4096.0);
}

#[test]
fn resnet18_table_figures() {
    let fp = count_spec(&resnet18_imagenet(false), Convention::default());
    let xnor = count_spec(&resnet18_imagenet(true), Convention::default());
    assert!(within(fp.effective_flops, 1.81e9, 0.10), "{}", fp.effective_flops);
    assert!(within(xnor.effective_flops, 1.67e8, 0.25), "{}", xnor.effective_flops);
    assert!(within(fp.memory_bits as f64, 374.1e6, 0.15), "{}", fp.memory_bits);
    assert!(within(xnor.memory_bits as f64, 33.70e6, 0.15), "{}", xnor.memory_bits);
    assert_eq!(xnor.reference_flops, fp.effective_flops);
    assert_eq!(xnor.reference_memory_bits, fp.memory_bits);
    assert!(xnor.speedup > 10.0);
}

fn masked(arch: Arch) -> Network {
    let spec = match arch {
        Arch::VggMini => ModelSpec::new(arch, vec![4, 5, 6, 5, 7], [3, 16, 16], 4),
        _ => ModelSpec::new(arch, vec![6, 5, 7], [3, 8, 8], 4),
    };
    build_with_masks(&spec, 3, &MaskInitConfig::default()).unwrap()
}

fn prune(net: &mut Network, layer: usize, filter: usize) {
    let m = net.layers[layer].mask.as_mut().unwrap();
    m.set_mode(MaskMode::Bin);
    m.values_mut()[filter] = -1.0;
}

#[test]
fn census_matches_models() {
    for arch in [Arch::NinMini, Arch::VggMini, Arch::ResnetMini] {
        let net = masked(arch);
        let spec = CostSpec::from_network(&net).unwrap();
        let ours: Vec<usize> = spec.layers.iter().map(CostLayer::params).collect();
        assert_eq!(ours, parameter_census(&net), "{arch:?}");
    }
}

#[test]
fn pruning_monotone() {
    for arch in [Arch::NinMini, Arch::VggMini, Arch::ResnetMini] {
        let mut net = masked(arch);
        for &l in &net.masked_layers() {
            let m = net.layers[l].mask.as_mut().unwrap();
            m.set_mode(MaskMode::Bin);
            m.values_mut().iter_mut().for_each(|v| *v = 1.0);
        }
        let mut last = count_flops(&net, Convention::default()).unwrap();
        for l in net.masked_layers() {
            for f in 0..net.layers[l].out_channels() - 1 {
                prune(&mut net, l, f);
                let now = count_flops(&net, Convention::default()).unwrap();
                if net.layers[l].precision == Precision::Binary {
                    assert!(now.effective_flops < last.effective_flops, "{arch:?} {l} {f}");
                }
                assert!(now.effective_flops <= last.effective_flops);
                assert!(now.memory_bits < last.memory_bits);
                assert_eq!(now.memory_bits, count_memory_bits(&net).unwrap());
                last = now;
            }
        }
    }
}

#[test]
fn iden_counts_unpruned() {
    let net = masked(Arch::NinMini);
    let base = count_flops(&net, Convention::default()).unwrap();
    let mut iden = net.clone();
    for l in iden.masked_layers() {
        iden.layers[l].mask.as_mut().unwrap().set_mode(MaskMode::Iden);
    }
    assert_eq!(count_flops(&iden, Convention::default()).unwrap(), base);
}

#[test]
fn unresolved_shapes_rejected() {
    let mut net = masked(Arch::NinMini);
    net.input_shape = [3, 1, 1];
    assert!(count_flops(&net, Convention::default()).is_err());
    let mut net = masked(Arch::NinMini);
    let l = net.masked_layers()[1];
    net.layers[l].weight = Tensor::zeros(&[net.layers[l].out_channels(), 1, 3, 3]);
    assert!(count_flops(&net, Convention::default()).is_err());
}

#[test]
fn pfr_of_unpruned_is_zero() {
    let r = PruneReport {
        method: "none".into(),
        layers: vec![LayerReport { layer: 0, name: "c".into(), filters: 8, pruned: vec![], degenerate: false }],
        error_before: 0.0,
        error_after: 0.0,
        trace: vec![],
    };
    assert_eq!(pfr(&r), 0.0);
}

#[test]
fn emit_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let r = count_spec(&resnet18_imagenet(true), Convention::default());
    emit_report(&r, &dir.path().join("flops")).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("flops.csv")).unwrap();
    assert!(csv.starts_with("layer,precision"));
    assert_eq!(csv.lines().count(), r.layers.len() + 3);
    assert!(std::fs::read_to_string(dir.path().join("flops.txt")).unwrap().contains("speedup"));
    assert!(emit_report(&r, &dir.path().join("missing/flops")).is_err());
}
