use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use bnnprune::analysis::{count_flops, emit_report, Convention, FlopsReport};
use bnnprune::data::{load_cifar10_bin, load_mnist_idx, synth_dataset, Dataset, SynthSpec};
use bnnprune::graph::Network;
use bnnprune::models::{build_with_masks, load_checkpoint, save_checkpoint, Checkpoint, ModelSpec};
use bnnprune::pipeline::{
    compare, evaluate, feature_learning, msf_prune_cascade, msf_prune_layerwise, physical_shrink,
    prune_pipeline, PruneReport, TraceRow,
};

use crate::config::{DatasetId, Mode, RunConfig};

/// Input shape and class count of the configured dataset, without loading it.
pub fn dataset_signature(c: &RunConfig) -> ([usize; 3], usize) {
    match c.dataset {
        DatasetId::Synth => (c.synth_shape, c.synth_classes),
        DatasetId::Mnist => ([1, 28, 28], 10),
        DatasetId::Cifar10 => ([3, 32, 32], 10),
    }
}

/// Loads `(train, test)`; the test set is normalised with the training statistics.
pub fn load_data(c: &RunConfig) -> Result<(Dataset, Dataset)> {
    let dir = &c.data_path;
    let (mut train, mut test) = match c.dataset {
        DatasetId::Synth => {
            let spec = SynthSpec {
                separation: c.synth_separation,
                noise: c.synth_noise,
                ..SynthSpec::blobs(c.synth_classes, c.synth_train + c.synth_test, c.synth_shape)
            };
            synth_dataset(&spec, c.seed)?.split(c.synth_train)
        }
        DatasetId::Mnist => (
            load_mnist_idx(&dir.join("train-images-idx3-ubyte"), &dir.join("train-labels-idx1-ubyte"))?,
            load_mnist_idx(&dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte"))?,
        ),
        DatasetId::Cifar10 => {
            let batches: Vec<_> = (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect();
            (load_cifar10_bin(&batches)?, load_cifar10_bin(&[dir.join("test_batch.bin")])?)
        }
    };
    if c.train_limit > 0 {
        train = train.take(c.train_limit);
    }
    if c.test_limit > 0 {
        test = test.take(c.test_limit);
    }
    if train.is_empty() || test.is_empty() {
        bail!("empty train or test split");
    }
    if c.normalize {
        train.normalize();
        test.apply_normalization(&train.normalization.clone());
    }
    Ok((train, test))
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn metrics_header() -> String {
    "method,epoch,stage,layer,loss,accuracy,kept\n".into()
}

fn metrics_rows(out: &mut String, method: &str, trace: &[TraceRow]) {
    for r in trace {
        let layer = r.layer.map(|l| l.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{method},{},{},{layer},{},{},{}", r.epoch, r.stage.name(), r.loss, r.accuracy, r.kept);
    }
}

/// Per-layer rows followed by a `total` row.
pub fn prune_report_csv(r: &PruneReport) -> String {
    let mut s = String::from("method,layer,name,filters,pruned,pfr,degenerate,pruned_indices,error_before,error_after\n");
    for l in &r.layers {
        let idx = l.pruned.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{idx},,",
            r.method,
            l.layer,
            l.name,
            l.filters,
            l.pruned.len(),
            l.pfr(),
            l.degenerate
        );
    }
    let filters: usize = r.layers.iter().map(|l| l.filters).sum();
    let pruned: usize = r.layers.iter().map(|l| l.pruned.len()).sum();
    let _ = writeln!(
        s,
        "{},total,,{filters},{pruned},{},,,{},{}",
        r.method,
        r.global_pfr(),
        r.error_before,
        r.error_after
    );
    s
}

/// One row per method, per-layer PFR columns in layer order.
pub fn compare_csv(reports: &[&PruneReport]) -> String {
    let mut s = String::from("method,error_before,error_after,global_pfr");
    if let Some(first) = reports.first() {
        for l in &first.layers {
            let _ = write!(s, ",pfr_{}", l.name);
        }
    }
    s.push('\n');
    for r in reports {
        let _ = write!(s, "{},{},{},{}", r.method, r.error_before, r.error_after, r.global_pfr());
        for l in &r.layers {
            let _ = write!(s, ",{}", l.pfr());
        }
        s.push('\n');
    }
    s
}

fn save(out: &Path, file: &str, spec: &ModelSpec, net: &Network, epoch: usize) -> Result<()> {
    let ck = Checkpoint {
        spec: spec.clone(),
        network: net.clone(),
        epoch: epoch as u64,
        rng: None,
    };
    save_checkpoint(&ck, &out.join(file)).with_context(|| format!("saving {file}"))?;
    Ok(())
}

fn flops(c: &RunConfig, net: &Network, out: &Path, stem: &str) -> Result<FlopsReport> {
    let conv = Convention {
        ops_per_mac: c.ops_per_mac,
        ..Convention::default()
    };
    let r = count_flops(net, conv).context("analysis")?;
    emit_report(&r, &out.join(stem)).context("writing flops report")?;
    Ok(r)
}

/// Runs the configured mode and writes its artifacts to `c.out`.
pub fn run(c: &RunConfig) -> Result<()> {
    let out = &c.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(&out.join("config.txt"), c.to_text())?;
    let s = c.schedule();
    let mode = c.mode.id();

    if c.mode == Mode::Analyze {
        let net = if c.checkpoint.as_os_str().is_empty() {
            let (shape, classes) = dataset_signature(c);
            build_with_masks(&c.model_spec(shape, classes), c.seed, &s.mask_init).context("build")?
        } else {
            load_checkpoint(&c.checkpoint)
                .with_context(|| format!("loading {}", c.checkpoint.display()))?
                .network
        };
        let r = flops(c, &net, out, "flops")?;
        println!("effective flops {:.4e}, memory {:.3} Mbit", r.effective_flops, r.memory_bits as f64 / 1e6);
        return Ok(());
    }

    let (train, test) = load_data(c).context("loading dataset")?;
    let spec = c.model_spec(train.sample_shape(), train.classes);
    let mut metrics = metrics_header();

    match c.mode {
        Mode::Analyze => unreachable!(),
        Mode::Train => {
            s.validate()?;
            let mut net = build_with_masks(&spec, s.seed, &s.mask_init).context("build")?;
            let (_, trace) = feature_learning(&mut net, &train, &s).context("feature learning")?;
            metrics_rows(&mut metrics, "train", &trace);
            let e = evaluate(&mut net, &test).context("evaluate")?;
            save(out, "trained.ckpt", &spec, &net, trace.len())?;
            flops(c, &net, out, "flops")?;
            write(&out.join("summary.txt"), format!("test_loss = {}\ntest_error = {}\n", e.loss, e.error))?;
            println!("test error {:.4}", e.error);
        }
        Mode::Prune => {
            let o = prune_pipeline(&spec, &train, &test, &s).context("prune")?;
            metrics_rows(&mut metrics, &o.report.method, &o.report.trace);
            save(out, "trained.ckpt", &spec, &o.trained, 0)?;
            save(out, "pruned.ckpt", &spec, &o.pruned, o.report.trace.len())?;
            write(&out.join("prune_report.csv"), prune_report_csv(&o.report))?;
            flops(c, &o.pruned, out, "flops")?;
            summarize(&o.report);
        }
        Mode::BaselineLayerwise | Mode::BaselineCascade => {
            if !(0.0..1.0).contains(&c.baseline_pfr) {
                bail!("baseline_pfr must be in [0, 1)");
            }
            s.validate()?;
            let mut net = build_with_masks(&spec, s.seed, &s.mask_init).context("build")?;
            let (_, trace) = feature_learning(&mut net, &train, &s).context("feature learning")?;
            metrics_rows(&mut metrics, "feature", &trace);
            let targets: Vec<(usize, f64)> = net.masked_layers().into_iter().map(|l| (l, c.baseline_pfr)).collect();
            let (masked, report) = if c.mode == Mode::BaselineLayerwise {
                msf_prune_layerwise(&net, &targets, &train, &test, &s)
            } else {
                msf_prune_cascade(&net, &targets, &train, &test, &s)
            }
            .context(mode)?;
            let pruned = physical_shrink(&masked).context("shrink")?;
            metrics_rows(&mut metrics, &report.method, &report.trace);
            save(out, "trained.ckpt", &spec, &net, trace.len())?;
            save(out, "pruned.ckpt", &spec, &pruned, trace.len() + report.trace.len())?;
            write(&out.join("prune_report.csv"), prune_report_csv(&report))?;
            flops(c, &pruned, out, "flops")?;
            summarize(&report);
        }
        Mode::Compare => {
            let cmp = compare(&spec, &train, &test, &s).context("compare")?;
            metrics_rows(&mut metrics, &cmp.learned.report.method, &cmp.learned.report.trace);
            metrics_rows(&mut metrics, &cmp.cascade.method, &cmp.cascade.trace);
            metrics_rows(&mut metrics, &cmp.layerwise.method, &cmp.layerwise.trace);
            save(out, "trained.ckpt", &spec, &cmp.learned.trained, 0)?;
            save(out, "learned.ckpt", &spec, &cmp.learned.pruned, 0)?;
            save(out, "cascade.ckpt", &spec, &cmp.cascade_pruned, 0)?;
            save(out, "layerwise.ckpt", &spec, &cmp.layerwise_pruned, 0)?;
            let reports = [&cmp.learned.report, &cmp.cascade, &cmp.layerwise];
            let mut all = String::new();
            for r in reports {
                all.push_str(&prune_report_csv(r));
                summarize(r);
            }
            write(&out.join("prune_report.csv"), all)?;
            write(&out.join("compare.csv"), compare_csv(&reports))?;
            flops(c, &cmp.learned.pruned, out, "flops")?;
        }
    }
    write(&out.join("metrics.csv"), metrics)?;
    Ok(())
}

fn summarize(r: &PruneReport) {
    println!(
        "{}: error {:.4} -> {:.4}, pfr {:.4}",
        r.method,
        r.error_before,
        r.error_after,
        r.global_pfr()
    );
}
