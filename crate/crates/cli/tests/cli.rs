use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 8] = [
    "feature_epochs=2",
    "select_epochs=1",
    "retrain_epochs=1",
    "synth_train=48",
    "synth_test=24",
    "synth_shape=3x8x8",
    "main_lr=0.01",
    "widths=4,4,4",
];

fn bnnprune(args: &[&str], sets: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bnnprune"));
    cmd.args(args);
    for s in sets {
        cmd.args(["--set", s]);
    }
    cmd.output().unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn rerunning_effective_config_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let out = bnnprune(&["--mode", "prune", "--out", a.to_str().unwrap()], &SMALL);
    assert!(out.status.success());
    let b = dir.path().join("b");
    let out = bnnprune(&["--config", a.join("config.txt").to_str().unwrap(), "--out", b.to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(files(&a), files(&b));
    for f in files(&a).iter().filter(|f| *f != "config.txt") {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let metrics = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("method,epoch,stage,layer,loss,accuracy,kept\n"));
    assert!(metrics.contains(",select,") && metrics.contains(",retrain,"));
}

#[test]
fn analyze_writes_only_the_flops_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = bnnprune(&["--mode", "analyze", "--out", dir.path().to_str().unwrap()], &[]);
    assert!(out.status.success());
    assert_eq!(files(dir.path()), ["config.txt", "flops.csv", "flops.txt"]);
}

#[test]
fn analyze_reads_a_pruned_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert!(bnnprune(&["--mode", "prune", "--out", run.to_str().unwrap()], &SMALL).status.success());
    let ck = format!("checkpoint={}", run.join("pruned.ckpt").display());
    let an = dir.path().join("an");
    assert!(bnnprune(&["--mode", "analyze", "--out", an.to_str().unwrap()], &[&ck]).status.success());
    assert_eq!(std::fs::read(run.join("flops.csv")).unwrap(), std::fs::read(an.join("flops.csv")).unwrap());
}

#[test]
fn compare_has_one_row_per_method() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bnnprune(&["--mode", "compare", "--out", dir.path().to_str().unwrap()], &SMALL).status.success());
    let text = std::fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    let methods: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods, ["learned", "msf-cascade", "msf-layerwise"]);
    let pfr: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert!(pfr.iter().all(|p| *p == pfr[0]));
}

#[test]
fn errors_exit_nonzero_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = bnnprune(&["--out", d], &["alpha_regg=1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown config key `alpha_regg`"));

    let out = bnnprune(&["--out", d], &["dataset=mnist", "data_path=/nonexistent"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("loading dataset"));

    let out = bnnprune(&["--mode", "prune", "--out", d], &["batch_size=0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("batch_size"));

    let out = bnnprune(&["--mode", "baseline-cascade", "--out", d], &["baseline_pfr=1.0"]);
    assert!(!out.status.success());
}
