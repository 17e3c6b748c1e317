use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ptseg::pointcloud::read_cloud;

fn ptseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptseg")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ptseg(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn report_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key)?.trim().strip_prefix('=')?.trim().parse().ok())
        .unwrap_or_else(|| panic!("{key} missing from report:\n{text}"))
}

fn histogram(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for &l in labels {
        *h.entry(l).or_default() += 1;
    }
    h
}

fn label_lines(path: &Path) -> Vec<usize> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.trim().parse().unwrap()).collect()
}

#[test]
fn synth_train_predict_eval_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scene = d.join("room.bin");
    let scene_ascii = d.join("room.txt");
    let ckpt = d.join("ckpt");
    let pred = d.join("room.labels");
    let rep = d.join("eval.txt");

    let printed = ok(&["synth", "--seed", "3", "--set", "density=40", "--out", p(&scene)]);
    assert!(printed.contains("points"));
    ok(&["synth", "--seed", "3", "--set", "density=40", "--out", p(&scene_ascii)]);
    let cloud_bytes = fs::read(&scene).unwrap();
    let cloud = read_cloud(&cloud_bytes[..]).unwrap();
    let ascii = read_cloud(&fs::read(&scene_ascii).unwrap()[..]).unwrap();
    assert_eq!(cloud.labels(), ascii.labels());

    let train = [
        "train", "--variant", "ms_cu", "--data", p(&scene), "--out", p(&ckpt), "--epochs", "2",
        "--points-per-block", "32", "--set", "point_mlp_widths=16,32", "--set", "block_feature_dim=32",
        "--set", "cu_widths=16", "--set", "head_widths=32", "--set", "ms_groups_per_cloud=8",
    ];
    let log = ok(&train);
    assert_eq!(log.lines().filter(|l| l.starts_with("epoch ")).count(), 2);
    for f in ["model.ckpt", "model.manifest", "train.cfg", "optim.ckpt", "trainer.state"] {
        assert!(ckpt.join(f).exists(), "{f} not written");
    }

    ok(&["predict", "--model", p(&ckpt), "--data", p(&scene), "--out", p(&pred)]);
    let predicted = label_lines(&pred);
    assert_eq!(predicted.len(), cloud.len());
    // predicting twice writes the same file
    let first = fs::read(&pred).unwrap();
    ok(&["predict", "--model", p(&ckpt), "--data", p(&scene), "--out", p(&pred)]);
    assert_eq!(fs::read(&pred).unwrap(), first);

    ok(&["eval", "--pred", p(&pred), "--gt", p(&scene), "--name", "ms_cu", "--out", p(&rep)]);
    let text = fs::read_to_string(&rep).unwrap();
    let miou = report_value(&text, "mean_iou");
    assert!((0.0..=1.0).contains(&miou));
    let pooled = ok(&["report", "--input", p(&rep)]);
    assert_eq!(report_value(&pooled, "mean_iou"), miou);

    // export colors each point by its predicted label
    let colored = d.join("colored.txt");
    ok(&["export", "--data", p(&scene), "--labels", p(&pred), "--out", p(&colored)]);
    let exported = read_cloud(&fs::read(&colored).unwrap()[..]).unwrap();
    assert_eq!(histogram(exported.labels()), histogram(&predicted));
    assert_eq!(exported.len(), cloud.len());

    // nothing above touched the input cloud
    assert_eq!(fs::read(&scene).unwrap(), cloud_bytes);
}

#[test]
fn ground_truth_against_itself_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scene = d.join("room.bin");
    ok(&["synth", "--seed", "1", "--set", "density=20", "--out", p(&scene)]);
    let cloud = read_cloud(&fs::read(&scene).unwrap()[..]).unwrap();
    let labels = d.join("gt.labels");
    ptseg::cli::write_labels(&labels, &cloud, cloud.labels()).unwrap();
    let text = ok(&["eval", "--pred", p(&labels), "--gt", p(&scene)]);
    assert!(text.contains("mean_iou = 1.0000"), "{text}");
    assert!(text.contains("overall_accuracy = 1.0000"));
    // same inputs, same bytes
    assert_eq!(ok(&["eval", "--pred", p(&labels), "--gt", p(&scene)]), text);
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    ok(&["synth", "--seed", "9", "--set", "density=20", "--out", p(&a)]);
    ok(&["synth", "--seed", "9", "--set", "density=20", "--out", p(&b)]);
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn gradcheck_suite_passes() {
    let out = ok(&["gradcheck", "--all"]);
    assert!(out.lines().count() > 5);
    assert!(!out.contains("FAIL"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(ptseg(&["synth", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(ptseg(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ptseg(&["gradcheck"]).status.code(), Some(1));
    let missing = ptseg(&["eval", "--pred", "/nonexistent/a", "--gt", "/nonexistent/b"]);
    assert_eq!(missing.status.code(), Some(2));
}
