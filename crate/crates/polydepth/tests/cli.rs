//! The binary end to end: determinism, exit codes, command examples.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polydepth::kitti::{parse_labels, parse_predictions};
use polydepth::sidecar::parse_polygons;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_polydepth"));
    c.env_remove("POLYDEPTH_DATASET_ROOT").env_remove("RUST_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file under `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn synth(tmp: &TempDir, frames: u32) -> PathBuf {
    let ds = tmp.path().join("ds");
    ok(&["synth", "--frames", &frames.to_string(), "--seed", "11", "--out", s(&ds)]);
    ds
}

fn report_aps(dir: &Path) -> Vec<f64> {
    let j: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    j["entries"].as_array().unwrap().iter().map(|e| e["ap"].as_f64().unwrap()).collect()
}

#[test]
fn every_command_is_byte_identical_across_runs_and_worker_counts() {
    let tmp = TempDir::new().unwrap();
    let ds = synth(&tmp, 12);
    let again = tmp.path().join("ds2");
    ok(&["synth", "--frames", "12", "--seed", "11", "--out", s(&again)]);
    assert_eq!(snapshot(&ds), snapshot(&again));

    type Args = Vec<String>;
    let commands: Vec<(&str, Args)> = vec![
        ("project", vec!["--sigma-px".into(), "1.5".into()]),
        ("recover", vec!["--sigma-px".into(), "1".into(), "--sigma-height".into(), "0.1".into(), "--refine".into(), "oracle".into(), "--residual-noise".into(), "0.1,0.05,0.02".into()]),
        ("bev", vec![]),
        ("benchmark", vec!["--sigma-px-list".into(), "0,1".into(), "--sigma-height-list".into(), "0,0.1".into(), "--ensemble".into(), "2".into(), "--svg".into()]),
    ];
    for (cmd, extra) in &commands {
        let mut outs = Vec::new();
        for (i, jobs) in ["1", "4", "4"].iter().enumerate() {
            let out = tmp.path().join(format!("{cmd}{i}"));
            let mut args: Vec<&str> = vec![cmd, "--dataset-root", s(&ds), "--seed", "5", "--jobs", jobs, "--out", s(&out)];
            args.extend(extra.iter().map(|a| a.as_str()));
            let o = ok(&args);
            outs.push((snapshot(&out), o.stdout));
        }
        assert!(!outs[0].0.is_empty(), "{cmd} wrote nothing");
        assert_eq!(outs[0], outs[1], "{cmd}: jobs 1 vs 4");
        assert_eq!(outs[1], outs[2], "{cmd}: rerun");
    }
    let pred = tmp.path().join("recover0/refined");
    let mut evals = Vec::new();
    for i in 0..2 {
        let out = tmp.path().join(format!("eval{i}"));
        let o = ok(&["eval", "--dataset-root", s(&ds), "--predictions", s(&pred), "--out", s(&out), "--jobs", if i == 0 { "1" } else { "3" }]);
        evals.push((snapshot(&out), o.stdout));
    }
    assert_eq!(evals[0], evals[1]);
}

#[test]
fn exit_codes_separate_config_from_data_errors() {
    let tmp = TempDir::new().unwrap();
    let ds = synth(&tmp, 2);
    let out = tmp.path().join("o");
    assert_eq!(code(&["project", "--no-such-flag"]), 2);
    assert_eq!(code(&["recover", "--dataset-root", "/no/such/dir", "--out", s(&out)]), 2);
    assert_eq!(code(&["recover", "--dataset-root", s(&ds), "--sigma-px", "1", "--out", s(&out)]), 2);
    assert_eq!(code(&["recover", "--dataset-root", s(&ds), "--sigma-px", "-1", "--out", s(&out)]), 2);
    assert_eq!(code(&["recover", "--dataset-root", s(&ds), "--polygon-source", "file:/nope", "--out", s(&out)]), 2);
    assert_eq!(code(&["synth", "--frames", "1", "--out", s(&out)]), 2);
    assert_eq!(code(&["eval", "--dataset-root", s(&ds), "--out", s(&out)]), 2);
    let bad_cfg = tmp.path().join("bad.toml");
    fs::write(&bad_cfg, "sigma_px = 3\n").unwrap();
    assert_eq!(code(&["--config", s(&bad_cfg), "project", "--dataset-root", s(&ds), "--out", s(&out)]), 2);

    // every frame's calibration corrupt: data error
    for f in fs::read_dir(ds.join("calib")).unwrap() {
        fs::write(f.unwrap().path(), "P2: 1 2 3\n").unwrap();
    }
    assert_eq!(code(&["project", "--dataset-root", s(&ds), "--out", s(&out)]), 3);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["frames_failed"], 2);
    assert!(summary["failures"][0]["reason"].as_str().unwrap().contains("line 1"));

    // no targets at all: undefined metric
    let empty = tmp.path().join("empty");
    fs::create_dir_all(empty.join("label_2")).unwrap();
    fs::create_dir_all(empty.join("pred")).unwrap();
    fs::write(empty.join("label_2/000000.txt"), "").unwrap();
    assert_eq!(code(&["eval", "--dataset-root", s(&empty), "--predictions", s(&empty.join("pred")), "--out", s(&out)]), 3);
}

fn one_frame_dataset(tmp: &TempDir, labels: &str) -> PathBuf {
    let ds = tmp.path().join("one");
    fs::create_dir_all(ds.join("calib")).unwrap();
    fs::create_dir_all(ds.join("label_2")).unwrap();
    fs::write(ds.join("calib/000000.txt"), "P2: 700 0 600 0 0 700 180 0 0 0 1 0\n").unwrap();
    fs::write(ds.join("label_2/000000.txt"), labels).unwrap();
    ds
}

#[test]
fn project_examples() {
    let tmp = TempDir::new().unwrap();
    let ds = one_frame_dataset(&tmp, "Car 0.00 0 -1.58 587.0 173.3 614.1 200.1 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59\nDontCare -1 -1 -10 1 2 3 4 -1 -1 -1 -1000 -1000 -1000 -10\n");
    let out = tmp.path().join("p");
    ok(&["project", "--dataset-root", s(&ds), "--out", s(&out)]);
    let recs = parse_polygons(&fs::read_to_string(out.join("polygons/000000.txt")).unwrap()).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].id, 0);
    assert_eq!(fs::read_to_string(out.join("overlay.csv")).unwrap().lines().count(), 9);

    let empty = TempDir::new().unwrap();
    let ds = one_frame_dataset(&empty, "");
    let out = empty.path().join("p");
    ok(&["project", "--dataset-root", s(&ds), "--out", s(&out)]);
    assert!(parse_polygons(&fs::read_to_string(out.join("polygons/000000.txt")).unwrap()).unwrap().is_empty());
}

#[test]
fn recover_examples() {
    let tmp = TempDir::new().unwrap();
    let ds = synth(&tmp, 40);
    let exact = tmp.path().join("exact");
    ok(&["recover", "--dataset-root", s(&ds), "--out", s(&exact)]);
    for f in fs::read_dir(ds.join("label_2")).unwrap() {
        let f = f.unwrap().path();
        let gt = parse_labels(&fs::read_to_string(&f).unwrap()).unwrap();
        let pred = parse_predictions(&fs::read_to_string(exact.join("coarse").join(f.file_name().unwrap())).unwrap(), 0).unwrap();
        assert_eq!(gt.len(), pred.len());
        // same scores everywhere, so rows keep object order
        for (g, (_, p)) in gt.iter().zip(&pred) {
            let (a, b) = (g.to_box().unwrap(), p.box3d);
            for (u, v) in [(a.x, b.x), (a.y, b.y), (a.z, b.z), (a.l, b.l), (a.w, b.w), (a.h, b.h), (a.theta, b.theta)] {
                assert!((u - v).abs() < 1e-6, "{u} vs {v}");
            }
        }
    }
    let e0 = tmp.path().join("e0");
    ok(&["eval", "--dataset-root", s(&ds), "--predictions", s(&exact.join("coarse")), "--out", s(&e0)]);
    assert!(report_aps(&e0).iter().all(|ap| *ap == 1.0));

    let noisy = tmp.path().join("noisy");
    ok(&["recover", "--dataset-root", s(&ds), "--sigma-px", "1", "--seed", "3", "--refine", "oracle", "--out", s(&noisy)]);
    let e1 = tmp.path().join("e1");
    ok(&["eval", "--dataset-root", s(&ds), "--predictions", s(&noisy.join("coarse")), "--out", s(&e1)]);
    let (clean, degraded) = (report_aps(&e0), report_aps(&e1));
    // entries are ordered metric, threshold, difficulty; IoU 0.7 moderate
    for idx in [4, 10] {
        assert!(degraded[idx] < clean[idx], "{} vs {}", degraded[idx], clean[idx]);
    }
    let e2 = tmp.path().join("e2");
    ok(&["eval", "--dataset-root", s(&ds), "--predictions", s(&noisy.join("refined")), "--out", s(&e2)]);
    assert!(report_aps(&e2).iter().all(|ap| *ap == 1.0));
}

#[test]
fn eval_examples() {
    let tmp = TempDir::new().unwrap();
    let ds = tmp.path().join("ds");
    fs::create_dir_all(ds.join("label_2")).unwrap();
    let pred = tmp.path().join("pred");
    fs::create_dir_all(&pred).unwrap();
    // 2 targets, detections ranked TP, FP, TP
    fs::write(ds.join("label_2/000000.txt"), "Car 0 0 0 0 0 80 60 1.5 1.8 4 0 1.6 20 0\nCar 0 0 0 200 0 280 60 1.5 1.8 4 8 1.6 30 0\n").unwrap();
    fs::write(pred.join("000000.txt"), "Car -1 -1 0 -1 -1 -1 -1 1.5 1.8 4 0 1.6 20 0 0.9\nCar -1 -1 0 -1 -1 -1 -1 1.5 1.8 4 -12 1.6 40 0 0.8\nCar -1 -1 0 -1 -1 -1 -1 1.5 1.8 4 8 1.6 30 0 0.7\n").unwrap();
    let out = tmp.path().join("r");
    ok(&["eval", "--dataset-root", s(&ds), "--predictions", s(&pred), "--out", s(&out)]);
    let expected = (6.0 + 5.0 * (2.0 / 3.0)) / 11.0;
    assert!(report_aps(&out).iter().all(|ap| (ap - expected).abs() < 1e-12));

    let text = fs::read_to_string(pred.join("000000.txt")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.reverse();
    fs::write(pred.join("000000.txt"), lines.join("\n")).unwrap();
    let out2 = tmp.path().join("r2");
    ok(&["eval", "--dataset-root", s(&ds), "--predictions", s(&pred), "--out", s(&out2)]);
    assert_eq!(snapshot(&out), snapshot(&out2));
}

#[test]
fn config_file_env_and_flags_layer() {
    let tmp = TempDir::new().unwrap();
    let ds = synth(&tmp, 3);
    let cfg = tmp.path().join("run.toml");
    let out_cfg = tmp.path().join("from-config");
    fs::write(&cfg, format!("dataset-root = \"/no/such/root\"\nout = \"{}\"\nsigma-px = 2.0\nseed = 9\n", s(&out_cfg))).unwrap();
    // env beats the config file's dataset root
    let o = bin().env("POLYDEPTH_DATASET_ROOT", &ds).args(["--config", s(&cfg), "project"]).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // a flag beats both
    let o = bin().env("POLYDEPTH_DATASET_ROOT", "/no/such/root").args(["--config", s(&cfg), "project", "--dataset-root", s(&ds), "--out", s(&tmp.path().join("flag"))]).output().unwrap();
    assert!(o.status.success());
    assert_eq!(snapshot(&out_cfg), snapshot(&tmp.path().join("flag")));
    // the config's noise and seed were applied
    let flags = tmp.path().join("flags");
    ok(&["project", "--dataset-root", s(&ds), "--sigma-px", "2", "--seed", "9", "--out", s(&flags)]);
    assert_eq!(snapshot(&out_cfg), snapshot(&flags));
}

#[test]
fn file_sources_reproduce_oracle_runs() {
    let tmp = TempDir::new().unwrap();
    let ds = synth(&tmp, 5);
    let proj = tmp.path().join("proj");
    ok(&["project", "--dataset-root", s(&ds), "--sigma-px", "0.7", "--seed", "2", "--out", s(&proj)]);
    let a = tmp.path().join("a");
    ok(&["recover", "--dataset-root", s(&ds), "--sigma-px", "0.7", "--seed", "2", "--out", s(&a)]);
    let b = tmp.path().join("b");
    let src = format!("file:{}", s(&proj.join("polygons")));
    ok(&["recover", "--dataset-root", s(&ds), "--polygon-source", &src, "--out", s(&b)]);
    assert_eq!(snapshot(&a.join("coarse")), snapshot(&b.join("coarse")));
}
