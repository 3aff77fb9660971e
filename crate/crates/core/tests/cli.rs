mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::Lcg;
use spikeforge::dataset::{Dataset, Image, Split};
use spikeforge::weights::WeightMatrix;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_spikeforge");

/// Synthetic 28x28 "digits": class c lights a 4-pixel-wide vertical bar at
/// column 2 + 2.4c, plus sparse noise.
fn synthetic(n: usize, seed: u64) -> Dataset {
    let mut g = Lcg::new(seed);
    let images = (0..n)
        .map(|i| {
            let label = (i % 10) as u8;
            let col = 2 + (usize::from(label) * 12) / 5;
            let mut px = vec![0u8; 784];
            for r in 4..24 {
                for c in col..col + 4 {
                    px[r * 28 + c] = 180 + g.below(76) as u8;
                }
            }
            for _ in 0..20 {
                px[g.below(784) as usize] = g.below(256) as u8;
            }
            Image::new(28, 28, px, Some(label)).unwrap()
        })
        .collect();
    Dataset { images, split: Split::Test }
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        for (name, n, seed) in [("train", 300, 1), ("t10k", 60, 2)] {
            let (im, lb) = synthetic(n, seed).to_idx().unwrap();
            fs::write(dir.path().join(format!("{name}-images-idx3-ubyte")), im).unwrap();
            fs::write(dir.path().join(format!("{name}-labels-idx1-ubyte")), lb).unwrap();
        }
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(BIN)
            .args(args)
            .env("SPIKEFORGE_DATA_DIR", self.dir.path())
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn train(&self, name: &str, seed: &str) -> PathBuf {
        let out = self.path(name);
        self.ok(&[
            "train", "--out", out.to_str().unwrap(), "--epochs", "3", "--val-size", "50", "--seed", seed,
        ]);
        out
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_writes_weights_and_log_deterministically() {
    let fx = Fixture::new();
    let a = fx.train("a.snnw", "7");
    let b = fx.train("b.snnw", "7");
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    // 22-byte header + 7840 i16 containers; 9-bit packing would need 8,820 bytes
    assert_eq!(bytes.len(), 22 + 2 * 7840);
    let w = WeightMatrix::from_bytes(&bytes).unwrap();
    assert_eq!(w.bits(), 9);
    assert_eq!(spikeforge::metrics::snn_memory_bytes(w.n_inputs(), w.n_outputs(), u32::from(w.bits())), 8_820);
    let log = fs::read_to_string(fx.path("a.snnw.log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 3);
}

#[test]
fn exit_codes() {
    let fx = Fixture::new();
    // usage
    assert_eq!(fx.run(&["eval", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(fx.run(&["frobnicate"]).status.code(), Some(1));
    // data
    let missing = fx.run(&["eval", "--weights", "/nonexistent/w.snnw"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(!missing.stderr.is_empty());
    // invalid configuration is a usage error
    let w = fx.train("w.snnw", "1");
    assert_eq!(fx.run(&["eval", "--weights", s(&w), "--threshold", "0"]).status.code(), Some(1));
    // numeric failure
    let out = fx.path("div.snnw");
    let r = fx.run(&["train", "--out", s(&out), "--epochs", "2", "--val-size", "50", "--lr", "1e308"]);
    assert_eq!(r.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn failed_runs_leave_no_output_file() {
    let fx = Fixture::new();
    let out = fx.path("eval.json");
    fs::write(fx.path("bad.snnw"), b"SNNW1\x01").unwrap();
    let r = fx.run(&["eval", "--weights", s(&fx.path("bad.snnw")), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
    let names: Vec<_> = fs::read_dir(fx.dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(names.iter().all(|n| !n.to_string_lossy().contains(".tmp")));
}

#[test]
fn eval_curve_shape_and_consistency_with_infer() {
    let fx = Fixture::new();
    let w = fx.train("w.snnw", "3");
    let json = fx.ok(&["eval", "--weights", s(&w), "--format", "json", "--limit", "20"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let acc = v["accuracy"].as_array().unwrap();
    assert_eq!(acc.len(), 20);
    assert!(acc.iter().all(|a| (0.0..=1.0).contains(&a.as_f64().unwrap())));
    let mut correct = 0;
    for i in 0..20 {
        let out = fx.ok(&["infer", "--weights", s(&w), "--index", &i.to_string()]);
        let r: serde_json::Value = serde_json::from_str(&out).unwrap();
        correct += usize::from(r["prediction"] == r["label"]);
    }
    assert_eq!(v["final_accuracy"].as_f64().unwrap(), correct as f64 / 20.0);
    let csv = fx.ok(&["eval", "--weights", s(&w), "--format", "csv", "--limit", "20"]);
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn trace_rows_obey_neuron_contract() {
    let fx = Fixture::new();
    let w = fx.train("w.snnw", "5");
    for index in 0..10 {
        let csv = fx.ok(&["trace", "--weights", s(&w), "--format", "csv", "--index", &index.to_string()]);
        let rows: Vec<Vec<i64>> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 20 * 10);
        for r in &rows {
            if r[4] == 1 {
                assert!(r[2] >= 128, "fired below threshold: {r:?}");
                assert_eq!(r[3], 0);
            }
        }
        assert_eq!(csv, fx.ok(&["trace", "--weights", s(&w), "--format", "csv", "--index", &index.to_string()]));
    }
}

#[test]
fn zero_weights_give_flat_trace() {
    let fx = Fixture::new();
    let path = fx.path("zero.snnw");
    fs::write(&path, WeightMatrix::zeros(10, 784, 9).unwrap().to_bytes()).unwrap();
    let csv = fx.ok(&["trace", "--weights", s(&path), "--format", "csv"]);
    for l in csv.lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(&f[2..5], &["0", "0", "0"]);
    }
}

#[test]
fn bench_reports_published_counts_consistently() {
    let fx = Fixture::new();
    let text = fx.ok(&["bench", "--format", "table"]);
    for needle in ["25408", "25450", "8820", "101800"] {
        assert!(text.contains(needle), "missing {needle} in\n{text}");
    }
    let json: serde_json::Value = serde_json::from_str(&fx.ok(&["bench", "--format", "json"])).unwrap();
    assert_eq!(json["ann"]["multiplications"], 25_408);
    assert_eq!(json["ann"]["additions"], 25_450);
    assert_eq!(json["snn_memory_bytes"], 8_820);
    assert_eq!(json["snn_multiplications"], 0);
    let eff: Vec<f64> = json["efficiency"].as_array().unwrap().iter().map(|p| p["efficiency"].as_f64().unwrap()).collect();
    assert!(eff.windows(2).all(|p| p[1] < p[0]));
    for p in json["efficiency"].as_array().unwrap() {
        let line = format!("{:.1}", p["efficiency"].as_f64().unwrap());
        assert!(text.contains(&line), "text table lacks {line}");
    }
    let csv = fx.ok(&["bench", "--format", "csv"]);
    assert_eq!(csv.lines().count(), 21);

    let w = fx.train("w.snnw", "2");
    let measured: serde_json::Value =
        serde_json::from_str(&fx.ok(&["bench", "--weights", s(&w), "--format", "json"])).unwrap();
    let ratio = measured["sparsity"]["mean_ratio"].as_f64().unwrap();
    assert!(ratio > 0.0 && ratio < 1.0);
    assert_eq!(measured["sparsity"]["totals"]["multiplications"], 0);
}

#[test]
fn robust_identity_rows_equal_clean_and_eval() {
    let fx = Fixture::new();
    let w = fx.train("w.snnw", "4");
    let ident: Vec<serde_json::Value> = serde_json::from_str(&fx.ok(&[
        "robust", "--weights", s(&w), "--rotate", "0", "--shift", "0", "--noise-sigma", "0", "--occlusion", "0",
    ]))
    .unwrap();
    let clean = ident[0]["accuracy"].as_f64().unwrap();
    assert!(ident.iter().all(|r| r["accuracy"].as_f64().unwrap() == clean));
    let eval: serde_json::Value = serde_json::from_str(&fx.ok(&["eval", "--weights", s(&w)])).unwrap();
    assert_eq!(eval["final_accuracy"].as_f64().unwrap(), clean);
    let table = fx.ok(&["robust", "--weights", s(&w), "--format", "table"]);
    assert_eq!(table.lines().count(), 6);
}

#[test]
fn stats_and_encode_outputs() {
    let fx = Fixture::new();
    let w = fx.train("w.snnw", "6");
    let table = fx.ok(&["stats", "--weights", s(&w), "--format", "table", "--samples", "60"]);
    assert!(table.starts_with("Digit | Avg Current"));
    assert_eq!(table.lines().count(), 2 + 10);

    let bin = fx.path("train.spk");
    fx.ok(&["encode", "--format", "bin", "--timesteps", "5", "--out", s(&bin)]);
    let frames = spikeforge::encoder::read_train_packed(&fs::read(&bin).unwrap()[..]).unwrap();
    assert_eq!(frames.len(), 5);
    let csv = fx.ok(&["encode", "--format", "csv", "--timesteps", "5"]);
    assert_eq!(csv.lines().count(), 1 + 5 * 784);
    for (line, bit) in csv.lines().skip(1).zip(frames.iter().flat_map(|f| f.bits.iter())) {
        assert!(line.ends_with(if *bit { ",1" } else { ",0" }));
    }
}
