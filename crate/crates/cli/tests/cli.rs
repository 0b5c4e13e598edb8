use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scatterkit::dataset::encode_idx;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scatterkit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Twelve 6x6 images of two classes: a horizontal bar (0) or a vertical
/// bar (1) at varying offsets.
fn write_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for i in 0..12u8 {
        let class = i % 2;
        let pos = (i / 2) as usize % 4 + 1;
        let mut px = vec![0u8; 36];
        for t in 0..6 {
            let idx = if class == 0 { pos * 6 + t } else { t * 6 + pos };
            px[idx] = 200 + i;
        }
        images.push(px);
        labels.push(class);
    }
    let (img, lab) = encode_idx(&images, 6, 6, &labels);
    let (pi, pl) = (dir.join("img.idx"), dir.join("lab.idx"));
    std::fs::write(&pi, img).unwrap();
    std::fs::write(&pl, lab).unwrap();
    (pi, pl)
}

#[test]
fn help_exits_zero() {
    let o = run(&["scatter", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("Usage"));
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = run(&["extract", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--no-such-flag"));
}

#[test]
fn missing_dataset_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("absent-images.idx");
    let labels = dir.path().join("absent-labels.idx");
    let o = run(&[
        "extract",
        "--images",
        images.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent-images.idx"), "{}", stderr(&o));
}

#[test]
fn bad_magic_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (pi, pl) = write_fixture(dir.path());
    // labels passed as images
    let o = run(&[
        "extract",
        "--images",
        pl.to_str().unwrap(),
        "--labels",
        pi.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("magic"));
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bank.conf");
    std::fs::write(&conf, "# small bank\nj = 2\nk = 4\nsize = 16\n").unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "build-bank",
        "--config",
        conf.to_str().unwrap(),
        "--k",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let echo: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(echo["config"]["bank"]["J"], 2);
    assert_eq!(echo["config"]["bank"]["K"], 6);
    assert!(out.join("bank.skfb").exists());
    assert!(out.join("bank.skfb.json").exists());

    std::fs::write(&conf, "j = 2\ncolour = blue\n").unwrap();
    let o = run(&[
        "build-bank",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("colour"));
}

#[test]
fn ridge_without_penalty_on_wide_features_is_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let (pi, pl) = write_fixture(dir.path());
    let out = dir.path().join("out");
    let o = run(&[
        "extract",
        "--images",
        pi.to_str().unwrap(),
        "--labels",
        pl.to_str().unwrap(),
        "--j",
        "2",
        "--k",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // 12 rows and 36 columns: the unpenalized system is singular
    let o = run(&[
        "train",
        "--features",
        out.join("features.skfm").to_str().unwrap(),
        "--lambda",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("lambda > 0"));
}

#[test]
fn full_pipeline_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (pi, pl) = write_fixture(dir.path());
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();

    let o = run(&[
        "build-bank",
        "--size",
        "8",
        "--j",
        "2",
        "--k",
        "4",
        "--out",
        out_s,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let bank = out.join("bank.skfb");

    let o = run(&[
        "extract",
        "--images",
        pi.to_str().unwrap(),
        "--labels",
        pl.to_str().unwrap(),
        "--bank",
        bank.to_str().unwrap(),
        "--format",
        "both",
        "--out",
        out_s,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let echo: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(echo["command"], "extract");
    assert!(out.join("features.csv").exists());
    let features = out.join("features.skfm");

    let o = run(&[
        "train",
        "--features",
        features.to_str().unwrap(),
        "--lambda",
        "1e-3",
        "--out",
        out_s,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let model = out.join("model.json");
    assert!(model.exists());

    let o = run(&[
        "evaluate",
        "--model",
        model.to_str().unwrap(),
        "--features",
        features.to_str().unwrap(),
        "--out",
        out_s,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    let err = metrics["error_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&err));
    assert_eq!(err, 0.0, "bars are separable on the training set");
    assert_eq!(metrics["rows"], 12);
}

#[test]
fn bank_grid_mismatch_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (pi, pl) = write_fixture(dir.path());
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    assert_eq!(
        run(&["build-bank", "--size", "16", "--j", "2", "--out", out_s])
            .status
            .code(),
        Some(0)
    );
    let o = run(&[
        "extract",
        "--images",
        pi.to_str().unwrap(),
        "--labels",
        pl.to_str().unwrap(),
        "--bank",
        out.join("bank.skfb").to_str().unwrap(),
        "--out",
        out_s,
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn experiment_subcommands_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();

    let o = run(&[
        "timefreq", "--length", "64", "--window", "16", "--hop", "4", "--out", out_s,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("timefreq.csv")).unwrap();
    assert_eq!(csv.lines().count(), 16);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 64);

    let o = run(&["timefreq", "--length", "60", "--hop", "7", "--out", out_s]);
    assert_eq!(o.status.code(), Some(2), "hop must divide the length");

    let o = run(&["uncertainty", "--length", "256", "--count", "5", "--out", out_s]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("uncertainty.json")).unwrap()).unwrap();
    assert_eq!(report["products"].as_array().unwrap().len(), 6);
    assert!(report["violators"].as_array().unwrap().is_empty());

    let o = run(&[
        "stability",
        "--grid",
        "16",
        "--j",
        "2",
        "--signals",
        "2",
        "--count",
        "2",
        "--families",
        "random-smooth",
        "--maps",
        "raw,scatter-m1",
        "--seed",
        "7",
        "--out",
        out_s,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("stability.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("stability.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["seed"], 7);

    let o = run(&[
        "invariance",
        "--grid",
        "16",
        "--j",
        "2",
        "--signals",
        "1",
        "--max-shift",
        "3",
        "--out",
        out_s,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("invariance.json").exists());

    let img = dir.path().join("img.txt");
    std::fs::write(
        &img,
        (0..8)
            .map(|r| format!("{}\n", vec![r.to_string(); 8].join(" ")))
            .collect::<String>(),
    )
    .unwrap();
    let o = run(&[
        "scatter",
        "--input",
        img.to_str().unwrap(),
        "--j",
        "2",
        "--k",
        "4",
        "--out",
        out_s,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("scatter.json")).unwrap()).unwrap();
    // J=2, K=4: 1 + 8 + 16 paths
    assert_eq!(summary["paths"], 25);
}
