use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bcosfire::{save_png, GrayImage};
use tempfile::TempDir;

fn bcosfire(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcosfire"))
        .args(args)
        .env_remove("BCOSFIRE_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = bcosfire(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Dark crack-like stroke on a bright background: a vertical bar plus a
/// diagonal one.
fn crack_image(dir: &Path, name: &str) -> PathBuf {
    let img = GrayImage::from_fn(80, 80, |x, y| {
        let vertical = (38..=42).contains(&x) && (10..70).contains(&y);
        let diagonal = (x as isize - y as isize).abs() <= 2 && x > 45;
        if vertical || diagonal {
            0.25
        } else {
            0.9
        }
    });
    let path = dir.join(name);
    save_png(&img, &path).unwrap();
    path
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_owned).collect()).collect()
}

#[test]
fn detect_writes_all_artifacts() {
    let tmp = TempDir::new().unwrap();
    let input = crack_image(tmp.path(), "crack.png");
    let out = tmp.path().join("out");
    let stdout = ok(&["detect", s(&input), "--output", s(&out)]);
    assert!(stdout.contains("crack:"));
    for suffix in ["response.png", "orientation.png", "thinned.png", "mask.png", "summary.json"] {
        assert!(out.join(format!("crack_{suffix}")).is_file(), "missing {suffix}");
    }
    let summary = json(&out.join("crack_summary.json"));
    assert_eq!(summary["width"], 80);
    assert_eq!(summary["t_high"], 0.49);
    assert_eq!(summary["polarity"], "dark-on-bright");
    assert!(summary["mask_pixels"].as_u64().unwrap() > 20);
    assert!(summary["thinned_pixels"].as_u64().unwrap() >= summary["mask_pixels"].as_u64().unwrap());
}

#[test]
fn detect_accepts_directories() {
    let tmp = TempDir::new().unwrap();
    let inputs = tmp.path().join("in");
    fs::create_dir(&inputs).unwrap();
    crack_image(&inputs, "a.png");
    crack_image(&inputs, "b.png");
    fs::write(inputs.join("notes.txt"), "ignored").unwrap();
    let out = tmp.path().join("out");
    ok(&["detect", s(&inputs), "-o", s(&out)]);
    assert!(out.join("a_mask.png").is_file());
    assert!(out.join("b_mask.png").is_file());
}

#[test]
fn blank_image_gives_an_empty_mask() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("blank.png");
    save_png(&GrayImage::filled(60, 50, 1.0), &input).unwrap();
    let out = tmp.path().join("out");
    ok(&["detect", s(&input), "-o", s(&out)]);
    assert_eq!(json(&out.join("blank_summary.json"))["mask_pixels"], 0);
}

#[test]
fn missing_input_fails_before_writing_anything() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let res = bcosfire(&["detect", s(&tmp.path().join("nope.png")), "-o", s(&out)]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("nope.png"));
    assert!(!out.exists());
}

#[test]
fn invalid_threshold_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let input = crack_image(tmp.path(), "crack.png");
    for t in ["0", "1.5"] {
        let res = bcosfire(&["detect", s(&input), "-o", s(&tmp.path().join("o")), "--t-high", t]);
        assert!(!res.status.success(), "t_high {t} accepted");
    }
}

/// Builds `root/images` and `root/gt`, using each image's own detected mask as its ground truth.
fn self_truth_dataset(root: &Path, names: &[&str]) {
    let images = root.join("images");
    let gt = root.join("gt");
    fs::create_dir_all(&images).unwrap();
    fs::create_dir_all(&gt).unwrap();
    let det = root.join("det");
    for name in names {
        let img = crack_image(&images, &format!("{name}.png"));
        ok(&["detect", s(&img), "-o", s(&det)]);
        fs::copy(det.join(format!("{name}_mask.png")), gt.join(format!("{name}.png"))).unwrap();
    }
}

#[test]
fn evaluate_scores_a_detector_against_its_own_output_perfectly() {
    let tmp = TempDir::new().unwrap();
    self_truth_dataset(tmp.path(), &["one", "two"]);
    let out = tmp.path().join("eval");
    let stdout = ok(&["evaluate", "--dataset", s(tmp.path()), "-o", s(&out)]);
    assert!(stdout.contains("best t_high"));

    let rows = csv_rows(&out.join("per_threshold.csv"));
    assert_eq!(rows.len(), 2 * 101);
    let at = |name: &str| {
        rows.iter()
            .find(|r| r[0] == name && r[1] == "0.49")
            .unwrap_or_else(|| panic!("no 0.49 row for {name}"))
            .clone()
    };
    for name in ["one", "two"] {
        let r = at(name);
        // tp, fp, fn, precision, recall, f
        assert_eq!(r[3], "0");
        assert_eq!(r[4], "0");
        assert_eq!(&r[5..], ["1", "1", "1"]);
    }
    let best = json(&out.join("best.json"));
    assert_eq!(best["f_measure"], 1.0);
    assert_eq!(csv_rows(&out.join("per_image.csv")).len(), 2);
    assert_eq!(csv_rows(&out.join("pr_curve.csv")).len(), 101);
}

#[test]
fn evaluate_reports_bad_pairs_but_keeps_going() {
    let tmp = TempDir::new().unwrap();
    self_truth_dataset(tmp.path(), &["good"]);
    fs::write(tmp.path().join("images/corrupt.png"), b"not a png").unwrap();
    fs::copy(tmp.path().join("gt/good.png"), tmp.path().join("gt/corrupt.png")).unwrap();
    save_png(&GrayImage::filled(10, 10, 0.5), tmp.path().join("images/small.png")).unwrap();
    fs::copy(tmp.path().join("gt/good.png"), tmp.path().join("gt/small.png")).unwrap();

    let out = tmp.path().join("eval");
    let res = bcosfire(&["evaluate", "--dataset", s(tmp.path()), "-o", s(&out)]);
    assert!(!res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("corrupt"), "{stderr}");
    assert!(stderr.contains("small"), "{stderr}");
    let best = json(&out.join("best.json"));
    assert_eq!(best["images"], serde_json::json!(["good"]));
    assert_eq!(best["failed"], serde_json::json!(["corrupt", "small"]));
}

#[test]
fn manifest_paths_are_relative_to_the_manifest() {
    let tmp = TempDir::new().unwrap();
    self_truth_dataset(tmp.path(), &["m"]);
    let manifest = tmp.path().join("list.csv");
    fs::write(&manifest, "image,truth\n# comment\nimages/m.png,gt/m.png\n").unwrap();
    let out = tmp.path().join("eval");
    ok(&["evaluate", "--manifest", s(&manifest), "-o", s(&out)]);
    assert_eq!(json(&out.join("best.json"))["images"], serde_json::json!(["m"]));
}

#[test]
fn empty_manifest_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let manifest = tmp.path().join("list.csv");
    fs::write(&manifest, "image,truth\n").unwrap();
    let out = tmp.path().join("eval");
    let res = bcosfire(&["evaluate", "--manifest", s(&manifest), "-o", s(&out)]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("empty"));
    assert!(!out.exists());
}

#[test]
fn gridsearch_ranks_deduplicated_points() {
    let tmp = TempDir::new().unwrap();
    self_truth_dataset(tmp.path(), &["a", "b", "c"]);
    let grid = tmp.path().join("grid.toml");
    fs::write(
        &grid,
        "w = [6.34, 6.34]\nl = [29]\neta = [2]\nsigma0 = [2.0]\nalpha = [1.0, 1.0]\n",
    )
    .unwrap();
    let out = tmp.path().join("gs");
    ok(&["gridsearch", "--dataset", s(tmp.path()), "--grid", s(&grid), "-o", s(&out)]);
    let rows = csv_rows(&out.join("gridsearch.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][..6], ["1", "6.34", "29", "2", "2", "1"]);
    assert_eq!(rows[0][9], "1");
    // ceil(3 * 0.5) = 2 training images, first by name
    assert_eq!(fs::read_to_string(out.join("training_split.txt")).unwrap(), "a\nb\n");
    let best: toml::Value = toml::from_str(&fs::read_to_string(out.join("best_params.toml")).unwrap()).unwrap();
    assert_eq!(best["w"].as_float(), Some(6.34));
    assert_eq!(best["l"].as_integer(), Some(29));
}

#[test]
fn gridsearch_honours_a_split_file() {
    let tmp = TempDir::new().unwrap();
    self_truth_dataset(tmp.path(), &["a", "b", "c"]);
    let grid = tmp.path().join("grid.toml");
    fs::write(&grid, "w = [6.34]\nl = [29]\nsigma0 = [2.0]\nalpha = [1.0]\n").unwrap();
    let split = tmp.path().join("split.txt");
    fs::write(&split, "c.png\n").unwrap();
    let out = tmp.path().join("gs");
    ok(&[
        "gridsearch",
        "--dataset",
        s(tmp.path()),
        "--grid",
        s(&grid),
        "--split-file",
        s(&split),
        "-o",
        s(&out),
    ]);
    assert_eq!(fs::read_to_string(out.join("training_split.txt")).unwrap(), "c\n");
}

#[test]
fn synth_is_reproducible_from_its_seed() {
    let tmp = TempDir::new().unwrap();
    let run = |dir: &str, seed: &str| {
        let out = tmp.path().join(dir);
        ok(&[
            "synth",
            "--kind",
            "dashed-circle",
            "--noise-variance",
            "0.05",
            "--seed",
            seed,
            "-o",
            s(&out),
        ]);
        fs::read(out.join("stimulus.png")).unwrap()
    };
    let a = run("a", "7");
    assert_eq!(a, run("b", "7"));
    assert_ne!(a, run("c", "8"));
    let spec = fs::read_to_string(tmp.path().join("a/spec.toml")).unwrap();
    assert!(spec.contains("seed = 7"), "{spec}");
}

#[test]
fn synth_run_reports_snr() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    let stdout = ok(&["synth", "--image-width", "160", "--image-height", "160", "--radius", "50", "--run", "-o", s(&out)]);
    assert!(stdout.contains("SNR = "), "{stdout}");
    let run = json(&out.join("run.json"));
    assert!(run["snr_db"].as_f64().unwrap().is_finite());
    assert!(out.join("stimulus_mask.png").is_file());
    assert!(out.join("truth.png").is_file());
}

#[test]
fn ttest_on_reference_columns() {
    let table = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/table1.csv");
    let stdout = ok(&["ttest", &format!("{table}:ours"), &format!("{table}:fosa")]);
    assert!(stdout.starts_with("h=1 "), "{stdout}");
    assert!(stdout.contains("n=14"));
    let stdout = ok(&["ttest", &format!("{table}:ours"), &format!("{table}:zou")]);
    assert!(stdout.starts_with("h=0 "), "{stdout}");
    let res = bcosfire(&["ttest", &format!("{table}:ours"), &format!("{table}:missing")]);
    assert!(!res.status.success());
}

#[test]
fn flags_override_the_config_file() {
    let tmp = TempDir::new().unwrap();
    let input = crack_image(tmp.path(), "crack.png");
    let config = tmp.path().join("run.toml");
    fs::write(&config, "preset = \"crack\"\nl = 21\nt_high = 0.3\noutput = \"from_config\"\n").unwrap();

    ok(&["--config", s(&config), "detect", s(&input)]);
    let summary = json(&tmp.path().join("from_config/crack_summary.json"));
    assert_eq!(summary["t_high"], 0.3);
    assert_eq!(summary["params"]["l"], 21);

    let out = tmp.path().join("flags");
    ok(&["--config", s(&config), "detect", s(&input), "--t-high", "0.6", "--l", "25", "-o", s(&out)]);
    let summary = json(&out.join("crack_summary.json"));
    assert_eq!(summary["t_high"], 0.6);
    assert_eq!(summary["params"]["l"], 25);
    assert_eq!(summary["params"]["w"], 6.34);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("bad.toml");
    fs::write(&config, "t_hihg = 0.3\n").unwrap();
    let res = bcosfire(&["--config", s(&config), "synth", "-o", s(&tmp.path().join("o"))]);
    assert!(!res.status.success());
}
