use std::net::TcpListener;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

fn hosvd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hosvd"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = hosvd(args);
    assert!(
        out.status.success(),
        "hosvd {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small image dataset plus a vector-mode model and its CNN.
fn trained(dir: &Path) {
    ok(&[
        "synth",
        "--out",
        s(&dir.join("data")),
        "--per-class",
        "6",
        "--side",
        "16",
        "--seed",
        "3",
    ]);
    ok(&[
        "train",
        "--data",
        s(&dir.join("data")),
        "--rank",
        "3",
        "--epochs",
        "2",
        "--side",
        "16",
        "--cnn",
        s(&dir.join("net.hcnn")),
        "--out",
        s(&dir.join("model.hsvd")),
    ]);
}

fn first_image(dir: &Path, class: &str) -> std::path::PathBuf {
    let mut files: Vec<_> = std::fs::read_dir(dir.join("data").join(class))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files.remove(0)
}

#[test]
fn version_and_help_exit_zero() {
    let out = hosvd(&["--version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("hosvd "));
    assert!(hosvd(&["--help"]).status.success());
}

#[test]
fn usage_errors_exit_one_with_usage_on_stderr() {
    for args in [
        &["bogus"][..],
        &[],
        &["train"],
        &["synth", "--out", "x", "--kind", "video"],
    ] {
        let out = hosvd(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(
            err.contains("Usage") || err.contains("usage"),
            "{args:?}: {err}"
        );
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    let out = hosvd(&["evaluate", "--data", s(&missing)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    std::fs::write(dir.path().join("bad.pgm"), b"P2\n1 1\n255\n0").unwrap();
    let out = hosvd(&[
        "classify",
        "--model",
        s(&missing),
        "--image",
        s(&dir.path().join("bad.pgm")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_then_classify_locally() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    for class in ["healthy", "ALL"] {
        let img = first_image(dir.path(), class);
        let out = ok(&[
            "classify",
            "--model",
            s(&dir.path().join("model.hsvd")),
            "--cnn",
            s(&dir.path().join("net.hcnn")),
            "--image",
            s(&img),
        ]);
        let label = out.lines().next().unwrap();
        assert!(label == "healthy" || label == "ALL", "{out}");
    }
}

#[test]
fn vector_model_without_cnn_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    let img = first_image(dir.path(), "ALL");
    let out = hosvd(&[
        "classify",
        "--model",
        s(&dir.path().join("model.hsvd")),
        "--image",
        s(&img),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn matrix_mode_needs_no_cnn() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "synth",
        "--out",
        s(&data),
        "--per-class",
        "5",
        "--side",
        "12",
    ]);
    let model = dir.path().join("m.hsvd");
    ok(&[
        "train",
        "--data",
        s(&data),
        "--mode",
        "matrix",
        "--ranks",
        "4,4,2",
        "--side",
        "12",
        "--out",
        s(&model),
    ]);
    let out = ok(&[
        "classify",
        "--model",
        s(&model),
        "--image",
        s(&first_image(dir.path(), "healthy")),
    ]);
    assert!(["healthy", "ALL"].contains(&out.lines().next().unwrap()));
}

#[test]
fn feature_csv_evaluation_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("feat");
    ok(&[
        "synth",
        "--out",
        s(&out_dir),
        "--kind",
        "features",
        "--dim",
        "10",
        "--per-class",
        "10",
    ]);
    let csv = out_dir.join("features.csv");
    let json = dir.path().join("r.json");
    let text = ok(&[
        "evaluate",
        "--data",
        s(&csv),
        "--repeats",
        "2",
        "--classifiers",
        "hosvd,1nn",
        "--rank",
        "2",
        "--json",
        s(&json),
    ]);
    assert!(text.contains("HOSVD") && text.contains("1-NN"));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    let reports = v["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["fold_accuracies"].as_array().unwrap().len(), 10);

    // CNN needs images.
    let out = hosvd(&["evaluate", "--data", s(&csv), "--classifiers", "cnn"]);
    assert_eq!(out.status.code(), Some(2));
    let out = hosvd(&["evaluate", "--data", s(&csv), "--classifiers", "svm"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn extract_features_matches_dataset_size() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    let csv = dir.path().join("f.csv");
    ok(&[
        "extract-features",
        "--cnn",
        s(&dir.path().join("net.hcnn")),
        "--data",
        s(&dir.path().join("data")),
        "--out",
        s(&csv),
    ]);
    let text = std::fs::read_to_string(&csv).unwrap();
    // header + 12 rows
    assert_eq!(text.lines().count(), 13);
}

#[test]
fn log_level_controls_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("d");
    let quiet = hosvd(&[
        "synth",
        "--out",
        s(&out_dir),
        "--per-class",
        "2",
        "--side",
        "8",
    ]);
    assert!(quiet.stderr.is_empty());
    let loud = Command::new(env!("CARGO_BIN_EXE_hosvd"))
        .env("HOSVD_LOG", "debug")
        .args([
            "train",
            "--data",
            s(&out_dir),
            "--mode",
            "matrix",
            "--ranks",
            "2,2,1",
            "--side",
            "8",
            "--out",
            s(&dir.path().join("m")),
        ])
        .output()
        .unwrap();
    assert!(loud.status.success());
    assert!(!loud.stderr.is_empty());
}

struct Served(Child);

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn classify_through_served_model_matches_local() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path());
    let model = dir.path().join("model.hsvd");
    let net = dir.path().join("net.hcnn");
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
        .to_string();
    let _server = Served(
        Command::new(env!("CARGO_BIN_EXE_hosvd"))
            .args([
                "serve",
                "--model",
                s(&model),
                "--cnn",
                s(&net),
                "--port",
                &port,
            ])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap(),
    );
    let url = format!("http://127.0.0.1:{port}");
    let img = first_image(dir.path(), "ALL");
    let deadline = Instant::now() + Duration::from_secs(20);
    let remote = loop {
        let out = hosvd(&["classify", "--server", &url, "--image", s(&img)]);
        if out.status.success() {
            break String::from_utf8(out.stdout).unwrap();
        }
        assert!(Instant::now() < deadline, "server never came up");
        std::thread::sleep(Duration::from_millis(100));
    };
    let local = ok(&[
        "classify",
        "--model",
        s(&model),
        "--cnn",
        s(&net),
        "--image",
        s(&img),
    ]);
    assert_eq!(remote, local);
}
