use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn agasdf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agasdf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = agasdf(args);
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

#[test]
fn gradcheck_reports_pass() {
    let stdout = ok(&["gradcheck", "--seed", "7"]);
    assert!(stdout.contains("PASS"), "{stdout}");
}

#[test]
fn gradcheck_with_impossible_tolerance_is_a_numerical_failure() {
    let out = agasdf(&["gradcheck", "--seed", "7", "--tolerance", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn bad_input_exits_with_one() {
    assert_eq!(agasdf(&["gradcheck", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(agasdf(&["frobnicate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = agasdf(&["train", "--dataset", s(&missing), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert_eq!(agasdf(&["train", "--dataset", "x", "--weights", "1-1"]).status.code(), Some(1));
}

#[test]
fn help_exits_with_zero() {
    assert!(agasdf(&["--help"]).status.success());
}

#[test]
fn pipeline_runs_end_to_end_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let (d1, d2) = (root.join("data1"), root.join("data2"));
    ok(&["synth", "--seed", "3", "--out", s(&d1)]);
    ok(&["synth", "--seed", "3", "--out", s(&d2)]);
    let m1 = fs::read(d1.join("manifest.json")).unwrap();
    assert_eq!(m1, fs::read(d2.join("manifest.json")).unwrap());
    for entry in fs::read_dir(&d1).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(fs::read(d1.join(&name)).unwrap(), fs::read(d2.join(&name)).unwrap(), "{name:?}");
    }
    let manifest = d1.join("manifest.json");

    let (t1, t2) = (root.join("train1"), root.join("train2"));
    for t in [&t1, &t2] {
        ok(&[
            "train", "--dataset", s(&manifest), "--loss", "agasdf", "--weights", "1:1", "--epochs", "1",
            "--split", "task1", "--seed", "5", "--out", s(t),
        ]);
    }
    for f in ["model.json", "loss.csv"] {
        assert_eq!(fs::read(t1.join(f)).unwrap(), fs::read(t2.join(f)).unwrap(), "{f}");
    }
    let model = t1.join("model.json");

    let train_csv = root.join("train.csv");
    let test_csv = root.join("test.csv");
    for (side, path) in [("train", &train_csv), ("test", &test_csv)] {
        ok(&[
            "features", "--dataset", s(&manifest), "--method", "AG_ASDF", "--model", s(&model), "--split",
            "task1", "--side", side, "--out", s(path),
        ]);
    }
    let header = fs::read_to_string(&train_csv).unwrap();
    assert!(header.starts_with("method,ride_id,speed,label,f0,"));
    let report = ok(&["classify", "--train", s(&train_csv), "--test", s(&test_csv)]);
    assert!(report.contains("average"), "{report}");

    let signal = d1.join(
        fs::read_dir(&d1)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .find(|n| n.ends_with("acoustic.f32"))
            .unwrap(),
    );
    let layers = root.join("layers");
    ok(&["transform", "--input", s(&signal), "--model", s(&model), "--out", s(&layers)]);
    assert!(layers.join("detail_1.csv").is_file() && layers.join("approximation.csv").is_file());
    let denoised = root.join("denoised.f32");
    ok(&["denoise", "--input", s(&signal), "--model", s(&model), "--out", s(&denoised)]);
    assert_eq!(fs::metadata(&denoised).unwrap().len(), fs::metadata(&signal).unwrap().len());

    let (e1, e2) = (root.join("exp1"), root.join("exp2"));
    for e in [&e1, &e2] {
        ok(&[
            "experiment", "--plan", "c2", "--dataset", s(&manifest), "--methods", "FDWT,DESPAWN", "--epochs", "1",
            "--repetitions", "2", "--out", s(e),
        ]);
    }
    for f in ["c2.csv", "c2.txt"] {
        assert_eq!(fs::read(e1.join(f)).unwrap(), fs::read(e2.join(f)).unwrap(), "{f}");
    }
}
