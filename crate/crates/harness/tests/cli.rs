use std::path::Path;
use std::process::{Command, Output};

fn grokbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grokbench"))
        .args(args)
        .output()
        .unwrap()
}

const TINY: [&str; 14] = [
    "--set",
    "dataset.r=2",
    "--set",
    "dataset.gamma_D=160",
    "--set",
    "dataset.test_total=80",
    "--set",
    "train.hidden=[8]",
    "--set",
    "detector.window=2",
    "--runs",
    "1",
    "--max-epochs",
    "10",
];

fn with<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(TINY.iter()).chain(tail).copied().collect()
}

#[test]
fn run_report_and_detect_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig3b");
    let o = grokbench(&with(
        &["run", "--preset", "fig3b"],
        &["--out", out.to_str().unwrap(), "--quiet"],
    ));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = grokbench(&["report", "--dir", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("f=0.2"));
    assert!(out.join("report/point-01_mean_curve.csv").is_file());

    let curve = out.join("point-00/run-000/curve.csv");
    let o = grokbench(&["detect", "--curve", curve.to_str().unwrap(), "--window", "2"]);
    assert!(o.status.success());
    let stored = std::fs::read_to_string(out.join("point-00/run-000/report.json")).unwrap();
    assert_eq!(String::from_utf8(o.stdout).unwrap(), stored);
}

#[test]
fn gen_dataset_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    let o = grokbench(&with(
        &["gen-dataset", "--preset", "fig4b"],
        &["--out", out.to_str().unwrap()],
    ));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["train.csv", "train.json", "test.csv", "test.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let header = std::fs::read_to_string(out.join("train.csv")).unwrap();
    assert!(header.starts_with("x0,x1,"));
    assert_eq!(
        std::fs::read_to_string(out.join("test.csv")).unwrap().lines().count(),
        81
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();
    let code = |o: Output| o.status.code().unwrap();

    assert_eq!(
        code(grokbench(&with(
            &["run"],
            &["--out", out, "--set", "train.eval_interval=0"]
        ))),
        2
    );
    assert_eq!(
        code(grokbench(&with(&["run"], &["--out", out, "--set", "train.nope=1"]))),
        2
    );
    assert_eq!(code(grokbench(&with(&["run", "--preset", "fig7"], &["--out", out]))), 2);
    assert_eq!(
        code(grokbench(&with(
            &["sweep", "--axis", "momentum", "--values", "1"],
            &["--out", out]
        ))),
        2
    );
    assert_eq!(code(grokbench(&with(&["sweep", "--axis", "f"], &["--out", out]))), 2);
    assert_eq!(code(grokbench(&with(&["run"], &[]))), 2);
    assert!(!Path::new(out).exists());

    assert_eq!(code(grokbench(&["report", "--dir", out])), 3);
    assert_eq!(code(grokbench(&["detect", "--curve", "/nonexistent/curve.csv"])), 3);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "epoch,train_loss,train_acc,test_loss,test_acc\n0,1,2,1,0.5\n").unwrap();
    assert_eq!(code(grokbench(&["detect", "--curve", bad.to_str().unwrap()])), 3);
    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "runs = \"many\"\n").unwrap();
    assert_eq!(
        code(grokbench(&["run", "--config", bad_cfg.to_str().unwrap(), "--out", out])),
        2
    );
}
