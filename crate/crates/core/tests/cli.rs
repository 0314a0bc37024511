mod common;

use std::fs;
use std::process::Command;

fn phaseret() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phaseret"))
}

#[test]
fn solve_twice_is_byte_identical_and_report_summarizes() {
    if !common::have_mnist("cli solve") {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hio.json");
    fs::write(
        &cfg,
        serde_json::json!({
            "dataset": "mnist",
            "method": "hio",
            "operator": {"kind": "fourier2d", "h": 28, "w": 28},
            "iters": 20,
            "restarts": 2,
            "output": dir.path().join("a.csv"),
            "data_root": common::data_root(),
        })
        .to_string(),
    )
    .unwrap();
    for out in ["a.csv", "b.csv"] {
        let o = phaseret()
            .args(["solve", "--limit", "3", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(out))
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    // Only the output path differs between the runs, and it is part of the config checksum.
    let strip = |v: &[u8]| {
        String::from_utf8(v.to_vec())
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&a), strip(&b));
    let again = phaseret()
        .args(["solve", "--limit", "3", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(again.status.success());
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), a);

    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 5);
    let summary = dir.path().join("summary.csv");
    let o = phaseret()
        .arg("report")
        .arg(dir.path().join("a.csv"))
        .arg("--out")
        .arg(&summary)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = fs::read_to_string(&summary).unwrap();
    assert!(s.lines().nth(1).unwrap().starts_with("mnist,hio,fourier28x28,0.0,784,3,"));
    assert!(dir.path().join("summary-histogram.csv").exists());
}

#[test]
fn failures_print_a_machine_readable_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"dataset":"mnist","method":"hio","operator":{"kind":"fourier2d","h":28,"w":28},"output":"x.csv","colour":1}"#,
    )
    .unwrap();
    let o = phaseret().args(["solve", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let line: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(line["error"], "invalid_config");
    assert!(line["message"].as_str().unwrap().contains("colour"));

    fs::write(
        &cfg,
        serde_json::json!({
            "dataset": "mnist",
            "method": "hio",
            "operator": {"kind": "fourier2d", "h": 28, "w": 28},
            "output": dir.path().join("x.csv"),
            "data_root": dir.path().join("nowhere"),
        })
        .to_string(),
    )
    .unwrap();
    let o = phaseret().args(["solve", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let line: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(line["error"], "dataset_missing");
}
