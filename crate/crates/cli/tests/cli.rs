//! End-to-end checks of the command-line surface: exit codes, artifact
//! determinism, and the JSON formats.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dropshape"))
}

fn workdir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dropshape-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(
        dir.join("exp.json"),
        r#"{"family": "exponential", "params": {}, "n": 2}"#,
    )
    .unwrap();
    std::fs::write(
        dir.join("disk.json"),
        r#"{"center": [0.0, 0.0], "r0": 1.0, "modes": []}"#,
    )
    .unwrap();
    std::fs::write(
        dir.join("peanut.json"),
        r#"{"center": [0.0, 0.0], "r0": 1.0, "modes": [[3, 0.25, 0.0]]}"#,
    )
    .unwrap();
    dir
}

#[test]
fn exit_codes() {
    let dir = workdir();
    // happy path
    let out = bin()
        .args(["kernel-info", "--kernel"])
        .arg(dir.join("exp.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // validation error: negative epsilon
    let out = bin()
        .args(["perim", "--shape"])
        .arg(dir.join("disk.json"))
        .arg("--kernel")
        .arg(dir.join("exp.json"))
        .args(["--eps", "-1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("epsilon must be positive"), "stderr: {err}");

    // malformed shape file is a validation error too
    std::fs::write(dir.join("bad.json"), "{not json").unwrap();
    let out = bin()
        .args(["perim", "--shape"])
        .arg(dir.join("bad.json"))
        .arg("--kernel")
        .arg(dir.join("exp.json"))
        .args(["--eps", "0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // unknown subcommand prints usage and exits 1
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn perim_emits_sorted_json_report() {
    let dir = workdir();
    let out_path = dir.join("rep.json");
    let out = bin()
        .args(["perim", "--shape"])
        .arg(dir.join("disk.json"))
        .arg("--kernel")
        .arg(dir.join("exp.json"))
        .args(["--eps", "0.5", "--method", "slicing", "--out"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let per = v["per_nonlocal"].as_f64().unwrap();
    let p = v["per_local"].as_f64().unwrap();
    assert!(per > 0.0 && per < p);
    // keys arrive sorted from the BTreeMap-backed value
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(|s| s.as_str()).collect();
    let mut sorted = keys.clone();
    sorted.sort_unstable();
    assert_eq!(keys, sorted);
}

#[test]
fn artifacts_are_deterministic() {
    let dir = workdir();
    let run = |tag: &str| -> (Vec<u8>, Vec<u8>) {
        let dump = dir.join(format!("slices-{tag}.csv"));
        let out = dir.join(format!("conv-{tag}.csv"));
        let st = bin()
            .args(["slice-check", "--shape"])
            .arg(dir.join("peanut.json"))
            .arg("--kernel")
            .arg(dir.join("exp.json"))
            .args(["--eps", "0.5", "--dump"])
            .arg(&dump)
            .args(["--dump-directions", "4", "--dump-offsets", "16", "--out"])
            .arg(dir.join(format!("sc-{tag}.json")))
            .status()
            .unwrap();
        assert!(st.success());
        let st = bin()
            .args(["convexify", "--kernel"])
            .arg(dir.join("exp.json"))
            .args(["--eps", "0.3", "--count", "2", "--seed", "7", "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success());
        (std::fs::read(&dump).unwrap(), std::fs::read(&out).unwrap())
    };
    let (dump_a, conv_a) = run("a");
    let (dump_b, conv_b) = run("b");
    assert_eq!(dump_a, dump_b, "slice dump must be byte-identical");
    assert_eq!(conv_a, conv_b, "convexify table must be byte-identical");
    // CSV has the promised header
    let text = String::from_utf8(conv_a).unwrap();
    assert!(text.starts_with("id,was_convex,critical_shape"));
    assert!(text.lines().count() == 3);
}

#[test]
fn batch_energy_evaluation() {
    let dir = workdir();
    let batch = format!(
        r#"[{{"shape": "{}", "kernel": "{}", "eps": 0.4, "gamma": 0.5, "method": "slicing"}}]"#,
        dir.join("disk.json").display(),
        dir.join("exp.json").display()
    );
    std::fs::write(dir.join("batch.json"), batch).unwrap();
    let out = bin()
        .args(["energy", "--batch"])
        .arg(dir.join("batch.json"))
        .arg("--out")
        .arg(dir.join("reports.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("reports.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert!(v[0]["per_nonlocal"].as_f64().unwrap() > 0.0);
}

#[test]
fn oned_check_runs_clean() {
    let dir = workdir();
    let out = bin()
        .args(["oned-check", "--kernel"])
        .arg(dir.join("exp.json"))
        .args(["--eps", "1.0", "--count", "8", "--seed", "3", "--out"])
        .arg(dir.join("oned.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("oned.json")).unwrap()).unwrap();
    assert!(v["max_abs_error"].as_f64().unwrap() < 1e-6);
}
