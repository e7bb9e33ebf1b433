use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmwave-sim"))
        .args(args)
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sweep_flags_reach_the_dataset() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("nested/cp.csv");
    let o = sim(&[
        "collision-probability",
        "--densities",
        "0.05,0.2",
        "--beamwidths-deg",
        "30",
        "--p-grid",
        "1",
        "--replications",
        "20",
        "--seed",
        "7",
        "--out",
        path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(sidecar["spec"]["master_seed"], 7);
    assert_eq!(sidecar["spec"]["replications"], 20);
}

#[test]
fn sidecar_replays_through_run() {
    let dir = tempdir().unwrap();
    let first = dir.path().join("a.csv");
    let o = sim(&[
        "cn-backoff",
        "--blockage-probs",
        "0,0.05",
        "--n-devices",
        "5",
        "--replications",
        "50",
        "--out",
        path(&first),
    ]);
    assert!(o.status.success());
    let second = dir.path().join("b.csv");
    let o = sim(&[
        "run",
        "--config",
        path(&first.with_extension("json")),
        "--out",
        path(&second),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());

    let third = dir.path().join("c.csv");
    let o = sim(&[
        "cn-backoff",
        "--config",
        path(&first.with_extension("json")),
        "--out",
        path(&third),
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read(&first).unwrap(), fs::read(&third).unwrap());
}

#[test]
fn config_of_another_kind_is_rejected() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("u.csv");
    assert!(sim(&["utilization-table", "--out", path(&out)])
        .status
        .success());
    let o = sim(&["cn-backoff", "--config", path(&out.with_extension("json"))]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("utilization_table"));
}

#[test]
fn bundled_presets_match_the_library() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets");
    for name in [
        "fig2a",
        "fig2b",
        "fig3",
        "fig4",
        "fig5",
        "fig6",
        "utilization",
    ] {
        let o = sim(&["preset", name, "--print"]);
        assert!(o.status.success());
        let file = fs::read_to_string(dir.join(format!("{name}.json"))).unwrap();
        assert_eq!(
            String::from_utf8(o.stdout).unwrap().trim(),
            file.trim(),
            "{name}"
        );
    }
}

#[test]
fn utilization_preset_and_summary() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("util.csv");
    assert!(sim(&["preset", "utilization", "--out", path(&out)])
        .status
        .success());
    let o = sim(&[
        "summarize",
        "--input",
        path(&out),
        "--group-by",
        "payload_bytes",
        "--value",
        "utilization",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "payload_bytes,mean,std,ci_low,ci_high,n"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let cases: Vec<Vec<&str>> = vec![
        vec![
            "collision-probability",
            "--beamwidths-deg",
            "500",
            "--out",
            path(&out),
        ],
        vec!["preset", "nope"],
        vec!["run", "--config", "/nonexistent/spec.json"],
        vec![
            "summarize",
            "--input",
            "/nonexistent.csv",
            "--group-by",
            "a",
            "--value",
            "b",
        ],
    ];
    for args in cases {
        let o = sim(&args);
        assert!(!o.status.success(), "{args:?}");
        assert!(
            String::from_utf8_lossy(&o.stderr).starts_with("error:"),
            "{args:?}"
        );
    }
    assert!(!out.exists());
}
