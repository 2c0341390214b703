//! The `lpfsi` binary: outputs, exit codes and error messages.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lpfsi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpfsi")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SHORT: &str = r#"{
    "chart": {"kind": "rigid_disc", "radius": 1.0},
    "q": [0, 0, 0], "qdot": [0, 0.5, 0],
    "vortices": {"positions": [[3, 1]], "strengths": [1.0], "delta": 0.1},
    "n_panels": 32, "dt": 0.01, "t_end": 0.05,
    "fields": {"x": [-3, 3], "y": [-2, 2], "nx": 7, "ny": 5, "every": 2}
}"#;

#[test]
fn run_writes_trajectory_meta_and_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "short.json", SHORT);
    let out = dir.path().join("out");
    let o = lpfsi(&["run", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["status"], "completed");
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["config"]["dt"], 0.01);
    assert!(meta["wall_time_s"].as_f64().unwrap() >= 0.0);
    // Rows 0, 2, 4 of six.
    for t in ["0.000000", "0.020000", "0.040000"] {
        let f = std::fs::read_to_string(out.join(format!("fields_t{t}.csv"))).unwrap();
        assert_eq!(f.lines().next(), Some("x,y,u,v"));
        assert_eq!(f.lines().count(), 1 + 35);
        // The grid centre is inside the disc.
        assert!(f.lines().any(|l| l.starts_with("0.0,0.0,NaN,NaN")), "{f}");
    }
    assert!(!out.join("fields_t0.010000.csv").exists());
}

#[test]
fn several_configs_get_one_directory_each() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", SHORT);
    let b = write(dir.path(), "b.json", &SHORT.replace("\"t_end\": 0.05", "\"t_end\": 0.02"));
    let out = dir.path().join("out");
    let o = lpfsi(&["--jobs", "2", "run", a.to_str().unwrap(), b.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(out.join("a/trajectory.csv")).unwrap().lines().count(), 7);
    assert_eq!(std::fs::read_to_string(out.join("b/trajectory.csv")).unwrap().lines().count(), 4);
}

#[test]
fn bad_config_exits_1_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "typo.json", &SHORT.replace("\"dt\"", "\"dtt\""));
    let out = dir.path().join("out");
    let o = lpfsi(&["run", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("typo.json") && e.contains("line 5") && e.contains("dtt"), "{e}");
    assert!(!out.exists());

    let missing = dir.path().join("missing.json");
    let o = lpfsi(&["run", missing.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_1_and_version_exits_0() {
    assert_eq!(lpfsi(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(lpfsi(&["run"]).status.code(), Some(1));
    assert_eq!(lpfsi(&["plot", "x.csv", "--kind", "pressure", "-o", "x.svg"]).status.code(), Some(1));
    let v = lpfsi(&["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn mid_run_failure_keeps_partial_output_and_exits_2() {
    // The disc runs into the blob well before t = 1.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "crash.json",
        r#"{
            "chart": {"kind": "rigid_disc", "radius": 1.0},
            "q": [0, 0, 0], "qdot": [0, 5.0, 0],
            "vortices": {"positions": [[3, 0]], "strengths": [0.1], "delta": 0.1},
            "n_panels": 32, "dt": 0.01, "t_end": 1.0, "output_stride": 5
        }"#,
    );
    let out = dir.path().join("out");
    let o = lpfsi(&["run", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let rows = std::fs::read_to_string(out.join("trajectory.csv")).unwrap().lines().count() - 1;
    assert!((2..21).contains(&rows), "{rows}");
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["status"], "aborted");
    assert_eq!(meta["rows"], rows);
    let t = meta["error"]["time"].as_f64().unwrap();
    assert!(t > 0.2 && t < 1.0, "{t}");
}

#[test]
fn plot_renders_and_names_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "short.json", SHORT);
    let out = dir.path().join("out");
    assert!(lpfsi(&["run", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]).status.success());
    let csv = out.join("trajectory.csv");
    for kind in ["positions", "energy", "forces"] {
        let svg = dir.path().join(format!("{kind}.svg"));
        let o = lpfsi(&["plot", csv.to_str().unwrap(), "--kind", kind, "-o", svg.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = std::fs::read_to_string(&svg).unwrap();
        assert!(text.starts_with("<svg") || text.starts_with("<?xml"), "{kind}");
        assert!(text.trim_end().ends_with("</svg>"));
    }

    let good = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = good.lines().map(String::from).collect();
    lines[3] = lines[3].replacen(',', ",oops,", 1);
    let bad = write(dir.path(), "bad.csv", &(lines.join("\n") + "\n"));
    let o = lpfsi(&["plot", bad.to_str().unwrap(), "--kind", "energy", "-o", dir.path().join("b.svg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("row 4"), "{}", stderr(&o));
}

#[test]
fn verify_reports_json_and_honours_thresholds() {
    let o = lpfsi(&["verify", "--panels", "64"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["passed"], true);
    let names: Vec<&str> = doc["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for n in ["vertical_variation", "horizontal_variation", "df_splitting", "torsion_free_exact", "connection_form"] {
        assert!(names.contains(&n), "{n}");
    }

    let dir = tempfile::tempdir().unwrap();
    // First-order differences cannot have a slope of 1.5 or more.
    let strict = write(dir.path(), "strict.json", r#"{"slope_min": 1.5, "slope_max": 2.5}"#);
    let o = lpfsi(&["verify", "--panels", "64", "--thresholds", strict.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["passed"], false);

    let typo = write(dir.path(), "typo.json", r#"{"slope_mni": 0.5}"#);
    assert_eq!(lpfsi(&["verify", "--thresholds", typo.to_str().unwrap()]).status.code(), Some(1));
}
