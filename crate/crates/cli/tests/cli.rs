use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn polycal(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polycal"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("POLYCAL_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn constant_scenario_stays_one() {
    let out = tempfile::tempdir().unwrap();
    let o = polycal(&["solve"], &scenario("constant.toml"), out.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let (header, rows) = csv_rows(&out.path().join("solve.csv"));
    assert_eq!(header, ["x_1", "t", "u"]);
    assert_eq!(rows.len(), 28);
    for r in rows {
        assert!((r[2] - 1.0).abs() <= 1e-9, "{r:?}");
    }
    let report = json(&out.path().join("solve.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert!(report["timing"]["wall_seconds"].is_number());
}

#[test]
fn quadratic_scenario_is_exact() {
    let out = tempfile::tempdir().unwrap();
    let o = polycal(&["solve"], &scenario("quadratic.toml"), out.path());
    assert_eq!(o.status.code(), Some(0));
    let (_, rows) = csv_rows(&out.path().join("solve.csv"));
    for r in rows {
        let exact = r[0] * r[0] + 5.0 * r[1];
        assert!((r[2] - exact).abs() <= 1e-8, "{r:?}");
    }
}

#[test]
fn malformed_config_exits_two_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "[problem]\nn = 1\nm = 1\ninitial = [{ id = \"zero\" }]\n",
    )
    .unwrap();
    let o = polycal(&["solve"], &path, dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml:1:"), "{err}");
    assert!(err.contains("gamma"), "{err}");
}

#[test]
fn data_failing_validation_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m2.toml");
    // A Gaussian φ_0 with m = 2 fails the compatibility check.
    let text = "[problem]\nn = 1\nm = 2\ngamma = [0.25]\ninitial = [{ id = \"gaussian\" }, { id = \"gaussian\" }]\n";
    std::fs::write(&path, text).unwrap();
    let o = polycal(&["solve"], &path, dir.path());
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn filter_restricts_to_kernel_properties() {
    let out = tempfile::tempdir().unwrap();
    let o = polycal(
        &["verify", "--filter", "kernel.*"],
        &scenario("gaussian.toml"),
        out.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let report = json(&out.path().join("verify.json"));
    let names: Vec<&str> = report["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "kernel.mass",
            "kernel.weber_sonine",
            "kernel.semigroup",
            "kernel.classical_limit"
        ]
    );
}

#[test]
fn tiny_tolerance_gives_controlled_failures() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("strict.toml");
    let base = std::fs::read_to_string(scenario("gaussian.toml")).unwrap();
    std::fs::write(&path, format!("{base}\n[verify]\ntolerance = 1e-16\n")).unwrap();
    let o = polycal(&["verify", "--filter", "kernel.*"], &path, dir.path());
    assert_eq!(o.status.code(), Some(1));
    let report = json(&dir.path().join("verify.json"));
    let results = report["results"].as_array().unwrap();
    assert!(results.iter().any(|r| r["passed"] == false));
    for r in results {
        assert_eq!(r["tolerance"], 1e-16);
        assert!(r["measured"].is_number());
        assert!(r["error"].is_null());
    }
}

#[test]
fn scenario_properties_follow_the_config() {
    let out = tempfile::tempdir().unwrap();
    let o = polycal(
        &["verify", "--filter", "scenario.*"],
        &scenario("source.toml"),
        out.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report = json(&out.path().join("verify.json"));
    assert_eq!(report["results"].as_array().unwrap().len(), 3);
}

#[test]
fn compare_exact_polynomial() {
    let out = tempfile::tempdir().unwrap();
    let o = polycal(&["compare"], &scenario("quadratic.toml"), out.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report = json(&out.path().join("compare.json"));
    let max = report["results"]["max_gap"].as_f64().unwrap();
    assert!(max <= 1e-6, "{max:e}");
    let (header, _) = csv_rows(&out.path().join("compare.csv"));
    assert_eq!(header, ["x_1", "t", "analytic", "fd", "gap"]);
}

#[test]
fn compare_gaussian_with_orders() {
    let out = tempfile::tempdir().unwrap();
    let o = polycal(&["compare"], &scenario("gaussian.toml"), out.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = &json(&out.path().join("compare.json"))["results"];
    assert!(r["max_gap"].as_f64().unwrap() <= 1e-3);
    for kind in ["time", "space"] {
        for o in r["orders"][kind]["orders"].as_array().unwrap() {
            let o = o.as_f64().unwrap();
            assert!((1.8..=2.2).contains(&o), "{kind}: {o}");
        }
    }
}

#[test]
fn compare_plane_uses_alternating_directions() {
    let out = tempfile::tempdir().unwrap();
    let o = polycal(&["compare"], &scenario("plane.toml"), out.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = &json(&out.path().join("compare.json"))["results"];
    assert!(r["max_gap"].as_f64().unwrap() <= 1e-3, "{}", r["max_gap"]);
}

#[test]
fn kernel_tables() {
    let out = tempfile::tempdir().unwrap();
    let o = polycal(&["kernel"], &scenario("kernel.toml"), out.path());
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&out.path().join("kernel.csv"));
    assert_eq!(header, ["gamma", "x", "s", "t", "weight"]);
    assert_eq!(rows.len(), 4 * 4 * 2 * 101);
    assert!(rows.iter().all(|r| r[4] >= 0.0));
    let report = json(&out.path().join("kernel.json"));
    for m in report["results"].as_array().unwrap() {
        assert!(m["defect"].as_f64().unwrap().abs() <= 1e-9, "{m}");
    }
}

#[test]
fn env_var_sets_output_dir() {
    let out = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_polycal"))
        .args(["kernel", "--config"])
        .arg(scenario("kernel.toml"))
        .env("POLYCAL_OUT_DIR", out.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(out.path().join("kernel.csv").exists());
}

#[test]
fn seeded_probes_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("random.toml");
    let base = std::fs::read_to_string(scenario("constant.toml")).unwrap();
    std::fs::write(
        &path,
        base.replace("times = [0.01, 0.1, 1.0, 2.0]", "times = [0.5]\nrandom = 4"),
    )
    .unwrap();
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = polycal(&["solve", "--seed", seed, "--jobs", "1"], &path, &out);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        std::fs::read(out.join("solve.csv")).unwrap()
    };
    let (a, b, c) = (run("3", "a"), run("3", "b"), run("4", "c"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}
