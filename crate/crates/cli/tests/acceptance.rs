//! Acceptance run: one line per criterion, tolerances pinned here rather
//! than taken from the suite defaults. Exits nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;

use polycal_cli::suite::{run_suite, Context, PropertyResult};

/// (criterion, description, [(property, pinned tolerance)]).
type Criterion = (u32, &'static str, &'static [(&'static str, f64)]);

const CRITERIA: &[Criterion] = &[
    (1, "EK power-law eigenrelation", &[("ek.power_law", 1e-9)]),
    (
        2,
        "EK round-trip inversion",
        &[
            ("ek.round_trip.plain", 1e-8),
            ("ek.round_trip.generalized", 1e-7),
        ],
    ),
    (
        3,
        "intertwining residuals",
        &[
            ("ek.intertwine.single", 1e-6),
            ("ek.intertwine.squared", 1e-5),
            ("ek.intertwine.sum", 1e-5),
            ("ek.intertwine.inverse", 1e-5),
        ],
    ),
    (4, "kernel mass", &[("kernel.mass", 1e-10)]),
    (5, "Weber-Sonine identity", &[("kernel.weber_sonine", 1e-8)]),
    (6, "Chapman-Kolmogorov", &[("kernel.semigroup", 1e-8)]),
    (
        7,
        "exact-solution catalog",
        &[("solver.exact_catalog", 1e-8)],
    ),
    (
        8,
        "classical-solution residuals",
        &[
            ("solver.residual.pde", 1e-4),
            ("solver.residual.initial_order", 0.1),
            ("solver.residual.boundary", 1e-7),
        ],
    ),
    (
        9,
        "transmutation consistency",
        &[("solver.transmutation", 1e-6)],
    ),
    (
        10,
        "finite-difference cross-validation",
        &[
            ("fd.gap.first_order", 1e-3),
            ("fd.gap.second_order", 3e-3),
            ("fd.order.time", 0.2),
            ("fd.order.space", 0.2),
        ],
    ),
    (
        11,
        "classical-limit kernel",
        &[("kernel.classical_limit", 2e-2)],
    ),
];

fn pinned(name: &str) -> Option<f64> {
    CRITERIA
        .iter()
        .flat_map(|c| c.2.iter())
        .find(|(n, _)| *n == name)
        .map(|&(_, t)| t)
}

fn describe(r: &PropertyResult) -> String {
    match (&r.error, r.measured) {
        (Some(e), _) => format!("{} error: {e}", r.name),
        (None, Some(m)) => format!("{} {m:.3e} <= {:.0e}", r.name, r.tolerance),
        (None, None) => format!("{} not measured", r.name),
    }
}

fn verify_json_without_timing(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("verify.json")).expect("verify.json written");
    let mut v: serde_json::Value = serde_json::from_str(&text).expect("valid JSON");
    v.as_object_mut().expect("report object").remove("timing");
    v
}

/// Two `verify` runs with the same config must agree byte for byte outside
/// the timing field.
fn determinism() -> (bool, String) {
    let bin = env!("CARGO_BIN_EXE_polycal");
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/gaussian.toml");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let status = Command::new(bin)
            .args(["verify", "--filter", "kernel.*", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(d.path())
            .status()
            .expect("binary runs");
        if status.code() != Some(0) {
            return (false, format!("verify exited with {status}"));
        }
    }
    let a = verify_json_without_timing(dirs[0].path());
    let b = verify_json_without_timing(dirs[1].path());
    let csv_a = std::fs::read(dirs[0].path().join("verify.csv")).unwrap();
    let csv_b = std::fs::read(dirs[1].path().join("verify.csv")).unwrap();
    let same_json = serde_json::to_vec(&a).unwrap() == serde_json::to_vec(&b).unwrap();
    let hash = a["results_hash"].as_str().unwrap_or("").to_string();
    (
        same_json && csv_a == csv_b,
        format!(
            "json identical {same_json}, csv identical {}, results_hash {}",
            csv_a == csv_b,
            &hash[..12.min(hash.len())]
        ),
    )
}

fn main() {
    let ctx = Context::default();
    let selected = |n: &str| pinned(n).is_some();
    let tolerance = |n: &str, _default: f64| pinned(n).expect("selected names are pinned");
    let results = run_suite(&ctx, &selected, &tolerance);

    let mut all = true;
    for &(id, label, props) in CRITERIA {
        let rs: Vec<&PropertyResult> = props
            .iter()
            .map(|(n, _)| results.iter().find(|r| r.name == *n).expect("property ran"))
            .collect();
        let pass = rs.iter().all(|r| r.passed);
        all &= pass;
        let body: Vec<String> = rs.iter().map(|r| describe(r)).collect();
        println!(
            "criterion {id:>2} {:<4} {label}: {}",
            if pass { "PASS" } else { "FAIL" },
            body.join("; ")
        );
    }
    let (pass, detail) = determinism();
    all &= pass;
    println!(
        "criterion 12 {:<4} determinism of verify output: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    if !all {
        std::process::exit(1);
    }
}
