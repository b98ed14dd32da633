//! Scenario configuration: a TOML file with problem, quadrature, probe,
//! verification, finite-difference, kernel and output blocks. Fields are
//! addressed by catalog ID plus parameters, so every derivative stays
//! analytic.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use polycal::diffop::{GammaVec, ProblemSpec};
use polycal::fd::Grid1D;
use polycal::field::{FieldRef, PolyGauss, SourceField, TimeProfile};
use polycal::numerics::QuadSpec;
use polycal::solver::{ProbeGrid, VerifyOptions};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub problem: Option<ProblemBlock>,
    #[serde(default)]
    pub quadrature: QuadratureBlock,
    #[serde(default)]
    pub probes: ProbeBlock,
    #[serde(default)]
    pub verify: VerifyBlock,
    #[serde(default)]
    pub fd: FdBlock,
    #[serde(default)]
    pub kernel: KernelBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub n: usize,
    pub m: usize,
    pub gamma: Vec<f64>,
    /// φ_0, ..., φ_{m−1}.
    pub initial: Vec<FieldSpec>,
    #[serde(default)]
    pub source: Vec<SourceTerm>,
}

/// Catalog entry for an even field on R^n.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// amp · e^{−a|x|²}.
    Gaussian {
        #[serde(default = "one")]
        amp: f64,
        #[serde(default = "one")]
        a: f64,
    },
    /// |x|^{2q}.
    Power {
        q: u32,
    },
    /// amp · |x|^{2q} e^{−a|x|²}.
    GaussPower {
        #[serde(default = "one")]
        amp: f64,
        q: u32,
        #[serde(default = "one")]
        a: f64,
    },
    /// coef · Π x_k^{powers_k}, powers even.
    Monomial {
        coef: f64,
        powers: Vec<u32>,
    },
}

fn one() -> f64 {
    1.0
}

impl FieldSpec {
    pub fn build(&self, n: usize) -> std::result::Result<PolyGauss, String> {
        let err = |e: polycal::Error| e.to_string();
        Ok(match self {
            FieldSpec::Zero => PolyGauss::zero(n),
            FieldSpec::Constant { value } => PolyGauss::constant(n, *value),
            FieldSpec::Gaussian { amp, a } => PolyGauss::gaussian(n, *amp, *a).map_err(err)?,
            FieldSpec::Power { q } => PolyGauss::power(n, *q),
            FieldSpec::GaussPower { amp, q, a } => {
                PolyGauss::gauss_power(n, *amp, *q, *a).map_err(err)?
            }
            FieldSpec::Monomial { coef, powers } => {
                if powers.len() != n {
                    return Err(format!("monomial has {} powers for n = {n}", powers.len()));
                }
                if powers.iter().any(|p| p % 2 != 0) {
                    return Err("monomial powers must be even".into());
                }
                PolyGauss::monomial(n, *coef, powers)
            }
        })
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SourceTerm {
    pub field: FieldSpec,
    #[serde(default)]
    pub time: TimeSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeSpec {
    #[default]
    Constant,
    Polynomial {
        coefficients: Vec<f64>,
    },
    Exp {
        rate: f64,
    },
    Cos {
        omega: f64,
    },
}

impl TimeSpec {
    fn build(&self) -> TimeProfile {
        match self {
            TimeSpec::Constant => TimeProfile::Constant,
            TimeSpec::Polynomial { coefficients } => TimeProfile::Polynomial(coefficients.clone()),
            TimeSpec::Exp { rate } => TimeProfile::Exp(*rate),
            TimeSpec::Cos { omega } => TimeProfile::Cos(*omega),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureBlock {
    pub rel_tol: f64,
    pub max_level: u32,
}

impl Default for QuadratureBlock {
    fn default() -> Self {
        QuadratureBlock {
            rel_tol: 1e-11,
            max_level: QuadSpec::default().max_level,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeBlock {
    /// Points per axis; n > 1 uses the Cartesian product.
    pub x: LineSpec,
    pub times: Vec<f64>,
    /// Extra uniformly drawn probes inside the box, seeded by `--seed`.
    pub random: usize,
}

impl Default for ProbeBlock {
    fn default() -> Self {
        ProbeBlock {
            x: LineSpec {
                lo: 0.25,
                hi: 2.5,
                count: 4,
            },
            times: vec![0.1, 0.5, 1.0],
            random: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyBlock {
    /// Replaces every property tolerance.
    pub tolerance: Option<f64>,
    /// Per-property tolerance overrides, by exact name.
    pub tolerances: BTreeMap<String, f64>,
    pub time_step: Option<f64>,
    pub space_step: Option<f64>,
    pub initial_times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdBlock {
    pub length: f64,
    pub nodes: usize,
    pub dt: f64,
    pub final_time: f64,
    /// Gaps are reported on nodes with x ≤ x_max.
    pub x_max: f64,
    /// Time steps of the temporal refinement study (nodes fixed).
    pub study_dts: Vec<f64>,
    /// Node counts of the spatial refinement study (dt fixed).
    pub study_nodes: Vec<usize>,
}

impl Default for FdBlock {
    fn default() -> Self {
        FdBlock {
            length: 8.0,
            nodes: 2048,
            dt: 1e-4,
            final_time: 0.5,
            x_max: 3.0,
            study_dts: vec![0.1, 0.05, 0.025],
            study_nodes: vec![64, 128, 256],
        }
    }
}

impl FdBlock {
    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.length, self.nodes, self.dt, self.final_time)
            .map_err(|e| CliError::Config(format!("fd: {e}")))
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelBlock {
    pub gamma: Vec<f64>,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub s: LineSpec,
}

impl Default for KernelBlock {
    fn default() -> Self {
        KernelBlock {
            gamma: vec![-0.4, 0.0, 0.4],
            x: vec![0.0, 1.0, 2.5],
            t: vec![0.1, 1.0],
            s: LineSpec {
                lo: 0.0,
                hi: 5.0,
                count: 51,
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: Option<String>,
    pub csv: bool,
    pub json: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: None,
            csv: true,
            json: true,
        }
    }
}

/// A parsed config together with the text it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub source: String,
    pub label: String,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("{}: cannot read config: {e}", path.display()))
        })?;
        Self::from_str(&text, &path.display().to_string())
    }

    pub fn from_str(text: &str, label: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let (line, col) = e.span().map_or((1, 1), |s| line_col(text, s.start));
            CliError::Config(format!("{label}:{line}:{col}: {}", e.message().trim()))
        })?;
        let loaded = LoadedConfig {
            config,
            source: text.to_string(),
            label: label.to_string(),
        };
        loaded.check()?;
        Ok(loaded)
    }

    /// SHA-256 of the config text, hex encoded.
    pub fn hash(&self) -> String {
        sha256_hex(self.source.as_bytes())
    }

    /// Error anchored at the first line that mentions `key`.
    pub fn error_at(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        let line = self
            .source
            .lines()
            .position(|l| {
                let l = l.trim_start();
                l.starts_with(key)
                    || l.starts_with(&format!("[{key}"))
                    || l.starts_with(&format!("[[{key}"))
            })
            .map_or(1, |i| i + 1);
        CliError::Config(format!("{}:{line}:1: {msg}", self.label))
    }

    fn check(&self) -> Result<()> {
        let c = &self.config;
        if let Some(p) = &c.problem {
            if p.gamma.len() != p.n {
                return Err(self.error_at(
                    "gamma",
                    format!("gamma has {} entries for n = {}", p.gamma.len(), p.n),
                ));
            }
            if !(1..=3).contains(&p.m) || p.initial.len() != p.m {
                return Err(self.error_at(
                    "m",
                    format!(
                        "m = {} needs 1 ≤ m ≤ 3 and as many initial fields, got {}",
                        p.m,
                        p.initial.len()
                    ),
                ));
            }
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(c.quadrature.rel_tol) || c.quadrature.max_level == 0 {
            return Err(self.error_at(
                "rel_tol",
                "quadrature tolerance and max level must be positive",
            ));
        }
        if let Some(t) = c.verify.tolerance {
            if !positive(t) {
                return Err(
                    self.error_at("tolerance", format!("tolerance must be positive, got {t}"))
                );
            }
        }
        for (name, &t) in &c.verify.tolerances {
            if !positive(t) {
                return Err(self.error_at(
                    name,
                    format!("tolerance for {name} must be positive, got {t}"),
                ));
            }
        }
        if c.probes.x.count == 0
            || c.probes.times.is_empty()
            || c.probes.times.iter().any(|&t| !positive(t))
        {
            return Err(self.error_at("times", "probes need at least one point and positive times"));
        }
        if c.kernel.t.iter().any(|&t| !positive(t)) || c.kernel.s.count == 0 {
            return Err(self.error_at("kernel", "kernel times must be positive and s needs points"));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let p = self.config.problem.as_ref().ok_or_else(|| {
            CliError::Config(format!("{}:1:1: missing [problem] block", self.label))
        })?;
        let gamma = GammaVec::strict(p.gamma.clone()).map_err(|e| self.error_at("gamma", e))?;
        let mut phis = Vec::with_capacity(p.m);
        for f in &p.initial {
            let field = f.build(p.n).map_err(|e| self.error_at("initial", e))?;
            phis.push(Arc::new(field) as FieldRef);
        }
        let source = if p.source.is_empty() {
            None
        } else {
            let mut s = SourceField::new(p.n);
            for term in &p.source {
                let field = term
                    .field
                    .build(p.n)
                    .map_err(|e| self.error_at("source", e))?;
                s = s.term(field, term.time.build());
            }
            Some(s)
        };
        ProblemSpec::new(gamma, phis, source).map_err(|e| self.error_at("problem", e))
    }

    pub fn quad_spec(&self) -> Result<QuadSpec> {
        let q = &self.config.quadrature;
        let spec = QuadSpec {
            rel_tol: q.rel_tol,
            max_level: q.max_level,
            ..QuadSpec::default()
        };
        spec.validate()
            .map_err(|e| self.error_at("quadrature", e))?;
        Ok(spec)
    }

    /// Cartesian product of the probe line on every axis, then `random`
    /// extra points drawn in the same box.
    pub fn probe_grid(&self, n: usize, seed: u64) -> ProbeGrid {
        let p = &self.config.probes;
        let line = ProbeGrid::line(p.x.lo, p.x.hi, p.x.count, vec![]);
        let axis: Vec<f64> = line.points.into_iter().map(|v| v[0]).collect();
        let mut points: Vec<Vec<f64>> = vec![vec![]];
        for _ in 0..n {
            points = points
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&a| {
                        let mut q = prefix.clone();
                        q.push(a);
                        q
                    })
                })
                .collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..p.random {
            points.push((0..n).map(|_| rng.gen_range(p.x.lo..=p.x.hi)).collect());
        }
        ProbeGrid {
            points,
            times: p.times.clone(),
        }
    }

    pub fn verify_options(&self) -> VerifyOptions {
        let v = &self.config.verify;
        let d = VerifyOptions::default();
        VerifyOptions {
            time_step: v.time_step.unwrap_or(d.time_step),
            space_step: v.space_step.unwrap_or(d.space_step),
            initial_times: v.initial_times.clone().unwrap_or(d.initial_times),
            rel_tol: self.config.quadrature.rel_tol,
            fixed_level: d.fixed_level,
        }
    }

    /// Tolerance for a property: the global override, else the per-name
    /// override, else the built-in value.
    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        let v = &self.config.verify;
        v.tolerance
            .or_else(|| v.tolerances.get(name).copied())
            .unwrap_or(default)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before
        .rfind('\n')
        .map_or(before.len(), |i| before.len() - i - 1)
        + 1;
    (line, col)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAUSSIAN: &str = r#"
[problem]
n = 1
m = 1
gamma = [0.25]
initial = [{ id = "gaussian", a = 1.0 }]
"#;

    #[test]
    fn parses_catalog_problem() {
        let c = LoadedConfig::from_str(GAUSSIAN, "g.toml").unwrap();
        let p = c.problem().unwrap();
        assert_eq!((p.dim(), p.order()), (1, 1));
        assert_eq!(c.probe_grid(1, 0).points.len(), 4);
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn missing_gamma_is_line_anchored() {
        let text = "[problem]\nn = 1\nm = 1\ninitial = [{ id = \"zero\" }]\n";
        let err = LoadedConfig::from_str(text, "bad.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("bad.toml:1:"), "{msg}");
        assert!(msg.contains("gamma"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_catalog_id_points_at_its_line() {
        let text = GAUSSIAN.replace("gaussian", "lorentzian");
        let msg = LoadedConfig::from_str(&text, "c.toml")
            .unwrap_err()
            .to_string();
        assert!(msg.starts_with("c.toml:6:"), "{msg}");
    }

    #[test]
    fn gamma_outside_the_strict_range() {
        let text = GAUSSIAN.replace("0.25", "0.7");
        let c = LoadedConfig::from_str(&text, "c.toml").unwrap();
        let msg = c.problem().unwrap_err().to_string();
        assert!(msg.starts_with("c.toml:5:1:"), "{msg}");
    }

    #[test]
    fn random_probes_follow_the_seed() {
        let text = format!("{GAUSSIAN}\n[probes]\nrandom = 3\ntimes = [0.5]\nx = {{ lo = 0.0, hi = 1.0, count = 2 }}\n");
        let c = LoadedConfig::from_str(&text, "c.toml").unwrap();
        let a = c.probe_grid(1, 7);
        assert_eq!(a, c.probe_grid(1, 7));
        assert_ne!(a, c.probe_grid(1, 8));
        assert_eq!(a.points.len(), 5);
    }

    #[test]
    fn tolerance_precedence() {
        let text = format!("{GAUSSIAN}\n[verify.tolerances]\n\"kernel.mass\" = 1e-3\n");
        let c = LoadedConfig::from_str(&text, "c.toml").unwrap();
        assert_eq!(c.tolerance("kernel.mass", 1e-10), 1e-3);
        assert_eq!(c.tolerance("kernel.other", 1e-10), 1e-10);
    }
}
