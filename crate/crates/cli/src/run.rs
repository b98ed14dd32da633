//! The `solve`, `verify`, `compare` and `kernel` workflows and their CSV and
//! JSON outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use polycal::diffop::{assemble_fk, ProblemSpec};
use polycal::fd::{
    adi_solve, convergence_study, fd_solve_with, BoundaryFn, FarBoundary, FdOptions, Grid1D,
};
use polycal::kernel::{weight, KernelWeight};
use polycal::numerics::QuadSpec;
use polycal::solver::{solve_full, Mode, SolutionEvaluator};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{sha256_hex, LoadedConfig};
use crate::error::{CliError, Result};
use crate::suite::{run_suite, Context, PropertyResult, Scenario};

pub const SCHEMA_VERSION: u32 = 1;
pub const OUT_DIR_ENV: &str = "POLYCAL_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "polycal-out";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub filter: Option<glob::Pattern>,
    pub seed: u64,
}

/// `--out`, then the environment variable, then the config, then the default.
pub fn resolve_out_dir(
    flag: Option<PathBuf>,
    env: Option<String>,
    config: &LoadedConfig,
) -> PathBuf {
    flag.or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| config.config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Files written and the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    config_hash: String,
    statistics: Value,
    results: T,
    /// SHA-256 of the compact JSON of `results`.
    results_hash: String,
    /// Wall-clock data; the only nondeterministic part of a report.
    timing: Value,
}

struct Writer<'a> {
    cfg: &'a LoadedConfig,
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(cfg: &'a LoadedConfig, dir: &'a Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Writer {
            cfg,
            dir,
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Output {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
        if !self.cfg.config.output.csv {
            return Ok(());
        }
        self.write(name, &csv_text(header, rows))
    }

    fn json<T: Serialize>(
        &mut self,
        command: &str,
        statistics: Value,
        results: &T,
        started: Instant,
    ) -> Result<()> {
        if !self.cfg.config.output.json {
            return Ok(());
        }
        let compact = serde_json::to_string(results).expect("results serialize");
        let report = Report {
            schema_version: SCHEMA_VERSION,
            command,
            config_hash: self.cfg.hash(),
            statistics,
            results,
            results_hash: sha256_hex(compact.as_bytes()),
            timing: json!({ "wall_seconds": started.elapsed().as_secs_f64() }),
        };
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        self.write(&format!("{command}.json"), &text)
    }
}

/// Comma-separated rows with `{:.16e}` numbers (17 significant digits).
pub fn csv_text(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("writing to a string");
        }
        out.push('\n');
    }
    out
}

fn axis_header(n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("x_{k}")).collect()
}

fn evaluator(cfg: &LoadedConfig) -> Result<(ProblemSpec, QuadSpec, SolutionEvaluator)> {
    let problem = cfg.problem()?;
    let spec = cfg.quad_spec()?;
    let ev = solve_full(problem.clone(), spec)?;
    Ok((problem, spec, ev))
}

pub fn run_solve(cfg: &LoadedConfig, opts: &RunOptions) -> Result<Outcome> {
    let started = Instant::now();
    let (problem, spec, ev) = evaluator(cfg)?;
    let n = problem.dim();
    let grid = cfg.probe_grid(n, opts.seed);
    let probes: Vec<(Vec<f64>, f64)> = grid
        .points
        .iter()
        .flat_map(|x| grid.times.iter().map(move |&t| (x.clone(), t)))
        .collect();
    let values = ev.eval_many(&probes);
    let mut rows = Vec::with_capacity(probes.len());
    let mut results = Vec::with_capacity(probes.len());
    let mut evaluations = 0u64;
    for ((x, t), v) in probes.iter().zip(values) {
        let v = v?;
        evaluations += v.evaluations;
        let mut row = x.clone();
        row.extend([*t, v.value]);
        rows.push(row);
        results.push(json!({ "x": x, "t": t, "u": v.value, "evaluations": v.evaluations }));
    }
    let mut header = axis_header(n);
    header.extend(["t".into(), "u".into()]);
    let mut w = Writer::new(cfg, &opts.out_dir)?;
    w.csv("solve.csv", &header, &rows)?;
    let stats = json!({
        "mode": ev.mode(),
        "quadrature": spec,
        "integrand_evaluations": evaluations,
        "probes": probes.len(),
    });
    w.json("solve", stats, &results, started)?;
    Ok(Outcome {
        exit_code: 0,
        files: w.files,
        summary: format!("solved {} probes", probes.len()),
    })
}

pub fn run_verify(cfg: &LoadedConfig, opts: &RunOptions) -> Result<Outcome> {
    let started = Instant::now();
    let scenario = match &cfg.config.problem {
        Some(_) => {
            let problem = cfg.problem()?;
            let n = problem.dim();
            Some(Scenario {
                problem,
                spec: cfg.quad_spec()?,
                probes: cfg.probe_grid(n, opts.seed),
                options: cfg.verify_options(),
            })
        }
        None => None,
    };
    let ctx = Context { scenario };
    let selected = |name: &str| opts.filter.as_ref().is_none_or(|p| p.matches(name));
    let tolerance = |name: &str, default: f64| cfg.tolerance(name, default);
    let results: Vec<PropertyResult> = run_suite(&ctx, &selected, &tolerance);
    let failed = results.iter().filter(|r| !r.passed).count();
    let errored = results.iter().any(|r| r.error.is_some());

    let mut w = Writer::new(cfg, &opts.out_dir)?;
    let rows: Vec<Vec<f64>> = results
        .iter()
        .map(|r| {
            vec![
                r.measured.unwrap_or(f64::NAN),
                r.tolerance,
                if r.passed { 1.0 } else { 0.0 },
            ]
        })
        .collect();
    if cfg.config.output.csv {
        // Names are text, so this table is assembled by hand.
        let mut text = String::from("name,measured,tolerance,passed\n");
        for (r, row) in results.iter().zip(&rows) {
            writeln!(
                text,
                "{},{:.16e},{:.16e},{}",
                r.name, row[0], row[1], r.passed
            )
            .expect("writing to a string");
        }
        w.write("verify.csv", &text)?;
    }
    let stats = json!({ "properties": results.len(), "failed": failed });
    w.json("verify", stats, &results, started)?;
    let exit_code = if errored {
        3
    } else if failed > 0 {
        1
    } else {
        0
    };
    Ok(Outcome {
        exit_code,
        files: w.files,
        summary: format!("{} properties, {failed} failed", results.len()),
    })
}

#[derive(Debug, Clone, Serialize)]
struct GapRow {
    x: Vec<f64>,
    t: f64,
    analytic: f64,
    fd: f64,
    gap: f64,
}

/// Dirichlet data at x = L for each cascade level, from the evaluator.
fn analytic_boundary(problem: &ProblemSpec, spec: QuadSpec, length: f64) -> Result<FarBoundary> {
    let mut fns: Vec<BoundaryFn> = Vec::new();
    for k in 0..problem.order() {
        // W_k solves the order m − k problem with data f_k, ..., f_{m−1}.
        let phis = (k..problem.order())
            .map(|j| assemble_fk(problem, j))
            .collect::<polycal::Result<Vec<_>>>()?;
        let tail = ProblemSpec::new(problem.gamma().clone(), phis, problem.source().cloned())?;
        let ev = Arc::new(SolutionEvaluator::new_unchecked(
            tail,
            spec,
            Mode::Combined,
        )?);
        fns.push(Arc::new(move |t: f64| {
            ev.eval(&[length], t).unwrap_or(f64::NAN)
        }));
    }
    Ok(FarBoundary::Exact(fns))
}

pub fn run_compare(cfg: &LoadedConfig, opts: &RunOptions) -> Result<Outcome> {
    let started = Instant::now();
    let (problem, spec, ev) = evaluator(cfg)?;
    let fd = &cfg.config.fd;
    let grid = fd.grid()?;
    let n = problem.dim();
    if problem.order() > 2 {
        return Err(cfg.error_at("m", "compare supports m ≤ 2"));
    }
    let (rows, orders) = match n {
        1 => {
            let fd_opts = FdOptions {
                boundary: analytic_boundary(&problem, spec, grid.length)?,
                ..FdOptions::default()
            };
            let sol = fd_solve_with(&problem, &grid, &fd_opts)?;
            let u = sol.final_values();
            let stride = (grid.nodes / 64).max(1);
            let nodes: Vec<usize> = (0..=grid.nodes)
                .step_by(stride)
                .filter(|&i| grid.x(i) <= fd.x_max)
                .collect();
            let rows = nodes
                .par_iter()
                .map(|&i| {
                    let x = grid.x(i);
                    let a = ev.eval(&[x], grid.final_time)?;
                    Ok(GapRow {
                        x: vec![x],
                        t: grid.final_time,
                        analytic: a,
                        fd: u[i],
                        gap: (a - u[i]).abs(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let orders = refinement_orders(cfg, &problem, &ev, spec)?;
            (rows, orders)
        }
        2 => {
            if problem.order() != 1 || problem.source().is_some() {
                return Err(cfg.error_at(
                    "problem",
                    "two-dimensional compare needs m = 1 and no source",
                ));
            }
            let g = problem.gamma().values();
            let u = adi_solve([g[0], g[1]], problem.phis()[0].as_ref(), &grid)?;
            let stride = (grid.nodes / 16).max(1);
            let axis: Vec<usize> = (0..=grid.nodes)
                .step_by(stride)
                .filter(|&i| grid.x(i) <= fd.x_max)
                .collect();
            let pairs: Vec<(usize, usize)> = axis
                .iter()
                .flat_map(|&i| axis.iter().map(move |&j| (i, j)))
                .collect();
            let rows = pairs
                .par_iter()
                .map(|&(i, j)| {
                    let x = vec![grid.x(i), grid.x(j)];
                    let a = ev.eval(&x, grid.final_time)?;
                    Ok(GapRow {
                        x,
                        t: grid.final_time,
                        analytic: a,
                        fd: u[i][j],
                        gap: (a - u[i][j]).abs(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            (rows, json!(null))
        }
        _ => return Err(cfg.error_at("n", "compare supports n ≤ 2")),
    };
    let max = rows.iter().fold(0.0_f64, |a, r| a.max(r.gap));
    let rms = (rows.iter().map(|r| r.gap * r.gap).sum::<f64>() / rows.len().max(1) as f64).sqrt();

    let mut header = axis_header(n);
    header.extend(["t", "analytic", "fd", "gap"].map(String::from));
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut row = r.x.clone();
            row.extend([r.t, r.analytic, r.fd, r.gap]);
            row
        })
        .collect();
    let mut w = Writer::new(cfg, &opts.out_dir)?;
    w.csv("compare.csv", &header, &table)?;
    let results = json!({ "gaps": rows, "max_gap": max, "rms_gap": rms, "orders": orders });
    w.json(
        "compare",
        json!({ "grid": grid, "points": rows.len() }),
        &results,
        started,
    )?;
    Ok(Outcome {
        exit_code: 0,
        files: w.files,
        summary: format!("max gap {max:.3e}, rms gap {rms:.3e}"),
    })
}

/// Temporal and spatial refinement studies against the evaluator.
fn refinement_orders(
    cfg: &LoadedConfig,
    problem: &ProblemSpec,
    ev: &SolutionEvaluator,
    spec: QuadSpec,
) -> Result<Value> {
    let fd = &cfg.config.fd;
    let fd_opts = FdOptions {
        boundary: analytic_boundary(problem, spec, fd.length)?,
        ..FdOptions::default()
    };
    let t = fd.final_time;
    let exact = |x: f64| ev.eval(&[x], t);
    let study = |grids: Vec<Grid1D>| -> Result<Value> {
        if grids.len() < 3 {
            return Ok(json!(null));
        }
        Ok(json!(convergence_study(
            problem,
            &grids,
            &fd_opts,
            Some(&exact),
            fd.x_max
        )?))
    };
    let config_err = |e: polycal::Error| CliError::Config(format!("fd: {e}"));
    let time_grids = fd
        .study_dts
        .iter()
        .map(|&dt| Grid1D::new(fd.length, fd.nodes, dt, t).map_err(config_err))
        .collect::<Result<Vec<_>>>()?;
    let space_grids = fd
        .study_nodes
        .iter()
        .map(|&nodes| Grid1D::new(fd.length, nodes, fd.dt, t).map_err(config_err))
        .collect::<Result<Vec<_>>>()?;
    let (time, space) = rayon::join(|| study(time_grids), || study(space_grids));
    Ok(json!({ "time": time?, "space": space? }))
}

pub fn run_kernel(cfg: &LoadedConfig, opts: &RunOptions) -> Result<Outcome> {
    let started = Instant::now();
    let k = &cfg.config.kernel;
    let spec = cfg.quad_spec()?;
    let s_line = polycal::solver::ProbeGrid::line(k.s.lo, k.s.hi, k.s.count, vec![]);
    let s_values: Vec<f64> = s_line.points.into_iter().map(|p| p[0]).collect();
    let mut combos = Vec::new();
    for &g in &k.gamma {
        for &x in &k.x {
            for &t in &k.t {
                combos.push((g, x, t));
            }
        }
    }
    let tables = combos
        .par_iter()
        .map(|&(g, x, t)| {
            let rows = s_values
                .iter()
                .map(|&s| Ok(vec![g, x, s, t, weight(g, x, s, t)?]))
                .collect::<polycal::Result<Vec<_>>>()?;
            let mass = KernelWeight::new(vec![g])?.mass(0, x, t, &spec)?;
            Ok((
                rows,
                json!({ "gamma": g, "x": x, "t": t, "mass": mass, "defect": mass - 1.0 }),
            ))
        })
        .collect::<polycal::Result<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = tables.iter().flat_map(|(r, _)| r.clone()).collect();
    let masses: Vec<Value> = tables.into_iter().map(|(_, m)| m).collect();
    let header = ["gamma", "x", "s", "t", "weight"].map(String::from);
    let mut w = Writer::new(cfg, &opts.out_dir)?;
    w.csv("kernel.csv", &header, &rows)?;
    w.json(
        "kernel",
        json!({ "rows": rows.len(), "quadrature": spec }),
        &masses,
        started,
    )?;
    Ok(Outcome {
        exit_code: 0,
        files: w.files,
        summary: format!("{} weight rows", rows.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_seventeen_digits() {
        let text = csv_text(&["a".into(), "b".into()], &[vec![0.1, -2.0]]);
        assert_eq!(text, "a,b\n1.0000000000000001e-1,-2.0000000000000000e0\n");
        let back: f64 = text
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .next()
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn out_dir_precedence() {
        let cfg = LoadedConfig::from_str("[output]\ndir = \"from-config\"\n", "c.toml").unwrap();
        let flag = Some(PathBuf::from("flag"));
        assert_eq!(
            resolve_out_dir(flag, Some("env".into()), &cfg),
            PathBuf::from("flag")
        );
        assert_eq!(
            resolve_out_dir(None, Some("env".into()), &cfg),
            PathBuf::from("env")
        );
        assert_eq!(
            resolve_out_dir(None, None, &cfg),
            PathBuf::from("from-config")
        );
        let bare = LoadedConfig::from_str("", "c.toml").unwrap();
        assert_eq!(
            resolve_out_dir(None, None, &bare),
            PathBuf::from(DEFAULT_OUT_DIR)
        );
    }
}
