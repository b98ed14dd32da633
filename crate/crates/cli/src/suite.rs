//! Named property suite run by `polycal verify`.
//!
//! Properties come in groups that share one computation; each named
//! property reports a measured value against a tolerance, both overridable
//! from the config. Built-in groups use a pinned catalog; `scenario.*`
//! groups use the config's own problem.

use std::sync::Arc;

use polycal::diffop::{GammaVec, ProblemSpec};
use polycal::ek::{
    ek_apply, ek_inverse_generalized, ek_inverse_plain, intertwine_residual,
    intertwine_sum_residual, inverse_intertwine_residual, EKParams, EkTransform,
};
use polycal::fd::{convergence_study, fd_solve, FdOptions, Grid1D};
use polycal::field::{FieldRef, PolyGauss, SourceField, TimeProfile};
use polycal::kernel::{
    g0, semigroup_residual, weber_sonine_residual, weight, KernelWeight, SemigroupForm,
};
use polycal::numerics::{gamma_fn, QuadSpec};
use polycal::solver::{
    solve_full, solve_homogeneous, transmutation_value, verify, ProbeGrid, ResidualReport,
    SolutionEvaluator, VerifyOptions,
};
use polycal::Result;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

/// Inputs drawn from the config for the `scenario.*` group.
#[derive(Clone)]
pub struct Scenario {
    pub problem: ProblemSpec,
    pub spec: QuadSpec,
    pub probes: ProbeGrid,
    pub options: VerifyOptions,
}

#[derive(Clone, Default)]
pub struct Context {
    pub scenario: Option<Scenario>,
}

/// One measured quantity; passes when finite and at most the tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Measured {
    pub value: f64,
    pub detail: Value,
}

fn measured(value: f64, detail: Value) -> Measured {
    Measured { value, detail }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub measured: Option<f64>,
    pub tolerance: f64,
    pub detail: Value,
    pub error: Option<String>,
}

type GroupFn = fn(&Context) -> Result<Vec<Measured>>;

/// Properties computed together; `run` returns one entry per name.
pub struct Group {
    pub properties: &'static [(&'static str, f64)],
    pub run: GroupFn,
    pub needs_scenario: bool,
}

pub fn registry() -> Vec<Group> {
    vec![
        Group {
            properties: &[("ek.power_law", 1e-9)],
            run: ek_power_law,
            needs_scenario: false,
        },
        Group {
            properties: &[
                ("ek.round_trip.plain", 1e-8),
                ("ek.round_trip.generalized", 1e-7),
            ],
            run: ek_round_trip,
            needs_scenario: false,
        },
        Group {
            properties: &[("ek.intertwine.single", 1e-6)],
            run: ek_intertwine_single,
            needs_scenario: false,
        },
        Group {
            properties: &[("ek.intertwine.squared", 1e-5)],
            run: ek_intertwine_squared,
            needs_scenario: false,
        },
        Group {
            properties: &[("ek.intertwine.sum", 1e-5)],
            run: ek_intertwine_sum,
            needs_scenario: false,
        },
        Group {
            properties: &[("ek.intertwine.inverse", 1e-5)],
            run: ek_intertwine_inverse,
            needs_scenario: false,
        },
        Group {
            properties: &[("kernel.mass", 1e-10)],
            run: kernel_mass,
            needs_scenario: false,
        },
        Group {
            properties: &[("kernel.weber_sonine", 1e-8)],
            run: kernel_weber_sonine,
            needs_scenario: false,
        },
        Group {
            properties: &[("kernel.semigroup", 1e-8)],
            run: kernel_semigroup,
            needs_scenario: false,
        },
        Group {
            properties: &[("kernel.classical_limit", 2e-2)],
            run: kernel_classical_limit,
            needs_scenario: false,
        },
        Group {
            properties: &[("solver.exact_catalog", 1e-8)],
            run: solver_exact_catalog,
            needs_scenario: false,
        },
        Group {
            properties: &[
                ("solver.residual.pde", 1e-4),
                ("solver.residual.initial_order", 0.1),
                ("solver.residual.boundary", 1e-7),
            ],
            run: solver_residuals,
            needs_scenario: false,
        },
        Group {
            properties: &[("solver.transmutation", 1e-6)],
            run: solver_transmutation,
            needs_scenario: false,
        },
        Group {
            properties: &[("fd.gap.first_order", 1e-3), ("fd.gap.second_order", 3e-3)],
            run: fd_gaps,
            needs_scenario: false,
        },
        Group {
            properties: &[("fd.order.time", 0.2), ("fd.order.space", 0.2)],
            run: fd_orders,
            needs_scenario: false,
        },
        Group {
            properties: &[("fd.mass", 1e-6), ("fd.max_principle", 1e-10)],
            run: fd_invariants,
            needs_scenario: false,
        },
        Group {
            properties: &[
                ("scenario.pde", 1e-4),
                ("scenario.initial_order", 0.1),
                ("scenario.boundary", 1e-7),
            ],
            run: scenario_residuals,
            needs_scenario: true,
        },
    ]
}

/// Runs every property whose name passes `selected`, in registry order.
/// `tolerance` maps a name and its default to the tolerance in force.
pub fn run_suite(
    ctx: &Context,
    selected: &(dyn Fn(&str) -> bool + Sync),
    tolerance: &(dyn Fn(&str, f64) -> f64 + Sync),
) -> Vec<PropertyResult> {
    let groups: Vec<Group> = registry()
        .into_iter()
        .filter(|g| !g.needs_scenario || ctx.scenario.is_some())
        .filter(|g| g.properties.iter().any(|(n, _)| selected(n)))
        .collect();
    let per_group: Vec<Vec<PropertyResult>> = groups
        .par_iter()
        .map(|g| {
            let outcome = (g.run)(ctx);
            g.properties
                .iter()
                .enumerate()
                .filter(|(_, (n, _))| selected(n))
                .map(|(i, &(name, default))| {
                    let tol = tolerance(name, default);
                    match &outcome {
                        Ok(values) => {
                            let m = &values[i];
                            PropertyResult {
                                name: name.to_string(),
                                passed: m.value.is_finite() && m.value <= tol,
                                measured: Some(m.value),
                                tolerance: tol,
                                detail: m.detail.clone(),
                                error: None,
                            }
                        }
                        Err(e) => PropertyResult {
                            name: name.to_string(),
                            passed: false,
                            measured: None,
                            tolerance: tol,
                            detail: Value::Null,
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect()
        })
        .collect();
    per_group.into_iter().flatten().collect()
}

/// Convenience for callers that want one property at its built-in tolerance.
pub fn run_named(ctx: &Context, names: &[&str]) -> Vec<PropertyResult> {
    run_suite(ctx, &|n| names.contains(&n), &|_, d| d)
}

fn spec(tol: f64) -> QuadSpec {
    QuadSpec::default().with_tol(tol)
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(
        0.0,
        |a: f64, v| if v.is_nan() { f64::NAN } else { a.max(v.abs()) },
    )
}

fn collect<T: Send>(items: Vec<Result<T>>) -> Result<Vec<T>> {
    items.into_iter().collect()
}

fn catalog_1d() -> Vec<FieldRef> {
    vec![
        Arc::new(PolyGauss::gaussian(1, 1.0, 1.0).unwrap()),
        Arc::new(PolyGauss::gauss_power(1, 1.0, 1, 0.8).unwrap()),
        Arc::new(PolyGauss::power(1, 2).add(&PolyGauss::constant(1, 0.5))),
    ]
}

fn catalog_2d() -> Vec<FieldRef> {
    vec![
        Arc::new(PolyGauss::gaussian(2, 1.0, 1.0).unwrap()),
        Arc::new(PolyGauss::gauss_power(2, 1.0, 1, 0.8).unwrap()),
        Arc::new(PolyGauss::power(2, 2).add(&PolyGauss::constant(2, 0.5))),
    ]
}

fn ek_power_law(_: &Context) -> Result<Vec<Measured>> {
    let mut cases = Vec::new();
    for &alpha in &[0.25, 0.5, 0.75] {
        for &eta in &[-0.5, 0.0, 1.0] {
            for beta in 0..=2u32 {
                cases.push((alpha, eta, beta));
            }
        }
    }
    let s = spec(1e-11);
    let errs = collect(
        cases
            .par_iter()
            .map(|&(alpha, eta, beta)| {
                let p = EKParams::plain(vec![alpha], vec![eta])?;
                let f = PolyGauss::power(1, beta);
                let b = beta as f64;
                let factor = gamma_fn(eta + b + 1.0)? / gamma_fn(eta + alpha + b + 1.0)?;
                let mut worst: f64 = 0.0;
                for &x in &[0.5_f64, 1.0, 2.0] {
                    let want = factor * x.powi(2 * beta as i32);
                    worst = worst.max(((ek_apply(&p, &f, &[x], &s)? - want) / want).abs());
                }
                Ok(worst)
            })
            .collect(),
    )?;
    Ok(vec![measured(
        max_abs(errs),
        json!({ "cases": cases.len() }),
    )])
}

fn ek_round_trip(_: &Context) -> Result<Vec<Measured>> {
    let s = spec(1e-11);
    let plain = EKParams::plain(vec![0.75], vec![-0.5])?;
    let general = EKParams::new(vec![0.6], vec![-0.5], vec![0.5])?;
    let mut tasks = Vec::new();
    for (i, _) in catalog_1d().iter().enumerate() {
        for &x in &[0.3, 0.7, 1.0, 1.6, 2.4] {
            tasks.push((i, x));
        }
    }
    let errs = collect(
        tasks
            .par_iter()
            .map(|&(i, x)| {
                let f = catalog_1d()[i].clone();
                let exact = f.value(&[x])?;
                let t = EkTransform::new(plain.clone(), f.clone(), s)?;
                let a = ((ek_inverse_plain(&plain, &t, &[x], &s)?.value - exact) / exact).abs();
                let t = EkTransform::new(general.clone(), f, s)?;
                let b =
                    ((ek_inverse_generalized(&general, &t, &[x], &s)?.value - exact) / exact).abs();
                Ok((a, b))
            })
            .collect(),
    )?;
    Ok(vec![
        measured(
            max_abs(errs.iter().map(|e| e.0)),
            json!({ "probes": tasks.len() }),
        ),
        measured(
            max_abs(errs.iter().map(|e| e.1)),
            json!({ "probes": tasks.len() }),
        ),
    ])
}

/// Residual `r(field, x)` over 3 catalog fields × 3 points.
fn over_catalog(
    fields: Vec<FieldRef>,
    points: &[Vec<f64>],
    r: impl Fn(&FieldRef, &[f64]) -> Result<f64> + Sync,
) -> Result<Measured> {
    let tasks: Vec<(usize, usize)> = (0..fields.len())
        .flat_map(|i| (0..points.len()).map(move |j| (i, j)))
        .collect();
    let values = collect(
        tasks
            .par_iter()
            .map(|&(i, j)| r(&fields[i], &points[j]))
            .collect(),
    )?;
    Ok(measured(
        max_abs(values.iter().copied()),
        json!({ "residuals": values }),
    ))
}

fn line_points() -> Vec<Vec<f64>> {
    vec![vec![0.5], vec![1.0], vec![1.8]]
}

fn ek_intertwine_single(_: &Context) -> Result<Vec<Measured>> {
    let p = EKParams::new(vec![0.6], vec![-0.5], vec![0.3])?;
    let s = spec(1e-11);
    Ok(vec![over_catalog(catalog_1d(), &line_points(), |f, x| {
        intertwine_residual(&p, f, 0, 1, x, &s)
    })?])
}

fn ek_intertwine_squared(_: &Context) -> Result<Vec<Measured>> {
    let p = EKParams::plain(vec![0.6], vec![-0.5])?;
    let s = spec(1e-11);
    Ok(vec![over_catalog(catalog_1d(), &line_points(), |f, x| {
        intertwine_residual(&p, f, 0, 2, x, &s)
    })?])
}

fn ek_intertwine_sum(_: &Context) -> Result<Vec<Measured>> {
    let p = EKParams::plain(vec![0.6, 0.4], vec![-0.5, -0.5])?;
    let s = spec(1e-11);
    let points = vec![vec![0.5, 0.8], vec![0.8, 1.1], vec![1.4, 0.6]];
    let q1 = over_catalog(catalog_2d(), &points, |f, x| {
        intertwine_sum_residual(&p, f, 1, x, &s)
    })?;
    let q2 = over_catalog(catalog_2d(), &points, |f, x| {
        intertwine_sum_residual(&p, f, 2, x, &s)
    })?;
    Ok(vec![measured(
        q1.value.max(q2.value),
        json!({ "q1": q1.detail, "q2": q2.detail }),
    )])
}

fn ek_intertwine_inverse(_: &Context) -> Result<Vec<Measured>> {
    let p = EKParams::plain(vec![0.75], vec![-0.5])?;
    let s = spec(1e-11);
    Ok(vec![over_catalog(catalog_1d(), &line_points(), |f, x| {
        inverse_intertwine_residual(&p, f, 1, x, &s)
    })?])
}

fn kernel_mass(_: &Context) -> Result<Vec<Measured>> {
    let s = spec(1e-12);
    let mut tasks = Vec::new();
    for &g in &[-0.4, 0.0, 0.4] {
        for &x in &[0.0, 1.25, 2.5, 3.75, 5.0] {
            for &t in &[0.1, 1.0, 10.0] {
                tasks.push((g, x, t));
            }
        }
    }
    let defects = collect(
        tasks
            .par_iter()
            .map(|&(g, x, t)| Ok(KernelWeight::new(vec![g])?.mass(0, x, t, &s)? - 1.0))
            .collect(),
    )?;
    Ok(vec![measured(
        max_abs(defects),
        json!({ "points": tasks.len() }),
    )])
}

fn kernel_weber_sonine(_: &Context) -> Result<Vec<Measured>> {
    let cases = [
        (0.25, 1.0, 1.0, 1.0),
        (-0.25, 0.5, 2.0, 0.5),
        (0.0, 1.5, 0.7, 0.3),
        (0.4, 2.0, 2.5, 1.0),
        (-0.4, 0.3, 0.6, 0.2),
        (0.1, 3.0, 1.0, 2.0),
        (0.25, 0.2, 0.2, 0.1),
        (-0.1, 4.0, 3.5, 1.5),
        (0.45, 1.0, 3.0, 0.8),
    ];
    let s = spec(1e-12);
    let r = collect(
        cases
            .par_iter()
            .map(|&(nu, x, y, t)| weber_sonine_residual(nu, x, y, t, &s))
            .collect(),
    )?;
    Ok(vec![measured(
        max_abs(r.iter().copied()),
        json!({ "residuals": r }),
    )])
}

fn kernel_semigroup(_: &Context) -> Result<Vec<Measured>> {
    let fields = [
        PolyGauss::gaussian(1, 1.0, 1.0)?,
        PolyGauss::power(1, 1),
        PolyGauss::gauss_power(1, 1.0, 2, 0.5)?,
    ];
    let s = spec(1e-12);
    let mut tasks = Vec::new();
    for i in 0..fields.len() {
        for &(x, tau) in &[(0.5, 0.4), (1.2, 0.1), (0.0, 0.9)] {
            tasks.push((i, x, tau));
        }
    }
    let r = collect(
        tasks
            .par_iter()
            .map(|&(i, x, tau)| {
                semigroup_residual(&fields[i], &[x], 1.0, tau, SemigroupForm::Pointwise, &s)
            })
            .collect(),
    )?;
    Ok(vec![measured(
        max_abs(r.iter().copied()),
        json!({ "residuals": r }),
    )])
}

fn kernel_classical_limit(_: &Context) -> Result<Vec<Measured>> {
    // s = 0 is excluded: there the weight vanishes like s^{2γ+1}.
    let mut gap: f64 = 0.0;
    for i in 0..=40 {
        let x = 0.1 * i as f64;
        for j in 1..=40 {
            let s = 0.1 * j as f64;
            gap = gap.max((weight(-0.499, x, s, 1.0)? - g0(x, s, 1.0)?).abs());
        }
    }
    Ok(vec![measured(gap, json!({ "gamma": -0.499, "t": 1.0 }))])
}

fn problem_1d(
    gamma: f64,
    phis: Vec<PolyGauss>,
    source: Option<SourceField>,
) -> Result<ProblemSpec> {
    let phis = phis.into_iter().map(|p| Arc::new(p) as FieldRef).collect();
    ProblemSpec::new(GammaVec::strict(vec![gamma])?, phis, source)
}

type Exact = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

fn solver_exact_catalog(_: &Context) -> Result<Vec<Measured>> {
    let s = spec(1e-11);
    let one = || SourceField::new(1).term(PolyGauss::constant(1, 1.0), TimeProfile::Constant);
    let mut cases: Vec<(String, SolutionEvaluator, Exact)> = Vec::new();
    for &g in &[-0.4, 0.25] {
        let c = 4.0 * g + 4.0;
        cases.push((
            format!("one/{g}"),
            solve_full(problem_1d(g, vec![PolyGauss::constant(1, 1.0)], None)?, s)?,
            Box::new(|_, _| 1.0),
        ));
        cases.push((
            format!("square/{g}"),
            solve_full(problem_1d(g, vec![PolyGauss::power(1, 1)], None)?, s)?,
            Box::new(move |x, t| x * x + c * t),
        ));
        cases.push((
            format!("second_order_t/{g}"),
            solve_full(
                problem_1d(
                    g,
                    vec![PolyGauss::zero(1), PolyGauss::constant(1, 1.0)],
                    None,
                )?,
                s,
            )?,
            Box::new(|_, t| t),
        ));
        cases.push((
            format!("source_t/{g}"),
            solve_full(problem_1d(g, vec![PolyGauss::zero(1)], Some(one()))?, s)?,
            Box::new(|_, t| t),
        ));
        cases.push((
            format!("source_half_t2/{g}"),
            solve_full(
                problem_1d(g, vec![PolyGauss::zero(1), PolyGauss::zero(1)], Some(one()))?,
                s,
            )?,
            Box::new(|_, t| 0.5 * t * t),
        ));
        let sq = SourceField::new(1).term(PolyGauss::power(1, 1), TimeProfile::Constant);
        cases.push((
            format!("source_x2t/{g}"),
            solve_full(problem_1d(g, vec![PolyGauss::zero(1)], Some(sq))?, s)?,
            Box::new(move |x, t| x * x * t + c * t * t / 2.0),
        ));
    }
    let mut probes = Vec::new();
    for i in 0..=6 {
        for &t in &[0.01, 0.1, 0.5, 1.0, 2.0] {
            probes.push((0.5 * i as f64, t));
        }
    }
    let gaps = collect(
        cases
            .par_iter()
            .map(|(_, ev, exact)| {
                let mut worst: f64 = 0.0;
                for &(x, t) in &probes {
                    worst = worst.max((ev.eval(&[x], t)? - exact(x, t)).abs());
                }
                Ok(worst)
            })
            .collect(),
    )?;
    let detail: serde_json::Map<String, Value> = cases
        .iter()
        .zip(&gaps)
        .map(|((name, _, _), g)| (name.clone(), json!(g)))
        .collect();
    Ok(vec![measured(
        max_abs(gaps.iter().copied()),
        Value::Object(detail),
    )])
}

/// PDE max residual, worst |fitted order − 1| and boundary max of a report.
fn residual_measures(reports: &[(&str, ResidualReport)]) -> Vec<Measured> {
    let failed = reports.iter().any(|(_, r)| !r.failures.is_empty());
    let pde = if failed {
        f64::NAN
    } else {
        max_abs(reports.iter().map(|(_, r)| r.pde_norms.max))
    };
    let order = max_abs(
        reports
            .iter()
            .flat_map(|(_, r)| r.initial_orders.iter().map(|o| o.fitted_order - 1.0)),
    );
    let boundary = max_abs(reports.iter().map(|(_, r)| r.boundary_norms.max));
    let detail = |f: &dyn Fn(&ResidualReport) -> Value| -> Value {
        Value::Object(reports.iter().map(|(n, r)| (n.to_string(), f(r))).collect())
    };
    vec![
        measured(
            pde,
            detail(&|r| json!({ "norms": r.pde_norms, "failures": r.failures })),
        ),
        measured(order, detail(&|r| json!(r.initial_orders))),
        measured(boundary, detail(&|r| json!(r.boundary_norms))),
    ]
}

fn solver_residuals(_: &Context) -> Result<Vec<Measured>> {
    let s = spec(1e-11);
    let gauss = PolyGauss::gaussian(1, 1.0, 1.0)?;
    let first = solve_homogeneous(problem_1d(0.25, vec![gauss.clone()], None)?, s)?;
    let phi0 = PolyGauss::gauss_power(1, 1.0, 2, 1.0)?;
    let second = solve_homogeneous(problem_1d(0.25, vec![phi0, gauss], None)?, s)?;
    let grid = ProbeGrid::line(0.25, 2.5, 4, vec![0.1, 0.5, 1.0]);
    let opts = VerifyOptions::default();
    let (a, b) = rayon::join(
        || verify(&first, &grid, &opts),
        || verify(&second, &grid, &opts),
    );
    Ok(residual_measures(&[
        ("first_order", a),
        ("second_order", b),
    ]))
}

fn solver_transmutation(_: &Context) -> Result<Vec<Measured>> {
    let p = problem_1d(0.25, vec![PolyGauss::gaussian(1, 1.0, 1.0)?], None)?;
    let ev = solve_homogeneous(p.clone(), spec(1e-11))?;
    let inner = spec(1e-10);
    let probes: Vec<(f64, f64)> = (0..10)
        .map(|i| (0.15 + 0.3 * i as f64, 0.2 + 0.2 * (i % 5) as f64))
        .collect();
    let gaps = collect(
        probes
            .par_iter()
            .map(|&(x, t)| Ok(ev.eval(&[x], t)? - transmutation_value(&p, x, t, &inner)?))
            .collect(),
    )?;
    Ok(vec![measured(
        max_abs(gaps.iter().copied()),
        json!({ "probes": probes, "gaps": gaps }),
    )])
}

/// Max gap between the FD solution and the evaluator at t = T on nodes x ≤ 3.
pub fn fd_gap(problem: &ProblemSpec, grid: &Grid1D, spec: QuadSpec) -> Result<f64> {
    let sol = fd_solve(problem, grid)?;
    let ev = solve_full(problem.clone(), spec)?;
    let u = sol.final_values();
    let stride = (grid.nodes / 32).max(1);
    let nodes: Vec<usize> = (0..=grid.nodes)
        .step_by(stride)
        .filter(|&i| grid.x(i) <= 3.0)
        .collect();
    let gaps = collect(
        nodes
            .par_iter()
            .map(|&i| Ok(ev.eval(&[grid.x(i)], grid.final_time)? - u[i]))
            .collect(),
    )?;
    Ok(max_abs(gaps))
}

fn fd_gaps(_: &Context) -> Result<Vec<Measured>> {
    let grid = Grid1D::new(8.0, 2048, 1e-4, 0.5)?;
    let gauss = PolyGauss::gaussian(1, 1.0, 1.0)?;
    let first = problem_1d(0.25, vec![gauss.clone()], None)?;
    let second = problem_1d(
        0.25,
        vec![PolyGauss::gauss_power(1, 1.0, 2, 1.0)?, gauss],
        None,
    )?;
    let (a, b) = rayon::join(
        || fd_gap(&first, &grid, spec(1e-11)),
        || fd_gap(&second, &grid, spec(1e-11)),
    );
    let detail = json!({ "grid": grid });
    Ok(vec![measured(a?, detail.clone()), measured(b?, detail)])
}

fn fd_orders(_: &Context) -> Result<Vec<Measured>> {
    let run = |gamma: f64, grids: Vec<Grid1D>| -> Result<Vec<f64>> {
        let p = problem_1d(gamma, vec![PolyGauss::gaussian(1, 1.0, 1.0)?], None)?;
        let ev = solve_homogeneous(p.clone(), spec(1e-12))?;
        let t = grids[0].final_time;
        let exact = move |x: f64| ev.eval(&[x], t);
        Ok(convergence_study(&p, &grids, &FdOptions::default(), Some(&exact), 3.0)?.orders)
    };
    let time_grids = collect(
        [0.1, 0.05, 0.025]
            .iter()
            .map(|&dt| Grid1D::new(8.0, 2048, dt, 0.5))
            .collect(),
    )?;
    let space_grids = collect(
        [64, 128, 256]
            .iter()
            .map(|&n| Grid1D::new(8.0, n, 1e-4, 0.5))
            .collect(),
    )?;
    let (time, space) = rayon::join(|| run(0.25, time_grids), || run(-0.25, space_grids));
    let (time, space) = (time?, space?);
    Ok(vec![
        measured(
            max_abs(time.iter().map(|o| o - 2.0)),
            json!({ "orders": time }),
        ),
        measured(
            max_abs(space.iter().map(|o| o - 2.0)),
            json!({ "orders": space }),
        ),
    ])
}

fn fd_invariants(_: &Context) -> Result<Vec<Measured>> {
    let mut drifts = Vec::new();
    for &g in &[-0.4, 0.0, 0.4] {
        let grid = Grid1D::new(10.0, 512, 1e-3, 1.0)?;
        drifts.push(
            fd_solve(
                &problem_1d(g, vec![PolyGauss::gaussian(1, 1.0, 1.0)?], None)?,
                &grid,
            )?
            .mass_drift(),
        );
    }
    let grid = Grid1D::new(8.0, 512, 1e-3, 1.0)?;
    let sol = fd_solve(
        &problem_1d(0.1, vec![PolyGauss::gaussian(1, 1.0, 1.0)?], None)?,
        &grid,
    )?;
    // Data range is [0, 1]; report the overshoot beyond it.
    let (lo, hi) = sol.range;
    let overshoot = (-lo).max(hi - 1.0).max(0.0);
    Ok(vec![
        measured(max_abs(drifts.iter().copied()), json!({ "drifts": drifts })),
        measured(overshoot, json!({ "min": lo, "max": hi })),
    ])
}

fn scenario_residuals(ctx: &Context) -> Result<Vec<Measured>> {
    let sc = ctx
        .scenario
        .as_ref()
        .expect("scenario group needs a scenario");
    let ev = solve_full(sc.problem.clone(), sc.spec)?;
    let report = verify(&ev, &sc.probes, &sc.options);
    Ok(residual_measures(&[("scenario", report)]))
}
