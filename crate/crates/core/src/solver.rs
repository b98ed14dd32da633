//! Evaluation of the closed-form solution and its verification.
//!
//! The homogeneous part is a kernel average of the assembled data,
//!
//! u(x,t) = Σ_{k<m} t^k/k! ∫_{R^n_+} f_k(s) ∏_j w(γ_j, x_j, s_j, t) ds,
//!
//! and the source part follows Duhamel's principle in the form
//!
//! V(x,t) = 1/(m−1)! ∫_0^t σ^{m−1} A(x, t−σ, σ) dσ,
//! A(x,τ,σ) = ∫_{R^n_+} f(s,τ) ∏_j w(γ_j, x_j, s_j, σ) ds,
//!
//! which has no endpoint singularity in σ for any n. Verification applies
//! (∂_t − Δ_B)^m to the evaluator by finite differences.

use std::cell::Cell;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffop::{assemble_fk, validate_initial_data, ProblemSpec, ValidationReport};
use crate::ek::{ek_apply, EKParams, EkInverse};
use crate::error::{Error, Result};
use crate::field::{FieldRef, ScalarField};
use crate::kernel::{g0, KernelWeight};
use crate::numerics::{
    factorial, integrate_finite, integrate_gaussian_tail, integrate_gaussian_tail_offset, QuadSpec,
};

/// Which part of the solution an evaluator returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Homogeneous,
    Inhomogeneous,
    Combined,
}

impl Mode {
    fn homogeneous(self) -> bool {
        !matches!(self, Mode::Inhomogeneous)
    }

    fn inhomogeneous(self) -> bool {
        !matches!(self, Mode::Homogeneous)
    }
}

/// A solution value and the number of integrand evaluations behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub value: f64,
    pub evaluations: u64,
}

/// Immutable evaluator of u(x,t).
#[derive(Debug, Clone)]
pub struct SolutionEvaluator {
    problem: ProblemSpec,
    fks: Vec<FieldRef>,
    kernel: KernelWeight,
    spec: QuadSpec,
    mode: Mode,
    validation: ValidationReport,
}

/// Evaluator of the homogeneous solution. Fails when the initial data do
/// not pass [`validate_initial_data`].
pub fn solve_homogeneous(problem: ProblemSpec, spec: QuadSpec) -> Result<SolutionEvaluator> {
    SolutionEvaluator::new(problem, spec, Mode::Homogeneous)
}

/// Evaluator of the Duhamel term for the problem's source.
pub fn solve_inhomogeneous(problem: ProblemSpec, spec: QuadSpec) -> Result<SolutionEvaluator> {
    SolutionEvaluator::new(problem, spec, Mode::Inhomogeneous)
}

/// Evaluator of the homogeneous solution plus the Duhamel term.
pub fn solve_full(problem: ProblemSpec, spec: QuadSpec) -> Result<SolutionEvaluator> {
    SolutionEvaluator::new(problem, spec, Mode::Combined)
}

impl SolutionEvaluator {
    pub fn new(problem: ProblemSpec, spec: QuadSpec, mode: Mode) -> Result<Self> {
        let ev = Self::new_unchecked(problem, spec, mode)?;
        if mode.homogeneous() && !ev.validation.passed() {
            return Err(Error::Validation(validation_summary(&ev.validation)));
        }
        Ok(ev)
    }

    /// Like [`SolutionEvaluator::new`] but keeps going when the initial data
    /// fail validation; the report stays available through
    /// [`SolutionEvaluator::validation`].
    pub fn new_unchecked(problem: ProblemSpec, spec: QuadSpec, mode: Mode) -> Result<Self> {
        spec.validate()?;
        if mode == Mode::Inhomogeneous && problem.source().is_none() {
            return Err(Error::InvalidParams(
                "the Duhamel term needs a source".into(),
            ));
        }
        let fks = (0..problem.order())
            .map(|k| assemble_fk(&problem, k))
            .collect::<Result<Vec<_>>>()?;
        let kernel = KernelWeight::new(problem.gamma().values().to_vec())?;
        let validation = validate_initial_data(&problem);
        Ok(SolutionEvaluator {
            problem,
            fks,
            kernel,
            spec,
            mode,
            validation,
        })
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn spec(&self) -> &QuadSpec {
        &self.spec
    }

    pub fn validation(&self) -> &ValidationReport {
        &self.validation
    }

    /// The assembled data f_0..f_{m−1}.
    pub fn assembled(&self) -> &[FieldRef] {
        &self.fks
    }

    /// The same evaluator with different quadrature settings.
    pub fn with_spec(&self, spec: QuadSpec) -> Self {
        SolutionEvaluator {
            spec,
            ..self.clone()
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64> {
        self.eval_counted(x, t).map(|e| e.value)
    }

    /// u(x,t); negative coordinates are reflected, t = 0 returns the data.
    pub fn eval_counted(&self, x: &[f64], t: f64) -> Result<Evaluation> {
        let n = self.problem.dim();
        if x.len() != n {
            return Err(Error::InvalidParams(format!(
                "point has {} coordinates, expected {n}",
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("eval", "point must be finite"));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::domain(
                "eval",
                format!("t must be non-negative, got {t}"),
            ));
        }
        let x: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        if t == 0.0 {
            let value = if self.mode.homogeneous() {
                self.problem.phis()[0].value(&x)?
            } else {
                0.0
            };
            return Ok(Evaluation {
                value,
                evaluations: 1,
            });
        }
        let mut out = Evaluation {
            value: 0.0,
            evaluations: 0,
        };
        if self.mode.homogeneous() {
            let coeffs: Vec<f64> = (0..self.fks.len())
                .map(|k| t.powi(k as i32) / factorial(k))
                .collect();
            let g = |s: &[f64]| -> Result<f64> {
                let mut sum = 0.0;
                for (c, f) in coeffs.iter().zip(&self.fks) {
                    sum += c * f.value(s)?;
                }
                Ok(sum)
            };
            let (v, e) = self.average(&g, &x, t, &self.spec)?;
            out.value += v;
            out.evaluations += e;
        }
        if self.mode.inhomogeneous() {
            if let Some(src) = self.problem.source() {
                let m = self.problem.order();
                let mut evals = 0;
                let integrand = |sigma: f64| -> Result<f64> {
                    let tau = t - sigma;
                    let g = |s: &[f64]| Ok(src.value(s, tau));
                    let (v, e) = self.average(&g, &x, sigma, &self.spec)?;
                    evals += e;
                    Ok(sigma.powi(m as i32 - 1) * v)
                };
                let r = integrate_finite(integrand, 0.0, t, (0.0, 0.0), &self.spec)?;
                out.value += r.value / factorial(m - 1);
                out.evaluations += evals;
            }
        }
        Ok(out)
    }

    /// Values at many (x, t) pairs, computed in parallel, in input order.
    pub fn eval_many(&self, probes: &[(Vec<f64>, f64)]) -> Vec<Result<Evaluation>> {
        probes
            .par_iter()
            .map(|(x, t)| self.eval_counted(x, *t))
            .collect()
    }

    /// ∫ g(s) ∏_j w(γ_j, x_j, s_j, t) ds, nested axis by axis.
    fn average(
        &self,
        g: &dyn Fn(&[f64]) -> Result<f64>,
        x: &[f64],
        t: f64,
        spec: &QuadSpec,
    ) -> Result<(f64, u64)> {
        let mut s = x.to_vec();
        self.average_axis(0, g, x, &mut s, t, spec)
    }

    fn average_axis(
        &self,
        k: usize,
        g: &dyn Fn(&[f64]) -> Result<f64>,
        x: &[f64],
        s: &mut Vec<f64>,
        t: f64,
        spec: &QuadSpec,
    ) -> Result<(f64, u64)> {
        if k == x.len() {
            return Ok((g(s)?, 1));
        }
        let mut evals = 0;
        let r = integrate_gaussian_tail_offset(
            |sk, y| {
                let w = self.kernel.axis_reduced_offset(k, x[k], sk, y, t)?;
                if w == 0.0 {
                    return Ok(0.0);
                }
                s[k] = sk;
                let (v, e) = self.average_axis(k + 1, g, x, s, t, spec)?;
                evals += e;
                Ok(w * v)
            },
            t,
            x[k],
            self.kernel.origin_exponent(k),
            spec,
        )?;
        Ok((r.value, evals))
    }
}

fn validation_summary(report: &ValidationReport) -> String {
    let mut parts = Vec::new();
    if let Some(v) = report.violations.first() {
        parts.push(format!(
            "{} vanishing condition(s) fail, first: derivative of order {} of initial field {} along axis {} is {:e}",
            report.violations.len(),
            v.order,
            v.field,
            v.axis,
            v.magnitude
        ));
    }
    let bad = report.limit_checks.iter().filter(|c| !c.decays).count();
    if bad > 0 {
        parts.push(format!("{bad} boundary limit(s) do not decay"));
    }
    parts.join("; ")
}

/// Probe points for verification; PDE residuals use every (point, time) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub points: Vec<Vec<f64>>,
    pub times: Vec<f64>,
}

impl ProbeGrid {
    /// n = 1 grid of `count` points evenly spaced on [lo, hi].
    pub fn line(lo: f64, hi: f64, count: usize, times: Vec<f64>) -> Self {
        let points = (0..count)
            .map(|i| {
                let f = if count > 1 {
                    i as f64 / (count - 1) as f64
                } else {
                    0.0
                };
                vec![lo + f * (hi - lo)]
            })
            .collect();
        ProbeGrid { points, times }
    }
}

/// Step sizes and quadrature settings for [`verify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// h_t = time_step · max(1, t).
    pub time_step: f64,
    pub space_step: f64,
    /// Times approaching 0 at which initial conditions are checked.
    pub initial_times: Vec<f64>,
    /// Quadrature tolerance beneath the stencils.
    pub rel_tol: f64,
    /// Fixed tanh-sinh level, so that u is a smooth function of (x, t).
    pub fixed_level: u32,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            time_step: 1e-3,
            space_step: 1e-2,
            initial_times: vec![1e-2, 1e-3, 1e-4],
            rel_tol: 1e-11,
            fixed_level: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdeProbe {
    pub x: Vec<f64>,
    pub t: f64,
    /// (∂_t − Δ_B)^m u − f.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialProbe {
    pub order: usize,
    pub x: Vec<f64>,
    /// ∂_t^k u(x, τ) − φ_k(x) for each τ in the options' initial times.
    pub deviations: Vec<f64>,
    /// Linear extrapolation of the deviations to τ = 0.
    pub extrapolated: f64,
}

/// Sup-norm deviations of one initial condition and the orders they imply.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialOrder {
    pub order: usize,
    pub times: Vec<f64>,
    pub sup_deviations: Vec<f64>,
    /// Pairwise orders between consecutive times.
    pub observed_orders: Vec<f64>,
    /// Least-squares slope of log d against log τ over all times.
    pub fitted_order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryProbe {
    pub axis: usize,
    pub x: Vec<f64>,
    pub t: f64,
    pub order: usize,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub max: f64,
    pub rms: f64,
    pub count: usize,
}

impl Norms {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (mut max, mut sq, mut count) = (0.0_f64, 0.0, 0);
        for v in values {
            max = max.max(v.abs());
            sq += v * v;
            count += 1;
        }
        let rms = if count > 0 {
            (sq / count as f64).sqrt()
        } else {
            0.0
        };
        Norms { max, rms, count }
    }
}

/// Outcome of [`verify`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub pde: Vec<PdeProbe>,
    pub initial: Vec<InitialProbe>,
    pub initial_orders: Vec<InitialOrder>,
    pub boundary: Vec<BoundaryProbe>,
    pub pde_norms: Norms,
    pub initial_norms: Norms,
    pub boundary_norms: Norms,
    /// Probes whose evaluation failed, with the error message.
    pub failures: Vec<String>,
    pub evaluations: u64,
}

/// Checks the PDE, the initial conditions and the parity boundary condition
/// on the evaluator by finite differences. Never fails; problems at single
/// probes are listed in the report.
pub fn verify(
    evaluator: &SolutionEvaluator,
    probes: &ProbeGrid,
    opts: &VerifyOptions,
) -> ResidualReport {
    let spec = evaluator
        .spec()
        .with_tol(opts.rel_tol)
        .with_fixed_level(Some(opts.fixed_level));
    let ev = evaluator.with_spec(spec);
    let m = ev.problem.order();
    let n = ev.problem.dim();

    let pde_tasks: Vec<(Vec<f64>, f64)> = probes
        .points
        .iter()
        .flat_map(|x| probes.times.iter().map(move |&t| (x.clone(), t)))
        .collect();
    let pde_results: Vec<(Result<f64>, u64)> = pde_tasks
        .par_iter()
        .map(|(x, t)| {
            let counter = Cell::new(0);
            let r = pde_residual(&ev, x, *t, opts, &counter);
            (r, counter.get())
        })
        .collect();

    let init_tasks: Vec<(usize, Vec<f64>)> = (0..m)
        .flat_map(|k| probes.points.iter().map(move |x| (k, x.clone())))
        .collect();
    let init_results: Vec<(Result<Vec<f64>>, u64)> = init_tasks
        .par_iter()
        .map(|(k, x)| {
            let counter = Cell::new(0);
            let r = initial_deviations(&ev, *k, x, opts, &counter);
            (r, counter.get())
        })
        .collect();

    let mut bnd_tasks = Vec::new();
    for axis in 0..n {
        for x in &probes.points {
            let mut x0 = x.clone();
            x0[axis] = 0.0;
            for &t in &probes.times {
                for order in [1, 3] {
                    bnd_tasks.push((axis, x0.clone(), t, order));
                }
            }
        }
    }
    let bnd_results: Vec<(Result<f64>, u64)> = bnd_tasks
        .par_iter()
        .map(|(axis, x, t, order)| {
            let counter = Cell::new(0);
            let r = boundary_derivative(&ev, *axis, x, *t, *order, opts, &counter);
            (r, counter.get())
        })
        .collect();

    let mut failures = Vec::new();
    let mut evaluations = 0;
    let mut pde = Vec::new();
    for ((x, t), (r, e)) in pde_tasks.into_iter().zip(pde_results) {
        evaluations += e;
        match r {
            Ok(residual) => pde.push(PdeProbe { x, t, residual }),
            Err(err) => failures.push(format!("pde residual at x={x:?}, t={t}: {err}")),
        }
    }
    let mut initial = Vec::new();
    for ((order, x), (r, e)) in init_tasks.into_iter().zip(init_results) {
        evaluations += e;
        match r {
            Ok(deviations) => {
                let extrapolated = extrapolate(&opts.initial_times, &deviations);
                initial.push(InitialProbe {
                    order,
                    x,
                    deviations,
                    extrapolated,
                });
            }
            Err(err) => failures.push(format!("initial condition {order} at x={x:?}: {err}")),
        }
    }
    let mut boundary = Vec::new();
    for ((axis, x, t, order), (r, e)) in bnd_tasks.into_iter().zip(bnd_results) {
        evaluations += e;
        match r {
            Ok(v) => boundary.push(BoundaryProbe {
                axis,
                x,
                t,
                order,
                magnitude: v.abs(),
            }),
            Err(err) => failures.push(format!(
                "boundary derivative on axis {axis} at x={x:?}, t={t}: {err}"
            )),
        }
    }

    let initial_orders = (0..m)
        .map(|k| {
            let sup_deviations: Vec<f64> = (0..opts.initial_times.len())
                .map(|i| {
                    initial
                        .iter()
                        .filter(|p| p.order == k)
                        .map(|p| p.deviations[i].abs())
                        .fold(0.0, f64::max)
                })
                .collect();
            InitialOrder {
                order: k,
                times: opts.initial_times.clone(),
                observed_orders: observed_orders(&opts.initial_times, &sup_deviations),
                fitted_order: fitted_order(&opts.initial_times, &sup_deviations),
                sup_deviations,
            }
        })
        .collect();

    ResidualReport {
        pde_norms: Norms::of(pde.iter().map(|p| p.residual)),
        initial_norms: Norms::of(initial.iter().map(|p| p.extrapolated)),
        boundary_norms: Norms::of(boundary.iter().map(|p| p.magnitude)),
        pde,
        initial,
        initial_orders,
        boundary,
        failures,
        evaluations,
    }
}

/// log(d_i/d_{i+1}) / log(τ_i/τ_{i+1}) for consecutive pairs.
pub fn observed_orders(times: &[f64], deviations: &[f64]) -> Vec<f64> {
    times
        .windows(2)
        .zip(deviations.windows(2))
        .map(|(t, d)| (d[0] / d[1]).ln() / (t[0] / t[1]).ln())
        .collect()
}

/// Least-squares slope of ln d against ln τ.
pub fn fitted_order(times: &[f64], deviations: &[f64]) -> f64 {
    let n = times.len() as f64;
    let lx: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = deviations.iter().map(|d| d.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

/// Value at τ = 0 of the line through the last two (τ, d) pairs.
fn extrapolate(times: &[f64], deviations: &[f64]) -> f64 {
    match times.len() {
        0 => 0.0,
        1 => deviations[0],
        k => {
            let (t1, t2) = (times[k - 2], times[k - 1]);
            let (d1, d2) = (deviations[k - 2], deviations[k - 1]);
            d2 - (d1 - d2) * t2 / (t1 - t2)
        }
    }
}

type Probe<'a> = dyn Fn(&[f64], f64) -> Result<f64> + 'a;

fn counted<'a>(
    ev: &'a SolutionEvaluator,
    counter: &'a Cell<u64>,
) -> impl Fn(&[f64], f64) -> Result<f64> + 'a {
    move |x, t| {
        let e = ev.eval_counted(x, t)?;
        counter.set(counter.get() + e.evaluations);
        Ok(e.value)
    }
}

fn pde_residual(
    ev: &SolutionEvaluator,
    x: &[f64],
    t: f64,
    opts: &VerifyOptions,
    counter: &Cell<u64>,
) -> Result<f64> {
    let m = ev.problem.order();
    if m > 2 {
        return Err(Error::InvalidParams(format!(
            "PDE residuals are checked for m <= 2, got m = {m}"
        )));
    }
    if t.is_nan() || t <= 0.0 {
        return Err(Error::domain("verify", "PDE probes need t > 0"));
    }
    let gammas = ev.problem.gamma().values().to_vec();
    // Nested stencils reach t ± 2m·h_t, which must stay positive.
    let ht = (opts.time_step * t.max(1.0)).min(t / (2 * m + 1) as f64);
    let hx = opts.space_step;
    let u = counted(ev, counter);
    let lhs = if m == 1 {
        heat_operator(&u, &gammas, x, t, ht, hx)?
    } else {
        let lu = |y: &[f64], s: f64| heat_operator(&u, &gammas, y, s, ht, hx);
        heat_operator(&lu, &gammas, x, t, ht, hx)?
    };
    let rhs = match (ev.mode.inhomogeneous(), ev.problem.source()) {
        (true, Some(src)) => src.value(x, t),
        _ => 0.0,
    };
    Ok(lhs - rhs)
}

/// (∂_t − Δ_B) F at (x, t) with fourth-order central stencils; the x_k = 0
/// rows use the even limit (2γ_k + 2) ∂²_k F.
fn heat_operator(
    f: &Probe<'_>,
    gammas: &[f64],
    x: &[f64],
    t: f64,
    ht: f64,
    hx: f64,
) -> Result<f64> {
    let x: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let dt = (-f(&x, t + 2.0 * ht)? + 8.0 * f(&x, t + ht)? - 8.0 * f(&x, t - ht)?
        + f(&x, t - 2.0 * ht)?)
        / (12.0 * ht);
    let center = f(&x, t)?;
    let mut lap = 0.0;
    for (k, &g) in gammas.iter().enumerate() {
        let at = |d: f64| {
            let mut y = x.clone();
            y[k] += d;
            f(&y, t)
        };
        let (p1, p2, m1, m2) = (at(hx)?, at(2.0 * hx)?, at(-hx)?, at(-2.0 * hx)?);
        let second = (-p2 + 16.0 * p1 - 30.0 * center + 16.0 * m1 - m2) / (12.0 * hx * hx);
        lap += if x[k] == 0.0 {
            (2.0 * g + 2.0) * second
        } else {
            let first = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * hx);
            second + (2.0 * g + 1.0) / x[k] * first
        };
    }
    Ok(dt - lap)
}

fn initial_deviations(
    ev: &SolutionEvaluator,
    k: usize,
    x: &[f64],
    opts: &VerifyOptions,
    counter: &Cell<u64>,
) -> Result<Vec<f64>> {
    let u = counted(ev, counter);
    let target = if ev.mode.homogeneous() {
        ev.problem.phis()[k].value(&x.iter().map(|v| v.abs()).collect::<Vec<_>>())?
    } else {
        0.0
    };
    opts.initial_times
        .iter()
        .map(|&tau| {
            let h = 0.25 * tau;
            let d = match k {
                0 => u(x, tau)?,
                1 => (u(x, tau + h)? - u(x, tau - h)?) / (2.0 * h),
                2 => (u(x, tau + h)? - 2.0 * u(x, tau)? + u(x, tau - h)?) / (h * h),
                _ => {
                    return Err(Error::InvalidParams(format!(
                        "initial condition of order {k} not supported"
                    )))
                }
            };
            Ok(d - target)
        })
        .collect()
}

/// Odd x-derivative of order 1 or 3 at a point on the singular axis, by a
/// symmetric stencil.
fn boundary_derivative(
    ev: &SolutionEvaluator,
    axis: usize,
    x: &[f64],
    t: f64,
    order: usize,
    opts: &VerifyOptions,
    counter: &Cell<u64>,
) -> Result<f64> {
    let u = counted(ev, counter);
    let h = opts.space_step;
    let at = |d: f64| {
        let mut y = x.to_vec();
        y[axis] += d;
        u(&y, t)
    };
    match order {
        1 => Ok((at(h)? - at(-h)?) / (2.0 * h)),
        3 => Ok((at(2.0 * h)? - 2.0 * at(h)? + 2.0 * at(-h)? - at(-2.0 * h)?) / (2.0 * h * h * h)),
        _ => Err(Error::InvalidParams(format!(
            "boundary derivative of order {order} not supported"
        ))),
    }
}

/// x ↦ ∫_0^∞ g0(x, s, t) φ(s) ds, the classical even heat solution on the
/// half-line.
struct ReflectedHeat {
    data: FieldRef,
    t: f64,
    spec: QuadSpec,
}

impl ScalarField for ReflectedHeat {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let x = x[0].abs();
        let r = integrate_gaussian_tail(
            |s| Ok(g0(x, s, self.t)? * self.data.value(&[s])?),
            self.t,
            x,
            &self.spec,
        )?;
        Ok(r.value)
    }

    fn partial(&self, x: &[f64], orders: &[usize]) -> Option<Result<f64>> {
        (orders[0] == 0).then(|| self.value(x))
    }

    fn derivative_order(&self) -> usize {
        0
    }

    fn is_even(&self) -> bool {
        true
    }
}

/// u(x,t) by the transmutation route for n = 1, m = 1: the plain operator
/// J_0(γ + 1/2; −1/2) applied to the classical even heat solution whose data
/// are J_0^{-1}(γ + 1/2; −1/2) φ_0.
pub fn transmutation_value(problem: &ProblemSpec, x: f64, t: f64, spec: &QuadSpec) -> Result<f64> {
    if problem.dim() != 1 || problem.order() != 1 {
        return Err(Error::InvalidParams(
            "the transmutation route is implemented for n = 1, m = 1".into(),
        ));
    }
    if !(t > 0.0 && x > 0.0) {
        return Err(Error::domain("transmutation_value", "need x > 0 and t > 0"));
    }
    let params = EKParams::plain(problem.gamma().alphas(), vec![-0.5])?;
    let classical_data: FieldRef = Arc::new(EkInverse::new(
        params.clone(),
        problem.phis()[0].clone(),
        *spec,
    )?);
    let heat = ReflectedHeat {
        data: classical_data,
        t,
        spec: *spec,
    };
    ek_apply(&params, &heat, &[x], spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffop::GammaVec;
    use crate::field::{PolyGauss, SourceField, TimeProfile};

    fn problem(gamma: f64, phis: Vec<PolyGauss>, source: Option<SourceField>) -> ProblemSpec {
        let phis = phis.into_iter().map(|p| Arc::new(p) as FieldRef).collect();
        ProblemSpec::new(GammaVec::strict(vec![gamma]).unwrap(), phis, source).unwrap()
    }

    fn spec() -> QuadSpec {
        QuadSpec::default().with_tol(1e-11)
    }

    #[test]
    fn constant_data_is_preserved() {
        let ev = solve_homogeneous(
            problem(0.25, vec![PolyGauss::constant(1, 1.0)], None),
            spec(),
        )
        .unwrap();
        for &(x, t) in &[(0.0, 0.01), (1.0, 0.5), (3.0, 2.0)] {
            assert!((ev.eval(&[x], t).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn quadratic_data() {
        for &g in &[-0.4, 0.25] {
            let ev =
                solve_homogeneous(problem(g, vec![PolyGauss::power(1, 1)], None), spec()).unwrap();
            for &(x, t) in &[(0.0, 0.01), (1.5, 0.3), (3.0, 2.0)] {
                let exact = x * x + (4.0 * g + 4.0) * t;
                assert!(
                    (ev.eval(&[x], t).unwrap() - exact).abs() < 1e-8,
                    "g={g} x={x} t={t}"
                );
            }
        }
    }

    #[test]
    fn time_zero_returns_data() {
        let ev = solve_homogeneous(
            problem(0.1, vec![PolyGauss::gaussian(1, 1.0, 1.0).unwrap()], None),
            spec(),
        )
        .unwrap();
        assert_eq!(ev.eval(&[0.7], 0.0).unwrap(), (-0.49_f64).exp());
        assert_eq!(ev.eval(&[-0.7], 0.0).unwrap(), (-0.49_f64).exp());
        assert!(ev.eval(&[0.7], -1.0).is_err());
    }

    #[test]
    fn duhamel_constant_source() {
        let src = SourceField::new(1).term(PolyGauss::constant(1, 1.0), TimeProfile::Constant);
        let p = problem(0.25, vec![PolyGauss::zero(1)], Some(src.clone()));
        let ev = solve_inhomogeneous(p, spec()).unwrap();
        assert!((ev.eval(&[1.0], 0.7).unwrap() - 0.7).abs() < 1e-9);
        let p = problem(
            0.25,
            vec![PolyGauss::zero(1), PolyGauss::zero(1)],
            Some(src),
        );
        let ev = solve_inhomogeneous(p, spec()).unwrap();
        assert!((ev.eval(&[1.0], 0.7).unwrap() - 0.245).abs() < 1e-9);
    }

    #[test]
    fn incompatible_data_are_rejected_unless_overridden() {
        let gauss = PolyGauss::gaussian(1, 1.0, 1.0).unwrap();
        let p = problem(0.25, vec![gauss.clone(), PolyGauss::zero(1)], None);
        assert!(matches!(
            solve_homogeneous(p.clone(), spec()),
            Err(Error::Validation(_))
        ));
        let ev = SolutionEvaluator::new_unchecked(p, spec(), Mode::Homogeneous).unwrap();
        assert!(!ev.validation().passed());
        assert!(ev.eval(&[0.5], 0.1).unwrap().is_finite());
    }

    #[test]
    fn inhomogeneous_needs_source() {
        let p = problem(0.25, vec![PolyGauss::zero(1)], None);
        assert!(solve_inhomogeneous(p, spec()).is_err());
    }

    #[test]
    fn extrapolation_and_orders() {
        let times = [1e-2, 1e-3, 1e-4];
        let d = [2e-2, 2e-3, 2e-4];
        assert!(extrapolate(&times, &d).abs() < 1e-15);
        for o in observed_orders(&times, &d) {
            assert!((o - 1.0).abs() < 1e-12);
        }
        assert!((fitted_order(&times, &d) - 1.0).abs() < 1e-12);
        let quadratic = [1e-4, 1e-6, 1e-8];
        assert!((fitted_order(&times, &quadratic) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn norms() {
        let n = Norms::of([3.0, -4.0].into_iter());
        assert_eq!(n.max, 4.0);
        assert!((n.rms - (12.5_f64).sqrt()).abs() < 1e-15);
        assert_eq!(n.count, 2);
    }
}
