//! Finite-difference oracle for the singular problem on a truncated
//! half-line [0, L], independent of the closed-form evaluator.
//!
//! B_γ u is discretized by centered differences, u'' + (2γ+1)/x_i u', with
//! the even-limit row (2γ+2)·2(u_1 − u_0)/h² at x = 0 and a Dirichlet value
//! at x = L. Time stepping is the θ-scheme (θ = 1/2 is Crank–Nicolson).
//! Order m ≥ 2 is solved as the cascade (∂_t − B_γ)W_k = W_{k+1},
//! W_k(·,0) = f_k, with the source driving the top level and u = W_0.

use std::sync::Arc;

use serde::Serialize;

use crate::diffop::{assemble_fk, ProblemSpec};
use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Norm growth beyond this factor is reported as instability.
const GROWTH_LIMIT: f64 = 1e6;

/// Uniform grid x_i = i·L/N, i = 0..=N, with time step dt up to T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1D {
    pub length: f64,
    pub nodes: usize,
    pub dt: f64,
    pub final_time: f64,
}

impl Grid1D {
    pub fn new(length: f64, nodes: usize, dt: f64, final_time: f64) -> Result<Self> {
        let g = Grid1D {
            length,
            nodes,
            dt,
            final_time,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::InvalidParams(format!(
                "grid length must be positive, got {}",
                self.length
            )));
        }
        if self.nodes < 64 {
            return Err(Error::InvalidParams(format!(
                "grid needs at least 64 intervals, got {}",
                self.nodes
            )));
        }
        if !(self.dt.is_finite()
            && self.dt > 0.0
            && self.final_time.is_finite()
            && self.final_time > 0.0)
        {
            return Err(Error::InvalidParams(
                "time step and final time must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.nodes as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// Number of steps; dt is shrunk slightly so that they end exactly at T.
    pub fn steps(&self) -> usize {
        ((self.final_time / self.dt).round() as usize).max(1)
    }

    pub fn effective_dt(&self) -> f64 {
        self.final_time / self.steps() as f64
    }

    /// Largest dt for which explicit stepping stays stable; the x = 0 row
    /// with diagonal −4(γ+1)/h² is the binding one.
    pub fn explicit_stability_bound(&self, gamma: f64) -> f64 {
        let h = self.spacing();
        h * h / (2.0 * (gamma + 1.0))
    }
}

/// Dirichlet value at x = L as a function of t.
pub type BoundaryFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Far-boundary condition for each cascade level W_0 = u, W_1, ...
#[derive(Clone, Default)]
pub enum FarBoundary {
    #[default]
    Zero,
    Exact(Vec<BoundaryFn>),
}

impl FarBoundary {
    fn value(&self, level: usize, t: f64) -> f64 {
        match self {
            FarBoundary::Zero => 0.0,
            FarBoundary::Exact(fs) => fs.get(level).map_or(0.0, |f| f(t)),
        }
    }
}

/// Scheme and output settings for [`fd_solve_with`].
#[derive(Clone)]
pub struct FdOptions {
    pub boundary: FarBoundary,
    /// 1/2 for Crank–Nicolson, 1 for backward Euler, 0 for explicit Euler.
    pub theta: f64,
    /// Keep u every this many steps (the final state is always kept).
    pub snapshot_every: Option<usize>,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions {
            boundary: FarBoundary::Zero,
            theta: 0.5,
            snapshot_every: None,
        }
    }
}

/// Discrete solution u = W_0 on the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdSolution {
    pub grid: Grid1D,
    pub x: Vec<f64>,
    /// (t, u at every node) pairs, ending with t = T.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    /// Discrete weighted mass of u after each step, starting at t = 0.
    pub mass: Vec<f64>,
    /// Smallest and largest nodal value of u over the whole run.
    pub range: (f64, f64),
    pub stability_bound: f64,
}

impl FdSolution {
    pub fn final_values(&self) -> &[f64] {
        &self
            .snapshots
            .last()
            .expect("at least the final snapshot")
            .1
    }

    /// |M(t) − M(0)| / |M(0)| over the run.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass[0];
        self.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max) / m0.abs()
    }

    /// Final value at x by linear interpolation between nodes.
    pub fn interpolate(&self, x: f64) -> Result<f64> {
        let h = self.grid.spacing();
        if !(x >= 0.0 && x <= self.grid.length) {
            return Err(Error::domain(
                "interpolate",
                format!("x = {x} outside the grid"),
            ));
        }
        let i = ((x / h).floor() as usize).min(self.grid.nodes - 1);
        let f = x / h - i as f64;
        let u = self.final_values();
        Ok((1.0 - f) * u[i] + f * u[i + 1])
    }
}

/// Crank–Nicolson solution with zero far-boundary values.
pub fn fd_solve(problem: &ProblemSpec, grid: &Grid1D) -> Result<FdSolution> {
    fd_solve_with(problem, grid, &FdOptions::default())
}

pub fn fd_solve_with(problem: &ProblemSpec, grid: &Grid1D, opts: &FdOptions) -> Result<FdSolution> {
    grid.validate()?;
    if problem.dim() != 1 {
        return Err(Error::InvalidParams(format!(
            "the finite-difference oracle is one-dimensional, got n = {}",
            problem.dim()
        )));
    }
    if !(0.0..=1.0).contains(&opts.theta) {
        return Err(Error::InvalidParams(format!(
            "theta must lie in [0, 1], got {}",
            opts.theta
        )));
    }
    let gamma = problem.gamma().values()[0];
    let n = grid.nodes;
    let x: Vec<f64> = (0..=n).map(|i| grid.x(i)).collect();
    let op = BesselStencil::new(gamma, grid);
    let m = problem.order();
    let steps = grid.steps();
    let dt = grid.effective_dt();

    // levels[k] holds W_k on nodes 0..=N.
    let mut levels = Vec::with_capacity(m);
    for k in 0..m {
        let fk = assemble_fk(problem, k)?;
        let mut w = Vec::with_capacity(n + 1);
        for &xi in &x {
            w.push(fk.value(&[xi])?);
        }
        w[n] = opts.boundary.value(k, 0.0);
        levels.push(w);
    }
    let source = |t: f64| -> Vec<f64> {
        match problem.source() {
            Some(src) => x.iter().map(|&xi| src.value(&[xi], t)).collect(),
            None => vec![0.0; n + 1],
        }
    };

    let weights = op.invariant_weights();
    let mass = |u: &[f64]| -> f64 { weights.iter().zip(u).map(|(w, v)| w * v).sum() };
    let sup = |u: &[f64]| u.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let f_scale = (0..=4)
        .map(|i| sup(&source(grid.final_time * i as f64 / 4.0)))
        .fold(0.0, f64::max);
    let reference = levels
        .iter()
        .map(|w| sup(w))
        .fold(0.0, f64::max)
        .max(f_scale * grid.final_time);

    let mut out_mass = vec![mass(&levels[0])];
    let (mut lo, mut hi) = levels[0]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let mut snapshots = Vec::new();
    let mut f_now = source(0.0);
    for step in 1..=steps {
        let t_old = (step - 1) as f64 * dt;
        let t_new = step as f64 * dt;
        let f_new = source(t_new);
        // The level above supplies the forcing; the top level is forced by f.
        let mut forcing_old = f_now.clone();
        let mut forcing_new = f_new.clone();
        for k in (0..m).rev() {
            let old = levels[k].clone();
            let boundary = (opts.boundary.value(k, t_old), opts.boundary.value(k, t_new));
            let new = op.step(&old, &forcing_old, &forcing_new, boundary, dt, opts.theta)?;
            forcing_old = old;
            forcing_new = new.clone();
            levels[k] = new;
        }
        f_now = f_new;
        let u = &levels[0];
        let norm = levels.iter().map(|w| sup(w)).fold(0.0, f64::max);
        if !norm.is_finite() || (reference > 0.0 && norm > GROWTH_LIMIT * reference) {
            return Err(Error::Unstable {
                step,
                growth: if reference > 0.0 {
                    norm / reference
                } else {
                    f64::INFINITY
                },
            });
        }
        for &v in u.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        out_mass.push(mass(u));
        if let Some(every) = opts.snapshot_every {
            if every > 0 && step % every == 0 && step != steps {
                snapshots.push((t_new, u.clone()));
            }
        }
    }
    snapshots.push((steps as f64 * dt, levels[0].clone()));
    Ok(FdSolution {
        grid: *grid,
        x,
        snapshots,
        mass: out_mass,
        range: (lo, hi),
        stability_bound: grid.explicit_stability_bound(gamma),
    })
}

/// Tridiagonal B_γ stencil on nodes 0..N−1 (row i: sub[i], diag[i], sup[i]).
struct BesselStencil {
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    h: f64,
    gamma: f64,
}

impl BesselStencil {
    fn new(gamma: f64, grid: &Grid1D) -> Self {
        let n = grid.nodes;
        let h = grid.spacing();
        let h2 = h * h;
        let (mut sub, mut diag, mut sup) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        // Even limit at x = 0: (2γ+2) u'' with u_{−1} = u_1.
        diag[0] = -(2.0 * gamma + 2.0) * 2.0 / h2;
        sup[0] = (2.0 * gamma + 2.0) * 2.0 / h2;
        for i in 1..n {
            let c = (2.0 * gamma + 1.0) / (grid.x(i) * 2.0 * h);
            sub[i] = 1.0 / h2 - c;
            diag[i] = -2.0 / h2;
            sup[i] = 1.0 / h2 + c;
        }
        BesselStencil {
            sub,
            diag,
            sup,
            h,
            gamma,
        }
    }

    /// (A u)_i for the unknown nodes, with u[N] the boundary value.
    fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.sub[i] * u[i - 1] } else { 0.0 };
                left + self.diag[i] * u[i] + self.sup[i] * u[i + 1]
            })
            .collect()
    }

    /// One θ-step of w_t = A w + g on nodes 0..N−1.
    fn step(
        &self,
        old: &[f64],
        g_old: &[f64],
        g_new: &[f64],
        boundary: (f64, f64),
        dt: f64,
        theta: f64,
    ) -> Result<Vec<f64>> {
        let n = self.diag.len();
        let mut with_boundary = old.to_vec();
        with_boundary[n] = boundary.0;
        let au = self.apply(&with_boundary);
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| {
                old[i]
                    + (1.0 - theta) * dt * au[i]
                    + dt * (theta * g_new[i] + (1.0 - theta) * g_old[i])
            })
            .collect();
        rhs[n - 1] += theta * dt * self.sup[n - 1] * boundary.1;
        let mut new = if theta == 0.0 {
            rhs
        } else {
            let a: Vec<f64> = self.sub.iter().map(|s| -theta * dt * s).collect();
            let b: Vec<f64> = self.diag.iter().map(|d| 1.0 - theta * dt * d).collect();
            let c: Vec<f64> = self.sup.iter().map(|s| -theta * dt * s).collect();
            thomas(&a, &b, &c, &rhs)?
        };
        new.push(boundary.1);
        Ok(new)
    }

    /// Solves (I − c A) w = rhs on the unknown nodes with a zero far value.
    fn solve_implicit(&self, rhs: &[f64], c: f64) -> Result<Vec<f64>> {
        let a: Vec<f64> = self.sub.iter().map(|s| -c * s).collect();
        let b: Vec<f64> = self.diag.iter().map(|d| 1.0 - c * d).collect();
        let up: Vec<f64> = self.sup.iter().map(|s| -c * s).collect();
        thomas(&a, &b, &up, rhs)
    }

    /// Weights μ with Σ_i μ_i (A u)_i independent of u_0..u_{N−2}: the
    /// discrete counterpart of the measure x^{2γ+1} dx under which B_γ is in
    /// divergence form. Scaled to match x^{2γ+1}h mid-grid; the weight of the
    /// boundary node is zero.
    fn invariant_weights(&self) -> Vec<f64> {
        let n = self.diag.len();
        let mut mu = vec![0.0; n + 1];
        mu[0] = 1.0;
        mu[1] = -mu[0] * self.diag[0] / self.sub[1];
        for j in 1..n - 1 {
            mu[j + 1] = -(mu[j - 1] * self.sup[j - 1] + mu[j] * self.diag[j]) / self.sub[j + 1];
        }
        let mid = n / 2;
        let target = (mid as f64 * self.h).powf(2.0 * self.gamma + 1.0) * self.h;
        let scale = target / mu[mid];
        mu.iter_mut().for_each(|m| *m *= scale);
        mu
    }
}

/// Solves the tridiagonal system with sub-diagonal a, diagonal b and
/// super-diagonal c (a[0] and c[n−1] unused).
fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    if b[0] == 0.0 {
        return Err(Error::SingularMatrix { row: 0 });
    }
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let denom = b[i] - a[i] * cp[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::SingularMatrix { row: i });
        }
        cp[i] = c[i] / denom;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    Ok(x)
}

/// Errors and observed orders along a refinement sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// Refinement ratio between consecutive grids (dt or h, whichever changes).
    pub ratios: Vec<f64>,
    /// Max-norm errors against the reference, or differences between
    /// consecutive solutions when there is none.
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
}

/// Observed order of accuracy over nested grids. With a reference u(x,T)
/// the errors are measured against it; otherwise successive solutions are
/// differenced (Richardson self-convergence). Errors are taken on the nodes
/// of the coarsest grid in [0, x_max], which every grid must contain.
pub fn convergence_study(
    problem: &ProblemSpec,
    grids: &[Grid1D],
    opts: &FdOptions,
    reference: Option<&(dyn Fn(f64) -> Result<f64> + Sync)>,
    x_max: f64,
) -> Result<ConvergenceReport> {
    if grids.len() < 3 {
        return Err(Error::InvalidParams(
            "a convergence study needs at least three grids".into(),
        ));
    }
    let coarse = grids[0];
    let probes: Vec<f64> = (0..=coarse.nodes)
        .map(|i| coarse.x(i))
        .filter(|&x| x <= x_max)
        .collect();
    let mut sampled = Vec::new();
    for g in grids {
        if g.length != coarse.length || g.nodes % coarse.nodes != 0 {
            return Err(Error::InvalidParams(
                "grids must share L and refine the node count by integer factors".into(),
            ));
        }
        let sol = fd_solve_with(problem, g, opts)?;
        let stride = g.nodes / coarse.nodes;
        let u = sol.final_values();
        sampled.push(
            probes
                .iter()
                .enumerate()
                .map(|(i, _)| u[i * stride])
                .collect::<Vec<f64>>(),
        );
    }
    let ratios: Vec<f64> = grids
        .windows(2)
        .map(|w| {
            let time = w[0].effective_dt() / w[1].effective_dt();
            let space = w[1].nodes as f64 / w[0].nodes as f64;
            time.max(space)
        })
        .collect();
    let max_diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    };
    let (errors, orders) = match reference {
        Some(exact) => {
            let truth = probes
                .iter()
                .map(|&x| exact(x))
                .collect::<Result<Vec<_>>>()?;
            let errors: Vec<f64> = sampled.iter().map(|u| max_diff(u, &truth)).collect();
            let orders = errors
                .windows(2)
                .zip(&ratios)
                .map(|(e, r)| (e[0] / e[1]).ln() / r.ln())
                .collect();
            (errors, orders)
        }
        None => {
            let diffs: Vec<f64> = sampled.windows(2).map(|w| max_diff(&w[0], &w[1])).collect();
            let orders = diffs
                .windows(2)
                .zip(&ratios[1..])
                .map(|(d, r)| (d[0] / d[1]).ln() / r.ln())
                .collect();
            (diffs, orders)
        }
    };
    Ok(ConvergenceReport {
        ratios,
        errors,
        orders,
    })
}

/// Peaceman–Rachford alternating-direction solution of u_t = B_{γ_1}^x u +
/// B_{γ_2}^y u on [0, L]² with zero far-boundary values and no source.
pub fn adi_solve(gammas: [f64; 2], data: &dyn ScalarField, grid: &Grid1D) -> Result<Vec<Vec<f64>>> {
    grid.validate()?;
    if data.dim() != 2 {
        return Err(Error::InvalidParams(
            "the alternating-direction solver needs a two-dimensional field".into(),
        ));
    }
    let n = grid.nodes;
    let ops = [
        BesselStencil::new(gammas[0], grid),
        BesselStencil::new(gammas[1], grid),
    ];
    let mut u = vec![vec![0.0; n + 1]; n + 1];
    for (i, row) in u.iter_mut().enumerate().take(n) {
        for (j, v) in row.iter_mut().enumerate().take(n) {
            *v = data.value(&[grid.x(i), grid.x(j)])?;
        }
    }
    let dt = grid.effective_dt();
    let half = 0.5 * dt;
    let reference = u.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
    for step in 1..=grid.steps() {
        // (I − half A_x) u* = (I + half A_y) u^n, one solve per column j.
        let ay: Vec<Vec<f64>> = (0..n).map(|i| ops[1].apply(&u[i])).collect();
        let mut star = vec![vec![0.0; n + 1]; n + 1];
        for j in 0..n {
            let rhs: Vec<f64> = (0..n).map(|i| u[i][j] + half * ay[i][j]).collect();
            let col = ops[0].solve_implicit(&rhs, half)?;
            for i in 0..n {
                star[i][j] = col[i];
            }
        }
        // (I − half A_y) u^{n+1} = (I + half A_x) u*, one solve per row i.
        let ax_cols: Vec<Vec<f64>> = (0..n)
            .map(|j| ops[0].apply(&(0..=n).map(|i| star[i][j]).collect::<Vec<_>>()))
            .collect();
        let mut next = vec![vec![0.0; n + 1]; n + 1];
        for i in 0..n {
            let rhs: Vec<f64> = (0..n).map(|j| star[i][j] + half * ax_cols[j][i]).collect();
            let row = ops[1].solve_implicit(&rhs, half)?;
            next[i][..n].copy_from_slice(&row);
        }
        u = next;
        let norm = u.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
        if !norm.is_finite() || (reference > 0.0 && norm > GROWTH_LIMIT * reference) {
            return Err(Error::Unstable {
                step,
                growth: norm / reference,
            });
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_known_system() {
        let (a, b, c) = (
            vec![0.0, -1.0, -1.0],
            vec![2.0, 2.0, 2.0],
            vec![-1.0, -1.0, 0.0],
        );
        let x = thomas(&a, &b, &c, &[1.0, 0.0, 1.0]).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn thomas_reports_zero_pivot() {
        let err = thomas(&[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix { row: 1 }));
    }

    #[test]
    fn invariant_weights_follow_the_measure() {
        let gamma = 0.3;
        let grid = Grid1D::new(8.0, 512, 1e-3, 1.0).unwrap();
        let op = BesselStencil::new(gamma, &grid);
        let mu = op.invariant_weights();
        let h = grid.spacing();
        for i in [64, 128, 400] {
            let target = grid.x(i).powf(2.0 * gamma + 1.0) * h;
            assert!(
                (mu[i] / target - 1.0).abs() < 1e-3,
                "node {i}: {}",
                mu[i] / target
            );
        }
        // Every column except the last is annihilated.
        let n = grid.nodes;
        for j in 0..n - 1 {
            let mut col = mu[j] * op.diag[j];
            if j > 0 {
                col += mu[j - 1] * op.sup[j - 1];
            }
            col += mu[j + 1] * op.sub[j + 1];
            assert!(
                col.abs() <= 1e-9 * mu[j].abs() * op.diag[j].abs(),
                "column {j}: {col:e}"
            );
        }
    }
}
