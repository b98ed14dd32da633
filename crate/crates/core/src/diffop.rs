//! The Bessel operator B_γ = ∂² + ((2γ+1)/x)∂, its sums Δ_B = Σ_k B_{γ_k}
//! and powers, assembly of the initial fields f_k of the solution formula,
//! and the compatibility check on initial data.
//!
//! On the singular axis x_k = 0 an even field has B_γ f = (2γ+2) f'', and
//! more generally B_γ^j f(0) = f^{(2j)}(0)/(2j)! · ∏_{i=1}^{j} 2i(2i+2γ).
//! Away from it B_γ^j is expanded as Σ_i c_{j,i} x^{i−2j} ∂^i.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{FieldRef, PolyGauss, ScalarField, SourceField};
use crate::numerics::{binomial, factorial};

/// Per-axis singularity parameters γ_k.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaVec {
    gamma: Vec<f64>,
    strict: bool,
}

impl GammaVec {
    /// γ_k > −1/2 for every axis.
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::InvalidParams(
                "gamma vector must not be empty".into(),
            ));
        }
        if let Some(g) = gamma.iter().find(|g| !(g.is_finite() && **g > -0.5)) {
            return Err(Error::InvalidParams(format!(
                "each gamma must exceed -1/2, got {g}"
            )));
        }
        let strict = gamma.iter().all(|g| g.abs() < 0.5);
        Ok(GammaVec { gamma, strict })
    }

    /// |γ_k| < 1/2 for every axis, the range of the solution formula.
    pub fn strict(gamma: Vec<f64>) -> Result<Self> {
        let g = Self::new(gamma)?;
        if !g.strict {
            return Err(Error::InvalidParams(format!(
                "solution formula needs |gamma| < 1/2 on every axis, got {:?}",
                g.gamma
            )));
        }
        Ok(g)
    }

    pub fn values(&self) -> &[f64] {
        &self.gamma
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    /// α_k = γ_k + 1/2.
    pub fn alphas(&self) -> Vec<f64> {
        self.gamma.iter().map(|g| g + 0.5).collect()
    }
}

/// Cauchy problem (∂_t − Δ_B)^m u = f, ∂_t^k u(x,0) = φ_k(x).
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    gamma: GammaVec,
    m: usize,
    phis: Vec<FieldRef>,
    source: Option<SourceField>,
}

impl ProblemSpec {
    pub fn new(gamma: GammaVec, phis: Vec<FieldRef>, source: Option<SourceField>) -> Result<Self> {
        let m = phis.len();
        if !(1..=3).contains(&m) {
            return Err(Error::InvalidParams(format!(
                "equation order must be 1, 2 or 3, got {m}"
            )));
        }
        if !gamma.is_strict() {
            return Err(Error::InvalidParams(
                "problem needs |gamma| < 1/2 on every axis".into(),
            ));
        }
        let n = gamma.dim();
        if n > 3 {
            return Err(Error::InvalidParams(format!(
                "dimension must be at most 3, got {n}"
            )));
        }
        for (j, phi) in phis.iter().enumerate() {
            if phi.dim() != n {
                return Err(Error::InvalidParams(format!(
                    "initial field {j} has dimension {}, expected {n}",
                    phi.dim()
                )));
            }
            if !phi.is_even() {
                return Err(Error::InvalidParams(format!(
                    "initial field {j} must be even in every axis"
                )));
            }
        }
        if let Some(f) = &source {
            if f.dim() != n {
                return Err(Error::InvalidParams(
                    "source dimension does not match gamma".into(),
                ));
            }
            if !f.is_even() {
                return Err(Error::InvalidParams(
                    "source must be even in every axis".into(),
                ));
            }
        }
        Ok(ProblemSpec {
            gamma,
            m,
            phis,
            source,
        })
    }

    pub fn dim(&self) -> usize {
        self.gamma.dim()
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn gamma(&self) -> &GammaVec {
        &self.gamma
    }

    pub fn phis(&self) -> &[FieldRef] {
        &self.phis
    }

    pub fn source(&self) -> Option<&SourceField> {
        self.source.as_ref()
    }

    /// The same problem with zero initial data.
    pub fn without_initial_data(&self) -> Self {
        let zero: FieldRef = Arc::new(PolyGauss::zero(self.dim()));
        ProblemSpec {
            phis: vec![zero; self.m],
            ..self.clone()
        }
    }

    /// The same problem with no source.
    pub fn without_source(&self) -> Self {
        ProblemSpec {
            source: None,
            ..self.clone()
        }
    }
}

/// B_γ along `axis` at `point`.
pub fn apply_b(gamma: f64, field: &dyn ScalarField, axis: usize, point: &[f64]) -> Result<f64> {
    apply_b_pow(gamma, field, axis, 1, point)
}

/// B_γ^p along `axis` at `point`.
pub fn apply_b_pow(
    gamma: f64,
    field: &dyn ScalarField,
    axis: usize,
    p: usize,
    point: &[f64],
) -> Result<f64> {
    let mut powers = vec![0; field.dim()];
    powers[axis] = p;
    let mut gammas = vec![0.0; field.dim()];
    gammas[axis] = gamma;
    apply_b_product(&gammas, field, &powers, point)
}

/// Δ_B^p = (Σ_k B_{γ_k})^p at `point`.
pub fn apply_delta_b_pow(
    gammas: &[f64],
    field: &dyn ScalarField,
    p: usize,
    point: &[f64],
) -> Result<f64> {
    check_args(gammas, field, point)?;
    if p == 0 {
        return field.value(point);
    }
    if let Some(pg) = field.closed_form() {
        let mut g = pg.clone();
        for _ in 0..p {
            g = g.bessel_laplacian(gammas)?;
        }
        return Ok(g.eval(point));
    }
    let mut sum = 0.0;
    for (coef, powers) in multinomial_terms(gammas.len(), p) {
        sum += coef * apply_b_product(gammas, field, &powers, point)?;
    }
    Ok(sum)
}

/// ∏_k B_{γ_k}^{powers[k]} at `point`, using analytic partials where the field
/// has them and central-difference stencils otherwise.
pub fn apply_b_product(
    gammas: &[f64],
    field: &dyn ScalarField,
    powers: &[usize],
    point: &[f64],
) -> Result<f64> {
    check_args(gammas, field, point)?;
    if let Some(pg) = field.closed_form() {
        let mut g = pg.clone();
        for (k, &p) in powers.iter().enumerate() {
            for _ in 0..p {
                g = g.bessel(k, gammas[k])?;
            }
        }
        return Ok(g.eval(point));
    }
    let needed = powers.iter().map(|p| 2 * p).max().unwrap_or(0);
    if needed == 0 {
        return field.value(point);
    }
    if field.derivative_order() >= needed {
        expanded_product(gammas, field, powers, point)
    } else {
        stencil_product(gammas, field, powers, point, 0)
    }
}

/// True when Δ_B^p of this field nests numeric stencils deeper than two levels.
pub fn precision_warning(field: &dyn ScalarField, p: usize) -> Option<String> {
    if field.closed_form().is_some() || field.derivative_order() >= 2 * p || p <= 2 {
        None
    } else {
        Some(format!(
            "Delta_B^{p} falls back to {p} nested finite-difference stencils; expect reduced precision"
        ))
    }
}

/// Coefficients of B_γ^j = Σ_{i=1}^{2j} c_i x^{i−2j} ∂^i (index = i).
pub fn b_power_expansion(gamma: f64, j: usize) -> Vec<f64> {
    let mut c = vec![1.0];
    for step in 0..j {
        let mut next = vec![0.0; c.len() + 2];
        for (i, &ci) in c.iter().enumerate() {
            if ci == 0.0 {
                continue;
            }
            let e = i as f64 - 2.0 * step as f64;
            next[i] += ci * e * (e + 2.0 * gamma);
            next[i + 1] += ci * (2.0 * e + 2.0 * gamma + 1.0);
            next[i + 2] += ci;
        }
        c = next;
    }
    c
}

/// B_γ^j f(0) = limit_factor(γ, j) · f^{(2j)}(0) for even f.
pub fn b_power_limit_factor(gamma: f64, j: usize) -> f64 {
    let prod: f64 = (1..=j)
        .map(|i| 2.0 * i as f64 * (2.0 * i as f64 + 2.0 * gamma))
        .product();
    prod / factorial(2 * j)
}

/// Multinomial expansion of (Σ_{k<n} X_k)^p as (coefficient, exponents).
pub fn multinomial_terms(n: usize, p: usize) -> Vec<(f64, Vec<usize>)> {
    fn rec(n: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<(f64, Vec<usize>)>) {
        if prefix.len() == n - 1 {
            prefix.push(left);
            let total: usize = prefix.iter().sum();
            let coef = prefix
                .iter()
                .fold(factorial(total), |acc, &k| acc / factorial(k));
            out.push((coef, prefix.clone()));
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k);
            rec(n, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, p, &mut Vec::with_capacity(n), &mut out);
    out
}

fn check_args(gammas: &[f64], field: &dyn ScalarField, point: &[f64]) -> Result<()> {
    if gammas.len() != field.dim() || point.len() != field.dim() {
        return Err(Error::InvalidParams(format!(
            "dimension mismatch: field {}, gamma {}, point {}",
            field.dim(),
            gammas.len(),
            point.len()
        )));
    }
    if let Some(x) = point.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::domain(
            "bessel operator",
            format!("coordinates must be non-negative, got {x}"),
        ));
    }
    Ok(())
}

/// Per-axis list of (derivative order, coefficient) representing B^j at x.
fn axis_expansion(gamma: f64, j: usize, x: f64, even: bool) -> Result<Vec<(usize, f64)>> {
    if j == 0 {
        return Ok(vec![(0, 1.0)]);
    }
    if x == 0.0 {
        if !even {
            return Err(Error::domain(
                "bessel operator",
                "x = 0 requires a field declared even",
            ));
        }
        return Ok(vec![(2 * j, b_power_limit_factor(gamma, j))]);
    }
    let c = b_power_expansion(gamma, j);
    Ok(c.iter()
        .enumerate()
        .filter(|(_, &ci)| ci != 0.0)
        .map(|(i, &ci)| (i, ci * x.powi(i as i32 - 2 * j as i32)))
        .collect())
}

fn expanded_product(
    gammas: &[f64],
    field: &dyn ScalarField,
    powers: &[usize],
    point: &[f64],
) -> Result<f64> {
    let n = field.dim();
    let mut per_axis = Vec::with_capacity(n);
    for k in 0..n {
        per_axis.push(axis_expansion(
            gammas[k],
            powers[k],
            point[k],
            field.is_even(),
        )?);
    }
    let mut orders = vec![0; n];
    let mut sum = 0.0;
    fn rec(
        k: usize,
        coef: f64,
        per_axis: &[Vec<(usize, f64)>],
        orders: &mut Vec<usize>,
        field: &dyn ScalarField,
        point: &[f64],
        sum: &mut f64,
    ) -> Result<()> {
        if k == per_axis.len() {
            let d = field
                .partial(point, orders)
                .ok_or_else(|| Error::MissingDerivative {
                    order: orders.clone(),
                })??;
            *sum += coef * d;
            return Ok(());
        }
        for &(order, c) in &per_axis[k] {
            orders[k] = order;
            rec(k + 1, coef * c, per_axis, orders, field, point, sum)?;
        }
        Ok(())
    }
    rec(0, 1.0, &per_axis, &mut orders, field, point, &mut sum)?;
    Ok(sum)
}

/// Nested central-difference evaluation; level ℓ uses h = 1e−3·2^ℓ.
fn stencil_product(
    gammas: &[f64],
    field: &dyn ScalarField,
    powers: &[usize],
    point: &[f64],
    level: u32,
) -> Result<f64> {
    let Some(axis) = powers.iter().position(|&p| p > 0) else {
        return field.value(&reflect(point));
    };
    let mut rest = powers.to_vec();
    rest[axis] -= 1;
    let h = 1e-3 * 2f64.powi(level as i32);
    let eval = |x: f64| -> Result<f64> {
        let mut q = point.to_vec();
        q[axis] = x;
        stencil_product(gammas, field, &rest, &reflect(&q), level + 1)
    };
    let x = point[axis];
    let g = gammas[axis];
    let f0 = eval(x)?;
    if x == 0.0 {
        if !field.is_even() {
            return Err(Error::domain(
                "bessel operator",
                "x = 0 requires a field declared even",
            ));
        }
        let f1 = eval(h)?;
        return Ok((2.0 * g + 2.0) * 2.0 * (f1 - f0) / (h * h));
    }
    let fp = eval(x + h)?;
    let fm = eval((x - h).abs())?;
    if x - h < 0.0 && !field.is_even() {
        return Err(Error::domain(
            "bessel operator",
            "stencil crosses x = 0 on a field not declared even",
        ));
    }
    Ok((fp - 2.0 * f0 + fm) / (h * h) + (2.0 * g + 1.0) / x * (fp - fm) / (2.0 * h))
}

fn reflect(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.abs()).collect()
}

/// f_k = Σ_{j=0}^{k} (−1)^j C(k,j) Δ_B^j φ_{k−j}.
pub fn assemble_fk(problem: &ProblemSpec, k: usize) -> Result<FieldRef> {
    assemble_pairs(problem, k, |k, j| (k - j, j))
}

/// The reindexed sum Σ_j (−1)^j C(k,j) Δ_B^{k−j} φ_j. It equals (−1)^k f_k,
/// not f_k; kept for the cross-check of the two conventions.
pub fn assemble_fk_reindexed(problem: &ProblemSpec, k: usize) -> Result<FieldRef> {
    assemble_pairs(problem, k, |k, j| (j, k - j))
}

/// Σ_j (−1)^j C(k,j) Δ_B^{power} φ_{index} with (index, power) = pick(k, j).
fn assemble_pairs(
    problem: &ProblemSpec,
    k: usize,
    pick: impl Fn(usize, usize) -> (usize, usize),
) -> Result<FieldRef> {
    if k >= problem.order() {
        return Err(Error::InvalidParams(format!(
            "f_k needs k < m = {}, got {k}",
            problem.order()
        )));
    }
    let gammas = problem.gamma().values().to_vec();
    let terms: Vec<(f64, usize, usize)> = (0..=k)
        .map(|j| {
            let (idx, pow) = pick(k, j);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            (sign * binomial(k, j), idx, pow)
        })
        .collect();
    let closed: Option<Vec<&PolyGauss>> = problem.phis().iter().map(|p| p.closed_form()).collect();
    if let Some(closed) = closed {
        let mut out = PolyGauss::zero(problem.dim());
        for &(c, idx, pow) in &terms {
            let mut g = closed[idx].clone();
            for _ in 0..pow {
                g = g.bessel_laplacian(&gammas)?;
            }
            out = out.add(&g.scale(c));
        }
        return Ok(Arc::new(out));
    }
    Ok(Arc::new(AssembledField {
        gammas,
        terms: terms
            .into_iter()
            .map(|(c, idx, pow)| (c, problem.phis()[idx].clone(), pow))
            .collect(),
    }))
}

/// Linear combination of Δ_B powers of fields without closed forms.
struct AssembledField {
    gammas: Vec<f64>,
    terms: Vec<(f64, FieldRef, usize)>,
}

impl ScalarField for AssembledField {
    fn dim(&self) -> usize {
        self.gammas.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let x = reflect(x);
        let mut sum = 0.0;
        for (c, f, p) in &self.terms {
            sum += c * apply_delta_b_pow(&self.gammas, f.as_ref(), *p, &x)?;
        }
        Ok(sum)
    }

    fn partial(&self, x: &[f64], orders: &[usize]) -> Option<Result<f64>> {
        if orders.iter().all(|&r| r == 0) {
            Some(self.value(x))
        } else {
            None
        }
    }

    fn derivative_order(&self) -> usize {
        0
    }

    fn is_even(&self) -> bool {
        true
    }
}

/// One failed vanishing condition ∂^i φ_j / ∂x_k^i = 0 at x_k = 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: usize,
    pub axis: usize,
    pub order: usize,
    pub point: Vec<f64>,
    pub magnitude: f64,
}

/// x_k^{2γ_k+1} ∂_k B^l φ_j sampled toward the singular axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCheck {
    pub field: usize,
    pub axis: usize,
    pub power: usize,
    pub samples: Vec<(f64, f64)>,
    pub decays: bool,
}

/// Outcome of [`validate_initial_data`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub scale: f64,
    pub tolerance: f64,
    pub violations: Vec<Violation>,
    pub limit_checks: Vec<LimitCheck>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.limit_checks.iter().all(|c| c.decays)
    }
}

const LIMIT_SAMPLES: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Checks that ∂^i φ_j / ∂x_k^i vanishes on x_k = 0 for i = 1..2(m−j)−1, and
/// that x_k^{2γ_k+1} ∂_k B^l φ_j tends to zero, for every field and axis.
pub fn validate_initial_data(problem: &ProblemSpec) -> ValidationReport {
    let n = problem.dim();
    let m = problem.order();
    let gammas = problem.gamma().values();
    let scale = data_scale(problem);
    let tolerance = 1e-6 * scale;
    let mut violations = Vec::new();
    let mut limit_checks = Vec::new();
    let others = [0.0, 0.7];
    for (j, phi) in problem.phis().iter().enumerate() {
        let max_order = 2 * (m - j) - 1;
        for axis in 0..n {
            for &o in &others {
                let mut point = vec![o; n];
                point[axis] = 0.0;
                for order in 1..=max_order {
                    let v = axis_derivative(phi.as_ref(), axis, order, &point);
                    if v.is_nan() || v.abs() > tolerance {
                        violations.push(Violation {
                            field: j,
                            axis,
                            order,
                            point: point.clone(),
                            magnitude: v.abs(),
                        });
                    }
                }
            }
            for power in 0..(m - j) {
                let samples: Vec<(f64, f64)> = LIMIT_SAMPLES
                    .iter()
                    .map(|&x| {
                        let mut point = vec![0.7; n];
                        point[axis] = x;
                        let d =
                            derivative_of_b_power(phi.as_ref(), gammas[axis], axis, power, &point);
                        (x, x.powf(2.0 * gammas[axis] + 1.0) * d)
                    })
                    .collect();
                let floor = 1e-12 * scale;
                let decays = samples.iter().all(|(_, v)| v.is_finite())
                    && (samples.iter().all(|(_, v)| v.abs() <= floor)
                        || samples
                            .windows(2)
                            .all(|w| w[1].1.abs() <= w[0].1.abs() + floor));
                limit_checks.push(LimitCheck {
                    field: j,
                    axis,
                    power,
                    samples,
                    decays,
                });
            }
        }
    }
    ValidationReport {
        scale,
        tolerance,
        violations,
        limit_checks,
        notes: vec![
            "only derivatives of order >= 1 are required to vanish on the singular axes; \
             the values phi_j(0) themselves are unconstrained"
                .to_string(),
        ],
    }
}

/// max(1, sup |φ_j|) over a 9-point-per-axis grid of [0,4]^n.
fn data_scale(problem: &ProblemSpec) -> f64 {
    let n = problem.dim();
    let mut sup: f64 = 1.0;
    let count = 9usize.pow(n as u32);
    for phi in problem.phis() {
        for idx in 0..count {
            let mut rem = idx;
            let point: Vec<f64> = (0..n)
                .map(|_| {
                    let i = rem % 9;
                    rem /= 9;
                    0.5 * i as f64
                })
                .collect();
            if let Ok(v) = phi.value(&point) {
                sup = sup.max(v.abs());
            }
        }
    }
    sup
}

/// ∂^order along `axis`, analytic if possible, else a symmetric stencil
/// on the even extension.
fn axis_derivative(field: &dyn ScalarField, axis: usize, order: usize, point: &[f64]) -> f64 {
    let mut orders = vec![0; field.dim()];
    orders[axis] = order;
    if let Some(Ok(v)) = field.partial(point, &orders) {
        return v;
    }
    let h = 1e-2;
    let at = |s: f64| {
        let mut q = point.to_vec();
        q[axis] += s;
        field.value(&reflect(&q)).unwrap_or(f64::NAN)
    };
    // Central differences of order `order` on a symmetric stencil.
    let mut sum = 0.0;
    for i in 0..=order {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * binomial(order, i) * at((order as f64 / 2.0 - i as f64) * h);
    }
    sum / h.powi(order as i32)
}

fn derivative_of_b_power(
    field: &dyn ScalarField,
    gamma: f64,
    axis: usize,
    power: usize,
    point: &[f64],
) -> f64 {
    if let Some(pg) = field.closed_form() {
        let mut g = pg.clone();
        for _ in 0..power {
            match g.bessel(axis, gamma) {
                Ok(b) => g = b,
                Err(_) => return f64::NAN,
            }
        }
        let mut orders = vec![0; pg.dim()];
        orders[axis] = 1;
        return g.eval_partial(point, &orders);
    }
    let h = 1e-3 * point[axis].max(1e-3);
    let b_at = |x: f64| {
        let mut q = point.to_vec();
        q[axis] = x;
        apply_b_pow(gamma, field, axis, power, &q).unwrap_or(f64::NAN)
    };
    (b_at(point[axis] + h) - b_at((point[axis] - h).abs())) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FnField;
    use approx::assert_relative_eq;

    fn gauss1() -> FieldRef {
        Arc::new(PolyGauss::gaussian(1, 1.0, 1.0).unwrap())
    }

    /// e^{−x²} through closures only, with analytic partials to order 4.
    fn gauss_fn(order: usize) -> FnField {
        FnField::new(1, |x| (-x[0] * x[0]).exp())
            .even(true)
            .with_partials(order, |x, o| {
                let x = x[0];
                let e = (-x * x).exp();
                match o[0] {
                    0 => e,
                    1 => -2.0 * x * e,
                    2 => (4.0 * x * x - 2.0) * e,
                    3 => (-8.0 * x.powi(3) + 12.0 * x) * e,
                    4 => (16.0 * x.powi(4) - 48.0 * x * x + 12.0) * e,
                    _ => f64::NAN,
                }
            })
    }

    #[test]
    fn apply_b_examples() {
        let x2 = PolyGauss::power(1, 1);
        for &g in &[-0.3, 0.0, 0.25] {
            for &x in &[0.0, 0.5, 2.0] {
                assert_relative_eq!(
                    apply_b(g, &x2, 0, &[x]).unwrap(),
                    4.0 * g + 4.0,
                    max_relative = 1e-14
                );
            }
        }
        assert_eq!(
            apply_b(0.3, &PolyGauss::constant(1, 2.0), 0, &[1.0]).unwrap(),
            0.0
        );
        let e1 = (-1.0_f64).exp();
        assert_relative_eq!(
            apply_b(0.25, gauss1().as_ref(), 0, &[1.0]).unwrap(),
            -e1,
            max_relative = 1e-14
        );
        // Same value through the analytic-partial expansion and through stencils.
        let expanded = apply_b(0.25, &gauss_fn(4), 0, &[1.0]).unwrap();
        assert_relative_eq!(expanded, -e1, max_relative = 1e-14);
        let stencil = apply_b(0.25, &gauss_fn(0), 0, &[1.0]).unwrap();
        assert!((stencil + e1).abs() < 1e-6);
    }

    #[test]
    fn limit_at_singular_axis() {
        // (2γ+2) f''(0) with f'' (0) = −2.
        let v = apply_b(0.25, &gauss_fn(4), 0, &[0.0]).unwrap();
        assert_relative_eq!(v, -2.0 * 2.5, max_relative = 1e-15);
        let odd =
            FnField::new(1, |x| x[0]).with_partials(2, |_, o| if o[0] == 1 { 1.0 } else { 0.0 });
        assert!(apply_b(0.25, &odd, 0, &[0.0]).is_err());
    }

    #[test]
    fn parity_limit_is_continuous() {
        for field in [gauss_fn(4), gauss_fn(0)] {
            let at0 = apply_b(0.1, &field, 0, &[0.0]).unwrap();
            let near2 = apply_b(0.1, &field, 0, &[1e-2]).unwrap();
            let near3 = apply_b(0.1, &field, 0, &[1e-3]).unwrap();
            assert!((near3 - at0).abs() < (near2 - at0).abs() + 1e-6);
            assert!((near3 - at0).abs() < 1e-4);
        }
    }

    #[test]
    fn delta_b_examples() {
        let x2 = PolyGauss::power(1, 1);
        assert_relative_eq!(
            apply_delta_b_pow(&[0.1], &x2, 1, &[0.8]).unwrap(),
            4.4,
            max_relative = 1e-14
        );
        assert_eq!(
            apply_delta_b_pow(&[0.1], &x2, 0, &[0.8]).unwrap(),
            x2.eval(&[0.8])
        );
        let r2 = PolyGauss::power(2, 1);
        let v = apply_delta_b_pow(&[0.1, 0.2], &r2, 1, &[0.3, 1.4]).unwrap();
        assert_relative_eq!(v, 9.2, max_relative = 1e-14);
    }

    #[test]
    fn expansion_matches_closed_form_for_squares() {
        let pg = PolyGauss::gauss_power(2, 1.0, 1, 0.6).unwrap();
        let generic = FnField::new(2, {
            let pg = pg.clone();
            move |x| pg.eval(x)
        })
        .even(true)
        .with_partials(8, {
            let pg = pg.clone();
            move |x, o| pg.eval_partial(x, o)
        });
        for point in [[0.4, 1.2], [0.0, 0.9], [0.0, 0.0]] {
            for p in 0..=3 {
                let a = apply_delta_b_pow(&[0.2, -0.3], &pg, p, &point).unwrap();
                let b = apply_delta_b_pow(&[0.2, -0.3], &generic, p, &point).unwrap();
                assert!(
                    (a - b).abs() <= 1e-9 * (1.0 + a.abs()),
                    "p={p} {point:?}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn expansion_coefficients() {
        // B = ∂² + (2γ+1) x^{-1} ∂.
        assert_eq!(b_power_expansion(0.3, 1), vec![0.0, 1.6, 1.0]);
        // B^j x^{2j} = ∏ 2i(2i+2γ) exactly, consistent with the limit factor.
        let g = 0.15;
        for j in 1..=3 {
            let f = PolyGauss::monomial(1, 1.0, &[2 * j as u32]);
            let v = apply_b_pow(g, &f, 0, j, &[0.0]).unwrap();
            assert_relative_eq!(
                v,
                b_power_limit_factor(g, j) * factorial(2 * j),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn multinomials() {
        let t = multinomial_terms(2, 2);
        assert_eq!(
            t,
            vec![(1.0, vec![2, 0]), (2.0, vec![1, 1]), (1.0, vec![0, 2])]
        );
        let total: f64 = multinomial_terms(3, 3).iter().map(|(c, _)| c).sum();
        assert_eq!(total, 27.0);
    }

    fn problem(gamma: f64, phis: Vec<FieldRef>) -> ProblemSpec {
        ProblemSpec::new(GammaVec::strict(vec![gamma]).unwrap(), phis, None).unwrap()
    }

    #[test]
    fn assemble_examples() {
        let x2: FieldRef = Arc::new(PolyGauss::power(1, 1));
        let zero: FieldRef = Arc::new(PolyGauss::zero(1));
        let one: FieldRef = Arc::new(PolyGauss::constant(1, 1.0));
        let p = problem(0.25, vec![x2.clone(), zero.clone()]);
        let f0 = assemble_fk(&p, 0).unwrap();
        let f1 = assemble_fk(&p, 1).unwrap();
        for x in [0.0, 0.6, 2.5] {
            assert_eq!(f0.value(&[x]).unwrap(), x2.value(&[x]).unwrap());
            assert_relative_eq!(f1.value(&[x]).unwrap(), -5.0, max_relative = 1e-15);
        }
        let p = problem(0.1, vec![zero, one]);
        assert_eq!(assemble_fk(&p, 0).unwrap().value(&[0.3]).unwrap(), 0.0);
        assert_eq!(assemble_fk(&p, 1).unwrap().value(&[0.3]).unwrap(), 1.0);
        assert!(assemble_fk(&p, 2).is_err());
    }

    #[test]
    fn reindexed_convention_differs_by_sign() {
        let phi0: FieldRef = Arc::new(PolyGauss::gauss_power(1, 1.0, 2, 1.0).unwrap());
        let phi1: FieldRef = Arc::new(PolyGauss::gaussian(1, 1.0, 1.0).unwrap());
        let p = problem(0.25, vec![phi0, phi1]);
        for k in 0..2 {
            let a = assemble_fk(&p, k).unwrap();
            let b = assemble_fk_reindexed(&p, k).unwrap();
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            for x in [0.0, 0.5, 1.3, 2.2] {
                let (va, vb) = (a.value(&[x]).unwrap(), b.value(&[x]).unwrap());
                assert!((va - sign * vb).abs() <= 1e-12 * (1.0 + va.abs()));
            }
        }
    }

    #[test]
    fn generic_assembly_matches_closed_form() {
        let closed: FieldRef = Arc::new(PolyGauss::gaussian(1, 1.0, 1.0).unwrap());
        let generic: FieldRef = Arc::new(gauss_fn(4));
        let x4: FieldRef = Arc::new(PolyGauss::gauss_power(1, 1.0, 2, 1.0).unwrap());
        let a = assemble_fk(&problem(0.2, vec![x4.clone(), closed]), 1).unwrap();
        let b = assemble_fk(&problem(0.2, vec![x4, generic]), 1).unwrap();
        for x in [0.0, 0.7, 1.9] {
            assert!((a.value(&[x]).unwrap() - b.value(&[x]).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn validator_examples() {
        let g = gauss1();
        assert!(validate_initial_data(&problem(0.25, vec![g.clone()])).passed());
        let zero: FieldRef = Arc::new(PolyGauss::zero(1));
        let report = validate_initial_data(&problem(0.25, vec![g.clone(), zero.clone()]));
        assert!(!report.passed());
        let v = report.violations.iter().find(|v| v.order == 2).unwrap();
        assert_relative_eq!(v.magnitude, 2.0, max_relative = 1e-14);
        let x4: FieldRef = Arc::new(PolyGauss::gauss_power(1, 1.0, 2, 1.0).unwrap());
        let report = validate_initial_data(&problem(0.25, vec![x4, g]));
        assert!(report.passed(), "{report:?}");
        assert!(!report.notes.is_empty());
    }

    #[test]
    fn validator_on_closure_fields() {
        let report = validate_initial_data(&problem(
            0.25,
            vec![Arc::new(gauss_fn(0)), Arc::new(gauss_fn(0))],
        ));
        assert!(report
            .violations
            .iter()
            .any(|v| v.order == 2 && v.field == 0));
        assert!(!report.violations.iter().any(|v| v.order == 1));
    }

    #[test]
    fn problem_validation() {
        let g = gauss1();
        assert!(GammaVec::strict(vec![0.5]).is_err());
        assert!(GammaVec::new(vec![-0.5]).is_err());
        assert!(GammaVec::new(vec![0.7]).is_ok());
        assert!(ProblemSpec::new(GammaVec::strict(vec![0.1]).unwrap(), vec![], None).is_err());
        let odd: FieldRef = Arc::new(PolyGauss::monomial(1, 1.0, &[1]));
        assert!(ProblemSpec::new(GammaVec::strict(vec![0.1]).unwrap(), vec![odd], None).is_err());
        let two_d: FieldRef = Arc::new(PolyGauss::constant(2, 1.0));
        assert!(
            ProblemSpec::new(GammaVec::strict(vec![0.1]).unwrap(), vec![g, two_d], None).is_err()
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn delta_b_is_additive(a in 0.1f64..2.0, c in -3.0f64..3.0, q in 0u32..3,
                                   g in -0.45f64..0.45, x in 0.0f64..3.0) {
                let f = PolyGauss::gaussian(1, 1.0, a).unwrap();
                let h = PolyGauss::power(1, q).scale(c);
                let sum = f.add(&h);
                let lhs = apply_delta_b_pow(&[g], &sum, 1, &[x]).unwrap();
                let rhs = apply_delta_b_pow(&[g], &f, 1, &[x]).unwrap() + apply_delta_b_pow(&[g], &h, 1, &[x]).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
            }

            #[test]
            fn squared_power_is_composition(a in 0.2f64..2.0, g in -0.45f64..0.45, x in 0.0f64..3.0) {
                let f = PolyGauss::gauss_power(1, 1.0, 1, a).unwrap();
                let once = f.bessel_laplacian(&[g]).unwrap();
                let twice = apply_delta_b_pow(&[g], &once, 1, &[x]).unwrap();
                let direct = apply_delta_b_pow(&[g], &f, 2, &[x]).unwrap();
                prop_assert!((twice - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
            }
        }
    }
}
