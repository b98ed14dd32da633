//! Multidimensional Erdélyi–Kober operators, generalized by a
//! Bessel–Clifford factor, their inverses for 0 < α < 1, and residuals of
//! the intertwining identities with the Bessel operator.
//!
//! Per axis, with t² = x²u,
//!
//! J f(x) = 1/Γ(α) ∫_0^1 u^η (1−u)^{α−1} J̄_{α−1}(λx√(1−u)) f(x√u) du,
//!
//! and the n-dimensional operator nests these integrals in axis order. The
//! inverse is
//!
//! J^{-1} f(x) = ∏_k 1/(2Γ(1−α_k)) (2η_k + 2 + x_k ∂_k) K(x),
//! K(x) = ∫_0^1 u^{η+α} (1−u)^{−α} Ī_{−α}(λx√(1−u)) f(x√u) du (nested),
//!
//! so every derivative acts on an integral over a fixed domain and is taken
//! under the integral sign by Leibniz' rule.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::diffop::{apply_b_product, multinomial_terms};
use crate::error::{Error, Result};
use crate::field::{FieldRef, PolyGauss, ScalarField};
use crate::numerics::{
    bessel_clifford, bessel_clifford_derivative, binomial, gamma_fn, integrate_finite,
    CliffordKind, QuadSpec,
};

const MAX_DIM: usize = 3;

/// Orders α, weights η and Bessel parameters λ, one per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct EKParams {
    alpha: Vec<f64>,
    eta: Vec<f64>,
    lambda: Vec<f64>,
}

impl EKParams {
    pub fn new(alpha: Vec<f64>, eta: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        let n = alpha.len();
        if n == 0 || n > MAX_DIM {
            return Err(Error::InvalidParams(format!(
                "dimension must be 1..=3, got {n}"
            )));
        }
        if eta.len() != n || lambda.len() != n {
            return Err(Error::InvalidParams(
                "alpha, eta and lambda must have equal length".into(),
            ));
        }
        if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidParams(format!(
                "alpha must be positive, got {a}"
            )));
        }
        if let Some(e) = eta.iter().find(|e| !(e.is_finite() && **e >= -0.5)) {
            return Err(Error::InvalidParams(format!(
                "eta must be at least -1/2, got {e}"
            )));
        }
        if let Some(l) = lambda.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::InvalidParams(format!(
                "lambda must be non-negative, got {l}"
            )));
        }
        Ok(EKParams { alpha, eta, lambda })
    }

    /// λ = 0 on every axis.
    pub fn plain(alpha: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        let n = alpha.len();
        Self::new(alpha, eta, vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn is_plain(&self) -> bool {
        self.lambda.iter().all(|&l| l == 0.0)
    }

    /// η_k + α_k, the operator weight after transformation.
    pub fn shifted_eta(&self) -> Vec<f64> {
        self.eta
            .iter()
            .zip(&self.alpha)
            .map(|(e, a)| e + a)
            .collect()
    }

    fn check_invertible(&self) -> Result<()> {
        if let Some(a) = self.alpha.iter().find(|a| **a >= 1.0) {
            return Err(Error::InvalidParams(format!(
                "inverse needs 0 < alpha < 1, got {a}"
            )));
        }
        Ok(())
    }

    fn forward_kernels(&self) -> Vec<AxisKernel> {
        (0..self.dim())
            .map(|k| AxisKernel {
                kind: CliffordKind::J,
                nu: self.alpha[k] - 1.0,
                left: self.eta[k],
                right: self.alpha[k] - 1.0,
                lambda: self.lambda[k],
            })
            .collect()
    }

    fn inverse_kernels(&self) -> Vec<AxisKernel> {
        (0..self.dim())
            .map(|k| AxisKernel {
                kind: CliffordKind::I,
                nu: -self.alpha[k],
                left: self.eta[k] + self.alpha[k],
                right: -self.alpha[k],
                lambda: self.lambda[k],
            })
            .collect()
    }
}

/// Value of an inverse operator and whether numeric differentiation was needed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseValue {
    pub value: f64,
    pub numeric_fallback: bool,
}

/// J_λ(α; η) f at `point`.
pub fn ek_apply(
    params: &EKParams,
    field: &dyn ScalarField,
    point: &[f64],
    spec: &QuadSpec,
) -> Result<f64> {
    ek_apply_partial(params, field, point, &vec![0; params.dim()], spec)
}

/// ∂^{orders} J_λ(α; η) f at `point`, differentiating under the integral.
pub fn ek_apply_partial(
    params: &EKParams,
    field: &dyn ScalarField,
    point: &[f64],
    orders: &[usize],
    spec: &QuadSpec,
) -> Result<f64> {
    check_point(params, field, point, "ek_apply")?;
    let mut norm = 1.0;
    for &a in params.alpha() {
        norm /= gamma_fn(a)?;
    }
    let kernels = params.forward_kernels();
    Ok(norm * nested(&kernels, field, point, orders, spec)?)
}

/// Inverse of the plain operator (λ = 0).
pub fn ek_inverse_plain(
    params: &EKParams,
    field: &dyn ScalarField,
    point: &[f64],
    spec: &QuadSpec,
) -> Result<InverseValue> {
    if !params.is_plain() {
        return Err(Error::InvalidParams(
            "plain inverse needs lambda = 0 on every axis".into(),
        ));
    }
    ek_inverse_generalized(params, field, point, spec)
}

/// Inverse of the generalized operator for 0 < α_k < 1.
pub fn ek_inverse_generalized(
    params: &EKParams,
    field: &dyn ScalarField,
    point: &[f64],
    spec: &QuadSpec,
) -> Result<InverseValue> {
    ek_inverse_partial(params, field, point, &vec![0; params.dim()], spec)
}

/// ∂^{orders} of the inverse at `point`.
pub fn ek_inverse_partial(
    params: &EKParams,
    field: &dyn ScalarField,
    point: &[f64],
    orders: &[usize],
    spec: &QuadSpec,
) -> Result<InverseValue> {
    params.check_invertible()?;
    check_point(params, field, point, "ek_inverse")?;
    let n = params.dim();
    let mut norm = 1.0;
    for &a in params.alpha() {
        norm /= 2.0 * gamma_fn(1.0 - a)?;
    }
    let kernels = params.inverse_kernels();
    let fallback = AtomicBool::new(false);
    // ∂^r [(c + x∂) K] = (c + r) ∂^r K + x ∂^{r+1} K, expanded over subsets of axes.
    let mut sum = 0.0;
    for subset in 0..(1usize << n) {
        let mut coef = 1.0;
        let mut k_orders = orders.to_vec();
        for k in 0..n {
            if subset & (1 << k) != 0 {
                coef *= point[k];
                k_orders[k] += 1;
            } else {
                coef *= 2.0 * params.eta()[k] + 2.0 + orders[k] as f64;
            }
        }
        if coef == 0.0 {
            continue;
        }
        sum += coef * k_partial(&kernels, field, point, &k_orders, spec, &fallback)?;
    }
    Ok(InverseValue {
        value: norm * sum,
        numeric_fallback: fallback.load(Ordering::Relaxed),
    })
}

/// ∂^{orders} K, analytically when the field allows it, else by central
/// differences with step 1e−5·max(1, x).
fn k_partial(
    kernels: &[AxisKernel],
    field: &dyn ScalarField,
    point: &[f64],
    orders: &[usize],
    spec: &QuadSpec,
    fallback: &AtomicBool,
) -> Result<f64> {
    match nested(kernels, field, point, orders, spec) {
        Err(Error::MissingDerivative { .. }) => {}
        other => return other,
    }
    let Some(axis) = orders.iter().position(|&r| r > 0) else {
        return nested(kernels, field, point, orders, spec);
    };
    fallback.store(true, Ordering::Relaxed);
    let mut lower = orders.to_vec();
    lower[axis] -= 1;
    let x = point[axis];
    let h = (1e-5 * x.max(1.0)).min(0.5 * x);
    let mut plus = point.to_vec();
    plus[axis] = x + h;
    let mut minus = point.to_vec();
    minus[axis] = x - h;
    let fp = k_partial(kernels, field, &plus, &lower, spec, fallback)?;
    let fm = k_partial(kernels, field, &minus, &lower, spec, fallback)?;
    Ok((fp - fm) / (2.0 * h))
}

#[derive(Debug, Clone, Copy)]
struct AxisKernel {
    kind: CliffordKind,
    nu: f64,
    left: f64,
    right: f64,
    lambda: f64,
}

/// ∂^{orders} of the nested integral ∏_k ∫_0^1 u^{left}(1−u)^{right}
/// K̄_ν(λ x_k √(1−u)) · f(x_1√u_1, …) du_k.
fn nested(
    kernels: &[AxisKernel],
    field: &dyn ScalarField,
    point: &[f64],
    orders: &[usize],
    spec: &QuadSpec,
) -> Result<f64> {
    let n = kernels.len();
    let mut y = [0.0; MAX_DIM];
    y[..n].copy_from_slice(point);
    let mut base = [0usize; MAX_DIM];
    let mut ord = [0usize; MAX_DIM];
    ord[..n].copy_from_slice(orders);
    if let Some(max) = orders.iter().max() {
        if *max > field.derivative_order() {
            return Err(Error::MissingDerivative {
                order: orders.to_vec(),
            });
        }
    }
    nested_axis(0, kernels, field, point, y, &ord, &mut base, spec)
}

#[allow(clippy::too_many_arguments)]
fn nested_axis(
    k: usize,
    kernels: &[AxisKernel],
    field: &dyn ScalarField,
    x: &[f64],
    y: [f64; MAX_DIM],
    orders: &[usize; MAX_DIM],
    base: &mut [usize; MAX_DIM],
    spec: &QuadSpec,
) -> Result<f64> {
    let n = kernels.len();
    if k == n {
        let pt = &y[..n];
        let ord = &base[..n];
        return match field.partial(pt, ord) {
            Some(v) => v,
            None => Err(Error::MissingDerivative {
                order: ord.to_vec(),
            }),
        };
    }
    let ker = kernels[k];
    let r = orders[k];
    let xk = x[k];
    let kernel_orders = if ker.lambda == 0.0 { 0 } else { r };
    let mut local_base = *base;
    let integrand = |u: f64| -> Result<f64> {
        let su = u.sqrt();
        let s1 = (1.0 - u).max(0.0).sqrt();
        let z = ker.lambda * xk * s1;
        let mut yy = y;
        yy[k] = xk * su;
        let mut sum = 0.0;
        for i in 0..=kernel_orders {
            let kd = if ker.lambda == 0.0 {
                1.0
            } else if i == 0 {
                bessel_clifford(ker.kind, ker.nu, z)?
            } else {
                (ker.lambda * s1).powi(i as i32)
                    * bessel_clifford_derivative(ker.kind, ker.nu, z, i)?
            };
            if kd == 0.0 {
                continue;
            }
            local_base[k] = r - i;
            let inner = nested_axis(k + 1, kernels, field, x, yy, orders, &mut local_base, spec)?;
            sum += binomial(r, i) * kd * su.powi((r - i) as i32) * inner;
        }
        Ok(sum)
    };
    Ok(integrate_finite(integrand, 0.0, 1.0, (ker.left, ker.right), spec)?.value)
}

fn check_point(
    params: &EKParams,
    field: &dyn ScalarField,
    point: &[f64],
    op: &'static str,
) -> Result<()> {
    if field.dim() != params.dim() || point.len() != params.dim() {
        return Err(Error::InvalidParams(format!(
            "dimension mismatch: params {}, field {}, point {}",
            params.dim(),
            field.dim(),
            point.len()
        )));
    }
    if let Some(x) = point.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::domain(
            op,
            format!("coordinates must be positive, got {x}"),
        ));
    }
    Ok(())
}

/// x ↦ J_λ(α; η) f(x) as a field, with derivatives taken under the integral.
#[derive(Clone)]
pub struct EkTransform {
    params: EKParams,
    field: FieldRef,
    spec: QuadSpec,
}

impl EkTransform {
    pub fn new(params: EKParams, field: FieldRef, spec: QuadSpec) -> Result<Self> {
        if field.dim() != params.dim() {
            return Err(Error::InvalidParams(
                "field and parameter dimensions differ".into(),
            ));
        }
        Ok(EkTransform {
            params,
            field,
            spec,
        })
    }
}

impl ScalarField for EkTransform {
    fn dim(&self) -> usize {
        self.params.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        ek_apply(&self.params, self.field.as_ref(), x, &self.spec)
    }

    fn partial(&self, x: &[f64], orders: &[usize]) -> Option<Result<f64>> {
        if orders.iter().any(|&r| r > self.field.derivative_order()) {
            return None;
        }
        Some(ek_apply_partial(
            &self.params,
            self.field.as_ref(),
            x,
            orders,
            &self.spec,
        ))
    }

    fn derivative_order(&self) -> usize {
        self.field.derivative_order()
    }

    fn is_even(&self) -> bool {
        self.field.is_even()
    }
}

/// x ↦ J_λ^{-1}(α; η) f(x) as a field.
#[derive(Clone)]
pub struct EkInverse {
    params: EKParams,
    field: FieldRef,
    spec: QuadSpec,
}

impl EkInverse {
    pub fn new(params: EKParams, field: FieldRef, spec: QuadSpec) -> Result<Self> {
        params.check_invertible()?;
        if field.dim() != params.dim() {
            return Err(Error::InvalidParams(
                "field and parameter dimensions differ".into(),
            ));
        }
        Ok(EkInverse {
            params,
            field,
            spec,
        })
    }
}

impl ScalarField for EkInverse {
    fn dim(&self) -> usize {
        self.params.dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        ek_inverse_generalized(&self.params, self.field.as_ref(), x, &self.spec).map(|v| v.value)
    }

    fn partial(&self, x: &[f64], orders: &[usize]) -> Option<Result<f64>> {
        if orders
            .iter()
            .any(|&r| r + 1 > self.field.derivative_order())
        {
            return None;
        }
        Some(
            ek_inverse_partial(&self.params, self.field.as_ref(), x, orders, &self.spec)
                .map(|v| v.value),
        )
    }

    fn derivative_order(&self) -> usize {
        self.field.derivative_order().saturating_sub(1)
    }

    fn is_even(&self) -> bool {
        self.field.is_even()
    }
}

/// Terms (coefficient, per-axis powers) of the operator Σ_j C(q,j) Λ^{q−j} (Σ_k B_k)^j.
fn shifted_sum_terms(n: usize, q: usize, shift: f64) -> Vec<(f64, Vec<usize>)> {
    let mut out = Vec::new();
    for j in 0..=q {
        let c = binomial(q, j) * shift.powi((q - j) as i32);
        if c == 0.0 {
            continue;
        }
        for (m, powers) in multinomial_terms(n, j) {
            out.push((c * m, powers));
        }
    }
    out
}

/// Terms of (B_k + λ²)^p on a single axis.
fn shifted_axis_terms(n: usize, axis: usize, p: usize, shift: f64) -> Vec<(f64, Vec<usize>)> {
    (0..=p)
        .filter_map(|j| {
            let c = binomial(p, j) * shift.powi((p - j) as i32);
            (c != 0.0).then(|| {
                let mut powers = vec![0; n];
                powers[axis] = j;
                (c, powers)
            })
        })
        .collect()
}

fn apply_terms(
    gammas: &[f64],
    field: &dyn ScalarField,
    terms: &[(f64, Vec<usize>)],
    point: &[f64],
) -> Result<f64> {
    let mut sum = 0.0;
    for (c, powers) in terms {
        sum += c * apply_b_product(gammas, field, powers, point)?;
    }
    Ok(sum)
}

/// The field Σ c ∏ B_{γ_k}^{p_k} f, symbolic for closed forms.
fn operator_image(
    gammas: &[f64],
    field: &FieldRef,
    terms: &[(f64, Vec<usize>)],
) -> Result<FieldRef> {
    if let Some(pg) = field.closed_form() {
        let mut out = PolyGauss::zero(pg.dim());
        for (c, powers) in terms {
            let mut g = pg.clone();
            for (k, &p) in powers.iter().enumerate() {
                for _ in 0..p {
                    g = g.bessel(k, gammas[k])?;
                }
            }
            out = out.add(&g.scale(*c));
        }
        return Ok(Arc::new(out));
    }
    Ok(Arc::new(OperatorImage {
        gammas: gammas.to_vec(),
        field: field.clone(),
        terms: terms.to_vec(),
    }))
}

struct OperatorImage {
    gammas: Vec<f64>,
    field: FieldRef,
    terms: Vec<(f64, Vec<usize>)>,
}

impl ScalarField for OperatorImage {
    fn dim(&self) -> usize {
        self.gammas.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let x: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        apply_terms(&self.gammas, self.field.as_ref(), &self.terms, &x)
    }

    fn partial(&self, x: &[f64], orders: &[usize]) -> Option<Result<f64>> {
        orders.iter().all(|&r| r == 0).then(|| self.value(x))
    }

    fn derivative_order(&self) -> usize {
        0
    }

    fn is_even(&self) -> bool {
        self.field.is_even()
    }
}

/// [B_{η_k+α_k} + λ_k²]^p J f − J [B_{η_k}]^p f at `point`, along `axis`.
pub fn intertwine_residual(
    params: &EKParams,
    field: &FieldRef,
    axis: usize,
    power: usize,
    point: &[f64],
    spec: &QuadSpec,
) -> Result<f64> {
    if axis >= params.dim() || power == 0 {
        return Err(Error::InvalidParams(format!(
            "need axis < n and power >= 1, got axis {axis}, power {power}"
        )));
    }
    let n = params.dim();
    let lam2 = params.lambda()[axis].powi(2);
    let transformed = EkTransform::new(params.clone(), field.clone(), *spec)?;
    let lhs = apply_terms(
        &params.shifted_eta(),
        &transformed,
        &shifted_axis_terms(n, axis, power, lam2),
        point,
    )?;
    let image = operator_image(
        params.eta(),
        field,
        &shifted_axis_terms(n, axis, power, 0.0),
    )?;
    let rhs = ek_apply(params, image.as_ref(), point, spec)?;
    Ok(lhs - rhs)
}

/// [Σ_k (B_{η_k+α_k} + λ_k²)]^q J f − J [Σ_k B_{η_k}]^q f at `point`.
pub fn intertwine_sum_residual(
    params: &EKParams,
    field: &FieldRef,
    q: usize,
    point: &[f64],
    spec: &QuadSpec,
) -> Result<f64> {
    if q == 0 {
        return Err(Error::InvalidParams("power q must be at least 1".into()));
    }
    let n = params.dim();
    let shift: f64 = params.lambda().iter().map(|l| l * l).sum();
    let transformed = EkTransform::new(params.clone(), field.clone(), *spec)?;
    let lhs = apply_terms(
        &params.shifted_eta(),
        &transformed,
        &shifted_sum_terms(n, q, shift),
        point,
    )?;
    let image = operator_image(params.eta(), field, &shifted_sum_terms(n, q, 0.0))?;
    let rhs = ek_apply(params, image.as_ref(), point, spec)?;
    Ok(lhs - rhs)
}

/// [Σ_k B_{η_k}]^p J^{-1} g − J^{-1} [Σ_k (B_{η_k+α_k} + λ_k²)]^p g at `point`.
/// With η = −1/2 and λ = 0 the left operator is the plain Laplacian power
/// and the right one is Δ_B^p with γ_k = α_k − 1/2.
pub fn inverse_intertwine_residual(
    params: &EKParams,
    field: &FieldRef,
    p: usize,
    point: &[f64],
    spec: &QuadSpec,
) -> Result<f64> {
    if p == 0 {
        return Err(Error::InvalidParams("power p must be at least 1".into()));
    }
    let n = params.dim();
    let shift: f64 = params.lambda().iter().map(|l| l * l).sum();
    let inverse = EkInverse::new(params.clone(), field.clone(), *spec)?;
    let lhs = apply_terms(params.eta(), &inverse, &shifted_sum_terms(n, p, 0.0), point)?;
    let image = operator_image(
        &params.shifted_eta(),
        field,
        &shifted_sum_terms(n, p, shift),
    )?;
    let rhs = ek_inverse_generalized(params, image.as_ref(), point, spec)?.value;
    Ok(lhs - rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FnField;
    use approx::assert_relative_eq;
    use statrs::function::gamma::gamma;

    fn spec() -> QuadSpec {
        QuadSpec::default().with_tol(1e-11)
    }

    fn power_law(alpha: f64, eta: f64, beta: f64) -> f64 {
        gamma(eta + beta + 1.0) / gamma(eta + alpha + beta + 1.0)
    }

    #[test]
    fn eigenrelation_one_dimension() {
        let p = EKParams::plain(vec![0.75], vec![-0.5]).unwrap();
        let t2 = PolyGauss::power(1, 1);
        let v = ek_apply(&p, &t2, &[1.0], &spec()).unwrap();
        assert_relative_eq!(v, power_law(0.75, -0.5, 1.0), max_relative = 1e-12);
        let one = PolyGauss::constant(1, 1.0);
        let v = ek_apply(&p, &one, &[2.0], &spec()).unwrap();
        assert_relative_eq!(v, power_law(0.75, -0.5, 0.0), max_relative = 1e-12);
    }

    #[test]
    fn separable_two_dimensional() {
        let p = EKParams::plain(vec![0.5, 0.5], vec![-0.5, -0.5]).unwrap();
        let f = PolyGauss::monomial(2, 1.0, &[2, 2]);
        let v = ek_apply(&p, &f, &[1.0, 1.0], &spec()).unwrap();
        assert_relative_eq!(v, power_law(0.5, -0.5, 1.0).powi(2), max_relative = 1e-12);
    }

    #[test]
    fn inverse_eigenrelation() {
        let p = EKParams::plain(vec![0.75], vec![-0.5]).unwrap();
        let v = ek_inverse_plain(&p, &PolyGauss::power(1, 1), &[1.0], &spec()).unwrap();
        assert_relative_eq!(
            v.value,
            1.0 / power_law(0.75, -0.5, 1.0),
            max_relative = 1e-11
        );
        assert!(!v.numeric_fallback);
        let v = ek_inverse_plain(&p, &PolyGauss::constant(1, 1.0), &[1.7], &spec()).unwrap();
        assert_relative_eq!(
            v.value,
            1.0 / power_law(0.75, -0.5, 0.0),
            max_relative = 1e-11
        );
        let zero = ek_inverse_generalized(
            &EKParams::new(vec![0.6], vec![-0.5], vec![0.5]).unwrap(),
            &PolyGauss::zero(1),
            &[1.0],
            &spec(),
        )
        .unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn numeric_fallback_is_flagged() {
        let p = EKParams::plain(vec![0.75], vec![-0.5]).unwrap();
        let f = FnField::new(1, |x| x[0] * x[0]).even(true);
        let v = ek_inverse_plain(&p, &f, &[1.0], &spec()).unwrap();
        assert!(v.numeric_fallback);
        assert_relative_eq!(
            v.value,
            1.0 / power_law(0.75, -0.5, 1.0),
            max_relative = 1e-7
        );
    }

    #[test]
    fn generalized_inverse_collapses_at_zero_lambda() {
        let p = EKParams::plain(vec![0.4], vec![0.0]).unwrap();
        let f = PolyGauss::power(1, 1);
        let a = ek_inverse_plain(&p, &f, &[0.8], &spec()).unwrap().value;
        let b = ek_inverse_generalized(&p, &f, &[0.8], &spec())
            .unwrap()
            .value;
        assert_eq!(a, b);
        let lam = EKParams::new(vec![0.4], vec![0.0], vec![0.3]).unwrap();
        assert!(ek_inverse_plain(&lam, &f, &[0.8], &spec()).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(EKParams::new(vec![0.0], vec![0.0], vec![0.0]).is_err());
        assert!(EKParams::new(vec![0.5], vec![-0.6], vec![0.0]).is_err());
        assert!(EKParams::new(vec![0.5], vec![0.0], vec![-1.0]).is_err());
        assert!(EKParams::new(vec![0.5, 0.5], vec![0.0], vec![0.0]).is_err());
        let p = EKParams::plain(vec![0.5], vec![0.0]).unwrap();
        assert!(ek_apply(&p, &PolyGauss::constant(1, 1.0), &[0.0], &spec()).is_err());
        let big = EKParams::plain(vec![1.5], vec![0.0]).unwrap();
        assert!(ek_inverse_plain(&big, &PolyGauss::constant(1, 1.0), &[1.0], &spec()).is_err());
    }

    #[test]
    fn round_trip_plain() {
        let p = EKParams::plain(vec![0.75], vec![-0.5]).unwrap();
        let f: FieldRef = Arc::new(PolyGauss::gaussian(1, 1.0, 1.0).unwrap());
        let t = EkTransform::new(p.clone(), f, spec()).unwrap();
        let v = ek_inverse_plain(&p, &t, &[0.7], &spec()).unwrap();
        assert_relative_eq!(v.value, (-0.49_f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn round_trip_generalized() {
        let p = EKParams::new(vec![0.6], vec![-0.5], vec![0.5]).unwrap();
        let f: FieldRef = Arc::new(PolyGauss::gaussian(1, 1.0, 1.0).unwrap());
        let t = EkTransform::new(p.clone(), f, spec()).unwrap();
        let v = ek_inverse_generalized(&p, &t, &[1.0], &spec()).unwrap();
        assert_relative_eq!(v.value, (-1.0_f64).exp(), max_relative = 1e-8);
    }

    #[test]
    fn first_intertwining_identity() {
        let p = EKParams::new(vec![0.6], vec![-0.5], vec![0.3]).unwrap();
        let f: FieldRef = Arc::new(PolyGauss::gaussian(1, 1.0, 1.0).unwrap());
        let r = intertwine_residual(&p, &f, 0, 1, &[1.0], &spec()).unwrap();
        assert!(r.abs() < 1e-8, "{r}");
        let zero: FieldRef = Arc::new(PolyGauss::zero(1));
        assert_eq!(
            intertwine_residual(&p, &zero, 0, 1, &[1.0], &spec()).unwrap(),
            0.0
        );
    }

    #[test]
    fn lambda_continuity() {
        let f = PolyGauss::gaussian(1, 1.0, 1.0).unwrap();
        let a = ek_apply(
            &EKParams::plain(vec![0.6], vec![0.0]).unwrap(),
            &f,
            &[1.3],
            &spec(),
        )
        .unwrap();
        let b = ek_apply(
            &EKParams::new(vec![0.6], vec![0.0], vec![1e-6]).unwrap(),
            &f,
            &[1.3],
            &spec(),
        )
        .unwrap();
        assert!((a - b).abs() <= 1e-8);
    }
}
