//! Quadrature on finite intervals with declared algebraic endpoint
//! singularities, and on the half-line for Gaussian-dominated integrands.
//!
//! The finite rule first removes the declared singularity with the
//! substitution v = (x−a)^{p+1}/(p+1) (and its mirror at b), then applies a
//! tanh-sinh rule whose step is halved until two successive levels agree.
//! The convergence test is relative to ∫|f|, so integrands that vanish or
//! cancel do not demand an impossible absolute accuracy.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU_MAX: f64 = 3.5;
const MIN_LEVEL: u32 = 3;
/// Bounded width of a Gaussian tail window, as multiples of √t.
const TAIL_SPREAD: f64 = 1.2;
const TAIL_MARGIN: f64 = 10.0;

/// Which family of integrals a spec is meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// Finite interval with declared endpoint exponents.
    FiniteEndpoint,
    /// Half-line with a Gaussian envelope around a known center.
    GaussianTail,
}

/// Tolerance and refinement limits for one quadrature call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub rule: RuleKind,
    pub rel_tol: f64,
    pub max_level: u32,
    /// Run every tanh-sinh rule at exactly this level, without a convergence
    /// test. The result is then a smooth function of the integrand's
    /// parameters, which finite differences of it rely on.
    #[serde(default)]
    pub fixed_level: Option<u32>,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            rule: RuleKind::FiniteEndpoint,
            rel_tol: 1e-9,
            max_level: 10,
            fixed_level: None,
        }
    }
}

impl QuadSpec {
    pub fn new(rule: RuleKind, rel_tol: f64, max_level: u32) -> Result<Self> {
        let spec = QuadSpec {
            rule,
            rel_tol,
            max_level,
            fixed_level: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::InvalidParams(format!(
                "quadrature tolerance must be positive, got {}",
                self.rel_tol
            )));
        }
        if self.max_level < 1 {
            return Err(Error::InvalidParams(
                "quadrature max level must be at least 1".into(),
            ));
        }
        if self.fixed_level == Some(0) {
            return Err(Error::InvalidParams(
                "fixed quadrature level must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Same limits with a different tolerance.
    pub fn with_tol(self, rel_tol: f64) -> Self {
        QuadSpec { rel_tol, ..self }
    }

    pub fn with_rule(self, rule: RuleKind) -> Self {
        QuadSpec { rule, ..self }
    }

    pub fn with_fixed_level(self, level: Option<u32>) -> Self {
        QuadSpec {
            fixed_level: level,
            ..self
        }
    }
}

/// Value of an integral together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: u64,
    pub level: u32,
}

impl QuadResult {
    fn zero() -> Self {
        QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
            level: 0,
        }
    }

    fn merge(self, other: QuadResult) -> Self {
        QuadResult {
            value: self.value + other.value,
            error_estimate: self.error_estimate + other.error_estimate,
            evaluations: self.evaluations + other.evaluations,
            level: self.level.max(other.level),
        }
    }
}

/// ∫_a^b (x−a)^p (b−x)^q f(x) dx with `exponents = (p, q)`, p, q > −1.
///
/// `f` must be smooth on [a, b] apart from the declared factors.
pub fn integrate_finite<F>(
    mut f: F,
    a: f64,
    b: f64,
    exponents: (f64, f64),
    spec: &QuadSpec,
) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::domain(
            "integrate_finite",
            format!("need finite a < b, got [{a}, {b}]"),
        ));
    }
    let (p, q) = exponents;
    for e in [p, q] {
        if !(e.is_finite() && e > -1.0) {
            return Err(Error::domain(
                "integrate_finite",
                format!("endpoint exponent must exceed -1, got {e}"),
            ));
        }
    }
    match (p != 0.0, q != 0.0) {
        (false, false) => tanh_sinh(&mut f, a, b, spec),
        (true, false) => left_singular(&mut f, a, b, p, spec),
        (false, true) => right_singular(&mut f, a, b, q, spec),
        (true, true) => {
            let m = 0.5 * (a + b);
            let left = left_singular(&mut |x: f64| Ok((b - x).powf(q) * f(x)?), a, m, p, spec)?;
            let right = right_singular(&mut |x: f64| Ok((x - a).powf(p) * f(x)?), m, b, q, spec)?;
            Ok(left.merge(right))
        }
    }
}

/// ∫_0^∞ f(s) ds for f bounded by a polynomial times e^{−(s−center)²/4t}.
pub fn integrate_gaussian_tail<F>(f: F, t: f64, center: f64, spec: &QuadSpec) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    integrate_gaussian_tail_weighted(f, t, center, 0.0, spec)
}

/// ∫_0^∞ s^p f(s) ds with the origin factor s^p (p > −1) handled exactly.
pub fn integrate_gaussian_tail_weighted<F>(
    mut f: F,
    t: f64,
    center: f64,
    origin_exponent: f64,
    spec: &QuadSpec,
) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    integrate_gaussian_tail_offset(|s, _| f(s), t, center, origin_exponent, spec)
}

/// ∫_0^∞ s^p f(s, s − center) ds.
///
/// The quadrature runs in the offset y = s − center, which `f` receives
/// exactly; a kernel e^{−y²/4t} then keeps full relative precision even when
/// √t is far below the rounding error of `center`.
pub fn integrate_gaussian_tail_offset<F>(
    mut f: F,
    t: f64,
    center: f64,
    origin_exponent: f64,
    spec: &QuadSpec,
) -> Result<QuadResult>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    spec.validate()?;
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::domain(
            "integrate_gaussian_tail",
            format!("t must be positive, got {t}"),
        ));
    }
    if !(center.is_finite() && center >= 0.0) {
        return Err(Error::domain(
            "integrate_gaussian_tail",
            format!("center must be non-negative, got {center}"),
        ));
    }
    let p = origin_exponent;
    if !(p.is_finite() && p > -1.0) {
        return Err(Error::domain(
            "integrate_gaussian_tail",
            format!("origin exponent must exceed -1, got {p}"),
        ));
    }
    let (lo, hi) = tail_window(t, center, spec.rel_tol);
    let finite = spec.with_rule(RuleKind::FiniteEndpoint);
    let mut g = |y: f64, weighted: bool| -> Result<f64> {
        let s = (center + y).max(0.0);
        let v = f(s, y)?;
        Ok(if weighted && p != 0.0 {
            s.powf(p) * v
        } else {
            v
        })
    };
    let mut total = QuadResult::zero();
    if lo < center {
        let r = if lo == 0.0 && p != 0.0 {
            // The origin factor is integrated by substitution, not sampled.
            integrate_finite(|y| g(y, false), -center, 0.0, (p, 0.0), &finite)?
        } else {
            integrate_finite(|y| g(y, true), lo - center, 0.0, (0.0, 0.0), &finite)?
        };
        total = total.merge(r);
        total = total.merge(integrate_finite(
            |y| g(y, true),
            0.0,
            hi - center,
            (0.0, 0.0),
            &finite,
        )?);
    } else {
        // center = 0: the offset is s itself.
        total = integrate_finite(|y| g(y, false), 0.0, hi, (p, 0.0), &finite)?;
    }
    Ok(total)
}

/// Truncation window [lo, hi] around `center` for tolerance `eps`.
pub fn tail_window(t: f64, center: f64, eps: f64) -> (f64, f64) {
    let eps = eps.clamp(1e-300, 0.5);
    let radius = TAIL_SPREAD * (4.0 * t * (1.0 / eps).ln()).sqrt() + TAIL_MARGIN * t.sqrt();
    ((center - radius).max(0.0), center + radius)
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// ∫_a^c (x−a)^p g(x) dx via v = (x−a)^{p+1}/(p+1).
fn left_singular<F>(g: &mut F, a: f64, c: f64, p: f64, spec: &QuadSpec) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let e = p + 1.0;
    let upper = (c - a).powf(e) / e;
    tanh_sinh(
        &mut |v: f64| g((a + (e * v).powf(1.0 / e)).min(c)),
        0.0,
        upper,
        spec,
    )
}

/// ∫_c^b (b−x)^q g(x) dx via w = (b−x)^{q+1}/(q+1).
fn right_singular<F>(g: &mut F, c: f64, b: f64, q: f64, spec: &QuadSpec) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let e = q + 1.0;
    let upper = (b - c).powf(e) / e;
    tanh_sinh(
        &mut |w: f64| g((b - (e * w).powf(1.0 / e)).max(c)),
        0.0,
        upper,
        spec,
    )
}

fn tanh_sinh<F>(f: &mut F, lo: f64, hi: f64, spec: &QuadSpec) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let half = 0.5 * (hi - lo);
    if half <= 0.0 {
        return Ok(QuadResult::zero());
    }
    let mut evaluations = 0_u64;
    let mut node = |tau: f64, f: &mut F| -> Result<(f64, f64)> {
        let u = FRAC_PI_2 * tau.sinh();
        let cu = u.cosh();
        let w = FRAC_PI_2 * tau.cosh() / (cu * cu);
        if w < 1e-300 {
            return Ok((0.0, 0.0));
        }
        // Distance to the nearer endpoint, without forming 1 − tanh(u).
        let d = half * (-u.abs()).exp() / cu;
        let x = if tau >= 0.0 { hi - d } else { lo + d };
        if x <= lo || x >= hi {
            return Ok((0.0, 0.0));
        }
        evaluations += 1;
        let v = f(x)?;
        if !v.is_finite() {
            return Err(Error::NonFinite { at: x });
        }
        Ok((w * v, w * v.abs()))
    };

    let mut h = 1.0_f64;
    let (mut sum, mut abs_sum) = node(0.0, f)?;
    let mut j = 1;
    while j as f64 * h <= TAU_MAX {
        for tau in [j as f64 * h, -(j as f64) * h] {
            let (v, a) = node(tau, f)?;
            sum += v;
            abs_sum += a;
        }
        j += 1;
    }
    let mut estimate = half * h * sum;
    let mut last_err = f64::INFINITY;
    let last_level = spec.fixed_level.unwrap_or(spec.max_level);
    for level in 1..=last_level {
        h *= 0.5;
        let mut j = 1;
        while j as f64 * h <= TAU_MAX {
            for tau in [j as f64 * h, -(j as f64) * h] {
                let (v, a) = node(tau, f)?;
                sum += v;
                abs_sum += a;
            }
            j += 2;
        }
        let next = half * h * sum;
        let scale = half * h * abs_sum;
        last_err = (next - estimate).abs();
        estimate = next;
        let done = match spec.fixed_level {
            Some(fixed) => level == fixed,
            None => level >= MIN_LEVEL.min(spec.max_level) && last_err <= spec.rel_tol * scale,
        };
        if done {
            return Ok(QuadResult {
                value: estimate,
                error_estimate: last_err,
                evaluations,
                level,
            });
        }
    }
    Err(Error::NonConvergence {
        level: spec.max_level,
        estimate: last_err,
        target: spec.rel_tol * half * h * abs_sum,
    })
}
