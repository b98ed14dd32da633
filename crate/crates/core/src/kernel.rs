//! Heat kernels: the reflected Gaussian on the half-line and the
//! singular-axis kernel of B_γ, plus checks of the identities they satisfy.
//!
//! The per-axis weight
//!
//! w(x,s,t) = x^{−γ} s^{γ+1} e^{−(x²+s²)/4t} I_γ(xs/2t) / (2t)
//!
//! is evaluated as s^{2γ+1}(4t)^{−γ}/(2tΓ(γ+1)) · e^{−(x−s)²/4t} · e^{−z}Ī_γ(z)
//! with z = xs/2t. Both trailing factors are bounded, the form is finite at
//! x = 0, and ∫_0^∞ w ds = 1.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::numerics::{
    bessel_clifford_i_scaled, bessel_i_scaled, bessel_j, gamma_fn, gauss_legendre,
    integrate_finite, integrate_gaussian_tail_weighted, QuadSpec,
};

/// Reflected heat kernel (e^{−(s−x)²/4t} + e^{−(s+x)²/4t}) / (2√(πt)).
pub fn g0(x: f64, s: f64, t: f64) -> Result<f64> {
    check_time("g0", t)?;
    let c = 1.0 / (2.0 * (PI * t).sqrt());
    Ok(c * ((-(s - x).powi(2) / (4.0 * t)).exp() + (-(s + x).powi(2) / (4.0 * t)).exp()))
}

/// Singular heat-kernel weight for B_γ, |γ| < 1/2.
pub fn weight(gamma: f64, x: f64, s: f64, t: f64) -> Result<f64> {
    check_weight_args(gamma, x, s, t)?;
    Ok(s.powf(2.0 * gamma + 1.0) * reduced(gamma, x, s, t)?)
}

/// weight / s^{2γ+1}, finite at s = 0.
pub fn reduced_weight(gamma: f64, x: f64, s: f64, t: f64) -> Result<f64> {
    check_weight_args(gamma, x, s, t)?;
    reduced(gamma, x, s, t)
}

/// Reduced weight with the offset y = s − x supplied exactly, so the
/// Gaussian factor keeps its relative precision when √t ≪ ulp(x).
pub fn reduced_weight_offset(gamma: f64, x: f64, s: f64, y: f64, t: f64) -> Result<f64> {
    check_weight_args(gamma, x, s, t)?;
    reduced_at(gamma, x, s, y, t)
}

fn reduced(gamma: f64, x: f64, s: f64, t: f64) -> Result<f64> {
    reduced_at(gamma, x, s, s - x, t)
}

fn reduced_at(gamma: f64, x: f64, s: f64, y: f64, t: f64) -> Result<f64> {
    let z = x * s / (2.0 * t);
    let pre = (4.0 * t).powf(-gamma) / (2.0 * t * gamma_fn(gamma + 1.0)?);
    Ok(pre * (-y * y / (4.0 * t)).exp() * bessel_clifford_i_scaled(gamma, z)?)
}

fn check_time(op: &'static str, t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(op, format!("t must be positive, got {t}")))
    }
}

fn check_weight_args(gamma: f64, x: f64, s: f64, t: f64) -> Result<()> {
    check_time("weight", t)?;
    if !(gamma.is_finite() && gamma.abs() < 0.5) {
        return Err(Error::domain(
            "weight",
            format!("gamma must lie in (-1/2, 1/2), got {gamma}"),
        ));
    }
    if !(x.is_finite() && x >= 0.0 && s.is_finite() && s >= 0.0) {
        return Err(Error::domain(
            "weight",
            format!("x and s must be non-negative, got x={x}, s={s}"),
        ));
    }
    Ok(())
}

/// Product kernel ∏_j w(γ_j, x_j, s_j, t).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeight {
    gamma: Vec<f64>,
}

impl KernelWeight {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if let Some(g) = gamma.iter().find(|g| !(g.is_finite() && g.abs() < 0.5)) {
            return Err(Error::InvalidParams(format!(
                "gamma must lie in (-1/2, 1/2), got {g}"
            )));
        }
        Ok(KernelWeight { gamma })
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn axis(&self, j: usize, x: f64, s: f64, t: f64) -> Result<f64> {
        weight(self.gamma[j], x, s, t)
    }

    /// Per-axis weight without the s^{2γ+1} factor.
    pub fn axis_reduced(&self, j: usize, x: f64, s: f64, t: f64) -> Result<f64> {
        reduced_weight(self.gamma[j], x, s, t)
    }

    /// [`KernelWeight::axis_reduced`] with the offset s − x given exactly.
    pub fn axis_reduced_offset(&self, j: usize, x: f64, s: f64, y: f64, t: f64) -> Result<f64> {
        reduced_weight_offset(self.gamma[j], x, s, y, t)
    }

    /// 2γ_j + 1, the power of s that the reduced weight leaves out.
    pub fn origin_exponent(&self, j: usize) -> f64 {
        2.0 * self.gamma[j] + 1.0
    }

    pub fn product(&self, x: &[f64], s: &[f64], t: f64) -> Result<f64> {
        let mut w = 1.0;
        for j in 0..self.dim() {
            w *= self.axis(j, x[j], s[j], t)?;
        }
        Ok(w)
    }

    /// ∫_0^∞ w(γ_j, x, s, t) ds.
    pub fn mass(&self, j: usize, x: f64, t: f64, spec: &QuadSpec) -> Result<f64> {
        let r = integrate_gaussian_tail_weighted(
            |s| self.axis_reduced(j, x, s, t),
            t,
            x,
            self.origin_exponent(j),
            spec,
        )?;
        Ok(r.value)
    }
}

/// Numerical ∫_0^∞ e^{−tλ²} J_ν(sλ) J_ν(xλ) λ dλ minus its closed form
/// (1/2t) e^{−(x²+s²)/4t} I_ν(xs/2t).
pub fn weber_sonine_residual(nu: f64, x: f64, s: f64, t: f64, spec: &QuadSpec) -> Result<f64> {
    check_time("weber_sonine_residual", t)?;
    if !(x > 0.0 && s > 0.0 && x.is_finite() && s.is_finite()) {
        return Err(Error::domain(
            "weber_sonine_residual",
            "x and s must be positive",
        ));
    }
    if !(nu.is_finite() && nu > -0.5) {
        return Err(Error::domain(
            "weber_sonine_residual",
            format!("order must exceed -1/2, got {nu}"),
        ));
    }
    let lhs = weber_sonine_integral(nu, x, s, t, spec)?;
    let z = x * s / (2.0 * t);
    let rhs = (-(x - s).powi(2) / (4.0 * t)).exp() * bessel_i_scaled(nu, z)? / (2.0 * t);
    Ok(lhs - rhs)
}

/// Truncation parameter of the oscillatory integral.
const WEBER_SONINE_EPS: f64 = 1e-14;
const GL_POINTS: usize = 16;

fn weber_sonine_integral(nu: f64, x: f64, s: f64, t: f64, spec: &QuadSpec) -> Result<f64> {
    let lambda_max = ((1.0 / WEBER_SONINE_EPS).ln() / t).sqrt() + 1.0 / t.sqrt();
    // Ten panels per oscillation period of the faster Bessel factor, and
    // never wider than half the Gaussian scale.
    let period = 2.0 * PI / x.max(s);
    let width = (0.1 * period).min(0.5 / t.sqrt());
    let panels = (lambda_max / width).ceil() as usize;
    let width = lambda_max / panels as f64;
    let (nodes, weights) = gauss_legendre(GL_POINTS);
    let integrand = |l: f64| -> Result<f64> {
        Ok((-t * l * l).exp() * bessel_j(nu, s * l)? * bessel_j(nu, x * l)? * l)
    };
    let mut sum = 0.0;
    for p in 0..panels {
        let a = p as f64 * width;
        let mid = a + 0.5 * width;
        let mut panel = 0.0;
        if p == 0 && nu.fract() != 0.0 {
            // λ^{2ν+1} behaviour at the origin: use the endpoint-aware rule.
            panel = integrate_finite(integrand, a, a + width, (0.0, 0.0), spec)?.value;
        } else {
            for (xi, wi) in nodes.iter().zip(&weights) {
                panel += wi * integrand(mid + 0.5 * width * xi)?;
            }
            panel *= 0.5 * width;
        }
        sum += panel;
    }
    Ok(sum)
}

/// Heat average ∫_{R^n} ∏ K_t(y_k − x_k) g(y) dy, nested axis by axis.
///
/// Each axis uses the trapezoidal rule in ξ = (y − x)/2√t on |ξ| ≤ Ξ, where
/// the weight is e^{−ξ²}/√π; the step is halved until two successive sums
/// agree to `rel_tol · max(|value|, floor)`, which for analytic g happens
/// after a few halvings. The absolute floor keeps far-tail averages, whose
/// size is negligible in the caller, from chasing relative accuracy.
fn heat_average(
    g: &dyn Fn(&[f64]) -> Result<f64>,
    x: &[f64],
    t: f64,
    spec: &QuadSpec,
    floor: f64,
) -> Result<f64> {
    fn rec(
        k: usize,
        g: &dyn Fn(&[f64]) -> Result<f64>,
        y: &mut Vec<f64>,
        x: &[f64],
        t: f64,
        spec: &QuadSpec,
        floor: f64,
    ) -> Result<f64> {
        if k == x.len() {
            return g(y);
        }
        let scale = 2.0 * t.sqrt();
        let half_width = (1.0 / (0.01 * spec.rel_tol)).ln().sqrt() + 1.0;
        let mut node = |xi: f64| -> Result<f64> {
            let saved = y[k];
            y[k] = x[k] + scale * xi;
            let v = (-xi * xi).exp() * rec(k + 1, g, y, x, t, spec, floor)?;
            y[k] = saved;
            Ok(v)
        };
        let mut h = 0.5;
        let steps = (half_width / h).ceil() as i64;
        // Σ over the lattice hZ ∩ [−steps/2, steps/2]; refinement only adds midpoints.
        let mut sum = 0.0;
        for i in -steps..=steps {
            sum += node(i as f64 * h)?;
        }
        let mut prev = h * sum;
        for level in 1..=spec.max_level {
            let n = steps << (level - 1);
            for i in -n..n {
                sum += node((i as f64 + 0.5) * h)?;
            }
            h *= 0.5;
            let cur = h * sum;
            let estimate = (cur - prev).abs();
            let target = spec.rel_tol * (cur.abs() / PI.sqrt()).max(floor) * PI.sqrt();
            if estimate <= target {
                return Ok(cur / PI.sqrt());
            }
            if level == spec.max_level {
                return Err(Error::NonConvergence {
                    level,
                    estimate,
                    target,
                });
            }
            prev = cur;
        }
        unreachable!("max_level is at least 1")
    }
    let mut y = x.to_vec();
    rec(0, g, &mut y, x, t, spec, floor)
}

/// Which form of the semigroup identity to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemigroupForm {
    /// Chapman–Kolmogorov at a single split τ: P_{t−τ} P_τ g − P_t g.
    Pointwise,
    /// ∫_0^t P_{t−τ} P_τ g dτ − t P_t g.
    Integrated,
}

/// Residual of the heat semigroup identity on R^n (n ≤ 2) for field `g`.
pub fn semigroup_residual(
    g: &dyn ScalarField,
    x: &[f64],
    t: f64,
    tau: f64,
    form: SemigroupForm,
    spec: &QuadSpec,
) -> Result<f64> {
    check_time("semigroup_residual", t)?;
    let n = g.dim();
    if n == 0 || n > 2 || x.len() != n {
        return Err(Error::InvalidParams(format!(
            "semigroup check supports n <= 2, got n = {n}"
        )));
    }
    if form == SemigroupForm::Pointwise && !(tau > 0.0 && tau < t) {
        return Err(Error::domain(
            "semigroup_residual",
            format!("tau must lie in (0, t), got {tau}"),
        ));
    }
    let eval = |y: &[f64]| g.value(y);
    let direct = heat_average(&eval, x, t, spec, 0.0)?;
    let floor = direct.abs();
    let iterated = |tau: f64| -> Result<f64> {
        let inner = |y: &[f64]| heat_average(&eval, y, tau, spec, floor);
        heat_average(&inner, x, t - tau, spec, floor)
    };
    match form {
        SemigroupForm::Pointwise => Ok(iterated(tau)? - direct),
        SemigroupForm::Integrated => {
            Ok(integrate_finite(iterated, 0.0, t, (0.0, 0.0), spec)?.value - t * direct)
        }
    }
}
