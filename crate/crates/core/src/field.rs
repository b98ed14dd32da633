//! Scalar fields on R^n_+ with optional analytic derivatives.
//!
//! [`PolyGauss`] is the shipped closed-form family: finite sums of
//! monomials times axis-wise Gaussians. It is closed under partial
//! derivatives and under the Bessel operator applied to even powers, so Δ_B
//! powers of catalog data stay exact.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::binomial;

/// A real function of n variables.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    /// Mixed partial derivative with `orders[k]` derivatives along axis k.
    /// `None` means no analytic derivative is available for these orders.
    fn partial(&self, x: &[f64], orders: &[usize]) -> Option<Result<f64>>;

    /// Highest per-axis order served by `partial`.
    fn derivative_order(&self) -> usize;

    /// Declared even in every axis.
    fn is_even(&self) -> bool;

    fn closed_form(&self) -> Option<&PolyGauss> {
        None
    }
}

pub type FieldRef = Arc<dyn ScalarField>;

impl fmt::Debug for dyn ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.closed_form() {
            Some(pg) => write!(f, "{pg:?}"),
            None => write!(
                f,
                "ScalarField(dim={}, even={})",
                self.dim(),
                self.is_even()
            ),
        }
    }
}

/// Monomial coefficient · ∏ x_k^{powers[k]}.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// e^{−Σ a_k x_k²} times a polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussBlock {
    pub decay: Vec<f64>,
    pub terms: Vec<Monomial>,
}

/// Finite sum of [`GaussBlock`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyGauss {
    dim: usize,
    blocks: Vec<GaussBlock>,
}

impl PolyGauss {
    pub fn zero(dim: usize) -> Self {
        PolyGauss {
            dim,
            blocks: Vec::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::monomial(dim, c, &vec![0; dim])
    }

    pub fn monomial(dim: usize, coef: f64, powers: &[u32]) -> Self {
        assert_eq!(
            powers.len(),
            dim,
            "monomial powers must match the dimension"
        );
        PolyGauss {
            dim,
            blocks: vec![GaussBlock {
                decay: vec![0.0; dim],
                terms: vec![Monomial {
                    coef,
                    powers: powers.to_vec(),
                }],
            }],
        }
        .normalized()
    }

    /// amp · e^{−a|x|²}.
    pub fn gaussian(dim: usize, amp: f64, a: f64) -> Result<Self> {
        Self::gauss_power(dim, amp, 0, a)
    }

    /// |x|^{2q} = (Σ x_k²)^q.
    pub fn power(dim: usize, q: u32) -> Self {
        let mut out = Self::constant(dim, 1.0);
        let mut r2 = Self::zero(dim);
        for k in 0..dim {
            let mut p = vec![0; dim];
            p[k] = 2;
            r2 = r2.add(&Self::monomial(dim, 1.0, &p));
        }
        for _ in 0..q {
            out = out.mul(&r2);
        }
        out
    }

    /// amp · |x|^{2q} e^{−a|x|²}.
    pub fn gauss_power(dim: usize, amp: f64, q: u32, a: f64) -> Result<Self> {
        check_decay(a)?;
        let mut out = Self::power(dim, q).scale(amp);
        for b in &mut out.blocks {
            b.decay = vec![a; dim];
        }
        Ok(out.normalized())
    }

    /// Multiplies every block by e^{−a_k x_k²}.
    pub fn with_decay(&self, decay: &[f64]) -> Result<Self> {
        if decay.len() != self.dim {
            return Err(Error::InvalidParams(
                "decay vector length must match the dimension".into(),
            ));
        }
        for &a in decay {
            check_decay(a)?;
        }
        let mut out = self.clone();
        for b in &mut out.blocks {
            for (d, &a) in b.decay.iter_mut().zip(decay) {
                *d += a;
            }
        }
        Ok(out.normalized())
    }

    /// Places a one-dimensional field on `axis` of an n-dimensional space.
    pub fn embed(&self, axis: usize, dim: usize) -> Self {
        assert_eq!(self.dim, 1, "only one-dimensional fields can be embedded");
        assert!(axis < dim);
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let mut decay = vec![0.0; dim];
                decay[axis] = b.decay[0];
                let terms = b
                    .terms
                    .iter()
                    .map(|t| {
                        let mut powers = vec![0; dim];
                        powers[axis] = t.powers[0];
                        Monomial {
                            coef: t.coef,
                            powers,
                        }
                    })
                    .collect();
                GaussBlock { decay, terms }
            })
            .collect();
        PolyGauss { dim, blocks }
    }

    /// ∏_k f_k(x_k) for one-dimensional factors.
    pub fn separable(factors: &[PolyGauss]) -> Self {
        let dim = factors.len();
        let mut out = Self::constant(dim, 1.0);
        for (k, f) in factors.iter().enumerate() {
            out = out.mul(&f.embed(k, dim));
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[GaussBlock] {
        &self.blocks
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn add(&self, other: &PolyGauss) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in field sum");
        let mut blocks = self.blocks.clone();
        blocks.extend(other.blocks.iter().cloned());
        PolyGauss {
            dim: self.dim,
            blocks,
        }
        .normalized()
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.blocks {
            for t in &mut b.terms {
                t.coef *= c;
            }
        }
        out.normalized()
    }

    pub fn mul(&self, other: &PolyGauss) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in field product");
        let mut blocks = Vec::new();
        for a in &self.blocks {
            for b in &other.blocks {
                let decay = a.decay.iter().zip(&b.decay).map(|(x, y)| x + y).collect();
                let mut terms = Vec::new();
                for s in &a.terms {
                    for t in &b.terms {
                        terms.push(Monomial {
                            coef: s.coef * t.coef,
                            powers: s.powers.iter().zip(&t.powers).map(|(p, q)| p + q).collect(),
                        });
                    }
                }
                blocks.push(GaussBlock { decay, terms });
            }
        }
        PolyGauss {
            dim: self.dim,
            blocks,
        }
        .normalized()
    }

    /// Symbolic ∂^order/∂x_axis^order.
    pub fn derivative(&self, axis: usize, order: usize) -> Self {
        let mut out = self.clone();
        for _ in 0..order {
            out = out.derivative_once(axis);
        }
        out
    }

    fn derivative_once(&self, axis: usize) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let a = b.decay[axis];
                let mut terms = Vec::with_capacity(b.terms.len() * 2);
                for t in &b.terms {
                    let p = t.powers[axis];
                    if p > 0 {
                        terms.push(shifted(t, axis, -1, p as f64));
                    }
                    if a != 0.0 {
                        terms.push(shifted(t, axis, 1, -2.0 * a));
                    }
                }
                GaussBlock {
                    decay: b.decay.clone(),
                    terms,
                }
            })
            .collect();
        PolyGauss {
            dim: self.dim,
            blocks,
        }
        .normalized()
    }

    /// Symbolic B_γ = ∂² + ((2γ+1)/x)∂ along `axis`. Requires even powers on
    /// that axis, which keeps the result free of negative powers.
    pub fn bessel(&self, axis: usize, gamma: f64) -> Result<Self> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let a = b.decay[axis];
            let mut terms = Vec::with_capacity(b.terms.len() * 3);
            for t in &b.terms {
                let p = t.powers[axis];
                if p % 2 == 1 {
                    return Err(Error::domain(
                        "bessel",
                        format!("odd power x^{p} on axis {axis}; the Bessel operator needs an even field"),
                    ));
                }
                let pf = p as f64;
                if p >= 2 {
                    terms.push(shifted(t, axis, -2, pf * (pf + 2.0 * gamma)));
                }
                if a != 0.0 {
                    terms.push(shifted(
                        t,
                        axis,
                        0,
                        -2.0 * a * (2.0 * pf + 2.0 * gamma + 2.0),
                    ));
                    terms.push(shifted(t, axis, 2, 4.0 * a * a));
                }
            }
            blocks.push(GaussBlock {
                decay: b.decay.clone(),
                terms,
            });
        }
        Ok(PolyGauss {
            dim: self.dim,
            blocks,
        }
        .normalized())
    }

    /// Σ_k B_{γ_k} along every axis.
    pub fn bessel_laplacian(&self, gammas: &[f64]) -> Result<Self> {
        assert_eq!(gammas.len(), self.dim);
        let mut out = Self::zero(self.dim);
        for (k, &g) in gammas.iter().enumerate() {
            out = out.add(&self.bessel(k, g)?);
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut sum = 0.0;
        for b in &self.blocks {
            let e: f64 = b.decay.iter().zip(x).map(|(a, xi)| a * xi * xi).sum();
            let mut poly = 0.0;
            for t in &b.terms {
                let mut v = t.coef;
                for (&p, &xi) in t.powers.iter().zip(x) {
                    v *= powu(xi, p);
                }
                poly += v;
            }
            sum += poly * (-e).exp();
        }
        sum
    }

    /// Mixed partial derivative evaluated directly through Hermite
    /// polynomials, without building the derivative symbolically.
    pub fn eval_partial(&self, x: &[f64], orders: &[usize]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(orders.len(), self.dim);
        if orders.iter().all(|&r| r == 0) {
            return self.eval(x);
        }
        let mut sum = 0.0;
        let mut herm: Vec<Vec<f64>> = Vec::with_capacity(self.dim);
        for b in &self.blocks {
            herm.clear();
            for k in 0..self.dim {
                herm.push(hermite_scaled(b.decay[k], x[k], orders[k]));
            }
            let e: f64 = b.decay.iter().zip(x).map(|(a, xi)| a * xi * xi).sum();
            let mut poly = 0.0;
            for t in &b.terms {
                let mut v = t.coef;
                for k in 0..self.dim {
                    v *= monomial_gauss_derivative(t.powers[k], x[k], orders[k], &herm[k]);
                    if v == 0.0 {
                        break;
                    }
                }
                poly += v;
            }
            sum += poly * (-e).exp();
        }
        sum
    }

    /// All powers even on every axis.
    pub fn has_even_powers(&self) -> bool {
        self.blocks
            .iter()
            .all(|b| b.terms.iter().all(|t| t.powers.iter().all(|p| p % 2 == 0)))
    }

    /// Merges equal decays and equal monomials, dropping zero coefficients.
    fn normalized(self) -> Self {
        let mut blocks: Vec<GaussBlock> = Vec::new();
        for b in self.blocks {
            let idx = match blocks.iter().position(|c| c.decay == b.decay) {
                Some(i) => i,
                None => {
                    blocks.push(GaussBlock {
                        decay: b.decay.clone(),
                        terms: Vec::new(),
                    });
                    blocks.len() - 1
                }
            };
            let terms = &mut blocks[idx].terms;
            for t in b.terms {
                match terms.iter_mut().find(|s| s.powers == t.powers) {
                    Some(s) => s.coef += t.coef,
                    None => terms.push(t),
                }
            }
        }
        for b in &mut blocks {
            b.terms.retain(|t| t.coef != 0.0);
            b.terms.sort_by(|a, b| a.powers.cmp(&b.powers));
        }
        blocks.retain(|b| !b.terms.is_empty());
        blocks.sort_by(|a, b| {
            a.decay
                .partial_cmp(&b.decay)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        PolyGauss {
            dim: self.dim,
            blocks,
        }
    }
}

impl ScalarField for PolyGauss {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_point(x, self.dim)?;
        Ok(self.eval(x))
    }

    fn partial(&self, x: &[f64], orders: &[usize]) -> Option<Result<f64>> {
        Some(check_point(x, self.dim).map(|_| self.eval_partial(x, orders)))
    }

    fn derivative_order(&self) -> usize {
        usize::MAX
    }

    fn is_even(&self) -> bool {
        self.has_even_powers()
    }

    fn closed_form(&self) -> Option<&PolyGauss> {
        Some(self)
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type PartialFn = dyn Fn(&[f64], &[usize]) -> f64 + Send + Sync;

/// Closure-backed field, for data outside the closed-form catalog.
#[derive(Clone)]
pub struct FnField {
    dim: usize,
    value: Arc<ValueFn>,
    partial: Option<(usize, Arc<PartialFn>)>,
    even: bool,
}

impl FnField {
    pub fn new(dim: usize, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FnField {
            dim,
            value: Arc::new(value),
            partial: None,
            even: false,
        }
    }

    pub fn even(mut self, even: bool) -> Self {
        self.even = even;
        self
    }

    /// Analytic partials up to `order` per axis.
    pub fn with_partials(
        mut self,
        order: usize,
        partial: impl Fn(&[f64], &[usize]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.partial = Some((order, Arc::new(partial)));
        self
    }
}

impl ScalarField for FnField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_point(x, self.dim)?;
        Ok((self.value)(x))
    }

    fn partial(&self, x: &[f64], orders: &[usize]) -> Option<Result<f64>> {
        if orders.iter().all(|&r| r == 0) {
            return Some(self.value(x));
        }
        let (max, f) = self.partial.as_ref()?;
        if orders.iter().any(|r| r > max) {
            return None;
        }
        Some(check_point(x, self.dim).map(|_| f(x, orders)))
    }

    fn derivative_order(&self) -> usize {
        self.partial.as_ref().map_or(0, |(o, _)| *o)
    }

    fn is_even(&self) -> bool {
        self.even
    }
}

/// Time dependence of one source term.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeProfile {
    Constant,
    /// Σ c_i t^i.
    Polynomial(Vec<f64>),
    /// e^{rate·t}.
    Exp(f64),
    /// cos(ω t).
    Cos(f64),
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * t + ci),
            TimeProfile::Exp(r) => (r * t).exp(),
            TimeProfile::Cos(w) => (w * t).cos(),
        }
    }
}

/// Right-hand side f(x,t) = Σ_i g_i(x) h_i(t).
#[derive(Debug, Clone, PartialEq)]
pub struct SourceField {
    dim: usize,
    terms: Vec<(PolyGauss, TimeProfile)>,
}

impl SourceField {
    pub fn new(dim: usize) -> Self {
        SourceField {
            dim,
            terms: Vec::new(),
        }
    }

    pub fn term(mut self, spatial: PolyGauss, time: TimeProfile) -> Self {
        assert_eq!(spatial.dim(), self.dim, "source term dimension mismatch");
        self.terms.push((spatial, time));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(PolyGauss, TimeProfile)] {
        &self.terms
    }

    pub fn is_even(&self) -> bool {
        self.terms.iter().all(|(g, _)| g.has_even_powers())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(g, _)| g.is_zero())
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        self.terms.iter().map(|(g, h)| g.eval(x) * h.eval(t)).sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        SourceField {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(g, h)| (g.scale(c), h.clone()))
                .collect(),
        }
    }

    pub fn add(&self, other: &SourceField) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        SourceField {
            dim: self.dim,
            terms,
        }
    }
}

fn check_decay(a: f64) -> Result<()> {
    if a.is_finite() && a >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "Gaussian decay rate must be non-negative, got {a}"
        )))
    }
}

fn check_point(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::InvalidParams(format!(
            "point has {} coordinates, field has dimension {dim}",
            x.len()
        )));
    }
    if let Some(&bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite { at: bad });
    }
    Ok(())
}

fn shifted(t: &Monomial, axis: usize, delta: i32, factor: f64) -> Monomial {
    let mut powers = t.powers.clone();
    powers[axis] = (powers[axis] as i32 + delta) as u32;
    Monomial {
        coef: t.coef * factor,
        powers,
    }
}

fn powu(x: f64, p: u32) -> f64 {
    match p {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(p as i32),
    }
}

/// (−1)^j a^{j/2} H_j(√a x) for j = 0..=r, i.e. the j-th derivative of
/// e^{−ax²} divided by e^{−ax²}.
fn hermite_scaled(a: f64, x: f64, r: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(r + 1);
    out.push(1.0);
    if r == 0 {
        return out;
    }
    if a == 0.0 {
        out.resize(r + 1, 0.0);
        return out;
    }
    // g_{j+1} = −2a x g_j − 2a j g_{j−1}, from differentiating g_j e^{−ax²}.
    out.push(-2.0 * a * x);
    for j in 1..r {
        let next = -2.0 * a * x * out[j] - 2.0 * a * j as f64 * out[j - 1];
        out.push(next);
    }
    out
}

/// d^r/dx^r [x^p e^{−ax²}] / e^{−ax²} by Leibniz, given `g` from [`hermite_scaled`].
fn monomial_gauss_derivative(p: u32, x: f64, r: usize, g: &[f64]) -> f64 {
    if r == 0 {
        return powu(x, p);
    }
    let mut sum = 0.0;
    let mut falling = 1.0;
    for i in 0..=r.min(p as usize) {
        if i > 0 {
            falling *= (p as usize - i + 1) as f64;
        }
        let gj = g[r - i];
        if gj != 0.0 {
            sum += binomial(r, i) * falling * powu(x, p - i as u32) * gj;
        }
    }
    sum
}
