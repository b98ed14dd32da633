//! Bessel functions of real order ν > −1 and real argument z ≥ 0.
//!
//! * `bessel_i_scaled`: e^{−z} I_ν(z), power series up to z = 30 and the
//!   Hankel asymptotic expansion beyond. At the crossover the asymptotic
//!   series has terms below 1e−25, so both branches are at working precision.
//! * `bessel_j`: power series for z ≤ 12, Miller backward recurrence with
//!   the Neumann normalisation for 12 < z < 35, Hankel asymptotics beyond.
//! * Bessel–Clifford functions Ī_ν(z) = Γ(ν+1)(z/2)^{−ν} I_ν(z) and
//!   J̄_ν(z) = Γ(ν+1)(z/2)^{−ν} J_ν(z), evaluated from their series in z²/4
//!   near the origin so that no 0^{−ν} appears.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const I_SERIES_LIMIT: f64 = 30.0;
const J_SERIES_LIMIT: f64 = 12.0;
const J_ASYMPTOTIC_LIMIT: f64 = 35.0;
const MAX_TERMS: usize = 1000;

/// Which Bessel–Clifford family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CliffordKind {
    /// J̄_ν, from the Bessel function of the first kind.
    J,
    /// Ī_ν, from the modified Bessel function.
    I,
}

impl CliffordKind {
    fn sign(self) -> f64 {
        match self {
            CliffordKind::J => -1.0,
            CliffordKind::I => 1.0,
        }
    }
}

/// e^{−z} I_ν(z).
pub fn bessel_i_scaled(nu: f64, z: f64) -> Result<f64> {
    check("bessel_i_scaled", nu, z)?;
    if z == 0.0 {
        return Ok(value_at_origin(nu));
    }
    Ok(if z <= I_SERIES_LIMIT {
        i_scaled_series(nu, z)
    } else {
        i_scaled_asymptotic(nu, z)
    })
}

/// J_ν(z).
pub fn bessel_j(nu: f64, z: f64) -> Result<f64> {
    check("bessel_j", nu, z)?;
    if z == 0.0 {
        return Ok(value_at_origin(nu));
    }
    Ok(if z <= J_SERIES_LIMIT {
        (nu * (0.5 * z).ln() - lgamma(nu + 1.0)).exp() * clifford_series(nu, z, -1.0)
    } else if z < J_ASYMPTOTIC_LIMIT {
        j_miller(nu, z)
    } else {
        j_asymptotic(nu, z)
    })
}

/// Ī_ν(z) = Γ(ν+1)(z/2)^{−ν} I_ν(z); equals 1 at z = 0.
pub fn bessel_clifford_i(nu: f64, z: f64) -> Result<f64> {
    check("bessel_clifford_i", nu, z)?;
    Ok(if z <= I_SERIES_LIMIT {
        clifford_series(nu, z, 1.0)
    } else {
        (lgamma(nu + 1.0) - nu * (0.5 * z).ln() + z + i_scaled_asymptotic(nu, z).ln()).exp()
    })
}

/// e^{−z} Ī_ν(z), finite for every z ≥ 0.
pub fn bessel_clifford_i_scaled(nu: f64, z: f64) -> Result<f64> {
    check("bessel_clifford_i_scaled", nu, z)?;
    Ok(if z <= I_SERIES_LIMIT {
        (-z).exp() * clifford_series(nu, z, 1.0)
    } else {
        (lgamma(nu + 1.0) - nu * (0.5 * z).ln()).exp() * i_scaled_asymptotic(nu, z)
    })
}

/// J̄_ν(z) = Γ(ν+1)(z/2)^{−ν} J_ν(z); equals 1 at z = 0.
pub fn bessel_clifford_j(nu: f64, z: f64) -> Result<f64> {
    check("bessel_clifford_j", nu, z)?;
    Ok(if z <= J_SERIES_LIMIT {
        clifford_series(nu, z, -1.0)
    } else {
        (lgamma(nu + 1.0) - nu * (0.5 * z).ln()).exp() * bessel_j(nu, z)?
    })
}

/// Bessel–Clifford function of either kind.
pub fn bessel_clifford(kind: CliffordKind, nu: f64, z: f64) -> Result<f64> {
    match kind {
        CliffordKind::J => bessel_clifford_j(nu, z),
        CliffordKind::I => bessel_clifford_i(nu, z),
    }
}

/// d^order/dz^order of a Bessel–Clifford function.
///
/// Uses d/dz K̄_μ(z) = σ z / (2(μ+1)) K̄_{μ+1}(z) (σ = −1 for J̄, +1 for Ī),
/// so every derivative is a finite combination Σ c z^a K̄_{ν+j}(z).
pub fn bessel_clifford_derivative(
    kind: CliffordKind,
    nu: f64,
    z: f64,
    order: usize,
) -> Result<f64> {
    check("bessel_clifford_derivative", nu, z)?;
    if order == 0 {
        return bessel_clifford(kind, nu, z);
    }
    let sigma = kind.sign();
    // (coefficient, power of z, order shift)
    let mut terms: Vec<(f64, i32, usize)> = vec![(1.0, 0, 0)];
    for _ in 0..order {
        let mut next: Vec<(f64, i32, usize)> = Vec::with_capacity(terms.len() * 2);
        let mut push = |c: f64, a: i32, j: usize| {
            if c == 0.0 {
                return;
            }
            match next.iter_mut().find(|t| t.1 == a && t.2 == j) {
                Some(t) => t.0 += c,
                None => next.push((c, a, j)),
            }
        };
        for &(c, a, j) in &terms {
            push(c * a as f64, a - 1, j);
            push(c * sigma / (2.0 * (nu + j as f64 + 1.0)), a + 1, j + 1);
        }
        terms = next;
    }
    let mut sum = 0.0;
    for (c, a, j) in terms {
        let zp = if a == 0 { 1.0 } else { z.powi(a) };
        if zp == 0.0 {
            continue;
        }
        sum += c * zp * bessel_clifford(kind, nu + j as f64, z)?;
    }
    Ok(sum)
}

fn check(op: &'static str, nu: f64, z: f64) -> Result<()> {
    if !(nu.is_finite() && nu > -1.0) {
        return Err(Error::domain(op, format!("order must exceed -1, got {nu}")));
    }
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::domain(
            op,
            format!("argument must be finite and non-negative, got {z}"),
        ));
    }
    Ok(())
}

fn value_at_origin(nu: f64) -> f64 {
    if nu == 0.0 {
        1.0
    } else if nu > 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn lgamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Σ_k (σ z²/4)^k / (k! (ν+1)_k).
fn clifford_series(nu: f64, z: f64, sigma: f64) -> f64 {
    let q = sigma * 0.25 * z * z;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut peak = 1.0_f64;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= q / (kf * (nu + kf));
        sum += term;
        peak = peak.max(term.abs());
        if term.abs() <= 0.5 * f64::EPSILON * sum.abs().max(1e-300) || term.abs() <= 1e-18 * peak {
            break;
        }
    }
    sum
}

fn i_scaled_series(nu: f64, z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = (nu * (0.5 * z).ln() - z - lgamma(nu + 1.0)).exp();
    let mut sum = term;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= q / (kf * (nu + kf));
        sum += term;
        if term <= 0.5 * f64::EPSILON * sum {
            break;
        }
    }
    sum
}

/// Hankel expansion of e^{−z} I_ν(z); the exponentially small companion
/// term is below e^{−2z} relative and dropped.
fn i_scaled_asymptotic(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = -term * (mu - odd * odd) / (8.0 * kf * z);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * z).sqrt()
}

/// Miller's backward recurrence normalised with
/// (z/2)^ν = Σ_k (ν+2k) Γ(ν+k)/k! J_{ν+2k}(z).
fn j_miller(nu: f64, z: f64) -> f64 {
    let mut n = (z + 20.0 + (40.0 * z).sqrt()).ceil() as usize;
    n += n % 2;
    // c_i = (ν+2i) Γ(ν+i)/i!, with the i = 0 entry equal to Γ(ν+1).
    let mut coef = Vec::with_capacity(n / 2 + 1);
    coef.push(lgamma(nu + 1.0).exp());
    let mut ratio = lgamma(nu + 1.0).exp(); // Γ(ν+1)/1!
    for i in 1..=n / 2 {
        if i > 1 {
            ratio *= (nu + i as f64 - 1.0) / i as f64;
        }
        coef.push((nu + 2.0 * i as f64) * ratio);
    }

    let mut above = 0.0_f64;
    let mut current = 1e-30_f64;
    let mut norm = coef[n / 2] * current;
    for k in (1..=n).rev() {
        let below = 2.0 * (nu + k as f64) / z * current - above;
        above = current;
        current = below;
        let idx = k - 1;
        if idx % 2 == 0 {
            norm += coef[idx / 2] * current;
        }
        if current.abs() > 1e250 {
            current *= 1e-250;
            above *= 1e-250;
            norm *= 1e-250;
        }
    }
    (nu * (0.5 * z).ln()).exp() * current / norm
}

fn j_asymptotic(nu: f64, z: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0_f64;
    let mut q = 0.0_f64;
    let mut term = 1.0_f64;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = term * (mu - odd * odd) / (8.0 * kf * z);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        // a_k contributes to P for even k and to Q for odd k, alternating within each.
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if term.abs() <= 1e-17 {
            break;
        }
    }
    let chi = z - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * z)).sqrt() * (p * chi.cos() - q * chi.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Compensated power series for I_ν, used as an extended-precision oracle.
    fn oracle_i(nu: f64, z: f64, terms: usize) -> f64 {
        let q = 0.25 * z * z;
        let mut term = (nu * (0.5 * z).ln() - statrs::function::gamma::ln_gamma(nu + 1.0)).exp();
        let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
        for k in 0..terms {
            if k > 0 {
                term *= q / (k as f64 * (nu + k as f64));
            }
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    #[test]
    fn i_scaled_small_values() {
        assert_eq!(bessel_i_scaled(0.0, 0.0).unwrap(), 1.0);
        let expected = (-1.0_f64).exp() * (2.0 / PI).sqrt() * 1.0_f64.sinh();
        assert_relative_eq!(
            bessel_i_scaled(0.5, 1.0).unwrap(),
            expected,
            max_relative = 1e-14
        );
    }

    #[test]
    fn i_scaled_matches_series_oracle_at_ten() {
        let oracle = oracle_i(0.25, 10.0, 60) * (-10.0_f64).exp();
        let got = bessel_i_scaled(0.25, 10.0).unwrap();
        assert_relative_eq!(got, oracle, max_relative = 1e-13);
        // Leading asymptotic 1/√(2πz) within the size of the first correction.
        let lead = 1.0 / (2.0 * PI * 10.0).sqrt();
        assert!((got / lead - 1.0).abs() < 0.02);
    }

    #[test]
    fn i_scaled_half_integer_closed_forms() {
        for &z in &[0.1_f64, 2.0, 29.0, 31.0, 80.0, 700.0, 1e6] {
            let s = if z < 40.0 {
                (-z).exp() * z.sinh()
            } else {
                0.5 * (1.0 - (-2.0 * z).exp())
            };
            let c = if z < 40.0 {
                (-z).exp() * z.cosh()
            } else {
                0.5 * (1.0 + (-2.0 * z).exp())
            };
            let pre = (2.0 / (PI * z)).sqrt();
            assert_relative_eq!(
                bessel_i_scaled(0.5, z).unwrap(),
                pre * s,
                max_relative = 1e-13
            );
            assert_relative_eq!(
                bessel_i_scaled(-0.5, z).unwrap(),
                pre * c,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn i_scaled_branches_agree_at_crossover() {
        for &nu in &[-0.9, -0.4, 0.0, 0.25, 0.75, 1.5] {
            let s = i_scaled_series(nu, I_SERIES_LIMIT);
            let a = i_scaled_asymptotic(nu, I_SERIES_LIMIT);
            assert_relative_eq!(s, a, max_relative = 1e-14);
        }
    }

    #[test]
    fn i_scaled_recurrence() {
        for &nu in &[0.3, 0.75, 1.5] {
            for i in 0..=99 {
                let z = 0.5 + 49.5 * i as f64 / 99.0;
                let lhs =
                    bessel_i_scaled(nu - 1.0, z).unwrap() - bessel_i_scaled(nu + 1.0, z).unwrap();
                let rhs = 2.0 * nu / z * bessel_i_scaled(nu, z).unwrap();
                assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn i_scaled_no_overflow() {
        let v = bessel_i_scaled(0.3, 1e12).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn j_basic_values() {
        assert_eq!(bessel_j(0.0, 0.0).unwrap(), 1.0);
        assert!(bessel_j(0.5, PI).unwrap().abs() < 1e-15);
    }

    #[test]
    fn j0_first_zero_by_bisection() {
        // Bracket and bisect on the implementation, then compare with the
        // tabulated zero and check the residual.
        let (mut lo, mut hi) = (2.0, 3.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if bessel_j(0.0, lo).unwrap() * bessel_j(0.0, mid).unwrap() <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((lo - 2.404_825_557_695_773).abs() < 1e-12);
        assert!(bessel_j(0.0, 2.404_825_557_695_773).unwrap().abs() < 1e-9);
    }

    #[test]
    fn j_half_integer_closed_forms_all_branches() {
        for i in 1..400 {
            let z = 0.5 * i as f64;
            let pre = (2.0 / (PI * z)).sqrt();
            let s = bessel_j(0.5, z).unwrap();
            let c = bessel_j(-0.5, z).unwrap();
            assert!((s - pre * z.sin()).abs() < 1e-10 * pre, "z={z}");
            assert!((c - pre * z.cos()).abs() < 1e-10 * pre, "z={z}");
        }
    }

    #[test]
    fn j_recurrence_across_branches() {
        for &nu in &[0.25, 0.8, 1.3] {
            for i in 1..=200 {
                let z = i as f64;
                let lhs = bessel_j(nu - 1.0, z).unwrap() + bessel_j(nu + 1.0, z).unwrap();
                let rhs = 2.0 * nu / z * bessel_j(nu, z).unwrap();
                let scale = (2.0 / (PI * z)).sqrt();
                assert!((lhs - rhs).abs() < 1e-10 * scale.max(1e-3), "nu={nu} z={z}");
            }
        }
    }

    #[test]
    fn j_branches_agree_at_crossovers() {
        for &nu in &[-0.75, 0.0, 0.25, 1.0] {
            let z = J_SERIES_LIMIT;
            let series =
                (nu * (0.5 * z).ln() - lgamma(nu + 1.0)).exp() * clifford_series(nu, z, -1.0);
            assert!((series - j_miller(nu, z)).abs() < 1e-12);
            let z = J_ASYMPTOTIC_LIMIT;
            assert!((j_miller(nu, z) - j_asymptotic(nu, z)).abs() < 1e-13);
        }
    }

    #[test]
    fn clifford_normalisation_and_values() {
        assert_eq!(bessel_clifford_i(0.3, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_clifford_j(0.3, 0.0).unwrap(), 1.0);
        // Independent oracle: compensated series Σ (z²/4)^k / (k! (ν+1)_k).
        let (nu, z) = (-0.4_f64, 0.5_f64);
        let (mut term, mut sum, mut comp) = (1.0_f64, 0.0_f64, 0.0_f64);
        for k in 0..40 {
            if k > 0 {
                term *= 0.25 * z * z / (k as f64 * (nu + k as f64));
            }
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        assert_relative_eq!(bessel_clifford_i(nu, z).unwrap(), sum, max_relative = 1e-15);
        // Half-integer closed form: Ī_{1/2}(2) = Γ(3/2) I_{1/2}(2).
        let expected = 0.5 * PI.sqrt() * (2.0 / (2.0 * PI)).sqrt() * 2.0_f64.sinh();
        assert_relative_eq!(
            bessel_clifford_i(0.5, 2.0).unwrap(),
            expected,
            max_relative = 1e-14
        );
    }

    #[test]
    fn clifford_branches_consistent() {
        for &nu in &[-0.6, 0.25] {
            for &z in &[29.0_f64, 31.0, 50.0] {
                let direct = bessel_clifford_i(nu, z).unwrap();
                let scaled = bessel_clifford_i_scaled(nu, z).unwrap() * z.exp();
                assert_relative_eq!(direct, scaled, max_relative = 1e-13);
            }
            for &z in &[11.0_f64, 13.0] {
                let via_j =
                    (lgamma(nu + 1.0) - nu * (0.5 * z).ln()).exp() * bessel_j(nu, z).unwrap();
                assert!((bessel_clifford_j(nu, z).unwrap() - via_j).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn clifford_derivatives_match_differences() {
        for kind in [CliffordKind::J, CliffordKind::I] {
            for &nu in &[-0.4, 0.6] {
                for &z in &[0.0, 0.3, 1.7] {
                    for order in 1..=3 {
                        let h = 1e-3;
                        let f = |x: f64| {
                            bessel_clifford_derivative(kind, nu, x.abs(), order - 1).unwrap()
                                * if x < 0.0 && (order - 1) % 2 == 1 {
                                    -1.0
                                } else {
                                    1.0
                                }
                        };
                        let fd = (f(z + h) - f(z - h)) / (2.0 * h);
                        let exact = bessel_clifford_derivative(kind, nu, z, order).unwrap();
                        assert!(
                            (fd - exact).abs() < 1e-6,
                            "{kind:?} nu={nu} z={z} order={order}"
                        );
                    }
                }
            }
        }
        // J̄''(0) = −1/(2(ν+1)).
        let d2 = bessel_clifford_derivative(CliffordKind::J, 0.5, 0.0, 2).unwrap();
        assert_relative_eq!(d2, -1.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(bessel_i_scaled(-1.0, 1.0).is_err());
        assert!(bessel_j(-1.5, 1.0).is_err());
        assert!(bessel_j(0.5, -1.0).is_err());
        assert!(bessel_clifford_i(0.0, f64::NAN).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn clifford_i_positive(nu in -0.99f64..3.0, z in 0.0f64..200.0) {
                let v = bessel_clifford_i_scaled(nu, z).unwrap();
                prop_assert!(v > 0.0 && v.is_finite());
                prop_assert!(bessel_clifford_i(nu, z.min(100.0)).unwrap() > 0.0);
            }

            #[test]
            fn i_scaled_deterministic(nu in -0.99f64..3.0, z in 0.0f64..100.0) {
                let a = bessel_i_scaled(nu, z).unwrap();
                let b = bessel_i_scaled(nu, z).unwrap();
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
