//! Euler gamma function on the positive axis.
//!
//! Backed by the Lanczos approximation in `statrs`; this module only adds
//! the domain contract (positive finite arguments).

use crate::error::{Error, Result};

/// Γ(x) for x > 0.
pub fn gamma_fn(x: f64) -> Result<f64> {
    check_positive("gamma_fn", x)?;
    Ok(statrs::function::gamma::gamma(x))
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    check_positive("ln_gamma", x)?;
    Ok(statrs::function::gamma::ln_gamma(x))
}

/// Binomial coefficient C(k, j) as a float.
pub fn binomial(k: usize, j: usize) -> f64 {
    if j > k {
        return 0.0;
    }
    let j = j.min(k - j);
    (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

/// k! as a float (exact for the small orders used here).
pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

fn check_positive(op: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(
            op,
            format!("argument must be positive and finite, got {x}"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn known_values() {
        assert_relative_eq!(gamma_fn(1.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(
            gamma_fn(0.5).unwrap(),
            1.772_453_850_905_516,
            max_relative = 1e-13
        );
        assert_relative_eq!(gamma_fn(3.0).unwrap(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn recurrence_on_unit_interval() {
        // Γ(x+1) = xΓ(x) ties (0,1] to (1,2]; both halves must agree.
        for i in 1..=200 {
            let x = i as f64 / 200.0;
            let lhs = gamma_fn(x + 1.0).unwrap();
            let rhs = x * gamma_fn(x).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-13);
        }
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-0.5).is_err());
        assert!(gamma_fn(f64::NAN).is_err());
        assert!(ln_gamma(0.0).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(5, 5), 1.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert_eq!(factorial(5), 120.0);
    }
}
