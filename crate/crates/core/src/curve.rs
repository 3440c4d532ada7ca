//! The power-law accuracy pattern `-a * x^(-b) + c`.
//!
//! With `a > 0` and `b > 0` the curve is strictly increasing and concave on
//! `(0, inf)`, bounded above by its horizontal asymptote `c`.

use serde::{Deserialize, Serialize};

use crate::error::CurveError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawCurve {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl PowerLawCurve {
    /// Builds a curve, rejecting parameters outside the pattern family.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, CurveError> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(CurveError::InvalidParameters(format!(
                "non-finite parameters ({a}, {b}, {c})"
            )));
        }
        if a <= 0.0 || b <= 0.0 {
            return Err(CurveError::InvalidParameters(format!(
                "a and b must be positive, got a = {a}, b = {b}"
            )));
        }
        Ok(Self { a, b, c })
    }

    /// Builds a curve without checking the parameters. Used by optimizers
    /// whose parameterization already guarantees validity, and by tests.
    pub const fn new_unchecked(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn evaluate(&self, x: f64) -> Result<f64, CurveError> {
        if !(x > 0.0) {
            return Err(CurveError::Domain(x));
        }
        Ok(self.value(x))
    }

    /// Unchecked evaluation for callers that already hold `x > 0`.
    /// `x = inf` yields the asymptote.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        -self.a * x.powf(-self.b) + self.c
    }

    pub fn derivative(&self, x: f64) -> Result<f64, CurveError> {
        if !(x > 0.0) {
            return Err(CurveError::Domain(x));
        }
        Ok(self.a * self.b * x.powf(-(self.b + 1.0)))
    }

    #[inline]
    pub fn asymptote(&self) -> f64 {
        self.c
    }

    /// Positive, upper bounded by `upper_bound`, strictly increasing and
    /// concave from `domain_start` on. Positivity is checked only at
    /// `domain_start`; the curve increases from there.
    pub fn is_valid_pattern(&self, upper_bound: f64, domain_start: f64) -> bool {
        self.a > 0.0
            && self.b > 0.0
            && self.c.is_finite()
            && self.c <= upper_bound
            && domain_start > 0.0
            && self.value(domain_start) > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FNTBL: PowerLawCurve = PowerLawCurve::new_unchecked(542.5451, 0.3838, 99.2876);

    fn central_difference(c: &PowerLawCurve, x: f64, h: f64) -> f64 {
        (c.value(x + h) - c.value(x - h)) / (2.0 * h)
    }

    #[test]
    fn evaluate_examples() {
        let c = PowerLawCurve::new(2.0, 0.5, 95.0).unwrap();
        assert_eq!(c.evaluate(1.0).unwrap(), 93.0);
        let c = PowerLawCurve::new(1.0, 1.0, 10.0).unwrap();
        assert_eq!(c.evaluate(4.0).unwrap(), 9.75);
        assert_eq!(FNTBL.value(f64::INFINITY), 99.2876);
        assert!((FNTBL.value(1e300) - 99.2876).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        let c = PowerLawCurve::new(1.0, 1.0, 10.0).unwrap();
        assert_eq!(c.evaluate(0.0), Err(CurveError::Domain(0.0)));
        assert_eq!(c.derivative(-1.0), Err(CurveError::Domain(-1.0)));
        assert!(c.evaluate(f64::NAN).is_err());
    }

    #[test]
    fn construction_rejects_non_pattern_parameters() {
        assert!(PowerLawCurve::new(-1.0, 1.0, 50.0).is_err());
        assert!(PowerLawCurve::new(1.0, 0.0, 50.0).is_err());
        assert!(PowerLawCurve::new(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn derivative_examples() {
        let c = PowerLawCurve::new(1.0, 1.0, 10.0).unwrap();
        let d = c.derivative(2.0).unwrap();
        assert_eq!(d, 0.25);
        // finite-difference oracle, h = 1e-6
        assert!((central_difference(&c, 2.0, 1e-6) - 0.25).abs() < 1e-8);

        let d = FNTBL.derivative(5000.0).unwrap();
        let fd = central_difference(&FNTBL, 5000.0, 1e-2);
        assert!(((d - fd) / d).abs() < 1e-8, "{d} vs {fd}");
    }

    #[test]
    fn asymptote_passthrough() {
        assert_eq!(FNTBL.asymptote(), 99.2876);
        assert_eq!(PowerLawCurve::new_unchecked(1.0, 1.0, 0.0).asymptote(), 0.0);
        assert_eq!(PowerLawCurve::new_unchecked(2.0, 0.5, 10.5).asymptote(), 10.5);
    }

    #[test]
    fn pattern_validity() {
        assert!(FNTBL.is_valid_pattern(100.0, 5000.0));
        assert!(!PowerLawCurve::new_unchecked(1.0, 1.0, 101.0).is_valid_pattern(100.0, 1.0));
        assert!(!PowerLawCurve::new_unchecked(-1.0, 1.0, 50.0).is_valid_pattern(100.0, 1.0));
        // negative at the start of the domain
        assert!(!PowerLawCurve::new_unchecked(100.0, 1.0, 50.0).is_valid_pattern(100.0, 1.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn curve() -> impl Strategy<Value = PowerLawCurve> {
            (0.01f64..1000.0, 0.05f64..2.0, 0.0f64..100.0)
                .prop_map(|(a, b, c)| PowerLawCurve::new_unchecked(a, b, c))
        }

        proptest! {
            #[test]
            fn strictly_increasing(c in curve(), x1 in 1.0f64..1e5, dx in 1e-3f64..1e5) {
                prop_assert!(c.value(x1) < c.value(x1 + dx));
            }

            #[test]
            fn concave_chords(c in curve(), x1 in 1.0f64..1e4, d1 in 1.0f64..1e4, d2 in 1.0f64..1e4) {
                let (x2, x3) = (x1 + d1, x1 + d1 + d2);
                let s12 = (c.value(x2) - c.value(x1)) / (x2 - x1);
                let s23 = (c.value(x3) - c.value(x2)) / (x3 - x2);
                prop_assert!(s12 > s23);
            }

            #[test]
            fn below_asymptote(c in curve(), x in 1e-3f64..1e12) {
                // beyond this the term is below the spacing of doubles near c
                prop_assume!(c.a * x.powf(-c.b) > c.c.abs() * 1e-15);
                prop_assert!(c.value(x) < c.asymptote());
            }

            #[test]
            fn derivative_matches_central_difference(c in curve(), x in 1.0f64..1e6) {
                let h = x * 1e-5;
                let fd = (c.value(x + h) - c.value(x - h)) / (2.0 * h);
                let d = c.derivative(x).unwrap();
                // rounding of c swamps the difference quotient otherwise
                prop_assume!(d * h > c.c.abs() * 1e-9);
                prop_assert!(((d - fd) / d).abs() < 1e-6, "{} vs {}", d, fd);
            }

            #[test]
            fn gap_to_asymptote_shrinks_on_geometric_grid(c in curve()) {
                let mut prev = f64::INFINITY;
                for k in 0..40 {
                    let x = 2f64.powi(k);
                    let gap = c.asymptote() - c.value(x);
                    if c.a * x.powf(-c.b) > c.c.abs() * 1e-13 {
                        prop_assert!(gap < prev);
                    } else {
                        prop_assert!(gap <= prev);
                    }
                    prev = gap;
                }
            }
        }
    }
}
