//! Pressure-dependent drag functions.
//!
//! Three models are supported, all in non-dimensional form:
//!
//! - `Constant`:         alpha(p) = alpha0
//! - `LinearBarus`:      alpha(p) = alpha0 * (1 + beta * p)
//! - `ExponentialBarus`: alpha(p) = alpha0 * exp(beta * p)
//!
//! The drag coefficient is physically the ratio viscosity/permeability; only
//! the combined coefficient is carried here. Evaluation enforces alpha > 0
//! and guards the exponential against overflow so the nonlinear solver gets
//! a structured error instead of an infinity.

use crate::error::{Error, Result};

/// Exponent guard for `exp(beta * p)`: beyond this the result is within a
/// few bits of f64 overflow and the Newton diagnostics need the offending
/// exponent rather than an infinity.
const EXP_GUARD: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DragVariant {
    Constant,
    LinearBarus,
    ExponentialBarus,
}

/// A drag model with non-dimensional coefficients `alpha0` and `beta`.
///
/// `beta` is ignored by the `Constant` variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DragModel {
    pub variant: DragVariant,
    pub alpha0: f64,
    pub beta: f64,
}

impl DragModel {
    pub fn constant(alpha0: f64) -> Self {
        Self::new(DragVariant::Constant, alpha0, 0.0)
    }

    pub fn linear(alpha0: f64, beta: f64) -> Self {
        Self::new(DragVariant::LinearBarus, alpha0, beta)
    }

    pub fn exponential(alpha0: f64, beta: f64) -> Self {
        Self::new(DragVariant::ExponentialBarus, alpha0, beta)
    }

    pub fn new(variant: DragVariant, alpha0: f64, beta: f64) -> Self {
        assert!(alpha0 > 0.0, "alpha0 must be positive");
        assert!(beta >= 0.0, "beta must be non-negative");
        Self {
            variant,
            alpha0,
            beta,
        }
    }

    /// Same model with a different reference drag (per-element overrides).
    pub fn with_alpha0(&self, alpha0: f64) -> Self {
        Self::new(self.variant, alpha0, self.beta)
    }

    /// Evaluate alpha(p).
    pub fn alpha(&self, p: f64) -> Result<f64> {
        let value = match self.variant {
            DragVariant::Constant => self.alpha0,
            DragVariant::LinearBarus => self.alpha0 * (1.0 + self.beta * p),
            DragVariant::ExponentialBarus => {
                let e = self.beta * p;
                if e > EXP_GUARD {
                    return Err(Error::DragOverflow { exponent: e });
                }
                self.alpha0 * e.exp()
            }
        };
        if !(value > 0.0) {
            return Err(Error::NonpositiveDrag {
                alpha: value,
                pressure: p,
            });
        }
        Ok(value)
    }

    /// Evaluate d alpha / d p.
    pub fn dalpha_dp(&self, p: f64) -> Result<f64> {
        match self.variant {
            DragVariant::Constant => Ok(0.0),
            DragVariant::LinearBarus => Ok(self.alpha0 * self.beta),
            DragVariant::ExponentialBarus => {
                let e = self.beta * p;
                if e > EXP_GUARD {
                    return Err(Error::DragOverflow { exponent: e });
                }
                Ok(self.alpha0 * self.beta * e.exp())
            }
        }
    }

    /// Evaluate 1 / alpha(p).
    pub fn alpha_inv(&self, p: f64) -> Result<f64> {
        Ok(1.0 / self.alpha(p)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exponential_at_zero_pressure() {
        let m = DragModel::exponential(1.0, 0.3);
        assert_eq!(m.alpha(0.0).unwrap(), 1.0);
        assert_eq!(m.dalpha_dp(0.0).unwrap(), 0.3);
    }

    #[test]
    fn linear_value() {
        let m = DragModel::linear(1.0, 2.0);
        assert_eq!(m.alpha(1.0).unwrap(), 3.0);
    }

    #[test]
    fn constant_derivative_is_zero() {
        let m = DragModel::constant(4.2);
        for p in [-10.0, 0.0, 3.5, 1e6] {
            assert_eq!(m.dalpha_dp(p).unwrap(), 0.0);
        }
    }

    #[test]
    fn alpha_inv_values() {
        let m = DragModel::constant(2.0);
        assert_eq!(m.alpha_inv(123.0).unwrap(), 0.5);

        // alpha0 * exp(beta p) = exp(ln 4) = 4 -> inverse 0.25
        let m = DragModel::exponential(1.0, 1.0);
        assert!((m.alpha_inv(4.0f64.ln()).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn alpha_times_alpha_inv_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let models = [
            DragModel::constant(1.7),
            DragModel::linear(0.8, 0.05),
            DragModel::exponential(1.2, 0.1),
        ];
        for _ in 0..50 {
            let p: f64 = rng.gen_range(-5.0..20.0);
            for m in &models {
                let prod = m.alpha(p).unwrap() * m.alpha_inv(p).unwrap();
                assert!((prod - 1.0).abs() < 1e-14, "model {:?} p {}", m.variant, p);
            }
        }
    }

    /// Barus estimate for Naphthenic mineral oil: beta = 23.4 1/GPa gives a
    /// 935.7 % viscosity increase from 0.1 MPa to 100 MPa.
    #[test]
    fn naphthenic_oil_percentage() {
        let beta = 23.4e-9; // 1/Pa
        let mu = |p: f64| (beta * p).exp(); // mu0 cancels in the ratio
        let pct = (mu(100e6) - mu(0.1e6)) / mu(0.1e6) * 100.0;
        assert!((pct - 935.7).abs() < 0.05, "got {pct}");
    }

    /// Central finite differences match dalpha_dp over p in [-5, 20].
    #[test]
    fn derivative_matches_finite_difference()  {
        // linear beta small enough that alpha stays positive down to p = -5
        let models = [
            DragModel::constant(1.0),
            DragModel::linear(1.0, 0.1),
            DragModel::exponential(1.0, 0.3),
        ];
        let h = 1e-6;
        for m in &models {
            for k in 0..=100 {
                let p = -5.0 + 25.0 * (k as f64) / 100.0;
                let fd = (m.alpha(p + h).unwrap() - m.alpha(p - h).unwrap()) / (2.0 * h);
                let an = m.dalpha_dp(p).unwrap();
                let scale = an.abs().max(1e-12);
                assert!(
                    (fd - an).abs() / scale < 1e-6,
                    "model {:?} p {} fd {} an {}",
                    m.variant,
                    p,
                    fd,
                    an
                );
            }
        }
    }

    /// Large-p classification: alpha/p -> 0 (constant), -> alpha0*beta
    /// (linear), grows without bound (exponential).
    #[test]
    fn asymptotic_classification() {
        let alpha0 = 1.0;
        let beta = 1e-3;
        let p = 1e6;

        let c = DragModel::constant(alpha0);
        assert!(c.alpha(p).unwrap() / p < 1e-5);

        let l = DragModel::linear(alpha0, beta);
        let ratio = l.alpha(p).unwrap() / p;
        assert!((ratio - alpha0 * beta).abs() / (alpha0 * beta) < 1e-3);

        // exp growth: alpha/p increases monotonically along a geometric ladder
        let e = DragModel::exponential(alpha0, beta);
        let mut prev = 0.0;
        for k in 0..8 {
            let pk = 1e3 * 2.0f64.powi(k);
            let r = e.alpha(pk).unwrap() / pk;
            assert!(r > prev, "alpha/p not growing at p = {pk}");
            prev = r;
        }
    }

    #[test]
    fn positivity_for_nonnegative_pressure() {
        let models = [
            DragModel::constant(0.5),
            DragModel::linear(0.5, 0.2),
            DragModel::exponential(0.5, 0.2),
        ];
        for m in &models {
            for k in 0..50 {
                let p = 10.0 * k as f64;
                assert!(m.alpha(p).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn linear_negative_pressure_error() {
        let m = DragModel::linear(1.0, 2.0);
        // alpha = 1 + 2p <= 0 for p <= -1/2
        match m.alpha(-1.0) {
            Err(Error::NonpositiveDrag { pressure, .. }) => assert_eq!(pressure, -1.0),
            other => panic!("expected NonpositiveDrag, got {other:?}"),
        }
    }

    #[test]
    fn exponential_overflow_error() {
        let m = DragModel::exponential(1.0, 1.0);
        match m.alpha(800.0) {
            Err(Error::DragOverflow { exponent }) => assert_eq!(exponent, 800.0),
            other => panic!("expected DragOverflow, got {other:?}"),
        }
    }
}
