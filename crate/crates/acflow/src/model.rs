//! Physical parameters and the double-well potential.

use crate::{Error, Result};

/// Model coefficients of the active-fluid / phase-field system.
///
/// `rho` may be negative (self-propulsion); the discrete energy-dissipation
/// guarantee applies only for `rho >= 0` and the monitor downgrades itself to
/// advisory otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysParams {
    /// Viscosity.
    pub mu: f64,
    /// Coefficient of the fourth-order dissipation (through w = -Δu).
    pub gamma: f64,
    /// Convection coefficient.
    pub nu: f64,
    /// Linear velocity-potential coefficient.
    pub rho: f64,
    /// Quartic velocity-potential coefficient.
    pub lambda: f64,
    /// Phase relaxation coefficient.
    pub sigma: f64,
    /// Mixing energy density.
    pub kappa: f64,
    /// Interface-width parameter of the double well.
    pub eta: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams {
            mu: 1.0,
            gamma: 1.0,
            nu: 1.0,
            rho: 1.0,
            lambda: 1.0,
            sigma: 1.0,
            kappa: 1.0,
            eta: 1.0,
        }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu", self.mu),
            ("gamma", self.gamma),
            ("nu", self.nu),
            ("lambda", self.lambda),
            ("sigma", self.sigma),
            ("kappa", self.kappa),
            ("eta", self.eta),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::invalid(format!("parameter {name} = {v} must be >= 0")));
            }
        }
        if self.eta == 0.0 {
            return Err(Error::invalid("eta must be positive"));
        }
        Ok(())
    }
}

/// Double-well free-energy density F(φ) = (φ² − 1)² / (4 η²).
#[inline]
pub fn double_well(phi: f64, eta: f64) -> f64 {
    let q = phi * phi - 1.0;
    q * q / (4.0 * eta * eta)
}

/// f(φ) = F'(φ) = (φ³ − φ) / η².
#[inline]
pub fn double_well_deriv(phi: f64, eta: f64) -> f64 {
    (phi * phi * phi - phi) / (eta * eta)
}

/// Secant slope of the double well between `a` and `b`:
/// (F(a) − F(b)) / (a − b), extended by f((a+b)/2) at coincidence.
///
/// For the quartic well the difference quotient factors exactly,
/// F(a) − F(b) = (a − b)(a + b)(a² + b² − 2)/(4η²), so the secant is the
/// polynomial below for *all* inputs — no cancellation-prone branch needed,
/// and the telescoping identity f̃(a,b)(a−b) = F(a) − F(b) holds to rounding.
#[inline]
pub fn secant_potential(a: f64, b: f64, eta: f64) -> f64 {
    (a + b) * (a * a + b * b - 2.0) / (4.0 * eta * eta)
}

/// ∂f̃/∂a, used by the Newton linearization of the chemical-potential
/// equation. At a = b this reduces to f'(a)/2.
#[inline]
pub fn secant_potential_da(a: f64, b: f64, eta: f64) -> f64 {
    (3.0 * a * a + 2.0 * a * b + b * b - 2.0) / (4.0 * eta * eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn well_minima() {
        for phi in [-1.0, 1.0] {
            assert_eq!(double_well(phi, 1.0), 0.0);
            assert_eq!(double_well_deriv(phi, 1.0), 0.0);
        }
        assert!((double_well(0.0, 1.0) - 0.25).abs() < 1e-16);
        assert_eq!(double_well_deriv(0.0, 1.0), 0.0);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-8;
        for phi in [-1.7, -0.3, 0.0, 0.42, 1.9] {
            for eta in [1.0, 0.25] {
                let fd = (double_well(phi + h, eta) - double_well(phi - h, eta)) / (2.0 * h);
                assert!(
                    (fd - double_well_deriv(phi, eta)).abs() < 1e-6,
                    "phi={phi}, eta={eta}"
                );
            }
        }
    }

    #[test]
    fn secant_examples() {
        // (F(1) - F(0)) / 1 = -1/4
        assert!((secant_potential(1.0, 0.0, 1.0) + 0.25).abs() < 1e-16);
        // coincident arguments: f(0.5) = 0.125 - 0.5 = -0.375
        assert!((secant_potential(0.5, 0.5, 1.0) + 0.375).abs() < 1e-16);
        // near-coincident arguments stay continuous
        let a = 0.5 + 1e-13;
        let b = 0.5;
        let f_mid = double_well_deriv(0.5 * (a + b), 1.0);
        assert!((secant_potential(a, b, 1.0) - f_mid).abs() < 1e-6);
    }

    #[test]
    fn secant_da_limit() {
        // at coincidence the derivative is f'(a)/2 = (3a^2 - 1)/2
        for a in [-1.2, 0.0, 0.8] {
            let want = (3.0 * a * a - 1.0) / 2.0;
            assert!((secant_potential_da(a, a, 1.0) - want).abs() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn telescoping_identity(a in -3.0..3.0f64, b in -3.0..3.0f64, eta in 0.1..2.0f64) {
            let lhs = secant_potential(a, b, eta) * (a - b);
            let rhs = double_well(a, eta) - double_well(b, eta);
            let scale = lhs.abs().max(rhs.abs()).max(1e-12);
            prop_assert!((lhs - rhs).abs() <= 1e-13 * scale.max(1.0));
        }

        #[test]
        fn secant_matches_difference_quotient(a in -3.0..3.0f64, d in 0.001..1.0f64, eta in 0.2..2.0f64) {
            let b = a - d;
            let quotient = (double_well(a, eta) - double_well(b, eta)) / (a - b);
            prop_assert!((secant_potential(a, b, eta) - quotient).abs() < 1e-10);
        }

        #[test]
        fn secant_da_matches_fd(a in -2.0..2.0f64, b in -2.0..2.0f64) {
            let h = 1e-7;
            let fd = (secant_potential(a + h, b, 1.0) - secant_potential(a - h, b, 1.0)) / (2.0 * h);
            prop_assert!((secant_potential_da(a, b, 1.0) - fd).abs() < 1e-5);
        }
    }
}
