//! Closed-form reference solutions: the radial dead-core profile, its p → ∞
//! limit, and the one-dimensional gradient-constraint solution on (−1, 4).
//! Pure formulas with no grid dependence; discretization error budgets live
//! in the consuming tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radial dead-core problem on the ball B_R(0) with constant boundary value
/// κ > 0, constant λ₀ and exponent p.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RadialSpec {
    pub dim: u32,
    pub radius: f64,
    pub kappa: f64,
    pub lambda0: f64,
    pub p: f64,
}

impl RadialSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > 2 {
            return Err(Error::Config(format!("dimension {} not supported", self.dim)));
        }
        if !(self.kappa > 0.0 && self.lambda0 > 0.0 && self.radius > 0.0 && self.p >= 2.0) {
            return Err(Error::Config(format!("degenerate radial problem {self:?}")));
        }
        Ok(())
    }

    /// Θ = ((p−1)/p)·(λ₀/N)^{1/(p−1)}.
    pub fn theta(&self) -> f64 {
        theta_constant(self.dim, self.lambda0, self.p)
    }

    /// Width of the positivity annulus, 𝔗 = (κ/Θ)^{(p−1)/p}.
    pub fn annulus_width(&self) -> f64 {
        (self.kappa / self.theta()).powf((self.p - 1.0) / self.p)
    }

    /// Dead-core radius r₀ = R − 𝔗; requires the compatibility condition R > 𝔗.
    pub fn core_radius(&self) -> Result<f64> {
        self.validate()?;
        let width = self.annulus_width();
        if self.radius <= width {
            return Err(Error::Config(format!(
                "no dead core: R = {} does not exceed the annulus width {width}",
                self.radius
            )));
        }
        Ok(self.radius - width)
    }
}

/// Θ(N, λ₀, p) = ((p−1)/p)·(λ₀/N)^{1/(p−1)}, the growth constant of the
/// radial profile; tends to 1 as p → ∞ for any fixed λ₀ and N.
pub fn theta_constant(dim: u32, lambda0: f64, p: f64) -> f64 {
    (p - 1.0) / p * (lambda0 / dim as f64).powf(1.0 / (p - 1.0))
}

/// Radial profile Θ·(|x| − r₀)₊^{p/(p−1)} centered at the origin. Exact
/// solution of the radial two-point problem for N = 1; for N = 2 it serves
/// as an approximate reference (its radial residual is reported by the
/// consuming tests rather than assumed zero).
pub fn dead_core_profile(spec: &RadialSpec, x: [f64; 2]) -> Result<f64> {
    let r0 = spec.core_radius()?;
    let r = x[0].hypot(x[1]);
    let s = (r - r0).max(0.0);
    Ok(spec.theta() * s.powf(spec.p / (spec.p - 1.0)))
}

/// Pointwise p → ∞ limit of the dead-core profile: (|x| − (R − κ))₊.
/// For κ > R the expression is positive on the whole ball (no dead core);
/// see [`limit_core_radius`].
pub fn limit_radial_profile(radius: f64, kappa: f64, x: [f64; 2]) -> f64 {
    (x[0].hypot(x[1]) - (radius - kappa)).max(0.0)
}

/// Dead-core radius of the limit profile, `None` when κ > R leaves no core.
pub fn limit_core_radius(radius: f64, kappa: f64) -> Option<f64> {
    if kappa > radius {
        None
    } else {
        Some(radius - kappa)
    }
}

/// Unique solution of max{−u″, χ_{u>0} − |u′|} = 0 on (−1, 4) with
/// u(−1) = 1, u(4) = −1: the piecewise map −x on (−1, 0], −x/4 on [0, 4).
pub fn gradient_constraint_1d(x: f64) -> Result<f64> {
    if !(-1.0..=4.0).contains(&x) {
        return Err(Error::Contract(format!("x = {x} outside [-1, 4]")));
    }
    Ok(if x <= 0.0 { -x } else { -x / 4.0 })
}
