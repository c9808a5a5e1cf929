//! Model exponents for
//! `u_tt + (-Δ)^δ u_tt + (-Δ)^α u + (-Δ)^θ u_t = |u_t|^p`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// High-frequency behaviour of the linear flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// δ ≤ θ: high frequencies decay exponentially.
    Smoothing,
    /// δ > θ: high-frequency decay is paid for with data regularity.
    RegularityLoss,
}

/// Space dimension and the three fractional exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub alpha: f64,
    pub theta: f64,
    pub delta: f64,
}

impl ModelParams {
    /// Builds and validates a parameter set (effective damping 2θ ≤ α, 0 ≤ δ ≤ α).
    pub fn new(n: usize, alpha: f64, theta: f64, delta: f64) -> Result<Self> {
        let params = Self {
            n,
            alpha,
            theta,
            delta,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams("space dimension n must be >= 1".into()));
        }
        if !(self.alpha.is_finite() && self.theta.is_finite() && self.delta.is_finite()) {
            return Err(Error::InvalidParams("exponents must be finite".into()));
        }
        if self.alpha <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if self.theta < 0.0 || 2.0 * self.theta > self.alpha {
            return Err(Error::InvalidParams(format!(
                "need 0 <= 2 theta <= alpha (effective damping), got theta = {}, alpha = {}",
                self.theta, self.alpha
            )));
        }
        if self.delta < 0.0 || self.delta > self.alpha {
            return Err(Error::InvalidParams(format!(
                "need 0 <= delta <= alpha, got delta = {}, alpha = {}",
                self.delta, self.alpha
            )));
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        if self.delta <= self.theta {
            Regime::Smoothing
        } else {
            Regime::RegularityLoss
        }
    }

    /// 1 + |ξ|^{2δ}, the rotational-inertia weight.
    #[inline]
    pub fn inertia(&self, r: f64) -> f64 {
        1.0 + r.powf(2.0 * self.delta)
    }

    /// Surface measure ω_{n-1} of the unit sphere in ℝⁿ.
    pub fn sphere_area(&self) -> f64 {
        let n = self.n as f64;
        2.0 * std::f64::consts::PI.powf(n / 2.0) / gamma_half_integer(self.n)
    }
}

/// Γ(n/2) for positive integer n.
fn gamma_half_integer(n: usize) -> f64 {
    // Γ(1/2) = √π, Γ(1) = 1, Γ(x + 1) = x Γ(x)
    let (mut value, mut x) = if n.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    while x < n as f64 / 2.0 - 1e-12 {
        value *= x;
        x += 1.0;
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_effective_damping() {
        assert!(ModelParams::new(1, 2.0, 1.5, 1.0).is_err());
        assert!(ModelParams::new(1, 2.0, 1.0, 2.5).is_err());
        assert!(ModelParams::new(0, 2.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1, 0.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(1, 2.0, 1.0, 2.0).is_ok());
    }

    #[test]
    fn regime_is_a_partition() {
        let a = ModelParams::new(1, 2.0, 1.0, 1.0).unwrap();
        let b = ModelParams::new(1, 2.0, 0.5, 1.0).unwrap();
        assert_eq!(a.regime(), Regime::Smoothing);
        assert_eq!(b.regime(), Regime::RegularityLoss);
    }

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        for (n, expected) in [(1, 2.0), (2, 2.0 * pi), (3, 4.0 * pi), (4, 2.0 * pi * pi)] {
            let p = ModelParams::new(n, 2.0, 1.0, 1.0).unwrap();
            assert!((p.sphere_area() - expected).abs() < 1e-12, "n = {n}");
        }
    }
}
