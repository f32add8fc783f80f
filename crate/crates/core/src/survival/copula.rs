//! Gumbel–Hougaard copula `C(u,v) = exp(−[(−ln u)^θ + (−ln v)^θ]^{1/θ})`.
//!
//! Most evaluations work on the transformed arguments `x = −ln u`,
//! `y = −ln v`, which callers often already hold exactly (a cumulative
//! hazard, or the log of a small distribution function).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{find_root, integrate_2d_unit_square, ToleranceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GumbelCopula {
    theta: f64,
}

impl GumbelCopula {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta >= 1.0 && theta.is_finite()) {
            return Err(Error::validation(
                "theta",
                format!("Gumbel parameter {theta} must be finite and at least 1"),
            ));
        }
        Ok(GumbelCopula { theta })
    }

    pub fn independence() -> Self {
        GumbelCopula { theta: 1.0 }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `(x^θ + y^θ)^{1/θ}` without overflow.
    fn norm(&self, x: f64, y: f64) -> f64 {
        let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
        if hi == 0.0 {
            return 0.0;
        }
        if hi.is_infinite() {
            return f64::INFINITY;
        }
        hi * ((lo / hi).powf(self.theta).ln_1p() / self.theta).exp()
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        let (u, v) = (u.min(1.0), v.min(1.0));
        (-self.norm(-u.ln(), -v.ln())).exp()
    }

    /// `−ln C` evaluated from `x = −ln u`, `y = −ln v`.
    pub fn exponent_from_logs(&self, x: f64, y: f64) -> f64 {
        self.norm(x, y)
    }

    /// `C` evaluated from `x = −ln u`, `y = −ln v`.
    pub fn cdf_from_logs(&self, x: f64, y: f64) -> f64 {
        (-self.norm(x, y)).exp()
    }

    /// `ln ∂C/∂u` at `u = e^{−x}`, `v = e^{−y}`.
    pub fn ln_partial_first_from_logs(&self, x: f64, y: f64) -> f64 {
        let theta = self.theta;
        if theta == 1.0 {
            return -y;
        }
        if y == 0.0 {
            return 0.0;
        }
        if x == 0.0 {
            return f64::NEG_INFINITY;
        }
        if x >= y {
            let l = (y / x).powf(theta).ln_1p();
            -x * (l / theta).exp_m1() - (theta - 1.0) / theta * l
        } else {
            let l = (x / y).powf(theta).ln_1p();
            let s = y * (l / theta).exp();
            -(s - x) + (theta - 1.0) * (x.ln() - y.ln()) - (theta - 1.0) / theta * l
        }
    }

    /// `ln ∂C/∂v` at `u = e^{−x}`, `v = e^{−y}`.
    pub fn ln_partial_second_from_logs(&self, x: f64, y: f64) -> f64 {
        self.ln_partial_first_from_logs(y, x)
    }

    pub fn partial_first(&self, u: f64, v: f64) -> f64 {
        self.ln_partial_first_from_logs(-u.ln(), -v.ln()).exp()
    }

    pub fn partial_second(&self, u: f64, v: f64) -> f64 {
        self.ln_partial_second_from_logs(-u.ln(), -v.ln()).exp()
    }

    /// Closed-form Kendall's tau, `1 − 1/θ`.
    pub fn kendall_tau(&self) -> f64 {
        1.0 - 1.0 / self.theta
    }

    /// Spearman's rho, `12·∬C − 3`, by quadrature over the unit square.
    pub fn spearman_rho(&self) -> Result<f64> {
        if self.theta == 1.0 {
            return Ok(0.0);
        }
        let tol = spearman_tolerance();
        let integral = integrate_2d_unit_square(|u, v| self.cdf(u, v), &tol)?;
        Ok(12.0 * integral - 3.0)
    }

    /// Parameter whose Spearman's rho equals `rho_s`.
    pub fn from_spearman(rho_s: f64) -> Result<Self> {
        gumbel_theta_from_spearman(rho_s).map(|theta| GumbelCopula { theta })
    }
}

fn spearman_tolerance() -> ToleranceSpec {
    ToleranceSpec {
        abs_tol: 1e-10,
        rel_tol: 1e-10,
        max_iter: 200,
    }
}

/// Spearman's rho of the Gumbel copula with parameter `theta`.
pub fn spearman_of_gumbel(theta: f64) -> Result<f64> {
    GumbelCopula::new(theta)?.spearman_rho()
}

/// Inverts [`spearman_of_gumbel`] by bracketing root finding.
pub fn gumbel_theta_from_spearman(rho_s: f64) -> Result<f64> {
    if rho_s.is_nan() || rho_s >= 1.0 {
        return Err(Error::validation("rho", "Spearman's rho must lie in [0, 1)"));
    }
    if rho_s < 0.0 {
        return Err(Error::NegativeAssociation {
            field: "rho".into(),
            rho: rho_s,
        });
    }
    if rho_s == 0.0 {
        return Ok(1.0);
    }
    // Expand the upper end until the bracket contains the target.
    let mut hi = 2.0;
    while spearman_of_gumbel(hi)? < rho_s {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::validation("rho", "Spearman's rho too close to 1"));
        }
    }
    let tol = ToleranceSpec {
        abs_tol: 1e-9,
        rel_tol: 1e-9,
        max_iter: 200,
    };
    let failure = std::cell::Cell::new(None);
    let theta = find_root(
        |theta| match spearman_of_gumbel(theta) {
            Ok(r) => r - rho_s,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        },
        1.0,
        hi,
        &tol,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(theta?)
}
