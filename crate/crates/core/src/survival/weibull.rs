use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named hazard behaviour over follow-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HazardShape {
    /// Exponential, Weibull shape 1.
    Constant,
    /// Weibull shape 2.
    Increasing,
    /// Weibull shape 0.5.
    Decreasing,
}

impl HazardShape {
    pub fn weibull_shape(self) -> f64 {
        match self {
            HazardShape::Constant => 1.0,
            HazardShape::Increasing => 2.0,
            HazardShape::Decreasing => 0.5,
        }
    }

    pub fn from_weibull_shape(k: f64) -> Option<Self> {
        [HazardShape::Constant, HazardShape::Increasing, HazardShape::Decreasing]
            .into_iter()
            .find(|s| s.weibull_shape() == k)
    }

    pub fn label(self) -> &'static str {
        match self {
            HazardShape::Constant => "constant",
            HazardShape::Increasing => "increasing",
            HazardShape::Decreasing => "decreasing",
        }
    }
}

impl std::str::FromStr for HazardShape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant" | "exponential" => Ok(HazardShape::Constant),
            "increasing" => Ok(HazardShape::Increasing),
            "decreasing" => Ok(HazardShape::Decreasing),
            other => Err(format!(
                "unknown hazard shape `{other}` (expected constant, increasing or decreasing)"
            )),
        }
    }
}

/// Weibull law `S(t) = exp(−(t/scale)^shape)` calibrated so that the event
/// probability by the end of follow-up equals `event_prob_tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullMargin {
    pub shape: f64,
    pub scale: f64,
    pub event_prob_tau: f64,
}

/// Scale `b` with `1 − exp(−(tau/b)^shape) = event_prob`.
pub fn weibull_scale_from_event_prob(event_prob: f64, shape: f64, tau: f64) -> Result<f64> {
    if !(event_prob > 0.0 && event_prob < 1.0) {
        return Err(Error::validation(
            "event_prob",
            format!("event probability {event_prob} must lie in (0, 1)"),
        ));
    }
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(Error::validation("shape", "Weibull shape must be positive"));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::validation("tau", "follow-up must be positive"));
    }
    Ok(tau / (-(-event_prob).ln_1p()).powf(1.0 / shape))
}

impl WeibullMargin {
    pub fn from_event_prob(event_prob: f64, shape: f64, tau: f64) -> Result<Self> {
        let scale = weibull_scale_from_event_prob(event_prob, shape, tau)?;
        Ok(WeibullMargin {
            shape,
            scale,
            event_prob_tau: event_prob,
        })
    }

    /// Margin under proportional hazards with ratio `hr`: `S₁(t) = S₀(t)^hr`.
    pub fn with_hazard_ratio(&self, hr: f64, tau: f64) -> Self {
        let scale = self.scale * hr.powf(-1.0 / self.shape);
        let mut m = WeibullMargin {
            shape: self.shape,
            scale,
            event_prob_tau: 0.0,
        };
        m.event_prob_tau = m.cdf(tau);
        m
    }

    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        (t / self.scale).powf(self.shape)
    }

    pub fn hazard(&self, t: f64) -> f64 {
        self.shape / self.scale * (t / self.scale).powf(self.shape - 1.0)
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.cumulative_hazard(t)).exp()
    }

    pub fn cdf(&self, t: f64) -> f64 {
        -(-self.cumulative_hazard(t)).exp_m1()
    }

    pub fn density(&self, t: f64) -> f64 {
        self.hazard(t) * self.survival(t)
    }

    /// `F⁻¹(u)`.
    pub fn quantile(&self, u: f64) -> f64 {
        self.scale * (-(-u).ln_1p()).powf(1.0 / self.shape)
    }

    /// `S⁻¹(s)`.
    pub fn inverse_survival(&self, s: f64) -> f64 {
        self.scale * (-s.ln()).powf(1.0 / self.shape)
    }
}
