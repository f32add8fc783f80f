//! Shared test-design vocabulary: arms, endpoints, significance and power.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Trial arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Control,
    Treatment,
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arm::Control => "control",
            Arm::Treatment => "treatment",
        })
    }
}

/// Candidate primary endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    /// The clinically most relevant component on its own.
    Relevant,
    /// Occurrence of either component (or time to the first of them).
    Composite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    #[default]
    One,
    Two,
}

/// Variance used under the null in the two-proportion sample size formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceVariant {
    #[default]
    Pooled,
    Unpooled,
}

/// Significance level, target power and sidedness of the primary test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestDesign {
    pub alpha: f64,
    pub power: f64,
    #[serde(default)]
    pub sidedness: Sidedness,
}

impl Default for TestDesign {
    fn default() -> Self {
        TestDesign {
            alpha: 0.05,
            power: 0.80,
            sidedness: Sidedness::One,
        }
    }
}

impl TestDesign {
    pub fn new(alpha: f64, power: f64, sidedness: Sidedness) -> Result<Self> {
        let design = TestDesign {
            alpha,
            power,
            sidedness,
        };
        design.validate()?;
        Ok(design)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::validation("alpha", "must lie in (0, 0.5)"));
        }
        if !(self.power > 0.5 && self.power < 1.0) {
            return Err(Error::validation("power", "must lie in (0.5, 1)"));
        }
        Ok(())
    }

    /// Critical value z_{1-α} (one-sided) or z_{1-α/2} (two-sided).
    pub fn z_alpha(&self) -> f64 {
        let tail = match self.sidedness {
            Sidedness::One => self.alpha,
            Sidedness::Two => self.alpha / 2.0,
        };
        standard_normal_quantile(1.0 - tail)
    }

    /// z_{1-β}.
    pub fn z_beta(&self) -> f64 {
        standard_normal_quantile(self.power)
    }
}

pub fn standard_normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}
