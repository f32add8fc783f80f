//! Closed forms for a composite of two binary components.
//!
//! Components are Bernoulli indicators with control-arm probabilities
//! `p1`, `p2` and Pearson correlation `rho`. The joint probability is linear
//! in the correlation, `p12 = p1·p2 + rho·√(p1·q1·p2·q2)`, so conditional
//! probabilities and the composite probability `p* = p1 + p2 − p12` follow
//! directly. Effects are absolute risk reductions; the same correlation is
//! assumed in both arms.

use serde::{Deserialize, Serialize};

use crate::design::{Arm, TestDesign, VarianceVariant};
use crate::error::{Error, Result};

/// Control-arm event probabilities of the relevant (ε₁) and additional (ε₂)
/// components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMarginals {
    pub p1: f64,
    pub p2: f64,
}

impl BinaryMarginals {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        open_unit("p1", p1)?;
        open_unit("p2", p2)?;
        Ok(BinaryMarginals { p1, p2 })
    }

    fn sd_product(&self) -> f64 {
        (self.p1 * (1.0 - self.p1) * self.p2 * (1.0 - self.p2)).sqrt()
    }
}

fn open_unit(field: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("probability {p} must lie in (0, 1)")))
    }
}

/// Absolute risk reductions on each component (positive = benefit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskDifferenceEffect {
    pub delta1: f64,
    pub delta2: f64,
}

impl RiskDifferenceEffect {
    /// Zero effects are admitted so that null scenarios can be simulated;
    /// the efficiency computations reject a null effect on ε₁ themselves.
    pub fn new(marginals: &BinaryMarginals, delta1: f64, delta2: f64) -> Result<Self> {
        if !(0.0..=marginals.p1).contains(&delta1) || delta1 >= 1.0 {
            return Err(Error::validation(
                "delta1",
                format!("risk reduction {delta1} must lie in [0, p1 = {}]", marginals.p1),
            ));
        }
        if !(0.0..=marginals.p2).contains(&delta2) || delta2 >= 1.0 {
            return Err(Error::validation(
                "delta2",
                format!("risk reduction {delta2} must lie in [0, p2 = {}]", marginals.p2),
            ));
        }
        Ok(RiskDifferenceEffect { delta1, delta2 })
    }
}

/// Validated inputs for a binary composite design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryDesignInput {
    pub marginals: BinaryMarginals,
    pub effect: RiskDifferenceEffect,
    /// Pearson correlation between the two indicators, shared by both arms.
    pub rho: f64,
    pub design: TestDesign,
    pub variance_variant: VarianceVariant,
}

impl BinaryDesignInput {
    /// Validates the association against the Fréchet bounds of both arms.
    pub fn new(
        marginals: BinaryMarginals,
        effect: RiskDifferenceEffect,
        rho: f64,
        design: TestDesign,
        variance_variant: VarianceVariant,
    ) -> Result<Self> {
        design.validate()?;
        let input = BinaryDesignInput {
            marginals,
            effect,
            rho,
            design,
            variance_variant,
        };
        check_feasible(&marginals, rho, Arm::Control)?;
        let treated = input.arm_marginals(Arm::Treatment);
        check_feasible_raw(treated.0, treated.1, rho, Arm::Treatment)?;
        Ok(input)
    }

    /// Component probabilities `(p1, p2)` in the given arm. Treatment-arm
    /// probabilities may be zero when the reduction equals the control rate.
    pub fn arm_marginals(&self, arm: Arm) -> (f64, f64) {
        let m = self.marginals;
        match arm {
            Arm::Control => (m.p1, m.p2),
            Arm::Treatment => (m.p1 - self.effect.delta1, m.p2 - self.effect.delta2),
        }
    }
}

/// Fréchet–Hoeffding feasible interval `(rho_min, rho_max)` for the Pearson
/// correlation of two Bernoulli variables with the given margins.
pub fn correlation_bounds(marginals: &BinaryMarginals) -> (f64, f64) {
    bounds_raw(marginals.p1, marginals.p2)
}

fn bounds_raw(p1: f64, p2: f64) -> (f64, f64) {
    let (q1, q2) = (1.0 - p1, 1.0 - p2);
    let rho_max = (p1 * q2 / (q1 * p2)).sqrt().min((p2 * q1 / (q2 * p1)).sqrt());
    let rho_min = (-(p1 * p2 / (q1 * q2)).sqrt()).max(-(q1 * q2 / (p1 * p2)).sqrt());
    (rho_min, rho_max)
}

// Slack for bound comparisons, so that rho = rho_max computed in floating
// point is accepted.
const BOUND_SLACK: f64 = 1e-12;

fn check_feasible(marginals: &BinaryMarginals, rho: f64, arm: Arm) -> Result<()> {
    check_feasible_raw(marginals.p1, marginals.p2, rho, arm)
}

fn check_feasible_raw(p1: f64, p2: f64, rho: f64, arm: Arm) -> Result<()> {
    if !rho.is_finite() {
        return Err(Error::validation("rho", "correlation must be finite"));
    }
    // A degenerate treatment-arm margin (probability 0) admits only independence.
    let (rho_min, rho_max) = if p1 <= 0.0 || p2 <= 0.0 || p1 >= 1.0 || p2 >= 1.0 {
        (0.0, 0.0)
    } else {
        bounds_raw(p1, p2)
    };
    if rho < rho_min - BOUND_SLACK || rho > rho_max + BOUND_SLACK {
        if p1 <= 0.0 || p2 <= 0.0 {
            // Indicator is constant; correlation is undefined but the joint
            // law is still p12 = 0.
            return Ok(());
        }
        return Err(Error::InfeasibleAssociation {
            field: "rho".into(),
            arm,
            rho,
            rho_min,
            rho_max,
        });
    }
    Ok(())
}

fn joint_raw(p1: f64, p2: f64, rho: f64) -> f64 {
    let sd = (p1 * (1.0 - p1) * p2 * (1.0 - p2)).sqrt();
    let p12 = p1 * p2 + rho * sd;
    // Clamp rounding excursions at the Fréchet box edges.
    p12.clamp((p1 + p2 - 1.0).max(0.0), p1.min(p2))
}

/// Probability that both components occur.
pub fn joint_prob_from_correlation(marginals: &BinaryMarginals, rho: f64) -> Result<f64> {
    check_feasible(marginals, rho, Arm::Control)?;
    Ok(joint_raw(marginals.p1, marginals.p2, rho))
}

/// `(P(ε₁ | ε₂), P(ε₂ | ε₁))`.
pub fn conditionals_from_correlation(marginals: &BinaryMarginals, rho: f64) -> Result<(f64, f64)> {
    let p12 = joint_prob_from_correlation(marginals, rho)?;
    Ok((p12 / marginals.p2, p12 / marginals.p1))
}

/// Inverse of the linear map between correlation and `P(ε₁ | ε₂)`.
pub fn correlation_from_conditional(marginals: &BinaryMarginals, p_eps1_given_eps2: f64) -> Result<f64> {
    let BinaryMarginals { p1, p2 } = *marginals;
    let lo = (p1 + p2 - 1.0).max(0.0) / p2;
    let hi = p1.min(p2) / p2;
    if !(p_eps1_given_eps2 >= lo - BOUND_SLACK && p_eps1_given_eps2 <= hi + BOUND_SLACK) {
        return Err(Error::InfeasibleConditional {
            field: "conditional_eps1_given_eps2".into(),
            value: p_eps1_given_eps2,
            min: lo,
            max: hi,
        });
    }
    let p12 = p_eps1_given_eps2 * p2;
    Ok((p12 - p1 * p2) / marginals.sd_product())
}

/// Correlation implied by `P(ε₂ | ε₁)`.
pub fn correlation_from_conditional_eps2(marginals: &BinaryMarginals, p_eps2_given_eps1: f64) -> Result<f64> {
    let swapped = BinaryMarginals {
        p1: marginals.p2,
        p2: marginals.p1,
    };
    correlation_from_conditional(&swapped, p_eps2_given_eps1)
        .map_err(|e| e.with_field("conditional_eps2_given_eps1"))
}

/// Probability of the composite event, `p1 + p2 − p12`.
pub fn composite_probability(marginals: &BinaryMarginals, rho: f64) -> Result<f64> {
    let p12 = joint_prob_from_correlation(marginals, rho)?;
    Ok(marginals.p1 + marginals.p2 - p12)
}

fn composite_raw(p1: f64, p2: f64, rho: f64) -> f64 {
    p1 + p2 - joint_raw(p1, p2, rho)
}

/// Composite probability in each arm, `(control, treatment)`.
pub fn composite_probabilities(input: &BinaryDesignInput) -> (f64, f64) {
    let (c1, c2) = input.arm_marginals(Arm::Control);
    let (t1, t2) = input.arm_marginals(Arm::Treatment);
    (composite_raw(c1, c2, input.rho), composite_raw(t1, t2, input.rho))
}

/// Absolute risk reduction on the composite endpoint.
pub fn composite_effect(input: &BinaryDesignInput) -> Result<f64> {
    let (t1, t2) = input.arm_marginals(Arm::Treatment);
    check_feasible_raw(t1, t2, input.rho, Arm::Treatment)?;
    let (control, treatment) = composite_probabilities(input);
    Ok(control - treatment)
}

/// Required sample size for comparing two proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    /// Unrounded per-arm size.
    pub per_arm_exact: f64,
    /// Twice the per-arm size rounded up.
    pub n_total: u64,
}

impl SampleSize {
    pub(crate) fn from_per_arm(per_arm_exact: f64) -> Self {
        SampleSize {
            per_arm_exact,
            n_total: 2 * per_arm_exact.ceil() as u64,
        }
    }
}

/// Normal-approximation sample size for a two-proportion test.
pub fn sample_size_binary(
    p_control: f64,
    p_treatment: f64,
    design: &TestDesign,
    variance_variant: VarianceVariant,
) -> Result<SampleSize> {
    design.validate()?;
    for (field, p) in [("p_control", p_control), ("p_treatment", p_treatment)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::validation(field, format!("probability {p} must lie in [0, 1]")));
        }
    }
    let delta = p_control - p_treatment;
    if delta == 0.0 {
        return Err(Error::UndetectableEffect {
            field: "p_treatment".into(),
            message: "control and treatment probabilities are equal".into(),
        });
    }
    let (za, zb) = (design.z_alpha(), design.z_beta());
    let alt_var = p_control * (1.0 - p_control) + p_treatment * (1.0 - p_treatment);
    let per_arm = match variance_variant {
        VarianceVariant::Pooled => {
            let p_bar = 0.5 * (p_control + p_treatment);
            let null_sd = (2.0 * p_bar * (1.0 - p_bar)).sqrt();
            (za * null_sd + zb * alt_var.sqrt()).powi(2) / (delta * delta)
        }
        VarianceVariant::Unpooled => (za + zb).powi(2) * alt_var / (delta * delta),
    };
    Ok(SampleSize::from_per_arm(per_arm))
}

/// Sample sizes for the relevant endpoint alone and for the composite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinarySizing {
    pub relevant: SampleSize,
    pub composite: SampleSize,
}

impl BinarySizing {
    /// Ratio of unrounded sample sizes, relevant over composite.
    pub fn are(&self) -> f64 {
        self.relevant.per_arm_exact / self.composite.per_arm_exact
    }
}

pub fn sizing_binary(input: &BinaryDesignInput) -> Result<BinarySizing> {
    if input.effect.delta1 == 0.0 {
        return Err(Error::UndetectableEffect {
            field: "delta1".into(),
            message: "ARE is undefined without an effect on the relevant endpoint".into(),
        });
    }
    let (c1, _) = input.arm_marginals(Arm::Control);
    let (t1, _) = input.arm_marginals(Arm::Treatment);
    let relevant = sample_size_binary(c1, t1, &input.design, input.variance_variant)?;
    composite_effect(input)?;
    let (pc, pt) = composite_probabilities(input);
    let composite = sample_size_binary(pc, pt, &input.design, input.variance_variant)
        .map_err(|e| e.with_field("delta2"))?;
    Ok(BinarySizing { relevant, composite })
}

/// Asymptotic relative efficiency of the composite versus ε₁: the ratio of
/// unrounded required sample sizes, `n(ε₁) / n(ε*)`.
pub fn are_binary(input: &BinaryDesignInput) -> Result<f64> {
    sizing_binary(input).map(|s| s.are())
}

/// Convenience constructor with the default test design.
pub fn design_input(
    p1: f64,
    p2: f64,
    delta1: f64,
    delta2: f64,
    rho: f64,
    design: TestDesign,
    variance_variant: VarianceVariant,
) -> Result<BinaryDesignInput> {
    let marginals = BinaryMarginals::new(p1, p2)?;
    let effect = RiskDifferenceEffect::new(&marginals, delta1, delta2)?;
    BinaryDesignInput::new(marginals, effect, rho, design, variance_variant)
}
