//! Time-to-event composite endpoints.
//!
//! Each component time `T_j` follows a Weibull law in the control arm, and
//! the treatment acts through proportional hazards on each margin. The two
//! times are coupled by a Gumbel copula whose parameter is chosen to match an
//! anticipated Spearman's rho, the same in both arms. The composite time is
//! `T* = min(T₁, T₂)`; its hazard ratio `HR*(t)` is generally not constant
//! even though each margin has proportional hazards.
//!
//! By default the copula couples the marginal distribution functions,
//! `P(T₁ ≤ s, T₂ ≤ t) = C(F₁(s), F₂(t))`. When ε₁ is terminal, the
//! anticipated frequency of ε₂ is the probability of observing ε₂ before
//! death, and the latent ε₂ margin is solved for accordingly.

mod copula;
mod weibull;

pub use copula::{gumbel_theta_from_spearman, spearman_of_gumbel, GumbelCopula};
pub use weibull::{weibull_scale_from_event_prob, HazardShape, WeibullMargin};

use serde::{Deserialize, Serialize};

use crate::binary::SampleSize;
use crate::design::{Arm, TestDesign};
use crate::error::{Error, Result};
use crate::numerics::{find_root, integrate_1d_with_error, NumericsError, ToleranceSpec};

/// Which functions of the component times the copula couples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaOrientation {
    /// Joint distribution function `C(F₁, F₂)`.
    #[default]
    Distribution,
    /// Joint survival function `C(S₁, S₂)`.
    Survival,
}

/// Component of the composite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Relevant,
    Additional,
}

/// Validated time-to-event design inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalScenario {
    /// Control-arm margin of the relevant endpoint ε₁.
    pub margin1: WeibullMargin,
    /// Control-arm margin of the additional endpoint ε₂, calibrated to the
    /// anticipated frequency as if ε₂ were always observable.
    pub margin2: WeibullMargin,
    pub hr1: f64,
    pub hr2: f64,
    pub spearman_rho: f64,
    pub tau: f64,
    /// ε₁ is death and precludes observing ε₂ afterwards.
    pub eps1_terminal: bool,
    pub orientation: CopulaOrientation,
    pub design: TestDesign,
}

impl SurvivalScenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p1: f64,
        p2: f64,
        shape1: f64,
        shape2: f64,
        hr1: f64,
        hr2: f64,
        spearman_rho: f64,
        tau: f64,
        eps1_terminal: bool,
        orientation: CopulaOrientation,
        design: TestDesign,
    ) -> Result<Self> {
        design.validate()?;
        let margin1 = WeibullMargin::from_event_prob(p1, shape1, tau).map_err(|e| match e.field() {
            Some("event_prob") => e.with_field("p1"),
            Some("shape") => e.with_field("shape1"),
            _ => e,
        })?;
        let margin2 = WeibullMargin::from_event_prob(p2, shape2, tau).map_err(|e| match e.field() {
            Some("event_prob") => e.with_field("p2"),
            Some("shape") => e.with_field("shape2"),
            _ => e,
        })?;
        for (field, hr) in [("hr1", hr1), ("hr2", hr2)] {
            if !(hr > 0.0 && hr <= 1.0) {
                return Err(Error::validation(field, format!("hazard ratio {hr} must lie in (0, 1]")));
            }
        }
        if spearman_rho < 0.0 {
            return Err(Error::NegativeAssociation {
                field: "rho".into(),
                rho: spearman_rho,
            });
        }
        if !(spearman_rho < 1.0) {
            return Err(Error::validation("rho", "Spearman's rho must lie in [0, 1)"));
        }
        Ok(SurvivalScenario {
            margin1,
            margin2,
            hr1,
            hr2,
            spearman_rho,
            tau,
            eps1_terminal,
            orientation,
            design,
        })
    }
}

/// Evaluable law of the composite time in both arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeLaw {
    pub copula: GumbelCopula,
    pub orientation: CopulaOrientation,
    pub tau: f64,
    control: [WeibullMargin; 2],
    treatment: [WeibullMargin; 2],
}

/// Lower integration limit; hazards with shape < 1 are unbounded at 0.
pub const HEAD_CUTOFF: f64 = 1e-10;

struct Pointwise {
    survival: f64,
    event_prob: f64,
    cause1: f64,
    cause2: f64,
}

impl CompositeLaw {
    /// Assembles the law from explicit margins and copula.
    pub fn new(
        copula: GumbelCopula,
        orientation: CopulaOrientation,
        tau: f64,
        control: [WeibullMargin; 2],
        hr: [f64; 2],
    ) -> Self {
        let treatment = [
            control[0].with_hazard_ratio(hr[0], tau),
            control[1].with_hazard_ratio(hr[1], tau),
        ];
        CompositeLaw {
            copula,
            orientation,
            tau,
            control,
            treatment,
        }
    }

    pub fn theta(&self) -> f64 {
        self.copula.theta()
    }

    pub fn margins(&self, arm: Arm) -> &[WeibullMargin; 2] {
        match arm {
            Arm::Control => &self.control,
            Arm::Treatment => &self.treatment,
        }
    }

    fn pointwise(&self, arm: Arm, t: f64) -> Pointwise {
        let [m1, m2] = self.margins(arm);
        if t <= 0.0 {
            return Pointwise {
                survival: 1.0,
                event_prob: 0.0,
                cause1: 0.0,
                cause2: 0.0,
            };
        }
        let (h1, h2) = (m1.cumulative_hazard(t), m2.cumulative_hazard(t));
        let (f1, f2) = (m1.density(t), m2.density(t));
        match self.orientation {
            CopulaOrientation::Survival => {
                let s = self.copula.cdf_from_logs(h1, h2);
                let d1 = self.copula.ln_partial_first_from_logs(h1, h2).exp();
                let d2 = self.copula.ln_partial_second_from_logs(h1, h2).exp();
                Pointwise {
                    survival: s,
                    event_prob: -(-self.copula.exponent_from_logs(h1, h2)).exp_m1(),
                    cause1: f1 * d1,
                    cause2: f2 * d2,
                }
            }
            CopulaOrientation::Distribution => {
                let (big_f1, big_f2) = (-(-h1).exp_m1(), -(-h2).exp_m1());
                let (x, y) = (-big_f1.ln(), -big_f2.ln());
                let joint = self.copula.cdf_from_logs(x, y);
                let event_prob = big_f1 + big_f2 - joint;
                let one_minus_d1 = -self.copula.ln_partial_first_from_logs(x, y).exp_m1();
                let one_minus_d2 = -self.copula.ln_partial_second_from_logs(x, y).exp_m1();
                Pointwise {
                    survival: 1.0 - event_prob,
                    event_prob,
                    cause1: f1 * one_minus_d1,
                    cause2: f2 * one_minus_d2,
                }
            }
        }
    }

    /// `S*(t)`.
    pub fn survival(&self, arm: Arm, t: f64) -> f64 {
        self.pointwise(arm, t).survival
    }

    /// `1 − S*(t)`, computed without cancellation.
    pub fn cdf(&self, arm: Arm, t: f64) -> f64 {
        self.pointwise(arm, t).event_prob
    }

    /// Composite-event probability by the end of follow-up.
    pub fn event_prob(&self, arm: Arm) -> f64 {
        self.cdf(arm, self.tau)
    }

    /// `f*(t)`.
    pub fn density(&self, arm: Arm, t: f64) -> f64 {
        let p = self.pointwise(arm, t);
        p.cause1 + p.cause2
    }

    /// Density of the composite occurring at `t` through the given component.
    pub fn cause_density(&self, arm: Arm, cause: Component, t: f64) -> f64 {
        let p = self.pointwise(arm, t);
        match cause {
            Component::Relevant => p.cause1,
            Component::Additional => p.cause2,
        }
    }

    /// `λ*(t) = f*(t) / S*(t)`.
    pub fn hazard(&self, arm: Arm, t: f64) -> f64 {
        let p = self.pointwise(arm, t);
        (p.cause1 + p.cause2) / p.survival
    }

    /// `HR*(t) = λ*(treatment, t) / λ*(control, t)`.
    pub fn hr_star(&self, t: f64) -> f64 {
        self.hazard(Arm::Treatment, t) / self.hazard(Arm::Control, t)
    }

    pub fn ln_hr_star(&self, t: f64) -> f64 {
        let c = self.pointwise(Arm::Control, t);
        let tr = self.pointwise(Arm::Treatment, t);
        (tr.cause1 + tr.cause2).ln() - (c.cause1 + c.cause2).ln() + c.survival.ln() - tr.survival.ln()
    }

    /// `∫₀^τ g(t)·f*(t) dt` for the given arm.
    ///
    /// The head `[0, HEAD_CUTOFF]` is replaced by `g(η)·(1 − S*(η))`; its
    /// magnitude is added to the returned error bound.
    pub fn integrate_against_density<G: Fn(f64) -> f64>(
        &self,
        arm: Arm,
        g: G,
        tol: &ToleranceSpec,
    ) -> std::result::Result<crate::numerics::Quadrature, NumericsError> {
        let eta = HEAD_CUTOFF.min(self.tau);
        let head = g(eta) * self.cdf(arm, eta);
        let body = integrate_1d_with_error(|t| g(t) * self.density(arm, t), eta, self.tau, tol)?;
        Ok(crate::numerics::Quadrature {
            value: body.value + head,
            error: body.error + head.abs(),
        })
    }
}

fn law_tolerance() -> ToleranceSpec {
    ToleranceSpec {
        abs_tol: 1e-12,
        rel_tol: 1e-10,
        max_iter: 200,
    }
}

/// Builds the composite law for a scenario: inverts Spearman's rho to the
/// Gumbel parameter, calibrates the ε₂ margin when ε₁ is terminal, and
/// applies the hazard ratios.
pub fn build_composite_law(scenario: &SurvivalScenario) -> Result<CompositeLaw> {
    let copula = GumbelCopula::from_spearman(scenario.spearman_rho)?;
    build_composite_law_with_copula(scenario, copula)
}

/// As [`build_composite_law`] with an already resolved copula.
pub fn build_composite_law_with_copula(
    scenario: &SurvivalScenario,
    copula: GumbelCopula,
) -> Result<CompositeLaw> {
    let hr = [scenario.hr1, scenario.hr2];
    let margin2 = if scenario.eps1_terminal {
        calibrate_observed_margin(scenario, copula)?
    } else {
        scenario.margin2
    };
    Ok(CompositeLaw::new(
        copula,
        scenario.orientation,
        scenario.tau,
        [scenario.margin1, margin2],
        hr,
    ))
}

/// Solves for the latent ε₂ margin whose probability of being observed
/// before ε₁ and before τ equals the anticipated frequency.
fn calibrate_observed_margin(scenario: &SurvivalScenario, copula: GumbelCopula) -> Result<WeibullMargin> {
    let target = scenario.margin2.event_prob_tau;
    let shape = scenario.margin2.shape;
    let tau = scenario.tau;
    let tol = law_tolerance();
    let observed = |latent: f64| -> std::result::Result<f64, NumericsError> {
        let m2 = WeibullMargin::from_event_prob(latent, shape, tau).expect("latent probability in (0, 1)");
        let law = CompositeLaw::new(copula, scenario.orientation, tau, [scenario.margin1, m2], [1.0, 1.0]);
        let eta = HEAD_CUTOFF.min(tau);
        let q = integrate_1d_with_error(|t| law.cause_density(Arm::Control, Component::Additional, t), eta, tau, &tol)?;
        Ok(q.value + law.margins(Arm::Control)[1].cdf(eta))
    };

    let upper = 1.0 - 1e-9;
    let reachable = observed(upper)?;
    if reachable < target {
        return Err(Error::validation(
            "p2",
            format!(
                "observed frequency {target} of the additional endpoint is unreachable before the terminal event (at most {reachable:.6})"
            ),
        ));
    }
    let failure = std::cell::Cell::new(None);
    let root_tol = ToleranceSpec {
        abs_tol: 1e-11,
        rel_tol: 1e-9,
        max_iter: 200,
    };
    let latent = find_root(
        |q| match observed(q) {
            Ok(v) => v - target,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        },
        target,
        upper,
        &root_tol,
    );
    if let Some(e) = failure.take() {
        return Err(e.into());
    }
    WeibullMargin::from_event_prob(latent?, shape, tau)
}

/// `∫₀^τ ln HR*(t)·f*⁽⁰⁾(t) dt`.
fn log_hr_weighted_integral(law: &CompositeLaw) -> Result<f64> {
    let q = law.integrate_against_density(Arm::Control, |t| law.ln_hr_star(t), &law_tolerance())?;
    Ok(q.value)
}

/// Asymptotic relative efficiency of the logrank test on the composite
/// versus the logrank test on ε₁:
/// `(∫ ln HR*·f*⁽⁰⁾)² / ((ln HR₁)²·p₁⁽⁰⁾·p*⁽⁰⁾)`.
pub fn are_survival(scenario: &SurvivalScenario) -> Result<f64> {
    let law = build_composite_law(scenario)?;
    are_from_law(&law, scenario.hr1)
}

/// ARE for an already built law.
pub fn are_from_law(law: &CompositeLaw, hr1: f64) -> Result<f64> {
    if hr1 == 1.0 {
        return Err(Error::UndetectableEffect {
            field: "hr1".into(),
            message: "ARE undefined for null effect on relevant endpoint".into(),
        });
    }
    let numerator = log_hr_weighted_integral(law)?;
    let p1 = law.margins(Arm::Control)[0].cdf(law.tau);
    let p_star = law.event_prob(Arm::Control);
    Ok(numerator * numerator / (hr1.ln().powi(2) * p1 * p_star))
}

/// Geometric average hazard ratio
/// `exp(∫ ln HR*(t)·f*⁽⁰⁾(t) dt / p*⁽⁰⁾)`.
pub fn effective_hr(law: &CompositeLaw) -> Result<f64> {
    let numerator = log_hr_weighted_integral(law)?;
    Ok((numerator / law.event_prob(Arm::Control)).exp())
}

/// Freedman's required number of events and total sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreedmanSize {
    pub events: f64,
    pub sample_size: SampleSize,
}

/// Freedman formula: `E = ((1+HR)/(1−HR))²·(z_α + z_β)²` events, and
/// `E / event_prob_avg` patients split 1:1.
pub fn freedman_sample_size(summary_hr: f64, event_prob_avg: f64, design: &TestDesign) -> Result<FreedmanSize> {
    design.validate()?;
    if !(summary_hr > 0.0 && summary_hr.is_finite()) {
        return Err(Error::validation("hr", format!("hazard ratio {summary_hr} must be positive")));
    }
    if summary_hr == 1.0 {
        return Err(Error::UndetectableEffect {
            field: "hr".into(),
            message: "hazard ratio equals 1".into(),
        });
    }
    if !(event_prob_avg > 0.0 && event_prob_avg <= 1.0) {
        return Err(Error::validation("event_prob", format!("event probability {event_prob_avg} must lie in (0, 1]")));
    }
    let ratio = (1.0 + summary_hr) / (1.0 - summary_hr);
    let events = ratio * ratio * (design.z_alpha() + design.z_beta()).powi(2);
    Ok(FreedmanSize {
        events,
        sample_size: SampleSize::from_per_arm(events / (2.0 * event_prob_avg)),
    })
}

/// Hazard ratio of the composite on a grid over `(0, τ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhDiagnostic {
    pub points: Vec<(f64, f64)>,
    /// `max HR*(t) − min HR*(t)` over the grid; zero under proportional hazards.
    pub non_proportionality_index: f64,
}

pub fn ph_diagnostic(law: &CompositeLaw, tau: f64, grid_size: usize) -> Result<PhDiagnostic> {
    if grid_size < 2 {
        return Err(Error::validation("grid_size", "at least two grid points are required"));
    }
    let points: Vec<(f64, f64)> = (1..=grid_size)
        .map(|i| {
            let t = tau * i as f64 / grid_size as f64;
            (t, law.hr_star(t))
        })
        .collect();
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, hr)| (lo.min(hr), hi.max(hr)));
    Ok(PhDiagnostic {
        points,
        non_proportionality_index: hi - lo,
    })
}

/// Everything the design report needs for a time-to-event scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalAnalysis {
    pub theta: f64,
    pub are: f64,
    pub effective_hr: f64,
    pub p1_control: f64,
    pub p2_latent_control: f64,
    pub p_star_control: f64,
    pub p_star_treatment: f64,
    pub composite: FreedmanSize,
    pub relevant: FreedmanSize,
    pub non_proportionality_index: f64,
}

/// Grid used for the proportional-hazards diagnostic in reports.
pub const REPORT_GRID: usize = 100;

pub fn analyze(scenario: &SurvivalScenario) -> Result<SurvivalAnalysis> {
    if scenario.hr1 == 1.0 {
        return Err(Error::UndetectableEffect {
            field: "hr1".into(),
            message: "ARE undefined for null effect on relevant endpoint".into(),
        });
    }
    let law = build_composite_law(scenario)?;
    let numerator = log_hr_weighted_integral(&law)?;
    let p1_control = law.margins(Arm::Control)[0].cdf(law.tau);
    let p1_treatment = law.margins(Arm::Treatment)[0].cdf(law.tau);
    let p_star_control = law.event_prob(Arm::Control);
    let p_star_treatment = law.event_prob(Arm::Treatment);
    let are = numerator * numerator / (scenario.hr1.ln().powi(2) * p1_control * p_star_control);
    let effective = (numerator / p_star_control).exp();
    let composite = freedman_sample_size(effective, 0.5 * (p_star_control + p_star_treatment), &scenario.design)
        .map_err(|e| e.with_field("hr2"))?;
    let relevant = freedman_sample_size(scenario.hr1, 0.5 * (p1_control + p1_treatment), &scenario.design)
        .map_err(|e| e.with_field("hr1"))?;
    let ph = ph_diagnostic(&law, law.tau, REPORT_GRID)?;
    Ok(SurvivalAnalysis {
        theta: law.theta(),
        are,
        effective_hr: effective,
        p1_control,
        p2_latent_control: law.margins(Arm::Control)[1].cdf(law.tau),
        p_star_control,
        p_star_treatment,
        composite,
        relevant,
        non_proportionality_index: ph.non_proportionality_index,
    })
}
