//! Scenario documents, single evaluations, parameter sweeps and reports.
//!
//! A scenario is a flat JSON object tagged by `kind`. Probabilities and
//! effects are decimals (`0.0196`, not `1.96`); percentage points appear only
//! in rendered tables.

mod grid;
mod render;

pub use grid::{GridAxis, GridValue};
pub use render::{render_report, render_reports, render_table, OutputFormat};

use serde::{Deserialize, Serialize};

use crate::binary::{
    composite_probabilities, conditionals_from_correlation, design_input, joint_prob_from_correlation,
    sizing_binary, BinaryDesignInput,
};
use crate::design::{Endpoint, Sidedness, TestDesign, VarianceVariant};
use crate::error::{Error, Result};
use crate::survival::{analyze, CopulaOrientation, HazardShape, SurvivalScenario};

fn default_alpha() -> f64 {
    0.05
}

fn default_power() -> f64 {
    0.80
}

fn default_tau() -> f64 {
    1.0
}

/// Scenario document as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioSpec {
    Binary(BinarySpec),
    Survival(SurvivalSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinarySpec {
    #[serde(default)]
    pub label: String,
    pub p1: f64,
    pub p2: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// Pearson correlation of the two indicators.
    pub rho: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_power")]
    pub power: f64,
    #[serde(default)]
    pub sidedness: Sidedness,
    #[serde(default)]
    pub variance_variant: VarianceVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurvivalSpec {
    #[serde(default)]
    pub label: String,
    pub p1: f64,
    pub p2: f64,
    pub hr1: f64,
    pub hr2: f64,
    pub shape1: ShapeSpec,
    pub shape2: ShapeSpec,
    /// Spearman's rho between the component times.
    pub rho: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub eps1_terminal: bool,
    #[serde(default)]
    pub copula_orientation: CopulaOrientation,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_power")]
    pub power: f64,
    #[serde(default)]
    pub sidedness: Sidedness,
}

/// Weibull shape, by name or by value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShapeSpec {
    Named(HazardShape),
    Weibull(f64),
}

impl ShapeSpec {
    pub fn weibull_shape(self) -> f64 {
        match self {
            ShapeSpec::Named(s) => s.weibull_shape(),
            ShapeSpec::Weibull(k) => k,
        }
    }

    /// Name of the hazard behaviour, or the shape value.
    pub fn label(self) -> String {
        match self {
            ShapeSpec::Named(s) => s.label().to_string(),
            ShapeSpec::Weibull(k) => match HazardShape::from_weibull_shape(k) {
                Some(s) => s.label().to_string(),
                None => format!("Weibull {k}"),
            },
        }
    }
}

impl ScenarioSpec {
    pub fn label(&self) -> &str {
        match self {
            ScenarioSpec::Binary(b) => &b.label,
            ScenarioSpec::Survival(s) => &s.label,
        }
    }

    pub fn kind(&self) -> ScenarioKind {
        match self {
            ScenarioSpec::Binary(_) => ScenarioKind::Binary,
            ScenarioSpec::Survival(_) => ScenarioKind::Survival,
        }
    }

    /// Parses a scenario document, reporting unknown or mistyped fields as
    /// validation errors.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::validation("scenario", e.to_string()))
    }

    /// Whether `name` is a parameter that [`ScenarioSpec::with_param`] can set.
    pub fn accepts_param(&self, name: &str) -> bool {
        if matches!(name, "kind" | "label") {
            return false;
        }
        if name == "shapes" {
            return self.kind() == ScenarioKind::Survival;
        }
        let doc = serde_json::to_value(self).expect("scenario serializes");
        doc.as_object().is_some_and(|o| o.contains_key(name))
    }

    /// Returns a copy with one parameter replaced. `shapes` sets both hazard
    /// shapes from a `first/second` pair.
    pub fn with_param(&self, name: &str, value: &GridValue) -> Result<Self> {
        if !self.accepts_param(name) {
            return Err(unknown_param(self, name));
        }
        let mut doc = serde_json::to_value(self).expect("scenario serializes");
        let obj = doc.as_object_mut().expect("scenario is an object");
        if name == "shapes" && self.kind() == ScenarioKind::Survival {
            let text = value.to_string();
            let (a, b) = text
                .split_once('/')
                .ok_or_else(|| Error::validation("shapes", format!("expected `first/second`, got `{text}`")))?;
            obj.insert("shape1".into(), GridValue::parse(a).to_json());
            obj.insert("shape2".into(), GridValue::parse(b).to_json());
        } else {
            obj.insert(name.into(), value.to_json());
        }
        serde_json::from_value(doc).map_err(|e| Error::validation(name, e.to_string()))
    }
}

fn unknown_param(spec: &ScenarioSpec, name: &str) -> Error {
    Error::validation(name, format!("not a sweepable parameter of a {} scenario", spec.kind().label()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Binary,
    Survival,
}

impl ScenarioKind {
    pub fn label(self) -> &'static str {
        match self {
            ScenarioKind::Binary => "binary",
            ScenarioKind::Survival => "survival",
        }
    }
}

/// Validated model behind a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioModel {
    Binary(BinaryDesignInput),
    Survival(SurvivalScenario),
}

/// A scenario whose inputs passed every feasibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub model: ScenarioModel,
}

impl Scenario {
    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        let model = match &spec {
            ScenarioSpec::Binary(b) => {
                let design = TestDesign::new(b.alpha, b.power, b.sidedness)?;
                ScenarioModel::Binary(design_input(
                    b.p1,
                    b.p2,
                    b.delta1,
                    b.delta2,
                    b.rho,
                    design,
                    b.variance_variant,
                )?)
            }
            ScenarioSpec::Survival(s) => {
                let design = TestDesign::new(s.alpha, s.power, s.sidedness)?;
                if !(s.tau > 0.0 && s.tau.is_finite()) {
                    return Err(Error::validation("tau", "follow-up must be positive"));
                }
                ScenarioModel::Survival(SurvivalScenario::new(
                    s.p1,
                    s.p2,
                    s.shape1.weibull_shape(),
                    s.shape2.weibull_shape(),
                    s.hr1,
                    s.hr2,
                    s.rho,
                    s.tau,
                    s.eps1_terminal,
                    s.copula_orientation,
                    design,
                )?)
            }
        };
        Ok(Scenario { spec, model })
    }

    pub fn label(&self) -> &str {
        self.spec.label()
    }
}

/// How `effect_star` is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectMeasure {
    /// Absolute risk reduction, control minus treatment.
    RiskDifference,
    /// Geometric average hazard ratio of the composite.
    HazardRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub value: f64,
}

fn diag(name: &str, value: f64) -> Diagnostic {
    Diagnostic {
        name: name.to_string(),
        value,
    }
}

/// Result of evaluating one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub label: String,
    pub kind: ScenarioKind,
    /// Inputs as evaluated.
    pub scenario: ScenarioSpec,
    /// Pearson correlation (binary) or Spearman's rho (survival).
    pub association: f64,
    pub p_star_control: f64,
    pub p_star_treatment: f64,
    pub effect_star: f64,
    pub effect_measure: EffectMeasure,
    pub are: f64,
    pub recommendation: Endpoint,
    pub n_total_composite: u64,
    pub n_total_relevant: u64,
    pub diagnostics: Vec<Diagnostic>,
}

impl DesignReport {
    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics.iter().find(|d| d.name == name).map(|d| d.value)
    }
}

/// The composite is recommended only when it is strictly more efficient.
pub fn recommend(are: f64) -> Endpoint {
    if are > 1.0 {
        Endpoint::Composite
    } else {
        Endpoint::Relevant
    }
}

pub fn evaluate(scenario: &Scenario) -> Result<DesignReport> {
    match &scenario.model {
        ScenarioModel::Binary(input) => evaluate_binary(scenario, input),
        ScenarioModel::Survival(s) => evaluate_survival(scenario, s),
    }
}

/// Validates and evaluates a scenario document.
pub fn evaluate_spec(spec: &ScenarioSpec) -> Result<DesignReport> {
    evaluate(&Scenario::new(spec.clone())?)
}

fn evaluate_binary(scenario: &Scenario, input: &BinaryDesignInput) -> Result<DesignReport> {
    let sizing = sizing_binary(input)?;
    let (pc, pt) = composite_probabilities(input);
    let (c12, c21) = conditionals_from_correlation(&input.marginals, input.rho)?;
    let are = sizing.are();
    Ok(DesignReport {
        label: scenario.label().to_string(),
        kind: ScenarioKind::Binary,
        scenario: scenario.spec.clone(),
        association: input.rho,
        p_star_control: pc,
        p_star_treatment: pt,
        effect_star: pc - pt,
        effect_measure: EffectMeasure::RiskDifference,
        are,
        recommendation: recommend(are),
        n_total_composite: sizing.composite.n_total,
        n_total_relevant: sizing.relevant.n_total,
        diagnostics: vec![
            diag("conditional_eps1_given_eps2", c12),
            diag("conditional_eps2_given_eps1", c21),
            diag("p12_control", joint_prob_from_correlation(&input.marginals, input.rho)?),
            diag("n_per_arm_composite_exact", sizing.composite.per_arm_exact),
            diag("n_per_arm_relevant_exact", sizing.relevant.per_arm_exact),
        ],
    })
}

fn evaluate_survival(scenario: &Scenario, s: &SurvivalScenario) -> Result<DesignReport> {
    let a = analyze(s)?;
    Ok(DesignReport {
        label: scenario.label().to_string(),
        kind: ScenarioKind::Survival,
        scenario: scenario.spec.clone(),
        association: s.spearman_rho,
        p_star_control: a.p_star_control,
        p_star_treatment: a.p_star_treatment,
        effect_star: a.effective_hr,
        effect_measure: EffectMeasure::HazardRatio,
        are: a.are,
        recommendation: recommend(a.are),
        n_total_composite: a.composite.sample_size.n_total,
        n_total_relevant: a.relevant.sample_size.n_total,
        diagnostics: vec![
            diag("theta", a.theta),
            diag("p1_control", a.p1_control),
            diag("p2_latent_control", a.p2_latent_control),
            diag("events_composite", a.composite.events),
            diag("events_relevant", a.relevant.events),
            diag("non_proportionality_index", a.non_proportionality_index),
        ],
    })
}

/// Machine-readable error code shared by every front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    InfeasibleAssociation,
    UndetectableEffect,
    QuadratureFailure,
    Validation,
    Internal,
    Busy,
}

impl ErrorCode {
    pub fn of(error: &Error) -> Self {
        match error {
            Error::InfeasibleAssociation { .. }
            | Error::InfeasibleConditional { .. }
            | Error::NegativeAssociation { .. } => ErrorCode::InfeasibleAssociation,
            Error::UndetectableEffect { .. } => ErrorCode::UndetectableEffect,
            Error::Validation { .. } => ErrorCode::Validation,
            Error::Numerics(_) => ErrorCode::QuadratureFailure,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::InfeasibleAssociation => "INFEASIBLE_ASSOCIATION",
            ErrorCode::UndetectableEffect => "UNDETECTABLE_EFFECT",
            ErrorCode::QuadratureFailure => "QUADRATURE_FAILURE",
            ErrorCode::Validation => "VALIDATION",
            ErrorCode::Internal => "INTERNAL",
            ErrorCode::Busy => "BUSY",
        }
    }
}

/// Why a sweep cell could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub code: ErrorCode,
    pub field: Option<String>,
    pub message: String,
    /// The violated feasible interval, when there is one.
    pub feasible_range: Option<(f64, f64)>,
}

impl From<&Error> for CellError {
    fn from(e: &Error) -> Self {
        CellError {
            code: ErrorCode::of(e),
            field: e.field().map(str::to_string),
            message: e.to_string(),
            feasible_range: e.feasible_range(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    /// One value per axis, in axis order.
    pub coordinates: Vec<GridValue>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub report: Option<DesignReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub infeasible: Option<CellError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    StrictlyDecreasing,
    StrictlyIncreasing,
    Constant,
    NonMonotone,
    /// Fewer than two evaluated cells.
    Insufficient,
}

impl Trend {
    pub fn of(values: &[f64]) -> Self {
        if values.len() < 2 {
            return Trend::Insufficient;
        }
        let pairs = || values.windows(2);
        if pairs().all(|w| w[1] < w[0]) {
            Trend::StrictlyDecreasing
        } else if pairs().all(|w| w[1] > w[0]) {
            Trend::StrictlyIncreasing
        } else if pairs().all(|w| w[1] == w[0]) {
            Trend::Constant
        } else {
            Trend::NonMonotone
        }
    }
}

/// ARE trend along one axis with the other axis held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub along: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub at: Option<(String, GridValue)>,
    pub are: Trend,
    pub evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub label: String,
    pub kind: ScenarioKind,
    pub axes: Vec<GridAxis>,
    /// Row-major with the first axis varying fastest.
    pub cells: Vec<SweepCell>,
    pub trends: Vec<TrendSummary>,
}

impl SweepTable {
    pub fn cell(&self, indices: &[usize]) -> &SweepCell {
        let mut flat = 0;
        let mut stride = 1;
        for (axis, &i) in self.axes.iter().zip(indices) {
            flat += i * stride;
            stride *= axis.values.len();
        }
        &self.cells[flat]
    }

    /// Index of the axis ARE trends are reported along: `rho` when swept,
    /// otherwise the first axis.
    pub fn trend_axis(&self) -> usize {
        self.axes.iter().position(|a| a.name == "rho").unwrap_or(0)
    }
}

/// Upper bound on the number of cells in one sweep.
pub const MAX_SWEEP_CELLS: usize = 10_000;

/// Evaluates `base` at every grid point. Infeasible points are kept with
/// their reason; the sweep fails only when no point is feasible.
pub fn sweep(base: &ScenarioSpec, axes: &[GridAxis]) -> Result<SweepTable> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(Error::validation("grid", "a sweep takes one or two axes"));
    }
    for (i, axis) in axes.iter().enumerate() {
        if axis.values.is_empty() {
            return Err(Error::validation("grid", format!("axis `{}` has no values", axis.name)));
        }
        if axes[..i].iter().any(|a| a.name == axis.name) {
            return Err(Error::validation("grid", format!("axis `{}` appears twice", axis.name)));
        }
    }
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    if total > MAX_SWEEP_CELLS {
        return Err(Error::validation("grid", format!("{total} cells exceed the limit of {MAX_SWEEP_CELLS}")));
    }
    // Parameter names are checked up front so that a typo is an error rather
    // than a table of infeasible cells.
    for axis in axes {
        if !base.accepts_param(&axis.name) {
            return Err(unknown_param(base, &axis.name));
        }
    }

    let coords: Vec<Vec<GridValue>> = (0..total)
        .map(|flat| {
            let mut rest = flat;
            axes.iter()
                .map(|a| {
                    let v = a.values[rest % a.values.len()].clone();
                    rest /= a.values.len();
                    v
                })
                .collect()
        })
        .collect();

    let eval_cell = |point: &Vec<GridValue>| -> SweepCell {
        let result = axes
            .iter()
            .zip(point)
            .try_fold(base.clone(), |spec, (axis, value)| spec.with_param(&axis.name, value))
            .and_then(|spec| evaluate_spec(&spec));
        match result {
            Ok(report) => SweepCell {
                coordinates: point.clone(),
                report: Some(report),
                infeasible: None,
            },
            Err(e) => SweepCell {
                coordinates: point.clone(),
                report: None,
                infeasible: Some(CellError::from(&e)),
            },
        }
    };

    #[cfg(feature = "parallel")]
    let cells: Vec<SweepCell> = {
        use rayon::prelude::*;
        coords.par_iter().map(eval_cell).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let cells: Vec<SweepCell> = coords.iter().map(eval_cell).collect();

    if cells.iter().all(|c| c.report.is_none()) {
        let first = cells[0].infeasible.as_ref().expect("failed cell carries a reason");
        return Err(Error::validation(
            "grid",
            format!("no grid point is feasible; first failure: {}", first.message),
        ));
    }

    let mut table = SweepTable {
        label: base.label().to_string(),
        kind: base.kind(),
        axes: axes.to_vec(),
        cells,
        trends: Vec::new(),
    };
    table.trends = trends(&table);
    Ok(table)
}

fn trends(table: &SweepTable) -> Vec<TrendSummary> {
    let along = table.trend_axis();
    let line = |fixed: Option<(usize, usize)>| -> Vec<f64> {
        (0..table.axes[along].values.len())
            .filter_map(|i| {
                let mut idx = vec![0; table.axes.len()];
                idx[along] = i;
                if let Some((axis, j)) = fixed {
                    idx[axis] = j;
                }
                table.cell(&idx).report.as_ref().map(|r| r.are)
            })
            .collect()
    };
    let summary = |values: Vec<f64>, at| TrendSummary {
        along: table.axes[along].name.clone(),
        at,
        are: Trend::of(&values),
        evaluated: values.len(),
    };
    match table.axes.len() {
        1 => vec![summary(line(None), None)],
        _ => {
            let other = 1 - along;
            let axis = &table.axes[other];
            (0..axis.values.len())
                .map(|j| summary(line(Some((other, j))), Some((axis.name.clone(), axis.values[j].clone()))))
                .collect()
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn tuxedo(rho: f64) -> ScenarioSpec {
        ScenarioSpec::Binary(BinarySpec {
            label: "TUXEDO".into(),
            p1: 0.059,
            p2: 0.032,
            delta1: 0.0196,
            delta2: 0.0098,
            rho,
            alpha: 0.05,
            power: 0.80,
            sidedness: Sidedness::One,
            variance_variant: VarianceVariant::Pooled,
        })
    }

    fn oasis(shape1: HazardShape, shape2: HazardShape) -> ScenarioSpec {
        ScenarioSpec::Survival(SurvivalSpec {
            label: "OASIS-6".into(),
            p1: 0.125,
            p2: 0.05,
            hr1: 0.83,
            hr2: 0.66,
            shape1: ShapeSpec::Named(shape1),
            shape2: ShapeSpec::Named(shape2),
            rho: 0.7,
            tau: 1.0,
            eps1_terminal: true,
            copula_orientation: CopulaOrientation::Distribution,
            alpha: 0.05,
            power: 0.80,
            sidedness: Sidedness::One,
        })
    }

    #[test]
    fn parses_with_defaults() {
        let spec = ScenarioSpec::from_json(
            r#"{"kind":"binary","p1":0.059,"p2":0.032,"delta1":0.0196,"delta2":0.0098,"rho":0.4}"#,
        )
        .unwrap();
        let mut expected = tuxedo(0.4);
        if let ScenarioSpec::Binary(b) = &mut expected {
            b.label.clear();
        }
        assert_eq!(spec, expected);
    }

    #[test]
    fn rejects_unknown_fields() {
        let e = ScenarioSpec::from_json(
            r#"{"kind":"binary","p1":0.059,"p2":0.032,"delta1":0.0196,"delta2":0.0098,"rho":0.4,"rh0":1}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("rh0"), "{e}");
        assert!(ScenarioSpec::from_json(r#"{"kind":"ternary"}"#).is_err());
    }

    #[test]
    fn shapes_by_name_or_value() {
        let spec = ScenarioSpec::from_json(
            r#"{"kind":"survival","p1":0.125,"p2":0.05,"hr1":0.83,"hr2":0.66,
                "shape1":"increasing","shape2":0.5,"rho":0.7}"#,
        )
        .unwrap();
        let ScenarioSpec::Survival(s) = spec else { panic!() };
        assert_eq!(s.shape1, ShapeSpec::Named(HazardShape::Increasing));
        assert_eq!(s.shape2.weibull_shape(), 0.5);
        assert_eq!(s.shape2.label(), "decreasing");
        assert!(!s.eps1_terminal);
    }

    #[test]
    fn moderate_row() {
        let r = evaluate_spec(&tuxedo(0.4)).unwrap();
        assert_eq!((r.p_star_control * 100.0).round() / 100.0, 0.07);
        assert_eq!((r.effect_star * 1000.0).round() / 10.0, 2.3);
        assert!((r.n_total_composite as f64 - 2561.0).abs() <= 0.05 * 2561.0);
        assert_eq!(r.recommendation, Endpoint::Composite);
        assert!((r.diagnostic("conditional_eps1_given_eps2").unwrap() - 0.58).abs() < 0.005);
    }

    #[test]
    fn dilution_recommends_relevant() {
        let mut spec = tuxedo(0.6);
        if let ScenarioSpec::Binary(b) = &mut spec {
            b.p2 = b.p1;
            b.delta2 = 0.0;
        }
        let r = evaluate_spec(&spec).unwrap();
        assert!(r.are < 1.0);
        assert_eq!(r.recommendation, Endpoint::Relevant);
    }

    #[test]
    fn tie_goes_to_relevant() {
        assert_eq!(recommend(1.0), Endpoint::Relevant);
        assert_eq!(recommend(1.0 + f64::EPSILON), Endpoint::Composite);
    }

    #[test]
    fn survival_row_four() {
        let r = evaluate_spec(&oasis(HazardShape::Constant, HazardShape::Increasing)).unwrap();
        assert!((r.are - 2.18).abs() <= 0.05, "{}", r.are);
        assert!((r.n_total_composite as f64 - 2857.0).abs() <= 0.10 * 2857.0);
        assert_eq!(r.recommendation, Endpoint::Composite);
        assert!(r.diagnostic("non_proportionality_index").unwrap() > 0.0);
    }

    #[test]
    fn errors_name_fields() {
        let e = evaluate_spec(&tuxedo(0.9)).unwrap_err();
        assert_eq!(ErrorCode::of(&e), ErrorCode::InfeasibleAssociation);
        let (_, hi) = e.feasible_range().unwrap();
        assert!((hi - 0.726).abs() < 0.001);
        let mut spec = oasis(HazardShape::Constant, HazardShape::Constant);
        if let ScenarioSpec::Survival(s) = &mut spec {
            s.hr1 = 1.0;
        }
        let e = evaluate_spec(&spec).unwrap_err();
        assert_eq!(ErrorCode::of(&e), ErrorCode::UndetectableEffect);
        assert_eq!(e.field(), Some("hr1"));
    }

    #[test]
    fn with_param_sets_fields() {
        let spec = tuxedo(0.1).with_param("rho", &GridValue::Number(0.4)).unwrap();
        assert_eq!(spec, tuxedo(0.4));
        assert!(tuxedo(0.1).with_param("hr2", &GridValue::Number(0.4)).is_err());
        assert!(tuxedo(0.1).with_param("label", &GridValue::Text("x".into())).is_err());
        let s = oasis(HazardShape::Constant, HazardShape::Constant)
            .with_param("shapes", &GridValue::Text("increasing/decreasing".into()))
            .unwrap();
        assert_eq!(s, oasis(HazardShape::Increasing, HazardShape::Decreasing));
        let e = oasis(HazardShape::Constant, HazardShape::Constant)
            .with_param("shape1", &GridValue::Text("wobbly".into()))
            .unwrap_err();
        assert_eq!(e.field(), Some("shape1"));
    }

    #[test]
    fn single_cell_sweep_equals_evaluate() {
        let base = tuxedo(0.4);
        let t = sweep(&base, &[GridAxis::parse("rho=0.4").unwrap()]).unwrap();
        assert_eq!(t.cells.len(), 1);
        assert_eq!(t.cells[0].report.as_ref().unwrap(), &evaluate_spec(&base).unwrap());
        assert_eq!(t.trends[0].are, Trend::Insufficient);
    }

    #[test]
    fn infeasible_cells_are_kept() {
        let t = sweep(&tuxedo(0.1), &[GridAxis::parse("rho=0.5:0.8:0.1").unwrap()]).unwrap();
        assert_eq!(t.cells.len(), 4);
        assert!(t.cells[2].report.is_some());
        let bad = t.cells[3].infeasible.as_ref().unwrap();
        assert_eq!(bad.code, ErrorCode::InfeasibleAssociation);
        assert_eq!(bad.field.as_deref(), Some("rho"));
        assert!((bad.feasible_range.unwrap().1 - 0.726).abs() < 0.001);
        assert_eq!(t.trends[0].are, Trend::StrictlyDecreasing);
        assert_eq!(t.trends[0].evaluated, 3);
    }

    #[test]
    fn fully_infeasible_sweep_fails() {
        let e = sweep(&tuxedo(0.1), &[GridAxis::parse("rho=0.8,0.9").unwrap()]).unwrap_err();
        assert_eq!(e.field(), Some("grid"));
    }

    #[test]
    fn unknown_axis_fails() {
        let e = sweep(&tuxedo(0.1), &[GridAxis::parse("hr2=0.5,0.6").unwrap()]).unwrap_err();
        assert_eq!(e.field(), Some("hr2"));
    }

    #[test]
    fn two_axis_layout() {
        let t = sweep(
            &tuxedo(0.1),
            &[GridAxis::parse("rho=0.1,0.3,0.5").unwrap(), GridAxis::parse("delta2=0.005,0.0098").unwrap()],
        )
        .unwrap();
        assert_eq!(t.cells.len(), 6);
        let c = t.cell(&[2, 1]);
        assert_eq!(c.coordinates, vec![GridValue::Number(0.5), GridValue::Number(0.0098)]);
        assert_eq!(c.report.as_ref().unwrap(), &evaluate_spec(&tuxedo(0.5)).unwrap());
        assert_eq!(t.trends.len(), 2);
        assert!(t.trends.iter().all(|tr| tr.are == Trend::StrictlyDecreasing && tr.along == "rho"));
    }

    #[test]
    fn sweep_order_independent() {
        let a = sweep(&tuxedo(0.1), &[GridAxis::parse("rho=0.1,0.4,0.7").unwrap()]).unwrap();
        let b = sweep(&tuxedo(0.1), &[GridAxis::parse("rho=0.7,0.1,0.4").unwrap()]).unwrap();
        for cell in &a.cells {
            let twin = b.cells.iter().find(|c| c.coordinates == cell.coordinates).unwrap();
            assert_eq!(twin, cell);
        }
    }

    #[test]
    fn trend_classification() {
        assert_eq!(Trend::of(&[3.0, 2.0, 1.0]), Trend::StrictlyDecreasing);
        assert_eq!(Trend::of(&[1.0, 2.0]), Trend::StrictlyIncreasing);
        assert_eq!(Trend::of(&[1.0, 1.0]), Trend::Constant);
        assert_eq!(Trend::of(&[1.0, 2.0, 1.5]), Trend::NonMonotone);
        assert_eq!(Trend::of(&[]), Trend::Insufficient);
    }

    #[test]
    fn json_round_trip() {
        let t = sweep(&tuxedo(0.1), &[GridAxis::parse("rho=0.6:0.8:0.1").unwrap()]).unwrap();
        let text = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<SweepTable>(&text).unwrap(), t);
        let r = evaluate_spec(&oasis(HazardShape::Decreasing, HazardShape::Increasing)).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<DesignReport>(&text).unwrap(), r);
    }

    #[test]
    fn decision_flips_where_sizes_cross() {
        // A weak effect on ε₂ makes the composite lose efficiency as the
        // association grows; bisect on rho for the crossing.
        let spec = |rho: f64| {
            let mut s = tuxedo(rho);
            if let ScenarioSpec::Binary(b) = &mut s {
                b.delta2 = 0.008;
            }
            s
        };
        let are = |rho: f64| evaluate_spec(&spec(rho)).unwrap().are;
        let (mut lo, mut hi) = (0.0, 0.72);
        assert!(are(lo) > 1.0 && are(hi) < 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if are(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        for rho in [lo, hi] {
            let r = evaluate_spec(&spec(rho)).unwrap();
            let n_c = r.diagnostic("n_per_arm_composite_exact").unwrap();
            let n_r = r.diagnostic("n_per_arm_relevant_exact").unwrap();
            assert_eq!(r.recommendation == Endpoint::Composite, n_c < n_r);
        }
        assert_eq!(evaluate_spec(&spec(lo)).unwrap().recommendation, Endpoint::Composite);
        assert_eq!(evaluate_spec(&spec(hi)).unwrap().recommendation, Endpoint::Relevant);
    }
}
