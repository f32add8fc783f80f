//! Request and response documents shared by the HTTP service, the CLI and
//! the browser demo, plus a dispatcher from raw JSON bodies to results.
//!
//! Every front end goes through [`dispatch`], so the same body produces the
//! same result bytes everywhere.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::binary::{
    conditionals_from_correlation, correlation_bounds, correlation_from_conditional,
    correlation_from_conditional_eps2, joint_prob_from_correlation, sample_size_binary, sizing_binary,
    BinaryMarginals,
};
use crate::design::{Arm, Endpoint, Sidedness, TestDesign, VarianceVariant};
use crate::error::Error;
use crate::scenario::{
    evaluate, sweep, DesignReport, ErrorCode, GridAxis, Scenario, ScenarioModel, ScenarioSpec, SweepTable,
};
use crate::simulation::{
    binomial_se, sample_correlated_binary, sample_law_times, simulate_power_binary, simulate_power_law,
    PowerEstimate, SimConfig,
};
use crate::survival::{analyze, build_composite_law, freedman_sample_size, GumbelCopula};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Structured error with a machine-readable code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub feasible_range: Option<(f64, f64)>,
    /// The body was not JSON at all, as opposed to JSON with bad values.
    #[serde(skip)]
    pub malformed: bool,
}

impl ApiError {
    pub fn new(code: ErrorCode, field: Option<&str>, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            field: field.map(str::to_string),
            feasible_range: None,
            malformed: false,
        }
    }

    /// HTTP status for this error.
    pub fn status(&self) -> u16 {
        if self.malformed {
            return 400;
        }
        match self.code {
            ErrorCode::Validation | ErrorCode::InfeasibleAssociation | ErrorCode::UndetectableEffect => 422,
            ErrorCode::Busy => 429,
            ErrorCode::QuadratureFailure | ErrorCode::Internal => 500,
        }
    }

    fn from_json(e: serde_json::Error) -> Self {
        use serde_json::error::Category;
        let malformed = matches!(e.classify(), Category::Syntax | Category::Eof | Category::Io);
        // serde names the offending field in backticks.
        let field = if malformed {
            Some("body".to_string())
        } else {
            let msg = e.to_string();
            msg.split('`').nth(1).map(str::to_string).or(Some("body".into()))
        };
        ApiError {
            code: ErrorCode::Validation,
            message: e.to_string(),
            field,
            feasible_range: None,
            malformed,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError {
            code: ErrorCode::of(&e),
            field: e.field().map(str::to_string),
            feasible_range: e.feasible_range(),
            message: e.to_string(),
            malformed: false,
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code.as_str(), self.message)
    }
}

impl std::error::Error for ApiError {}

pub type ApiResult<T> = std::result::Result<T, ApiError>;

/// Response wrapper: exactly one of `result` and `error` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiEnvelope {
    pub request_id: String,
    pub elapsed_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<ApiError>,
}

impl ApiEnvelope {
    pub fn new(request_id: String, elapsed_ms: u64, outcome: ApiResult<Value>) -> Self {
        let (result, error) = match outcome {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e)),
        };
        ApiEnvelope {
            request_id,
            elapsed_ms,
            result,
            error,
        }
    }
}

/// Server-side limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Cap on subjects × replications for one simulation request.
    pub max_sim_draws: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_sim_draws: 1_000_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operation {
    Evaluate,
    Sweep,
    SampleSize,
    AssociationConvert,
    Simulate,
}

impl Operation {
    pub const ALL: [Operation; 5] = [
        Operation::Evaluate,
        Operation::Sweep,
        Operation::SampleSize,
        Operation::AssociationConvert,
        Operation::Simulate,
    ];

    pub fn path(self) -> &'static str {
        match self {
            Operation::Evaluate => "/v1/evaluate",
            Operation::Sweep => "/v1/sweep",
            Operation::SampleSize => "/v1/samplesize",
            Operation::AssociationConvert => "/v1/association/convert",
            Operation::Simulate => "/v1/simulate",
        }
    }
}

/// Runs one operation on a raw JSON body.
pub fn dispatch(op: Operation, body: &str, limits: &Limits) -> ApiResult<Value> {
    fn run<Req, Res>(body: &str, f: impl FnOnce(Req) -> ApiResult<Res>) -> ApiResult<Value>
    where
        Req: for<'de> Deserialize<'de>,
        Res: Serialize,
    {
        let res = f(parse_body(body)?)?;
        serde_json::to_value(res).map_err(|e| ApiError::new(ErrorCode::Internal, None, e.to_string()))
    }
    match op {
        Operation::Evaluate => run(body, |s: ScenarioSpec| evaluate_request(&s)),
        Operation::Sweep => run(body, |r: SweepRequest| sweep_request(&r)),
        Operation::SampleSize => run(body, |r: SampleSizeRequest| sample_size_request(&r)),
        Operation::AssociationConvert => run(body, |r: AssociationRequest| association_request(&r)),
        Operation::Simulate => run(body, |r: SimulateRequest| simulate_request(&r, limits)),
    }
}

/// Parses a request body. Syntax errors are flagged `malformed` (HTTP 400),
/// schema errors are plain validation errors naming the field.
pub fn parse_body<T: for<'de> Deserialize<'de>>(body: &str) -> ApiResult<T> {
    let value: Value = serde_json::from_str(body).map_err(ApiError::from_json)?;
    serde_json::from_value(value).map_err(ApiError::from_json)
}

pub fn evaluate_request(spec: &ScenarioSpec) -> ApiResult<DesignReport> {
    Ok(evaluate(&Scenario::new(spec.clone())?)?)
}

/// A grid axis given either as `"name=start:stop:step"` / `"name=v1,v2"` or
/// as `{"name": …, "values": […]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridInput {
    Text(String),
    Axis(GridAxis),
}

impl GridInput {
    pub fn to_axis(&self) -> crate::error::Result<GridAxis> {
        match self {
            GridInput::Text(t) => GridAxis::parse(t),
            GridInput::Axis(a) => Ok(a.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRequest {
    pub scenario: ScenarioSpec,
    pub grid: Vec<GridInput>,
}

pub fn sweep_request(req: &SweepRequest) -> ApiResult<SweepTable> {
    let axes = req.grid.iter().map(GridInput::to_axis).collect::<crate::error::Result<Vec<_>>>()?;
    Ok(sweep(&req.scenario, &axes)?)
}

fn default_alpha() -> f64 {
    0.05
}

fn default_power() -> f64 {
    0.80
}

/// Sample size either for a full scenario (composite and relevant endpoint)
/// or for a bare two-proportion or logrank comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleSizeRequest {
    Scenario(ScenarioSpec),
    Direct(DirectSampleSize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DirectSampleSize {
    Proportions {
        p_control: f64,
        p_treatment: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_power")]
        power: f64,
        #[serde(default)]
        sidedness: Sidedness,
        #[serde(default)]
        variance_variant: VarianceVariant,
    },
    Freedman {
        hr: f64,
        /// Probability of an event, averaged over the two arms.
        event_prob: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_power")]
        power: f64,
        #[serde(default)]
        sidedness: Sidedness,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointSize {
    /// `composite`, `relevant`, `proportions` or `freedman`.
    pub endpoint: String,
    pub per_arm_exact: f64,
    pub n_total: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub events: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSizeResult {
    pub sizes: Vec<EndpointSize>,
}

impl SampleSizeResult {
    pub fn get(&self, endpoint: &str) -> Option<&EndpointSize> {
        self.sizes.iter().find(|s| s.endpoint == endpoint)
    }
}

pub fn sample_size_request(req: &SampleSizeRequest) -> ApiResult<SampleSizeResult> {
    let size = |endpoint: &str, s: crate::binary::SampleSize, events: Option<f64>| EndpointSize {
        endpoint: endpoint.into(),
        per_arm_exact: s.per_arm_exact,
        n_total: s.n_total,
        events,
    };
    let sizes = match req {
        SampleSizeRequest::Scenario(spec) => match Scenario::new(spec.clone())?.model {
            ScenarioModel::Binary(input) => {
                let s = sizing_binary(&input)?;
                vec![size("composite", s.composite, None), size("relevant", s.relevant, None)]
            }
            ScenarioModel::Survival(scenario) => {
                let a = analyze(&scenario)?;
                vec![
                    size("composite", a.composite.sample_size, Some(a.composite.events)),
                    size("relevant", a.relevant.sample_size, Some(a.relevant.events)),
                ]
            }
        },
        SampleSizeRequest::Direct(DirectSampleSize::Proportions {
            p_control,
            p_treatment,
            alpha,
            power,
            sidedness,
            variance_variant,
        }) => {
            let design = TestDesign::new(*alpha, *power, *sidedness)?;
            let s = sample_size_binary(*p_control, *p_treatment, &design, *variance_variant)?;
            vec![size("proportions", s, None)]
        }
        SampleSizeRequest::Direct(DirectSampleSize::Freedman {
            hr,
            event_prob,
            alpha,
            power,
            sidedness,
        }) => {
            let design = TestDesign::new(*alpha, *power, *sidedness)?;
            let f = freedman_sample_size(*hr, *event_prob, &design)?;
            vec![size("freedman", f.sample_size, Some(f.events))]
        }
    };
    Ok(SampleSizeResult { sizes })
}

/// Converts between association measures. Binary: give `p1`, `p2` and at
/// most one of `rho`, `conditional_eps1_given_eps2`,
/// `conditional_eps2_given_eps1`; with none, only the bounds are returned.
/// Gumbel: give exactly one of `spearman_rho`, `theta`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssociationRequest {
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub rho: Option<f64>,
    pub conditional_eps1_given_eps2: Option<f64>,
    pub conditional_eps2_given_eps1: Option<f64>,
    pub spearman_rho: Option<f64>,
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AssociationResult {
    Binary {
        p1: f64,
        p2: f64,
        rho_min: f64,
        rho_max: f64,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        rho: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        p12: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        conditional_eps1_given_eps2: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        conditional_eps2_given_eps1: Option<f64>,
    },
    Gumbel {
        theta: f64,
        spearman_rho: f64,
        kendall_tau: f64,
    },
}

pub fn association_request(req: &AssociationRequest) -> ApiResult<AssociationResult> {
    let binary_given = [req.rho, req.conditional_eps1_given_eps2, req.conditional_eps2_given_eps1]
        .iter()
        .filter(|x| x.is_some())
        .count();
    let gumbel_given = [req.spearman_rho, req.theta].iter().filter(|x| x.is_some()).count();

    if gumbel_given > 0 {
        if binary_given > 0 || req.p1.is_some() || req.p2.is_some() || gumbel_given > 1 {
            return Err(ApiError::new(
                ErrorCode::Validation,
                Some("spearman_rho"),
                "give exactly one of spearman_rho or theta, without binary fields",
            ));
        }
        let copula = match (req.spearman_rho, req.theta) {
            (Some(rho), _) => GumbelCopula::from_spearman(rho).map_err(|e| e.with_field("spearman_rho"))?,
            (_, Some(theta)) => GumbelCopula::new(theta)?,
            _ => unreachable!(),
        };
        return Ok(AssociationResult::Gumbel {
            theta: copula.theta(),
            spearman_rho: copula.spearman_rho()?,
            kendall_tau: copula.kendall_tau(),
        });
    }

    let (Some(p1), Some(p2)) = (req.p1, req.p2) else {
        let field = if req.p1.is_none() { "p1" } else { "p2" };
        return Err(ApiError::new(ErrorCode::Validation, Some(field), "required for binary association"));
    };
    if binary_given > 1 {
        return Err(ApiError::new(
            ErrorCode::Validation,
            Some("rho"),
            "give at most one of rho, conditional_eps1_given_eps2, conditional_eps2_given_eps1",
        ));
    }
    let m = BinaryMarginals::new(p1, p2)?;
    let (rho_min, rho_max) = correlation_bounds(&m);
    let rho = match (req.rho, req.conditional_eps1_given_eps2, req.conditional_eps2_given_eps1) {
        (Some(r), _, _) => Some(r),
        (_, Some(c), _) => Some(correlation_from_conditional(&m, c)?),
        (_, _, Some(c)) => Some(correlation_from_conditional_eps2(&m, c)?),
        _ => None,
    };
    let (p12, c12, c21) = match rho {
        Some(r) => {
            let (c12, c21) = conditionals_from_correlation(&m, r)?;
            (Some(joint_prob_from_correlation(&m, r)?), Some(c12), Some(c21))
        }
        None => (None, None, None),
    };
    Ok(AssociationResult::Binary {
        p1,
        p2,
        rho_min,
        rho_max,
        rho,
        p12,
        conditional_eps1_given_eps2: c12,
        conditional_eps2_given_eps1: c21,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    /// Empirical power of the analysis test.
    #[default]
    Power,
    /// Empirical event frequencies against their closed forms.
    Frequencies,
}

fn default_endpoint() -> Endpoint {
    Endpoint::Composite
}

fn default_replications() -> u64 {
    1_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub mode: SimulationMode,
    #[serde(default = "default_endpoint")]
    pub endpoint: Endpoint,
    /// Trial size for power runs; defaults to the required size for the
    /// chosen endpoint. Sample size for frequency runs.
    pub n_total: Option<u64>,
    #[serde(default = "default_replications")]
    pub n_replications: u64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyCheck {
    pub name: String,
    pub empirical: f64,
    pub exact: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SimulateResult {
    Power {
        endpoint: Endpoint,
        n_total: u64,
        seed: u64,
        #[serde(flatten)]
        estimate: PowerEstimate,
    },
    Frequencies {
        n_subjects: u64,
        seed: u64,
        checks: Vec<FrequencyCheck>,
    },
}

/// Default frequency-run size when `n_total` is omitted.
const DEFAULT_FREQUENCY_SUBJECTS: u64 = 100_000;

pub fn simulate_request(req: &SimulateRequest, limits: &Limits) -> ApiResult<SimulateResult> {
    let scenario = Scenario::new(req.scenario.clone())?;
    if req.n_replications == 0 {
        return Err(ApiError::new(ErrorCode::Validation, Some("n_replications"), "must be positive"));
    }
    match req.mode {
        SimulationMode::Power => {
            let n_total = match req.n_total {
                Some(n) => n,
                None => {
                    let r = evaluate(&scenario)?;
                    match req.endpoint {
                        Endpoint::Composite => r.n_total_composite,
                        Endpoint::Relevant => r.n_total_relevant,
                    }
                }
            };
            check_budget(n_total, req.n_replications, limits)?;
            let config = SimConfig::new(n_total.max(1), req.n_replications, req.seed)?;
            let estimate = match &scenario.model {
                ScenarioModel::Binary(input) => simulate_power_binary(input, req.endpoint, n_total, &config)?,
                ScenarioModel::Survival(s) => {
                    let law = build_composite_law(s)?;
                    simulate_power_law(&law, s.eps1_terminal, &s.design, req.endpoint, n_total, &config)?
                }
            };
            Ok(SimulateResult::Power {
                endpoint: req.endpoint,
                n_total,
                seed: req.seed,
                estimate,
            })
        }
        SimulationMode::Frequencies => {
            let n = req.n_total.unwrap_or(DEFAULT_FREQUENCY_SUBJECTS);
            // One sample per arm.
            check_budget(n, 2, limits)?;
            let config = SimConfig::new(n, 1, req.seed)?;
            Ok(SimulateResult::Frequencies {
                n_subjects: n,
                seed: req.seed,
                checks: frequency_checks(&scenario, &config)?,
            })
        }
    }
}

fn check_budget(n: u64, reps: u64, limits: &Limits) -> ApiResult<()> {
    let draws = n.saturating_mul(reps);
    if draws > limits.max_sim_draws {
        return Err(ApiError::new(
            ErrorCode::Busy,
            Some("n_replications"),
            format!("{draws} simulated subjects exceed the limit of {}", limits.max_sim_draws),
        ));
    }
    Ok(())
}

fn check(name: &str, count: u64, n: u64, exact: f64) -> FrequencyCheck {
    FrequencyCheck {
        name: name.into(),
        empirical: count as f64 / n as f64,
        exact,
        standard_error: binomial_se(exact, n),
    }
}

fn frequency_checks(scenario: &Scenario, config: &SimConfig) -> crate::error::Result<Vec<FrequencyCheck>> {
    let n = config.n_subjects;
    let mut out = Vec::new();
    match &scenario.model {
        ScenarioModel::Binary(input) => {
            for arm in [Arm::Control, Arm::Treatment] {
                let (p1, p2) = input.arm_marginals(arm);
                if p1 <= 0.0 || p2 <= 0.0 {
                    continue;
                }
                let m = BinaryMarginals { p1, p2 };
                let counts = sample_correlated_binary(&m, input.rho, config)?;
                let p12 = joint_prob_from_correlation(&m, input.rho)?;
                out.push(check(&format!("{arm}.eps1"), counts.eps1(), n, p1));
                out.push(check(&format!("{arm}.eps2"), counts.eps2(), n, p2));
                out.push(check(&format!("{arm}.both"), counts.both, n, p12));
                out.push(check(&format!("{arm}.composite"), counts.composite(), n, p1 + p2 - p12));
            }
        }
        ScenarioModel::Survival(s) => {
            let law = build_composite_law(s)?;
            for arm in [Arm::Control, Arm::Treatment] {
                let pairs = sample_law_times(&law, arm, s.eps1_terminal, config)?;
                let [m1, _] = law.margins(arm);
                let eps1 = pairs.iter().filter(|p| p.t1 <= s.tau).count() as u64;
                let comp = pairs.iter().filter(|p| p.composite_event).count() as u64;
                out.push(check(&format!("{arm}.eps1"), eps1, n, m1.cdf(s.tau)));
                out.push(check(&format!("{arm}.composite"), comp, n, law.event_prob(arm)));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const WEAK: &str = r#"{"kind":"binary","label":"Weak","p1":0.059,"p2":0.032,"delta1":0.0196,"delta2":0.0098,"rho":0.1}"#;

    #[test]
    fn evaluate_dispatch() {
        let v = dispatch(Operation::Evaluate, WEAK, &Limits::default()).unwrap();
        assert!(v["are"].as_f64().unwrap() > 1.0);
        let n = v["n_total_composite"].as_u64().unwrap() as f64;
        assert!((n - 2187.0).abs() <= 0.05 * 2187.0);
        // Field order follows the struct.
        let text = serde_json::to_string(&v).unwrap();
        assert!(text.starts_with(r#"{"label":"Weak","kind":"binary","scenario":"#));
    }

    #[test]
    fn malformed_versus_invalid() {
        for body in ["", "{", "not json", "[1,"] {
            let e = dispatch(Operation::Evaluate, body, &Limits::default()).unwrap_err();
            assert_eq!(e.status(), 400, "{body:?}");
            assert_eq!(e.field.as_deref(), Some("body"));
        }
        let e = dispatch(Operation::Evaluate, r#"{"kind":"binary","p1":0.1}"#, &Limits::default()).unwrap_err();
        assert_eq!(e.status(), 422);
        assert_eq!(e.code, ErrorCode::Validation);
        assert_eq!(e.field.as_deref(), Some("p2"));
    }

    #[test]
    fn infeasible_rho_cites_bound() {
        let body = WEAK.replace(r#""rho":0.1"#, r#""rho":0.9"#);
        let e = dispatch(Operation::Evaluate, &body, &Limits::default()).unwrap_err();
        assert_eq!(e.status(), 422);
        assert_eq!(e.code, ErrorCode::InfeasibleAssociation);
        assert_eq!(e.field.as_deref(), Some("rho"));
        assert!((e.feasible_range.unwrap().1 - 0.726).abs() < 0.001);
        assert!(e.message.contains("0.72"));
    }

    #[test]
    fn association_conversion() {
        let r = association_request(&AssociationRequest {
            p1: Some(0.059),
            p2: Some(0.032),
            conditional_eps1_given_eps2: Some(0.58),
            ..Default::default()
        })
        .unwrap();
        let AssociationResult::Binary { rho, rho_max, .. } = r else { panic!() };
        assert!((rho.unwrap() - 0.4).abs() < 0.01);
        assert!((rho_max - 0.726).abs() < 0.001);

        let bounds = dispatch(Operation::AssociationConvert, r#"{"p1":0.059,"p2":0.032}"#, &Limits::default()).unwrap();
        assert!(bounds.get("rho").is_none());

        let g = dispatch(Operation::AssociationConvert, r#"{"spearman_rho":0.7}"#, &Limits::default()).unwrap();
        assert_eq!(g["kind"], "gumbel");
        assert!((g["theta"].as_f64().unwrap() - 2.0655).abs() < 1e-3);

        let e = dispatch(Operation::AssociationConvert, r#"{"p1":0.1,"p2":0.1,"rho":0.1,"theta":2}"#, &Limits::default())
            .unwrap_err();
        assert_eq!(e.status(), 422);
    }

    #[test]
    fn sample_size_variants() {
        let strong = WEAK.replace(r#""rho":0.1"#, r#""rho":0.7"#);
        let v = dispatch(Operation::SampleSize, &strong, &Limits::default()).unwrap();
        let n = v["sizes"][0]["n_total"].as_f64().unwrap();
        assert_eq!(v["sizes"][0]["endpoint"], "composite");
        assert!((n - 3076.0).abs() <= 0.05 * 3076.0);

        let v = dispatch(
            Operation::SampleSize,
            r#"{"kind":"proportions","p_control":0.3,"p_treatment":0.2,"variance_variant":"unpooled"}"#,
            &Limits::default(),
        )
        .unwrap();
        assert_eq!(v["sizes"][0]["endpoint"], "proportions");

        let v = dispatch(Operation::SampleSize, r#"{"kind":"freedman","hr":0.7,"event_prob":0.2}"#, &Limits::default())
            .unwrap();
        assert!(v["sizes"][0]["events"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn sweep_with_mixed_grid_syntax() {
        let body = format!(r#"{{"scenario":{WEAK},"grid":["rho=0.1:0.3:0.1",{{"name":"delta2","values":[0.005,0.0098]}}]}}"#);
        let v = dispatch(Operation::Sweep, &body, &Limits::default()).unwrap();
        assert_eq!(v["cells"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn simulate_is_deterministic_and_capped() {
        let body = format!(r#"{{"scenario":{WEAK},"n_total":500,"n_replications":200,"seed":11}}"#);
        let a = serde_json::to_string(&dispatch(Operation::Simulate, &body, &Limits::default()).unwrap()).unwrap();
        let b = serde_json::to_string(&dispatch(Operation::Simulate, &body, &Limits::default()).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(a.contains(r#""mode":"power""#) && a.contains(r#""power_hat":"#));

        let e = dispatch(Operation::Simulate, &body, &Limits { max_sim_draws: 1000 }).unwrap_err();
        assert_eq!(e.code, ErrorCode::Busy);
        assert_eq!(e.status(), 429);
    }

    #[test]
    fn frequency_mode() {
        let body = format!(r#"{{"scenario":{WEAK},"mode":"frequencies","n_total":200000,"seed":5}}"#);
        let v = dispatch(Operation::Simulate, &body, &Limits::default()).unwrap();
        let checks: Vec<FrequencyCheck> = serde_json::from_value(v["checks"].clone()).unwrap();
        assert_eq!(checks.len(), 8);
        for c in &checks {
            assert!((c.empirical - c.exact).abs() <= 4.0 * c.standard_error, "{c:?}");
        }
    }

    #[test]
    fn envelope_has_one_of_result_or_error() {
        let ok = ApiEnvelope::new("a".into(), 1, Ok(Value::from(1)));
        let text = serde_json::to_string(&ok).unwrap();
        assert_eq!(text, r#"{"request_id":"a","elapsed_ms":1,"result":1}"#);
        let err = ApiEnvelope::new("b".into(), 2, Err(ApiError::new(ErrorCode::Internal, None, "x")));
        let text = serde_json::to_string(&err).unwrap();
        assert_eq!(text, r#"{"request_id":"b","elapsed_ms":2,"error":{"code":"INTERNAL","message":"x"}}"#);
    }
}
