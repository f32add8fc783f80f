use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use compare_kit::api::{
    dispatch, evaluate_request, parse_body, sweep_request, ApiError, GridInput, Limits, Operation, SweepRequest,
};
use compare_kit::scenario::{render_report, render_reports, render_table, ErrorCode, OutputFormat, ScenarioSpec};
use serde_json::{Map, Value};

/// Composite endpoint design: ARE, sample size and simulation.
#[derive(Parser)]
#[command(name = "compare-kit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one or more scenarios.
    Evaluate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Evaluate a scenario over a grid of parameter values.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// `name=start:stop:step` or `name=v1,v2,…`; one or two axes.
        #[arg(long, required = true)]
        grid: Vec<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Required sample size for a scenario, or for a bare comparison with
    /// `--kind proportions` or `--kind freedman`.
    Samplesize {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        p_control: Option<f64>,
        #[arg(long)]
        p_treatment: Option<f64>,
        #[arg(long)]
        hr: Option<f64>,
        #[arg(long)]
        event_prob: Option<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Convert between association measures.
    Associate {
        #[arg(long)]
        p1: Option<f64>,
        #[arg(long)]
        p2: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        rho: Option<f64>,
        #[arg(long)]
        conditional_eps1_given_eps2: Option<f64>,
        #[arg(long)]
        conditional_eps2_given_eps1: Option<f64>,
        #[arg(long)]
        spearman_rho: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Fréchet bounds on the correlation of two binary endpoints.
    Bounds {
        #[arg(long)]
        p1: f64,
        #[arg(long)]
        p2: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Monte Carlo power or event-frequency check.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// `power` or `frequencies`.
        #[arg(long, default_value = "power")]
        mode: String,
        /// `composite` or `relevant`.
        #[arg(long, default_value = "composite")]
        endpoint: String,
        #[arg(long)]
        n_total: Option<u64>,
        #[arg(long, default_value_t = 1000)]
        replications: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "MAX_SIM_DRAWS", default_value_t = Limits::default().max_sim_draws)]
        max_draws: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run the HTTP service (configured by BIND_ADDR, MAX_SIM_DRAWS,
    /// CORS_ORIGIN, LOG_LEVEL).
    Serve {
        /// Overrides BIND_ADDR.
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Args)]
struct OutputArgs {
    /// json, csv, markdown or svg.
    #[arg(long, default_value = "json")]
    format: String,
    /// Write here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Scenario from files, inline flags, or files overridden by flags.
#[derive(Args, Default)]
struct ScenarioArgs {
    /// Scenario JSON file; repeat for several rows.
    #[arg(long)]
    scenario: Vec<PathBuf>,
    /// binary or survival (inferred when omitted).
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    delta1: Option<f64>,
    #[arg(long)]
    delta2: Option<f64>,
    #[arg(long)]
    hr1: Option<f64>,
    #[arg(long)]
    hr2: Option<f64>,
    /// constant, increasing, decreasing or a Weibull shape.
    #[arg(long)]
    shape1: Option<String>,
    #[arg(long)]
    shape2: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    eps1_terminal: Option<bool>,
    #[arg(long)]
    copula_orientation: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    power: Option<f64>,
    #[arg(long)]
    sidedness: Option<String>,
    #[arg(long)]
    variance_variant: Option<String>,
}

enum CliError {
    Api(ApiError),
    Io(String),
}

impl From<ApiError> for CliError {
    fn from(e: ApiError) -> Self {
        CliError::Api(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Api(e) => match e.code {
                ErrorCode::QuadratureFailure | ErrorCode::Internal => 3,
                _ => 2,
            },
        }
    }
}

fn validation(field: &str, msg: impl Into<String>) -> CliError {
    CliError::Api(ApiError::new(ErrorCode::Validation, Some(field), msg))
}

fn put(map: &mut Map<String, Value>, key: &str, v: Option<impl Into<Value>>) {
    if let Some(v) = v {
        map.insert(key.into(), v.into());
    }
}

impl ScenarioArgs {
    fn overrides(&self) -> Map<String, Value> {
        let mut m = Map::new();
        put(&mut m, "kind", self.kind.clone());
        put(&mut m, "label", self.label.clone());
        for (k, v) in [
            ("p1", self.p1),
            ("p2", self.p2),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("hr1", self.hr1),
            ("hr2", self.hr2),
            ("rho", self.rho),
            ("tau", self.tau),
            ("alpha", self.alpha),
            ("power", self.power),
        ] {
            put(&mut m, k, v);
        }
        for (k, v) in [("shape1", &self.shape1), ("shape2", &self.shape2)] {
            if let Some(s) = v {
                let value = s.parse::<f64>().map(Value::from).unwrap_or_else(|_| Value::from(s.as_str()));
                m.insert(k.into(), value);
            }
        }
        put(&mut m, "eps1_terminal", self.eps1_terminal);
        put(&mut m, "copula_orientation", self.copula_orientation.clone());
        put(&mut m, "sidedness", self.sidedness.clone());
        put(&mut m, "variance_variant", self.variance_variant.clone());
        m
    }

    /// One JSON body per scenario file, or one built from flags.
    fn bodies(&self) -> Result<Vec<String>, CliError> {
        let overrides = self.overrides();
        let mut bases = Vec::new();
        for path in &self.scenario {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            if overrides.is_empty() {
                // Pass files through untouched.
                bases.push(text);
                continue;
            }
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(mut m)) => {
                    m.extend(overrides.clone());
                    bases.push(Value::Object(m).to_string());
                }
                Ok(_) => return Err(validation("scenario", format!("{}: expected a JSON object", path.display()))),
                Err(e) => return Err(validation("scenario", format!("{}: {e}", path.display()))),
            }
        }
        if bases.is_empty() {
            let mut m = overrides;
            if !m.contains_key("kind") {
                let survival = ["hr1", "hr2", "shape1", "shape2"].iter().any(|k| m.contains_key(*k));
                m.insert("kind".into(), if survival { "survival" } else { "binary" }.into());
            }
            bases.push(Value::Object(m).to_string());
        }
        Ok(bases)
    }

    fn single(&self) -> Result<String, CliError> {
        let mut b = self.bodies()?;
        if b.len() != 1 {
            return Err(validation("scenario", "expected exactly one scenario"));
        }
        Ok(b.remove(0))
    }
}

fn format_of(out: &OutputArgs) -> Result<OutputFormat, CliError> {
    out.format.parse().map_err(|e: compare_kit::Error| CliError::Api(e.into()))
}

fn json(v: &Value) -> String {
    v.to_string()
}

/// Key/value rendering for the small result documents.
fn render_flat(v: &Value, format: OutputFormat) -> Result<String, CliError> {
    let mut rows = Vec::new();
    flatten("", v, &mut rows);
    match format {
        OutputFormat::Json => Ok(json(v)),
        OutputFormat::Markdown => {
            let mut s = String::from("| field | value |\n|---|---|\n");
            for (k, v) in rows {
                s.push_str(&format!("| {k} | {v} |\n"));
            }
            Ok(s)
        }
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            let io = |e: csv::Error| CliError::Io(e.to_string());
            w.write_record(["field", "value"]).map_err(io)?;
            for (k, v) in rows {
                w.write_record([k, v]).map_err(io)?;
            }
            String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?)
                .map_err(|e| CliError::Io(e.to_string()))
        }
        OutputFormat::Svg => Err(validation("format", "svg is only available for sweeps")),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, out)),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn run(cmd: Command) -> Result<Option<(String, OutputArgs)>, CliError> {
    let limits = Limits::default();
    let result = match cmd {
        Command::Evaluate { scenario, out } => {
            let format = format_of(&out)?;
            let bodies = scenario.bodies()?;
            let text = if format == OutputFormat::Json && bodies.len() == 1 {
                json(&dispatch(Operation::Evaluate, &bodies[0], &limits)?)
            } else {
                let reports = bodies
                    .iter()
                    .map(|b| evaluate_request(&parse_body::<ScenarioSpec>(b)?))
                    .collect::<Result<Vec<_>, _>>()?;
                if reports.len() == 1 {
                    render_report(&reports[0], format)
                } else {
                    render_reports(&reports, format)
                }
                .map_err(|e| CliError::Api(e.into()))?
            };
            (text, out)
        }
        Command::Sweep { scenario, grid, out } => {
            let format = format_of(&out)?;
            let spec: ScenarioSpec = parse_body(&scenario.single()?)?;
            let req = SweepRequest {
                scenario: spec,
                grid: grid.into_iter().map(GridInput::Text).collect(),
            };
            let text = if format == OutputFormat::Json {
                let body = serde_json::to_string(&req).map_err(|e| CliError::Io(e.to_string()))?;
                json(&dispatch(Operation::Sweep, &body, &limits)?)
            } else {
                render_table(&sweep_request(&req)?, format).map_err(|e| CliError::Api(e.into()))?
            };
            (text, out)
        }
        Command::Samplesize {
            scenario,
            p_control,
            p_treatment,
            hr,
            event_prob,
            out,
        } => {
            let format = format_of(&out)?;
            let body = match scenario.kind.as_deref() {
                Some("proportions" | "freedman") => {
                    let mut m = Map::new();
                    put(&mut m, "kind", scenario.kind.clone());
                    put(&mut m, "p_control", p_control);
                    put(&mut m, "p_treatment", p_treatment);
                    put(&mut m, "hr", hr);
                    put(&mut m, "event_prob", event_prob);
                    put(&mut m, "alpha", scenario.alpha);
                    put(&mut m, "power", scenario.power);
                    put(&mut m, "sidedness", scenario.sidedness.clone());
                    if scenario.kind.as_deref() == Some("proportions") {
                        put(&mut m, "variance_variant", scenario.variance_variant.clone());
                    }
                    Value::Object(m).to_string()
                }
                _ => scenario.single()?,
            };
            (render_flat(&dispatch(Operation::SampleSize, &body, &limits)?, format)?, out)
        }
        Command::Associate {
            p1,
            p2,
            rho,
            conditional_eps1_given_eps2,
            conditional_eps2_given_eps1,
            spearman_rho,
            theta,
            out,
        } => {
            let format = format_of(&out)?;
            let mut m = Map::new();
            put(&mut m, "p1", p1);
            put(&mut m, "p2", p2);
            put(&mut m, "rho", rho);
            put(&mut m, "conditional_eps1_given_eps2", conditional_eps1_given_eps2);
            put(&mut m, "conditional_eps2_given_eps1", conditional_eps2_given_eps1);
            put(&mut m, "spearman_rho", spearman_rho);
            put(&mut m, "theta", theta);
            let v = dispatch(Operation::AssociationConvert, &Value::Object(m).to_string(), &limits)?;
            (render_flat(&v, format)?, out)
        }
        Command::Bounds { p1, p2, out } => {
            let format = format_of(&out)?;
            let body = serde_json::json!({ "p1": p1, "p2": p2 }).to_string();
            let v = dispatch(Operation::AssociationConvert, &body, &limits)?;
            (render_flat(&v, format)?, out)
        }
        Command::Simulate {
            scenario,
            mode,
            endpoint,
            n_total,
            replications,
            seed,
            max_draws,
            out,
        } => {
            let format = format_of(&out)?;
            let spec: Value = serde_json::from_str(&scenario.single()?)
                .map_err(|e| validation("scenario", e.to_string()))?;
            let mut m = Map::new();
            m.insert("scenario".into(), spec);
            m.insert("mode".into(), mode.into());
            m.insert("endpoint".into(), endpoint.into());
            put(&mut m, "n_total", n_total);
            m.insert("n_replications".into(), replications.into());
            m.insert("seed".into(), seed.into());
            let limits = Limits {
                max_sim_draws: max_draws,
            };
            let v = dispatch(Operation::Simulate, &Value::Object(m).to_string(), &limits)?;
            (render_flat(&v, format)?, out)
        }
        Command::Serve { bind } => {
            let mut config = compare_kit_service::Config::from_env().map_err(|e| validation("env", e))?;
            if let Some(b) = bind {
                config.bind_addr = b.parse().map_err(|e| validation("bind", format!("`{b}`: {e}")))?;
            }
            compare_kit_service::run(config).map_err(|e| CliError::Io(e.to_string()))?;
            return Ok(None);
        }
    };
    Ok(Some(result))
}

fn limit_threads() {
    let Ok(v) = std::env::var("COMPARE_KIT_THREADS") else { return };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("warning: ignoring COMPARE_KIT_THREADS={v}"),
    }
}

fn main() -> ExitCode {
    limit_threads();
    let cli = Cli::parse();
    let json_errors = match &cli.command {
        Command::Evaluate { out, .. }
        | Command::Sweep { out, .. }
        | Command::Samplesize { out, .. }
        | Command::Associate { out, .. }
        | Command::Bounds { out, .. }
        | Command::Simulate { out, .. } => out.format == "json",
        Command::Serve { .. } => false,
    };
    match run(cli.command) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some((mut text, out))) => {
            if !text.ends_with('\n') {
                text.push('\n');
            }
            let written = match &out.output {
                Some(path) => fs::write(path, &text).map_err(|e| format!("{}: {e}", path.display())),
                None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Err(err) => {
            match &err {
                CliError::Io(msg) => eprintln!("error: {msg}"),
                CliError::Api(e) => {
                    match &e.field {
                        Some(f) => eprintln!("error: {} ({f}): {}", e.code.as_str(), e.message),
                        None => eprintln!("error: {}: {}", e.code.as_str(), e.message),
                    }
                    if json_errors {
                        println!("{}", serde_json::json!({ "error": e }));
                    }
                }
            }
            ExitCode::from(err.exit_code())
        }
    }
}
