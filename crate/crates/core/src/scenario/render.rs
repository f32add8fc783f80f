//! Text renderings of reports and sweep tables.
//!
//! JSON keeps full precision. Markdown rounds for display: probabilities to
//! 2 decimals, risk reductions to 1 decimal in percentage points, sample
//! sizes to integers with thousands separators.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{DesignReport, EffectMeasure, ScenarioKind, ScenarioSpec, SweepTable};
use crate::design::Endpoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Markdown,
    Svg,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(Error::validation("format", format!("unknown format `{other}`"))),
        }
    }
}

pub fn render_report(report: &DesignReport, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => Ok(to_json(report)),
        _ => render_reports(std::slice::from_ref(report), format),
    }
}

/// Renders several reports as one table (JSON: an array).
pub fn render_reports(reports: &[DesignReport], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => Ok(to_json(&reports)),
        OutputFormat::Csv => reports_csv(reports),
        OutputFormat::Markdown => Ok(reports_markdown(reports)),
        OutputFormat::Svg => Err(Error::validation("format", "svg output is available for sweeps only")),
    }
}

pub fn render_table(table: &SweepTable, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => Ok(to_json(table)),
        OutputFormat::Csv => table_csv(table),
        OutputFormat::Markdown => Ok(table_markdown(table)),
        OutputFormat::Svg => Ok(table_svg(table)),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("report types serialize")
}

fn recommendation(e: Endpoint) -> &'static str {
    match e {
        Endpoint::Composite => "composite",
        Endpoint::Relevant => "relevant",
    }
}

fn effect_measure(m: EffectMeasure) -> &'static str {
    match m {
        EffectMeasure::RiskDifference => "risk_difference",
        EffectMeasure::HazardRatio => "hazard_ratio",
    }
}

/// Diagnostic names in order of first appearance.
fn diagnostic_names<'a>(reports: impl Iterator<Item = &'a DesignReport>) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in reports {
        for d in &r.diagnostics {
            if !names.contains(&d.name) {
                names.push(d.name.clone());
            }
        }
    }
    names
}

const REPORT_COLUMNS: [&str; 11] = [
    "label",
    "kind",
    "association",
    "p_star_control",
    "p_star_treatment",
    "effect_star",
    "effect_measure",
    "are",
    "recommendation",
    "n_total_composite",
    "n_total_relevant",
];

fn report_fields(r: &DesignReport, diagnostics: &[String]) -> Vec<String> {
    let mut row = vec![
        r.label.clone(),
        r.kind.label().to_string(),
        r.association.to_string(),
        r.p_star_control.to_string(),
        r.p_star_treatment.to_string(),
        r.effect_star.to_string(),
        effect_measure(r.effect_measure).to_string(),
        r.are.to_string(),
        recommendation(r.recommendation).to_string(),
        r.n_total_composite.to_string(),
        r.n_total_relevant.to_string(),
    ];
    row.extend(diagnostics.iter().map(|n| r.diagnostic(n).map(|v| v.to_string()).unwrap_or_default()));
    row
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::validation("format", format!("csv output failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv fields are UTF-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::validation("format", format!("csv output failed: {e}"))
}

fn reports_csv(reports: &[DesignReport]) -> Result<String> {
    let diagnostics = diagnostic_names(reports.iter());
    let mut w = csv_writer();
    let header: Vec<&str> = REPORT_COLUMNS.iter().copied().chain(diagnostics.iter().map(String::as_str)).collect();
    w.write_record(&header).map_err(csv_err)?;
    for r in reports {
        w.write_record(report_fields(r, &diagnostics)).map_err(csv_err)?;
    }
    finish(w)
}

fn table_csv(table: &SweepTable) -> Result<String> {
    let diagnostics = diagnostic_names(table.cells.iter().filter_map(|c| c.report.as_ref()));
    let mut w = csv_writer();
    let mut header: Vec<&str> = table.axes.iter().map(|a| a.name.as_str()).collect();
    header.push("status");
    header.extend(REPORT_COLUMNS);
    header.extend(diagnostics.iter().map(String::as_str));
    header.extend(["error_code", "error_field", "error_message"]);
    w.write_record(&header).map_err(csv_err)?;
    let blank = REPORT_COLUMNS.len() + diagnostics.len();
    for cell in &table.cells {
        let mut row: Vec<String> = cell.coordinates.iter().map(|v| v.to_string()).collect();
        match (&cell.report, &cell.infeasible) {
            (Some(r), _) => {
                row.push("evaluated".into());
                row.extend(report_fields(r, &diagnostics));
                row.extend([String::new(), String::new(), String::new()]);
            }
            (None, Some(e)) => {
                row.push("infeasible".into());
                row.extend(std::iter::repeat_n(String::new(), blank));
                row.push(e.code.as_str().into());
                row.push(e.field.clone().unwrap_or_default());
                row.push(e.message.clone());
            }
            (None, None) => unreachable!("sweep cells carry a report or a reason"),
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

/// `1234567` → `1,234,567`.
pub fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Fixed decimals with trailing zeros trimmed: `0.10` → `0.1`.
fn trimmed(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn markdown_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::from("|");
        for c in cells {
            s.push(' ');
            s.push_str(&c.replace('|', "\\|"));
            s.push_str(" |");
        }
        s.push('\n');
        s
    };
    out.push_str(&line(&mut header.iter().copied()));
    out.push_str(&line(&mut header.iter().map(|_| "---")));
    for row in rows {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
    }
    out
}

fn effect_display(r: &DesignReport) -> String {
    match r.effect_measure {
        EffectMeasure::RiskDifference => format!("{:.1}", 100.0 * r.effect_star),
        EffectMeasure::HazardRatio => format!("{:.3}", r.effect_star),
    }
}

fn shapes(r: &DesignReport) -> (String, String) {
    match &r.scenario {
        ScenarioSpec::Survival(s) => (s.shape1.label(), s.shape2.label()),
        ScenarioSpec::Binary(_) => (String::new(), String::new()),
    }
}

fn reports_markdown(reports: &[DesignReport]) -> String {
    let all = |kind| reports.iter().all(|r| r.kind == kind);
    if all(ScenarioKind::Binary) {
        let header = [
            "Association",
            "Correlation",
            "Conditional probability ε₁ given ε₂",
            "Conditional probability ε₂ given ε₁",
            "Probability of observing ε*",
            "Percentage-point absolute reduction ε*",
            "Total Sample Size",
        ];
        let rows: Vec<Vec<String>> = reports
            .iter()
            .map(|r| {
                let cond = |name| r.diagnostic(name).map(|v| format!("{v:.2}")).unwrap_or_default();
                vec![
                    r.label.clone(),
                    trimmed(r.association, 3),
                    cond("conditional_eps1_given_eps2"),
                    cond("conditional_eps2_given_eps1"),
                    format!("{:.2}", r.p_star_control),
                    effect_display(r),
                    thousands(r.n_total_composite),
                ]
            })
            .collect();
        markdown_table(&header, &rows)
    } else if all(ScenarioKind::Survival) {
        let header = ["Scenario", "Hazard of ε₁", "Hazard of ε₂", "Spearman's rho", "ARE", "Total Sample Size"];
        let rows: Vec<Vec<String>> = reports
            .iter()
            .map(|r| {
                let (s1, s2) = shapes(r);
                vec![
                    r.label.clone(),
                    s1,
                    s2,
                    trimmed(r.association, 3),
                    format!("{:.2}", r.are),
                    thousands(r.n_total_composite),
                ]
            })
            .collect();
        markdown_table(&header, &rows)
    } else {
        let header = [
            "Scenario",
            "Kind",
            "Association",
            "Probability of observing ε*",
            "Effect ε*",
            "ARE",
            "Recommendation",
            "Total Sample Size",
        ];
        let rows: Vec<Vec<String>> = reports
            .iter()
            .map(|r| {
                vec![
                    r.label.clone(),
                    r.kind.label().into(),
                    trimmed(r.association, 3),
                    format!("{:.2}", r.p_star_control),
                    effect_display(r),
                    format!("{:.2}", r.are),
                    recommendation(r.recommendation).into(),
                    thousands(r.n_total_composite),
                ]
            })
            .collect();
        markdown_table(&header, &rows)
    }
}

fn table_markdown(table: &SweepTable) -> String {
    let effect = match table.kind {
        ScenarioKind::Binary => "Percentage-point absolute reduction ε*",
        ScenarioKind::Survival => "Average hazard ratio ε*",
    };
    let mut header: Vec<&str> = table.axes.iter().map(|a| a.name.as_str()).collect();
    header.extend(["Probability of observing ε*", effect, "ARE", "Recommendation", "Total Sample Size"]);
    let rows: Vec<Vec<String>> = table
        .cells
        .iter()
        .map(|cell| {
            let mut row: Vec<String> = cell.coordinates.iter().map(|v| v.to_string()).collect();
            match (&cell.report, &cell.infeasible) {
                (Some(r), _) => row.extend([
                    format!("{:.2}", r.p_star_control),
                    effect_display(r),
                    format!("{:.2}", r.are),
                    recommendation(r.recommendation).into(),
                    thousands(r.n_total_composite),
                ]),
                (None, Some(e)) => {
                    row.push(format!("infeasible: {}", e.message));
                    row.extend(std::iter::repeat_n(String::new(), 4));
                }
                (None, None) => unreachable!("sweep cells carry a report or a reason"),
            }
            row
        })
        .collect();
    let mut out = markdown_table(&header, &rows);
    for t in &table.trends {
        let at = t.at.as_ref().map(|(n, v)| format!(" at {n} = {v}")).unwrap_or_default();
        let _ = writeln!(out, "\nARE along {}{at}: {:?}", t.along, t.are);
    }
    out
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() * step;
    (0..)
        .map(|i| first + i as f64 * step)
        .take_while(|v| *v <= hi + 1e-9 * span)
        .collect()
}

fn table_svg(table: &SweepTable) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (64.0, 170.0, 36.0, 52.0);
    let along = table.trend_axis();
    let axis = &table.axes[along];
    let numeric: Option<Vec<f64>> = axis.values.iter().map(|v| v.as_f64()).collect();
    let xs: Vec<f64> = numeric.clone().unwrap_or_else(|| (0..axis.values.len()).map(|i| i as f64).collect());

    let series_count = if table.axes.len() == 2 { table.axes[1 - along].values.len() } else { 1 };
    let mut series: Vec<(String, Vec<Option<(f64, f64)>>)> = Vec::new();
    for j in 0..series_count {
        let name = if table.axes.len() == 2 {
            let other = &table.axes[1 - along];
            format!("{} = {}", other.name, other.values[j])
        } else {
            "ARE".to_string()
        };
        let points = (0..xs.len())
            .map(|i| {
                let mut idx = vec![0; table.axes.len()];
                idx[along] = i;
                if table.axes.len() == 2 {
                    idx[1 - along] = j;
                }
                table.cell(&idx).report.as_ref().map(|r| (xs[i], r.are))
            })
            .collect();
        series.push((name, points));
    }

    let ys: Vec<f64> = series.iter().flat_map(|s| s.1.iter().flatten().map(|p| p.1)).collect();
    let (mut y_lo, mut y_hi) = ys.iter().fold((1.0f64, 1.0f64), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    let pad = 0.05 * (y_hi - y_lo).max(0.1);
    y_lo -= pad;
    y_hi += pad;
    let (x_lo, x_hi) = (xs.iter().copied().fold(f64::INFINITY, f64::min), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let x_span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };
    let px = |x: f64| left + (x - x_lo) / x_span * (w - left - right);
    let py = |y: f64| top + (y_hi - y) / (y_hi - y_lo) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let title = if table.label.is_empty() { "ARE".to_string() } else { format!("{}: ARE", table.label) };
    let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="14">{}</text>"#, escape(&title));
    let (x0, x1, y0, y1) = (left, w - right, top, h - bottom);
    let _ = writeln!(s, r#"<path d="M{x0},{y0}V{y1}H{x1}" fill="none" stroke="black"/>"#);
    for t in ticks(y_lo, y_hi) {
        let y = py(t);
        let _ = writeln!(s, r##"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}" stroke="#e0e0e0"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 6.0, y + 4.0, trimmed(t, 3));
    }
    let x_ticks: Vec<(f64, String)> = match &numeric {
        Some(_) => ticks(x_lo, x_hi).into_iter().map(|t| (t, trimmed(t, 3))).collect(),
        None => axis.values.iter().enumerate().map(|(i, v)| (i as f64, v.to_string())).collect(),
    };
    for (t, label) in x_ticks {
        let x = px(t);
        let _ = writeln!(s, r#"<line x1="{x:.1}" y1="{y1}" x2="{x:.1}" y2="{}" stroke="black"/>"#, y1 + 4.0);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"#, y1 + 18.0, escape(&label));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, h - 12.0, escape(&axis.name));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">ARE</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    let one = py(1.0);
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{one:.1}" x2="{x1}" y2="{one:.1}" stroke="gray" stroke-dasharray="4 3"/>"#
    );
    for (k, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        // Break the line at infeasible cells.
        for run in points.split(|p| p.is_none()).filter(|r| !r.is_empty()) {
            let d: Vec<String> = run
                .iter()
                .flatten()
                .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
                .collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, d.join(" "));
        }
        let ly = top + 16.0 * k as f64 + 8.0;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, x1 + 16.0, x1 + 36.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x1 + 42.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{evaluate_spec, sweep, tests::tuxedo, BinarySpec, Diagnostic, GridAxis};

    fn labelled(label: &str, rho: f64) -> DesignReport {
        let mut spec = tuxedo(rho);
        if let ScenarioSpec::Binary(BinarySpec { label: l, .. }) = &mut spec {
            *l = label.into();
        }
        evaluate_spec(&spec).unwrap()
    }

    #[test]
    fn table_one_layout() {
        let reports = [labelled("Weak", 0.1), labelled("Moderate", 0.4), labelled("Strong", 0.7)];
        let md = render_reports(&reports, OutputFormat::Markdown).unwrap();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("| Association | Correlation |"));
        assert!(lines[0].ends_with("| Total Sample Size |"));
        for line in &lines {
            assert_eq!(line.matches(" |").count(), 7, "{line}");
        }
        assert!(lines[2].starts_with("| Weak | 0.1 | 0.19 | 0.10 | 0.08 | 2.7 | 2,"), "{}", lines[2]);
        assert!(lines[3].starts_with("| Moderate | 0.4 | 0.58 | 0.31 | 0.07 | 2.3 | 2,"), "{}", lines[3]);
    }

    #[test]
    fn csv_omits_empty_diagnostics() {
        let mut r = labelled("Weak", 0.1);
        let with = render_report(&r, OutputFormat::Csv).unwrap();
        assert!(with.lines().next().unwrap().ends_with("n_per_arm_relevant_exact"));
        r.diagnostics.clear();
        let without = render_report(&r, OutputFormat::Csv).unwrap();
        assert!(without.lines().next().unwrap().ends_with("n_total_relevant"));
        assert_eq!(without.lines().count(), 2);
        assert!(!without.contains('\r'));
    }

    #[test]
    fn csv_diagnostic_union() {
        let mut a = labelled("a", 0.1);
        let b = labelled("b", 0.2);
        a.diagnostics = vec![Diagnostic {
            name: "extra".into(),
            value: 1.5,
        }];
        let csv = render_reports(&[a, b], OutputFormat::Csv).unwrap();
        let header = csv.lines().next().unwrap();
        assert!(header.ends_with(",extra,conditional_eps1_given_eps2,conditional_eps2_given_eps1,p12_control,n_per_arm_composite_exact,n_per_arm_relevant_exact"));
        let row = csv.lines().nth(1).unwrap();
        assert!(row.ends_with(",1.5,,,,,"), "{row}");
    }

    #[test]
    fn json_round_trips_exactly() {
        let r = labelled("Weak", 0.1);
        let text = render_report(&r, OutputFormat::Json).unwrap();
        assert_eq!(serde_json::from_str::<DesignReport>(&text).unwrap(), r);
        let list = render_reports(std::slice::from_ref(&r), OutputFormat::Json).unwrap();
        assert_eq!(serde_json::from_str::<Vec<DesignReport>>(&list).unwrap(), vec![r]);
    }

    #[test]
    fn sweep_renderings() {
        let t = sweep(
            &tuxedo(0.1),
            &[GridAxis::parse("rho=0.1:0.8:0.1").unwrap(), GridAxis::parse("delta2=0.005,0.0098").unwrap()],
        )
        .unwrap();
        let csv = render_table(&t, OutputFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 1 + 16);
        assert!(csv.starts_with("rho,delta2,status,label,"));
        assert!(csv.lines().any(|l| l.starts_with("0.8,0.005,infeasible,") && l.contains("INFEASIBLE_ASSOCIATION")));
        let md = render_table(&t, OutputFormat::Markdown).unwrap();
        assert!(md.contains("infeasible: "));
        assert!(md.contains("ARE along rho at delta2 = 0.005: StrictlyDecreasing"));
        let svg = render_table(&t, OutputFormat::Svg).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("delta2 = 0.0098"));
    }

    #[test]
    fn svg_rejected_for_reports() {
        assert!(render_report(&labelled("x", 0.1), OutputFormat::Svg).is_err());
    }

    #[test]
    fn formatting_helpers() {
        assert_eq!(thousands(0), "0");
        assert_eq!(thousands(999), "999");
        assert_eq!(thousands(3076), "3,076");
        assert_eq!(thousands(1234567), "1,234,567");
        assert_eq!(trimmed(0.10, 2), "0.1");
        assert_eq!(trimmed(2.0, 2), "2");
        assert_eq!(ticks(0.9, 2.4), vec![1.0, 1.25, 1.5, 1.75, 2.0, 2.25]);
        assert_eq!("MD".parse::<OutputFormat>().unwrap(), OutputFormat::Markdown);
    }
}
