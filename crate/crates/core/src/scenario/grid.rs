use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One grid coordinate: a number, or a category such as a hazard shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridValue {
    Number(f64),
    Text(String),
}

impl GridValue {
    pub fn parse(token: &str) -> Self {
        let token = token.trim();
        match token.parse::<f64>() {
            Ok(x) if x.is_finite() => GridValue::Number(x),
            _ => GridValue::Text(token.to_string()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            GridValue::Number(x) => Some(*x),
            GridValue::Text(_) => None,
        }
    }

    pub(crate) fn to_json(&self) -> serde_json::Value {
        match self {
            GridValue::Number(x) => serde_json::Value::from(*x),
            GridValue::Text(s) => serde_json::Value::from(s.as_str()),
        }
    }
}

impl std::fmt::Display for GridValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GridValue::Number(x) => write!(f, "{x}"),
            GridValue::Text(s) => f.write_str(s),
        }
    }
}

/// A named list of parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub values: Vec<GridValue>,
}

/// Largest number of points a `start:stop:step` range may expand to.
const MAX_RANGE_POINTS: usize = 10_000;

impl GridAxis {
    pub fn new(name: impl Into<String>, values: Vec<GridValue>) -> Self {
        GridAxis {
            name: name.into(),
            values,
        }
    }

    pub fn numeric(name: impl Into<String>, values: &[f64]) -> Self {
        GridAxis::new(name, values.iter().map(|&x| GridValue::Number(x)).collect())
    }

    /// Parses `name=start:stop:step` (inclusive) or `name=v1,v2,…`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, spec) = text
            .split_once('=')
            .ok_or_else(|| Error::validation("grid", format!("expected `name=values`, got `{text}`")))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::validation("grid", format!("missing parameter name in `{text}`")));
        }
        let spec = spec.trim();
        let values = if spec.contains(':') {
            range(name, spec)?
        } else {
            spec.split(',').filter(|t| !t.trim().is_empty()).map(GridValue::parse).collect()
        };
        if values.is_empty() {
            return Err(Error::validation("grid", format!("axis `{name}` has no values")));
        }
        Ok(GridAxis::new(name, values))
    }
}

fn range(name: &str, spec: &str) -> Result<Vec<GridValue>> {
    let bad = || Error::validation("grid", format!("range for `{name}` must be numeric `start:stop:step`, got `{spec}`"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(start.is_finite() && stop.is_finite() && step > 0.0 && step.is_finite() && stop >= start) {
        return Err(bad());
    }
    // Tolerate the last point falling a rounding error short of `stop`.
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > MAX_RANGE_POINTS {
        return Err(Error::validation("grid", format!("range for `{name}` has more than {MAX_RANGE_POINTS} points")));
    }
    // Snap to 12 significant decimals so 0.1 + 2·0.1 prints as 0.3.
    Ok((0..count)
        .map(|i| {
            let x = start + i as f64 * step;
            GridValue::Number((x * 1e12).round() / 1e12)
        })
        .collect())
}
