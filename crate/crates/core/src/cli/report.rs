//! Deterministic JSON reports.

use serde::Serialize;
use serde_json::{json, Map, Number, Value};

use crate::tensor::MultiIndex;
use crate::Dims;

/// Formats `x` with 17 significant digits; non-finite values become strings.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        let s = format!("{x:.16e}");
        Value::Number(s.parse::<Number>().expect("formatted float is a JSON number"))
    } else {
        Value::String(x.to_string())
    }
}

/// Rewrites every non-integer number in `v` through [`num`].
pub fn normalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.as_i64().is_none() && n.as_u64().is_none() => num(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(a) => Value::Array(a.into_iter().map(normalize).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, normalize(v))).collect()),
        other => other,
    }
}

pub fn to_value<T: Serialize>(t: &T) -> Value {
    normalize(serde_json::to_value(t).expect("report values serialize"))
}

/// `[{"index": [..one-based..], "value": x}, ...]` in row-major order.
pub fn components(shape: &[usize], data: &[f64]) -> Value {
    Value::Array(
        MultiIndex::new(shape)
            .zip(data)
            .map(|(idx, &x)| {
                json!({
                    "index": idx.iter().map(|k| k + 1).collect::<Vec<_>>(),
                    "value": num(x),
                })
            })
            .collect(),
    )
}

pub fn point(p: &crate::JetPoint) -> Value {
    json!({
        "t": p.t.iter().copied().map(num).collect::<Vec<_>>(),
        "x": p.x.iter().copied().map(num).collect::<Vec<_>>(),
        "v": p.v.iter().map(|r| r.iter().copied().map(num).collect::<Vec<_>>()).collect::<Vec<_>>(),
    })
}

/// One pass/fail line.
#[derive(Clone, Debug)]
pub struct CheckLine {
    pub name: String,
    pub max_abs: f64,
    pub max_rel: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: Value,
}

impl CheckLine {
    /// Passes when `measure <= tolerance`.
    pub fn bound(name: impl Into<String>, max_abs: f64, max_rel: f64, measure: f64, tolerance: f64) -> Self {
        CheckLine {
            name: name.into(),
            max_abs,
            max_rel,
            tolerance,
            passed: measure <= tolerance,
            detail: Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    fn to_json(&self) -> Value {
        let mut o = Map::new();
        o.insert("name".into(), Value::String(self.name.clone()));
        o.insert("max_abs".into(), num(self.max_abs));
        o.insert("max_rel".into(), num(self.max_rel));
        o.insert("tolerance".into(), num(self.tolerance));
        o.insert("passed".into(), Value::Bool(self.passed));
        if !self.detail.is_null() {
            o.insert("detail".into(), normalize(self.detail.clone()));
        }
        Value::Object(o)
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub command: String,
    pub inputs: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub dims: Option<Dims>,
    pub warnings: Vec<String>,
    pub results: Value,
    pub checks: Vec<CheckLine>,
}

impl Report {
    pub fn new(command: impl Into<String>) -> Self {
        Report {
            command: command.into(),
            inputs: Vec::new(),
            seed: None,
            dims: None,
            warnings: Vec::new(),
            results: Value::Null,
            checks: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckLine> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn to_json(&self) -> Value {
        let inputs: Map<String, Value> = self
            .inputs
            .iter()
            .map(|(k, v)| (k.clone(), json!({ "sha256": v })))
            .collect();
        json!({
            "tool": "jetkcc",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "inputs": inputs,
            "seed": self.seed,
            "dims": self.dims.map(|d| json!({ "m": d.m, "n": d.n })),
            "warnings": self.warnings,
            "results": normalize(self.results.clone()),
            "checks": self.checks.iter().map(CheckLine::to_json).collect::<Vec<_>>(),
            "passed": self.passed(),
        })
    }

    /// Pretty JSON with a trailing newline.
    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_carry_seventeen_digits() {
        assert_eq!(num(0.1).to_string(), "1.0000000000000001e-1");
        assert_eq!(num(-2.0).to_string(), "-2.0000000000000000e+0");
        assert_eq!(normalize(json!([1, 0.5])).to_string(), "[1,5.0000000000000000e-1]");
        let back: f64 = num(std::f64::consts::PI).to_string().parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }
}
