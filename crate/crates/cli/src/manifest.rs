//! Run manifests and their comparison.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub scenario: String,
    pub seed: u64,
    pub inputs: ScenarioConfig,
    pub metrics: BTreeMap<String, Metric>,
    pub artifacts: Vec<String>,
    pub pass: bool,
}

impl Manifest {
    pub fn new(config: &ScenarioConfig) -> Self {
        Manifest {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            scenario: config.scenario.clone(),
            seed: config.seed,
            inputs: config.clone(),
            metrics: BTreeMap::new(),
            artifacts: Vec::new(),
            pass: true,
        }
    }

    /// Records a metric that passes when `value <= tol`.
    pub fn at_most(&mut self, name: &str, value: f64, tol: f64) {
        self.record(name, value, tol, value <= tol);
    }

    /// Records a metric that passes when `value >= tol`.
    pub fn at_least(&mut self, name: &str, value: f64, tol: f64) {
        self.record(name, value, tol, value >= tol);
    }

    /// Records a yes/no indicator as 1 or 0 that must equal `expected`.
    pub fn flag(&mut self, name: &str, value: bool, expected: bool) {
        let v = f64::from(u8::from(value));
        self.record(name, v, f64::from(u8::from(expected)), value == expected);
    }

    fn record(&mut self, name: &str, value: f64, tol: f64, pass: bool) {
        self.pass &= pass;
        self.metrics.insert(name.to_string(), Metric { value, tol, pass });
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let version = value.get("schema_version").and_then(|v| v.as_u64());
        if version != Some(u64::from(SCHEMA_VERSION)) {
            bail!("{}: schema version {:?}, expected {}", path.display(), version, SCHEMA_VERSION);
        }
        serde_json::from_value(value).with_context(|| format!("{}: manifest does not match the schema", path.display()))
    }
}

/// One differing metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Difference {
    pub key: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub tol: f64,
}

/// Metrics whose values differ by more than their tolerance (the larger of the
/// two recorded ones, or `override_tol`), plus keys present on one side only.
pub fn compare(a: &Manifest, b: &Manifest, override_tol: Option<f64>) -> Result<Vec<Difference>> {
    if a.schema_version != b.schema_version {
        bail!("schema versions differ: {} vs {}", a.schema_version, b.schema_version);
    }
    if a.scenario != b.scenario {
        bail!("scenarios differ: {} vs {}", a.scenario, b.scenario);
    }
    let mut keys: Vec<&String> = a.metrics.keys().chain(b.metrics.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut out = Vec::new();
    for key in keys {
        let (ma, mb) = (a.metrics.get(key), b.metrics.get(key));
        let tol = override_tol.unwrap_or_else(|| ma.map_or(0.0, |m| m.tol.abs()).max(mb.map_or(0.0, |m| m.tol.abs())));
        let differs = match (ma, mb) {
            (Some(x), Some(y)) => !((x.value - y.value).abs() <= tol || x.value == y.value),
            _ => true,
        };
        if differs {
            out.push(Difference { key: key.clone(), a: ma.map(|m| m.value), b: mb.map(|m| m.value), tol });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Manifest {
        let mut m = Manifest::new(&ScenarioConfig::new("flat"));
        m.at_most("err", 1e-4, 1e-3);
        m.flag("escape", true, true);
        m
    }

    #[test]
    fn identical_manifests_have_no_diff() {
        assert!(compare(&sample(), &sample(), None).unwrap().is_empty());
    }

    #[test]
    fn differences_and_mismatch() {
        let a = sample();
        let mut b = sample();
        b.at_most("err", 5e-3, 1e-3);
        let d = compare(&a, &b, Some(1e-6)).unwrap();
        assert_eq!(d.len(), 1);
        assert!(!b.pass);
        b.scenario = "other".into();
        assert!(compare(&a, &b, None).is_err());
    }
}
