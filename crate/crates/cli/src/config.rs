//! Scenario configuration: a TOML file merged with command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Physical parameters in chart units; absent keys take scenario defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// One-form coefficient of `constant-form`.
    pub a: Option<f64>,
    /// Open interval `A` of `minkowski-development`.
    pub interval: Option<[f64; 2]>,
    /// Half-height `Y` of the strip chart.
    pub half_height: Option<f64>,
    /// Plateau half-width of the strip bumps.
    pub plateau: Option<f64>,
    /// Support half-width of the strip bumps.
    pub support: Option<f64>,
    /// Truncation `|theta| <= T` of the hyperbola chart.
    pub truncation: Option<f64>,
    /// Number of arcs of the sequence scenario.
    pub count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    /// Grid nodes per axis.
    pub resolution: Option<usize>,
    /// Tolerance of the scenario's numeric checks.
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: Params,
}

impl ScenarioConfig {
    pub fn new(scenario: &str) -> Self {
        ScenarioConfig { scenario: scenario.to_string(), resolution: None, tol: None, out: None, seed: 0, params: Params::default() }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.resolution {
            if r < 32 {
                bail!("resolution {r} is below the minimum of 32 nodes per axis");
            }
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                bail!("tolerance must be positive, got {t}");
            }
        }
        if let Some([lo, hi]) = self.params.interval {
            if !(lo < hi) {
                bail!("interval [{lo}, {hi}] is empty");
            }
        }
        if let Some(a) = self.params.a {
            if !(a.abs() < 1.0) {
                bail!("one-form coefficient a = {a} must satisfy |a| < 1");
            }
        }
        Ok(())
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(1e-3)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&self.scenario))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let cfg: ScenarioConfig = toml::from_str(
            r#"
            scenario = "constant-form"
            resolution = 65
            tol = 1e-4
            seed = 9
            [params]
            a = 0.25
            "#,
        )
        .unwrap();
        assert_eq!(cfg.params.a, Some(0.25));
        assert_eq!(cfg.seed, 9);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = ScenarioConfig::new("flat");
        cfg.resolution = Some(16);
        assert!(cfg.validate().is_err());
        cfg.resolution = Some(64);
        cfg.tol = Some(0.0);
        assert!(cfg.validate().is_err());
        assert!(toml::from_str::<ScenarioConfig>("scenario = \"flat\"\nbogus = 1").is_err());
    }
}
