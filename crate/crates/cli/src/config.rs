//! Experiment configuration: a TOML tree that fully determines one output table.

use std::fmt;

use asian_hermite::generator::{ModelSpec, NigParams};
use asian_hermite::monte_carlo::{McConfig, Scheme};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    /// One row per (K, a, b, N, m): partial-sum prices, γ, γ̃, MC band.
    Price,
    /// The truncated payoff series sampled on an x grid.
    Payoff,
    /// L² truncation error of the payoff series.
    L2Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Bm,
    Ou,
    JumpDiffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NigConfig {
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    #[serde(default)]
    pub b0: f64,
    #[serde(default)]
    pub b1: f64,
    #[serde(default = "one")]
    pub sigma0: f64,
    #[serde(default)]
    pub y0: f64,
    #[serde(default)]
    pub t: f64,
    pub maturity: f64,
    #[serde(default)]
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nig: Option<NigConfig>,
}

fn one() -> f64 {
    1.0
}

/// Drift entry: a number, or `"mean"` for `a = E[X | F_t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DriftEntry {
    Value(f64),
    Named(DriftName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftName {
    Mean,
}

impl fmt::Display for DriftEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftEntry::Value(a) => write!(f, "{a}"),
            DriftEntry::Named(DriftName::Mean) => f.write_str("mean"),
        }
    }
}

/// Whether `grid.b` holds absolute scales or multiples of `b̲ = σ_X/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMode {
    #[default]
    Value,
    Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub strikes: Vec<f64>,
    pub a: Vec<DriftEntry>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub b_mode: ScaleMode,
    /// Largest truncation; rows are emitted for every `N` in `0..=n_max`.
    #[serde(default)]
    pub n_max: Option<usize>,
    /// Explicit truncations (payoff tables).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<usize>>,
    #[serde(default = "zero_m")]
    pub m: Vec<usize>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn zero_m() -> Vec<usize> {
    vec![0]
}

fn default_threshold() -> f64 {
    asian_hermite::pricer::DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn default_batches() -> usize {
    100
}

fn default_paths() -> usize {
    20_000
}

fn default_substeps() -> usize {
    100
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            enabled: false,
            batches: default_batches(),
            paths: default_paths(),
            seed: 0,
            substeps: default_substeps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffSection {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    pub grid: GridConfig,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<PayoffSection>,
}

fn invalid(path: &str, msg: impl fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

fn finite(path: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(path, format!("must be finite, got {x}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Checks every field and reports the first problem with its path.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.id.trim().is_empty() {
            return Err(invalid("id", "must be non-empty"));
        }
        if !self
            .id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(invalid("id", "may only contain [A-Za-z0-9_-]"));
        }
        let g = &self.grid;
        if g.strikes.is_empty() {
            return Err(invalid("grid.strikes", "must be non-empty"));
        }
        for (i, &k) in g.strikes.iter().enumerate() {
            finite(&format!("grid.strikes[{i}]"), k)?;
            if k < 0.0 {
                return Err(invalid(&format!("grid.strikes[{i}]"), format!("must be >= 0, got {k}")));
            }
        }
        if g.a.is_empty() {
            return Err(invalid("grid.a", "must be non-empty"));
        }
        for (i, a) in g.a.iter().enumerate() {
            if let DriftEntry::Value(v) = a {
                finite(&format!("grid.a[{i}]"), *v)?;
            }
        }
        if g.b.is_empty() {
            return Err(invalid("grid.b", "must be non-empty"));
        }
        for (i, &b) in g.b.iter().enumerate() {
            if !(b > 0.0 && b.is_finite()) {
                return Err(invalid(
                    &format!("grid.b[{i}]"),
                    format!("must be finite and > 0, got {b}"),
                ));
            }
        }
        if !(g.threshold.is_finite()) {
            return Err(invalid("grid.threshold", "must be finite"));
        }
        if g.m.is_empty() {
            return Err(invalid("grid.m", "must be non-empty"));
        }
        let max_order = asian_hermite::hermite::MAX_BASIS_ORDER;
        match self.kind {
            Kind::Payoff => {
                let orders = g
                    .orders
                    .as_ref()
                    .ok_or_else(|| invalid("grid.orders", "required for payoff tables"))?;
                if orders.is_empty() {
                    return Err(invalid("grid.orders", "must be non-empty"));
                }
                if let Some(&n) = orders.iter().find(|&&n| n > max_order) {
                    return Err(invalid("grid.orders", format!("{n} exceeds {max_order}")));
                }
                let p = self
                    .payoff
                    .as_ref()
                    .ok_or_else(|| invalid("payoff", "required for payoff tables"))?;
                finite("payoff.x_min", p.x_min)?;
                finite("payoff.x_max", p.x_max)?;
                if !(p.x_max > p.x_min) {
                    return Err(invalid("payoff.x_max", "must exceed payoff.x_min"));
                }
                if p.points < 2 {
                    return Err(invalid("payoff.points", "must be >= 2"));
                }
                self.fixed_drift_only()?;
            }
            Kind::L2Error => {
                self.n_max_checked()?;
                self.fixed_drift_only()?;
            }
            Kind::Price => {
                self.n_max_checked()?;
                let model = self
                    .model
                    .as_ref()
                    .ok_or_else(|| invalid("model", "required for price tables"))?;
                model.validate()?;
                if self.mc.enabled && (self.mc.batches == 0 || self.mc.paths == 0 || self.mc.substeps == 0) {
                    return Err(invalid("mc", "batches, paths and substeps must be >= 1"));
                }
            }
        }
        if self.kind != Kind::Price && g.b_mode == ScaleMode::Ratio {
            return Err(invalid("grid.b_mode", "ratio scales need a model; use absolute values"));
        }
        Ok(())
    }

    fn n_max_checked(&self) -> Result<usize, CliError> {
        let n = self.grid.n_max.ok_or_else(|| invalid("grid.n_max", "required"))?;
        let cap = asian_hermite::hermite::MAX_BASIS_ORDER;
        if n > cap {
            return Err(invalid("grid.n_max", format!("{n} exceeds {cap}")));
        }
        Ok(n)
    }

    fn fixed_drift_only(&self) -> Result<(), CliError> {
        if self.grid.a.iter().any(|a| matches!(a, DriftEntry::Named(_))) {
            return Err(invalid("grid.a", "\"mean\" needs a model; use numeric drifts"));
        }
        Ok(())
    }

    pub fn n_max(&self) -> usize {
        self.grid.n_max.unwrap_or(0)
    }

    /// MC settings for the configured model.
    pub fn mc_config(&self, spec: &ModelSpec) -> McConfig {
        McConfig {
            paths: self.mc.paths,
            batches: self.mc.batches,
            seed: self.mc.seed,
            scheme: Scheme::for_model(spec),
            substeps: self.mc.substeps,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        for (path, x) in [
            ("model.b0", self.b0),
            ("model.b1", self.b1),
            ("model.y0", self.y0),
            ("model.t", self.t),
            ("model.maturity", self.maturity),
            ("model.rate", self.rate),
        ] {
            finite(path, x)?;
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(invalid(
                "model.sigma0",
                format!("must be finite and > 0, got {}", self.sigma0),
            ));
        }
        if !(self.maturity > self.t) {
            return Err(invalid("model.maturity", format!("must exceed t = {}", self.t)));
        }
        match (self.family, &self.nig) {
            (Family::JumpDiffusion, None) => return Err(invalid("model.nig", "required for jump-diffusion")),
            (Family::Bm | Family::Ou, Some(_)) => {
                return Err(invalid("model.nig", "only allowed for family = \"jump-diffusion\""))
            }
            _ => {}
        }
        if self.family == Family::Bm && (self.b0 != 0.0 || self.b1 != 0.0) {
            return Err(invalid("model.b0", "bm has no drift; use family = \"ou\""));
        }
        self.spec().map(|_| ())
    }

    pub fn spec(&self) -> Result<ModelSpec, CliError> {
        let base = match self.family {
            Family::Bm => ModelSpec::ou(0.0, 0.0, self.sigma0),
            Family::Ou | Family::JumpDiffusion => ModelSpec::ou(self.b0, self.b1, self.sigma0),
        }
        .map_err(|e| invalid("model", e))?;
        match &self.nig {
            Some(n) => {
                let p = NigParams::new(n.alpha, n.beta, n.mu, n.delta).map_err(|e| invalid("model.nig", e))?;
                Ok(base.with_jumps(p))
            }
            None => Ok(base),
        }
    }

    /// Compact echo of everything that fixes the law of the underlying.
    pub fn label(&self) -> Result<String, CliError> {
        let spec = self.spec()?;
        let name = match self.family {
            Family::Bm => format!("bm(sigma0={})", self.sigma0),
            _ => spec.describe(),
        };
        Ok(format!(
            "{name};y0={};t={};T={};r={}",
            self.y0, self.t, self.maturity, self.rate
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
id = "tiny"
kind = "price"
[model]
family = "ou"
b0 = -0.02
b1 = 0.01
sigma0 = 0.98
y0 = 2.0
maturity = 2.0
[grid]
strikes = [2.0]
a = ["mean"]
b = [2.0]
b_mode = "ratio"
n_max = 8
"#;

    #[test]
    fn parses_minimal_price_config() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.grid.m, vec![0]);
        assert_eq!(cfg.grid.a, vec![DriftEntry::Named(DriftName::Mean)]);
        assert!(!cfg.mc.enabled);
        assert_eq!(cfg.grid.threshold, 4.0);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = MINIMAL.replace("strikes = [2.0]", "strikes = []");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(err.contains("grid.strikes"), "{err}");

        let bad = MINIMAL.replace("b = [2.0]", "b = [2.0, -1.0]");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(err.contains("grid.b[1]"), "{err}");

        let bad = MINIMAL.replace("maturity = 2.0", "maturity = 0.0");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(err.contains("model.maturity"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("n_max = 8", "n_max = 8\nnmax = 9");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn jump_family_needs_nig_block() {
        let bad = MINIMAL.replace("family = \"ou\"", "family = \"jump-diffusion\"");
        let err = ExperimentConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(err.contains("model.nig"), "{err}");
    }
}
