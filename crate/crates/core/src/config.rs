//! Run configuration: TOML schema, dotted overrides and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::costs::{CostForm, Player, PlayerCostParams};
use crate::error::{EngineError, Result};
use crate::market::ModelParams;
use crate::regression::Conditioning;
use crate::solver::{symmetry_diagnostics, SolverConfig, SolverMode};
use crate::valuation::{ClaimSpec, CollateralSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsConfig {
    /// Defaults to `quadratic`, or `linear` in zero-sum mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<CostForm>,
    #[serde(rename = "A")]
    pub a: PlayerCostParams,
    #[serde(rename = "B")]
    pub b: PlayerCostParams,
}

impl CostsConfig {
    pub fn player(&self, who: Player) -> &PlayerCostParams {
        match who {
            Player::A => &self.a,
            Player::B => &self.b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    /// Write the per-path exposure table.
    #[serde(default = "yes")]
    pub exposure: bool,
    /// Write per-path regime, cost and policy tables.
    #[serde(default = "yes")]
    pub paths: bool,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out_dir(), exposure: true, paths: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub model: ModelParams,
    pub claim: ClaimSpec,
    #[serde(default)]
    pub collateral: CollateralSpec,
    pub costs: CostsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Validation result: errors make the run invalid, warnings do not.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    /// Errors followed by warnings, one per line.
    pub fn lines(&self) -> Vec<String> {
        self.errors
            .iter()
            .map(|e| format!("error: {e}"))
            .chain(self.warnings.iter().map(|w| format!("warning: {w}")))
            .collect()
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| EngineError::Config(e.to_string()))
    }

    /// Read a config file and apply `key=value` overrides before typing it.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut value: toml::Value =
            toml::from_str(&text).map_err(|e| EngineError::Config(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        value.try_into().map_err(|e: toml::de::Error| EngineError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| EngineError::Config(e.to_string()))
    }

    pub fn cost_form(&self) -> CostForm {
        match (self.costs.form, self.solver.mode) {
            (Some(f), _) => f,
            (None, SolverMode::ZeroSumBanal) => CostForm::Linear,
            (None, _) => CostForm::Quadratic,
        }
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let mut d = Diagnostics::default();
        if self.scenario.trim().is_empty() {
            d.errors.push("scenario name is empty".into());
        }
        let n = self.model.n_steps;
        d.errors.extend(self.model.diagnostics());
        d.errors.extend(self.claim.diagnostics(n));
        d.errors.extend(self.collateral.diagnostics());
        for who in [Player::A, Player::B] {
            d.errors.extend(self.costs.player(who).diagnostics(who, n));
        }
        d.errors.extend(self.solver.diagnostics());

        let np = self.model.n_paths;
        if self.solver.resolved_conditioning(np) == Conditioning::Regression {
            let basis = self.solver.basis.size();
            if np < 10 * basis {
                d.errors.push(format!(
                    "regression needs n_paths >= {} for {basis} basis functions (got {np})",
                    10 * basis
                ));
            }
        }
        match self.solver.mode {
            SolverMode::Symmetric => d.errors.extend(symmetry_diagnostics(&self.costs.a, &self.costs.b)),
            _ => {
                for who in [Player::A, Player::B] {
                    if let Some(w) = self.costs.player(who).hp3_violation(who) {
                        d.warnings.push(w);
                    }
                }
            }
        }
        if self.solver.mode == SolverMode::ZeroSumBanal && self.cost_form() != CostForm::Linear {
            d.warnings.push("zero_sum_banal mode with a quadratic cost form".into());
        }
        d
    }
}

/// Set `dotted.key = value` in a TOML tree. The value is parsed as TOML and
/// falls back to a plain string.
pub fn apply_override(root: &mut toml::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| EngineError::Config(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(EngineError::Config(format!("override key `{key}` is malformed")));
    }
    let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(raw.trim().into())),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| EngineError::Config(format!("override `{key}`: `{part}` is not a table")))?;
        node = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| EngineError::Config(format!("override `{key}` does not address a table entry")))?;
    table.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_and_replace() {
        let mut v: toml::Value = toml::from_str("[model]\nseed = 1\n").unwrap();
        apply_override(&mut v, "model.seed=42").unwrap();
        apply_override(&mut v, "solver.mode = symmetric").unwrap();
        apply_override(&mut v, "costs.A.c_to0=[0.1, 0.2]").unwrap();
        assert_eq!(v["model"]["seed"].as_integer(), Some(42));
        assert_eq!(v["solver"]["mode"].as_str(), Some("symmetric"));
        assert_eq!(v["costs"]["A"]["c_to0"].as_array().unwrap().len(), 2);
        assert!(apply_override(&mut v, "noequals").is_err());
        assert!(apply_override(&mut v, "model..seed=1").is_err());
    }
}
