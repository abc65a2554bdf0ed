//! Layered configuration: defaults, then the config file, then flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use ssk::{MixturePolynomial, ReplicaMonomial};

use crate::commands::CliError;
use crate::{Mc, Model};

/// Flag values keyed by config field; unset flags are absent.
#[derive(Default)]
pub struct Overrides {
    map: Map<String, Value>,
    error: Option<String>,
}

impl Overrides {
    pub fn model(m: &Model) -> Self {
        let mut ov = Self::default();
        if let Some(s) = &m.mixture {
            match s.parse::<MixturePolynomial>() {
                Ok(mix) => ov = ov.with("mixture", Some(mix)),
                Err(e) => ov.error = Some(format!("--mixture: {e}")),
            }
        }
        ov.with("beta", m.beta).with("h", m.h)
    }

    pub fn mc(self, mc: &Mc) -> Self {
        self.with("N", mc.n)
            .with("n_disorder", mc.n_disorder)
            .with("n_chains", mc.n_chains)
            .with("sweeps", mc.sweeps)
            .with("burnin", mc.burnin)
            .with("measure_every", mc.measure_every)
    }

    pub fn with<T: Serialize>(mut self, key: &str, value: Option<T>) -> Self {
        if let Some(v) = value {
            match serde_json::to_value(v) {
                Ok(v) => {
                    self.map.insert(key.to_string(), v);
                }
                Err(e) => self.error = Some(format!("--{key}: {e}")),
            }
        }
        self
    }

    pub fn monomial(self, s: Option<String>) -> Self {
        match s.map(|s| s.parse::<ReplicaMonomial>()) {
            Some(Ok(m)) => self.with("monomial", Some(m)),
            Some(Err(e)) => Self { error: Some(format!("--mono: {e}")), ..self },
            None => self,
        }
    }

    pub fn list(self, key: &str, s: Option<String>) -> Self {
        let Some(s) = s else { return self };
        let parsed: Result<Vec<u64>, _> = s.split(',').map(|t| t.trim().parse::<u64>()).collect();
        match parsed {
            Ok(v) => self.with(key, Some(v)),
            Err(e) => Self { error: Some(format!("--{key}: {e}")), ..self },
        }
    }
}

fn read_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    // a previous report carries its effective config under "config"
    let inner = match value {
        Value::Object(mut m) if m.get("config").is_some_and(Value::is_object) => m.remove("config").unwrap_or_default(),
        other => other,
    };
    match inner {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::Config(format!("{}: expected a JSON object", path.display()))),
    }
}

/// Merges `defaults < file < flags` and deserializes the result.
pub fn resolve<T: DeserializeOwned>(defaults: Value, file: Option<&Path>, ov: Overrides) -> Result<T, CliError> {
    if let Some(e) = ov.error {
        return Err(CliError::Config(e));
    }
    let mut merged = match defaults {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    if let Some(p) = file {
        merged.extend(read_file(p)?);
    }
    merged.extend(ov.map);
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(format!("invalid config: {e}")))
}
