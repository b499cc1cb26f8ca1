//! Run configuration, read from TOML. Every field has a default so an empty
//! file (or no file) is a valid configuration; command-line flags override.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use slaforge_core::metrics::EquityKind;
use slaforge_core::search::{PolicyClass, Sampler};

use crate::error::{CliError, Result};
use crate::ingest::Alignment;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub simulation: SimulationSection,
    pub metrics: MetricsSection,
    pub search: SearchSection,
    pub data: DataSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub review_period: u32,
    pub fcfs_violation: f64,
    pub trace_repeats: u32,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            review_period: 7,
            fcfs_violation: 0.1,
            trace_repeats: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub sla_percentile: f64,
    pub drop_cost: f64,
    pub equity: EquityKind,
    /// Risk level per category name, applied in every borough.
    pub risk: BTreeMap<String, f64>,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            sla_percentile: 50.0,
            drop_cost: 100.0,
            equity: EquityKind::Range,
            risk: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub class: PolicyClass,
    pub sampler: Sampler,
    pub batch_size: usize,
    pub iterations: usize,
    pub seeds_per_policy: u32,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self {
            class: PolicyClass::BoroughBudget,
            sampler: Sampler::SobolRandom,
            batch_size: 64,
            iterations: 50,
            seeds_per_policy: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub categories: Option<Vec<String>>,
    pub boroughs: Option<Vec<String>>,
    pub alignment: Alignment,
}

/// Parsed configuration together with the exact bytes it came from.
#[derive(Clone, Debug, Default)]
pub struct LoadedConfig {
    pub config: Config,
    pub text: String,
}

pub fn load(path: Option<&Path>) -> Result<LoadedConfig> {
    let Some(path) = path else {
        return Ok(LoadedConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let config = toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(LoadedConfig { config, text })
}

/// Assigned risk levels of the NYC Parks forestry request categories.
pub const DEFAULT_RISK_LEVELS: [(&str, f64); 6] = [
    ("Hazard", 10.0),
    ("Illegal Tree Damage", 8.0),
    ("Other", 6.0),
    ("Prune", 4.0),
    ("Remove Tree", 8.0),
    ("Root/Sewer/Sidewalk", 4.0),
];

pub fn default_risk(category: &str) -> Option<f64> {
    DEFAULT_RISK_LEVELS.iter().find(|(c, _)| *c == category).map(|&(_, r)| r)
}
