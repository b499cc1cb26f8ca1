//! Run reports and their on-disk artifacts.

use std::path::Path;

use serde::Serialize;
use slaforge_core::metrics::PolicyMetrics;
use slaforge_core::search::{FrontEntry, Policy};
use slaforge_core::Grid;

use crate::error::{CliError, Result};
use crate::ingest::write_file;
use crate::instance::class_name;

/// 64-bit FNV-1a over the given parts, separated so that part boundaries count.
pub fn run_id(parts: &[&[u8]]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &byte in part.iter().chain(std::iter::once(&0xff)) {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

#[derive(Clone, Debug, Serialize)]
pub struct PolicyReport {
    pub policy_id: String,
    pub class: &'static str,
    /// Normalized parameter vector of the policy class.
    pub vector: Vec<f64>,
    pub g: f64,
    pub f: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<PolicyMetrics<f64>>,
}

impl PolicyReport {
    pub fn new(policy_id: String, policy: &Policy, g: f64, f: f64) -> Self {
        Self {
            policy_id,
            class: class_name(policy.class()),
            vector: policy.to_vector(),
            g,
            f,
            detail: None,
        }
    }

    pub fn from_front(entry: &FrontEntry) -> Self {
        Self::new(format!("p{}", entry.id), &entry.policy, entry.g, entry.f)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FrontPoint {
    pub policy_id: String,
    pub g: f64,
    pub f: f64,
}

/// Everything needed to understand and repeat a run. Settings are the effective
/// values after command-line overrides; `config` is the config file verbatim.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub run_id: String,
    pub command: String,
    pub seed: u64,
    pub config: String,
    pub settings: serde_json::Value,
    pub categories: Vec<String>,
    pub boroughs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub risk: Option<Grid<f64>>,
    pub policies: Vec<PolicyReport>,
    pub front: Vec<FrontPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_point: Option<(f64, f64)>,
    pub hypervolume_history: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stylized: Option<serde_json::Value>,
}

pub fn to_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Writes `report.json`, `pareto.csv`, `front_policies.csv` and `hypervolume.csv`.
pub fn emit_report(report: &RunReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    write_file(&out_dir.join("report.json"), to_json(report).as_bytes())?;

    let mut front = report.front.clone();
    front.sort_by(|a, b| a.g.total_cmp(&b.g).then(a.f.total_cmp(&b.f)));
    let mut pareto = String::from("policy_id,g,f\n");
    for p in &front {
        pareto.push_str(&format!("{},{},{}\n", p.policy_id, p.g, p.f));
    }
    write_file(&out_dir.join("pareto.csv"), pareto.as_bytes())?;

    let on_front: Vec<&PolicyReport> = front
        .iter()
        .filter_map(|p| report.policies.iter().find(|q| q.policy_id == p.policy_id))
        .collect();
    let width = on_front.iter().map(|p| p.vector.len()).max().unwrap_or(0);
    let mut policies = String::from("policy_id,class");
    for i in 0..width {
        policies.push_str(&format!(",v{i}"));
    }
    policies.push('\n');
    for p in on_front {
        policies.push_str(&format!("{},{}", p.policy_id, p.class));
        for v in &p.vector {
            policies.push_str(&format!(",{v}"));
        }
        policies.push('\n');
    }
    write_file(&out_dir.join("front_policies.csv"), policies.as_bytes())?;

    let mut hv = String::from("iteration,hv\n");
    for (i, v) in report.hypervolume_history.iter().enumerate() {
        hv.push_str(&format!("{},{v}\n", i + 1));
    }
    write_file(&out_dir.join("hypervolume.csv"), hv.as_bytes())
}
