//! Table output: one CSV row per method and model pair with call rates,
//! runtime per token, speedup and satisfaction metrics.

use std::path::Path;

use lookahead_core::metrics::{speedup, MetricsReport};
use serde::{Deserialize, Serialize};

use crate::config::Method;
use crate::error::{HarnessError, Result};
use crate::runner::{ExperimentReport, ModelPair, REPORT_JSON};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    #[serde(rename = "Target LLM")]
    pub target: String,
    #[serde(rename = "Draft LLM")]
    pub draft: String,
    #[serde(rename = "Approaches")]
    pub approach: String,
    #[serde(rename = "Speedup")]
    pub speedup: Option<f64>,
    #[serde(rename = "Draft LLM Calls Per Token")]
    pub draft_calls_per_token: f64,
    #[serde(rename = "Target LLM Calls Per Token")]
    pub target_calls_per_token: f64,
    #[serde(rename = "c")]
    pub c: f64,
    #[serde(rename = "P")]
    pub runtime_per_token: f64,
    #[serde(rename = "% Soft Constraint Satisfaction")]
    pub soft: Option<f64>,
    #[serde(rename = "% Hard Constraint Satisfaction")]
    pub hard: Option<f64>,
    #[serde(rename = "% Reward Satisfaction")]
    pub reward: Option<f64>,
}

fn percent(x: Option<f64>) -> Option<f64> {
    x.map(|v| v * 100.0)
}

impl TableRow {
    pub fn new(method: Method, pair: &ModelPair, metrics: &MetricsReport) -> Self {
        let draft = if method.needs_draft() { pair.draft_label.clone().unwrap_or_default() } else { String::new() };
        Self::from_metrics(method, pair.target_label.clone(), draft, metrics)
    }

    pub fn from_metrics(method: Method, target: String, draft: String, m: &MetricsReport) -> Self {
        Self {
            target,
            draft,
            approach: method.name().to_owned(),
            speedup: m.speedup.as_ref().map(|s| s.value),
            draft_calls_per_token: m.avg_draft_calls_per_token,
            target_calls_per_token: m.avg_target_calls_per_token,
            c: m.c,
            runtime_per_token: m.runtime_per_token,
            soft: percent(m.soft_satisfaction),
            hard: percent(m.hard_satisfaction),
            reward: percent(m.reward_satisfaction),
        }
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::write(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| HarnessError::write(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::write(path, e))
}

pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    let path = if path.is_dir() { path.join(REPORT_JSON) } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::read(&path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))
}

/// Joins several run reports into one table. With `c`, every row is
/// re-priced under that coefficient. Speedups are taken against the first
/// report whose method is `baseline` on the same target model.
pub fn combine(reports: &[ExperimentReport], baseline: Method, c: Option<f64>) -> Result<Vec<TableRow>> {
    if reports.is_empty() {
        return Err(HarnessError::config("no reports to combine"));
    }
    let priced: Vec<MetricsReport> =
        reports.iter().map(|r| c.map_or_else(|| r.metrics.clone(), |c| r.metrics.repriced(c))).collect();
    let mut rows = Vec::with_capacity(reports.len());
    for (r, m) in reports.iter().zip(&priced) {
        let base = reports
            .iter()
            .zip(&priced)
            .find(|(b, _)| b.method == baseline && b.target == r.target)
            .map(|(_, bm)| bm.runtime_per_token);
        let mut row = TableRow::from_metrics(r.method, r.target.clone(), r.draft.clone().unwrap_or_default(), m);
        row.speedup = base.map(|b| speedup(b, m.runtime_per_token)).transpose()?;
        rows.push(row);
    }
    Ok(rows)
}
