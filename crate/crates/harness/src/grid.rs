//! Threshold grid search with the top-10-by-speedup selection rule.
//!
//! Every `(a_t, r_t, b)` combination is evaluated on the validation split.
//! The ten combinations with the highest speedup form the shortlist; the
//! winner is the shortlisted combination with the best performance (hard
//! satisfaction, or reward satisfaction for blocklist tasks). Ties go to the
//! higher speedup, then to the lexicographically smaller `(a_t, r_t, b)`.

use std::cmp::Ordering;
use std::path::Path;

use lookahead_core::metrics::{speedup, CostModel};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method};
use crate::dataset::read_jsonl;
use crate::error::{HarnessError, Result};
use crate::report::write_csv;
use crate::runner::{evaluate, prepare, ModelPair};

pub const SHORTLIST: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub a_t: Vec<f64>,
    pub r_t: Vec<f64>,
    pub b: Vec<usize>,
}

impl Default for GridSpec {
    /// The lexical-task search space.
    fn default() -> Self {
        Self { a_t: vec![0.3, 0.6, 0.9], r_t: vec![0.3, 0.5, 0.6, 0.9], b: vec![0, 1, 2] }
    }
}

impl GridSpec {
    /// Search space for the blocklist proxy. Its reward lives on a coarser
    /// scale than a learned harmlessness score, so `r_t` is spread over the
    /// values a short blocklist can actually produce.
    pub fn blocklist() -> Self {
        Self { a_t: vec![0.3, 0.4, 0.6, 0.8], r_t: vec![0.4, 0.5, 0.75, 1.0], b: vec![0, 1, 2] }
    }

    pub fn points(&self) -> Result<Vec<GridPoint>> {
        if self.a_t.is_empty() || self.r_t.is_empty() || self.b.is_empty() {
            return Err(HarnessError::config("every grid axis needs at least one value"));
        }
        let mut points = Vec::new();
        for &a_t in &self.a_t {
            for &r_t in &self.r_t {
                for &b in &self.b {
                    points.push(GridPoint { a_t, r_t, b });
                }
            }
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub a_t: f64,
    pub r_t: f64,
    pub b: usize,
}

impl GridPoint {
    fn lexicographic(&self, other: &Self) -> Ordering {
        self.a_t.total_cmp(&other.a_t).then(self.r_t.total_cmp(&other.r_t)).then(self.b.cmp(&other.b))
    }
}

/// What the selection rule needs from one evaluated combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub speedup: f64,
    pub performance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub a_t: f64,
    pub r_t: f64,
    pub b: usize,
    pub speedup: f64,
    pub performance: f64,
    pub runtime_per_token: f64,
    pub draft_calls_per_token: f64,
    pub target_calls_per_token: f64,
    pub soft: Option<f64>,
    pub mean_acceptance: Option<f64>,
    pub shortlisted: bool,
}

impl GridRow {
    pub fn point(&self) -> GridPoint {
        GridPoint { a_t: self.a_t, r_t: self.r_t, b: self.b }
    }
}

/// Index of the winner among `scored`, by the rule in the module docs.
pub fn select(scored: &[(GridPoint, GridScore)]) -> Result<usize> {
    Ok(shortlist(scored)?[0])
}

/// Shortlist indices ordered best first under the selection rule.
pub fn shortlist(scored: &[(GridPoint, GridScore)]) -> Result<Vec<usize>> {
    if scored.is_empty() {
        return Err(HarnessError::config("empty grid"));
    }
    let mut by_speed: Vec<usize> = (0..scored.len()).collect();
    by_speed.sort_by(|&i, &j| {
        let (pi, si) = &scored[i];
        let (pj, sj) = &scored[j];
        sj.speedup.total_cmp(&si.speedup).then(pi.lexicographic(pj))
    });
    by_speed.truncate(SHORTLIST);
    by_speed.sort_by(|&i, &j| {
        let (pi, si) = &scored[i];
        let (pj, sj) = &scored[j];
        sj.performance.total_cmp(&si.performance).then(sj.speedup.total_cmp(&si.speedup)).then(pi.lexicographic(pj))
    });
    Ok(by_speed)
}

/// Evaluates every grid point with `eval` and applies the selection rule.
pub fn grid_search<F>(spec: &GridSpec, mut eval: F) -> Result<(Vec<GridRow>, usize)>
where
    F: FnMut(GridPoint) -> Result<GridRow>,
{
    let points = spec.points()?;
    let mut rows = points.into_iter().map(&mut eval).collect::<Result<Vec<_>>>()?;
    let scored: Vec<(GridPoint, GridScore)> =
        rows.iter().map(|r| (r.point(), GridScore { speedup: r.speedup, performance: r.performance })).collect();
    let short = shortlist(&scored)?;
    for &i in &short {
        rows[i].shortlisted = true;
    }
    Ok((rows, short[0]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub baseline: String,
    pub baseline_runtime_per_token: f64,
    pub selected: GridRow,
    pub rows: Vec<GridRow>,
}

pub const GRID_CSV: &str = "grid.csv";
pub const SELECTED_JSON: &str = "selected.json";

/// Tunes CDSL thresholds on `config.data` (the validation split) against a
/// CDLH baseline, writing `grid.csv` and `selected.json` when `config.out` is
/// set.
pub fn run_grid(config: &ExperimentConfig, spec: &GridSpec) -> Result<GridOutcome> {
    let config = ExperimentConfig { method: Method::Cdsl, baseline: None, ..config.clone() };
    config.validate()?;
    let pair = ModelPair::load(config.target.as_deref().expect("validated"), config.draft.as_deref())?;
    let examples = prepare(read_jsonl(config.data.as_deref().expect("validated"))?, pair.target.as_ref())?;
    let cost = CostModel::new(config.c).map_err(|e| HarnessError::config(e.to_string()))?;
    let params = config.params();
    let base = evaluate(Method::Cdlh, &params, &pair, &examples, config.seed, cost, config.reward_threshold)?;
    let base_p = base.metrics.runtime_per_token;

    let (rows, winner) = grid_search(spec, |point| {
        let p = crate::config::DecodeParams { a_t: point.a_t, r_t: point.r_t, b: point.b, ..params.clone() };
        let e = evaluate(Method::Cdsl, &p, &pair, &examples, config.seed, cost, config.reward_threshold)?;
        let m = &e.metrics;
        Ok(GridRow {
            a_t: point.a_t,
            r_t: point.r_t,
            b: point.b,
            speedup: speedup(base_p, m.runtime_per_token)?,
            performance: m.hard_satisfaction.or(m.reward_satisfaction).unwrap_or(0.0),
            runtime_per_token: m.runtime_per_token,
            draft_calls_per_token: m.avg_draft_calls_per_token,
            target_calls_per_token: m.avg_target_calls_per_token,
            soft: m.soft_satisfaction,
            mean_acceptance: e.mean_acceptance,
            shortlisted: false,
        })
    })?;
    let outcome = GridOutcome {
        baseline: Method::Cdlh.name().to_owned(),
        baseline_runtime_per_token: base_p,
        selected: rows[winner].clone(),
        rows,
    };
    if let Some(out) = &config.out {
        write_outcome(out, &outcome)?;
    }
    Ok(outcome)
}

pub fn write_outcome(out: &Path, outcome: &GridOutcome) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| HarnessError::write(out, e))?;
    write_csv(&out.join(GRID_CSV), &outcome.rows)?;
    let path = out.join(SELECTED_JSON);
    let json = serde_json::to_string_pretty(&outcome.selected).expect("row serializes") + "\n";
    std::fs::write(&path, json).map_err(|e| HarnessError::write(&path, e))
}
