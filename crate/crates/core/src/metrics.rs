//! Runtime model and constraint-satisfaction metrics.
//!
//! Runtime per token is measured in target-call equivalents:
//!
//! ```text
//! P = c * (draft calls / token) + (target calls / token)
//! ```
//!
//! where `c` is the cost of one draft call relative to one target call.
//! Reward evaluation is free. Per-token rates are pooled over all tokens of a
//! run, not averaged per example.

use serde::{Deserialize, Serialize};

use crate::decode::GenerationResult;
use crate::error::{Error, Result};
use crate::lm::{CallLedger, Vocabulary};
use crate::rewards::{ConceptSet, RewardFunction};

/// Relative cost of one draft call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c: f64,
}

impl CostModel {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::config(format!("cost coefficient must be positive, got {c}")));
        }
        Ok(Self { c })
    }

    /// A draft that costs more than the target defeats the point of drafting.
    pub fn is_unusual(&self) -> bool {
        self.c > 1.0
    }
}

/// Measured cost coefficients of real (target, draft) model pairs for the
/// lexical (`commongen`) and harmlessness (`htg`) tasks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostPreset {
    pub target: &'static str,
    pub draft: &'static str,
    pub commongen: f64,
    pub htg: f64,
}

pub const COST_PRESETS: &[CostPreset] = &[
    CostPreset { target: "OPT-13B", draft: "OPT-125M", commongen: 0.077, htg: 0.077 },
    CostPreset { target: "OPT-13B", draft: "OPT-350M", commongen: 0.146, htg: 0.147 },
    CostPreset { target: "OPT-13B", draft: "OPT-1.3B", commongen: 0.156, htg: 0.176 },
    CostPreset { target: "Bloomz-7.1B", draft: "Bloomz-560M", commongen: 0.314, htg: 0.309 },
    CostPreset { target: "Bloomz-7.1B", draft: "Bloomz-1.7B", commongen: 0.341, htg: 0.358 },
    CostPreset { target: "Qwen1.5-7B", draft: "Qwen1.5-0.5B", commongen: 0.338, htg: 0.375 },
    CostPreset { target: "Qwen1.5-7B", draft: "Qwen1.5-1.8B", commongen: 0.347, htg: 0.409 },
];

pub fn cost_preset(draft: &str) -> Option<&'static CostPreset> {
    COST_PRESETS.iter().find(|p| p.draft.eq_ignore_ascii_case(draft))
}

/// `P` from per-token call rates.
pub fn runtime_from_rates(draft_per_token: f64, target_per_token: f64, c: f64) -> f64 {
    c * draft_per_token + target_per_token
}

/// `P` for a ledger (or a pooled ledger over many generations).
pub fn runtime_per_token(ledger: &CallLedger, c: f64) -> Result<f64> {
    if ledger.emitted_tokens == 0 {
        return Err(Error::input("runtime per token of a ledger with no emitted tokens"));
    }
    let tokens = ledger.emitted_tokens as f64;
    Ok(runtime_from_rates(ledger.draft_calls as f64 / tokens, ledger.target_calls as f64 / tokens, c))
}

/// Ratio of two runtimes.
pub fn speedup(baseline: f64, method: f64) -> Result<f64> {
    if !(baseline > 0.0 && method > 0.0) {
        return Err(Error::input(format!("speedup needs positive runtimes, got {baseline} and {method}")));
    }
    Ok(baseline / method)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSatisfaction {
    /// Covered concepts over all concepts, pooled across examples.
    pub soft: f64,
    /// Fraction of examples covering every concept.
    pub hard: f64,
}

pub fn constraint_metrics(
    vocab: &Vocabulary,
    results: &[(&GenerationResult, &ConceptSet)],
) -> Result<ConstraintSatisfaction> {
    if results.is_empty() {
        return Err(Error::input("constraint metrics over no examples"));
    }
    let mut covered = 0usize;
    let mut total = 0usize;
    let mut complete = 0usize;
    for (result, concepts) in results {
        let words: Vec<&str> = result.tokens.iter().filter_map(|&t| vocab.token(t)).collect();
        let c = concepts.covered(&words);
        covered += c;
        total += concepts.len();
        if c == concepts.len() {
            complete += 1;
        }
    }
    Ok(ConstraintSatisfaction { soft: covered as f64 / total as f64, hard: complete as f64 / results.len() as f64 })
}

/// Fraction of generations whose final reward reaches `threshold`.
pub fn reward_satisfaction_rate(
    vocab: &Vocabulary,
    results: &[(&GenerationResult, &dyn RewardFunction)],
    threshold: f64,
) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::input("reward satisfaction over no examples"));
    }
    let ok = results.iter().filter(|(r, reward)| reward.score(vocab, &r.tokens) >= threshold).count();
    Ok(ok as f64 / results.len() as f64)
}

/// Aggregate runtime figures for one method over a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeSummary {
    pub draft_calls_per_token: f64,
    pub target_calls_per_token: f64,
    /// `P` in target-call equivalents.
    pub runtime_per_token: f64,
}

impl RuntimeSummary {
    pub fn from_ledger(pooled: &CallLedger, cost: CostModel) -> Result<Self> {
        let runtime_per_token = runtime_per_token(pooled, cost.c)?;
        Ok(Self {
            draft_calls_per_token: pooled.draft_per_token().unwrap_or(0.0),
            target_calls_per_token: pooled.target_per_token().unwrap_or(0.0),
            runtime_per_token,
        })
    }
}

/// Speedup of a method relative to a named baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Speedup {
    pub baseline: String,
    pub baseline_runtime_per_token: f64,
    pub value: f64,
}

/// Aggregate metrics for one method over one dataset. Coverage metrics are
/// present for lexical tasks, the reward rate for blocklist tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub soft_satisfaction: Option<f64>,
    pub hard_satisfaction: Option<f64>,
    pub reward_satisfaction: Option<f64>,
    pub avg_draft_calls_per_token: f64,
    pub avg_target_calls_per_token: f64,
    pub c: f64,
    /// `P` in target-call equivalents.
    pub runtime_per_token: f64,
    pub speedup: Option<Speedup>,
}

impl MetricsReport {
    pub fn new(pooled: &CallLedger, cost: CostModel) -> Result<Self> {
        let runtime = RuntimeSummary::from_ledger(pooled, cost)?;
        Ok(Self {
            soft_satisfaction: None,
            hard_satisfaction: None,
            reward_satisfaction: None,
            avg_draft_calls_per_token: runtime.draft_calls_per_token,
            avg_target_calls_per_token: runtime.target_calls_per_token,
            c: cost.c,
            runtime_per_token: runtime.runtime_per_token,
            speedup: None,
        })
    }

    pub fn with_constraints(mut self, m: ConstraintSatisfaction) -> Self {
        self.soft_satisfaction = Some(m.soft);
        self.hard_satisfaction = Some(m.hard);
        self
    }

    pub fn with_speedup(mut self, baseline: impl Into<String>, baseline_runtime_per_token: f64) -> Result<Self> {
        let value = speedup(baseline_runtime_per_token, self.runtime_per_token)?;
        self.speedup = Some(Speedup { baseline: baseline.into(), baseline_runtime_per_token, value });
        Ok(self)
    }

    /// Re-prices the same call counts under another cost coefficient. Any
    /// speedup is dropped because the baseline must be re-priced too.
    pub fn repriced(&self, c: f64) -> Self {
        Self {
            c,
            runtime_per_token: runtime_from_rates(self.avg_draft_calls_per_token, self.avg_target_calls_per_token, c),
            speedup: None,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::Termination;

    #[test]
    fn report_from_pooled_ledger() {
        let ledger = CallLedger { draft_calls: 879, target_calls: 88, emitted_tokens: 100 };
        let r =
            MetricsReport::new(&ledger, CostModel::new(0.077).unwrap()).unwrap().with_speedup("cdlh", 8.62).unwrap();
        assert!((r.runtime_per_token - 1.55683).abs() < 1e-9);
        assert!((r.speedup.as_ref().unwrap().value - 5.54).abs() < 0.01);
        let cheap = r.repriced(0.0001);
        assert!(cheap.runtime_per_token < r.runtime_per_token);
        assert!(cheap.speedup.is_none());
    }

    fn result(tokens: Vec<u32>) -> GenerationResult {
        GenerationResult { tokens, ledger: CallLedger::default(), traces: vec![], terminated_by: Termination::Eos }
    }

    #[test]
    fn runtime_reproduces_reference_rows() {
        let p = runtime_from_rates(8.79, 0.88, 0.077);
        assert!((p - 1.55683).abs() < 1e-9);
        assert!((speedup(8.62, p).unwrap() - 5.54).abs() < 0.01);
        assert!((runtime_from_rates(9.0, 1.0, 0.341) - 4.069).abs() < 1e-12);
        assert!((runtime_from_rates(9.0, 1.0, 0.314) - 3.826).abs() < 1e-12);
    }

    #[test]
    fn greedy_ledger_costs_one_for_any_c() {
        let ledger = CallLedger { draft_calls: 0, target_calls: 40, emitted_tokens: 40 };
        for c in [0.01, 0.3, 1.0] {
            assert_eq!(runtime_per_token(&ledger, c).unwrap(), 1.0);
        }
        assert!(runtime_per_token(&CallLedger::default(), 0.1).is_err());
    }

    #[test]
    fn runtime_is_linear_in_c() {
        let ledger = CallLedger { draft_calls: 37, target_calls: 11, emitted_tokens: 9 };
        let (p1, p2) = (runtime_per_token(&ledger, 0.1).unwrap(), runtime_per_token(&ledger, 0.3).unwrap());
        assert!(((p2 - p1) / 0.2 - 37.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn speedup_values_and_errors() {
        assert_eq!(speedup(2.0, 2.0).unwrap(), 1.0);
        assert!((speedup(14.72, 1.0).unwrap() - 14.72).abs() < 1e-12);
        assert!(speedup(0.0, 1.0).is_err());
        assert!(speedup(1.0, -1.0).is_err());
    }

    #[test]
    fn soft_and_hard_satisfaction() {
        let vocab = Vocabulary::new(["a", "b", "c", "d", "e", "x"]).unwrap();
        let concepts = ConceptSet::new(["a", "b", "c", "d", "e"]).unwrap();
        let full = result(vec![0, 1, 2, 3, 4]);
        let partial = result(vec![0, 5, 1]);
        let m = constraint_metrics(&vocab, &[(&full, &concepts), (&partial, &concepts)]).unwrap();
        assert!((m.soft - 0.7).abs() < 1e-12);
        assert_eq!(m.hard, 0.5);
        let m = constraint_metrics(&vocab, &[(&partial, &concepts)]).unwrap();
        assert!((m.soft - 0.4).abs() < 1e-12);
        assert_eq!(m.hard, 0.0);
        let m = constraint_metrics(&vocab, &[(&full, &concepts)]).unwrap();
        assert_eq!((m.soft, m.hard), (1.0, 1.0));
        assert!(constraint_metrics(&vocab, &[]).is_err());
    }

    #[test]
    fn reward_rate_uses_inclusive_threshold() {
        use crate::rewards::BlocklistReward;
        let vocab = Vocabulary::new(["ok", "bad", "worse"]).unwrap();
        let block = BlocklistReward::new(["bad", "worse"]).unwrap();
        let clean = result(vec![0]);
        let half = result(vec![1]);
        let both = result(vec![1, 2]);
        let rate = |rs: &[&GenerationResult], t| {
            let pairs: Vec<(&GenerationResult, &dyn RewardFunction)> =
                rs.iter().map(|r| (*r, &block as &dyn RewardFunction)).collect();
            reward_satisfaction_rate(&vocab, &pairs, t).unwrap()
        };
        assert_eq!(rate(&[&clean, &clean], 0.5), 1.0);
        assert_eq!(rate(&[&both, &clean], 0.5), 0.5);
        assert_eq!(rate(&[&half], 0.5), 1.0);
    }

    #[test]
    fn presets_are_listed_by_draft() {
        assert_eq!(cost_preset("opt-125m").unwrap().commongen, 0.077);
        assert_eq!(cost_preset("Bloomz-1.7B").unwrap().htg, 0.358);
        assert!(cost_preset("gpt-2").is_none());
        assert!(CostModel::new(0.0).is_err());
        assert!(CostModel::new(1.5).unwrap().is_unusual());
    }
}
