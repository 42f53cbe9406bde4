//! Runs one decoder over a dataset and aggregates the results.
//!
//! Examples are decoded in parallel. Each example gets its own RNG stream
//! derived from `(seed, example id)`, and results are collected in dataset
//! order, so thread scheduling never changes any output byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lookahead_core::decode::{
    decode_beam, decode_cdlh, decode_cdlh_appx, decode_cdsl, decode_greedy, decode_nucleus, decode_speculative,
    GenerationResult, StepState, Termination,
};
use lookahead_core::lm::{CallLedger, LanguageModel, TokenId};
use lookahead_core::metrics::{constraint_metrics, reward_satisfaction_rate, CostModel, MetricsReport};
use lookahead_core::rewards::{ConceptSet, RewardFunction};
use lookahead_core::verify::RngStream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{DecodeParams, ExperimentConfig, Method};
use crate::dataset::{read_jsonl, write_jsonl, Constraint, TaskExample};
use crate::error::{setup, HarnessError, Result};
use crate::models::load_model;
use crate::report::{write_csv, TableRow};

/// A target model with an optional draft.
pub struct ModelPair {
    pub target: Box<dyn LanguageModel>,
    pub draft: Option<Box<dyn LanguageModel>>,
    pub target_label: String,
    pub draft_label: Option<String>,
}

impl ModelPair {
    pub fn load(target: &Path, draft: Option<&Path>) -> Result<Self> {
        let target_model = load_model(target)?;
        let draft_model = draft.map(load_model).transpose()?;
        if let Some(d) = &draft_model {
            setup(lookahead_core::lm::ensure_shared_vocabulary(target_model.as_ref(), d.as_ref()))?;
        }
        Ok(Self {
            target_label: target_model.identity().to_owned(),
            draft_label: draft_model.as_ref().map(|d| d.identity().to_owned()),
            target: target_model,
            draft: draft_model,
        })
    }
}

/// A dataset example with its prompt tokenized and its reward built.
pub struct PreparedExample {
    pub example: TaskExample,
    pub prompt: Vec<TokenId>,
    pub constraint: Constraint,
}

pub fn prepare(examples: Vec<TaskExample>, target: &dyn LanguageModel) -> Result<Vec<PreparedExample>> {
    examples
        .into_iter()
        .map(|example| {
            let prompt = target
                .vocabulary()
                .tokenize(&example.prompt)
                .map_err(|e| HarnessError::config(format!("example {}: {e}", example.id)))?;
            let constraint = example.constraint()?;
            Ok(PreparedExample { example, prompt, constraint })
        })
        .collect()
}

/// Stable per-example seed.
pub fn example_seed(seed: u64, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn draft_of(pair: &ModelPair, method: Method) -> Result<&dyn LanguageModel> {
    pair.draft.as_deref().ok_or_else(|| HarnessError::config(format!("method {method} needs a draft model")))
}

/// Dispatches one generation.
pub fn decode_one(
    method: Method,
    params: &DecodeParams,
    pair: &ModelPair,
    reward: &dyn RewardFunction,
    prompt: &[TokenId],
    rng: &mut RngStream,
) -> Result<GenerationResult> {
    let target = pair.target.as_ref();
    let result = match method {
        Method::Greedy => decode_greedy(target, prompt, params.l_m),
        Method::Nucleus => decode_nucleus(target, prompt, params.p, params.l_m, rng),
        Method::Beam => decode_beam(target, prompt, params.beam_width, params.l_m),
        Method::Sd => {
            decode_speculative(target, draft_of(pair, method)?, prompt, params.d, params.l_m, params.mode, rng)
        }
        Method::Cdlh => decode_cdlh(target, reward, prompt, params.d, params.k, params.l_m),
        Method::CdlhAppx => {
            decode_cdlh_appx(target, draft_of(pair, method)?, reward, prompt, params.d, params.k, params.l_m)
        }
        Method::Cdsl => decode_cdsl(target, draft_of(pair, method)?, reward, prompt, &params.cdsl(), rng),
    };
    Ok(result?)
}

/// One line of the per-example output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    pub output: String,
    pub terminated_by: Termination,
    pub draft_calls: u64,
    pub target_calls: u64,
    pub emitted_tokens: u64,
    pub reward: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covered: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concepts: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub states: BTreeMap<String, u64>,
}

/// Everything one method produced on one dataset.
pub struct Evaluation {
    pub method: Method,
    pub results: Vec<GenerationResult>,
    pub records: Vec<ExampleRecord>,
    pub pooled: CallLedger,
    pub metrics: MetricsReport,
    pub state_histogram: BTreeMap<String, u64>,
    /// Mean acceptance score over CDSL iterations.
    pub mean_acceptance: Option<f64>,
}

fn histogram(result: &GenerationResult) -> BTreeMap<String, u64> {
    let mut h = BTreeMap::new();
    for t in &result.traces {
        *h.entry(t.state.label().to_owned()).or_insert(0) += 1;
    }
    h
}

pub fn evaluate(
    method: Method,
    params: &DecodeParams,
    pair: &ModelPair,
    examples: &[PreparedExample],
    seed: u64,
    cost: CostModel,
    reward_threshold: f64,
) -> Result<Evaluation> {
    params.validate(method)?;
    if examples.is_empty() {
        return Err(HarnessError::config("no examples to evaluate"));
    }
    let results: Vec<GenerationResult> = examples
        .par_iter()
        .map(|ex| {
            let mut rng = RngStream::new(example_seed(seed, &ex.example.id));
            decode_one(method, params, pair, ex.constraint.reward(), &ex.prompt, &mut rng)
        })
        .collect::<Result<_>>()?;

    let vocab = pair.target.vocabulary();
    let mut pooled = CallLedger::default();
    let mut state_histogram: BTreeMap<String, u64> = BTreeMap::new();
    if method == Method::Cdsl {
        for s in StepState::ALL {
            state_histogram.insert(s.label().to_owned(), 0);
        }
    }
    let mut acceptance = (0.0, 0u64);
    let mut records = Vec::with_capacity(results.len());
    for (ex, r) in examples.iter().zip(&results) {
        pooled.absorb(&r.ledger);
        let states = histogram(r);
        for (k, v) in &states {
            *state_histogram.entry(k.clone()).or_insert(0) += v;
        }
        for t in &r.traces {
            acceptance.0 += t.a;
            acceptance.1 += 1;
        }
        let concepts = ex.constraint.concepts();
        let words: Vec<&str> = r.tokens.iter().filter_map(|&t| vocab.token(t)).collect();
        records.push(ExampleRecord {
            id: ex.example.id.clone(),
            output: words.join(" "),
            terminated_by: r.terminated_by,
            draft_calls: r.ledger.draft_calls,
            target_calls: r.ledger.target_calls,
            emitted_tokens: r.ledger.emitted_tokens,
            reward: ex.constraint.reward().score(vocab, &r.tokens),
            covered: concepts.map(|c| c.covered(&words)),
            concepts: concepts.map(ConceptSet::len),
            states,
        });
    }

    let mut metrics = MetricsReport::new(&pooled, cost)?;
    let lexical: Vec<(&GenerationResult, &ConceptSet)> =
        examples.iter().zip(&results).filter_map(|(ex, r)| ex.constraint.concepts().map(|c| (r, c))).collect();
    if !lexical.is_empty() {
        metrics = metrics.with_constraints(constraint_metrics(vocab, &lexical)?);
    }
    if lexical.len() < examples.len() {
        let blocked: Vec<(&GenerationResult, &dyn RewardFunction)> = examples
            .iter()
            .zip(&results)
            .filter(|(ex, _)| ex.constraint.concepts().is_none())
            .map(|(ex, r)| (r, ex.constraint.reward()))
            .collect();
        metrics.reward_satisfaction = Some(reward_satisfaction_rate(vocab, &blocked, reward_threshold)?);
    }
    Ok(Evaluation {
        method,
        results,
        records,
        pooled,
        metrics,
        state_histogram,
        mean_acceptance: (acceptance.1 > 0).then(|| acceptance.0 / acceptance.1 as f64),
    })
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: Method,
    pub target: String,
    pub draft: Option<String>,
    pub data: String,
    pub examples: usize,
    pub seed: u64,
    pub params: DecodeParams,
    pub metrics: MetricsReport,
    pub pooled: CallLedger,
    pub state_histogram: BTreeMap<String, u64>,
    pub mean_acceptance: Option<f64>,
}

/// Files written by [`run_experiment`].
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const EXAMPLES_JSONL: &str = "examples.jsonl";

fn display(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

/// Loads models and data, evaluates the configured method (and baseline, if
/// any) and writes `report.json`, `report.csv` and `examples.jsonl` to the
/// output directory when one is configured.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let needs_draft = config.method.needs_draft() || config.baseline.is_some_and(Method::needs_draft);
    let pair =
        ModelPair::load(config.target.as_deref().expect("validated"), config.draft.as_deref().filter(|_| needs_draft))?;
    let data = config.data.as_deref().expect("validated");
    let examples = prepare(read_jsonl(data)?, pair.target.as_ref())?;
    let cost = CostModel::new(config.c).map_err(|e| HarnessError::config(e.to_string()))?;
    if cost.is_unusual() {
        eprintln!("warning: c = {} exceeds 1; the draft is costlier than the target", cost.c);
    }
    let params = config.params();
    let eval = evaluate(config.method, &params, &pair, &examples, config.seed, cost, config.reward_threshold)?;
    let mut metrics = eval.metrics.clone();
    let mut rows = Vec::new();
    if let Some(baseline) = config.baseline {
        let base = evaluate(baseline, &params, &pair, &examples, config.seed, cost, config.reward_threshold)?;
        metrics = metrics.with_speedup(baseline.name(), base.metrics.runtime_per_token)?;
        let base_metrics = base.metrics.clone().with_speedup(baseline.name(), base.metrics.runtime_per_token)?;
        rows.push(TableRow::new(baseline, &pair, &base_metrics));
    }
    rows.insert(0, TableRow::new(config.method, &pair, &metrics));

    let report = ExperimentReport {
        method: config.method,
        target: display(&config.target),
        draft: needs_draft.then(|| display(&config.draft)),
        data: data.display().to_string(),
        examples: examples.len(),
        seed: config.seed,
        params,
        metrics,
        pooled: eval.pooled,
        state_histogram: eval.state_histogram.clone(),
        mean_acceptance: eval.mean_acceptance,
    };
    if let Some(out) = &config.out {
        std::fs::create_dir_all(out).map_err(|e| HarnessError::write(out, e))?;
        let path = out.join(REPORT_JSON);
        let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        std::fs::write(&path, json).map_err(|e| HarnessError::write(&path, e))?;
        write_csv(&out.join(REPORT_CSV), &rows)?;
        write_jsonl(&out.join(EXAMPLES_JSONL), &eval.records)?;
    }
    Ok(report)
}
