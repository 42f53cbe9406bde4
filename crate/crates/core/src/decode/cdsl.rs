//! Constrained decoding with speculative lookaheads.
//!
//! Each iteration drafts `d` greedy tokens with the draft model, verifies them
//! with one target pass, scores the accepted prefix with the reward and then
//! acts on the (acceptance, reward) state:
//!
//! | state | condition                  | action                                        |
//! |-------|----------------------------|-----------------------------------------------|
//! | S1    | `a >= a_t` and `r >= r_t`  | emit the accepted prefix                      |
//! | S2/S3 | `a < a_t`                  | Step-1 (target-led tokens), else Step-2       |
//! | S4    | `a >= a_t` and `r < r_t`   | accepted prefix plus one constrained token    |
//!
//! Step-1 lets the target add up to `b` greedy tokens, each checked by a draft
//! lookahead and the reward; Step-2 emits one token chosen by a draft-lookahead
//! search over the target's top-k candidates.
//!
//! An S1 verdict with nothing accepted (possible when `a_t = 0`) takes the S4
//! action so that every iteration emits at least one token.

use serde::{Deserialize, Serialize};

use crate::decode::{constrained_token, GenerationResult, Output};
use crate::error::{Error, Result};
use crate::lm::{ensure_shared_vocabulary, CallLedger, Distribution, LanguageModel, Metered, TokenId};
use crate::rewards::{satisfies, RewardFunction};
use crate::verify::{hard_reject, speculative_verify, RngStream, VerifyMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdslConfig {
    /// Draft (and lookahead) length.
    pub d: usize,
    /// Candidates considered by a constrained step.
    pub k: usize,
    /// Maximum target-led tokens tried in Step-1.
    pub b: usize,
    /// Acceptance threshold. Values above 1 make every iteration low-acceptance.
    pub a_t: f64,
    /// Reward threshold.
    pub r_t: f64,
    /// Maximum generated length.
    pub l_m: usize,
    #[serde(default)]
    pub mode: VerifyMode,
    /// Append the speculative-sampling replacement token to an S1 emission.
    #[serde(default)]
    pub emit_replacement_in_cdsl: bool,
    /// Keep the verified prefix when acceptance is low (S2/S3) instead of
    /// restarting Step-1/Step-2 from the pre-draft context.
    #[serde(default)]
    pub carry_accepted_on_low_acceptance: bool,
}

impl Default for CdslConfig {
    fn default() -> Self {
        Self {
            d: 3,
            k: 3,
            b: 1,
            a_t: 0.6,
            r_t: 0.3,
            l_m: 20,
            mode: VerifyMode::Hard,
            emit_replacement_in_cdsl: false,
            carry_accepted_on_low_acceptance: false,
        }
    }
}

impl CdslConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.k == 0 || self.l_m == 0 {
            return Err(Error::config("d, k and l_m must be at least 1"));
        }
        if !(self.a_t.is_finite() && self.a_t >= 0.0) {
            return Err(Error::config(format!(
                "acceptance threshold must be finite and non-negative, got {}",
                self.a_t
            )));
        }
        if !self.r_t.is_finite() {
            return Err(Error::config("reward threshold must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StepState {
    #[serde(rename = "S1")]
    S1,
    #[serde(rename = "S2/S3-step1")]
    LowAcceptanceStep1,
    #[serde(rename = "S2/S3-step2")]
    LowAcceptanceStep2,
    #[serde(rename = "S4")]
    S4,
}

impl StepState {
    pub const ALL: [StepState; 4] = [Self::S1, Self::LowAcceptanceStep1, Self::LowAcceptanceStep2, Self::S4];

    pub fn label(self) -> &'static str {
        match self {
            Self::S1 => "S1",
            Self::LowAcceptanceStep1 => "S2/S3-step1",
            Self::LowAcceptanceStep2 => "S2/S3-step2",
            Self::S4 => "S4",
        }
    }
}

/// Why a token was allowed into the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Drafted and matched by the target verification pass.
    Verified,
    /// Target argmax proposed during Step-1.
    TargetGreedy,
    /// Chosen among the target's top-k by a lookahead search.
    Constrained,
    /// Drawn from the target residual at a speculative-sampling rejection.
    Replacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedToken {
    pub token: TokenId,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub state: StepState,
    /// Accepted-prefix length and the number of drafted tokens it was out of.
    pub n: usize,
    pub drafted: usize,
    pub a: f64,
    pub r: f64,
    pub tokens_emitted: usize,
    pub emitted: Vec<EmittedToken>,
    pub draft_calls: u64,
    pub target_calls: u64,
}

/// Target distributions already computed by the current verification pass.
struct VerifiedPass<'a> {
    base_len: usize,
    drafted: &'a [TokenId],
    dists: &'a [Distribution],
}

impl VerifiedPass<'_> {
    fn lookup(&self, context: &[TokenId]) -> Option<&Distribution> {
        let j = context.len().checked_sub(self.base_len)?;
        (j < self.drafted.len() && context[self.base_len..] == self.drafted[..j]).then(|| &self.dists[j])
    }
}

fn target_at(
    target: Metered<'_>,
    pass: &VerifiedPass<'_>,
    context: &[TokenId],
    ledger: &mut CallLedger,
) -> Result<Distribution> {
    match pass.lookup(context) {
        Some(dist) => Ok(dist.clone()),
        None => target.next_distribution(context, ledger),
    }
}

fn tagged(tokens: &[TokenId], provenance: Provenance) -> impl Iterator<Item = EmittedToken> + '_ {
    tokens.iter().map(move |&token| EmittedToken { token, provenance })
}

fn concat(parts: &[&[TokenId]]) -> Vec<TokenId> {
    parts.concat()
}

/// Runs the draft-then-validate loop until end-of-sequence or `config.l_m`
/// tokens.
pub fn decode_cdsl(
    target: &dyn LanguageModel,
    draft: &dyn LanguageModel,
    reward: &dyn RewardFunction,
    prompt: &[TokenId],
    config: &CdslConfig,
    rng: &mut RngStream,
) -> Result<GenerationResult> {
    config.validate()?;
    ensure_shared_vocabulary(target, draft)?;
    let (target, draft) = (Metered::target(target), Metered::draft(draft));
    let vocab = target.vocabulary();
    let mut ledger = CallLedger::default();
    let mut traces = Vec::new();
    let mut out = Output::new(vocab, prompt, config.l_m);

    while !out.is_done() {
        let before = ledger;
        let context = out.context().to_vec();
        let generated = out.generated().to_vec();

        let mut drafted = Vec::with_capacity(config.d);
        let mut draft_dists = Vec::with_capacity(config.d);
        let mut draft_context = context.clone();
        for _ in 0..config.d {
            let q = draft.next_distribution(&draft_context, &mut ledger)?;
            let tok = q.argmax();
            drafted.push(tok);
            draft_dists.push(q);
            draft_context.push(tok);
            if vocab.is_eos(tok) {
                break;
            }
        }

        let target_dists = target.forward_scores(&context, &drafted, &mut ledger)?;
        let outcome = match config.mode {
            VerifyMode::Hard => hard_reject(&drafted, &target_dists)?,
            VerifyMode::Spec => speculative_verify(&drafted, &draft_dists, &target_dists, rng)?,
        };
        let pass = VerifiedPass { base_len: context.len(), drafted: &drafted, dists: &target_dists };
        let accepted = &drafted[..outcome.n];
        let r = reward.score(vocab, &concat(&[&generated, accepted]));

        let high_acceptance = outcome.a >= config.a_t;
        let mut emission: Vec<EmittedToken> = Vec::new();
        let state = if high_acceptance && satisfies(r, config.r_t) && outcome.n > 0 {
            emission.extend(tagged(accepted, Provenance::Verified));
            if config.emit_replacement_in_cdsl {
                if let Some(tok) = outcome.replacement {
                    emission.push(EmittedToken { token: tok, provenance: Provenance::Replacement });
                }
            }
            StepState::S1
        } else if !high_acceptance {
            let base: &[TokenId] = if config.carry_accepted_on_low_acceptance { accepted } else { &[] };
            let mut led: Vec<TokenId> = Vec::new();
            let mut step1_succeeded = false;
            for _ in 0..config.b {
                let led_context = concat(&[&context, base, &led]);
                let tok = target_at(target, &pass, &led_context, &mut ledger)?.argmax();
                led.push(tok);
                let lookahead = if vocab.is_eos(tok) {
                    Vec::new()
                } else {
                    draft.greedy_rollout(&concat(&[&led_context, &[tok]]), config.d, &mut ledger)?
                };
                let score = reward.score(vocab, &concat(&[&generated, base, &led, &lookahead]));
                if satisfies(score, config.r_t) {
                    step1_succeeded = true;
                    break;
                }
                if vocab.is_eos(tok) {
                    break;
                }
            }
            emission.extend(tagged(base, Provenance::Verified));
            if step1_succeeded {
                emission.extend(tagged(&led, Provenance::TargetGreedy));
                StepState::LowAcceptanceStep1
            } else {
                let step_context = concat(&[&context, base]);
                let dist = target_at(target, &pass, &step_context, &mut ledger)?;
                let tok = constrained_token(
                    &dist,
                    config.k,
                    config.d,
                    draft,
                    reward,
                    &step_context,
                    &concat(&[&generated, base]),
                    &mut ledger,
                )?;
                emission.push(EmittedToken { token: tok, provenance: Provenance::Constrained });
                StepState::LowAcceptanceStep2
            }
        } else {
            let step_context = concat(&[&context, accepted]);
            let dist = target_at(target, &pass, &step_context, &mut ledger)?;
            let tok = constrained_token(
                &dist,
                config.k,
                config.d,
                draft,
                reward,
                &step_context,
                &concat(&[&generated, accepted]),
                &mut ledger,
            )?;
            emission.extend(tagged(accepted, Provenance::Verified));
            emission.push(EmittedToken { token: tok, provenance: Provenance::Constrained });
            StepState::S4
        };

        let mut pushed = Vec::with_capacity(emission.len());
        for e in emission {
            if !out.push(e.token) {
                break;
            }
            pushed.push(e);
        }
        if pushed.is_empty() {
            return Err(Error::Internal(format!("{} iteration emitted no tokens", state.label())));
        }
        traces.push(StepTrace {
            state,
            n: outcome.n,
            drafted: drafted.len(),
            a: outcome.a,
            r,
            tokens_emitted: pushed.len(),
            emitted: pushed,
            draft_calls: ledger.draft_calls - before.draft_calls,
            target_calls: ledger.target_calls - before.target_calls,
        });
    }
    Ok(out.finish(ledger, traces))
}
