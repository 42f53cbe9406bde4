//! Constrained decoding with lookahead heuristics.
//!
//! Every emitted token is chosen among the target's top-k candidates by
//! rolling each candidate forward `d` greedy tokens and scoring candidate plus
//! rollout with the reward. The exact variant rolls out with the target; the
//! approximate variant hands rollouts to the draft model.

use crate::decode::{GenerationResult, Output};
use crate::error::{Error, Result};
use crate::lm::{ensure_shared_vocabulary, CallLedger, Distribution, LanguageModel, Metered, TokenId};
use crate::rewards::RewardFunction;

/// Picks one token among the top `k` of `candidates_from`.
///
/// `context` is the full model prefix; `generated` is the part of it the
/// reward sees. Each candidate costs up to `d` rollout calls (fewer when the
/// rollout reaches end-of-sequence, none for an end-of-sequence candidate).
/// The highest reward wins; ties keep the earlier, more probable candidate.
#[allow(clippy::too_many_arguments)]
pub fn constrained_token(
    candidates_from: &Distribution,
    k: usize,
    d: usize,
    rollout: Metered<'_>,
    reward: &dyn RewardFunction,
    context: &[TokenId],
    generated: &[TokenId],
    ledger: &mut CallLedger,
) -> Result<TokenId> {
    let vocab = rollout.vocabulary();
    let mut best: Option<(TokenId, f64)> = None;
    let mut extended = context.to_vec();
    let mut scored = generated.to_vec();
    for cand in candidates_from.top_k(k) {
        extended.truncate(context.len());
        extended.push(cand);
        let lookahead = if vocab.is_eos(cand) { Vec::new() } else { rollout.greedy_rollout(&extended, d, ledger)? };
        scored.truncate(generated.len());
        scored.push(cand);
        scored.extend_from_slice(&lookahead);
        let r = reward.score(vocab, &scored);
        if best.is_none_or(|(_, best_r)| r > best_r) {
            best = Some((cand, r));
        }
    }
    best.map(|(t, _)| t).ok_or_else(|| Error::Internal("no lookahead candidates".into()))
}

fn decode_lookahead(
    target: Metered<'_>,
    rollout: Metered<'_>,
    reward: &dyn RewardFunction,
    prompt: &[TokenId],
    d: usize,
    k: usize,
    max_len: usize,
) -> Result<GenerationResult> {
    if d == 0 || k == 0 {
        return Err(Error::config("lookahead length and candidate count must be at least 1"));
    }
    let mut ledger = CallLedger::default();
    let mut out = Output::new(target.vocabulary(), prompt, max_len);
    let prompt_len = prompt.len();
    while !out.is_done() {
        let context = out.context();
        let dist = target.next_distribution(context, &mut ledger)?;
        let tok = constrained_token(&dist, k, d, rollout, reward, context, &context[prompt_len..], &mut ledger)?;
        out.push(tok);
    }
    Ok(out.finish(ledger, Vec::new()))
}

/// Exact lookaheads: `1 + k * d` target calls per emitted token at most.
pub fn decode_cdlh(
    target: &dyn LanguageModel,
    reward: &dyn RewardFunction,
    prompt: &[TokenId],
    d: usize,
    k: usize,
    max_len: usize,
) -> Result<GenerationResult> {
    decode_lookahead(Metered::target(target), Metered::target(target), reward, prompt, d, k, max_len)
}

/// Draft-model lookaheads: one target call and at most `k * d` draft calls per
/// emitted token.
pub fn decode_cdlh_appx(
    target: &dyn LanguageModel,
    draft: &dyn LanguageModel,
    reward: &dyn RewardFunction,
    prompt: &[TokenId],
    d: usize,
    k: usize,
    max_len: usize,
) -> Result<GenerationResult> {
    ensure_shared_vocabulary(target, draft)?;
    decode_lookahead(Metered::target(target), Metered::draft(draft), reward, prompt, d, k, max_len)
}
