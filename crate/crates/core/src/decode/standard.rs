use crate::decode::{GenerationResult, Output};
use crate::error::{Error, Result};
use crate::lm::{CallLedger, Distribution, LanguageModel, Metered, TokenId};
use crate::verify::RngStream;

/// Argmax decoding: one target call per emitted token.
pub fn decode_greedy(target: &dyn LanguageModel, prompt: &[TokenId], max_len: usize) -> Result<GenerationResult> {
    let target = Metered::target(target);
    let mut ledger = CallLedger::default();
    let mut out = Output::new(target.vocabulary(), prompt, max_len);
    while !out.is_done() {
        let tok = target.next_distribution(out.context(), &mut ledger)?.argmax();
        out.push(tok);
    }
    Ok(out.finish(ledger, Vec::new()))
}

/// Smallest probability-ranked token set whose mass reaches `top_p`,
/// renormalized.
pub fn nucleus(dist: &Distribution, top_p: f64) -> Result<Distribution> {
    if !(top_p > 0.0 && top_p <= 1.0) {
        return Err(Error::config(format!("nucleus mass must lie in (0, 1], got {top_p}")));
    }
    let mut weights = vec![0.0; dist.len()];
    let mut mass = 0.0;
    for tok in dist.ranked() {
        let p = dist.prob(tok);
        weights[tok as usize] = p;
        mass += p;
        // absorbs summation rounding, e.g. 0.6 + 0.3 < 0.9
        if mass >= top_p - 1e-12 {
            break;
        }
    }
    if weights.iter().zip(dist.probs()).all(|(w, p)| w == p) {
        return Ok(dist.clone());
    }
    Distribution::from_weights(weights)
}

/// Top-p sampling: one target call per emitted token.
pub fn decode_nucleus(
    target: &dyn LanguageModel,
    prompt: &[TokenId],
    top_p: f64,
    max_len: usize,
    rng: &mut RngStream,
) -> Result<GenerationResult> {
    if !(top_p > 0.0 && top_p <= 1.0) {
        return Err(Error::config(format!("nucleus mass must lie in (0, 1], got {top_p}")));
    }
    let target = Metered::target(target);
    let mut ledger = CallLedger::default();
    let mut out = Output::new(target.vocabulary(), prompt, max_len);
    while !out.is_done() {
        let dist = target.next_distribution(out.context(), &mut ledger)?;
        let tok = rng.sample(&nucleus(&dist, top_p)?);
        out.push(tok);
    }
    Ok(out.finish(ledger, Vec::new()))
}

#[derive(Debug, Clone)]
struct Hypothesis {
    tokens: Vec<TokenId>,
    logp: f64,
}

impl Hypothesis {
    fn normalized(&self) -> f64 {
        self.logp / self.tokens.len().max(1) as f64
    }
}

/// Length-normalized beam search.
///
/// Each step expands every live hypothesis with one target call and keeps the
/// best `width - finished` continuations by cumulative log-probability.
/// Hypotheses ending in end-of-sequence retire into the finished pool; the
/// search stops when `width` hypotheses have finished, none are live, or the
/// length limit is reached. The winner has the highest mean log-probability
/// per token, earlier-ranked hypotheses winning ties.
pub fn decode_beam(
    target: &dyn LanguageModel,
    prompt: &[TokenId],
    width: usize,
    max_len: usize,
) -> Result<GenerationResult> {
    if width == 0 {
        return Err(Error::config("beam width must be at least 1"));
    }
    let target = Metered::target(target);
    let vocab = target.vocabulary();
    let mut ledger = CallLedger::default();
    let mut live = vec![Hypothesis { tokens: Vec::new(), logp: 0.0 }];
    let mut finished: Vec<Hypothesis> = Vec::new();

    for _ in 0..max_len {
        if live.is_empty() || finished.len() >= width {
            break;
        }
        let mut candidates: Vec<(f64, usize, TokenId)> = Vec::new();
        for (h_idx, h) in live.iter().enumerate() {
            let mut context = prompt.to_vec();
            context.extend_from_slice(&h.tokens);
            let dist = target.next_distribution(&context, &mut ledger)?;
            for (tok, &p) in dist.probs().iter().enumerate() {
                if p > 0.0 {
                    candidates.push((h.logp + p.ln(), h_idx, tok as TokenId));
                }
            }
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        candidates.truncate(width - finished.len());
        let mut next = Vec::with_capacity(candidates.len());
        for (logp, h_idx, tok) in candidates {
            let mut tokens = live[h_idx].tokens.clone();
            tokens.push(tok);
            let h = Hypothesis { tokens, logp };
            if vocab.is_eos(tok) {
                finished.push(h);
            } else {
                next.push(h);
            }
        }
        live = next;
    }

    let best = finished
        .into_iter()
        .chain(live)
        .reduce(|best, h| if h.normalized() > best.normalized() { h } else { best })
        .ok_or_else(|| Error::Internal("beam search ended with no hypothesis".into()))?;
    let mut out = Output::new(vocab, prompt, max_len);
    for tok in best.tokens {
        out.push(tok);
    }
    Ok(out.finish(ledger, Vec::new()))
}
