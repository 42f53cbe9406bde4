use crate::decode::{GenerationResult, Output};
use crate::error::{Error, Result};
use crate::lm::{ensure_shared_vocabulary, CallLedger, LanguageModel, Metered, TokenId};
use crate::verify::{hard_reject, speculative_verify, RngStream, VerifyMode};

/// Plain speculative decoding.
///
/// Each round drafts up to `d` tokens (greedy in hard mode, sampled in
/// speculative mode), scores them with one target pass, emits the accepted
/// prefix and then one target token: the argmax or residual replacement at the
/// first rejection, or a bonus token from an extra target call when the whole
/// draft was accepted.
pub fn decode_speculative(
    target: &dyn LanguageModel,
    draft: &dyn LanguageModel,
    prompt: &[TokenId],
    d: usize,
    max_len: usize,
    mode: VerifyMode,
    rng: &mut RngStream,
) -> Result<GenerationResult> {
    if d == 0 {
        return Err(Error::config("draft length must be at least 1"));
    }
    ensure_shared_vocabulary(target, draft)?;
    let (target, draft) = (Metered::target(target), Metered::draft(draft));
    let vocab = target.vocabulary();
    let mut ledger = CallLedger::default();
    let mut out = Output::new(vocab, prompt, max_len);

    while !out.is_done() {
        let mut context = out.context().to_vec();
        let mut drafted = Vec::with_capacity(d);
        let mut draft_dists = Vec::with_capacity(d);
        for _ in 0..d {
            let q = draft.next_distribution(&context, &mut ledger)?;
            let tok = match mode {
                VerifyMode::Hard => q.argmax(),
                VerifyMode::Spec => rng.sample(&q),
            };
            drafted.push(tok);
            draft_dists.push(q);
            context.push(tok);
            if vocab.is_eos(tok) {
                break;
            }
        }

        let target_dists = target.forward_scores(out.context(), &drafted, &mut ledger)?;
        let outcome = match mode {
            VerifyMode::Hard => hard_reject(&drafted, &target_dists)?,
            VerifyMode::Spec => speculative_verify(&drafted, &draft_dists, &target_dists, rng)?,
        };

        for &tok in &drafted[..outcome.n] {
            out.push(tok);
        }
        if out.is_done() {
            break;
        }
        let next = if outcome.n < drafted.len() {
            match mode {
                VerifyMode::Hard => target_dists[outcome.n].argmax(),
                VerifyMode::Spec => outcome
                    .replacement
                    .ok_or_else(|| Error::Internal("rejection without a replacement token".into()))?,
            }
        } else {
            let p = target.next_distribution(out.context(), &mut ledger)?;
            match mode {
                VerifyMode::Hard => p.argmax(),
                VerifyMode::Spec => rng.sample(&p),
            }
        };
        out.push(next);
    }
    Ok(out.finish(ledger, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::decode_greedy;
    use crate::models::ScriptedModel;

    fn pair() -> (ScriptedModel, ScriptedModel) {
        // target always says A then B; the draft always says B
        let target =
            ScriptedModel::from_json(r#"{"vocab": ["<eos>", "A", "B"], "table": {}, "default": {"A": 0.8, "B": 0.2}}"#)
                .unwrap();
        let draft =
            ScriptedModel::from_json(r#"{"vocab": ["<eos>", "A", "B"], "table": {}, "default": {"A": 0.2, "B": 0.8}}"#)
                .unwrap();
        (target, draft)
    }

    #[test]
    fn self_draft_matches_greedy() {
        let vocab = crate::lm::Vocabulary::new(["<eos>", "a", "b", "c"]).unwrap();
        let m = ScriptedModel::random("m", vocab, 5, 3.0, 2).unwrap();
        let g = decode_greedy(&m, &[], 12).unwrap();
        let s = decode_speculative(&m, &m, &[], 3, 12, VerifyMode::Hard, &mut RngStream::new(0)).unwrap();
        assert_eq!(s.tokens, g.tokens);
    }

    #[test]
    fn disagreeing_pair_costs_one_draft_and_one_target_per_token() {
        let (target, draft) = pair();
        let r = decode_speculative(&target, &draft, &[], 1, 8, VerifyMode::Hard, &mut RngStream::new(0)).unwrap();
        assert_eq!(r.tokens, vec![1; 8]);
        assert_eq!(r.ledger.draft_calls, 8);
        assert_eq!(r.ledger.target_calls, 8);
        assert_eq!(r.ledger.emitted_tokens, 8);
    }

    #[test]
    fn vocabulary_mismatch_is_rejected() {
        let (target, _) = pair();
        let other =
            ScriptedModel::from_json(r#"{"vocab": ["<eos>", "A"], "table": {}, "default": {"A": 1.0}}"#).unwrap();
        let err = decode_speculative(&target, &other, &[], 2, 4, VerifyMode::Hard, &mut RngStream::new(0)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
