//! Decoder suite. Every decoder charges its forward passes to a
//! [`CallLedger`] and returns a [`GenerationResult`].
//!
//! Output accounting follows one rule everywhere: a terminating
//! end-of-sequence token counts as an emitted token (it cost a forward pass)
//! but is not part of [`GenerationResult::tokens`].

mod cdsl;
mod lookahead;
mod speculative;
mod standard;

use serde::{Deserialize, Serialize};

pub use cdsl::{decode_cdsl, CdslConfig, EmittedToken, Provenance, StepState, StepTrace};
pub use lookahead::{constrained_token, decode_cdlh, decode_cdlh_appx};
pub use speculative::decode_speculative;
pub use standard::{decode_beam, decode_greedy, decode_nucleus, nucleus};

use crate::lm::{CallLedger, TokenId, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Eos,
    LengthLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    /// Generated tokens, prompt and terminating end-of-sequence excluded.
    pub tokens: Vec<TokenId>,
    pub ledger: CallLedger,
    /// Per-iteration state record (CDSL only).
    pub traces: Vec<StepTrace>,
    pub terminated_by: Termination,
}

/// Growing output sequence with end-of-sequence and length-limit handling.
pub(crate) struct Output<'v> {
    vocab: &'v Vocabulary,
    context: Vec<TokenId>,
    prompt_len: usize,
    max_len: usize,
    done: Option<Termination>,
}

impl<'v> Output<'v> {
    pub(crate) fn new(vocab: &'v Vocabulary, prompt: &[TokenId], max_len: usize) -> Self {
        let done = (max_len == 0).then_some(Termination::LengthLimit);
        Self { vocab, context: prompt.to_vec(), prompt_len: prompt.len(), max_len, done }
    }

    /// Prompt plus everything emitted so far.
    pub(crate) fn context(&self) -> &[TokenId] {
        &self.context
    }

    /// Emitted tokens, including a terminating end-of-sequence.
    pub(crate) fn generated(&self) -> &[TokenId] {
        &self.context[self.prompt_len..]
    }

    pub(crate) fn is_done(&self) -> bool {
        self.done.is_some()
    }

    /// Appends one token; returns `false` once the output is closed (the
    /// token is then dropped).
    pub(crate) fn push(&mut self, token: TokenId) -> bool {
        if self.done.is_some() {
            return false;
        }
        self.context.push(token);
        if self.vocab.is_eos(token) {
            self.done = Some(Termination::Eos);
        } else if self.generated().len() >= self.max_len {
            self.done = Some(Termination::LengthLimit);
        }
        true
    }

    pub(crate) fn finish(self, mut ledger: CallLedger, traces: Vec<StepTrace>) -> GenerationResult {
        let mut tokens = self.context[self.prompt_len..].to_vec();
        ledger.emitted_tokens = tokens.len() as u64;
        if self.done == Some(Termination::Eos) {
            tokens.pop();
        }
        GenerationResult { tokens, ledger, traces, terminated_by: self.done.unwrap_or(Termination::LengthLimit) }
    }
}
