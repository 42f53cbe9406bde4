//! Language-model interface, vocabulary, probability vectors and the call
//! ledger every decoder charges.
//!
//! Models never count their own invocations. A decoder wraps each model in a
//! [`Metered`] handle bound to a [`Role`]; every forward pass made through
//! that handle is charged to the matching counter of a [`CallLedger`].

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = u32;

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const SEP: &str = "<sep>";

/// Tolerance on the total mass of a [`Distribution`].
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Closed, ordered word-level vocabulary. Token ids are dense in `[0, len)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    bos: Option<TokenId>,
    eos: Option<TokenId>,
    sep: Option<TokenId>,
}

impl Vocabulary {
    /// Builds a vocabulary from an ordered token list. `<bos>`, `<eos>` and
    /// `<sep>` are recognised as special tokens when present.
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(Error::config("vocabulary is empty"));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::config(format!("token {tok:?} is empty or contains whitespace")));
            }
            if index.insert(tok.clone(), id as TokenId).is_some() {
                return Err(Error::config(format!("duplicate token {tok:?}")));
            }
        }
        let bos = index.get(BOS).copied();
        let eos = index.get(EOS).copied();
        let sep = index.get(SEP).copied();
        Ok(Self { tokens, index, bos, eos, sep })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn bos(&self) -> Option<TokenId> {
        self.bos
    }

    pub fn eos(&self) -> Option<TokenId> {
        self.eos
    }

    pub fn sep(&self) -> Option<TokenId> {
        self.sep
    }

    pub fn is_eos(&self, id: TokenId) -> bool {
        self.eos == Some(id)
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn contains_id(&self, id: TokenId) -> bool {
        (id as usize) < self.tokens.len()
    }

    /// Whitespace tokenization against the closed vocabulary.
    pub fn tokenize(&self, text: &str) -> Result<Vec<TokenId>> {
        text.split_whitespace()
            .map(|w| self.id(w).ok_or_else(|| Error::input(format!("unknown token {w:?}"))))
            .collect()
    }

    pub fn detokenize(&self, ids: &[TokenId]) -> Result<String> {
        let words = ids
            .iter()
            .map(|&id| self.token(id).ok_or_else(|| Error::input(format!("token id {id} out of range"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(words.join(" "))
    }

    pub fn check_ids(&self, ids: &[TokenId]) -> Result<()> {
        match ids.iter().find(|&&id| !self.contains_id(id)) {
            Some(id) => Err(Error::input(format!("token id {id} outside vocabulary of size {}", self.len()))),
            None => Ok(()),
        }
    }
}

/// Probability vector over a vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Wraps an already-normalized vector, checking the mass invariant.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::config("distribution over an empty vocabulary"));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Numeric(format!("probability {p} outside [0, 1]")));
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Numeric(format!("distribution mass {mass} is not 1")));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Numeric("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Numeric("weights have zero total mass".into()));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    /// All mass on one token.
    pub fn point(size: usize, token: TokenId) -> Result<Self> {
        if (token as usize) >= size {
            return Err(Error::input(format!("token {token} outside vocabulary of size {size}")));
        }
        let mut probs = vec![0.0; size];
        probs[token as usize] = 1.0;
        Ok(Self { probs })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        Self::from_weights(vec![1.0; size])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, token: TokenId) -> f64 {
        self.probs.get(token as usize).copied().unwrap_or(0.0)
    }

    /// Most probable token; ties go to the lowest id.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best as TokenId
    }

    /// Tokens ranked by descending probability, ties by ascending id.
    pub fn ranked(&self) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = (0..self.probs.len() as TokenId).collect();
        ids.sort_by(|&a, &b| self.probs[b as usize].total_cmp(&self.probs[a as usize]).then(a.cmp(&b)));
        ids
    }

    pub fn top_k(&self, k: usize) -> Vec<TokenId> {
        let mut ranked = self.ranked();
        ranked.truncate(k);
        ranked
    }

    /// Inverse-CDF draw for a uniform variate `u` in `[0, 1)`.
    pub fn sample_with(&self, u: f64) -> TokenId {
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                last_positive = i;
                acc += p;
                if u < acc {
                    return i as TokenId;
                }
            }
        }
        // rounding left u above the accumulated mass
        last_positive as TokenId
    }
}

/// Which counter a forward pass is charged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Draft,
    Target,
}

/// Raw call counts for one generation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallLedger {
    pub draft_calls: u64,
    pub target_calls: u64,
    pub emitted_tokens: u64,
}

impl CallLedger {
    pub fn charge(&mut self, role: Role) {
        match role {
            Role::Draft => self.draft_calls += 1,
            Role::Target => self.target_calls += 1,
        }
    }

    pub fn calls(&self, role: Role) -> u64 {
        match role {
            Role::Draft => self.draft_calls,
            Role::Target => self.target_calls,
        }
    }

    pub fn draft_per_token(&self) -> Option<f64> {
        (self.emitted_tokens > 0).then(|| self.draft_calls as f64 / self.emitted_tokens as f64)
    }

    pub fn target_per_token(&self) -> Option<f64> {
        (self.emitted_tokens > 0).then(|| self.target_calls as f64 / self.emitted_tokens as f64)
    }

    /// Pools counts from another generation.
    pub fn absorb(&mut self, other: &CallLedger) {
        self.draft_calls += other.draft_calls;
        self.target_calls += other.target_calls;
        self.emitted_tokens += other.emitted_tokens;
    }
}

/// An autoregressive model over a closed vocabulary.
///
/// Implementations must be deterministic: the same prefix always yields the
/// same distribution.
pub trait LanguageModel: Send + Sync {
    fn vocabulary(&self) -> &Vocabulary;

    /// Tag used to tell models apart in reports and pairing checks.
    fn identity(&self) -> &str;

    /// Next-token distribution for a prefix whose ids are already known to be
    /// inside the vocabulary.
    fn distribution(&self, prefix: &[TokenId]) -> Result<Distribution>;

    /// Distributions after `prefix + drafted[..i]` for every `i < drafted.len()`.
    fn distributions_along(&self, prefix: &[TokenId], drafted: &[TokenId]) -> Result<Vec<Distribution>> {
        let mut context = prefix.to_vec();
        let mut out = Vec::with_capacity(drafted.len());
        for &tok in drafted {
            out.push(self.distribution(&context)?);
            context.push(tok);
        }
        Ok(out)
    }
}

/// Errors unless both models share an identical vocabulary.
pub fn ensure_shared_vocabulary(a: &dyn LanguageModel, b: &dyn LanguageModel) -> Result<()> {
    if a.vocabulary() == b.vocabulary() {
        Ok(())
    } else {
        Err(Error::config(format!("models {:?} and {:?} do not share a vocabulary", a.identity(), b.identity())))
    }
}

/// A model bound to a ledger role. All forward passes a decoder makes go
/// through one of these.
#[derive(Clone, Copy)]
pub struct Metered<'m> {
    model: &'m dyn LanguageModel,
    role: Role,
}

impl<'m> Metered<'m> {
    pub fn new(model: &'m dyn LanguageModel, role: Role) -> Self {
        Self { model, role }
    }

    pub fn target(model: &'m dyn LanguageModel) -> Self {
        Self::new(model, Role::Target)
    }

    pub fn draft(model: &'m dyn LanguageModel) -> Self {
        Self::new(model, Role::Draft)
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn model(&self) -> &'m dyn LanguageModel {
        self.model
    }

    pub fn vocabulary(&self) -> &'m Vocabulary {
        self.model.vocabulary()
    }

    /// One forward pass over `prefix`; charges exactly one call.
    pub fn next_distribution(&self, prefix: &[TokenId], ledger: &mut CallLedger) -> Result<Distribution> {
        let vocab = self.model.vocabulary();
        if vocab.is_empty() {
            return Err(Error::config("model has an empty vocabulary"));
        }
        vocab.check_ids(prefix)?;
        let dist = self.model.distribution(prefix)?;
        ledger.charge(self.role);
        Ok(dist)
    }

    /// Scores a drafted continuation in a single forward pass: element `i` is
    /// the distribution after `prefix + drafted[..i]`. Charges exactly one call
    /// whatever the draft length.
    pub fn forward_scores(
        &self,
        prefix: &[TokenId],
        drafted: &[TokenId],
        ledger: &mut CallLedger,
    ) -> Result<Vec<Distribution>> {
        if drafted.is_empty() {
            return Err(Error::input("forward_scores needs at least one drafted token"));
        }
        let vocab = self.model.vocabulary();
        vocab.check_ids(prefix)?;
        vocab.check_ids(drafted)?;
        let dists = self.model.distributions_along(prefix, drafted)?;
        ledger.charge(self.role);
        Ok(dists)
    }

    /// Greedy rollout of up to `len` tokens; stops after an end-of-sequence
    /// token. Charges one call per generated token.
    pub fn greedy_rollout(&self, prefix: &[TokenId], len: usize, ledger: &mut CallLedger) -> Result<Vec<TokenId>> {
        let mut context = prefix.to_vec();
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            let tok = self.next_distribution(&context, ledger)?.argmax();
            out.push(tok);
            context.push(tok);
            if self.vocabulary().is_eos(tok) {
                break;
            }
        }
        Ok(out)
    }
}
