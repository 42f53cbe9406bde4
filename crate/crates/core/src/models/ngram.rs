//! Add-k smoothed n-gram model with truncating back-off.
//!
//! The distribution after a prefix uses the longest suffix of the prefix (at
//! most `order - 1` tokens) that was observed as a context during training:
//!
//! ```text
//! P(t | c) = (count(c, t) + k) / (count(c, .) + k * |V|)
//! ```
//!
//! An unseen context is shortened by one token at a time, without discount,
//! down to the unigram table.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::lm::{Distribution, LanguageModel, TokenId, Vocabulary};

#[derive(Debug, Default, Clone)]
struct ContextCounts {
    total: u64,
    next: HashMap<TokenId, u64>,
}

#[derive(Debug, Clone)]
pub struct NgramModel {
    name: String,
    order: usize,
    smoothing: f64,
    vocab: Vocabulary,
    /// `tables[len]` holds every observed context of exactly `len` tokens.
    tables: Vec<HashMap<Vec<TokenId>, ContextCounts>>,
}

impl NgramModel {
    /// Trains on token-id sequences over a fixed vocabulary.
    pub fn train(vocab: Vocabulary, corpus: &[Vec<TokenId>], order: usize, smoothing: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::config("n-gram order must be at least 1"));
        }
        if smoothing <= 0.0 || !smoothing.is_finite() {
            return Err(Error::config(format!("smoothing constant must be positive, got {smoothing}")));
        }
        if corpus.iter().all(Vec::is_empty) {
            return Err(Error::input("training corpus is empty"));
        }
        let mut tables = vec![HashMap::<Vec<TokenId>, ContextCounts>::new(); order];
        for seq in corpus {
            vocab.check_ids(seq)?;
            for (pos, &tok) in seq.iter().enumerate() {
                for (len, table) in tables.iter_mut().enumerate() {
                    if len > pos {
                        break;
                    }
                    let entry = table.entry(seq[pos - len..pos].to_vec()).or_default();
                    entry.total += 1;
                    *entry.next.entry(tok).or_insert(0) += 1;
                }
            }
        }
        Ok(Self { name: format!("ngram-{order}"), order, smoothing, vocab, tables })
    }

    /// Trains on whitespace-tokenized lines; the vocabulary is every distinct
    /// token in order of first appearance.
    pub fn train_text<S: AsRef<str>>(lines: &[S], order: usize, smoothing: f64) -> Result<Self> {
        let mut tokens: Vec<String> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for line in lines {
            for w in line.as_ref().split_whitespace() {
                if seen.insert(w.to_owned()) {
                    tokens.push(w.to_owned());
                }
            }
        }
        if tokens.is_empty() {
            return Err(Error::input("training corpus is empty"));
        }
        let vocab = Vocabulary::new(tokens)?;
        let corpus = lines.iter().map(|l| vocab.tokenize(l.as_ref())).collect::<Result<Vec<_>>>()?;
        Self::train(vocab, &corpus, order, smoothing)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    /// Raw count of `token` after `context` (exact context length).
    pub fn count(&self, context: &[TokenId], token: TokenId) -> u64 {
        self.tables
            .get(context.len())
            .and_then(|t| t.get(context))
            .and_then(|c| c.next.get(&token))
            .copied()
            .unwrap_or(0)
    }

    /// The context actually used for `prefix` after back-off.
    pub fn effective_context<'p>(&self, prefix: &'p [TokenId]) -> &'p [TokenId] {
        let max = (self.order - 1).min(prefix.len());
        for len in (1..=max).rev() {
            let ctx = &prefix[prefix.len() - len..];
            if self.tables[len].get(ctx).is_some_and(|c| c.total > 0) {
                return ctx;
            }
        }
        &prefix[prefix.len()..]
    }
}

impl LanguageModel for NgramModel {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn identity(&self) -> &str {
        &self.name
    }

    fn distribution(&self, prefix: &[TokenId]) -> Result<Distribution> {
        let ctx = self.effective_context(prefix);
        let counts = self.tables[ctx.len()].get(ctx).ok_or_else(|| Error::Internal("unigram table missing".into()))?;
        let size = self.vocab.len();
        let denom = counts.total as f64 + self.smoothing * size as f64;
        let mut probs = vec![self.smoothing / denom; size];
        for (&tok, &n) in &counts.next {
            probs[tok as usize] = (n as f64 + self.smoothing) / denom;
        }
        Distribution::new(probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bigram_add_k_matches_hand_count() {
        let m = NgramModel::train_text(&["a b a b a"], 2, 0.1).unwrap();
        let v = m.vocabulary();
        let (a, b) = (v.id("a").unwrap(), v.id("b").unwrap());
        let d = m.distribution(&[a]).unwrap();
        // "b" follows "a" twice out of two continuations
        assert!((d.prob(b) - 2.1 / 2.2).abs() < 1e-12);
        assert!((d.prob(a) - 0.1 / 2.2).abs() < 1e-12);
        assert_eq!(d.argmax(), b);
    }

    #[test]
    fn unigram_ignores_prefix() {
        let m = NgramModel::train_text(&["a b a c"], 1, 0.5).unwrap();
        let d0 = m.distribution(&[]).unwrap();
        let d1 = m.distribution(&[0, 1, 2]).unwrap();
        assert_eq!(d0, d1);
        // counts a:2 b:1 c:1, total 4, |V| = 3
        assert!((d0.prob(0) - 2.5 / 5.5).abs() < 1e-12);
    }

    #[test]
    fn unseen_context_backs_off_to_shorter_order() {
        let lines = ["a b c", "b c a", "c a b"];
        let tri = NgramModel::train_text(&lines, 3, 0.2).unwrap();
        let bi = NgramModel::train_text(&lines, 2, 0.2).unwrap();
        let v = tri.vocabulary();
        let (a, c) = (v.id("a").unwrap(), v.id("c").unwrap());
        // "c c" never occurs, so the trigram model uses the context "c"
        let prefix = [c, c];
        assert_eq!(tri.effective_context(&prefix), &[c]);
        assert_eq!(tri.distribution(&prefix).unwrap(), bi.distribution(&prefix).unwrap());
        // "b c" does occur
        assert_ne!(tri.distribution(&[v.id("b").unwrap(), c]).unwrap(), bi.distribution(&[c]).unwrap());
        let _ = a;
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(matches!(NgramModel::train_text(&["a"], 2, 0.0), Err(Error::Config(_))));
        assert!(matches!(NgramModel::train_text(&["a"], 0, 0.1), Err(Error::Config(_))));
        assert!(matches!(NgramModel::train_text::<&str>(&[], 2, 0.1), Err(Error::Input(_))));
        assert!(matches!(NgramModel::train_text(&["  "], 2, 0.1), Err(Error::Input(_))));
    }

    #[test]
    fn retraining_is_bit_identical() {
        let lines = ["x y z x y", "z z y x"];
        let m1 = NgramModel::train_text(&lines, 3, 0.3).unwrap();
        let m2 = NgramModel::train_text(&lines, 3, 0.3).unwrap();
        for prefix in [vec![], vec![0], vec![1, 2], vec![2, 2, 2]] {
            let (a, b) = (m1.distribution(&prefix).unwrap(), m2.distribution(&prefix).unwrap());
            assert!(a.probs().iter().zip(b.probs()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
