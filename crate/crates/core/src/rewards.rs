//! Constraint rewards scored over generated text (the prompt never counts).

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::lm::{TokenId, Vocabulary};

/// Scores how well generated text satisfies a constraint. Implementations are
/// pure: the same tokens always get the same score.
pub trait RewardFunction: Send + Sync {
    fn score(&self, vocab: &Vocabulary, generated: &[TokenId]) -> f64;
}

/// Non-empty set of lowercased concept words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptSet {
    concepts: BTreeSet<String>,
}

impl ConceptSet {
    pub fn new<I, S>(concepts: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = BTreeSet::new();
        for c in concepts {
            let c = c.as_ref().trim().to_lowercase();
            if c.is_empty() {
                return Err(Error::config("empty concept"));
            }
            if !set.insert(c.clone()) {
                return Err(Error::config(format!("duplicate concept {c:?}")));
            }
        }
        if set.is_empty() {
            return Err(Error::config("concept set is empty"));
        }
        Ok(Self { concepts: set })
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.concepts.iter().map(String::as_str)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.concepts.contains(word)
    }

    /// Number of distinct concepts matched by some generated word.
    pub fn covered<S: AsRef<str>>(&self, generated: &[S]) -> usize {
        let words: BTreeSet<String> = generated.iter().map(|w| w.as_ref().to_lowercase()).collect();
        self.concepts.iter().filter(|c| words.contains(*c)).count()
    }
}

/// Fraction of concepts that appear in `generated`, by exact lowercase token
/// equality.
pub fn lexical_coverage_reward<S: AsRef<str>>(generated: &[S], concepts: &ConceptSet) -> f64 {
    concepts.covered(generated) as f64 / concepts.len() as f64
}

/// `1 - (distinct blocklisted tokens present) / |blocklist|`.
pub fn blocklist_reward<S: AsRef<str>>(generated: &[S], blocklist: &BTreeSet<String>) -> Result<f64> {
    if blocklist.is_empty() {
        return Err(Error::config("blocklist is empty"));
    }
    let words: BTreeSet<String> = generated.iter().map(|w| w.as_ref().to_lowercase()).collect();
    let hits = blocklist.iter().filter(|b| words.contains(*b)).count();
    Ok((1.0 - hits as f64 / blocklist.len() as f64).clamp(0.0, 1.0))
}

/// Threshold test used by every state decision: `score >= threshold`.
pub fn satisfies(score: f64, threshold: f64) -> bool {
    score >= threshold
}

fn words<'v>(vocab: &'v Vocabulary, ids: &[TokenId]) -> Vec<&'v str> {
    ids.iter().filter_map(|&id| vocab.token(id)).collect()
}

/// Concept-coverage reward.
#[derive(Debug, Clone)]
pub struct LexicalReward {
    concepts: ConceptSet,
}

impl LexicalReward {
    pub fn new(concepts: ConceptSet) -> Self {
        Self { concepts }
    }

    pub fn concepts(&self) -> &ConceptSet {
        &self.concepts
    }
}

impl RewardFunction for LexicalReward {
    fn score(&self, vocab: &Vocabulary, generated: &[TokenId]) -> f64 {
        lexical_coverage_reward(&words(vocab, generated), &self.concepts)
    }
}

/// Blocklist proxy for a harmlessness scorer.
#[derive(Debug, Clone)]
pub struct BlocklistReward {
    blocklist: BTreeSet<String>,
}

impl BlocklistReward {
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let blocklist: BTreeSet<String> = words.into_iter().map(|w| w.as_ref().to_lowercase()).collect();
        if blocklist.is_empty() {
            return Err(Error::config("blocklist is empty"));
        }
        Ok(Self { blocklist })
    }

    pub fn blocklist(&self) -> &BTreeSet<String> {
        &self.blocklist
    }
}

impl RewardFunction for BlocklistReward {
    fn score(&self, vocab: &Vocabulary, generated: &[TokenId]) -> f64 {
        blocklist_reward(&words(vocab, generated), &self.blocklist).expect("blocklist checked non-empty")
    }
}
