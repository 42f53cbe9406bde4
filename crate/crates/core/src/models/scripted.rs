//! Table-driven model: an explicit next-token distribution per prefix with a
//! fallback row for everything else.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{Distribution, LanguageModel, TokenId, Vocabulary};

/// Rows whose mass is further than this from 1 are rejected on load.
pub const ROW_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ScriptedModel {
    name: String,
    vocab: Vocabulary,
    table: HashMap<Vec<TokenId>, Distribution>,
    default: Distribution,
}

/// On-disk form. Rows are sparse `token -> probability` maps; absent tokens
/// have probability zero.
#[derive(Debug, Serialize, Deserialize)]
struct ScriptedFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    vocab: Vec<String>,
    table: BTreeMap<String, BTreeMap<String, f64>>,
    default: BTreeMap<String, f64>,
}

impl ScriptedModel {
    pub fn new(
        name: impl Into<String>,
        vocab: Vocabulary,
        table: HashMap<Vec<TokenId>, Distribution>,
        default: Distribution,
    ) -> Result<Self> {
        let size = vocab.len();
        if default.len() != size || table.values().any(|d| d.len() != size) {
            return Err(Error::config("scripted row length differs from the vocabulary size"));
        }
        for prefix in table.keys() {
            vocab.check_ids(prefix)?;
        }
        Ok(Self { name: name.into(), vocab, table, default })
    }

    /// Parses the JSON table format.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScriptedFile =
            serde_json::from_str(text).map_err(|e| Error::load(format!("malformed model JSON: {e}")))?;
        let vocab = Vocabulary::new(file.vocab).map_err(|e| Error::load(e.to_string()))?;
        let row = |key: &str, entries: &BTreeMap<String, f64>| -> Result<Distribution> {
            let mut probs = vec![0.0; vocab.len()];
            for (tok, &p) in entries {
                let id =
                    vocab.id(tok).ok_or_else(|| Error::load(format!("row {key:?} names unknown token {tok:?}")))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::load(format!("row {key:?} has probability {p} for {tok:?}")));
                }
                probs[id as usize] = p;
            }
            let mass: f64 = probs.iter().sum();
            if (mass - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::load(format!("row {key:?} sums to {mass}, not 1")));
            }
            Distribution::from_weights(probs).map_err(|e| Error::load(e.to_string()))
        };
        let mut table = HashMap::with_capacity(file.table.len());
        for (key, entries) in &file.table {
            let prefix = vocab.tokenize(key).map_err(|e| Error::load(format!("row key {key:?}: {e}")))?;
            table.insert(prefix, row(key, entries)?);
        }
        let default = row("default", &file.default)?;
        let name = file.name.unwrap_or_else(|| "scripted".to_owned());
        Self::new(name, vocab, table, default)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::load(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let sparse = |d: &Distribution| -> BTreeMap<String, f64> {
            d.probs()
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(i, &p)| (self.vocab.tokens()[i].clone(), p))
                .collect()
        };
        let table = self
            .table
            .iter()
            .map(|(prefix, d)| (self.vocab.detokenize(prefix).expect("prefix ids checked on construction"), sparse(d)))
            .collect();
        let file = ScriptedFile {
            name: Some(self.name.clone()),
            vocab: self.vocab.tokens().to_vec(),
            table,
            default: sparse(&self.default),
        };
        serde_json::to_string_pretty(&file).expect("scripted model serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json())
            .map_err(|e| Error::load(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn table(&self) -> &HashMap<Vec<TokenId>, Distribution> {
        &self.table
    }

    pub fn default_row(&self) -> &Distribution {
        &self.default
    }

    /// Random table over every prefix up to `depth` tokens (prefixes never
    /// continue past an end-of-sequence token). `sharpness` controls how
    /// peaked rows are.
    pub fn random(name: impl Into<String>, vocab: Vocabulary, depth: usize, sharpness: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = vocab.len();
        let row = |rng: &mut ChaCha8Rng| {
            Distribution::from_weights((0..size).map(|_| (sharpness * rng.gen::<f64>()).exp()).collect())
        };
        let default = row(&mut rng)?;
        let mut table = HashMap::new();
        let mut frontier: Vec<Vec<TokenId>> = vec![Vec::new()];
        for _ in 0..=depth {
            let mut next = Vec::new();
            for prefix in frontier {
                table.insert(prefix.clone(), row(&mut rng)?);
                for tok in 0..size as TokenId {
                    if !vocab.is_eos(tok) {
                        let mut p = prefix.clone();
                        p.push(tok);
                        next.push(p);
                    }
                }
            }
            frontier = next;
        }
        Self::new(name, vocab, table, default)
    }

    /// A correlated copy: every row becomes `(1 - noise) * row + noise * r`
    /// for a fresh random row `r`.
    pub fn perturbed(&self, name: impl Into<String>, noise: f64, sharpness: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&noise) {
            return Err(Error::config("noise must lie in [0, 1]"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = self.vocab.len();
        let mix = |d: &Distribution, rng: &mut ChaCha8Rng| -> Result<Distribution> {
            let r = Distribution::from_weights((0..size).map(|_| (sharpness * rng.gen::<f64>()).exp()).collect())?;
            Distribution::from_weights(
                d.probs().iter().zip(r.probs()).map(|(a, b)| (1.0 - noise) * a + noise * b).collect(),
            )
        };
        // sorted so the draw order does not depend on hash iteration order
        let mut keys: Vec<&Vec<TokenId>> = self.table.keys().collect();
        keys.sort();
        let mut table = HashMap::with_capacity(keys.len());
        for key in keys {
            table.insert(key.clone(), mix(&self.table[key], &mut rng)?);
        }
        let default = mix(&self.default, &mut rng)?;
        Self::new(name, self.vocab.clone(), table, default)
    }
}

impl LanguageModel for ScriptedModel {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn identity(&self) -> &str {
        &self.name
    }

    fn distribution(&self, prefix: &[TokenId]) -> Result<Distribution> {
        Ok(self.table.get(prefix).unwrap_or(&self.default).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHAIN: &str = r#"{
        "vocab": ["<eos>", "A", "B"],
        "table": {
            "": {"A": 1.0},
            "A": {"B": 0.7, "A": 0.3},
            "A B": {"<eos>": 1.0}
        },
        "default": {"<eos>": 0.5, "A": 0.25, "B": 0.25}
    }"#;

    #[test]
    fn loads_table_and_falls_back_to_default() {
        let m = ScriptedModel::from_json(CHAIN).unwrap();
        let d = m.distribution(&[]).unwrap();
        assert_eq!(d.argmax(), 1);
        assert_eq!(d.prob(1), 1.0);
        assert_eq!(m.distribution(&[1]).unwrap().argmax(), 2);
        assert_eq!(m.distribution(&[2, 2]).unwrap().probs(), &[0.5, 0.25, 0.25]);
    }

    #[test]
    fn rejects_unnormalized_rows() {
        let bad = r#"{"vocab": ["A", "B"], "table": {"": {"A": 0.6, "B": 0.3}}, "default": {"A": 1.0}}"#;
        assert!(matches!(ScriptedModel::from_json(bad), Err(Error::Load(_))));
    }

    #[test]
    fn rejects_malformed_json_and_unknown_tokens() {
        assert!(matches!(ScriptedModel::from_json("{not json"), Err(Error::Load(_))));
        let unknown = r#"{"vocab": ["A"], "table": {"": {"Z": 1.0}}, "default": {"A": 1.0}}"#;
        assert!(matches!(ScriptedModel::from_json(unknown), Err(Error::Load(_))));
    }

    #[test]
    fn save_then_load_is_distribution_equal() {
        let vocab = Vocabulary::new(["<eos>", "x", "y", "z"]).unwrap();
        let m = ScriptedModel::random("r", vocab, 2, 3.0, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        let back = ScriptedModel::from_file(&path).unwrap();
        assert_eq!(back.table().len(), m.table().len());
        for (prefix, d) in m.table() {
            let e = back.distribution(prefix).unwrap();
            for (a, b) in d.probs().iter().zip(e.probs()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_tables_do_not_extend_past_eos() {
        let vocab = Vocabulary::new(["<eos>", "x", "y"]).unwrap();
        let m = ScriptedModel::random("r", vocab, 2, 3.0, 1).unwrap();
        assert!(m.table().keys().all(|k| !k.contains(&0)));
        // 1 + 2 + 4 prefixes at depths 0..=2
        assert_eq!(m.table().len(), 7);
    }
}
