//! Model files. A model path names either a scripted table (see
//! [`ScriptedModel`]) or an n-gram descriptor:
//!
//! ```json
//! {"kind": "ngram", "corpus": "corpus.txt", "vocab": "vocab.txt", "order": 4, "smoothing": 0.01}
//! ```
//!
//! Relative paths inside a descriptor resolve against the descriptor's
//! directory. Without `vocab`, the vocabulary is the corpus's tokens in order
//! of first appearance.

use std::path::{Path, PathBuf};

use lookahead_core::lm::{LanguageModel, Vocabulary};
use lookahead_core::models::{NgramModel, ScriptedModel};
use serde::{Deserialize, Serialize};

use crate::error::{setup, HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NgramDescriptor {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub corpus: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<PathBuf>,
    pub order: usize,
    pub smoothing: f64,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::read(path, e))
}

fn load_ngram(descriptor: NgramDescriptor, base: &Path) -> Result<NgramModel> {
    let lines: Vec<String> =
        read(&base.join(&descriptor.corpus))?.lines().filter(|l| !l.trim().is_empty()).map(str::to_owned).collect();
    let model = match &descriptor.vocab {
        Some(vocab_path) => {
            let text = read(&base.join(vocab_path))?;
            let vocab = setup(Vocabulary::new(text.split_whitespace()))?;
            let corpus = lines.iter().map(|l| vocab.tokenize(l)).collect::<lookahead_core::Result<Vec<_>>>();
            setup(NgramModel::train(vocab, &setup(corpus)?, descriptor.order, descriptor.smoothing))?
        }
        None => setup(NgramModel::train_text(&lines, descriptor.order, descriptor.smoothing))?,
    };
    Ok(match descriptor.name {
        Some(name) => model.with_name(name),
        None => model,
    })
}

/// Loads a scripted table or an n-gram descriptor.
pub fn load_model(path: &Path) -> Result<Box<dyn LanguageModel>> {
    let text = read(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
    if value.get("kind").is_some() {
        let descriptor: NgramDescriptor =
            serde_json::from_value(value).map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
        if descriptor.kind != "ngram" {
            return Err(HarnessError::config(format!("{}: unknown model kind {:?}", path.display(), descriptor.kind)));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        return Ok(Box::new(load_ngram(descriptor, base)?));
    }
    let model =
        ScriptedModel::from_json(&text).map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
    Ok(Box::new(model))
}
