//! JSONL task files: one [`TaskExample`] per line.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use lookahead_core::rewards::{BlocklistReward, ConceptSet, LexicalReward, RewardFunction};
use serde::{Deserialize, Serialize};

use crate::error::{setup, HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskExample {
    pub id: String,
    /// Whitespace-tokenized prompt text, constraint statement included.
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concepts: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocklist: Option<Vec<String>>,
}

/// The reward attached to one example.
pub enum Constraint {
    Lexical(LexicalReward),
    Blocklist(BlocklistReward),
}

impl Constraint {
    pub fn reward(&self) -> &dyn RewardFunction {
        match self {
            Self::Lexical(r) => r,
            Self::Blocklist(r) => r,
        }
    }

    pub fn concepts(&self) -> Option<&ConceptSet> {
        match self {
            Self::Lexical(r) => Some(r.concepts()),
            Self::Blocklist(_) => None,
        }
    }
}

impl TaskExample {
    pub fn constraint(&self) -> Result<Constraint> {
        match (&self.concepts, &self.blocklist) {
            (Some(c), None) => Ok(Constraint::Lexical(LexicalReward::new(setup(ConceptSet::new(c))?))),
            (None, Some(b)) => Ok(Constraint::Blocklist(setup(BlocklistReward::new(b))?)),
            _ => Err(HarnessError::config(format!(
                "example {} must carry exactly one of `concepts` and `blocklist`",
                self.id
            ))),
        }
    }
}

pub fn read_jsonl(path: &Path) -> Result<Vec<TaskExample>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::read(path, e))?;
    let mut examples = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex: TaskExample = serde_json::from_str(line)
            .map_err(|e| HarnessError::config(format!("{}:{}: {e}", path.display(), i + 1)))?;
        ex.constraint()?;
        if !ids.insert(ex.id.clone()) {
            return Err(HarnessError::config(format!("{}: duplicate example id {}", path.display(), ex.id)));
        }
        examples.push(ex);
    }
    if examples.is_empty() {
        return Err(HarnessError::config(format!("{} has no examples", path.display())));
    }
    Ok(examples)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::write(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row).map_err(|e| HarnessError::write(path, e))?;
        w.write_all(b"\n").map_err(|e| HarnessError::write(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::write(path, e))
}
