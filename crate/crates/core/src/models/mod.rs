//! Desk-scale [`LanguageModel`](crate::lm::LanguageModel) backends.

mod ngram;
mod scripted;

pub use ngram::NgramModel;
pub use scripted::{ScriptedModel, ROW_TOLERANCE};
