//! Deterministic toy task: a template-sentence corpus over a closed word list,
//! n-gram model descriptors trained on it, and concept-to-sentence datasets.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_jsonl, TaskExample};
use crate::error::{HarnessError, Result};
use crate::models::NgramDescriptor;

const FUNCTION_WORDS: &[&str] = &["the", "a", "in", "on", "near", "and"];
const INSTRUCTION_WORDS: &[&str] = &["write", "with", "without"];
const ADJECTIVES: &[&str] = &["big", "small", "red", "old", "happy", "quiet"];
const NOUNS: &[&str] = &[
    "dog", "cat", "boy", "girl", "man", "woman", "horse", "bird", "child", "farmer", "ball", "tree", "car", "boat",
    "book", "apple", "fence", "kite",
];
const VERBS: &[&str] =
    &["runs", "jumps", "throws", "catches", "reads", "rides", "eats", "walks", "sits", "climbs", "watches", "chases"];
const PLACES: &[&str] = &["park", "field", "garden", "street", "lake", "house", "forest", "beach", "yard", "road"];

#[derive(Clone, Copy)]
enum Slot {
    Word(&'static str),
    Adjective,
    Noun,
    Verb,
    Place,
}

use Slot::{Adjective as A, Noun as N, Place as P, Verb as V, Word as W};

const TEMPLATES: &[&[Slot]] = &[
    &[W("the"), A, N, V, W("the"), N, W("in"), W("the"), P],
    &[W("a"), N, V, W("a"), N, W("near"), W("the"), P],
    &[W("the"), N, W("and"), W("the"), N, V, W("in"), W("the"), P],
    &[W("the"), N, V, W("on"), W("the"), P],
    &[W("a"), A, N, V, W("the"), A, N],
    &[W("the"), N, V, W("with"), W("the"), N, W("in"), W("the"), P],
];

/// Which constraint the generated examples carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Cover every listed concept word.
    Lexical,
    /// Avoid every listed word.
    Blocklist,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lexical => "lexical",
            Self::Blocklist => "blocklist",
        }
    }
}

/// The closed vocabulary, specials first.
pub fn vocabulary_tokens() -> Vec<&'static str> {
    let mut tokens = vec!["<eos>", "<sep>"];
    for group in [INSTRUCTION_WORDS, FUNCTION_WORDS, ADJECTIVES, NOUNS, VERBS, PLACES] {
        for w in group {
            if !tokens.contains(w) {
                tokens.push(w);
            }
        }
    }
    tokens
}

fn content_words() -> Vec<&'static str> {
    [ADJECTIVES, NOUNS, VERBS, PLACES].concat()
}

/// Slot fillers follow a Zipf law over list order, so a few words per slot
/// dominate the corpus the way frequent words dominate real text.
fn zipf(words: &'static [&'static str], rng: &mut impl Rng) -> &'static str {
    let total: f64 = (1..=words.len()).map(|r| 1.0 / r as f64).sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in words.iter().enumerate() {
        u -= 1.0 / (i + 1) as f64;
        if u < 0.0 {
            return w;
        }
    }
    words[words.len() - 1]
}

/// One template sentence.
pub fn sentence(rng: &mut impl Rng) -> Vec<&'static str> {
    let template = TEMPLATES.choose(rng).expect("templates are non-empty");
    template
        .iter()
        .map(|slot| match *slot {
            W(w) => w,
            A => zipf(ADJECTIVES, rng),
            N => zipf(NOUNS, rng),
            V => zipf(VERBS, rng),
            P => zipf(PLACES, rng),
        })
        .collect()
}

/// `count` distinct content words of a sentence, topped up from the whole
/// content vocabulary if the sentence has fewer, returned sorted.
fn concepts_for(words: &[&'static str], count: usize, rng: &mut impl Rng) -> Vec<String> {
    let all = content_words();
    let mut pool: Vec<&str> = Vec::new();
    for w in words {
        if all.contains(w) && !pool.contains(w) {
            pool.push(w);
        }
    }
    pool.shuffle(rng);
    pool.truncate(count);
    while pool.len() < count {
        let w = all.choose(rng).expect("non-empty");
        if !pool.contains(w) {
            pool.push(w);
        }
    }
    let mut concepts: Vec<String> = pool.into_iter().map(str::to_owned).collect();
    concepts.sort();
    concepts
}

pub fn lexical_prompt(concepts: &[String]) -> String {
    format!("write with {} <sep>", concepts.join(" "))
}

pub fn blocklist_prompt(blocked: &[String]) -> String {
    format!("write without {} <sep>", blocked.join(" "))
}

/// Training lines `write with <concepts> <sep> <sentence> <eos>`.
pub fn corpus(seed: u64, sentences: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sentences)
        .map(|_| {
            let s = sentence(&mut rng);
            let concepts = concepts_for(&s, 3, &mut rng);
            format!("{} {} <eos>", lexical_prompt(&concepts), s.join(" "))
        })
        .collect()
}

fn split_rng(seed: u64, split: &str) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    for (i, b) in split.bytes().take(24).enumerate() {
        key[8 + i] = b;
    }
    ChaCha8Rng::from_seed(key)
}

/// `n` examples for one split. Ids are `<task>-<split>-<seed>-<index>`, so
/// different splits or seeds never share an id.
pub fn generate_toy_dataset(
    task: Task,
    seed: u64,
    n: usize,
    concepts_per_example: usize,
    split: &str,
) -> Result<Vec<TaskExample>> {
    if n == 0 {
        return Err(HarnessError::config("a dataset needs at least one example"));
    }
    let available = content_words().len();
    if concepts_per_example == 0 || concepts_per_example > available {
        return Err(HarnessError::config(format!(
            "concepts per example must lie in 1..={available}, got {concepts_per_example}"
        )));
    }
    let mut rng = split_rng(seed, split);
    let examples = (0..n)
        .map(|i| {
            let words = concepts_for(&sentence(&mut rng), concepts_per_example, &mut rng);
            let id = format!("{}-{split}-{seed}-{i:05}", task.name());
            match task {
                Task::Lexical => {
                    TaskExample { id, prompt: lexical_prompt(&words), concepts: Some(words), blocklist: None }
                }
                Task::Blocklist => {
                    TaskExample { id, prompt: blocklist_prompt(&words), concepts: None, blocklist: Some(words) }
                }
            }
        })
        .collect();
    Ok(examples)
}

/// Options for [`write_toy_task`].
#[derive(Debug, Clone)]
pub struct ToyTaskSpec {
    pub task: Task,
    pub seed: u64,
    pub corpus_sentences: usize,
    pub validation: usize,
    pub test: usize,
    pub concepts_per_example: usize,
    pub target_order: usize,
    pub draft_order: usize,
    pub smoothing: f64,
}

impl Default for ToyTaskSpec {
    fn default() -> Self {
        Self {
            task: Task::Lexical,
            seed: 7,
            corpus_sentences: 200,
            validation: 200,
            test: 1000,
            concepts_per_example: 3,
            target_order: 4,
            draft_order: 2,
            smoothing: 0.01,
        }
    }
}

/// Writes `corpus.txt`, `vocab.txt`, `target.json`, `draft.json`,
/// `validation.jsonl` and `test.jsonl` into `dir`.
pub fn write_toy_task(dir: &Path, spec: &ToyTaskSpec) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::write(dir, e))?;
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| HarnessError::write(&path, e))
    };
    let mut text = corpus(spec.seed, spec.corpus_sentences).join("\n");
    text.push('\n');
    write("corpus.txt", text)?;
    let mut vocab = vocabulary_tokens().join("\n");
    vocab.push('\n');
    write("vocab.txt", vocab)?;
    for (file, order) in [("target.json", spec.target_order), ("draft.json", spec.draft_order)] {
        let descriptor = NgramDescriptor {
            kind: "ngram".into(),
            name: Some(format!("toy-{order}gram")),
            corpus: "corpus.txt".into(),
            vocab: Some("vocab.txt".into()),
            order,
            smoothing: spec.smoothing,
        };
        write(file, serde_json::to_string_pretty(&descriptor).expect("descriptor serializes") + "\n")?;
    }
    for (split, n) in [("validation", spec.validation), ("test", spec.test)] {
        let examples = generate_toy_dataset(spec.task, spec.seed, n, spec.concepts_per_example, split)?;
        write_jsonl(&dir.join(format!("{split}.jsonl")), &examples)?;
    }
    Ok(())
}
