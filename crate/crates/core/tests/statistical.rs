//! Monte-Carlo and enumeration oracles for the sampling decoders.

use lookahead_core::decode::{decode_beam, decode_greedy, decode_speculative};
use lookahead_core::lm::{Distribution, LanguageModel, TokenId};
use lookahead_core::models::ScriptedModel;
use lookahead_core::verify::{speculative_verify, RngStream, VerifyMode};

fn total_variation(counts: &[u64], trials: u64, p: &Distribution) -> f64 {
    counts.iter().zip(p.probs()).map(|(&c, &pi)| (c as f64 / trials as f64 - pi).abs()).sum::<f64>() / 2.0
}

/// Emitted token at position 1: the draft token if accepted, else the
/// residual replacement.
fn emitted_marginal(p: &Distribution, q: &Distribution, trials: u64, seed: u64) -> Vec<u64> {
    let mut rng = RngStream::new(seed);
    let mut counts = vec![0u64; p.len()];
    for _ in 0..trials {
        let x = rng.sample(q);
        let out = speculative_verify(&[x], std::slice::from_ref(q), std::slice::from_ref(p), &mut rng).unwrap();
        counts[out.replacement.unwrap_or(x) as usize] += 1;
    }
    counts
}

#[test]
fn speculative_sampling_preserves_the_target_on_two_tokens() {
    let q = Distribution::new(vec![0.9, 0.1]).unwrap();
    let p = Distribution::new(vec![0.6, 0.4]).unwrap();
    let trials = 100_000;
    let counts = emitted_marginal(&p, &q, trials, 17);
    assert!(total_variation(&counts, trials, &p) <= 0.01);
}

#[test]
fn speculative_sampling_preserves_the_target_on_five_tokens() {
    let q = Distribution::new(vec![0.05, 0.4, 0.25, 0.2, 0.1]).unwrap();
    let p = Distribution::new(vec![0.3, 0.1, 0.25, 0.05, 0.3]).unwrap();
    let trials = 100_000;
    let counts = emitted_marginal(&p, &q, trials, 99);
    assert!(total_variation(&counts, trials, &p) <= 0.01);
}

#[test]
fn speculative_decoding_marginal_matches_target_sampling() {
    let target = ScriptedModel::from_json(
        r#"{"vocab": ["<eos>", "x", "y"], "table": {}, "default": {"<eos>": 0.2, "x": 0.5, "y": 0.3}}"#,
    )
    .unwrap();
    let draft = ScriptedModel::from_json(
        r#"{"vocab": ["<eos>", "x", "y"], "table": {}, "default": {"<eos>": 0.1, "x": 0.2, "y": 0.7}}"#,
    )
    .unwrap();
    let p = target.distribution(&[]).unwrap();
    let trials = 50_000u64;
    let mut counts = [0u64; 3];
    for i in 0..trials {
        let r = decode_speculative(&target, &draft, &[], 2, 1, VerifyMode::Spec, &mut RngStream::new(i)).unwrap();
        // length-1 outputs: an end-of-sequence output leaves tokens empty
        let tok = r.tokens.first().copied().unwrap_or(0);
        counts[tok as usize] += 1;
    }
    assert!(total_variation(&counts, trials, &p) <= 0.02);
}

/// Greedy takes "a" (0.55) but every "a" continuation is weak; beam keeps "b".
fn garden_path() -> ScriptedModel {
    ScriptedModel::from_json(
        r#"{"vocab": ["<eos>", "a", "b", "c", "d"],
            "table": {
                "": {"a": 0.55, "b": 0.45},
                "a": {"c": 0.34, "d": 0.33, "<eos>": 0.33},
                "b": {"c": 0.95, "d": 0.05},
                "a c": {"<eos>": 1.0}, "a d": {"<eos>": 1.0},
                "b c": {"<eos>": 1.0}, "b d": {"<eos>": 1.0}
            },
            "default": {"<eos>": 1.0}}"#,
    )
    .unwrap()
}

fn enumerate(
    model: &ScriptedModel,
    prefix: Vec<TokenId>,
    logp: f64,
    max_len: usize,
    out: &mut Vec<(Vec<TokenId>, f64)>,
) {
    if prefix.len() == max_len {
        out.push((prefix, logp));
        return;
    }
    let dist = model.distribution(&prefix).unwrap();
    for (tok, &p) in dist.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let mut next = prefix.clone();
        next.push(tok as TokenId);
        if tok == 0 {
            out.push((next, logp + p.ln()));
        } else {
            enumerate(model, next, logp + p.ln(), max_len, out);
        }
    }
}

#[test]
fn beam_of_two_finds_the_best_path_greedy_misses() {
    let m = garden_path();
    let mut paths = Vec::new();
    enumerate(&m, Vec::new(), 0.0, 3, &mut paths);
    let best = paths.iter().max_by(|a, b| (a.1 / a.0.len() as f64).total_cmp(&(b.1 / b.0.len() as f64))).unwrap();
    let mut best_tokens = best.0.clone();
    if best_tokens.last() == Some(&0) {
        best_tokens.pop();
    }
    assert_eq!(best_tokens, vec![2, 3]);
    assert_eq!(decode_beam(&m, &[], 2, 3).unwrap().tokens, best_tokens);
    assert_ne!(decode_greedy(&m, &[], 3).unwrap().tokens, best_tokens);
}

#[test]
fn beam_charges_one_call_per_live_hypothesis() {
    let m =
        ScriptedModel::random("m", lookahead_core::lm::Vocabulary::new(["<eos>", "a", "b", "c"]).unwrap(), 3, 1.0, 3)
            .unwrap();
    let r = decode_beam(&m, &[], 3, 6).unwrap();
    assert!(r.ledger.target_calls <= 3 * 6);
    assert!(r.ledger.target_calls >= 1);
}
