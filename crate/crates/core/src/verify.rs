//! Draft verification kernels.
//!
//! Hard rejection accepts drafted tokens while they equal the target argmax.
//! Speculative sampling accepts token `x` with probability
//! `min(1, p(x) / q(x))` and, at the first rejection, draws a replacement from
//! `normalize(max(0, p - q))`, which keeps the emitted token distributed
//! exactly as the target `p`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{Distribution, TokenId};

/// Seeded random stream owned by a single generation.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of draws taken so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.counter += 1;
        self.rng.gen::<f64>()
    }

    /// Uniform draw in `(0, 1]`, used for acceptance tests so that a zero
    /// ratio always rejects and a unit ratio always accepts.
    pub fn next_acceptance(&mut self) -> f64 {
        1.0 - self.next_f64()
    }

    pub fn sample(&mut self, dist: &Distribution) -> TokenId {
        let u = self.next_f64();
        dist.sample_with(u)
    }
}

/// Result of checking one drafted block against the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    /// Length of the accepted prefix.
    pub n: usize,
    /// Number of drafted tokens checked.
    pub d: usize,
    /// `n / d`.
    pub a: f64,
    /// Token drawn at the first rejected position (speculative sampling only).
    pub replacement: Option<TokenId>,
}

impl VerificationOutcome {
    fn new(n: usize, d: usize, replacement: Option<TokenId>) -> Result<Self> {
        Ok(Self { n, d, a: acceptance_score(n, d)?, replacement })
    }

    pub fn fully_accepted(&self) -> bool {
        self.n == self.d
    }
}

/// Verification rule used by speculative decoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMode {
    /// Exact argmax agreement.
    #[default]
    Hard,
    /// Ratio test with residual resampling.
    #[serde(alias = "speculative")]
    Spec,
}

impl std::str::FromStr for VerifyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(Self::Hard),
            "spec" | "speculative" => Ok(Self::Spec),
            other => Err(Error::config(format!("unknown verification mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for VerifyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Hard => "hard",
            Self::Spec => "spec",
        })
    }
}

/// `n / d`.
pub fn acceptance_score(n: usize, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::input("acceptance score of an empty draft"));
    }
    if n > d {
        return Err(Error::input(format!("accepted length {n} exceeds draft length {d}")));
    }
    Ok(n as f64 / d as f64)
}

/// Accepts drafted tokens until the first position whose target argmax
/// differs.
pub fn hard_reject(drafted: &[TokenId], target_dists: &[Distribution]) -> Result<VerificationOutcome> {
    if drafted.len() != target_dists.len() {
        return Err(Error::input(format!(
            "{} drafted tokens but {} target distributions",
            drafted.len(),
            target_dists.len()
        )));
    }
    let n = drafted.iter().zip(target_dists).take_while(|(&x, p)| p.argmax() == x).count();
    VerificationOutcome::new(n, drafted.len(), None)
}

/// Residual `normalize(max(0, p - q))`, or `p` itself when the residual has no
/// mass (only possible when `p == q`).
pub fn residual(target: &Distribution, draft: &Distribution) -> Result<Distribution> {
    let weights: Vec<f64> = target.probs().iter().zip(draft.probs()).map(|(p, q)| (p - q).max(0.0)).collect();
    if weights.iter().sum::<f64>() > 0.0 {
        Distribution::from_weights(weights)
    } else {
        Ok(target.clone())
    }
}

/// Speculative-sampling verification.
pub fn speculative_verify(
    drafted: &[TokenId],
    draft_dists: &[Distribution],
    target_dists: &[Distribution],
    rng: &mut RngStream,
) -> Result<VerificationOutcome> {
    if drafted.len() != draft_dists.len() || drafted.len() != target_dists.len() {
        return Err(Error::input("drafted tokens and distributions differ in length"));
    }
    for (i, ((&x, q), p)) in drafted.iter().zip(draft_dists).zip(target_dists).enumerate() {
        let qx = q.prob(x);
        if qx <= 0.0 {
            return Err(Error::Numeric(format!("drafted token {x} at position {i} has zero draft probability")));
        }
        let ratio = (p.prob(x) / qx).min(1.0);
        if rng.next_acceptance() > ratio {
            let replacement = rng.sample(&residual(p, q)?);
            return VerificationOutcome::new(i, drafted.len(), Some(replacement));
        }
    }
    VerificationOutcome::new(drafted.len(), drafted.len(), None)
}
