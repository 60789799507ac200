//! The logit-processing pipeline and the constrained decode loop.
//!
//! Order per step: repeat penalty, grammar mask, temperature, top-p nucleus
//! sampling. The penalty runs before the mask so it can never resurrect a
//! masked token, and masking before temperature/top-p means a disallowed
//! token has sampling probability exactly zero.
//!
//! Masked entries carry an explicit flag next to the `-inf` sentinel so the
//! softmax never feeds infinities into float arithmetic.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backend::{BackendError, LmBackend};
use crate::bitset::Bitset;
use crate::recognizer::{Recognizer, RecognizerError, TokenMask};

/// Name of the seeded generator used for all sampling, recorded in run
/// manifests so results stay comparable across versions.
pub const RNG_ALGORITHM: &str = "chacha8";

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub repeat_penalty: f64,
    /// Trailing context tokens (prompt tail plus generated) the repeat
    /// penalty considers.
    pub penalty_window: usize,
    pub seed: u64,
    pub max_tokens: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            temperature: 0.7,
            top_p: 0.95,
            repeat_penalty: 1.1,
            penalty_window: 64,
            seed: 0,
            max_tokens: 256,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(SamplerError::InvalidConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(SamplerError::InvalidConfig(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        if !(self.repeat_penalty >= 1.0 && self.repeat_penalty.is_finite()) {
            return Err(SamplerError::InvalidConfig(format!(
                "repeat_penalty must be >= 1, got {}",
                self.repeat_penalty
            )));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SamplerError {
    #[error("grammar dead end: no vocabulary token is consumable and end-of-sequence is not acceptable")]
    DeadEnd,
    #[error("all logits are masked; nothing to sample")]
    AllMasked,
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("logit vector of length {got} does not match vocabulary size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Recognizer(#[from] RecognizerError),
}

/// Per-token scores aligned with a vocabulary, with explicit mask flags.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector {
    scores: Vec<f64>,
    masked: Bitset,
}

impl LogitVector {
    pub fn new(scores: Vec<f64>) -> Self {
        let masked = Bitset::zeros(scores.len());
        LogitVector { scores, masked }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn score(&self, id: u32) -> f64 {
        self.scores[id as usize]
    }

    pub fn is_masked(&self, id: u32) -> bool {
        self.masked.get(id as usize)
    }

    pub fn finite_count(&self) -> usize {
        self.len() - self.masked.count_ones()
    }

    /// Id of the highest unmasked score, ties to the lower id.
    pub fn argmax(&self) -> Option<u32> {
        let mut best: Option<(u32, f64)> = None;
        for (id, &score) in self.scores.iter().enumerate() {
            if self.masked.get(id) {
                continue;
            }
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((id as u32, score));
            }
        }
        best.map(|(id, _)| id)
    }

    /// Divide positive scores of recent-context tokens by the penalty and
    /// multiply negative ones, pushing both toward lower preference. Only the
    /// last `penalty_window` context tokens count, each distinct token once.
    pub fn apply_repeat_penalty(&mut self, context: &[u32], cfg: &SamplerConfig) {
        if cfg.repeat_penalty == 1.0 || cfg.penalty_window == 0 {
            return;
        }
        let start = context.len().saturating_sub(cfg.penalty_window);
        let mut seen = Bitset::zeros(self.len());
        for &token in &context[start..] {
            let idx = token as usize;
            if idx >= self.len() || seen.get(idx) {
                continue;
            }
            seen.set(idx, true);
            if self.masked.get(idx) {
                continue;
            }
            let score = &mut self.scores[idx];
            if *score > 0.0 {
                *score /= cfg.repeat_penalty;
            } else {
                *score *= cfg.repeat_penalty;
            }
        }
    }

    /// Set every disallowed entry to `-inf` and flag it. The EOS entry stays
    /// finite iff the mask's end is acceptable.
    pub fn apply_grammar_mask(&mut self, mask: &TokenMask) -> Result<(), SamplerError> {
        if mask.len() != self.len() {
            return Err(SamplerError::LengthMismatch {
                expected: mask.len(),
                got: self.len(),
            });
        }
        if mask.allowed_count() == 0 && !mask.end_acceptable() {
            return Err(SamplerError::DeadEnd);
        }
        for id in 0..self.len() {
            if !mask.is_allowed(id as u32) {
                self.scores[id] = f64::NEG_INFINITY;
                self.masked.set(id, true);
            }
        }
        Ok(())
    }

    /// Divide every unmasked score by the temperature. Argmax is unchanged
    /// for any positive temperature.
    pub fn apply_temperature(&mut self, temperature: f64) {
        debug_assert!(temperature > 0.0);
        if temperature == 1.0 {
            return;
        }
        for (id, score) in self.scores.iter_mut().enumerate() {
            if !self.masked.get(id) {
                *score /= temperature;
            }
        }
    }

    /// Softmax over unmasked entries; masked entries get probability zero.
    pub fn softmax(&self) -> Result<Vec<f64>, SamplerError> {
        let mut max = f64::NEG_INFINITY;
        for (id, &score) in self.scores.iter().enumerate() {
            if !self.masked.get(id) && score > max {
                max = score;
            }
        }
        if max == f64::NEG_INFINITY {
            return Err(SamplerError::AllMasked);
        }
        let mut probs = vec![0.0f64; self.len()];
        let mut total = 0.0f64;
        for (id, &score) in self.scores.iter().enumerate() {
            if !self.masked.get(id) {
                let e = (score - max).exp();
                probs[id] = e;
                total += e;
            }
        }
        for p in &mut probs {
            *p /= total;
        }
        Ok(probs)
    }
}

/// Keep the smallest descending-probability prefix whose cumulative mass
/// reaches `top_p` (the crossing entry is kept), zero the rest, renormalize.
/// Boundary ties go to the lower token id.
pub fn top_p_filter(probs: &[f64], top_p: f64) -> Vec<f64> {
    debug_assert!(top_p > 0.0 && top_p <= 1.0);
    let mut order: Vec<u32> = (0..probs.len() as u32).collect();
    order.sort_by(|&a, &b| {
        probs[b as usize]
            .partial_cmp(&probs[a as usize])
            .expect("probabilities are finite")
            .then(a.cmp(&b))
    });
    let mut kept = vec![false; probs.len()];
    let mut cumulative = 0.0f64;
    for &id in &order {
        kept[id as usize] = true;
        cumulative += probs[id as usize];
        if cumulative >= top_p {
            break;
        }
    }
    let kept_mass = cumulative;
    probs
        .iter()
        .enumerate()
        .map(|(id, &p)| {
            if kept[id] && kept_mass > 0.0 {
                p / kept_mass
            } else {
                0.0
            }
        })
        .collect()
}

/// Draw one token: softmax over unmasked entries, nucleus filter, multinomial
/// sample. Temperature is applied upstream by [`LogitVector::apply_temperature`].
pub fn sample_token(
    logits: &LogitVector,
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<u32, SamplerError> {
    let probs = logits.softmax()?;
    let filtered = top_p_filter(&probs, cfg.top_p);
    Ok(multinomial_draw(&filtered, rng))
}

/// Inverse-CDF draw over a normalized probability vector.
fn multinomial_draw(probs: &[f64], rng: &mut impl Rng) -> u32 {
    let u: f64 = rng.random::<f64>();
    let mut cumulative = 0.0f64;
    let mut last_positive = 0u32;
    for (id, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last_positive = id as u32;
        cumulative += p;
        if u < cumulative {
            return id as u32;
        }
    }
    // Rounding can leave the final cumulative a hair under 1; fall back to
    // the last positive-probability token.
    last_positive
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Eos,
    MaxTokens,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    /// Concatenated bytes of all sampled tokens (EOS contributes nothing).
    pub text: Vec<u8>,
    pub token_ids: Vec<u32>,
    pub stop_reason: StopReason,
}

/// Run the full decode loop against a backend.
///
/// With a recognizer, every step masks the vocabulary to grammar-consumable
/// tokens, so an EOS-terminated output is guaranteed to be in the grammar's
/// language. With `None` the mask allows everything (unconstrained mode).
pub fn decode_constrained(
    backend: &dyn LmBackend,
    prompt_tokens: &[u32],
    recognizer: Option<&Recognizer>,
    cfg: &SamplerConfig,
) -> Result<DecodeOutput, SamplerError> {
    cfg.validate()?;
    let vocabulary = backend.vocabulary();
    let mut state = recognizer.map(|r| r.initial_state());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut context = prompt_tokens.to_vec();
    let mut token_ids = Vec::new();
    let mut text = Vec::new();

    for _ in 0..cfg.max_tokens {
        let mut logits = backend.next_logits(&context)?;
        if logits.len() != vocabulary.len() {
            return Err(SamplerError::LengthMismatch {
                expected: vocabulary.len(),
                got: logits.len(),
            });
        }
        logits.apply_repeat_penalty(&context, cfg);
        let mask = match (recognizer, &state) {
            (Some(r), Some(s)) => r.allowed_token_mask(s, vocabulary)?,
            _ => TokenMask::all_allowed(vocabulary),
        };
        logits.apply_grammar_mask(&mask)?;
        logits.apply_temperature(cfg.temperature);
        let token = sample_token(&logits, cfg, &mut rng)?;
        if token == vocabulary.eos_id() {
            return Ok(DecodeOutput {
                text,
                token_ids,
                stop_reason: StopReason::Eos,
            });
        }
        let bytes = vocabulary.token_bytes(token);
        if let (Some(r), Some(s)) = (recognizer, &state) {
            let next = r.advance_bytes(s, bytes)?;
            debug_assert!(!next.is_rejected(), "masked token must be consumable");
            state = Some(next);
        }
        text.extend_from_slice(bytes);
        context.push(token);
        token_ids.push(token);
    }
    Ok(DecodeOutput {
        text,
        token_ids,
        stop_reason: StopReason::MaxTokens,
    })
}
