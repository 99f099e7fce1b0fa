//! Candidate pruning at level k ≥ 2: which k-grams are valid given the
//! released S₁ and Sₖ₋₁, counted exactly or estimated, and how to sample
//! zero-weight candidates uniformly.

use std::collections::BTreeSet;

use rand::Rng;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::corpus::{NGram, TokenId};
use crate::error::{invalid, Error, Result};
use crate::gramset::GramSet;
use crate::histogram::WeightedHistogram;

/// Which already-released subgrams a k-gram needs to be a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruningRule {
    /// Prefix and suffix in Sₖ₋₁, first and last token in S₁.
    #[default]
    BothSide,
    /// Prefix in Sₖ₋₁ and last token in S₁.
    SingleSide,
}

impl std::str::FromStr for PruningRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "both" | "both_side" => Ok(PruningRule::BothSide),
            "single" | "single_side" => Ok(PruningRule::SingleSide),
            other => Err(format!(
                "unknown pruning rule {other:?} (expected both|single)"
            )),
        }
    }
}

/// Default ceiling on |S₁|·|Sₖ₋₁| for explicit enumeration.
pub const DEFAULT_VALID_SET_LIMIT: u128 = 50_000_000;

/// Anything that can answer gram membership.
pub trait GramLookup {
    fn has(&self, gram: &[TokenId]) -> bool;
}

impl GramLookup for GramSet {
    fn has(&self, gram: &[TokenId]) -> bool {
        self.contains(gram)
    }
}

impl GramLookup for WeightedHistogram {
    fn has(&self, gram: &[TokenId]) -> bool {
        self.contains(gram)
    }
}

impl GramLookup for BTreeSet<NGram> {
    fn has(&self, gram: &[TokenId]) -> bool {
        self.contains(gram)
    }
}

impl GramLookup for FxHashSet<NGram> {
    fn has(&self, gram: &[TokenId]) -> bool {
        self.contains(gram)
    }
}

/// Whether `w` (length ≥ 2) is in Vₖ.
pub fn check_validity(
    w: &[TokenId],
    s1: &GramSet,
    s_prev: &GramSet,
    rule: PruningRule,
) -> Result<bool> {
    if w.len() < 2 {
        return Err(invalid(format!(
            "validity needs a gram of length ≥ 2, got {}",
            w.len()
        )));
    }
    Ok(is_valid(w, s1, s_prev, rule))
}

#[inline]
pub(crate) fn is_valid(w: &[TokenId], s1: &GramSet, s_prev: &GramSet, rule: PruningRule) -> bool {
    let k = w.len();
    let last = s1.contains(&w[k - 1..]);
    let prefix = s_prev.contains(&w[..k - 1]);
    match rule {
        PruningRule::SingleSide => last && prefix,
        PruningRule::BothSide => last && prefix && s1.contains(&w[..1]) && s_prev.contains(&w[1..]),
    }
}

/// items ∩ Vₖ. Every item must have the same length k ≥ 2.
pub fn prune_invalid(
    items: &GramSet,
    s1: &GramSet,
    s_prev: &GramSet,
    rule: PruningRule,
) -> Result<GramSet> {
    let Some(first) = items.iter().next() else {
        return Ok(GramSet::new());
    };
    let k = first.len();
    if k < 2 {
        return Err(invalid("pruning applies to grams of length ≥ 2"));
    }
    if items.iter().any(|g| g.len() != k) {
        return Err(invalid("pruning needs grams of a single length"));
    }
    Ok(items
        .iter()
        .filter(|g| is_valid(g, s1, s_prev, rule))
        .cloned()
        .collect())
}

fn pair_count(s1: &GramSet, s_prev: &GramSet) -> u128 {
    s1.len() as u128 * s_prev.len() as u128
}

/// Calls `f` once per member of Vₖ. The cost is proportional to |Sₖ₋₁|
/// plus |Vₖ|, not to |S₁|·|Sₖ₋₁|.
fn for_each_valid(
    s1: &GramSet,
    s_prev: &GramSet,
    rule: PruningRule,
    mut f: impl FnMut(&NGram, TokenId),
) {
    let tails: Vec<TokenId> = s1.iter().map(|g| g.first()).collect();
    match rule {
        PruningRule::SingleSide => {
            for w in s_prev {
                for &z in &tails {
                    f(w, z);
                }
            }
        }
        PruningRule::BothSide => {
            // (k−2)-token head of each Sₖ₋₁ gram -> its last tokens that lie in S₁
            let mut by_head: FxHashMap<&[TokenId], Vec<TokenId>> = FxHashMap::default();
            for w in s_prev {
                if s1.contains(&[w.last()]) {
                    by_head.entry(w.prefix()).or_default().push(w.last());
                }
            }
            for w in s_prev {
                if !s1.contains(&[w.first()]) {
                    continue;
                }
                if let Some(zs) = by_head.get(w.suffix()) {
                    for &z in zs {
                        f(w, z);
                    }
                }
            }
        }
    }
}

/// Explicit Vₖ, refusing when |S₁|·|Sₖ₋₁| exceeds `limit`.
pub fn compute_valid_kgrams_bounded(
    s1: &GramSet,
    s_prev: &GramSet,
    rule: PruningRule,
    limit: u128,
) -> Result<GramSet> {
    let pairs = pair_count(s1, s_prev);
    if pairs > limit {
        return Err(Error::ValidSetTooLarge { pairs, limit });
    }
    let mut out = Vec::new();
    for_each_valid(s1, s_prev, rule, |w, z| out.push(NGram::concat(w, &[z])));
    Ok(out.into_iter().collect())
}

/// Explicit Vₖ with the default size guard.
pub fn compute_valid_kgrams(s1: &GramSet, s_prev: &GramSet, rule: PruningRule) -> Result<GramSet> {
    compute_valid_kgrams_bounded(s1, s_prev, rule, DEFAULT_VALID_SET_LIMIT)
}

/// |Vₖ| without materialising it.
pub fn count_valid_kgrams(s1: &GramSet, s_prev: &GramSet, rule: PruningRule) -> u64 {
    if rule == PruningRule::SingleSide {
        return (s1.len() * s_prev.len()) as u64;
    }
    let mut n = 0u64;
    for_each_valid(s1, s_prev, rule, |_, _| n += 1);
    n
}

/// Default validity-probe rate: about 10⁶ probes per level.
pub fn default_sample_p(s1_len: usize, s_prev_len: usize) -> f64 {
    let pairs = s1_len as f64 * s_prev_len as f64;
    if pairs <= 0.0 {
        1.0
    } else {
        (1e6 / pairs).min(1.0)
    }
}

/// One uniform draw from the sampling frame of `rule`. Both-side pairs
/// x ∈ S₁ with w ∈ Sₖ₋₁ into x·w; single-side pairs w ∈ Sₖ₋₁ with z ∈ S₁
/// into w·z, which covers the single-side Vₖ exactly.
#[inline]
fn draw_candidate<R: Rng + ?Sized>(
    s1: &GramSet,
    s_prev: &GramSet,
    rule: PruningRule,
    rng: &mut R,
    buf: &mut Vec<TokenId>,
) {
    let a = s1.get(rng.random_range(0..s1.len())).first();
    let w = s_prev.get(rng.random_range(0..s_prev.len()));
    buf.clear();
    match rule {
        PruningRule::BothSide => {
            buf.push(a);
            buf.extend_from_slice(w);
        }
        PruningRule::SingleSide => {
            buf.extend_from_slice(w);
            buf.push(a);
        }
    }
}

/// Monte Carlo estimate of |Vₖ|: N = ⌈p·|S₁|·|Sₖ₋₁|⌉ pairs drawn with
/// replacement, returning ⌈valid/p⌉. At p = 1 every pair is checked once
/// and the count is exact. Zero if either set is empty.
pub fn estimate_valid_kgrams<R: Rng + ?Sized>(
    s1: &GramSet,
    s_prev: &GramSet,
    rule: PruningRule,
    p: f64,
    rng: &mut R,
) -> Result<u64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!(
            "sampling probability must lie in (0, 1], got {p}"
        )));
    }
    if s1.is_empty() || s_prev.is_empty() {
        return Ok(0);
    }
    if p >= 1.0 {
        return Ok(count_valid_kgrams(s1, s_prev, rule));
    }
    let probes = (p * s1.len() as f64 * s_prev.len() as f64).ceil() as u64;
    let mut buf = Vec::new();
    let mut valid = 0u64;
    for _ in 0..probes {
        draw_candidate(s1, s_prev, rule, rng, &mut buf);
        if is_valid(&buf, s1, s_prev, rule) {
            valid += 1;
        }
    }
    Ok((valid as f64 / p).ceil() as u64)
}

/// Rejection budget used by the extraction pipeline.
pub fn default_max_attempts(count: usize) -> u64 {
    100 * count as u64 + 10_000
}

/// `count` distinct grams drawn uniformly without replacement from
/// Vₖ ∖ support. Fails after `max_attempts` consecutive rejections.
pub fn sample_spurious<R: Rng + ?Sized>(
    s1: &GramSet,
    s_prev: &GramSet,
    rule: PruningRule,
    support: &dyn GramLookup,
    count: usize,
    rng: &mut R,
    max_attempts: u64,
) -> Result<GramSet> {
    if count == 0 {
        return Ok(GramSet::new());
    }
    if s1.is_empty() || s_prev.is_empty() {
        return Err(Error::SamplerExhausted {
            requested: count,
            accepted: 0,
            attempts: 0,
            acceptance_rate: 0.0,
        });
    }
    let mut picked: FxHashSet<NGram> = FxHashSet::default();
    let mut buf = Vec::new();
    let mut streak = 0u64;
    let mut total = 0u64;
    while picked.len() < count {
        draw_candidate(s1, s_prev, rule, rng, &mut buf);
        total += 1;
        // the sampler frame already puts x in S₁ and w in Sₖ₋₁; the full
        // check is kept so both rules go through the same test
        if is_valid(&buf, s1, s_prev, rule)
            && !support.has(&buf)
            && !picked.contains(buf.as_slice())
        {
            picked.insert(NGram::new(&buf));
            streak = 0;
            continue;
        }
        streak += 1;
        if streak >= max_attempts {
            return Err(Error::SamplerExhausted {
                requested: count,
                accepted: picked.len(),
                attempts: streak,
                acceptance_rate: picked.len() as f64 / total as f64,
            });
        }
    }
    Ok(picked.into_iter().collect())
}
