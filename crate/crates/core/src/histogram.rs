//! Weighted-gaussian histogram: each user spreads an ℓ₂ budget of 1 over
//! at most Δ of its grams, then noisy thresholding decides what is released.

use rand::Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::corpus::{NGram, TokenId};
use crate::gramset::GramSet;
use crate::rng::NoiseSource;

/// Users per accumulation shard. Shards are summed independently and
/// merged in shard order, so the result does not depend on thread count.
pub const SHARD_USERS: usize = 256;

/// Hₖ. Only grams with positive weight are stored.
#[derive(Debug, Clone, Default)]
pub struct WeightedHistogram {
    level: usize,
    weights: FxHashMap<NGram, f64>,
}

impl WeightedHistogram {
    pub fn new(level: usize) -> Self {
        Self {
            level,
            weights: FxHashMap::default(),
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Adds 1/√|items| to every gram in `items`. `items` must already be
    /// deduplicated, pruned and capped. An empty set is a no-op.
    pub fn accumulate(&mut self, items: &[NGram]) {
        if items.is_empty() {
            return;
        }
        let w = 1.0 / (items.len() as f64).sqrt();
        for g in items {
            *self.weights.entry(g.clone()).or_insert(0.0) += w;
        }
    }

    /// Adds `other` into `self`, gram by gram.
    pub fn merge(&mut self, other: WeightedHistogram) {
        if self.weights.is_empty() {
            self.weights = other.weights;
            return;
        }
        for (g, w) in other.weights {
            *self.weights.entry(g).or_insert(0.0) += w;
        }
    }

    pub fn weight(&self, gram: &[TokenId]) -> f64 {
        self.weights.get(gram).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, gram: &[TokenId]) -> bool {
        self.weights.contains_key(gram)
    }

    /// |supp(Hₖ)|
    pub fn support_size(&self) -> usize {
        self.weights.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NGram, f64)> + '_ {
        self.weights.iter().map(|(g, &w)| (g, w))
    }

    /// Euclidean distance between two histograms over the union of supports.
    pub fn l2_distance(&self, other: &WeightedHistogram) -> f64 {
        let mut sum = 0.0;
        for (g, w) in &self.weights {
            let d = w - other.weight(g);
            sum += d * d;
        }
        for (g, w) in &other.weights {
            if !self.weights.contains_key(g) {
                sum += w * w;
            }
        }
        sum.sqrt()
    }
}

/// Keeps `items` if there are at most `cap` of them, otherwise a uniform
/// subset of size `cap` drawn without replacement. `items` should be in a
/// canonical (sorted) order so the draw is reproducible; the output keeps
/// that order.
pub fn cap_contribution<R: Rng + ?Sized>(items: Vec<NGram>, cap: usize, rng: &mut R) -> Vec<NGram> {
    assert!(cap >= 1, "contribution cap must be at least 1");
    if items.len() <= cap {
        return items;
    }
    let mut picked = rand::seq::index::sample(rng, items.len(), cap).into_vec();
    picked.sort_unstable();
    let mut out = Vec::with_capacity(cap);
    let mut next = picked.into_iter().peekable();
    for (i, g) in items.into_iter().enumerate() {
        if next.peek() == Some(&i) {
            out.push(g);
            next.next();
        }
    }
    out
}

/// Builds a histogram from users in their given order. `contribution`
/// returns a user's final (pruned, capped) item set.
///
/// Users are cut into fixed shards of [`SHARD_USERS`]; shards accumulate in
/// parallel and are merged in index order, which makes every weight
/// bit-identical for any thread count.
pub fn build_sharded<T, F>(level: usize, users: &[T], contribution: F) -> WeightedHistogram
where
    T: Sync,
    F: Fn(&T) -> Vec<NGram> + Sync,
{
    let partials: Vec<WeightedHistogram> = users
        .par_chunks(SHARD_USERS)
        .map(|shard| {
            let mut h = WeightedHistogram::new(level);
            for u in shard {
                h.accumulate(&contribution(u));
            }
            h
        })
        .collect();
    let mut hist = WeightedHistogram::new(level);
    for p in partials {
        hist.merge(p);
    }
    hist
}

/// Every gram in the support whose weight plus σ·Z strictly exceeds ρ,
/// where Z is the gram's own keyed normal draw. ρ = +∞ releases nothing.
pub fn threshold_release(
    hist: &WeightedHistogram,
    sigma: f64,
    rho: f64,
    noise: &dyn NoiseSource,
) -> GramSet {
    if rho == f64::INFINITY {
        return GramSet::new();
    }
    hist.weights
        .par_iter()
        .filter(|(g, &w)| passes(w, sigma, rho, noise, g))
        .map(|(g, _)| g.clone())
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[inline]
pub(crate) fn passes(
    weight: f64,
    sigma: f64,
    rho: f64,
    noise: &dyn NoiseSource,
    gram: &[TokenId],
) -> bool {
    let z = if sigma == 0.0 {
        0.0
    } else {
        sigma * noise.standard_normal(gram)
    };
    weight + z > rho
}
