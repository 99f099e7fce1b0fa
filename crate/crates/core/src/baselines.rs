//! Private set union baselines that ignore the level structure.
//!
//! They share tokenization, capping streams and gram-keyed noise with the
//! main pipeline, so any difference in output comes from the algorithm.

use crate::accounting::{compute_rho1, solve_sigma_star, PrivacyTarget};
use crate::corpus::{Corpus, NGram, TokenId};
use crate::error::{invalid, Result};
use crate::extraction::{
    capped_histogram, level_histogram, ExtractionResult, LevelResult, PreparedCorpus,
};
use crate::gramset::GramSet;
use crate::histogram::threshold_release;
use crate::rng::{GramNoise, NoiseSource};

/// Noise keyed by the length of each gram, so a pooled histogram draws the
/// same value for a gram as its per-length counterpart.
struct LengthKeyedNoise {
    seed: u64,
}

impl NoiseSource for LengthKeyedNoise {
    fn standard_normal(&self, gram: &[TokenId]) -> f64 {
        GramNoise::new(self.seed, gram.len()).standard_normal(gram)
    }
}

fn check_len(max_len: usize, delta0: usize) -> Result<()> {
    if max_len == 0 {
        return Err(invalid("maximum n-gram length must be at least 1"));
    }
    if delta0 == 0 {
        return Err(invalid("contribution cap must be at least 1"));
    }
    Ok(())
}

/// One private set union over grams of every length 1..=`max_len`, with
/// per-user cap `max_len·delta0` and the full budget.
pub fn dpsu_all(
    corpus: &Corpus,
    target: PrivacyTarget,
    max_len: usize,
    delta0: usize,
    seed: u64,
) -> Result<ExtractionResult> {
    check_len(max_len, delta0)?;
    let cap = max_len * delta0;
    let sigma = solve_sigma_star(target);
    let rho = compute_rho1(sigma, target.delta(), cap)?;
    let users = PreparedCorpus::new(corpus);

    // the cap stream is the unigram one, so a corpus of single tokens
    // reproduces the unigram extraction exactly
    let hist = capped_histogram(&users, 0, 1, cap, seed, |record| {
        let mut all: Vec<NGram> = (1..=max_len).flat_map(|k| record.kgrams(k)).collect();
        all.sort_unstable();
        all
    });
    let released = threshold_release(&hist, sigma, rho, &LengthKeyedNoise { seed });

    let mut support = vec![0usize; max_len];
    for (g, _) in hist.iter() {
        support[g.len() - 1] += 1;
    }
    let mut by_len: Vec<Vec<NGram>> = vec![Vec::new(); max_len];
    for g in released.into_vec() {
        by_len[g.len() - 1].push(g);
    }
    let levels = by_len
        .into_iter()
        .enumerate()
        .map(|(i, grams)| LevelResult {
            grams: grams.into_iter().collect(),
            support_size: support[i],
            valid_count: None,
            ..LevelResult::empty(i + 1, sigma, cap)
        })
        .map(|mut l| {
            l.rho = rho;
            l
        })
        .collect();
    Ok(ExtractionResult {
        method: "dpsu_all".to_owned(),
        levels,
        private: true,
    })
}

/// σ and ρ of one even-split level.
pub fn dpsu_even_params(
    target: PrivacyTarget,
    max_len: usize,
    delta0: usize,
) -> Result<(f64, f64)> {
    check_len(max_len, delta0)?;
    let sigma = solve_sigma_star(target) * (max_len as f64).sqrt();
    let rho = compute_rho1(sigma, target.delta() / max_len as f64, delta0)?;
    Ok((sigma, rho))
}

/// An independent private set union per length, each with σ*·√T and an
/// even share δ/T of the threshold budget.
pub fn dpsu_even(
    corpus: &Corpus,
    target: PrivacyTarget,
    max_len: usize,
    delta0: usize,
    seed: u64,
) -> Result<ExtractionResult> {
    let (sigma, rho) = dpsu_even_params(target, max_len, delta0)?;
    let users = PreparedCorpus::new(corpus);
    let levels = (1..=max_len)
        .map(|k| single_length(&users, k, delta0, sigma, rho, seed))
        .collect();
    Ok(ExtractionResult {
        method: "dpsu_even".to_owned(),
        levels,
        private: true,
    })
}

/// The whole budget spent on k-grams of one length.
pub fn dpsu_single(
    corpus: &Corpus,
    target: PrivacyTarget,
    k: usize,
    delta0: usize,
    seed: u64,
) -> Result<LevelResult> {
    check_len(k, delta0)?;
    let sigma = solve_sigma_star(target);
    let rho = compute_rho1(sigma, target.delta(), delta0)?;
    let users = PreparedCorpus::new(corpus);
    Ok(single_length(&users, k, delta0, sigma, rho, seed))
}

fn single_length(
    users: &PreparedCorpus<'_>,
    k: usize,
    cap: usize,
    sigma: f64,
    rho: f64,
    seed: u64,
) -> LevelResult {
    let hist = level_histogram(users, k, None, cap, seed);
    let grams: GramSet = threshold_release(&hist, sigma, rho, &GramNoise::new(seed, k));
    LevelResult {
        grams,
        support_size: hist.support_size(),
        valid_count: None,
        rho,
        ..LevelResult::empty(k, sigma, cap)
    }
}
