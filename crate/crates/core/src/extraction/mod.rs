//! Level-by-level private n-gram extraction.
//!
//! Level 1 is a plain private set union over unigrams. Each later level only
//! considers k-grams whose shorter subgrams were already released, so the
//! output is downward closed by construction.

mod validity;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accounting::{compute_rho_k, spurious_probability, NoiseSchedule};
use crate::corpus::{Corpus, NGram, UserRecord};
use crate::error::Result;
use crate::gramset::GramSet;
use crate::histogram::{
    build_sharded, cap_contribution, passes, threshold_release, WeightedHistogram,
};
use crate::rng::{hash_str, sample_binomial, stream_rng, GramNoise, Purpose};

pub(crate) use validity::is_valid;
pub use validity::{
    check_validity, compute_valid_kgrams, compute_valid_kgrams_bounded, count_valid_kgrams,
    default_max_attempts, default_sample_p, estimate_valid_kgrams, prune_invalid, sample_spurious,
    GramLookup, PruningRule, DEFAULT_VALID_SET_LIMIT,
};

/// How zero-weight candidates are handled at levels k ≥ 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Enumerate Vₖ and threshold every zero-weight member with its own noise.
    Reference,
    /// Never materialise Vₖ: estimate its size, draw how many zero-weight
    /// grams would pass, and sample that many uniformly.
    #[default]
    Scalable,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "reference" => Ok(Mode::Reference),
            "scalable" => Ok(Mode::Scalable),
            other => Err(format!(
                "unknown mode {other:?} (expected reference|scalable)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub rule: PruningRule,
    pub mode: Mode,
    pub seed: u64,
    /// Ceiling on |S₁|·|Sₖ₋₁| for reference mode.
    pub valid_set_limit: u128,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            rule: PruningRule::BothSide,
            mode: Mode::Scalable,
            seed: 0,
            valid_set_limit: DEFAULT_VALID_SET_LIMIT,
        }
    }
}

/// Where |Vₖ| comes from in scalable mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValidCount {
    /// Monte Carlo estimate with probe rate `p` (`None` for the default).
    /// The single-side count is a plain product and is never estimated.
    Estimate { p: Option<f64> },
    /// Exact count by enumeration.
    Exact,
    /// Supplied by the caller.
    Given(u64),
}

/// Strategy for one level k ≥ 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelStrategy {
    Reference { limit: u128 },
    Scalable { count: ValidCount },
}

/// One user in canonical order, with the key of its capping stream.
#[derive(Debug, Clone, Copy)]
pub struct PreparedUser<'a> {
    pub record: &'a UserRecord,
    cap_key: u64,
}

/// Users sorted by id. Sorting fixes the floating-point summation order,
/// so the input order of users never changes a result.
#[derive(Debug, Clone)]
pub struct PreparedCorpus<'a> {
    users: Vec<PreparedUser<'a>>,
}

impl<'a> PreparedCorpus<'a> {
    pub fn new(corpus: &'a Corpus) -> Self {
        let mut users: Vec<PreparedUser<'a>> = corpus
            .users()
            .iter()
            .map(|record| PreparedUser {
                record,
                cap_key: hash_str(&record.user_id),
            })
            .collect();
        users.sort_unstable_by(|a, b| a.record.user_id.cmp(&b.record.user_id));
        Self { users }
    }

    pub fn users(&self) -> &[PreparedUser<'a>] {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

/// Released subgrams a level-k candidate is checked against.
#[derive(Debug, Clone, Copy)]
pub struct Pruning<'a> {
    pub s1: &'a GramSet,
    pub s_prev: &'a GramSet,
    pub rule: PruningRule,
}

/// Builds a capped weighted histogram. `items` gives a user's sorted,
/// distinct candidate set; the capping stream is keyed by `cap_level`
/// and the user.
pub(crate) fn capped_histogram<F>(
    users: &PreparedCorpus<'_>,
    level: usize,
    cap_level: usize,
    cap: usize,
    seed: u64,
    items: F,
) -> WeightedHistogram
where
    F: Fn(&UserRecord) -> Vec<NGram> + Sync,
{
    build_sharded(level, users.users(), |u| {
        let grams = items(u.record);
        if grams.len() <= cap {
            return grams;
        }
        let mut rng = stream_rng(seed, Purpose::Cap, cap_level, u.cap_key);
        cap_contribution(grams, cap, &mut rng)
    })
}

/// Hₖ: every user's k-grams, pruned to Vₖ when `pruning` is given, capped
/// at `cap`, each weighted 1/√|Uᵢ|.
pub fn level_histogram(
    users: &PreparedCorpus<'_>,
    k: usize,
    pruning: Option<Pruning<'_>>,
    cap: usize,
    seed: u64,
) -> WeightedHistogram {
    capped_histogram(users, k, k, cap, seed, |record| {
        let mut grams = record.kgrams(k);
        if let Some(p) = pruning {
            grams.retain(|g| is_valid(g, p.s1, p.s_prev, p.rule));
        }
        grams
    })
}

/// What one level released, plus the numbers that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub k: usize,
    /// Sₖ.
    pub grams: GramSet,
    /// Members of Sₖ that came from outside supp(Hₖ). Debug information:
    /// publishing it breaks the privacy guarantee.
    pub injected: GramSet,
    pub sigma: f64,
    pub rho: f64,
    pub cap: usize,
    pub support_size: usize,
    /// |Vₖ| as used for ρₖ; `None` where no candidate space applies.
    pub valid_count: Option<u64>,
    pub valid_count_exact: bool,
    /// Probe rate of the validity estimate, when one was made.
    pub sample_p: Option<f64>,
}

impl LevelResult {
    pub(crate) fn empty(k: usize, sigma: f64, cap: usize) -> Self {
        Self {
            k,
            grams: GramSet::new(),
            injected: GramSet::new(),
            sigma,
            rho: f64::INFINITY,
            cap,
            support_size: 0,
            valid_count: Some(0),
            valid_count_exact: true,
            sample_p: None,
        }
    }

    /// Released grams that some user contributed.
    pub fn from_support(&self) -> GramSet {
        self.grams.difference(&self.injected)
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn summary(&self) -> LevelSummary {
        LevelSummary {
            k: self.k,
            released: self.grams.len(),
            sigma: self.sigma,
            rho: self.rho.is_finite().then_some(self.rho),
            cap: self.cap,
            support_size: self.support_size,
            valid_count: self.valid_count,
            valid_count_exact: self.valid_count_exact,
            sample_p: self.sample_p,
        }
    }
}

/// Per-level numbers without the grams, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub k: usize,
    pub released: usize,
    pub sigma: f64,
    /// `None` when the threshold was infinite.
    pub rho: Option<f64>,
    pub cap: usize,
    pub support_size: usize,
    pub valid_count: Option<u64>,
    pub valid_count_exact: bool,
    pub sample_p: Option<f64>,
}

/// S₁..S_T with per-level metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionResult {
    pub method: String,
    pub levels: Vec<LevelResult>,
    /// False for σ = 0 debug runs.
    pub private: bool,
}

impl ExtractionResult {
    pub fn max_len(&self) -> usize {
        self.levels.len()
    }

    /// Sₖ, 1-based.
    pub fn level(&self, k: usize) -> &GramSet {
        &self.levels[k - 1].grams
    }

    /// |S₁|..|S_T|.
    pub fn counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.grams.len()).collect()
    }

    pub fn total(&self) -> usize {
        self.levels.iter().map(|l| l.grams.len()).sum()
    }

    pub fn summaries(&self) -> Vec<LevelSummary> {
        self.levels.iter().map(LevelResult::summary).collect()
    }

    /// Every released gram must have all of its contiguous subgrams released.
    pub fn is_downward_closed(&self) -> bool {
        self.levels.iter().skip(1).all(|level| {
            level.grams.iter().all(|g| {
                (1..g.len()).all(|len| g.windows(len).all(|sub| self.level(len).contains(sub)))
            })
        })
    }
}

/// Private set union over unigrams: each user's distinct tokens, capped at
/// `cap`, thresholded at `rho1` under noise `sigma1`. Only tokens some user
/// holds can be released.
pub fn dpsu_extract_unigrams(
    corpus: &Corpus,
    cap: usize,
    rho1: f64,
    sigma1: f64,
    seed: u64,
) -> GramSet {
    let users = PreparedCorpus::new(corpus);
    unigram_level(&users, cap, rho1, sigma1, seed).grams
}

pub(crate) fn unigram_level(
    users: &PreparedCorpus<'_>,
    cap: usize,
    rho1: f64,
    sigma1: f64,
    seed: u64,
) -> LevelResult {
    let hist = level_histogram(users, 1, None, cap, seed);
    let grams = threshold_release(&hist, sigma1, rho1, &GramNoise::new(seed, 1));
    LevelResult {
        k: 1,
        grams,
        injected: GramSet::new(),
        sigma: sigma1,
        rho: rho1,
        cap,
        support_size: hist.support_size(),
        valid_count: None,
        valid_count_exact: true,
        sample_p: None,
    }
}

/// Knobs of a single level k ≥ 2.
#[derive(Debug, Clone, Copy)]
pub struct LevelParams<'a> {
    pub k: usize,
    pub pruning: Pruning<'a>,
    pub sigma: f64,
    pub cap: usize,
    pub eta: f64,
    pub seed: u64,
}

/// Runs level k ≥ 2 given the released S₁ and Sₖ₋₁.
pub fn extract_level(
    users: &PreparedCorpus<'_>,
    params: LevelParams<'_>,
    strategy: LevelStrategy,
) -> Result<LevelResult> {
    let LevelParams {
        k,
        pruning,
        sigma,
        cap,
        eta,
        seed,
    } = params;
    let Pruning { s1, s_prev, rule } = pruning;
    if k < 2 {
        return Err(crate::error::invalid("extract_level handles k ≥ 2"));
    }
    if s1.is_empty() || s_prev.is_empty() {
        return Ok(LevelResult::empty(k, sigma, cap));
    }

    let hist = level_histogram(users, k, Some(pruning), cap, seed);
    let noise = GramNoise::new(seed, k);
    let size_prev = s_prev.len() as u64;

    let (released, injected, rho, valid_count, exact, sample_p) = match strategy {
        LevelStrategy::Reference { limit } => {
            let valid = compute_valid_kgrams_bounded(s1, s_prev, rule, limit)?;
            let n_valid = valid.len() as u64;
            let rho = compute_rho_k(sigma, eta, size_prev, n_valid)?;
            let released = threshold_release(&hist, sigma, rho, &noise);
            let injected: GramSet = if rho == f64::INFINITY {
                GramSet::new()
            } else {
                valid
                    .into_vec()
                    .into_par_iter()
                    .filter(|g| !hist.contains(g) && passes(0.0, sigma, rho, &noise, g))
                    .collect::<Vec<_>>()
                    .into_iter()
                    .collect()
            };
            (released, injected, rho, n_valid, true, None)
        }
        LevelStrategy::Scalable { count } => {
            let (n_valid, exact, p) = match count {
                ValidCount::Given(n) => (n, true, None),
                ValidCount::Exact => (count_valid_kgrams(s1, s_prev, rule), true, None),
                ValidCount::Estimate { .. } if rule == PruningRule::SingleSide => {
                    (count_valid_kgrams(s1, s_prev, rule), true, None)
                }
                ValidCount::Estimate { p } => {
                    let p = p.unwrap_or_else(|| default_sample_p(s1.len(), s_prev.len()));
                    let mut rng = stream_rng(seed, Purpose::Estimate, k, 0);
                    let est = estimate_valid_kgrams(s1, s_prev, rule, p, &mut rng)?;
                    (est, p >= 1.0, Some(p))
                }
            };
            let rho = compute_rho_k(sigma, eta, size_prev, n_valid)?;
            let released = threshold_release(&hist, sigma, rho, &noise);
            let population = n_valid.saturating_sub(hist.support_size() as u64);
            let q = spurious_probability(rho, sigma);
            let mut rng = stream_rng(seed, Purpose::Binomial, k, 0);
            let draws = sample_binomial(population, q, &mut rng) as usize;
            let mut rng = stream_rng(seed, Purpose::Spurious, k, 0);
            let injected = sample_spurious(
                s1,
                s_prev,
                rule,
                &hist,
                draws,
                &mut rng,
                default_max_attempts(draws),
            )?;
            (released, injected, rho, n_valid, exact, p)
        }
    };

    Ok(LevelResult {
        k,
        grams: released.union(&injected),
        injected,
        sigma,
        rho,
        cap,
        support_size: hist.support_size(),
        valid_count: Some(valid_count),
        valid_count_exact: exact,
        sample_p,
    })
}

/// Full extraction of S₁..S_T under `schedule`.
pub fn dpne_extract(
    corpus: &Corpus,
    schedule: &NoiseSchedule,
    opts: &ExtractOptions,
) -> Result<ExtractionResult> {
    let users = PreparedCorpus::new(corpus);
    let seed = opts.seed;
    let mut levels = vec![unigram_level(
        &users,
        schedule.cap(1),
        schedule.rho1,
        schedule.sigma(1),
        seed,
    )];
    let strategy = match opts.mode {
        Mode::Reference => LevelStrategy::Reference {
            limit: opts.valid_set_limit,
        },
        Mode::Scalable => LevelStrategy::Scalable {
            count: ValidCount::Estimate {
                p: schedule.sample_p,
            },
        },
    };
    for k in 2..=schedule.max_len {
        let level = {
            let s1 = &levels[0].grams;
            let s_prev = &levels[k - 2].grams;
            let params = LevelParams {
                k,
                pruning: Pruning {
                    s1,
                    s_prev,
                    rule: opts.rule,
                },
                sigma: schedule.sigma(k),
                cap: schedule.cap(k),
                eta: schedule.eta,
                seed,
            };
            extract_level(&users, params, strategy)?
        };
        levels.push(level);
    }
    Ok(ExtractionResult {
        method: "dpne".to_owned(),
        levels,
        private: schedule.private,
    })
}
