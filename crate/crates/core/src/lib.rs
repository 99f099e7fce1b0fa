//! User-level differentially private n-gram extraction.
//!
//! Extraction runs level by level. Level 1 releases unigrams with a private
//! set union; level k only considers k-grams whose (k−1)-subgrams were
//! released at level k − 1, which keeps the candidate space small and the
//! output downward closed. Noise is split across levels so that the whole
//! run composes to a single (ε, δ) guarantee.
//!
//! ```
//! use dpne::{allocate_schedule, dpne_extract, Corpus, ExtractOptions, PrivacyTarget};
//!
//! let mut corpus = Corpus::new();
//! for u in 0..50 {
//!     corpus.add_user_texts(&format!("user{u}"), &["the cat sat on the mat"], true).unwrap();
//! }
//! let target = PrivacyTarget::new(4.0, 1e-7).unwrap();
//! let schedule = allocate_schedule(target, 3, 1.0, &[10], 0.01, None).unwrap();
//! let result = dpne_extract(&corpus, &schedule, &ExtractOptions::default()).unwrap();
//! assert!(result.is_downward_closed());
//! ```

pub mod accounting;
pub mod baselines;
pub mod cli;
pub mod corpus;
mod error;
pub mod eval;
pub mod extraction;
pub mod gramset;
pub mod histogram;
pub mod rng;

pub use accounting::{
    allocate_schedule, compute_rho1, compute_rho_k, gaussian_delta, solve_sigma_star,
    NoiseSchedule, PrivacyTarget,
};
pub use baselines::{dpsu_all, dpsu_even, dpsu_single};
pub use corpus::{
    load_corpus, synth_corpus, Corpus, CorpusFormat, NGram, SynthParams, TokenId, UserRecord,
};
pub use error::{Error, Result};
pub use eval::{evaluate, EvalReport};
pub use extraction::{
    dpne_extract, dpsu_extract_unigrams, ExtractOptions, ExtractionResult, LevelResult, Mode,
    PruningRule,
};
pub use gramset::GramSet;
