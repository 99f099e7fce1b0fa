use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use super::{Corpus, UserRecord};
use crate::error::{invalid, Result};
use crate::rng::{stream_rng, Purpose};

/// Shape of a synthetic Zipfian corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n_users: usize,
    pub tokens_per_user: usize,
    pub vocab_size: usize,
    pub zipf_exponent: f64,
    pub seed: u64,
}

/// Each user gets one sequence of i.i.d. tokens whose rank-r probability is
/// proportional to r^(−exponent). Token r is spelled `w{r}`.
pub fn synth_corpus(params: &SynthParams) -> Result<Corpus> {
    if params.vocab_size == 0 {
        return Err(invalid("vocab_size must be positive"));
    }
    if !(params.zipf_exponent > 0.0 && params.zipf_exponent.is_finite()) {
        return Err(invalid("zipf_exponent must be positive"));
    }
    let zipf = Zipf::new(params.vocab_size as f64, params.zipf_exponent)
        .map_err(|e| invalid(format!("zipf: {e}")))?;
    let width = params.n_users.max(1).to_string().len();

    let mut corpus = Corpus::new();
    for u in 0..params.n_users {
        let mut rng = stream_rng(params.seed, Purpose::Synth, 0, u as u64);
        let seq = (0..params.tokens_per_user)
            .map(|_| {
                let rank = zipf.sample(&mut rng) as u64;
                corpus.tokens_mut().intern(&format!("w{rank}"))
            })
            .collect();
        corpus.push_user(UserRecord {
            user_id: format!("u{u:0width$}"),
            sequences: vec![seq],
        })?;
    }
    Ok(corpus)
}
