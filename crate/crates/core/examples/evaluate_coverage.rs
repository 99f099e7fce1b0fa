//! Measures how much of the k-anonymous vocabulary a private run recovers,
//! and audits it for grams that no user wrote.

use dpne::{
    allocate_schedule, dpne_extract, evaluate, synth_corpus, ExtractOptions, PrivacyTarget,
    SynthParams,
};

fn main() -> dpne::Result<()> {
    let corpus = synth_corpus(&SynthParams {
        n_users: 4000,
        tokens_per_user: 40,
        vocab_size: 1500,
        zipf_exponent: 1.1,
        seed: 3,
    })?;
    let schedule = allocate_schedule(PrivacyTarget::new(4.0, 1e-7)?, 4, 1.0, &[10], 0.01, None)?;
    let result = dpne_extract(&corpus, &schedule, &ExtractOptions::default())?;
    let report = evaluate(
        &result,
        &corpus,
        &[10, 50, 200],
        serde_json::json!({ "epsilon": 4.0 }),
    );
    print!("{}", report.to_table());
    Ok(())
}
