//! Generates a Zipf-distributed synthetic corpus and reports its n-gram
//! statistics.

use dpne::{synth_corpus, SynthParams};

fn main() -> dpne::Result<()> {
    let corpus = synth_corpus(&SynthParams {
        n_users: 2000,
        tokens_per_user: 50,
        vocab_size: 1000,
        zipf_exponent: 1.1,
        seed: 7,
    })?;
    println!(
        "{} users, {} distinct tokens",
        corpus.len(),
        corpus.tokens().len()
    );
    for k in 1..=4 {
        println!("distinct {k}-grams: {}", corpus.all_kgrams(k).len());
    }
    let mut out = Vec::new();
    dpne::corpus::write_jsonl(&corpus, &mut out).expect("in-memory write");
    let first = String::from_utf8_lossy(&out);
    println!("first record: {}", first.lines().next().unwrap_or(""));
    Ok(())
}
