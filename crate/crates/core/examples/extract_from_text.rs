//! Private n-gram extraction from a handful of users' raw text.
//!
//! With so few users nothing survives the threshold, so the example also
//! repeats every user many times under fresh ids to show what a larger
//! population releases.

use dpne::{allocate_schedule, dpne_extract, Corpus, ExtractOptions, PrivacyTarget};

const TEXTS: &[&str] = &[
    "the quick brown fox jumps over the lazy dog",
    "a quick brown fox is never lazy",
    "the lazy dog sleeps all day",
    "the quick brown fox and the lazy dog are friends",
];

fn main() -> dpne::Result<()> {
    let mut corpus = Corpus::new();
    for copy in 0..2000 {
        let text = TEXTS[copy % TEXTS.len()];
        corpus.add_user_texts(&format!("user-{copy}"), &[text], true)?;
    }
    let schedule = allocate_schedule(PrivacyTarget::new(4.0, 1e-7)?, 4, 1.0, &[20], 0.01, None)?;
    let result = dpne_extract(&corpus, &schedule, &ExtractOptions::default())?;
    for level in &result.levels {
        let mut grams: Vec<String> = level
            .grams
            .iter()
            .map(|g| corpus.tokens().render(g, " "))
            .collect();
        grams.sort();
        println!("{}-grams ({}): {}", level.k, grams.len(), grams.join(" | "));
    }
    assert!(result.is_downward_closed());
    Ok(())
}
