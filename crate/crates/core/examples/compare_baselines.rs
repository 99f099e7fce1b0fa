//! DPNE against the set-union baselines on the same synthetic corpus and
//! the same privacy budget.

use dpne::eval::{ComparisonRow, ComparisonTable};
use dpne::{
    allocate_schedule, dpne_extract, dpsu_all, dpsu_even, dpsu_single, synth_corpus, ExtractOptions,
};
use dpne::{PrivacyTarget, SynthParams};

fn main() -> dpne::Result<()> {
    let corpus = synth_corpus(&SynthParams {
        n_users: 5000,
        tokens_per_user: 50,
        vocab_size: 2000,
        zipf_exponent: 1.1,
        seed: 1,
    })?;
    let (target, max_len, delta0, seed) = (PrivacyTarget::new(4.0, 1e-7)?, 5, 10, 0);

    let schedule = allocate_schedule(target, max_len, 1.0, &[delta0], 0.01, None)?;
    let mut table = ComparisonTable::new(max_len);
    let dpne = dpne_extract(
        &corpus,
        &schedule,
        &ExtractOptions {
            seed,
            ..Default::default()
        },
    )?;
    table.push(ComparisonRow::full("dpne", dpne.counts()));
    table.push(ComparisonRow::full(
        "dpsu_all",
        dpsu_all(&corpus, target, max_len, delta0, seed)?.counts(),
    ));
    table.push(ComparisonRow::full(
        "dpsu_even",
        dpsu_even(&corpus, target, max_len, delta0, seed)?.counts(),
    ));
    let single = (1..=max_len)
        .map(|k| dpsu_single(&corpus, target, k, delta0, seed).map(|l| l.len()))
        .collect::<dpne::Result<Vec<_>>>()?;
    table.push(ComparisonRow::separate("dpsu_single", single));
    print!("{}", table.to_table());
    Ok(())
}
