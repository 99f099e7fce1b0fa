//! Utility and spurious-output measurement against the cleartext corpus.
//!
//! This is trusted-curator analysis: nothing here is private.

use std::fmt::Write as _;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, NGram};
use crate::extraction::{ExtractionResult, LevelSummary};

/// Number of distinct users holding each k-gram.
pub fn user_counts(corpus: &Corpus, k: usize) -> FxHashMap<NGram, u32> {
    corpus
        .users()
        .par_iter()
        .fold(FxHashMap::default, |mut acc: FxHashMap<NGram, u32>, u| {
            for g in u.kgrams(k) {
                *acc.entry(g).or_insert(0) += 1;
            }
            acc
        })
        .reduce(FxHashMap::default, |mut a, b| {
            let (small, big) = if a.len() < b.len() { (a, b) } else { (b, a) };
            a = big;
            for (g, c) in small {
                *a.entry(g).or_insert(0) += c;
            }
            a
        })
}

/// Coverage of grams held by at least `min_users` users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub k: usize,
    pub min_users: u32,
    /// Eligible grams that were released.
    pub covered: usize,
    /// Distinct k-grams held by at least `min_users` users.
    pub eligible: usize,
    /// `covered / eligible`, `None` when nothing is eligible.
    pub fraction: Option<f64>,
}

/// Released grams that no user holds, per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpuriousAudit {
    pub per_level: Vec<usize>,
    pub total: usize,
    /// `total` over all released grams; 0 for an empty release.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    /// |S₁|..|S_T|.
    pub counts: Vec<usize>,
    pub total: usize,
    pub coverage: Vec<CoverageCell>,
    pub spurious: SpuriousAudit,
    pub levels: Vec<LevelSummary>,
    /// Parameters of the evaluated run, echoed as given.
    #[serde(default)]
    pub params: serde_json::Value,
}

fn coverage_from_counts(
    result: &ExtractionResult,
    k: usize,
    counts: &FxHashMap<NGram, u32>,
    thresholds: &[u32],
) -> Vec<CoverageCell> {
    let released = result.level(k);
    thresholds
        .iter()
        .map(|&min_users| {
            let (mut covered, mut eligible) = (0, 0);
            for (g, &c) in counts {
                if c >= min_users {
                    eligible += 1;
                    if released.contains(g) {
                        covered += 1;
                    }
                }
            }
            CoverageCell {
                k,
                min_users,
                covered,
                eligible,
                fraction: (eligible > 0).then(|| covered as f64 / eligible as f64),
            }
        })
        .collect()
}

/// For each level k and each K in `thresholds`, the share of k-grams held
/// by ≥ K distinct users that the result released.
pub fn k_anonymity_coverage(
    result: &ExtractionResult,
    corpus: &Corpus,
    thresholds: &[u32],
) -> Vec<CoverageCell> {
    (1..=result.max_len())
        .flat_map(|k| coverage_from_counts(result, k, &user_counts(corpus, k), thresholds))
        .collect()
}

fn audit_from_counts(result: &ExtractionResult, counts: &[FxHashMap<NGram, u32>]) -> SpuriousAudit {
    let per_level: Vec<usize> = result
        .levels
        .iter()
        .zip(counts)
        .map(|(l, c)| l.grams.iter().filter(|g| !c.contains_key(*g)).count())
        .collect();
    let total: usize = per_level.iter().sum();
    let released = result.total();
    SpuriousAudit {
        per_level,
        total,
        fraction: if released == 0 {
            0.0
        } else {
            total as f64 / released as f64
        },
    }
}

/// Counts released grams absent from every user's text.
pub fn spurious_audit(result: &ExtractionResult, corpus: &Corpus) -> SpuriousAudit {
    let counts: Vec<_> = (1..=result.max_len())
        .map(|k| user_counts(corpus, k))
        .collect();
    audit_from_counts(result, &counts)
}

/// Coverage and spurious audit in one pass over the corpus.
pub fn evaluate(
    result: &ExtractionResult,
    corpus: &Corpus,
    thresholds: &[u32],
    params: serde_json::Value,
) -> EvalReport {
    let counts: Vec<_> = (1..=result.max_len())
        .map(|k| user_counts(corpus, k))
        .collect();
    let coverage = (1..=result.max_len())
        .flat_map(|k| coverage_from_counts(result, k, &counts[k - 1], thresholds))
        .collect();
    EvalReport {
        method: result.method.clone(),
        counts: result.counts(),
        total: result.total(),
        coverage,
        spurious: audit_from_counts(result, &counts),
        levels: result.summaries(),
        params,
    }
}

impl EvalReport {
    /// Counts, spurious and coverage as aligned text.
    pub fn to_table(&self) -> String {
        let mut table = ComparisonTable::new(self.counts.len());
        table.push(ComparisonRow::full(&self.method, self.counts.clone()));
        let mut out = table.to_table();
        let _ = writeln!(
            out,
            "\nspurious: {} of {} ({:.4})",
            self.spurious.total, self.total, self.spurious.fraction
        );
        let _ = writeln!(
            out,
            "\n{:>3} {:>8} {:>9} {:>9} {:>8}",
            "k", "K", "covered", "eligible", "fraction"
        );
        for c in &self.coverage {
            let frac = c.fraction.map_or("-".to_owned(), |f| format!("{f:.4}"));
            let _ = writeln!(
                out,
                "{:>3} {:>8} {:>9} {:>9} {:>8}",
                c.k, c.min_users, c.covered, c.eligible, frac
            );
        }
        out
    }

    /// One row per (k, K) coverage cell.
    pub fn coverage_csv(&self) -> String {
        let mut out = String::from("method,k,K,covered,eligible,fraction\n");
        for c in &self.coverage {
            let frac = c.fraction.map_or(String::new(), |f| f.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                self.method, c.k, c.min_users, c.covered, c.eligible, frac
            );
        }
        out
    }

    /// Per-level released and spurious counts.
    pub fn levels_csv(&self) -> String {
        let mut out = String::from("method,k,released,spurious\n");
        for (i, (&n, &s)) in self.counts.iter().zip(&self.spurious.per_level).enumerate() {
            let _ = writeln!(out, "{},{},{},{}", self.method, i + 1, n, s);
        }
        out
    }
}

/// A method's released counts per length. A `None` cell was not run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub counts: Vec<Option<usize>>,
    /// Left empty when the columns are separate runs.
    pub total: Option<usize>,
}

impl ComparisonRow {
    pub fn full(method: &str, counts: Vec<usize>) -> Self {
        Self {
            method: method.to_owned(),
            total: Some(counts.iter().sum()),
            counts: counts.into_iter().map(Some).collect(),
        }
    }

    /// Columns from independent runs; no total.
    pub fn separate(method: &str, counts: Vec<usize>) -> Self {
        Self {
            method: method.to_owned(),
            total: None,
            counts: counts.into_iter().map(Some).collect(),
        }
    }
}

/// Lengths across, methods down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub max_len: usize,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn new(max_len: usize) -> Self {
        Self {
            max_len,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: ComparisonRow) {
        self.rows.push(row);
    }

    pub fn to_table(&self) -> String {
        let cell = |v: Option<usize>| v.map_or(String::new(), |n| n.to_string());
        let mut header = vec!["method".to_owned()];
        header.extend((1..=self.max_len).map(|k| k.to_string()));
        header.push("total".to_owned());
        let mut rows = vec![header];
        for r in &self.rows {
            let mut line = vec![r.method.clone()];
            line.extend((0..self.max_len).map(|i| cell(r.counts.get(i).copied().flatten())));
            line.push(cell(r.total));
            rows.push(line);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in &rows {
            let mut line = format!("{:<w$}", r[0], w = widths[0]);
            for (c, v) in r.iter().enumerate().skip(1) {
                let _ = write!(line, "  {:>w$}", v, w = widths[c]);
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let cell = |v: Option<usize>| v.map_or(String::new(), |n| n.to_string());
        let mut out = String::from("method");
        for k in 1..=self.max_len {
            let _ = write!(out, ",{k}");
        }
        out.push_str(",total\n");
        for r in &self.rows {
            out.push_str(&r.method);
            for i in 0..self.max_len {
                let _ = write!(out, ",{}", cell(r.counts.get(i).copied().flatten()));
            }
            let _ = writeln!(out, ",{}", cell(r.total));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accounting::NoiseSchedule;
    use crate::extraction::{dpne_extract, ExtractOptions, LevelResult};
    use crate::gramset::GramSet;

    fn corpus() -> Corpus {
        let mut c = Corpus::new();
        c.add_user_texts("a", &["x y z", "x y"], false).unwrap();
        c.add_user_texts("b", &["x y"], false).unwrap();
        c.add_user_texts("c", &["z x"], false).unwrap();
        c
    }

    fn result_with(levels: Vec<GramSet>) -> ExtractionResult {
        ExtractionResult {
            method: "test".into(),
            levels: levels
                .into_iter()
                .enumerate()
                .map(|(i, grams)| LevelResult {
                    grams,
                    ..LevelResult::empty(i + 1, 0.0, 1)
                })
                .collect(),
            private: false,
        }
    }

    #[test]
    fn user_counts_are_distinct_users() {
        let c = corpus();
        let counts = user_counts(&c, 2);
        let xy = c.tokens().gram("x y").unwrap();
        // user a holds "x y" twice but counts once
        assert_eq!(counts[&xy], 2);
        assert_eq!(counts.len(), 3);
    }

    #[test]
    fn full_and_empty_results() {
        let c = corpus();
        let full = result_with(
            (1..=2)
                .map(|k| c.all_kgrams(k).into_iter().collect())
                .collect(),
        );
        for cell in k_anonymity_coverage(&full, &c, &[1, 2, 3]) {
            if cell.eligible > 0 {
                assert_eq!(cell.fraction, Some(1.0));
            }
        }
        let empty = result_with(vec![GramSet::new(), GramSet::new()]);
        for cell in k_anonymity_coverage(&empty, &c, &[1, 2]) {
            assert_eq!(cell.covered, 0);
            if cell.eligible > 0 {
                assert_eq!(cell.fraction, Some(0.0));
            }
        }
        assert_eq!(spurious_audit(&full, &c).total, 0);
    }

    #[test]
    fn spurious_counts_unseen_grams() {
        let c = corpus();
        let unseen = c.tokens().gram("y x").unwrap();
        let seen = c.tokens().gram("x y").unwrap();
        let r = result_with(vec![GramSet::new(), [unseen, seen].into_iter().collect()]);
        let audit = spurious_audit(&r, &c);
        assert_eq!(audit.per_level, vec![0, 1]);
        assert_eq!(audit.fraction, 0.5);
    }

    #[test]
    fn noiseless_run_covers_everything() {
        let c = corpus();
        let sched = NoiseSchedule::noiseless(3, 0.0, &[100], 0.01).unwrap();
        let r = dpne_extract(&c, &sched, &ExtractOptions::default()).unwrap();
        let report = evaluate(&r, &c, &[1, 2], serde_json::Value::Null);
        assert!(report
            .coverage
            .iter()
            .all(|cell| cell.eligible == 0 || cell.fraction == Some(1.0)));
        assert_eq!(report.spurious.total, 0);
        assert_eq!(report.counts, r.counts());
        assert!(report.to_table().contains("spurious: 0"));
        assert_eq!(report.coverage_csv().lines().count(), 1 + 3 * 2);
    }

    #[test]
    fn comparison_table_layout() {
        let mut t = ComparisonTable::new(3);
        t.push(ComparisonRow::full("dpne", vec![5, 40, 300]));
        t.push(ComparisonRow::separate("dpsu_single", vec![5, 42, 310]));
        let text = t.to_table();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with("345"));
        assert!(lines[2].ends_with("310"));
        assert_eq!(t.to_csv().lines().nth(2), Some("dpsu_single,5,42,310,"));
    }
}
