use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::accounting::NoiseSchedule;
use crate::corpus::{NGram, TokenTable};
use crate::error::{Error, Result};
use crate::extraction::{ExtractionResult, LevelResult, LevelSummary};
use crate::gramset::GramSet;

pub const UNSAFE_STAMP: &str =
    "# UNSAFE: produced with --unsafe-no-privacy; this output carries no differential privacy guarantee";

/// Metadata written next to the gram files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: String,
    pub private: bool,
    pub unsafe_no_privacy: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    pub max_len: usize,
    pub counts: Vec<usize>,
    pub total: usize,
    pub levels: Vec<LevelSummary>,
    /// Grams released from outside the support, per level. Unsafe runs only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injected: Option<Vec<usize>>,
    pub mark_spurious: bool,
    pub schedule: NoiseSchedule,
}

pub fn level_file(k: usize) -> String {
    format!("level_{k}.tsv")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Gram lines sorted by token strings, tab separated.
pub fn render_level(tokens: &TokenTable, level: &LevelResult, config: &RunConfig) -> String {
    let mut rows: Vec<(Vec<&str>, bool)> = level
        .grams
        .iter()
        .map(|g| {
            let words = g
                .iter()
                .map(|&t| tokens.token(t).unwrap_or("<?>"))
                .collect();
            (words, level.injected.contains(g))
        })
        .collect();
    rows.sort_unstable();
    let mut out = String::new();
    if config.unsafe_no_privacy {
        out.push_str(UNSAFE_STAMP);
        out.push('\n');
    }
    for (words, injected) in rows {
        out.push_str(&words.join("\t"));
        if config.mark_spurious {
            out.push_str(if injected { "\t1" } else { "\t0" });
        }
        out.push('\n');
    }
    out
}

pub fn write_result(
    dir: &Path,
    tokens: &TokenTable,
    result: &ExtractionResult,
    schedule: &NoiseSchedule,
    config: &RunConfig,
) -> Result<RunReport> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for level in &result.levels {
        let path = dir.join(level_file(level.k));
        write_file(&path, render_level(tokens, level, config).as_bytes())?;
    }
    let report = RunReport {
        method: result.method.clone(),
        private: result.private,
        unsafe_no_privacy: config.unsafe_no_privacy,
        warning: config
            .unsafe_no_privacy
            .then(|| UNSAFE_STAMP[2..].to_owned()),
        max_len: result.max_len(),
        counts: result.counts(),
        total: result.total(),
        levels: result.summaries(),
        injected: config
            .unsafe_no_privacy
            .then(|| result.levels.iter().map(|l| l.injected.len()).collect()),
        mark_spurious: config.mark_spurious,
        schedule: schedule.clone(),
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    write_file(&dir.join("report.json"), json.as_bytes())?;
    write_file(&dir.join("config.json"), config.to_json().as_bytes())?;
    Ok(report)
}

pub fn read_report(dir: &Path) -> Result<RunReport> {
    let path = dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path,
        line: e.line(),
        message: e.to_string(),
    })
}

/// Rebuilds a result from a run directory. Tokens unknown to `tokens` are
/// interned, so they can never match a corpus gram.
pub fn read_result(dir: &Path, tokens: &mut TokenTable) -> Result<(ExtractionResult, RunReport)> {
    let report = read_report(dir)?;
    let mut levels = Vec::with_capacity(report.max_len);
    for k in 1..=report.max_len {
        let path = dir.join(level_file(k));
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut grams = Vec::new();
        let mut injected = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 && report.unsafe_no_privacy && line.starts_with("# UNSAFE") {
                continue;
            }
            let mut fields: Vec<&str> = line.split('\t').collect();
            let flagged = if report.mark_spurious {
                fields.pop() == Some("1")
            } else {
                false
            };
            if fields.len() != k {
                return Err(Error::Malformed {
                    path: path.clone(),
                    line: i + 1,
                    message: format!("expected {k} tokens, found {}", fields.len()),
                });
            }
            let ids: Vec<_> = fields.iter().map(|w| tokens.intern(w)).collect();
            let g = NGram::new(&ids);
            if flagged {
                injected.push(g.clone());
            }
            grams.push(g);
        }
        let summary = report.levels.get(k - 1);
        let mut level = LevelResult::empty(
            k,
            summary.map_or(0.0, |s| s.sigma),
            summary.map_or(0, |s| s.cap),
        );
        level.grams = grams.into_iter().collect();
        level.injected = injected.into_iter().collect::<GramSet>();
        if let Some(s) = summary {
            level.rho = s.rho.unwrap_or(f64::INFINITY);
            level.support_size = s.support_size;
            level.valid_count = s.valid_count;
            level.valid_count_exact = s.valid_count_exact;
            level.sample_p = s.sample_p;
        }
        levels.push(level);
    }
    let result = ExtractionResult {
        method: report.method.clone(),
        levels,
        private: report.private,
    };
    Ok((result, report))
}
