use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Corpus, UserRecord};
use crate::error::{Error, Result};

/// Input layouts understood by [`load_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    /// One JSON object per line: `{"user_id": "...", "texts": ["...", ...]}`.
    JsonlText,
    /// One user per line, space-separated tokens; the user id is the 1-based
    /// line number. Blank lines and `%` comment lines are skipped.
    SequenceLines,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "jsonl_text" | "jsonl" => Ok(CorpusFormat::JsonlText),
            "sequence_lines" | "seq" => Ok(CorpusFormat::SequenceLines),
            other => Err(format!("unknown corpus format {other:?}")),
        }
    }
}

#[derive(Deserialize, Serialize)]
struct JsonlUser {
    user_id: String,
    texts: Vec<String>,
}

pub fn load_corpus(path: &Path, format: CorpusFormat, lowercase: bool) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file), path, format, lowercase)
}

/// Parses a corpus from any reader; `path` only labels error messages.
pub fn parse_corpus<R: BufRead>(
    reader: R,
    path: &Path,
    format: CorpusFormat,
    lowercase: bool,
) -> Result<Corpus> {
    let mut corpus = Corpus::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let user = match format {
            CorpusFormat::JsonlText => {
                let rec: JsonlUser =
                    serde_json::from_str(trimmed).map_err(|e| Error::Malformed {
                        path: path.to_owned(),
                        line: lineno,
                        message: e.to_string(),
                    })?;
                let sequences = rec
                    .texts
                    .iter()
                    .map(|t| corpus.tokens.tokenize(t, lowercase))
                    .collect();
                UserRecord {
                    user_id: rec.user_id,
                    sequences,
                }
            }
            CorpusFormat::SequenceLines => {
                if trimmed.starts_with('%') {
                    continue;
                }
                UserRecord {
                    user_id: lineno.to_string(),
                    sequences: vec![corpus.tokens.tokenize(trimmed, lowercase)],
                }
            }
        };
        corpus.push_user(user).map_err(|e| match e {
            Error::DuplicateUser { user_id, .. } => Error::DuplicateUser {
                user_id,
                line: lineno,
            },
            other => other,
        })?;
    }
    Ok(corpus)
}

/// Writes the corpus in `jsonl_text` layout.
pub fn write_jsonl<W: Write>(corpus: &Corpus, mut out: W) -> std::io::Result<()> {
    for user in corpus.users() {
        let texts = user
            .sequences
            .iter()
            .map(|s| corpus.tokens().render(s, " "))
            .collect();
        let rec = JsonlUser {
            user_id: user.user_id.clone(),
            texts,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, f: CorpusFormat) -> Result<Corpus> {
        parse_corpus(s.as_bytes(), Path::new("mem"), f, true)
    }

    #[test]
    fn jsonl_two_users() {
        let src = r#"{"user_id": "u1", "texts": ["Serena Williams is a great tennis player"]}
{"user_id": "u2", "texts": ["Erwin Schrodinger wrote a book called What is Life"]}
"#;
        let c = parse(src, CorpusFormat::JsonlText).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.users()[0].sequences[0].len(), 7);
    }

    #[test]
    fn empty_input() {
        assert_eq!(parse("", CorpusFormat::JsonlText).unwrap().len(), 0);
        assert_eq!(parse("", CorpusFormat::SequenceLines).unwrap().len(), 0);
    }

    #[test]
    fn malformed_line_reports_number() {
        let src = "{\"user_id\": \"a\", \"texts\": []}\nnot json\n";
        match parse(src, CorpusFormat::JsonlText) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_user_reports_line() {
        let src = "{\"user_id\": \"a\", \"texts\": []}\n{\"user_id\": \"a\", \"texts\": [\"x\"]}\n";
        match parse(src, CorpusFormat::JsonlText) {
            Err(Error::DuplicateUser { line, user_id }) => {
                assert_eq!(line, 2);
                assert_eq!(user_id, "a");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sequence_lines_one_user_per_line() {
        let src = "% header\n\n1 1 2\n3\n6 7 7 7\n";
        let c = parse(src, CorpusFormat::SequenceLines).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.users()[0].user_id, "3");
        assert_eq!(c.users()[2].sequences[0].len(), 4);
    }

    #[test]
    fn jsonl_round_trip() {
        let src =
            "{\"user_id\":\"x\",\"texts\":[\"a b\",\"c\"]}\n{\"user_id\":\"y\",\"texts\":[]}\n";
        let c = parse(src, CorpusFormat::JsonlText).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&c, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), src);
    }
}
