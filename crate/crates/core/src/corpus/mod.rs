//! Per-user token data and contiguous k-gram extraction.

mod io;
mod synth;

use std::borrow::Borrow;
use std::collections::BTreeSet;
use std::fmt;
use std::ops::Deref;

use indexmap::IndexSet;
use rustc_hash::{FxBuildHasher, FxHashSet};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub use io::{load_corpus, parse_corpus, write_jsonl, CorpusFormat};
pub use synth::{synth_corpus, SynthParams};

pub type TokenId = u32;

/// A k-gram: k ≥ 1 interned tokens. Ordered lexicographically by id.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NGram(SmallVec<[TokenId; 8]>);

impl NGram {
    /// Panics on an empty slice; grams always hold at least one token.
    pub fn new(tokens: &[TokenId]) -> Self {
        assert!(!tokens.is_empty(), "an n-gram needs at least one token");
        NGram(SmallVec::from_slice(tokens))
    }

    pub fn unigram(token: TokenId) -> Self {
        NGram(SmallVec::from_slice(&[token]))
    }

    /// `head · tail`
    pub fn concat(head: &[TokenId], tail: &[TokenId]) -> Self {
        let mut v = SmallVec::with_capacity(head.len() + tail.len());
        v.extend_from_slice(head);
        v.extend_from_slice(tail);
        assert!(!v.is_empty(), "an n-gram needs at least one token");
        NGram(v)
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.0
    }

    pub fn first(&self) -> TokenId {
        self.0[0]
    }

    pub fn last(&self) -> TokenId {
        self.0[self.0.len() - 1]
    }

    /// The first k − 1 tokens.
    pub fn prefix(&self) -> &[TokenId] {
        &self.0[..self.0.len() - 1]
    }

    /// The last k − 1 tokens.
    pub fn suffix(&self) -> &[TokenId] {
        &self.0[1..]
    }
}

impl Deref for NGram {
    type Target = [TokenId];

    fn deref(&self) -> &[TokenId] {
        &self.0
    }
}

impl Borrow<[TokenId]> for NGram {
    fn borrow(&self) -> &[TokenId] {
        &self.0
    }
}

impl fmt::Debug for NGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &self.0[..])
    }
}

/// Interning table; ids are dense and assigned in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct TokenTable {
    tokens: IndexSet<String, FxBuildHasher>,
}

impl TokenTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, token: &str) -> TokenId {
        if let Some(id) = self.tokens.get_index_of(token) {
            return id as TokenId;
        }
        let (id, _) = self.tokens.insert_full(token.to_owned());
        id as TokenId
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.tokens.get_index_of(token).map(|i| i as TokenId)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get_index(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Splits on Unicode whitespace, optionally lowercasing, and interns.
    pub fn tokenize(&mut self, text: &str, lowercase: bool) -> Vec<TokenId> {
        text.split_whitespace()
            .map(|w| {
                if lowercase {
                    self.intern(&w.to_lowercase())
                } else {
                    self.intern(w)
                }
            })
            .collect()
    }

    /// Looks up every word of `text` without interning; `None` if any word
    /// is unknown.
    pub fn lookup(&self, text: &str, lowercase: bool) -> Option<Vec<TokenId>> {
        text.split_whitespace()
            .map(|w| {
                if lowercase {
                    self.id(&w.to_lowercase())
                } else {
                    self.id(w)
                }
            })
            .collect()
    }

    pub fn gram(&self, text: &str) -> Option<NGram> {
        let ids = self.lookup(text, false)?;
        (!ids.is_empty()).then(|| NGram::new(&ids))
    }

    /// Token strings of a gram, joined with `sep`.
    pub fn render(&self, gram: &[TokenId], sep: &str) -> String {
        let mut out = String::new();
        for (i, &t) in gram.iter().enumerate() {
            if i > 0 {
                out.push_str(sep);
            }
            out.push_str(self.token(t).unwrap_or("<?>"));
        }
        out
    }
}

/// One user's texts. Each text is a separate sequence; grams never span
/// two sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub user_id: String,
    pub sequences: Vec<Vec<TokenId>>,
}

impl UserRecord {
    /// Gₖ of the user: every distinct contiguous k-gram across all of the
    /// user's sequences, sorted.
    pub fn kgrams(&self, k: usize) -> Vec<NGram> {
        let mut out: Vec<NGram> = Vec::new();
        for seq in &self.sequences {
            if seq.len() >= k {
                out.extend(seq.windows(k).map(NGram::new));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// The private database: users with their token sequences.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    tokens: TokenTable,
    users: Vec<UserRecord>,
    ids: FxHashSet<String>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_tokens(tokens: TokenTable) -> Self {
        Self {
            tokens,
            ..Self::default()
        }
    }

    /// Adds a user from raw texts. Fails if `user_id` is already present.
    pub fn add_user_texts<S: AsRef<str>>(
        &mut self,
        user_id: &str,
        texts: &[S],
        lowercase: bool,
    ) -> Result<()> {
        let sequences = texts
            .iter()
            .map(|t| self.tokens.tokenize(t.as_ref(), lowercase))
            .collect();
        self.push_user(UserRecord {
            user_id: user_id.to_owned(),
            sequences,
        })
    }

    pub fn push_user(&mut self, user: UserRecord) -> Result<()> {
        if !self.ids.insert(user.user_id.clone()) {
            return Err(Error::DuplicateUser {
                user_id: user.user_id,
                line: 0,
            });
        }
        self.users.push(user);
        Ok(())
    }

    pub fn tokens(&self) -> &TokenTable {
        &self.tokens
    }

    pub fn tokens_mut(&mut self) -> &mut TokenTable {
        &mut self.tokens
    }

    pub fn users(&self) -> &[UserRecord] {
        &self.users
    }

    /// N, the number of users.
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// The same corpus with its users in a different order.
    pub fn reordered(&self, order: &[usize]) -> Corpus {
        assert_eq!(order.len(), self.users.len());
        Corpus {
            tokens: self.tokens.clone(),
            users: order.iter().map(|&i| self.users[i].clone()).collect(),
            ids: self.ids.clone(),
        }
    }

    /// ⋃ᵢ Gₖ(wᵢ)
    pub fn all_kgrams(&self, k: usize) -> BTreeSet<NGram> {
        self.users.iter().flat_map(|u| u.kgrams(k)).collect()
    }
}

/// Gₖ(w) for a single sequence.
pub fn extract_kgrams(tokens: &[TokenId], k: usize) -> BTreeSet<NGram> {
    assert!(k >= 1, "k must be at least 1");
    if tokens.len() < k {
        return BTreeSet::new();
    }
    tokens.windows(k).map(NGram::new).collect()
}
