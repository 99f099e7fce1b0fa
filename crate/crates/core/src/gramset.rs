use indexmap::IndexSet;
use rustc_hash::FxBuildHasher;

use crate::corpus::{NGram, TokenId};

/// A released set of grams: sorted, hashed for membership, and indexable so
/// it can be sampled uniformly.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct GramSet {
    grams: IndexSet<NGram, FxBuildHasher>,
}

impl GramSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, gram: &[TokenId]) -> bool {
        self.grams.contains(gram)
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    /// The `i`-th gram in sorted order.
    pub fn get(&self, i: usize) -> &NGram {
        &self.grams[i]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &NGram> + '_ {
        self.grams.iter()
    }

    pub fn is_subset(&self, other: &GramSet) -> bool {
        self.grams.iter().all(|g| other.contains(g))
    }

    pub fn union(&self, other: &GramSet) -> GramSet {
        self.iter().chain(other.iter()).cloned().collect()
    }

    pub fn difference(&self, other: &GramSet) -> GramSet {
        self.iter()
            .filter(|g| !other.contains(g))
            .cloned()
            .collect()
    }

    pub fn into_vec(self) -> Vec<NGram> {
        self.grams.into_iter().collect()
    }
}

impl FromIterator<NGram> for GramSet {
    fn from_iter<I: IntoIterator<Item = NGram>>(iter: I) -> Self {
        let mut grams: IndexSet<NGram, FxBuildHasher> = iter.into_iter().collect();
        grams.sort_unstable();
        GramSet { grams }
    }
}

impl<'a> IntoIterator for &'a GramSet {
    type Item = &'a NGram;
    type IntoIter = indexmap::set::Iter<'a, NGram>;

    fn into_iter(self) -> Self::IntoIter {
        self.grams.iter()
    }
}

impl std::fmt::Debug for GramSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.grams.iter()).finish()
    }
}
