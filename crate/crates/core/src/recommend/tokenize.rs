use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../../fixtures/stopwords.txt");

/// Raw term frequencies.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermVector {
    pub terms: BTreeMap<String, u32>,
}

impl TermVector {
    pub fn get(&self, term: &str) -> u32 {
        self.terms.get(term).copied().unwrap_or(0)
    }

    /// Number of tokens counted.
    pub fn total(&self) -> u32 {
        self.terms.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&mut self, other: &TermVector) {
        for (t, &c) in &other.terms {
            *self.terms.entry(t.clone()).or_insert(0) += c;
        }
    }
}

impl<S: Into<String>> FromIterator<(S, u32)> for TermVector {
    fn from_iter<I: IntoIterator<Item = (S, u32)>>(iter: I) -> Self {
        TermVector {
            terms: iter.into_iter().map(|(t, c)| (t.into(), c)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenizer {
    stopwords: BTreeSet<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer::with_stopwords(DEFAULT_STOPWORDS.lines())
    }
}

impl Tokenizer {
    pub fn with_stopwords<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Tokenizer {
            stopwords: words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// Reads one stopword per line.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Tokenizer::with_stopwords(text.lines()))
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    /// Lowercases, splits on non-alphanumeric characters and drops tokens
    /// shorter than two characters, all-digit tokens and stopwords.
    pub fn tokenize(&self, text: &str) -> TermVector {
        let mut out = TermVector::default();
        for raw in text.split(|c: char| !c.is_alphanumeric()) {
            let tok = raw.to_lowercase();
            if tok.chars().count() < 2 || tok.chars().all(|c| c.is_numeric()) || self.stopwords.contains(&tok) {
                continue;
            }
            *out.terms.entry(tok).or_insert(0) += 1;
        }
        out
    }
}

/// Tokenizes with the default stopword list.
pub fn tokenize(text: &str) -> TermVector {
    Tokenizer::default().tokenize(text)
}
