//! Suggestion backends.
//!
//! A [`SuggestionSource`] answers a single [`Query`] with at most ten
//! suggestions. Three interchangeable implementations exist: a live
//! autocomplete endpoint ([`LiveSource`]), a recorded fixture
//! ([`FixtureSource`]) and a seeded generator with planted topical bias
//! ([`SyntheticSource`]).

mod live;
mod rate_limit;
mod replay;
mod synthetic;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::SystemTime;

use thiserror::Error;

pub use live::{LiveSource, SourceConfig};
pub use rate_limit::RateGate;
pub use replay::{record_fixture, Fixture, FixtureSource, MissPolicy, RecordingSource};
pub use synthetic::{synthetic_vector_table, SyntheticBiasSpec, SyntheticSource};

/// Upper bound on suggestions returned for one query.
pub const MAX_SUGGESTIONS: usize = 10;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("query is empty after normalisation")]
    EmptyQuery,
    #[error("transport failure for {query:?} after {attempts} attempt(s): {message}")]
    Transport {
        query: String,
        attempts: usize,
        message: String,
    },
    #[error("endpoint answered HTTP {status} for {query:?}")]
    Protocol { query: String, status: u16 },
    #[error("could not decode response for {query:?}: {message}")]
    Decode { query: String, message: String },
    #[error("no fixture entry for {0:?}")]
    FixtureMiss(String),
    #[error("invalid source configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("fixture I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Trims and collapses internal whitespace runs to single spaces.
pub fn normalize_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whitespace normalisation followed by lower-casing; the comparison key
/// used for visited sets and lexical matching.
pub fn fold(s: &str) -> String {
    normalize_text(s).to_lowercase()
}

/// A locale-tagged search query with normalised whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Query {
    text: String,
    locale: String,
}

impl Query {
    pub fn new(text: &str, locale: &str) -> Result<Self, SourceError> {
        let text = normalize_text(text);
        if text.is_empty() {
            return Err(SourceError::EmptyQuery);
        }
        Ok(Self {
            text,
            locale: locale.to_string(),
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn locale(&self) -> &str {
        &self.locale
    }
}

/// Ordered, de-duplicated suggestions for one query.
#[derive(Debug, Clone)]
pub struct SuggestionList {
    pub query: Query,
    suggestions: Vec<String>,
    pub fetched_at: SystemTime,
}

impl SuggestionList {
    /// Normalises every entry, drops blanks and repeats (first occurrence
    /// wins) and truncates to [`MAX_SUGGESTIONS`].
    pub fn new<I, S>(query: Query, raw: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut suggestions: Vec<String> = Vec::new();
        for s in raw {
            if suggestions.len() == MAX_SUGGESTIONS {
                break;
            }
            let s = normalize_text(s.as_ref());
            if !s.is_empty() && !suggestions.contains(&s) {
                suggestions.push(s);
            }
        }
        Self {
            query,
            suggestions,
            fetched_at: SystemTime::now(),
        }
    }

    pub fn empty(query: Query) -> Self {
        Self::new(query, std::iter::empty::<&str>())
    }

    pub fn suggestions(&self) -> &[String] {
        &self.suggestions
    }

    pub fn len(&self) -> usize {
        self.suggestions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.suggestions.is_empty()
    }
}

pub trait SuggestionSource: Send + Sync {
    fn fetch(&self, query: &Query) -> Result<SuggestionList, SourceError>;
}

impl<S: SuggestionSource + ?Sized> SuggestionSource for &S {
    fn fetch(&self, query: &Query) -> Result<SuggestionList, SourceError> {
        (**self).fetch(query)
    }
}

impl<S: SuggestionSource + ?Sized> SuggestionSource for Box<S> {
    fn fetch(&self, query: &Query) -> Result<SuggestionList, SourceError> {
        (**self).fetch(query)
    }
}

impl<S: SuggestionSource + ?Sized> SuggestionSource for std::sync::Arc<S> {
    fn fetch(&self, query: &Query) -> Result<SuggestionList, SourceError> {
        (**self).fetch(query)
    }
}

/// Wraps a source and counts calls; used to verify that resumed crawls
/// do not hit the backend again.
pub struct CountingSource<S> {
    inner: S,
    calls: AtomicUsize,
}

impl<S> CountingSource<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<S: SuggestionSource> SuggestionSource for CountingSource<S> {
    fn fetch(&self, query: &Query) -> Result<SuggestionList, SourceError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.fetch(query)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn query_normalises_whitespace() {
        let q = Query::new("  annalena   baerbock \t", "de").unwrap();
        assert_eq!(q.text(), "annalena baerbock");
        assert!(matches!(Query::new(" \n ", "de"), Err(SourceError::EmptyQuery)));
    }

    #[test]
    fn list_dedups_and_truncates() {
        let q = Query::new("x", "de").unwrap();
        let raw: Vec<String> = (0..15).map(|i| format!("x {}", i % 12)).collect();
        let list = SuggestionList::new(q, raw);
        assert_eq!(list.len(), MAX_SUGGESTIONS);
        let mut seen = std::collections::HashSet::new();
        assert!(list.suggestions().iter().all(|s| seen.insert(s.clone())));
        assert_eq!(list.suggestions()[0], "x 0");
    }

    proptest! {
        #[test]
        fn list_invariants(raw in proptest::collection::vec("[a-c ]{0,6}", 0..30)) {
            let q = Query::new("q", "de").unwrap();
            let list = SuggestionList::new(q, &raw);
            prop_assert!(list.len() <= MAX_SUGGESTIONS);
            let mut seen = std::collections::HashSet::new();
            for s in list.suggestions() {
                prop_assert!(seen.insert(s.clone()));
                prop_assert_eq!(s, &normalize_text(s));
                prop_assert!(!s.is_empty());
            }
        }
    }
}
