use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{normalize_text, Query, SourceError, SuggestionList, SuggestionSource};

/// What a fixture lookup does for a query it has no entry for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissPolicy {
    /// Treat the query as having no suggestions.
    #[default]
    Empty,
    /// Fail with [`SourceError::FixtureMiss`].
    Error,
}

/// Recorded responses: normalised query text to suggestion array.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fixture(pub BTreeMap<String, Vec<String>>);

impl Fixture {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SourceError> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, SourceError> {
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(text)?;
        Ok(Self(
            raw.into_iter()
                .map(|(k, v)| (normalize_text(&k), v))
                .collect(),
        ))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.0).expect("string map serialises");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SourceError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Pure replay of a [`Fixture`].
#[derive(Debug, Clone)]
pub struct FixtureSource {
    fixture: Fixture,
    miss: MissPolicy,
}

impl FixtureSource {
    pub fn new(fixture: Fixture, miss: MissPolicy) -> Self {
        Self { fixture, miss }
    }

    pub fn load(path: impl AsRef<Path>, miss: MissPolicy) -> Result<Self, SourceError> {
        Ok(Self::new(Fixture::load(path)?, miss))
    }

    pub fn fixture(&self) -> &Fixture {
        &self.fixture
    }
}

impl SuggestionSource for FixtureSource {
    fn fetch(&self, query: &Query) -> Result<SuggestionList, SourceError> {
        match self.fixture.0.get(query.text()) {
            Some(items) => Ok(SuggestionList::new(query.clone(), items)),
            None => match self.miss {
                MissPolicy::Empty => Ok(SuggestionList::empty(query.clone())),
                MissPolicy::Error => Err(SourceError::FixtureMiss(query.text().to_string())),
            },
        }
    }
}

/// Pass-through source that keeps every successful response so a crawl
/// can be replayed later.
pub struct RecordingSource<S> {
    inner: S,
    recorded: Mutex<BTreeMap<String, Vec<String>>>,
}

impl<S> RecordingSource<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            recorded: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn fixture(&self) -> Fixture {
        Fixture(self.recorded.lock().unwrap_or_else(|e| e.into_inner()).clone())
    }
}

impl<S: SuggestionSource> SuggestionSource for RecordingSource<S> {
    fn fetch(&self, query: &Query) -> Result<SuggestionList, SourceError> {
        let list = self.inner.fetch(query)?;
        self.recorded
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(query.text().to_string(), list.suggestions().to_vec());
        Ok(list)
    }
}

/// Fetches every query from `source` and writes the responses as a fixture.
pub fn record_fixture<S: SuggestionSource + ?Sized>(
    source: &S,
    queries: &[Query],
    path: impl AsRef<Path>,
) -> Result<Fixture, SourceError> {
    if queries.is_empty() {
        return Err(SourceError::InvalidConfig("no queries to record".into()));
    }
    let mut map = BTreeMap::new();
    for q in queries {
        let list = source.fetch(q)?;
        map.insert(q.text().to_string(), list.suggestions().to_vec());
    }
    let fixture = Fixture(map);
    fixture.save(path)?;
    Ok(fixture)
}
