//! Turns pruned trees into the analysis corpus.
//!
//! Root-name tokens are stripped from every suggestion, stopwords are
//! removed, ambiguous roots can be dropped, and the number of unique
//! suggestions is recorded after each stage.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::source::fold;
use crate::tree::{Origin, RootTerm, SuggestionTree};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("stopword list {path} could not be read: {source}")]
    MissingStopwords {
        path: String,
        source: std::io::Error,
    },
    #[error("corpus I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus JSON at line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
}

/// Locale-specific stopword set, matched on folded tokens.
#[derive(Debug, Clone, Default)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PreprocessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| PreprocessError::MissingStopwords {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::from_words(text.lines()))
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(
            words
                .into_iter()
                .map(|w| fold(w.as_ref()))
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Removes every whole token that belongs to the root's canonical form or
/// one of its variants. Other words, including reformulations, stay.
pub fn strip_root(query: &str, root: &RootTerm) -> String {
    let name_tokens: HashSet<&str> = root
        .variants
        .iter()
        .flat_map(|v| v.split(' '))
        .collect();
    fold(query)
        .split(' ')
        .filter(|t| !t.is_empty() && !name_tokens.contains(t))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn remove_stopwords(stripped: &str, stopwords: &Stopwords) -> Vec<String> {
    stripped
        .split_whitespace()
        .map(str::to_lowercase)
        .filter(|t| !stopwords.contains(t))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessedSuggestion {
    pub root: String,
    pub original: String,
    pub stripped: String,
    pub tokens: Vec<String>,
    pub min_depth: usize,
    /// How often the stripped text occurs in the root's tree; exported for
    /// inspection, the analysis itself is set based.
    #[serde(default = "one")]
    pub occurrences: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Crawl,
    Pruning,
    AmbiguousRootRemoval,
    NoVectorRemoval,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::Crawl => "RAI crawl",
            Stage::Pruning => "Pruning",
            Stage::AmbiguousRootRemoval => "removing ambiguous root term",
            Stage::NoVectorRemoval => "removing suggestions without vector representation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: Stage,
    pub unique: usize,
}

/// Per-root suggestion sets plus the stage ledger.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditCorpus {
    /// metadata key -> stripped text -> suggestion
    pub per_root: BTreeMap<String, BTreeMap<String, ProcessedSuggestion>>,
    pub stage_counts: Vec<StageCount>,
    pub dropped_roots: Vec<String>,
    /// Suggestions returned by the crawl before any de-duplication.
    pub raw_count: usize,
}

#[derive(Serialize, Deserialize)]
struct CorpusSidecar {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    raw_count: usize,
    roots: Vec<String>,
    dropped_roots: Vec<String>,
    stage_counts: Vec<StageCount>,
}

fn collect(
    tree: &SuggestionTree,
    stopwords: &Stopwords,
    retained_only: bool,
) -> BTreeMap<String, ProcessedSuggestion> {
    let nodes: Vec<_> = if retained_only {
        tree.retained_suggestions()
    } else {
        tree.iter()
            .filter(|n| n.origin == Origin::Suggestion)
            .collect()
    };
    let key = &tree.root_term.metadata_key;
    let mut out: BTreeMap<String, ProcessedSuggestion> = BTreeMap::new();
    for node in nodes {
        let stripped = strip_root(&node.query, &tree.root_term);
        let tokens = remove_stopwords(&stripped, stopwords);
        if tokens.is_empty() {
            continue;
        }
        match out.get_mut(&stripped) {
            Some(p) => {
                p.occurrences += 1;
                if node.depth < p.min_depth {
                    p.min_depth = node.depth;
                    p.original = node.query.clone();
                }
            }
            None => {
                out.insert(
                    stripped.clone(),
                    ProcessedSuggestion {
                        root: key.clone(),
                        original: node.query.clone(),
                        stripped,
                        tokens,
                        min_depth: node.depth,
                        occurrences: 1,
                    },
                );
            }
        }
    }
    out
}

fn global_unique<'a>(
    sets: impl IntoIterator<Item = &'a BTreeMap<String, ProcessedSuggestion>>,
) -> usize {
    sets.into_iter()
        .flat_map(|m| m.keys())
        .collect::<BTreeSet<_>>()
        .len()
}

impl AuditCorpus {
    /// Builds the corpus from (already pruned) trees and records the crawl
    /// and pruning stages.
    pub fn from_trees(trees: &[SuggestionTree], stopwords: &Stopwords) -> Self {
        let crawled: Vec<_> = trees.iter().map(|t| collect(t, stopwords, false)).collect();
        let mut per_root = BTreeMap::new();
        for t in trees {
            per_root
                .entry(t.root_term.metadata_key.clone())
                .or_insert_with(BTreeMap::new)
                .extend(collect(t, stopwords, true));
        }
        let mut corpus = Self {
            per_root,
            stage_counts: vec![StageCount {
                stage: Stage::Crawl,
                unique: global_unique(&crawled),
            }],
            dropped_roots: Vec::new(),
            raw_count: trees.iter().map(|t| t.crawl_stats.suggestions_returned).sum(),
        };
        corpus.push_stage(Stage::Pruning);
        corpus
    }

    /// Unique stripped texts across all roots.
    pub fn unique_count(&self) -> usize {
        global_unique(self.per_root.values())
    }

    pub fn push_stage(&mut self, stage: Stage) {
        let unique = self.unique_count();
        self.stage_counts.push(StageCount { stage, unique });
    }

    /// Global union: stripped text -> tokens.
    pub fn global_suggestions(&self) -> BTreeMap<&str, &[String]> {
        self.per_root
            .values()
            .flat_map(|m| m.values())
            .map(|p| (p.stripped.as_str(), p.tokens.as_slice()))
            .collect()
    }

    pub fn write(
        &self,
        jsonl: impl AsRef<Path>,
        sidecar: impl AsRef<Path>,
        config_hash: Option<&str>,
    ) -> Result<(), PreprocessError> {
        let mut w = BufWriter::new(fs::File::create(jsonl)?);
        for p in self.per_root.values().flat_map(|m| m.values()) {
            serde_json::to_writer(&mut w, p).expect("suggestion serialises");
            w.write_all(b"\n")?;
        }
        w.flush()?;
        let side = CorpusSidecar {
            config_hash: config_hash.map(str::to_string),
            raw_count: self.raw_count,
            roots: self.per_root.keys().cloned().collect(),
            dropped_roots: self.dropped_roots.clone(),
            stage_counts: self.stage_counts.clone(),
        };
        let mut s = serde_json::to_string_pretty(&side).expect("sidecar serialises");
        s.push('\n');
        fs::write(sidecar, s)?;
        Ok(())
    }

    pub fn read(jsonl: impl AsRef<Path>, sidecar: impl AsRef<Path>) -> Result<Self, PreprocessError> {
        let side: CorpusSidecar = serde_json::from_str(&fs::read_to_string(sidecar)?)
            .map_err(|source| PreprocessError::Json { line: 0, source })?;
        let mut per_root: BTreeMap<String, BTreeMap<String, ProcessedSuggestion>> = side
            .roots
            .iter()
            .map(|r| (r.clone(), BTreeMap::new()))
            .collect();
        for (i, line) in BufReader::new(fs::File::open(jsonl)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let p: ProcessedSuggestion = serde_json::from_str(&line)
                .map_err(|source| PreprocessError::Json { line: i + 1, source })?;
            per_root
                .entry(p.root.clone())
                .or_default()
                .insert(p.stripped.clone(), p);
        }
        Ok(Self {
            per_root,
            stage_counts: side.stage_counts,
            dropped_roots: side.dropped_roots,
            raw_count: side.raw_count,
        })
    }
}

/// Removes whole roots (name collisions such as a better-known namesake)
/// and records the stage. Unknown keys only produce a warning.
pub fn drop_ambiguous_roots(mut corpus: AuditCorpus, drop_list: &[String]) -> AuditCorpus {
    for key in drop_list {
        let found = corpus
            .per_root
            .keys()
            .find(|k| fold(k) == fold(key))
            .cloned();
        match found {
            Some(k) => {
                corpus.per_root.remove(&k);
                corpus.dropped_roots.push(k);
            }
            None => warn!("ambiguous root {key:?} is not in the corpus"),
        }
    }
    corpus.push_stage(Stage::AmbiguousRootRemoval);
    corpus
}

pub fn stage_report(corpus: &AuditCorpus) -> Vec<StageCount> {
    corpus.stage_counts.clone()
}

/// Two-column text table of the stage ledger.
pub fn render_stage_table(rows: &[StageCount]) -> String {
    let width = rows
        .iter()
        .map(|r| r.stage.label().len())
        .chain(std::iter::once("preprocessing step".len()))
        .max()
        .unwrap_or(0);
    let mut out = format!("{:<width$} | unique suggestions\n", "preprocessing step");
    out.push_str(&format!("{}-+-{}\n", "-".repeat(width), "-".repeat(18)));
    for r in rows {
        out.push_str(&format!("{:<width$} | {}\n", r.stage.label(), r.unique));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{Fixture, FixtureSource, MissPolicy};
    use crate::tree::{build_tree, prune_in_place};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn root(name: &str, variants: &[&str]) -> RootTerm {
        RootTerm::new(name, variants, name).unwrap()
    }

    #[test]
    fn strip_examples() {
        let ab = root("annalena baerbock", &["baerbok"]);
        assert_eq!(
            strip_root("annalena baerbock address private potsdam", &ab),
            "address private potsdam"
        );
        assert_eq!(strip_root("annalena baerbock", &ab), "");
        assert_eq!(strip_root("baerbok age", &ab), "age");
        // whole-word only
        assert_eq!(strip_root("annalenas baerbockfan", &ab), "annalenas baerbockfan");
    }

    #[test]
    fn stopword_examples() {
        let sw = Stopwords::from_words(["of", "the"]);
        assert_eq!(remove_stopwords("wife of the minister", &sw), vec!["wife", "minister"]);
        assert!(remove_stopwords("of the", &sw).is_empty());
    }

    #[test]
    fn missing_stopword_file_is_config_error() {
        assert!(matches!(
            Stopwords::load("/nonexistent/stopwords.txt"),
            Err(PreprocessError::MissingStopwords { .. })
        ));
    }

    #[test]
    fn stopword_filter_matches_set_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vocab: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
        let stop: Vec<&String> = vocab.iter().step_by(3).collect();
        let sw = Stopwords::from_words(stop.iter().map(|s| s.as_str()));
        for _ in 0..1000 {
            let n = rng.random_range(1..8);
            let words: Vec<&str> = (0..n)
                .map(|_| vocab[rng.random_range(0..vocab.len())].as_str())
                .collect();
            let got = remove_stopwords(&words.join(" "), &sw);
            let mut expected: Vec<&str> = Vec::new();
            for w in &words {
                if !stop.iter().any(|s| s.as_str() == *w) {
                    expected.push(w);
                }
            }
            assert_eq!(got, expected);
        }
    }

    proptest! {
        #[test]
        fn strip_is_idempotent(q in "[a-e ]{1,20}") {
            let r = root("a b", &["c"]);
            let once = strip_root(&q, &r);
            prop_assert_eq!(strip_root(&once, &r), once.clone());
            for t in once.split(' ') {
                prop_assert!(!["a", "b", "c"].contains(&t));
            }
        }
    }

    fn small_corpus() -> AuditCorpus {
        let fx = Fixture::from_json(
            r#"{"x y": ["x y age", "x y the", "other thing", "x y wife"],
                "x y age": ["x y age 50"],
                "other thing": ["other thing x y"],
                "p q": ["p q age", "p q berlin", "p q"]}"#,
        )
        .unwrap();
        let src = FixtureSource::new(fx, MissPolicy::Empty);
        let mut trees = Vec::new();
        for name in ["x y", "p q"] {
            let r = root(name, &[]);
            let mut t = build_tree(&r, &src, 3, &[]).unwrap();
            prune_in_place(&mut t, &r);
            trees.push(t);
        }
        AuditCorpus::from_trees(&trees, &Stopwords::from_words(["the"]))
    }

    #[test]
    fn corpus_stages() {
        let c = small_corpus();
        // crawl: age, wife, other thing, age 50, other thing (under pruned) ... berlin
        let crawl = c.stage_counts[0].unique;
        let pruning = c.stage_counts[1].unique;
        assert_eq!(crawl, 5); // age, wife, other thing, age 50, berlin
        assert_eq!(pruning, 4); // "other thing" pruned
        assert_eq!(c.per_root["x y"].len(), 3);
        assert_eq!(c.per_root["p q"].len(), 2);
        assert_eq!(c.per_root["x y"]["age 50"].min_depth, 2);
        assert_eq!(c.raw_count, 9);
        let dropped = drop_ambiguous_roots(c.clone(), &["P Q".to_string()]);
        // "age" is shared with "x y", so only "berlin" disappears globally
        assert_eq!(dropped.stage_counts[2].unique, 3);
        assert_eq!(dropped.dropped_roots, vec!["p q"]);
        let same = drop_ambiguous_roots(c.clone(), &[]);
        assert_eq!(same.per_root, c.per_root);
        let counts: Vec<usize> = same.stage_counts.iter().map(|s| s.unique).collect();
        assert!(counts.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn corpus_file_round_trip() {
        let c = drop_ambiguous_roots(small_corpus(), &["unknown".to_string()]);
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("c.jsonl"), dir.path().join("s.json"));
        c.write(&a, &b, Some("h")).unwrap();
        assert_eq!(AuditCorpus::read(&a, &b).unwrap(), c);
    }

    #[test]
    fn empty_corpus_reports_zero() {
        let c = AuditCorpus::from_trees(&[], &Stopwords::default());
        let c = drop_ambiguous_roots(c, &[]);
        assert!(stage_report(&c).iter().all(|s| s.unique == 0));
        assert_eq!(stage_report(&c).len(), 3);
        let table = render_stage_table(&stage_report(&c));
        assert!(table.contains("RAI crawl"));
    }
}
