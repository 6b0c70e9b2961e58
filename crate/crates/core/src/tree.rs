//! Suggestion trees built by recursive interrogation.
//!
//! A tree is grown breadth-first from a root query. The root's own
//! suggestions and one letter-expanded seed per alphabet character
//! ("root a", "root b", ...) form the first layer; every suggestion is
//! then fed back as a query until `max_depth` is reached or a level
//! produces nothing new. A per-tree visited set keeps a query from being
//! expanded twice; repeats are kept as leaves so recurrence stays visible.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::source::{fold, normalize_text, Query, SourceError, SuggestionList, SuggestionSource};

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("invalid root term: {0}")]
    InvalidRoot(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("crawl of {root:?} interrupted at depth {}: {error}", partial.next_depth)]
    Source {
        root: String,
        #[source]
        error: SourceError,
        partial: Box<CrawlState>,
    },
    #[error("tree file I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed tree file: {0}")]
    Json(#[from] serde_json::Error),
}

/// A person name (or other root query) plus the spellings that count as
/// mentioning it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootTerm {
    pub canonical: String,
    pub variants: Vec<String>,
    pub metadata_key: String,
}

impl RootTerm {
    /// Folds all spellings and guarantees the canonical form is among the
    /// variants.
    pub fn new<I, S>(canonical: &str, variants: I, metadata_key: &str) -> Result<Self, TreeError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let canonical = fold(canonical);
        if canonical.is_empty() {
            return Err(TreeError::InvalidRoot("canonical form is empty".into()));
        }
        let mut all = vec![canonical.clone()];
        for v in variants {
            let v = fold(v.as_ref());
            if !v.is_empty() && !all.contains(&v) {
                all.push(v);
            }
        }
        Ok(Self {
            canonical,
            variants: all,
            metadata_key: metadata_key.to_string(),
        })
    }

    /// Case-insensitive substring test against every variant.
    pub fn matches(&self, text: &str) -> bool {
        let text = fold(text);
        self.variants.iter().any(|v| text.contains(v.as_str()))
    }
}

/// Reads a variant list: one spelling per line, blank lines ignored.
pub fn load_variants(path: impl AsRef<Path>) -> std::io::Result<Vec<String>> {
    Ok(fs::read_to_string(path)?
        .lines()
        .map(normalize_text)
        .filter(|l| !l.is_empty())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Root,
    LetterSeed,
    Suggestion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub query: String,
    /// Suffix relative to the parent query; empty for the root, for letter
    /// seeds and for suggestions that rewrite rather than extend.
    pub added_term: String,
    pub depth: usize,
    pub origin: Origin,
    pub pruned: bool,
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    fn new(query: String, added_term: String, depth: usize, origin: Origin) -> Self {
        Self {
            query,
            added_term,
            depth,
            origin,
            pruned: false,
            children: Vec::new(),
        }
    }

    /// Pre-order traversal of this node and all descendants.
    pub fn iter(&self) -> impl Iterator<Item = &TreeNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrawlStats {
    pub requests: usize,
    pub suggestions_returned: usize,
    pub duplicates_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuggestionTree {
    pub root_term: RootTerm,
    pub root: TreeNode,
    pub max_depth: usize,
    pub alphabet: Vec<char>,
    pub crawl_stats: CrawlStats,
}

impl SuggestionTree {
    pub fn iter(&self) -> impl Iterator<Item = &TreeNode> {
        self.root.iter()
    }

    pub fn node_count(&self) -> usize {
        self.iter().count()
    }

    /// Suggestion nodes outside pruned sub-trees.
    pub fn retained_suggestions(&self) -> Vec<&TreeNode> {
        let mut out = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            if node.pruned {
                continue;
            }
            if node.origin == Origin::Suggestion {
                out.push(node);
            }
            stack.extend(node.children.iter().rev());
        }
        out
    }

    pub fn to_json(&self, config_hash: Option<&str>) -> String {
        let file = TreeFile {
            root_term: self.root_term.canonical.clone(),
            variants: self.root_term.variants.clone(),
            metadata_key: self.root_term.metadata_key.clone(),
            max_depth: self.max_depth,
            alphabet: self.alphabet.iter().map(char::to_string).collect(),
            crawl_stats: self.crawl_stats,
            config_hash: config_hash.map(str::to_string),
            root: self.root.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("tree serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let file: TreeFile = serde_json::from_str(text)?;
        let alphabet = file
            .alphabet
            .iter()
            .map(|s| {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(TreeError::InvalidArgument(format!(
                        "alphabet entry {s:?} is not a single character"
                    ))),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            root_term: RootTerm::new(&file.root_term, &file.variants, &file.metadata_key)?,
            root: file.root,
            max_depth: file.max_depth,
            alphabet,
            crawl_stats: file.crawl_stats,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TreeFile {
    root_term: String,
    variants: Vec<String>,
    #[serde(default)]
    metadata_key: String,
    max_depth: usize,
    alphabet: Vec<String>,
    crawl_stats: CrawlStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    root: TreeNode,
}

pub fn serialize_tree(
    tree: &SuggestionTree,
    path: impl AsRef<Path>,
    config_hash: Option<&str>,
) -> Result<(), TreeError> {
    fs::write(path, tree.to_json(config_hash))?;
    Ok(())
}

pub fn deserialize_tree(path: impl AsRef<Path>) -> Result<SuggestionTree, TreeError> {
    SuggestionTree::from_json(&fs::read_to_string(path)?)
}

/// a-z, extended with the German umlauts and sharp s for `de`.
pub fn default_alphabet(locale: &str) -> Vec<char> {
    let mut a: Vec<char> = ('a'..='z').collect();
    if locale.to_lowercase().starts_with("de") {
        a.extend(['ä', 'ö', 'ü', 'ß']);
    }
    a
}

fn check_alphabet(alphabet: &[char]) -> Result<(), TreeError> {
    let mut seen = HashSet::new();
    for c in alphabet {
        if c.is_whitespace() || !seen.insert(*c) {
            return Err(TreeError::InvalidArgument(format!(
                "alphabet entry {c:?} is blank or repeated"
            )));
        }
    }
    Ok(())
}

/// The root query followed by `root + " " + ch` for each alphabet character.
pub fn expand_root(
    root_term: &RootTerm,
    alphabet: &[char],
    locale: &str,
) -> Result<Vec<Query>, TreeError> {
    check_alphabet(alphabet)?;
    let root = Query::new(&root_term.canonical, locale)
        .map_err(|e| TreeError::InvalidRoot(e.to_string()))?;
    let mut out = Vec::with_capacity(alphabet.len() + 1);
    for c in alphabet {
        out.push(
            Query::new(&format!("{} {c}", root.text()), locale)
                .map_err(|e| TreeError::InvalidRoot(e.to_string()))?,
        );
    }
    out.insert(0, root);
    Ok(out)
}

/// Resumable crawl progress, committed after every completed level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrawlState {
    #[serde(with = "tree_as_json")]
    pub tree: SuggestionTree,
    /// Depth of the nodes to expand next.
    pub next_depth: usize,
    /// Folded queries already expanded.
    pub visited: Vec<String>,
    pub finished: bool,
}

mod tree_as_json {
    use super::SuggestionTree;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(t: &SuggestionTree, s: S) -> Result<S::Ok, S::Error> {
        let v: serde_json::Value =
            serde_json::from_str(&t.to_json(None)).map_err(serde::ser::Error::custom)?;
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<SuggestionTree, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        SuggestionTree::from_json(&v.to_string()).map_err(serde::de::Error::custom)
    }
}

impl CrawlState {
    pub fn new(root_term: RootTerm, max_depth: usize, alphabet: Vec<char>) -> Self {
        let root = TreeNode::new(root_term.canonical.clone(), String::new(), 0, Origin::Root);
        Self {
            tree: SuggestionTree {
                root_term,
                root,
                max_depth,
                alphabet,
                crawl_stats: CrawlStats::default(),
            },
            next_depth: 0,
            visited: Vec::new(),
            finished: false,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TreeError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TreeError> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }
}

fn collect_at_depth<'t>(node: &'t TreeNode, depth: usize, out: &mut Vec<&'t TreeNode>) {
    if node.depth == depth {
        out.push(node);
    } else if node.depth < depth {
        for c in &node.children {
            collect_at_depth(c, depth, out);
        }
    }
}

fn for_each_at_depth_mut(node: &mut TreeNode, depth: usize, f: &mut impl FnMut(&mut TreeNode)) {
    if node.depth == depth {
        f(node);
    } else if node.depth < depth {
        for c in &mut node.children {
            for_each_at_depth_mut(c, depth, f);
        }
    }
}

fn added_term(parent: &str, child: &str) -> String {
    child
        .strip_prefix(parent)
        .and_then(|rest| rest.strip_prefix(' '))
        .map(str::to_string)
        .unwrap_or_default()
}

/// Breadth-first tree builder over any [`SuggestionSource`].
pub struct TreeBuilder<'a, S: ?Sized> {
    source: &'a S,
    max_depth: usize,
    alphabet: Vec<char>,
    locale: String,
    workers: usize,
}

impl<'a, S: SuggestionSource + ?Sized> TreeBuilder<'a, S> {
    pub fn new(source: &'a S, max_depth: usize) -> Self {
        Self {
            source,
            max_depth,
            alphabet: Vec::new(),
            locale: "de".to_string(),
            workers: 1,
        }
    }

    pub fn alphabet(mut self, alphabet: Vec<char>) -> Self {
        self.alphabet = alphabet;
        self
    }

    pub fn locale(mut self, locale: &str) -> Self {
        self.locale = locale.to_string();
        self
    }

    /// Number of concurrent fetches per level (at least one).
    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn build(&self, root_term: &RootTerm) -> Result<SuggestionTree, TreeError> {
        let state = CrawlState::new(root_term.clone(), self.max_depth, self.alphabet.clone());
        self.resume(state, |_| Ok(()))
    }

    /// Continues `state` level by level, calling `on_level` after each
    /// committed level.
    pub fn resume(
        &self,
        mut state: CrawlState,
        mut on_level: impl FnMut(&CrawlState) -> Result<(), TreeError>,
    ) -> Result<SuggestionTree, TreeError> {
        if state.tree.max_depth < 1 {
            return Err(TreeError::InvalidArgument("max_depth must be >= 1".into()));
        }
        check_alphabet(&state.tree.alphabet)?;
        let mut visited: HashSet<String> = state.visited.iter().cloned().collect();
        while !state.finished && state.next_depth < state.tree.max_depth {
            let depth = state.next_depth;
            let mut frontier = Vec::new();
            collect_at_depth(&state.tree.root, depth, &mut frontier);
            let mut level_visited = Vec::new();
            let mut expand = Vec::new();
            let mut duplicates = 0;
            for (i, node) in frontier.iter().enumerate() {
                let key = fold(&node.query);
                if visited.contains(&key) || level_visited.contains(&key) {
                    duplicates += 1;
                } else {
                    level_visited.push(key);
                    expand.push(i);
                }
            }
            if expand.is_empty() {
                state.tree.crawl_stats.duplicates_skipped += duplicates;
                state.finished = true;
                on_level(&state)?;
                break;
            }
            let queries = expand
                .iter()
                .map(|&i| Query::new(&frontier[i].query, &self.locale))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| TreeError::InvalidRoot(e.to_string()))?;
            let lists = match self.fetch_all(&queries) {
                Ok(l) => l,
                Err(error) => {
                    return Err(TreeError::Source {
                        root: state.tree.root_term.canonical.clone(),
                        error,
                        partial: Box::new(state),
                    })
                }
            };

            let stats = &mut state.tree.crawl_stats;
            stats.requests += lists.len();
            stats.suggestions_returned += lists.iter().map(SuggestionList::len).sum::<usize>();
            stats.duplicates_skipped += duplicates;

            let root_query = state.tree.root.query.clone();
            let mut created = 0;
            let mut next_list = expand.iter().copied().zip(lists).peekable();
            let mut pos = 0;
            for_each_at_depth_mut(&mut state.tree.root, depth, &mut |node| {
                if let Some((_, list)) = next_list.next_if(|(i, _)| *i == pos) {
                    for s in list.suggestions() {
                        if node.children.iter().any(|c| &c.query == s) {
                            continue;
                        }
                        let mut term = added_term(&node.query, s);
                        if term.is_empty() && node.origin == Origin::LetterSeed {
                            term = added_term(&root_query, s);
                        }
                        node.children
                            .push(TreeNode::new(s.clone(), term, depth + 1, Origin::Suggestion));
                        created += 1;
                    }
                }
                pos += 1;
            });
            if depth == 0 {
                for c in &state.tree.alphabet {
                    let seed = format!("{root_query} {c}");
                    let root = &mut state.tree.root;
                    if !root.children.iter().any(|n| n.query == seed) {
                        root.children
                            .push(TreeNode::new(seed, String::new(), 1, Origin::LetterSeed));
                        created += 1;
                    }
                }
            }
            visited.extend(level_visited.iter().cloned());
            state.visited.extend(level_visited);
            state.next_depth += 1;
            if created == 0 {
                state.finished = true;
            }
            on_level(&state)?;
        }
        state.finished = true;
        Ok(state.tree)
    }

    fn fetch_all(&self, queries: &[Query]) -> Result<Vec<SuggestionList>, SourceError> {
        if self.workers <= 1 || queries.len() <= 1 {
            return queries.iter().map(|q| self.source.fetch(q)).collect();
        }
        let next = AtomicUsize::new(0);
        let failed = AtomicBool::new(false);
        let slots: Vec<Mutex<Option<Result<SuggestionList, SourceError>>>> =
            queries.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..self.workers.min(queries.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= queries.len() || failed.load(Ordering::SeqCst) {
                        break;
                    }
                    let r = self.source.fetch(&queries[i]);
                    if r.is_err() {
                        failed.store(true, Ordering::SeqCst);
                    }
                    *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
                });
            }
        });
        let results: Vec<_> = slots
            .into_iter()
            .map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()))
            .collect();
        let mut lists = Vec::with_capacity(results.len());
        let mut first_err = None;
        for r in results.into_iter().flatten() {
            match r {
                Ok(l) => lists.push(l),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => Ok(lists),
        }
    }
}

/// Builds a tree with default locale and a single worker.
pub fn build_tree<S: SuggestionSource + ?Sized>(
    root_term: &RootTerm,
    source: &S,
    max_depth: usize,
    alphabet: &[char],
) -> Result<SuggestionTree, TreeError> {
    TreeBuilder::new(source, max_depth)
        .alphabet(alphabet.to_vec())
        .build(root_term)
}

fn mark(node: &mut TreeNode, parent_pruned: bool, root_term: &RootTerm) -> usize {
    let mut newly = 0;
    let should = match node.origin {
        Origin::Root | Origin::LetterSeed => false,
        Origin::Suggestion => parent_pruned || !root_term.matches(&node.query),
    };
    if should && !node.pruned {
        node.pruned = true;
        newly += 1;
    }
    let pruned = node.pruned;
    for c in &mut node.children {
        newly += mark(c, pruned, root_term);
    }
    newly
}

/// Marks every suggestion node whose query mentions none of the root
/// variants, together with its whole sub-tree. Returns the number of
/// newly marked nodes.
pub fn prune_in_place(tree: &mut SuggestionTree, root_term: &RootTerm) -> usize {
    mark(&mut tree.root, false, root_term)
}

pub fn prune(tree: &SuggestionTree, root_term: &RootTerm) -> (SuggestionTree, usize) {
    let mut t = tree.clone();
    let n = prune_in_place(&mut t, root_term);
    (t, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{Fixture, FixtureSource, MissPolicy};
    use proptest::prelude::*;

    fn root(name: &str) -> RootTerm {
        RootTerm::new(name, Vec::<String>::new(), name).unwrap()
    }

    fn fixture(json: &str) -> FixtureSource {
        FixtureSource::new(Fixture::from_json(json).unwrap(), MissPolicy::Empty)
    }

    #[test]
    fn expand_root_counts() {
        let r = root("olaf scholz");
        let az: Vec<char> = ('a'..='z').collect();
        let seeds = expand_root(&r, &az, "de").unwrap();
        assert_eq!(seeds.len(), 27);
        assert_eq!(seeds.len() * 10, 270);
        assert_eq!(seeds[0].text(), "olaf scholz");
        assert_eq!(seeds[1].text(), "olaf scholz a");
        assert_eq!(expand_root(&r, &[], "de").unwrap().len(), 1);
        let de = default_alphabet("de");
        assert_eq!(de.len(), 30);
        assert!(expand_root(&r, &['a', 'a'], "de").is_err());
    }

    #[test]
    fn hand_enumerated_fixture() {
        let src = fixture(r#"{"x": ["x a", "x b"], "x a": ["x a c"]}"#);
        let tree = build_tree(&root("x"), &src, 3, &[]).unwrap();
        let depths: Vec<usize> = tree.iter().map(|n| n.depth).collect();
        assert_eq!(depths, vec![0, 1, 2, 1]);
        assert_eq!(tree.node_count(), 4);
        let c = &tree.root.children[0].children[0];
        assert_eq!(c.query, "x a c");
        assert_eq!(c.added_term, "c");
        assert_eq!(tree.crawl_stats.requests, 4);
    }

    #[test]
    fn empty_source_yields_seeds_only() {
        let src = fixture("{}");
        let tree = build_tree(&root("x"), &src, 8, &['a', 'b', 'c']).unwrap();
        assert_eq!(tree.node_count(), 4);
        assert!(tree.root.children.iter().all(|c| c.origin == Origin::LetterSeed));
    }

    #[test]
    fn cycles_terminate_as_leaves() {
        let src = fixture(r#"{"x": ["x a"], "x a": ["x", "x a"]}"#);
        let tree = build_tree(&root("x"), &src, 50, &[]).unwrap();
        assert_eq!(tree.node_count(), 4);
        let xa = &tree.root.children[0];
        assert_eq!(xa.children.len(), 2);
        assert!(xa.children.iter().all(|c| c.children.is_empty()));
        assert_eq!(tree.crawl_stats.duplicates_skipped, 2);
    }

    #[test]
    fn source_error_keeps_partial_tree() {
        let src = FixtureSource::new(
            Fixture::from_json(r#"{"x": ["x a"]}"#).unwrap(),
            MissPolicy::Error,
        );
        match build_tree(&root("x"), &src, 3, &[]) {
            Err(TreeError::Source { partial, .. }) => {
                assert_eq!(partial.next_depth, 1);
                assert_eq!(partial.tree.node_count(), 2);
                // resuming against a complete source finishes the tree
                let full = fixture(r#"{"x": ["x a"], "x a": ["x a b"]}"#);
                let tree = TreeBuilder::new(&full, 3).resume(*partial, |_| Ok(())).unwrap();
                assert_eq!(tree.node_count(), 3);
            }
            other => panic!("expected source error, got {other:?}"),
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let src = fixture(
            r#"{"x": ["x a", "x b", "x c"], "x a": ["x a d", "x b"], "x b": ["x b e"],
                "x c": ["x"], "x d": ["x d f"], "x a d": ["x a d g"]}"#,
        );
        let seq = build_tree(&root("x"), &src, 4, &['d']).unwrap();
        let par = TreeBuilder::new(&src, 4)
            .alphabet(vec!['d'])
            .workers(4)
            .build(&root("x"))
            .unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn figure_two_pruning() {
        let src = fixture(
            r#"{"annalena baerbock": ["annalena baerbock e-auto", "e-auto steuer"],
                "e-auto steuer": ["e-auto steuer 2022"]}"#,
        );
        let r = root("annalena baerbock");
        let tree = build_tree(&r, &src, 3, &[]).unwrap();
        let (pruned, removed) = prune(&tree, &r);
        assert_eq!(removed, 2);
        let kept: Vec<&str> = pruned
            .retained_suggestions()
            .iter()
            .map(|n| n.query.as_str())
            .collect();
        assert_eq!(kept, vec!["annalena baerbock e-auto"]);
        assert_eq!(prune(&pruned, &r).1, 0);
    }

    #[test]
    fn variants_survive_pruning() {
        let r = RootTerm::new("annalena baerbock", ["baerbok"], "ab").unwrap();
        assert!(r.matches("BAERBOK alter"));
        assert!(r.matches("annalena  baerbock"));
        assert!(!r.matches("annalena"));
    }

    #[test]
    fn tree_file_round_trip() {
        let src = fixture(r#"{"x": ["x a", "y"], "x a": ["x a ü"]}"#);
        let r = root("x");
        let (tree, _) = prune(&build_tree(&r, &src, 3, &['b']).unwrap(), &r);
        let a = tree.to_json(Some("abc"));
        let back = SuggestionTree::from_json(&a).unwrap();
        assert_eq!(back, tree);
        assert_eq!(back.to_json(Some("abc")), a);
        let leaf_only = build_tree(&r, &fixture("{}"), 1, &[]).unwrap();
        let s = leaf_only.to_json(None);
        assert_eq!(SuggestionTree::from_json(&s).unwrap().to_json(None), s);
        assert!(SuggestionTree::from_json("{\"root_term\": 3}").is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let src = fixture(r#"{"x": ["x a"], "x a": ["x a b"]}"#);
        let mut states = Vec::new();
        TreeBuilder::new(&src, 3)
            .resume(CrawlState::new(root("x"), 3, vec![]), |s| {
                states.push(s.clone());
                Ok(())
            })
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cp.json");
        states[0].save(&p).unwrap();
        assert_eq!(CrawlState::load(&p).unwrap(), states[0]);
    }

    fn arb_tree() -> impl Strategy<Value = TreeNode> {
        let leaf = ("[ab ]{0,4}", any::<bool>()).prop_map(|(s, _)| {
            TreeNode::new(format!("n {s}"), String::new(), 0, Origin::Suggestion)
        });
        leaf.prop_recursive(4, 40, 4, |inner| {
            ("[ab ]{0,4}", proptest::collection::vec(inner, 0..4)).prop_map(|(s, children)| {
                let mut n = TreeNode::new(format!("n {s}"), String::new(), 0, Origin::Suggestion);
                n.children = children;
                n
            })
        })
    }

    fn fix_depths(n: &mut TreeNode, d: usize) {
        n.depth = d;
        for c in &mut n.children {
            fix_depths(c, d + 1);
        }
    }

    proptest! {
        #[test]
        fn prune_closure_and_idempotence(mut root_node in arb_tree()) {
            root_node.origin = Origin::Root;
            fix_depths(&mut root_node, 0);
            let r = RootTerm::new("ab", ["b a"], "k").unwrap();
            let tree = SuggestionTree {
                root_term: r.clone(),
                root: root_node,
                max_depth: 8,
                alphabet: vec![],
                crawl_stats: CrawlStats::default(),
            };
            let (once, _) = prune(&tree, &r);
            let (twice, again) = prune(&once, &r);
            prop_assert_eq!(again, 0);
            prop_assert_eq!(&once, &twice);
            fn closure(n: &TreeNode) -> bool {
                n.children.iter().all(|c| (!n.pruned || c.pruned) && c.depth == n.depth + 1 && closure(c))
            }
            prop_assert!(closure(&once.root));
        }
    }
}
