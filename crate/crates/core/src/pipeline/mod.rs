//! Stage orchestration: crawl, prune, preprocess, vectorize, cluster,
//! analyze, report.
//!
//! Every stage reads the previous stage's files under the output
//! directory and writes its own. JSON artifacts embed the config hash;
//! JSONL and CSV files are covered by a JSON sidecar in the same directory.

pub mod config;
pub mod demo;
pub mod lock;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{ClusterSettings, ReportSettings, RunConfig, SourceSettings};
pub use lock::RunLock;

use crate::clustering::{label_clusters, select_k, ClusterError, ClusterLabel, ClusterModel, KMeansParams, KSelectionDiagnostics};
use crate::embedding::{load_vectors, read_vectors_jsonl, vectorize_corpus, write_vectors_jsonl, EmbeddingError};
use crate::preprocess::{drop_ambiguous_roots, render_stage_table, AuditCorpus, PreprocessError, StageCount, Stopwords};
use crate::regression::audit::{compute_shares, ShareTable};
use crate::regression::meta::{read_metadata_csv, write_metadata_csv, MetadataRow};
use crate::regression::report::{from_json, render_table, to_csv, to_json};
use crate::regression::{audit, AuditOptions, BiasReport, RegressionError};
use crate::seed::derive;
use crate::source::{fold, Fixture, FixtureSource, LiveSource, RecordingSource, SourceError, SuggestionSource, SyntheticSource};
use crate::tree::{deserialize_tree, load_variants, prune_in_place, serialize_tree, CrawlState, Origin, RootTerm, SuggestionTree, TreeBuilder, TreeError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("output directory is in use: {} exists (delete it if no other run is active)", .0.display())]
    Locked(PathBuf),
    #[error("roots file lists no politicians")]
    EmptyRoots,
    #[error("missing input {}: run `{producer}` first", path.display())]
    MissingInput { path: PathBuf, producer: &'static str },
    #[error("crawl of {root:?} interrupted: {source}; progress saved to {}, rerun with --resume", checkpoint.display())]
    CrawlInterrupted {
        root: String,
        checkpoint: PathBuf,
        source: SourceError,
    },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("config syntax: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// File-name form of a politician name: folded, German letters
/// transliterated, everything else non-alphanumeric collapsed to `-`.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in fold(name).chars() {
        match c {
            'ä' => out.push_str("ae"),
            'ö' => out.push_str("oe"),
            'ü' => out.push_str("ue"),
            'ß' => out.push_str("ss"),
            c if c.is_alphanumeric() => out.push(c),
            _ => {
                if !out.ends_with('-') {
                    out.push('-');
                }
            }
        }
    }
    out.trim_matches('-').to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootCrawl {
    pub key: String,
    pub slug: String,
    pub nodes: usize,
    pub requests: usize,
    pub suggestions_returned: usize,
    pub duplicates_skipped: usize,
    /// Distinct suggestion texts in this tree.
    pub unique_suggestions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrawlSummary {
    pub config_hash: String,
    pub roots: Vec<RootCrawl>,
    /// Suggestions returned by the source, duplicates included.
    pub raw_count: usize,
    /// Distinct suggestion texts over all trees.
    pub unique_count: usize,
    pub requests: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootPrune {
    pub key: String,
    pub removed: usize,
    pub retained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneSummary {
    pub config_hash: String,
    pub roots: Vec<RootPrune>,
    pub removed_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorizeSummary {
    pub config_hash: String,
    pub dim: usize,
    pub vectors: usize,
    pub dropped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub config_hash: String,
    pub model: ClusterModel,
    pub k_selection: KSelectionDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub suggestion_id: String,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LabelsFile {
    config_hash: String,
    clusters: Vec<ClusterLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SharesFile {
    config_hash: String,
    #[serde(flatten)]
    table: ShareTable,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// One configured run bound to a locked output directory.
#[derive(Debug)]
pub struct Pipeline {
    config: RunConfig,
    hash: String,
    out: PathBuf,
    _lock: RunLock,
}

impl Pipeline {
    /// Validates the config and claims its output directory.
    pub fn open(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let out = config.output();
        let lock = RunLock::acquire(&out)?;
        Ok(Self {
            hash: config.hash(),
            config,
            out,
            _lock: lock,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    fn stage_dir(&self, name: &str) -> Result<PathBuf> {
        let d = self.out.join(name);
        fs::create_dir_all(&d)?;
        Ok(d)
    }

    fn input(&self, rel: &str, producer: &'static str) -> Result<PathBuf> {
        let p = self.out.join(rel);
        if p.exists() {
            Ok(p)
        } else {
            Err(PipelineError::MissingInput { path: p, producer })
        }
    }

    pub fn metadata(&self) -> Result<Vec<MetadataRow>> {
        Ok(read_metadata_csv(self.config.resolve(&self.config.roots_file))?)
    }

    /// Root terms with their slugs, in roots-file order.
    pub fn roots(&self) -> Result<Vec<(RootTerm, String)>> {
        let rows = self.metadata()?;
        if rows.is_empty() {
            return Err(PipelineError::EmptyRoots);
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for row in rows {
            let name = &row.meta.name;
            let s = slug(name);
            if s.is_empty() || !seen.insert(s.clone()) {
                return Err(PipelineError::Config(format!(
                    "root {name:?} has an empty or duplicate file name {s:?}"
                )));
            }
            let variants = match &self.config.variants_dir {
                Some(d) => {
                    let p = self.config.resolve(d).join(format!("{s}.txt"));
                    if p.exists() {
                        load_variants(&p)?
                    } else {
                        Vec::new()
                    }
                }
                None => Vec::new(),
            };
            out.push((RootTerm::new(&fold(name), variants, name)?, s));
        }
        Ok(out)
    }

    /// The source named in the config.
    pub fn build_source(&self) -> Result<Box<dyn SuggestionSource>> {
        Ok(match &self.config.source {
            SourceSettings::Fixture { path, miss } => {
                Box::new(FixtureSource::load(self.config.resolve(path), *miss)?)
            }
            SourceSettings::Live(c) => {
                if c.locale != self.config.locale {
                    warn!(
                        "source locale {:?} differs from run locale {:?}",
                        c.locale, self.config.locale
                    );
                }
                Box::new(LiveSource::new(c.clone())?)
            }
            SourceSettings::Synthetic { .. } => {
                let spec = self.config.synthetic_spec()?.expect("synthetic source");
                Box::new(SyntheticSource::new(spec)?)
            }
        })
    }

    fn builder<'s>(&self, source: &'s dyn SuggestionSource) -> TreeBuilder<'s, dyn SuggestionSource + 's> {
        TreeBuilder::new(source, self.config.max_depth)
            .alphabet(self.config.alphabet_chars())
            .locale(&self.config.locale)
            .workers(self.config.workers)
    }

    /// Crawls one tree per root. With `resume`, finished trees are reused
    /// and interrupted ones continue from their checkpoint.
    pub fn crawl(&self, source: &dyn SuggestionSource, resume: bool) -> Result<CrawlSummary> {
        let dir = self.stage_dir("crawl")?;
        let builder = self.builder(source);
        let alphabet = self.config.alphabet_chars();
        let mut trees = Vec::new();
        let mut slugs = Vec::new();
        for (root, s) in self.roots()? {
            let tree_path = dir.join(format!("{s}.tree.json"));
            let ckpt = dir.join(format!("{s}.checkpoint.json"));
            // a checkpoint is newer than any finished tree of the same root
            if resume && tree_path.exists() && !ckpt.exists() {
                info!("{}: reusing finished tree", root.metadata_key);
                trees.push(deserialize_tree(&tree_path)?);
                slugs.push(s);
                continue;
            }
            let state = if resume && ckpt.exists() {
                let state = CrawlState::load(&ckpt)?;
                if state.tree.root_term != root
                    || state.tree.max_depth != self.config.max_depth
                    || state.tree.alphabet != alphabet
                {
                    return Err(PipelineError::Config(format!(
                        "checkpoint {} was written with different settings; delete it or run without --resume",
                        ckpt.display()
                    )));
                }
                info!("{}: resuming at depth {}", root.metadata_key, state.next_depth);
                state
            } else {
                for stale in [&ckpt, &tree_path] {
                    if stale.exists() {
                        fs::remove_file(stale)?;
                    }
                }
                CrawlState::new(root.clone(), self.config.max_depth, alphabet.clone())
            };
            match builder.resume(state, |st| st.save(&ckpt)) {
                Ok(tree) => {
                    serialize_tree(&tree, &tree_path, Some(&self.hash))?;
                    if ckpt.exists() {
                        fs::remove_file(&ckpt)?;
                    }
                    info!("{}: {} nodes", root.metadata_key, tree.node_count());
                    trees.push(tree);
                    slugs.push(s);
                }
                Err(TreeError::Source {
                    root,
                    error,
                    partial,
                }) => {
                    partial.save(&ckpt)?;
                    return Err(PipelineError::CrawlInterrupted {
                        root,
                        checkpoint: ckpt,
                        source: error,
                    });
                }
                Err(e) => return Err(e.into()),
            }
        }
        let summary = crawl_summary(&trees, &slugs, &self.hash);
        write_json(&dir.join("summary.json"), &summary)?;
        Ok(summary)
    }

    fn load_trees(&self, stage: &str, producer: &'static str) -> Result<Vec<(RootTerm, String, SuggestionTree)>> {
        self.roots()?
            .into_iter()
            .map(|(root, s)| {
                let p = self.input(&format!("{stage}/{s}.tree.json"), producer)?;
                Ok((root, s, deserialize_tree(p)?))
            })
            .collect()
    }

    pub fn prune(&self) -> Result<PruneSummary> {
        let trees = self.load_trees("crawl", "crawl")?;
        let dir = self.stage_dir("prune")?;
        let mut roots = Vec::new();
        for (root, s, mut tree) in trees {
            tree.root_term = root.clone();
            let removed = prune_in_place(&mut tree, &root);
            roots.push(RootPrune {
                key: root.metadata_key.clone(),
                removed,
                retained: tree.retained_suggestions().len(),
            });
            serialize_tree(&tree, dir.join(format!("{s}.tree.json")), Some(&self.hash))?;
        }
        let summary = PruneSummary {
            config_hash: self.hash.clone(),
            removed_total: roots.iter().map(|r| r.removed).sum(),
            roots,
        };
        write_json(&dir.join("summary.json"), &summary)?;
        Ok(summary)
    }

    pub fn preprocess(&self) -> Result<Vec<StageCount>> {
        let trees: Vec<SuggestionTree> = self
            .load_trees("prune", "prune")?
            .into_iter()
            .map(|(_, _, t)| t)
            .collect();
        let stopwords = Stopwords::load(self.config.resolve(&self.config.stopwords))?;
        let corpus = AuditCorpus::from_trees(&trees, &stopwords);
        let corpus = drop_ambiguous_roots(corpus, &self.config.drop_roots);
        let dir = self.stage_dir("preprocess")?;
        corpus.write(dir.join("corpus.jsonl"), dir.join("corpus.json"), Some(&self.hash))?;
        Ok(corpus.stage_counts)
    }

    fn read_corpus(&self, stage: &str, producer: &'static str) -> Result<AuditCorpus> {
        let jsonl = self.input(&format!("{stage}/corpus.jsonl"), producer)?;
        let side = self.input(&format!("{stage}/corpus.json"), producer)?;
        Ok(AuditCorpus::read(jsonl, side)?)
    }

    pub fn vectorize(&self) -> Result<Vec<StageCount>> {
        let mut corpus = self.read_corpus("preprocess", "preprocess")?;
        let store = load_vectors(self.config.resolve(&self.config.vectors))?;
        let v = vectorize_corpus(&mut corpus, &store)?;
        let dir = self.stage_dir("vectorize")?;
        write_vectors_jsonl(dir.join("vectors.jsonl"), &v.vectors)?;
        corpus.write(dir.join("corpus.jsonl"), dir.join("corpus.json"), Some(&self.hash))?;
        write_json(
            &dir.join("summary.json"),
            &VectorizeSummary {
                config_hash: self.hash.clone(),
                dim: store.dim(),
                vectors: v.vectors.len(),
                dropped: v.dropped,
            },
        )?;
        Ok(corpus.stage_counts)
    }

    pub fn cluster(&self) -> Result<ModelFile> {
        let vectors = read_vectors_jsonl(self.input("vectorize/vectors.jsonl", "vectorize")?)?;
        let corpus = self.read_corpus("vectorize", "vectorize")?;
        let data: Vec<Vec<f64>> = vectors.iter().map(|v| v.vector.clone()).collect();
        let [lo, hi] = self.config.k_range;
        let hi = if hi > data.len() {
            warn!("k_range upper bound {hi} exceeds {} suggestions; clamped", data.len());
            data.len()
        } else {
            hi
        };
        let c = &self.config.clustering;
        let params = KMeansParams {
            k: lo,
            seed: derive(self.config.seed, "kmeans"),
            n_restarts: c.n_restarts,
            max_iter: c.max_iter,
            tol: c.tol,
        };
        let (diagnostics, model) = select_k(&data, lo, hi.max(lo), &params)?;
        info!("k = {} (sse {:.4})", model.k, model.sse);

        let dir = self.stage_dir("cluster")?;
        let mut w = BufWriter::new(fs::File::create(dir.join("assignments.jsonl"))?);
        for (v, c) in vectors.iter().zip(&model.assignments) {
            serde_json::to_writer(
                &mut w,
                &Assignment {
                    suggestion_id: v.suggestion_id.clone(),
                    cluster: *c,
                },
            )?;
            w.write_all(b"\n")?;
        }
        w.flush()?;

        let global = corpus.global_suggestions();
        let ids: Vec<String> = vectors.iter().map(|v| v.suggestion_id.clone()).collect();
        let tokens: Vec<Vec<String>> = ids
            .iter()
            .map(|id| global.get(id.as_str()).map(|t| t.to_vec()).unwrap_or_default())
            .collect();
        let labels = label_clusters(&model, &ids, &tokens, &data, c.top_n);
        write_json(
            &dir.join("labels.json"),
            &LabelsFile {
                config_hash: self.hash.clone(),
                clusters: labels,
            },
        )?;
        let file = ModelFile {
            config_hash: self.hash.clone(),
            model,
            k_selection: diagnostics,
        };
        write_json(&dir.join("model.json"), &file)?;
        Ok(file)
    }

    fn read_assignments(&self) -> Result<BTreeMap<String, usize>> {
        let path = self.input("cluster/assignments.jsonl", "cluster")?;
        let mut out = BTreeMap::new();
        for line in BufReader::new(fs::File::open(path)?).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let a: Assignment = serde_json::from_str(&line)?;
            out.insert(a.suggestion_id, a.cluster);
        }
        Ok(out)
    }

    pub fn analyze(&self) -> Result<BiasReport> {
        let corpus = self.read_corpus("vectorize", "vectorize")?;
        let model: ModelFile = read_json(&self.input("cluster/model.json", "cluster")?)?;
        let assignments = self.read_assignments()?;
        let table = compute_shares(&corpus, &assignments, model.model.k)?;
        for key in &table.empty {
            warn!("{key}: no clustered suggestions, excluded from the regression");
        }
        let mut rows = self.metadata()?;
        let metas: Vec<_> = rows.iter().map(|r| r.meta.clone()).collect();
        let options = AuditOptions {
            alpha: self.config.alpha,
            mode: self.config.mode,
            scheme: self.config.dummies,
            bonferroni: self.config.bonferroni,
        };
        let report = audit(&table.shares, &metas, &options)?;

        let dir = self.stage_dir("analyze")?;
        let by_key: BTreeMap<&str, _> = table.shares.iter().map(|s| (s.metadata_key.as_str(), s)).collect();
        for row in &mut rows {
            match by_key.get(row.meta.name.as_str()) {
                Some(s) => {
                    row.suggestions = Some(s.n_suggestions);
                    row.clusters = s.shares.iter().map(|v| Some(*v)).collect();
                }
                None => {
                    row.suggestions = None;
                    row.clusters = vec![None; model.model.k];
                }
            }
        }
        fs::write(dir.join("politicians.csv"), write_metadata_csv(&rows, model.model.k)?)?;
        write_json(
            &dir.join("shares.json"),
            &SharesFile {
                config_hash: self.hash.clone(),
                table,
            },
        )?;
        fs::write(dir.join("bias.json"), to_json(&report, Some(&self.hash)))?;
        Ok(report)
    }

    /// Writes `report.csv`, `report.json`, `report.txt` and `stages.txt`
    /// and returns the text table.
    pub fn report(&self) -> Result<String> {
        let (report, _) = from_json(&fs::read_to_string(self.input("analyze/bias.json", "analyze")?)?)?;
        let corpus = self.read_corpus("vectorize", "vectorize")?;
        let dir = self.stage_dir("report")?;
        let r = &self.config.report;
        let footer = format!("config {}\n", self.hash);
        let table = render_table(&report, r.table_style, r.only_significant);
        fs::write(dir.join("report.csv"), to_csv(&report.rows)?)?;
        fs::write(dir.join("report.json"), to_json(&report, Some(&self.hash)))?;
        fs::write(dir.join("report.txt"), format!("{table}{footer}"))?;
        fs::write(
            dir.join("stages.txt"),
            format!("{}{footer}", render_stage_table(&corpus.stage_counts)),
        )?;
        Ok(table)
    }

    /// All stages in order.
    pub fn run(&self, source: &dyn SuggestionSource, resume: bool) -> Result<BiasReport> {
        self.crawl(source, resume)?;
        self.prune()?;
        self.preprocess()?;
        self.vectorize()?;
        self.cluster()?;
        let report = self.analyze()?;
        self.report()?;
        Ok(report)
    }

    /// Crawls every root through `source` and stores each response, so
    /// that a fixture source replays the same trees.
    pub fn record_fixture(&self, source: &dyn SuggestionSource, out: &Path) -> Result<Fixture> {
        let recorder = RecordingSource::new(source);
        let builder = TreeBuilder::new(&recorder, self.config.max_depth)
            .alphabet(self.config.alphabet_chars())
            .locale(&self.config.locale)
            .workers(self.config.workers);
        for (root, _) in self.roots()? {
            builder.build(&root)?;
        }
        let fixture = recorder.fixture();
        if let Some(parent) = out.parent() {
            fs::create_dir_all(parent)?;
        }
        fixture.save(out)?;
        Ok(fixture)
    }
}

fn crawl_summary(trees: &[SuggestionTree], slugs: &[String], hash: &str) -> CrawlSummary {
    let mut global = BTreeSet::new();
    let roots = trees
        .iter()
        .zip(slugs)
        .map(|(t, s)| {
            let texts: BTreeSet<String> = t
                .iter()
                .filter(|n| n.origin == Origin::Suggestion)
                .map(|n| fold(&n.query))
                .collect();
            let unique_suggestions = texts.len();
            global.extend(texts);
            RootCrawl {
                key: t.root_term.metadata_key.clone(),
                slug: s.clone(),
                nodes: t.node_count(),
                requests: t.crawl_stats.requests,
                suggestions_returned: t.crawl_stats.suggestions_returned,
                duplicates_skipped: t.crawl_stats.duplicates_skipped,
                unique_suggestions,
            }
        })
        .collect::<Vec<_>>();
    CrawlSummary {
        config_hash: hash.to_string(),
        raw_count: roots.iter().map(|r| r.suggestions_returned).sum(),
        requests: roots.iter().map(|r| r.requests).sum(),
        unique_count: global.len(),
        roots,
    }
}
