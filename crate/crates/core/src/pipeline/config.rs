//! Declarative run configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::regression::report::TableStyle;
use crate::regression::{AuditMode, DummyScheme};
use crate::source::{MissPolicy, SourceConfig, SyntheticBiasSpec};

/// Where suggestions come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSettings {
    /// Recorded query -> suggestions map.
    Fixture {
        path: PathBuf,
        #[serde(default)]
        miss: MissPolicy,
    },
    /// HTTP autocomplete endpoint.
    Live(SourceConfig),
    /// Planted-bias generator; its `rng_seed` is replaced by a sub-seed of
    /// the run seed.
    Synthetic { spec: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSettings {
    pub n_restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Members and tokens listed per cluster in `labels.json`.
    pub top_n: usize,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        Self {
            n_restarts: 10,
            max_iter: 300,
            tol: 1e-6,
            top_n: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    pub table_style: TableStyle,
    /// Leave attributes without any significant cell out of the text table.
    pub only_significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Metadata CSV naming the root politicians.
    pub roots_file: PathBuf,
    /// Optional directory of `<slug>.txt` variant lists, one per line.
    #[serde(default)]
    pub variants_dir: Option<PathBuf>,
    pub source: SourceSettings,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
    /// Letters for the first-layer expansion; defaults to the locale's.
    #[serde(default)]
    pub alphabet: Option<String>,
    #[serde(default = "default_locale")]
    pub locale: String,
    pub stopwords: PathBuf,
    pub vectors: PathBuf,
    #[serde(default = "default_k_range")]
    pub k_range: [usize; 2],
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub mode: AuditMode,
    #[serde(default)]
    pub bonferroni: bool,
    /// Roots removed whole after crawling (namesake collisions).
    #[serde(default)]
    pub drop_roots: Vec<String>,
    /// Concurrent fetches per tree level.
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub clustering: ClusterSettings,
    #[serde(default)]
    pub dummies: DummyScheme,
    #[serde(default)]
    pub report: ReportSettings,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_depth() -> usize {
    8
}

fn default_locale() -> String {
    "de".into()
}

fn default_k_range() -> [usize; 2] {
    [2, 10]
}

fn default_alpha() -> f64 {
    0.05
}

fn default_workers() -> usize {
    1
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let mut config: RunConfig = toml::from_str(text)?;
        config.base_dir = base_dir.into();
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Hex SHA-256 over every setting that can change results. Paths enter
    /// as written; the output directory and worker count are left out.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("output_dir");
            m.remove("workers");
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }

    pub fn alphabet_chars(&self) -> Vec<char> {
        match &self.alphabet {
            Some(a) => a.chars().filter(|c| !c.is_whitespace()).collect(),
            None => crate::tree::default_alphabet(&self.locale),
        }
    }

    pub fn synthetic_spec(&self) -> Result<Option<SyntheticBiasSpec>, PipelineError> {
        let SourceSettings::Synthetic { spec } = &self.source else {
            return Ok(None);
        };
        let path = self.resolve(spec);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PipelineError::Config(format!("synthetic spec {}: {e}", path.display())))?;
        let mut spec: SyntheticBiasSpec = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text)?
        } else {
            serde_json::from_str(&text)?
        };
        spec.rng_seed = crate::seed::derive(self.seed, "synthetic");
        spec.validate()?;
        Ok(Some(spec))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        let must_exist = |label: &str, p: &Path| -> Result<(), PipelineError> {
            let full = self.resolve(p);
            if full.exists() {
                Ok(())
            } else {
                Err(PipelineError::Config(format!("{label} {} does not exist", full.display())))
            }
        };
        must_exist("roots_file", &self.roots_file)?;
        if let Some(d) = &self.variants_dir {
            must_exist("variants_dir", d)?;
        }
        must_exist("stopwords", &self.stopwords)?;
        must_exist("vectors", &self.vectors)?;
        match &self.source {
            SourceSettings::Fixture { path, .. } => must_exist("fixture", path)?,
            SourceSettings::Live(c) => c.validate()?,
            SourceSettings::Synthetic { spec } => {
                must_exist("synthetic spec", spec)?;
                self.synthetic_spec()?;
            }
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1".into());
        }
        let [lo, hi] = self.k_range;
        if lo < 1 || lo > hi {
            return bad(format!("k_range [{lo}, {hi}] must satisfy 1 <= min <= max"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha {} outside (0, 1]", self.alpha));
        }
        if self.workers < 1 {
            return bad("workers must be at least 1".into());
        }
        if self.clustering.n_restarts < 1 {
            return bad("clustering.n_restarts must be at least 1".into());
        }
        let a = self.alphabet_chars();
        let mut sorted = a.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != a.len() {
            return bad("alphabet repeats a character".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
roots_file = "roots.csv"
stopwords = "stop.txt"
vectors = "vec.txt"
seed = 7
output_dir = "out"

[source]
kind = "fixture"
path = "fixture.json"
"#;

    #[test]
    fn defaults() {
        let c = RunConfig::from_toml(MINIMAL, "/tmp/x").unwrap();
        assert_eq!(c.max_depth, 8);
        assert_eq!(c.alpha, 0.05);
        assert_eq!(c.k_range, [2, 10]);
        assert_eq!(c.mode, AuditMode::Univariate);
        assert_eq!(c.alphabet_chars().len(), 30);
        assert_eq!(c.resolve(Path::new("roots.csv")), PathBuf::from("/tmp/x/roots.csv"));
        assert!(matches!(c.source, SourceSettings::Fixture { miss: MissPolicy::Empty, .. }));
    }

    #[test]
    fn live_source_section() {
        let text = MINIMAL.replace(
            "kind = \"fixture\"\npath = \"fixture.json\"",
            "kind = \"live\"\nmin_interval_ms = 2000",
        );
        let c = RunConfig::from_toml(&text, ".").unwrap();
        match c.source {
            SourceSettings::Live(s) => {
                assert_eq!(s.min_interval_ms, 2000);
                assert_eq!(s.max_retries, SourceConfig::default().max_retries);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seed_is_required_and_keys_checked() {
        let no_seed = MINIMAL.replace("seed = 7\n", "");
        assert!(RunConfig::from_toml(&no_seed, ".").is_err());
        let typo = format!("max_dpeth = 3\n{MINIMAL}");
        assert!(RunConfig::from_toml(&typo, ".").is_err());
    }

    #[test]
    fn hash_tracks_results_not_location() {
        let a = RunConfig::from_toml(MINIMAL, "/a").unwrap();
        let mut b = RunConfig::from_toml(MINIMAL, "/b").unwrap();
        b.output_dir = "elsewhere".into();
        b.workers = 4;
        assert_eq!(a.hash(), b.hash());
        b.alpha = 0.01;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn validation_names_missing_files() {
        let c = RunConfig::from_toml(MINIMAL, "/nonexistent-dir").unwrap();
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("roots_file"), "{msg}");
    }
}
