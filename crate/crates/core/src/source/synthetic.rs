use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{fold, Query, SourceError, SuggestionList, SuggestionSource, MAX_SUGGESTIONS};
use crate::seed::derive;

/// Parameters of the planted-bias generator.
///
/// Each root query belongs to a group; each group has a topic mixture.
/// Suggestions for a query extend it by one term drawn from a topic
/// lexicon. Once a query carries a generated term, its descendants stay
/// on that term's topic, so whole sub-trees are topically coherent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBiasSpec {
    /// group label -> topic -> probability
    pub mixtures: BTreeMap<String, BTreeMap<String, f64>>,
    /// topic -> single-token terms
    pub vocabulary: BTreeMap<String, Vec<String>>,
    /// root query -> group label
    pub roots: BTreeMap<String, String>,
    /// suggestions per expanded query
    pub branching: usize,
    /// probability that a non-root query has any suggestions
    pub depth_decay: f64,
    /// standard deviation of the per-root perturbation of the group mixture
    #[serde(default)]
    pub mixture_noise_sd: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl SyntheticBiasSpec {
    pub fn validate(&self) -> Result<(), SourceError> {
        let bad = |m: String| Err(SourceError::InvalidSpec(m));
        if !(1..=MAX_SUGGESTIONS).contains(&self.branching) {
            return bad(format!("branching {} outside 1..=10", self.branching));
        }
        if !(0.0..=1.0).contains(&self.depth_decay) {
            return bad(format!("depth_decay {} outside [0, 1]", self.depth_decay));
        }
        if self.mixture_noise_sd.is_nan() || self.mixture_noise_sd < 0.0 {
            return bad("mixture_noise_sd must be >= 0".into());
        }
        if self.vocabulary.is_empty() {
            return bad("empty vocabulary".into());
        }
        for (topic, terms) in &self.vocabulary {
            if terms.is_empty() {
                return bad(format!("topic {topic:?} has no terms"));
            }
            if let Some(t) = terms.iter().find(|t| t.split_whitespace().count() != 1) {
                return bad(format!("term {t:?} in topic {topic:?} is not a single token"));
            }
        }
        for (group, mix) in &self.mixtures {
            let mut total = 0.0;
            for (topic, p) in mix {
                if !self.vocabulary.contains_key(topic) {
                    return bad(format!("group {group:?} references unknown topic {topic:?}"));
                }
                if p.is_nan() || *p < 0.0 {
                    return bad(format!("negative probability in group {group:?}"));
                }
                total += p;
            }
            if (total - 1.0).abs() > 1e-9 {
                return bad(format!("mixture of group {group:?} sums to {total}"));
            }
        }
        for (root, group) in &self.roots {
            if !self.mixtures.contains_key(group) {
                return bad(format!("root {root:?} assigned to unknown group {group:?}"));
            }
        }
        Ok(())
    }
}

/// Deterministic generator source built from a [`SyntheticBiasSpec`].
///
/// Responses depend only on the spec and the query text, never on call
/// order, so the source is safe to share between crawl workers.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    spec: SyntheticBiasSpec,
    topics: Vec<String>,
    lexicons: Vec<Vec<String>>,
    term_topic: HashMap<String, usize>,
    // longest root first so that nested names match the most specific root
    roots: Vec<(String, Vec<f64>)>,
}

impl SyntheticSource {
    pub fn new(spec: SyntheticBiasSpec) -> Result<Self, SourceError> {
        spec.validate()?;
        let topics: Vec<String> = spec.vocabulary.keys().cloned().collect();
        let lexicons: Vec<Vec<String>> = spec
            .vocabulary
            .values()
            .map(|terms| terms.iter().map(|t| t.to_lowercase()).collect())
            .collect();
        let mut term_topic = HashMap::new();
        for (i, terms) in lexicons.iter().enumerate() {
            for t in terms {
                term_topic.entry(t.clone()).or_insert(i);
            }
        }
        let mut roots: Vec<(String, Vec<f64>)> = spec
            .roots
            .iter()
            .map(|(root, group)| {
                let root = fold(root);
                let base: Vec<f64> = topics
                    .iter()
                    .map(|t| spec.mixtures[group].get(t).copied().unwrap_or(0.0))
                    .collect();
                let mix = perturb(&base, spec.mixture_noise_sd, derive(spec.rng_seed, &root));
                (root, mix)
            })
            .collect();
        roots.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));
        Ok(Self {
            spec,
            topics,
            lexicons,
            term_topic,
            roots,
        })
    }

    pub fn spec(&self) -> &SyntheticBiasSpec {
        &self.spec
    }

    /// Topic names in index order.
    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    /// Topic index of a generated term, if it belongs to a lexicon.
    pub fn topic_of(&self, term: &str) -> Option<usize> {
        self.term_topic.get(term).copied()
    }

    /// The effective (possibly perturbed) mixture for a root query.
    pub fn root_mixture(&self, root: &str) -> Option<&[f64]> {
        let root = fold(root);
        self.roots
            .iter()
            .find(|(r, _)| *r == root)
            .map(|(_, m)| m.as_slice())
    }

    fn generate(&self, text: &str) -> Vec<String> {
        let Some((root, mix)) = self
            .roots
            .iter()
            .find(|(r, _)| text == r || text.starts_with(&format!("{r} ")))
        else {
            return Vec::new();
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive(self.spec.rng_seed, text));
        let rest = text[root.len()..].trim();
        let is_root = rest.is_empty();
        // a letter seed "root x" completes the root, not the letter
        let base = if rest.chars().count() == 1 { root.as_str() } else { text };
        if !is_root && rng.random::<f64>() >= self.spec.depth_decay {
            return Vec::new();
        }
        let inherited = if base.len() > root.len() {
            base.rsplit(' ').next().and_then(|t| self.topic_of(t))
        } else {
            None
        };
        let used: HashSet<&str> = base.split(' ').collect();
        let mut picked: Vec<&str> = Vec::with_capacity(self.spec.branching);
        let mut attempts = 0;
        while picked.len() < self.spec.branching && attempts < 50 * self.spec.branching {
            attempts += 1;
            let topic = inherited.unwrap_or_else(|| sample_index(mix, rng.random::<f64>()));
            let lex = &self.lexicons[topic];
            let term = lex[rng.random_range(0..lex.len())].as_str();
            if !used.contains(term) && !picked.contains(&term) {
                picked.push(term);
            }
        }
        picked.into_iter().map(|t| format!("{base} {t}")).collect()
    }
}

impl SuggestionSource for SyntheticSource {
    fn fetch(&self, query: &Query) -> Result<SuggestionList, SourceError> {
        Ok(SuggestionList::new(
            query.clone(),
            self.generate(&fold(query.text())),
        ))
    }
}

fn sample_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w / total;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

fn perturb(base: &[f64], sd: f64, seed: u64) -> Vec<f64> {
    if sd == 0.0 {
        return base.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sd).expect("sd validated");
    let mut out: Vec<f64> = base
        .iter()
        .map(|p| if *p > 0.0 { (p + noise.sample(&mut rng)).max(1e-3) } else { 0.0 })
        .collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// Word vectors for every lexicon term: one random unit-norm centre per
/// topic plus isotropic Gaussian jitter of standard deviation `spread`.
pub fn synthetic_vector_table(
    spec: &SyntheticBiasSpec,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Vec<(String, Vec<f32>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let jitter = Normal::new(0.0, spread.max(0.0)).expect("valid normal");
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for terms in spec.vocabulary.values() {
        let mut centre: Vec<f64> = (0..dim).map(|_| unit.sample(&mut rng)).collect();
        let norm = centre.iter().map(|v| v * v).sum::<f64>().sqrt();
        centre.iter_mut().for_each(|v| *v /= norm);
        for t in terms {
            let t = t.to_lowercase();
            let v: Vec<f32> = centre
                .iter()
                .map(|c| (c + jitter.sample(&mut rng)) as f32)
                .collect();
            if seen.insert(t.clone()) {
                out.push((t, v));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lexicon(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn spec_two_topics(roots: &[&str]) -> SyntheticBiasSpec {
        let mut vocabulary = BTreeMap::new();
        vocabulary.insert("personal".to_string(), lexicon("pers", 50));
        vocabulary.insert("politics".to_string(), lexicon("pol", 50));
        let mut mixtures = BTreeMap::new();
        mixtures.insert(
            "a".to_string(),
            BTreeMap::from([("politics".to_string(), 0.6), ("personal".to_string(), 0.4)]),
        );
        SyntheticBiasSpec {
            mixtures,
            vocabulary,
            roots: roots.iter().map(|r| (r.to_string(), "a".to_string())).collect(),
            branching: 10,
            depth_decay: 0.5,
            mixture_noise_sd: 0.0,
            rng_seed: 11,
        }
    }

    fn q(s: &str) -> Query {
        Query::new(s, "de").unwrap()
    }

    #[test]
    fn single_topic_full_branching() {
        let mut vocabulary = BTreeMap::new();
        vocabulary.insert("t".to_string(), lexicon("w", 20));
        let spec = SyntheticBiasSpec {
            mixtures: BTreeMap::from([(
                "g".to_string(),
                BTreeMap::from([("t".to_string(), 1.0)]),
            )]),
            vocabulary,
            roots: BTreeMap::from([("root".to_string(), "g".to_string())]),
            branching: 3,
            depth_decay: 1.0,
            mixture_noise_sd: 0.0,
            rng_seed: 1,
        };
        let src = SyntheticSource::new(spec).unwrap();
        for query in ["root", "root a", "root w1", "root w1 w2"] {
            let list = src.fetch(&q(query)).unwrap();
            assert_eq!(list.len(), 3, "{query}");
            for s in list.suggestions() {
                let last = s.rsplit(' ').next().unwrap();
                assert_eq!(src.topic_of(last), Some(0));
            }
        }
        let deep = src.fetch(&q("root w1")).unwrap();
        assert!(deep.suggestions().iter().all(|s| s.starts_with("root w1 ")));
        assert!(src.fetch(&q("unrelated")).unwrap().is_empty());
    }

    #[test]
    fn same_seed_same_output() {
        let a = SyntheticSource::new(spec_two_topics(&["r"])).unwrap();
        let b = SyntheticSource::new(spec_two_topics(&["r"])).unwrap();
        for query in ["r", "r b", "r pol3", "r pers7 pers1"] {
            assert_eq!(
                a.fetch(&q(query)).unwrap().suggestions(),
                b.fetch(&q(query)).unwrap().suggestions()
            );
        }
    }

    #[test]
    fn mixture_frequency_matches_plant() {
        // 1,000 roots x 10 root-level suggestions = 10,000 generated terms
        let roots: Vec<String> = (0..1000).map(|i| format!("root{i}")).collect();
        let refs: Vec<&str> = roots.iter().map(String::as_str).collect();
        let src = SyntheticSource::new(spec_two_topics(&refs)).unwrap();
        let politics = src.topics().iter().position(|t| t == "politics").unwrap();
        let (mut hits, mut total) = (0usize, 0usize);
        for r in &roots {
            for s in src.fetch(&q(r)).unwrap().suggestions() {
                total += 1;
                if src.topic_of(s.rsplit(' ').next().unwrap()) == Some(politics) {
                    hits += 1;
                }
            }
        }
        assert_eq!(total, 10_000);
        let share = hits as f64 / total as f64;
        assert!((share - 0.6).abs() <= 0.02, "share {share}");
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = spec_two_topics(&["r"]);
        s.branching = 11;
        assert!(SyntheticSource::new(s).is_err());
        let mut s = spec_two_topics(&["r"]);
        s.mixtures.get_mut("a").unwrap().insert("politics".into(), 0.7);
        assert!(SyntheticSource::new(s).is_err());
        let mut s = spec_two_topics(&["r"]);
        s.roots.insert("x".into(), "missing".into());
        assert!(SyntheticSource::new(s).is_err());
    }

    #[test]
    fn noise_perturbs_but_normalises() {
        let mut s = spec_two_topics(&["r1", "r2"]);
        s.mixture_noise_sd = 0.05;
        let src = SyntheticSource::new(s).unwrap();
        let m1 = src.root_mixture("r1").unwrap();
        let m2 = src.root_mixture("r2").unwrap();
        assert!((m1.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_ne!(m1, m2);
    }

    #[test]
    fn vector_table_covers_vocabulary() {
        let spec = spec_two_topics(&["r"]);
        let table = synthetic_vector_table(&spec, 8, 0.05, 3);
        assert_eq!(table.len(), 100);
        assert!(table.iter().all(|(_, v)| v.len() == 8));
    }
}
