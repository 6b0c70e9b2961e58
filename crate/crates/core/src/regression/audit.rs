//! Cluster shares per politician and the dummy-variable bias regressions.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::meta::{dummy_encode, DummyScheme, MetadataRow, PoliticianMeta, Predictor};
use super::ols::{ols, with_intercept};
use super::RegressionError;
use crate::preprocess::AuditCorpus;

pub const N_SUGGESTIONS: &str = "n_suggestions";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareVector {
    pub metadata_key: String,
    pub shares: Vec<f64>,
    pub n_suggestions: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ShareTable {
    pub shares: Vec<ShareVector>,
    /// Politicians left without any clustered suggestion.
    pub empty: Vec<String>,
}

/// Shares of each politician's unique clustered suggestions per cluster.
/// `assignments` maps suggestion id (stripped text) to cluster.
pub fn compute_shares(
    corpus: &AuditCorpus,
    assignments: &BTreeMap<String, usize>,
    k: usize,
) -> Result<ShareTable, RegressionError> {
    let known: BTreeSet<&str> = corpus
        .per_root
        .values()
        .flat_map(|m| m.keys().map(String::as_str))
        .collect();
    if let Some(orphan) = assignments.keys().find(|id| !known.contains(id.as_str())) {
        return Err(RegressionError::OrphanSuggestion(orphan.clone()));
    }
    if let Some((id, c)) = assignments.iter().find(|(_, c)| **c >= k) {
        return Err(RegressionError::ClusterOutOfRange {
            suggestion: id.clone(),
            cluster: *c,
            k,
        });
    }
    let mut table = ShareTable::default();
    for (key, suggestions) in &corpus.per_root {
        let mut counts = vec![0usize; k];
        for id in suggestions.keys() {
            if let Some(&c) = assignments.get(id) {
                counts[c] += 1;
            }
        }
        let n: usize = counts.iter().sum();
        if n == 0 {
            table.empty.push(key.clone());
            continue;
        }
        table.shares.push(ShareVector {
            metadata_key: key.clone(),
            shares: counts.iter().map(|&c| c as f64 / n as f64).collect(),
            n_suggestions: n,
        });
    }
    Ok(table)
}

/// Shares taken from the cluster and suggestion-count columns of a
/// metadata file. Cluster values are normalised, so counts, fractions and
/// percentages all work. Rows with missing values are skipped.
pub fn shares_from_metadata(rows: &[MetadataRow]) -> Vec<ShareVector> {
    rows.iter()
        .filter_map(|r| {
            let values: Vec<f64> = r.clusters.iter().copied().collect::<Option<_>>()?;
            let n = r.suggestions?;
            let total: f64 = values.iter().sum();
            if values.is_empty() || total <= 0.0 {
                return None;
            }
            Some(ShareVector {
                metadata_key: r.meta.name.clone(),
                shares: values.iter().map(|v| v / total).collect(),
                n_suggestions: n,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditMode {
    /// One regression per (dummy, dependent) pair.
    #[default]
    Univariate,
    /// All dummies jointly per dependent.
    Multivariate,
}

impl FromStr for AuditMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "univariate" => Ok(AuditMode::Univariate),
            "multivariate" => Ok(AuditMode::Multivariate),
            other => Err(format!("unknown mode {other:?} (univariate|multivariate)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    pub alpha: f64,
    pub mode: AuditMode,
    pub scheme: DummyScheme,
    /// Divides alpha by the number of tests. Off unless asked for.
    pub bonferroni: bool,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            mode: AuditMode::Univariate,
            scheme: DummyScheme::default(),
            bonferroni: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    /// Predictor name, e.g. `gender:female`.
    pub attribute: String,
    /// Table label, e.g. `Gender: female`.
    pub label: String,
    /// `cluster-<c>` (0-based) or `n_suggestions`.
    pub dependent: String,
    pub effect: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub t: f64,
    pub p_value: f64,
    /// R² of the predictor on its own.
    pub r_squared: f64,
    /// `r_squared` carrying the sign of `effect`.
    pub signed_r_squared: f64,
    /// R² of the model the effect was estimated in.
    pub model_r_squared: f64,
    pub n: usize,
    pub dof: usize,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub mode: AuditMode,
    pub alpha: f64,
    pub bonferroni: bool,
    /// p-value at or below which a row is significant.
    pub threshold: f64,
    pub n: usize,
    pub k: usize,
    /// Politicians with shares but no metadata are an error; these had
    /// metadata but no shares.
    pub excluded: Vec<String>,
    /// Predictors without variation in the sample.
    pub skipped_predictors: Vec<String>,
    pub rows: Vec<BiasRow>,
}

impl BiasReport {
    pub fn dependents(&self) -> Vec<String> {
        let mut out: Vec<String> = (0..self.k).map(|c| format!("cluster-{c}")).collect();
        out.push(N_SUGGESTIONS.to_string());
        out
    }
}

fn signed(r2: f64, effect: f64) -> f64 {
    if effect < 0.0 {
        -r2
    } else {
        r2
    }
}

fn simple_fit(
    pred: &Predictor,
    y: &[f64],
) -> Result<super::ols::OlsFit, RegressionError> {
    let (cols, names) = with_intercept(std::slice::from_ref(&pred.values), std::slice::from_ref(&pred.name), y.len());
    ols(&cols, &names, y)
}

/// Runs the bias regressions. Shares and metadata are joined on the
/// politician name; metadata without shares is excluded from N.
pub fn audit(
    shares: &[ShareVector],
    metas: &[PoliticianMeta],
    options: &AuditOptions,
) -> Result<BiasReport, RegressionError> {
    if !(options.alpha > 0.0 && options.alpha <= 1.0) {
        return Err(RegressionError::InvalidAlpha(options.alpha));
    }
    let by_name: BTreeMap<&str, &PoliticianMeta> = metas.iter().map(|m| (m.name.as_str(), m)).collect();
    let mut joined = Vec::with_capacity(shares.len());
    for s in shares {
        let meta = by_name
            .get(s.metadata_key.as_str())
            .ok_or_else(|| RegressionError::MissingMeta(s.metadata_key.clone()))?;
        joined.push((*meta).clone());
    }
    let present: BTreeSet<&str> = shares.iter().map(|s| s.metadata_key.as_str()).collect();
    let excluded: Vec<String> = metas
        .iter()
        .filter(|m| !present.contains(m.name.as_str()))
        .map(|m| m.name.clone())
        .collect();
    let k = shares.first().map_or(0, |s| s.shares.len());
    if let Some(s) = shares.iter().find(|s| s.shares.len() != k) {
        return Err(RegressionError::LengthMismatch {
            what: "share vector",
            expected: k,
            found: s.shares.len(),
        });
    }

    let mut dependents: Vec<(String, Vec<f64>)> = (0..k)
        .map(|c| (format!("cluster-{c}"), shares.iter().map(|s| s.shares[c]).collect()))
        .collect();
    dependents.push((
        N_SUGGESTIONS.to_string(),
        shares.iter().map(|s| s.n_suggestions as f64).collect(),
    ));

    let (predictors, skipped): (Vec<Predictor>, Vec<Predictor>) = dummy_encode(&joined, &options.scheme)
        .into_iter()
        .partition(|p| p.values.iter().any(|v| *v != p.values[0]));
    let skipped_predictors: Vec<String> = skipped.into_iter().map(|p| p.name).collect();
    if !skipped_predictors.is_empty() {
        info!("predictors without variation skipped: {}", skipped_predictors.join(", "));
    }

    let per_dependent: Vec<Vec<BiasRow>> = dependents
        .par_iter()
        .map(|(dep, y)| -> Result<Vec<BiasRow>, RegressionError> {
            let joint = match options.mode {
                AuditMode::Univariate => None,
                AuditMode::Multivariate => {
                    let values: Vec<Vec<f64>> = predictors.iter().map(|p| p.values.clone()).collect();
                    let names: Vec<String> = predictors.iter().map(|p| p.name.clone()).collect();
                    let (cols, names) = with_intercept(&values, &names, y.len());
                    Some(ols(&cols, &names, y)?)
                }
            };
            predictors
                .par_iter()
                .enumerate()
                .map(|(i, pred)| {
                    let single = simple_fit(pred, y)?;
                    let fit = joint.as_ref().unwrap_or(&single);
                    let j = if joint.is_some() { i + 1 } else { 1 };
                    let effect = fit.coefficients[j];
                    Ok(BiasRow {
                        attribute: pred.name.clone(),
                        label: pred.label.clone(),
                        dependent: dep.clone(),
                        effect,
                        intercept: fit.coefficients[0],
                        stderr: fit.stderr[j],
                        t: fit.t[j],
                        p_value: fit.p[j],
                        r_squared: single.r_squared,
                        signed_r_squared: signed(single.r_squared, effect),
                        model_r_squared: fit.r_squared,
                        n: fit.n,
                        dof: fit.dof,
                        significant: false,
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    // attribute-major order: one table row per attribute
    let mut rows = Vec::new();
    for i in 0..predictors.len() {
        for dep_rows in &per_dependent {
            rows.push(dep_rows[i].clone());
        }
    }
    let threshold = if options.bonferroni && !rows.is_empty() {
        options.alpha / rows.len() as f64
    } else {
        options.alpha
    };
    for row in &mut rows {
        row.significant = row.p_value <= threshold;
    }
    Ok(BiasReport {
        mode: options.mode,
        alpha: options.alpha,
        bonferroni: options.bonferroni,
        threshold,
        n: shares.len(),
        k,
        excluded,
        skipped_predictors,
        rows,
    })
}
