//! CSV, JSON and plain-text renderings of a [`BiasReport`].

use serde::{Deserialize, Serialize};

use super::audit::{BiasReport, BiasRow, N_SUGGESTIONS};
use super::RegressionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableStyle {
    /// Effect (β) and p per dependent.
    #[default]
    Plain,
    /// Signed R² and p per dependent.
    RSquared,
}

pub fn to_csv(rows: &[BiasRow]) -> Result<String, RegressionError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "attribute",
            "label",
            "dependent",
            "effect",
            "intercept",
            "stderr",
            "t",
            "p_value",
            "r_squared",
            "signed_r_squared",
            "model_r_squared",
            "n",
            "dof",
            "significant",
        ])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| RegressionError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits UTF-8"))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<BiasRow>, RegressionError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(RegressionError::from)
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    #[serde(flatten)]
    report: BiasReport,
}

pub fn to_json(report: &BiasReport, config_hash: Option<&str>) -> String {
    let file = ReportFile {
        config_hash: config_hash.map(str::to_string),
        report: report.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("report serializes");
    s.push('\n');
    s
}

/// Returns the report and the config hash it was written with.
pub fn from_json(text: &str) -> Result<(BiasReport, Option<String>), RegressionError> {
    let file: ReportFile = serde_json::from_str(text)?;
    Ok((file.report, file.config_hash))
}

/// Three decimals, trailing zeros trimmed.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn dependent_title(dep: &str) -> String {
    match dep.strip_prefix("cluster-").and_then(|c| c.parse::<usize>().ok()) {
        Some(c) => format!("Cluster {}", c + 1),
        None if dep == N_SUGGESTIONS => "Number of Suggestions".to_string(),
        None => dep.to_string(),
    }
}

fn pad(s: &str, w: usize) -> String {
    let n = s.chars().count();
    format!("{s}{}", " ".repeat(w.saturating_sub(n)))
}

/// Attribute rows by dependent columns, each cell a value/p pair with a
/// `*` on significant entries. With `only_significant`, attributes
/// without any significant cell are left out.
pub fn render_table(report: &BiasReport, style: TableStyle, only_significant: bool) -> String {
    let deps = report.dependents();
    let mut attributes: Vec<(&str, &str)> = Vec::new();
    for row in &report.rows {
        if !attributes.iter().any(|(a, _)| *a == row.attribute) {
            attributes.push((&row.attribute, &row.label));
        }
    }
    if only_significant {
        attributes.retain(|(a, _)| report.rows.iter().any(|r| r.attribute == *a && r.significant));
    }
    let value_head = match style {
        TableStyle::Plain => "effect",
        TableStyle::RSquared => "R2",
    };
    let cell = |attr: &str, dep: &str| -> (String, String) {
        match report.rows.iter().find(|r| r.attribute == attr && r.dependent == dep) {
            Some(r) => {
                let mark = if r.significant { "*" } else { "" };
                let v = match style {
                    TableStyle::Plain => r.effect,
                    TableStyle::RSquared => r.signed_r_squared,
                };
                (format!("{}{mark}", fmt_num(v)), format!("{}{mark}", fmt_num(r.p_value)))
            }
            None => (String::new(), String::new()),
        }
    };
    let cells: Vec<Vec<(String, String)>> = attributes
        .iter()
        .map(|(a, _)| deps.iter().map(|d| cell(a, d)).collect())
        .collect();

    let w0 = attributes
        .iter()
        .map(|(_, l)| l.chars().count())
        .max()
        .unwrap_or(0)
        .max("attribute".len());
    let mut widths = Vec::new();
    for (j, dep) in deps.iter().enumerate() {
        let w1 = cells.iter().map(|r| r[j].0.chars().count()).max().unwrap_or(0).max(value_head.len());
        let mut w2 = cells.iter().map(|r| r[j].1.chars().count()).max().unwrap_or(0).max(1);
        let title = dependent_title(dep).chars().count();
        if w1 + 2 + w2 < title {
            w2 = title - w1 - 2;
        }
        widths.push((w1, w2));
    }

    let mut lines = Vec::new();
    let mut head1 = pad("", w0);
    let mut head2 = pad("attribute", w0);
    let mut rule = "-".repeat(w0);
    for (dep, (w1, w2)) in deps.iter().zip(&widths) {
        head1 += &format!(" | {}", pad(&dependent_title(dep), w1 + 2 + w2));
        head2 += &format!(" | {}  {}", pad(value_head, *w1), pad("p", *w2));
        rule += &format!("-+-{}", "-".repeat(w1 + 2 + w2));
    }
    lines.push(head1);
    lines.push(head2);
    lines.push(rule);
    for ((_, label), row) in attributes.iter().zip(&cells) {
        let mut line = pad(label, w0);
        for ((v, p), (w1, w2)) in row.iter().zip(&widths) {
            line += &format!(" | {}  {}", pad(v, *w1), pad(p, *w2));
        }
        lines.push(line);
    }
    let mut footer = format!("* p <= {}", report.threshold);
    if report.bonferroni {
        footer += &format!(" (Bonferroni, alpha {} over {} tests)", report.alpha, report.rows.len());
    }
    lines.push(footer);
    let mut out: String = lines
        .iter()
        .map(|l| l.trim_end())
        .collect::<Vec<_>>()
        .join("\n");
    out.push('\n');
    out
}
