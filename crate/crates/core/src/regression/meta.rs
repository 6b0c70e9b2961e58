//! Politician metadata, the appendix-style CSV, and dummy encoding.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RegressionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Party {
    #[serde(rename = "SPD")]
    Spd,
    #[serde(rename = "CDU")]
    Cdu,
    #[serde(rename = "CSU")]
    Csu,
    #[serde(rename = "FDP")]
    Fdp,
    #[serde(rename = "AfD")]
    Afd,
    Left,
    Greens,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolRole {
    /// Federal minister of the 2021 cabinet.
    Minister2021,
    /// Federal minister of the 2017 cabinet.
    Minister2017,
    PrimeMinister,
    PartyLeader,
}

fn norm(s: &str) -> String {
    s.trim()
        .to_lowercase()
        .chars()
        .map(|c| if c == ' ' || c == '-' { '_' } else { c })
        .collect()
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Female, Gender::Male];

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
        }
    }
}

impl Party {
    pub const ALL: [Party; 7] = [
        Party::Spd,
        Party::Cdu,
        Party::Csu,
        Party::Fdp,
        Party::Afd,
        Party::Left,
        Party::Greens,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Party::Spd => "SPD",
            Party::Cdu => "CDU",
            Party::Csu => "CSU",
            Party::Fdp => "FDP",
            Party::Afd => "AfD",
            Party::Left => "Left",
            Party::Greens => "Greens",
        }
    }
}

impl PolRole {
    pub const ALL: [PolRole; 4] = [
        PolRole::Minister2021,
        PolRole::Minister2017,
        PolRole::PrimeMinister,
        PolRole::PartyLeader,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolRole::Minister2021 => "minister_2021",
            PolRole::Minister2017 => "minister_2017",
            PolRole::PrimeMinister => "prime_minister",
            PolRole::PartyLeader => "party_leader",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PolRole::Minister2021 => "Minister",
            PolRole::Minister2017 => "Former Minister",
            PolRole::PrimeMinister => "Prime Minister",
            PolRole::PartyLeader => "Party Leader",
        }
    }
}

impl FromStr for Gender {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match norm(s).as_str() {
            "female" | "f" | "w" | "weiblich" => Ok(Gender::Female),
            "male" | "m" | "männlich" | "maennlich" => Ok(Gender::Male),
            _ => Err(()),
        }
    }
}

impl FromStr for Party {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match norm(s).as_str() {
            "spd" => Ok(Party::Spd),
            "cdu" => Ok(Party::Cdu),
            "csu" => Ok(Party::Csu),
            "fdp" => Ok(Party::Fdp),
            "afd" => Ok(Party::Afd),
            "left" | "the_left" | "linke" | "die_linke" => Ok(Party::Left),
            "greens" | "green" | "grüne" | "gruene" | "die_grünen" | "bündnis_90/die_grünen"
            | "alliance_90/the_greens" => Ok(Party::Greens),
            _ => Err(()),
        }
    }
}

impl FromStr for PolRole {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match norm(s).as_str() {
            "minister_2021" | "minister" | "federal_minister" => Ok(PolRole::Minister2021),
            "minister_2017" | "former_minister" => Ok(PolRole::Minister2017),
            "prime_minister" | "ministerpräsident" | "ministerpraesident" => Ok(PolRole::PrimeMinister),
            "party_leader" | "party_chair" => Ok(PolRole::PartyLeader),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for PolRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoliticianMeta {
    pub name: String,
    pub gender: Gender,
    pub party: Party,
    pub year_of_birth: i32,
    pub pol_role: PolRole,
}

pub const YEAR_RANGE: std::ops::RangeInclusive<i32> = 1900..=2010;

/// One row of the metadata CSV. The suggestion count and cluster columns
/// are outputs of an audit and may be absent on input.
#[derive(Debug, Clone, PartialEq)]
pub struct MetadataRow {
    pub meta: PoliticianMeta,
    pub suggestions: Option<usize>,
    pub clusters: Vec<Option<f64>>,
}

const REQUIRED: [&str; 5] = ["name", "gender", "party", "year-of-birth", "pol-role"];

fn parse_category<T: FromStr>(
    raw: &str,
    politician: &str,
    attribute: &'static str,
) -> Result<T, RegressionError> {
    raw.parse().map_err(|_| RegressionError::UnknownCategory {
        politician: politician.to_string(),
        attribute,
        value: raw.to_string(),
    })
}

pub fn read_metadata_csv(path: impl AsRef<Path>) -> Result<Vec<MetadataRow>, RegressionError> {
    let text = std::fs::read_to_string(path)?;
    parse_metadata_csv(&text)
}

pub fn parse_metadata_csv(text: &str) -> Result<Vec<MetadataRow>, RegressionError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(REQUIRED) {
        *slot = col(name).ok_or_else(|| RegressionError::MissingColumn(name.to_string()))?;
    }
    let sugg = col("google-suggestions");
    let mut cluster_cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("cluster-")?.parse().ok().map(|c| (c, i)))
        .collect();
    cluster_cols.sort();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or("");
        let name = get(idx[0]).to_string();
        let year_raw = get(idx[3]);
        let year_of_birth: i32 = year_raw.parse().map_err(|_| RegressionError::UnknownCategory {
            politician: name.clone(),
            attribute: "year-of-birth",
            value: year_raw.to_string(),
        })?;
        if !YEAR_RANGE.contains(&year_of_birth) {
            return Err(RegressionError::ImplausibleYear {
                politician: name,
                year: year_of_birth,
            });
        }
        let meta = PoliticianMeta {
            gender: parse_category(get(idx[1]), &name, "gender")?,
            party: parse_category(get(idx[2]), &name, "party")?,
            pol_role: parse_category(get(idx[4]), &name, "pol-role")?,
            year_of_birth,
            name,
        };
        let number = |i: usize| -> Result<Option<f64>, RegressionError> {
            let raw = get(i);
            if raw.is_empty() {
                return Ok(None);
            }
            raw.parse().map(Some).map_err(|_| RegressionError::UnknownCategory {
                politician: meta.name.clone(),
                attribute: "numeric column",
                value: raw.to_string(),
            })
        };
        let suggestions = match sugg {
            Some(i) => number(i)?.map(|v| v as usize),
            None => None,
        };
        let clusters = cluster_cols
            .iter()
            .map(|&(_, i)| number(i))
            .collect::<Result<_, _>>()?;
        rows.push(MetadataRow {
            meta,
            suggestions,
            clusters,
        });
    }
    Ok(rows)
}

/// Writes the appendix layout; `clusters` may have any width k.
pub fn write_metadata_csv(rows: &[MetadataRow], k: usize) -> Result<String, RegressionError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["name".to_string(), "google-suggestions".to_string()];
    header.extend((0..k).map(|c| format!("cluster-{c}")));
    header.extend(["gender", "party", "year-of-birth", "pol-role"].map(String::from));
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![
            row.meta.name.clone(),
            row.suggestions.map(|s| s.to_string()).unwrap_or_default(),
        ];
        for c in 0..k {
            rec.push(
                row.clusters
                    .get(c)
                    .copied()
                    .flatten()
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
            );
        }
        rec.extend([
            row.meta.gender.to_string(),
            row.meta.party.to_string(),
            row.meta.year_of_birth.to_string(),
            row.meta.pol_role.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| RegressionError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits UTF-8"))
}

/// Base category per attribute; the base gets no column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DummyScheme {
    pub gender: Gender,
    pub party: Party,
    pub role: PolRole,
    pub include_age: bool,
}

impl Default for DummyScheme {
    fn default() -> Self {
        Self {
            gender: Gender::Male,
            party: Party::Spd,
            role: PolRole::PrimeMinister,
            include_age: true,
        }
    }
}

/// A predictor column with a machine name and a table label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub name: String,
    pub label: String,
    pub values: Vec<f64>,
}

/// Dummy block for `metas` in attribute order gender, party, role, age.
pub fn dummy_encode(metas: &[PoliticianMeta], scheme: &DummyScheme) -> Vec<Predictor> {
    let mut out = Vec::new();
    let mut push = |name: String, label: String, f: &dyn Fn(&PoliticianMeta) -> bool| {
        out.push(Predictor {
            name,
            label,
            values: metas.iter().map(|m| if f(m) { 1.0 } else { 0.0 }).collect(),
        });
    };
    for g in Gender::ALL.into_iter().filter(|g| *g != scheme.gender) {
        push(format!("gender:{g}"), format!("Gender: {g}"), &|m| m.gender == g);
    }
    for p in Party::ALL.into_iter().filter(|p| *p != scheme.party) {
        push(format!("party:{p}"), p.to_string(), &|m| m.party == p);
    }
    for r in PolRole::ALL.into_iter().filter(|r| *r != scheme.role) {
        push(format!("role:{r}"), r.label().to_string(), &|m| m.pol_role == r);
    }
    if scheme.include_age {
        out.push(Predictor {
            name: "year_of_birth".into(),
            label: "Year of birth".into(),
            values: metas.iter().map(|m| m.year_of_birth as f64).collect(),
        });
    }
    out
}
