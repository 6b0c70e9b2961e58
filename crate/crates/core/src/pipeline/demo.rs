//! Self-contained synthetic audit workspace: 54 invented politicians, a
//! planted-bias generator spec, matching word vectors, stopwords and a
//! run config.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{slug, Result};
use crate::embedding::{dump_vectors, VectorStore};
use crate::regression::meta::{write_metadata_csv, Gender, MetadataRow, Party, PolRole, PoliticianMeta};
use crate::seed::derive;
use crate::source::{fold, synthetic_vector_table, SyntheticBiasSpec};

const FEMALE: [&str; 19] = [
    "Anke", "Birte", "Carola", "Doris", "Elke", "Frauke", "Gesa", "Heike", "Inga", "Jutta",
    "Katrin", "Lena", "Maren", "Nora", "Olga", "Petra", "Ruth", "Silke", "Tanja",
];
const MALE: [&str; 35] = [
    "Achim", "Bernd", "Carsten", "Dirk", "Egon", "Falk", "Gerrit", "Harald", "Ingo", "Jens",
    "Knut", "Lutz", "Malte", "Nils", "Olaf", "Per", "Rainer", "Sven", "Timo", "Uwe", "Volker",
    "Wolf", "Xaver", "Yannick", "Zeno", "Arne", "Bodo", "Claus", "Detlef", "Eike", "Frank",
    "Gunnar", "Hauke", "Ivo", "Jost",
];
const SURNAMES: [&str; 54] = [
    "Abelt", "Brinkhaus", "Dornbusch", "Eckhoff", "Fehrmann", "Gerlitz", "Hambrecht",
    "Iserloh", "Jaschke", "Kampmann", "Lindholm", "Mertesacker", "Nolting", "Oberdorf",
    "Pahlke", "Quandtke", "Rehberg", "Schomaker", "Tiedemann", "Uhlhorn", "Vosskuhl",
    "Wendland", "Zerbst", "Ahlers", "Bremer", "Claassen", "Dittmer", "Ebeling", "Fricke",
    "Gerdes", "Harms", "Imhoff", "Janssen", "Kruse", "Lohmann", "Meinders", "Noack", "Ostendorf",
    "Peters", "Rademacher", "Stüber", "Thiele", "Ulrichs", "Vogt", "Wübbena", "Abels", "Behrens",
    "Cordes", "Dreyer", "Eilers", "Focken", "Grotjahn", "Hinrichs", "Jürgens",
];

/// Topic lexicons; none of the words occurs in a demo name.
pub const POLITICS: [&str; 30] = [
    "bundestag", "wahl", "partei", "rede", "gesetz", "koalition", "haushalt", "ministerium",
    "abstimmung", "fraktion", "debatte", "steuer", "reform", "regierung", "kabinett", "antrag",
    "ausschuss", "opposition", "wahlkampf", "programm", "interview", "pressekonferenz", "europa",
    "wirtschaft", "rente", "klima", "bildung", "verteidigung", "sozialpolitik", "parteitag",
];
pub const LOCATIONS: [&str; 30] = [
    "berlin", "hamburg", "münchen", "köln", "bremen", "dresden", "leipzig", "bonn", "kiel",
    "mainz", "potsdam", "hannover", "stuttgart", "erfurt", "schwerin", "magdeburg", "wiesbaden",
    "düsseldorf", "saarbrücken", "aachen", "bochum", "dortmund", "rostock", "freiburg", "ulm",
    "trier", "passau", "lübeck", "kassel", "jena",
];
pub const PERSONAL: [&str; 30] = [
    "frau", "mann", "kinder", "hochzeit", "scheidung", "alter", "größe", "gewicht", "haare",
    "brille", "hobby", "urlaub", "haus", "auto", "hund", "geburtstag", "familie", "eltern",
    "bruder", "schwester", "jugend", "schule", "studium", "krankheit", "vermögen", "gehalt",
    "kleidung", "instagram", "religion", "freundin",
];
/// Lexicon words deliberately left without vectors.
pub const NO_VECTOR: [&str; 2] = ["instagram", "pressekonferenz"];

pub const STOPWORDS: [&str; 12] = [
    "der", "die", "das", "und", "in", "von", "mit", "zu", "den", "ist", "im", "für",
];

#[derive(Debug, Clone, PartialEq)]
pub struct DemoOptions {
    pub seed: u64,
    /// Extra politics share for female politicians; 0 gives the null.
    pub plant: f64,
    pub mixture_noise_sd: f64,
    pub max_depth: usize,
    pub branching: usize,
    pub depth_decay: f64,
    /// `None` uses the locale default.
    pub alphabet: Option<String>,
    pub dim: usize,
    pub spread: f64,
    pub k_range: [usize; 2],
    pub n_restarts: usize,
}

impl Default for DemoOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            plant: 0.2,
            mixture_noise_sd: 0.05,
            max_depth: 3,
            branching: 4,
            depth_decay: 0.5,
            alphabet: None,
            dim: 16,
            spread: 0.05,
            k_range: [2, 6],
            n_restarts: 10,
        }
    }
}

/// 54 politicians: 19 female and 35 male; SPD 14, CDU 13, CSU 5,
/// Greens 9, FDP 6, AfD 4, Left 3; 16 current and 16 former ministers,
/// 16 prime ministers and 6 party leaders. Attributes are shuffled with a
/// fixed seed so that no dummy duplicates another.
pub fn demo_politicians() -> Vec<PoliticianMeta> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut parties: Vec<Party> = [
        (Party::Spd, 14),
        (Party::Cdu, 13),
        (Party::Csu, 5),
        (Party::Greens, 9),
        (Party::Fdp, 6),
        (Party::Afd, 4),
        (Party::Left, 3),
    ]
    .iter()
    .flat_map(|(p, n)| std::iter::repeat_n(*p, *n))
    .collect();
    parties.shuffle(&mut rng);
    let mut roles: Vec<PolRole> = [
        (PolRole::Minister2021, 16),
        (PolRole::Minister2017, 16),
        (PolRole::PrimeMinister, 16),
        (PolRole::PartyLeader, 6),
    ]
    .iter()
    .flat_map(|(r, n)| std::iter::repeat_n(*r, *n))
    .collect();
    roles.shuffle(&mut rng);
    let mut genders: Vec<Gender> = std::iter::repeat_n(Gender::Female, 19)
        .chain(std::iter::repeat_n(Gender::Male, 35))
        .collect();
    genders.shuffle(&mut rng);
    let (mut f, mut m) = (FEMALE.iter(), MALE.iter());
    (0..54)
        .map(|i| {
            let first = match genders[i] {
                Gender::Female => f.next(),
                Gender::Male => m.next(),
            }
            .expect("name lists match the gender counts");
            PoliticianMeta {
                name: format!("{first} {}", SURNAMES[i]),
                gender: genders[i],
                party: parties[i],
                year_of_birth: 1945 + ((i * 17) % 45) as i32,
                pol_role: roles[i],
            }
        })
        .collect()
}

/// Generator spec: female politicians draw politics terms `plant` more
/// often than male ones, at the expense of personal terms.
pub fn demo_spec(politicians: &[PoliticianMeta], opts: &DemoOptions) -> SyntheticBiasSpec {
    let words = |w: &[&str]| w.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let vocabulary = BTreeMap::from([
        ("politics".to_string(), words(&POLITICS)),
        ("locations".to_string(), words(&LOCATIONS)),
        ("personal".to_string(), words(&PERSONAL)),
    ]);
    let mix = |pol: f64| {
        BTreeMap::from([
            ("politics".to_string(), pol),
            ("locations".to_string(), 0.25),
            ("personal".to_string(), 0.75 - pol),
        ])
    };
    let mixtures = BTreeMap::from([
        ("female".to_string(), mix(0.35 + opts.plant)),
        ("male".to_string(), mix(0.35)),
    ]);
    SyntheticBiasSpec {
        mixtures,
        vocabulary,
        roots: politicians
            .iter()
            .map(|p| (fold(&p.name), p.gender.to_string()))
            .collect(),
        branching: opts.branching,
        depth_decay: opts.depth_decay,
        mixture_noise_sd: opts.mixture_noise_sd,
        rng_seed: 0,
    }
}

/// Writes the workspace into `dir` and returns the config path. Outputs go
/// to `dir/out`.
pub fn write_demo_workspace(dir: &Path, opts: &DemoOptions) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let politicians = demo_politicians();
    let rows: Vec<MetadataRow> = politicians
        .iter()
        .map(|m| MetadataRow {
            meta: m.clone(),
            suggestions: None,
            clusters: Vec::new(),
        })
        .collect();
    fs::write(dir.join("politicians.csv"), write_metadata_csv(&rows, 0)?)?;

    let spec = demo_spec(&politicians, opts);
    fs::write(dir.join("spec.json"), serde_json::to_string_pretty(&spec)? + "\n")?;

    let table = synthetic_vector_table(&spec, opts.dim, opts.spread, derive(opts.seed, "vectors"));
    let store = VectorStore::from_entries(
        opts.dim,
        table.into_iter().filter(|(t, _)| !NO_VECTOR.contains(&t.as_str())),
    )?;
    let mut buf = Vec::new();
    dump_vectors(&store, &mut buf)?;
    fs::write(dir.join("vectors.txt"), buf)?;
    fs::write(dir.join("stopwords.txt"), STOPWORDS.join("\n") + "\n")?;

    // one spelling variant, exercised by pruning
    let variants = dir.join("variants");
    fs::create_dir_all(&variants)?;
    let first = &politicians[0].name;
    fs::write(
        variants.join(format!("{}.txt", slug(first))),
        format!("{}\n", fold(first).replace(' ', "-")),
    )?;

    let alphabet = opts
        .alphabet
        .as_ref()
        .map(|a| format!("alphabet = {a:?}\n"))
        .unwrap_or_default();
    let config = format!(
        "roots_file = \"politicians.csv\"
variants_dir = \"variants\"
stopwords = \"stopwords.txt\"
vectors = \"vectors.txt\"
output_dir = \"out\"
seed = {seed}
max_depth = {depth}
{alphabet}k_range = [{lo}, {hi}]
alpha = 0.05

[source]
kind = \"synthetic\"
spec = \"spec.json\"

[clustering]
n_restarts = {restarts}
",
        seed = opts.seed,
        depth = opts.max_depth,
        lo = opts.k_range[0],
        hi = opts.k_range[1],
        restarts = opts.n_restarts,
    );
    let path = dir.join("config.toml");
    fs::write(&path, config)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn attribute_layout() {
        let p = demo_politicians();
        assert_eq!(p.len(), 54);
        assert_eq!(p.iter().filter(|m| m.gender == Gender::Female).count(), 19);
        assert_eq!(p.iter().filter(|m| m.party == Party::Csu).count(), 5);
        assert_eq!(p.iter().filter(|m| m.pol_role == PolRole::PartyLeader).count(), 6);
        let names: HashSet<_> = p.iter().map(|m| m.name.clone()).collect();
        assert_eq!(names.len(), 54);
        let lexicon: HashSet<&str> = POLITICS.iter().chain(&LOCATIONS).chain(&PERSONAL).copied().collect();
        assert_eq!(lexicon.len(), 90);
        for m in &p {
            for tok in fold(&m.name).split(' ') {
                assert!(!lexicon.contains(tok), "{tok}");
            }
        }
    }

    #[test]
    fn spec_validates() {
        let spec = demo_spec(&demo_politicians(), &DemoOptions::default());
        spec.validate().unwrap();
        assert_eq!(spec.roots.len(), 54);
    }
}
