use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rai_audit::pipeline::{Pipeline, RunConfig};
use rai_audit::preprocess::{render_stage_table, StageCount};
use rai_audit::regression::AuditMode;

/// Audits search autocomplete suggestions for topical group bias.
#[derive(Parser)]
#[command(name = "rai-audit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Univariate,
    Multivariate,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Reuse finished trees and continue interrupted crawls.
    #[arg(long)]
    resume: bool,
    /// Overrides the configured regression mode.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Overrides the configured significance level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build one suggestion tree per root.
    Crawl(Common),
    /// Mark sub-trees that lost the root name.
    Prune(Common),
    /// Strip root names and stopwords, drop ambiguous roots.
    Preprocess(Common),
    /// Embed suggestions; drop those without vectors.
    Vectorize(Common),
    /// Select k and cluster the suggestion vectors.
    Cluster(Common),
    /// Compute cluster shares and run the bias regressions.
    Analyze(Common),
    /// Render CSV, JSON and text tables.
    Report(Common),
    /// All stages in order.
    Run(Common),
    /// Crawl through the configured source and save every response.
    RecordFixture {
        #[command(flatten)]
        common: Common,
        /// Fixture file to write.
        #[arg(long)]
        out: PathBuf,
    },
}

fn open(common: &Common) -> Result<Pipeline> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(m) = common.mode {
        config.mode = match m {
            Mode::Univariate => AuditMode::Univariate,
            Mode::Multivariate => AuditMode::Multivariate,
        };
    }
    if let Some(a) = common.alpha {
        config.alpha = a;
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    Pipeline::open(config).with_context(|| format!("config {}", common.config.display()))
}

fn print_stages(rows: &[StageCount]) {
    print!("{}", render_stage_table(rows));
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Crawl(c) => {
            let p = open(c)?;
            let source = p.build_source()?;
            let s = p.crawl(source.as_ref(), c.resume)?;
            println!(
                "crawled {} roots: {} requests, {} suggestions returned, {} unique",
                s.roots.len(),
                s.requests,
                s.raw_count,
                s.unique_count
            );
        }
        Command::Prune(c) => {
            let s = open(c)?.prune()?;
            println!("pruned {} suggestion nodes", s.removed_total);
        }
        Command::Preprocess(c) => print_stages(&open(c)?.preprocess()?),
        Command::Vectorize(c) => print_stages(&open(c)?.vectorize()?),
        Command::Cluster(c) => {
            let m = open(c)?.cluster()?;
            println!("k = {}, sse = {}", m.model.k, m.model.sse);
        }
        Command::Analyze(c) => {
            let r = open(c)?.analyze()?;
            let sig = r.rows.iter().filter(|r| r.significant).count();
            println!("{} regressions over {} politicians, {sig} significant", r.rows.len(), r.n);
        }
        Command::Report(c) => print!("{}", open(c)?.report()?),
        Command::Run(c) => {
            let p = open(c)?;
            let source = p.build_source()?;
            p.run(source.as_ref(), c.resume)?;
            print!("{}", std::fs::read_to_string(p.output_dir().join("report/report.txt"))?);
        }
        Command::RecordFixture { common, out } => {
            let p = open(common)?;
            let source = p.build_source()?;
            let f = p.record_fixture(source.as_ref(), out)?;
            println!("recorded {} queries to {}", f.len(), out.display());
        }
    }
    Ok(())
}
