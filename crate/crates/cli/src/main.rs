//! Command-line entry point: wires corpus ingestion, simulation, metrics,
//! and report emission.
//!
//! Subcommands:
//! - `simulate`: replay history under one or more recommenders and write
//!   replacement logs, quarterly outcome CSVs, and a summary table.
//! - `analyze`: historical analyses only — the authors-only vs
//!   authors-plus-reviewers risk comparison and the review workload
//!   distribution. No simulation.
//! - `synth`: generate a synthetic corpus for tests and demos.
//! - `sensitivity`: sweep the risky-file threshold `k` for a bimodal
//!   recommender, one full simulation per value.
//!
//! Options can also come from a `key = value` config file; command-line
//! flags win over file entries. All randomness flows from the single seed,
//! so reruns with the same configuration produce byte-identical outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use reviewsim_core::corpus::{
    load_corpus, parse_alias_table, AliasTable, CleanCorpus, CorpusConfig,
};
use reviewsim_core::metrics::{
    far_comparison_csv, historical_far_comparison, k_sensitivity, lorenz_csv, quarter_reports,
    quarterly_csv, sensitivity_csv, summarize, summary_csv, workload_csv, workload_distribution,
    Period,
};
use reviewsim_core::recommenders::{Recommender, RecommenderParams};
use reviewsim_core::simulator::{replacement_log_csv, replay_actual, run_simulation};
use reviewsim_core::synth::{generate, SynthSpec};

/// Default seed for bare runs; override with `--seed`.
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "reviewsim",
    version,
    about = "Repository-history replay engine for code review recommenders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run reviewer-replacement simulations and write outcome reports.
    Simulate(SimulateArgs),
    /// Run the historical analyses (no simulation).
    Analyze(AnalyzeArgs),
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Sweep the risky-file threshold k for a bimodal recommender.
    Sensitivity(SensitivityArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Commit JSONL file.
    #[arg(long)]
    commits: Option<PathBuf>,
    /// Pull-request JSONL file.
    #[arg(long)]
    prs: Option<PathBuf>,
    /// Optional alias table (JSON map of raw key to canonical key).
    #[arg(long)]
    aliases: Option<PathBuf>,
    /// Optional key = value config file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Recommender name; repeatable. Known names: authorship, revown,
    /// chrev, learn, retention, turnover, sofia, whodo, sofiawl, identity.
    #[arg(long = "recommender")]
    recommenders: Vec<String>,
    /// Replacement seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Risky-file threshold for sofia/sofiawl.
    #[arg(long)]
    k: Option<usize>,
    /// WhoDo load-balancing strength.
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Workload bucketing period: day, week, month, or quarter.
    #[arg(long)]
    period: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for commits.jsonl and prs.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    devs: Option<usize>,
    #[arg(long)]
    files: Option<usize>,
    #[arg(long)]
    quarters: Option<usize>,
    #[arg(long)]
    commits_per_quarter: Option<usize>,
    #[arg(long)]
    prs_per_quarter: Option<usize>,
    /// Probability that a PR is reviewed at all.
    #[arg(long)]
    review_rate: Option<f64>,
    /// Annual developer turnover fraction.
    #[arg(long)]
    turnover: Option<f64>,
    /// Activity/reviewer-assignment skew exponent.
    #[arg(long)]
    skew: Option<f64>,
    #[arg(long)]
    max_reviewers: Option<usize>,
}

#[derive(Args)]
struct SensitivityArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Bimodal recommender to sweep: sofia or sofiawl.
    #[arg(long)]
    recommender: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Lowest k (default 1).
    #[arg(long)]
    k_min: Option<usize>,
    /// Highest k (default 8).
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
}

/// Values read from a `key = value` config file. Lines starting with `#`
/// are comments.
#[derive(Default)]
struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected key = value", path.display(), idx + 1);
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key {key}: {e}")),
        }
    }
}

fn resolve_recommenders(flag: &[String], file: &FileConfig) -> Result<Vec<Recommender>> {
    let names: Vec<String> = if !flag.is_empty() {
        flag.to_vec()
    } else if let Some(raw) = file.get("recommender") {
        raw.split(',').map(|s| s.trim().to_string()).collect()
    } else {
        Vec::new()
    };
    if names.is_empty() {
        bail!("no recommender given; pass --recommender at least once");
    }
    names
        .iter()
        .map(|name| {
            Recommender::from_name(name)
                .ok_or_else(|| anyhow::anyhow!("unknown recommender {name:?}"))
        })
        .collect()
}

fn load_inputs(args: &CorpusArgs, file: &FileConfig) -> Result<CleanCorpus> {
    let commits = args
        .commits
        .clone()
        .or_else(|| file.get("commits").map(PathBuf::from))
        .context("no commit file given; pass --commits")?;
    let prs = args
        .prs
        .clone()
        .or_else(|| file.get("prs").map(PathBuf::from))
        .context("no PR file given; pass --prs")?;
    let aliases: AliasTable = match args
        .aliases
        .clone()
        .or_else(|| file.get("aliases").map(PathBuf::from))
    {
        Some(path) => {
            let text = fs::read_to_string(&path)
                .with_context(|| format!("reading alias table {}", path.display()))?;
            parse_alias_table(&text)?
        }
        None => AliasTable::new(),
    };
    let config = CorpusConfig::default();
    let corpus = load_corpus(&commits, &prs, &aliases, &config)?;
    if corpus.is_empty() {
        bail!("corpus is empty after cleaning; nothing to analyze");
    }
    Ok(corpus)
}

fn out_dir(args: &CorpusArgs, file: &FileConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| file.get("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn params_from(
    k: Option<usize>,
    theta: Option<f64>,
    file: &FileConfig,
) -> Result<RecommenderParams> {
    let mut params = RecommenderParams::default();
    if let Some(k) = k.or(file.parse("k")?) {
        params.k = k;
    }
    if let Some(theta) = theta.or(file.parse("theta")?) {
        if !(0.0..=1.0).contains(&theta) {
            bail!("theta must be in [0, 1], got {theta}");
        }
        params.theta = theta;
    }
    Ok(params)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn fmt_cell(value: Option<f64>) -> String {
    value.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let file = FileConfig::load(args.corpus.config.as_deref())?;
    let recommenders = resolve_recommenders(&args.recommenders, &file)?;
    let seed = args.seed.or(file.parse("seed")?).unwrap_or(DEFAULT_SEED);
    let params = params_from(args.k, args.theta, &file)?;
    let corpus = load_inputs(&args.corpus, &file)?;
    let dir = out_dir(&args.corpus, &file);

    // Compute everything before writing, so failures leave no partial output.
    let mut artifacts: Vec<(String, String)> = Vec::new();
    let mut summaries = Vec::new();
    for recommender in &recommenders {
        let output = run_simulation(&corpus, *recommender, &params, seed)?;
        let reports = quarter_reports(&output);
        let summary = summarize(&output, &reports);
        artifacts.push((
            format!("replacements_{}.csv", recommender.name()),
            replacement_log_csv(&output.run.replacement_log),
        ));
        artifacts.push((
            format!("quarterly_{}.csv", recommender.name()),
            quarterly_csv(recommender.name(), &reports),
        ));
        summaries.push(summary);
    }
    artifacts.push(("summary.csv".to_string(), summary_csv(&summaries)));

    for (name, contents) in &artifacts {
        write_file(&dir, name, contents)?;
    }

    println!(
        "seed {seed}, {} replaced PRs per run",
        summaries.first().map_or(0, |s| s.replaced_prs)
    );
    println!(
        "{:<12} {:>6} {:>12} {:>12} {:>12} {:>10}",
        "recommender", "mrr", "d_expertise", "d_giniwork", "d_far", "fallback"
    );
    for s in &summaries {
        println!(
            "{:<12} {:>6} {:>12} {:>12} {:>12} {:>9.1}%",
            s.recommender,
            fmt_cell(s.mrr),
            fmt_cell(s.d_expertise),
            fmt_cell(s.d_gini_work),
            fmt_cell(s.d_far),
            s.fallback_fraction * 100.0,
        );
    }
    println!("reports written to {}", dir.display());
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let file = FileConfig::load(args.corpus.config.as_deref())?;
    let period_name = args
        .period
        .clone()
        .or_else(|| file.get("period").map(str::to_string))
        .unwrap_or_else(|| "month".to_string());
    let period = Period::from_name(&period_name)
        .ok_or_else(|| anyhow::anyhow!("unknown period {period_name:?}"))?;
    let corpus = load_inputs(&args.corpus, &file)?;
    let dir = out_dir(&args.corpus, &file);

    let rows = historical_far_comparison(&corpus)?;
    let workload = workload_distribution(&corpus, period)?;
    let replay = replay_actual(&corpus)?;
    let knower_counts = replay.run.actual_ledger.export_knower_counts(&replay.grid);

    write_file(&dir, "rq1_far_comparison.csv", &far_comparison_csv(&rows))?;
    write_file(&dir, "workload.csv", &workload_csv(&workload))?;
    write_file(&dir, "lorenz.csv", &lorenz_csv(&workload))?;
    write_file(&dir, "knower_counts.csv", &knower_counts)?;

    println!(
        "workload per {}: median {}, p95 {}, mean {:.2}",
        period.name(),
        workload.median,
        workload.p95,
        workload.mean
    );
    if let Some(share) = workload.top_20_share {
        println!("top 20% of reviewers do {:.1}% of reviews", share * 100.0);
    }
    if !rows.is_empty() {
        let mean_author: f64 = rows
            .iter()
            .map(|r| r.far_author.total() as f64)
            .sum::<f64>()
            / rows.len() as f64;
        let mean_all: f64 =
            rows.iter().map(|r| r.far.total() as f64).sum::<f64>() / rows.len() as f64;
        println!(
            "files at risk, mean per quarter: authors-only {mean_author:.1}, authors+reviewers {mean_all:.1}"
        );
    }
    println!("reports written to {}", dir.display());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let seed = args.seed.or(file.parse("seed")?).unwrap_or(DEFAULT_SEED);
    let defaults = SynthSpec::default();
    let spec = SynthSpec {
        devs: args.devs.or(file.parse("devs")?).unwrap_or(defaults.devs),
        files: args
            .files
            .or(file.parse("files")?)
            .unwrap_or(defaults.files),
        quarters: args
            .quarters
            .or(file.parse("quarters")?)
            .unwrap_or(defaults.quarters),
        commits_per_quarter: args
            .commits_per_quarter
            .or(file.parse("commits_per_quarter")?)
            .unwrap_or(defaults.commits_per_quarter),
        prs_per_quarter: args
            .prs_per_quarter
            .or(file.parse("prs_per_quarter")?)
            .unwrap_or(defaults.prs_per_quarter),
        review_rate: args
            .review_rate
            .or(file.parse("review_rate")?)
            .unwrap_or(defaults.review_rate),
        turnover: args
            .turnover
            .or(file.parse("turnover")?)
            .unwrap_or(defaults.turnover),
        skew: args.skew.or(file.parse("skew")?).unwrap_or(defaults.skew),
        max_reviewers: args
            .max_reviewers
            .or(file.parse("max_reviewers")?)
            .unwrap_or(defaults.max_reviewers),
    };
    let dir = args
        .out
        .or_else(|| file.get("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let corpus = generate(&spec, seed)?;
    write_file(&dir, "commits.jsonl", &corpus.commits_jsonl)?;
    write_file(&dir, "prs.jsonl", &corpus.prs_jsonl)?;
    println!(
        "generated {} commit lines and {} PR lines in {}",
        corpus.commits_jsonl.lines().count(),
        corpus.prs_jsonl.lines().count(),
        dir.display()
    );
    Ok(())
}

fn cmd_sensitivity(args: SensitivityArgs) -> Result<()> {
    let file = FileConfig::load(args.corpus.config.as_deref())?;
    let name = args
        .recommender
        .clone()
        .or_else(|| file.get("recommender").map(str::to_string))
        .unwrap_or_else(|| "sofiawl".to_string());
    let recommender = match Recommender::from_name(&name) {
        Some(r @ (Recommender::Sofia | Recommender::SofiaWl)) => r,
        Some(_) => bail!("sensitivity sweeps need a bimodal recommender (sofia or sofiawl)"),
        None => bail!("unknown recommender {name:?}"),
    };
    let seed = args.seed.or(file.parse("seed")?).unwrap_or(DEFAULT_SEED);
    let k_min = args.k_min.or(file.parse("k_min")?).unwrap_or(1);
    let k_max = args.k_max.or(file.parse("k_max")?).unwrap_or(8);
    if k_min == 0 || k_min > k_max {
        bail!("invalid k range {k_min}..{k_max}");
    }
    let params = params_from(None, args.theta, &file)?;
    let corpus = load_inputs(&args.corpus, &file)?;
    let dir = out_dir(&args.corpus, &file);

    let rows = k_sensitivity(&corpus, recommender, &params, seed, k_min..=k_max)?;
    write_file(
        &dir,
        "sensitivity.csv",
        &sensitivity_csv(recommender.name(), &rows),
    )?;

    println!(
        "{:<4} {:>12} {:>12} {:>12}",
        "k", "d_expertise", "d_giniwork", "d_far"
    );
    for row in &rows {
        println!(
            "{:<4} {:>12} {:>12} {:>12}",
            row.k,
            fmt_cell(row.d_expertise),
            fmt_cell(row.d_gini_work),
            fmt_cell(row.d_far),
        );
    }
    println!("reports written to {}", dir.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Sensitivity(args) => cmd_sensitivity(args),
    }
}
