//! Seed-deterministic synthetic corpus generation.
//!
//! Emits commit and pull-request JSONL in the exact wire format the corpus
//! loader reads, with controllable team size, file count, span, review
//! rate, reviewer-assignment skew, and annual turnover. Developers own
//! contiguous blocks of files and mostly work inside them, which produces
//! the single-knower files that make risk accounting interesting; leavers
//! are replaced by fresh identities in the same weight slot, so activity
//! skew is stationary across the corpus.
//!
//! All randomness comes from one SplitMix64 stream, so equal seeds produce
//! byte-identical output.

use chrono::{DateTime, Duration, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{load_corpus_from_strs, AliasTable, CleanCorpus, CorpusConfig, CorpusError};

/// SplitMix64: small, fast, and stable across platforms.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }
}

/// Generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub devs: usize,
    pub files: usize,
    pub quarters: usize,
    pub commits_per_quarter: usize,
    pub prs_per_quarter: usize,
    /// Probability that a PR gets human reviewers at all.
    pub review_rate: f64,
    /// Annual fraction of the team replaced by new identities.
    pub turnover: f64,
    /// Zipf exponent for activity and reviewer-assignment weights;
    /// 0 = uniform, larger = more concentrated.
    pub skew: f64,
    /// Maximum reviewers per PR (at least 1 when reviewed).
    pub max_reviewers: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            devs: 20,
            files: 60,
            quarters: 14,
            commits_per_quarter: 80,
            prs_per_quarter: 60,
            review_rate: 0.9,
            turnover: 0.10,
            skew: 1.2,
            max_reviewers: 2,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(&'static str),
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.devs < 2 {
            return Err(SynthError::InvalidParameter("devs must be at least 2"));
        }
        if self.files == 0 {
            return Err(SynthError::InvalidParameter("files must be positive"));
        }
        if self.quarters == 0 {
            return Err(SynthError::InvalidParameter("quarters must be positive"));
        }
        if !(0.0..=1.0).contains(&self.review_rate) {
            return Err(SynthError::InvalidParameter(
                "review_rate must be in [0, 1]",
            ));
        }
        if !(0.0..=1.0).contains(&self.turnover) {
            return Err(SynthError::InvalidParameter("turnover must be in [0, 1]"));
        }
        if self.max_reviewers == 0 {
            return Err(SynthError::InvalidParameter(
                "max_reviewers must be positive",
            ));
        }
        Ok(())
    }
}

/// Generated corpus in wire format.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub commits_jsonl: String,
    pub prs_jsonl: String,
}

impl SynthCorpus {
    /// Parses the generated text back through the regular loader.
    pub fn clean(&self, config: &CorpusConfig) -> Result<CleanCorpus, CorpusError> {
        load_corpus_from_strs(
            &self.commits_jsonl,
            "synthetic-commits.jsonl",
            &self.prs_jsonl,
            "synthetic-prs.jsonl",
            &AliasTable::new(),
            config,
        )
    }
}

/// Config matching the generator's output: `.rs` files only, defaults
/// otherwise.
pub fn synth_config() -> CorpusConfig {
    CorpusConfig::new([".rs".to_string()])
}

struct Roster {
    /// Slot -> current developer name. Slot weights are fixed; identities
    /// rotate through them on turnover.
    slots: Vec<String>,
    cumulative: Vec<f64>,
    next_id: usize,
}

impl Roster {
    fn new(devs: usize, skew: f64) -> Roster {
        let slots: Vec<String> = (0..devs).map(|i| format!("dev{i:03}")).collect();
        let weights: Vec<f64> = (0..devs)
            .map(|i| 1.0 / ((i + 1) as f64).powf(skew))
            .collect();
        let mut cumulative = Vec::with_capacity(devs);
        let mut sum = 0.0;
        for w in &weights {
            sum += w;
            cumulative.push(sum);
        }
        Roster {
            slots,
            cumulative,
            next_id: devs,
        }
    }

    fn sample_slot(&self, rng: &mut SplitMix64) -> usize {
        let target = rng.next_f64() * self.cumulative.last().copied().unwrap_or(1.0);
        self.cumulative
            .partition_point(|c| *c < target)
            .min(self.slots.len() - 1)
    }

    fn sample_slot_excluding(&self, rng: &mut SplitMix64, excluded: usize) -> usize {
        // Rejection sampling; slot count is small.
        loop {
            let slot = self.sample_slot(rng);
            if slot != excluded {
                return slot;
            }
        }
    }

    fn churn(&mut self, rng: &mut SplitMix64, per_quarter_rate: f64) {
        for slot in 0..self.slots.len() {
            if rng.next_f64() < per_quarter_rate {
                self.slots[slot] = format!("dev{:03}", self.next_id);
                self.next_id += 1;
            }
        }
    }
}

fn quarter_starts(quarters: usize) -> Vec<DateTime<Utc>> {
    let mut starts = Vec::with_capacity(quarters + 1);
    let mut year = 2016;
    let mut month = 1;
    for _ in 0..=quarters {
        starts.push(Utc.with_ymd_and_hms(year, month, 1, 0, 0, 0).unwrap());
        month += 3;
        if month > 12 {
            month = 1;
            year += 1;
        }
    }
    starts
}

fn instant_in(rng: &mut SplitMix64, start: DateTime<Utc>, end: DateTime<Utc>) -> DateTime<Utc> {
    let span = (end - start).num_seconds().max(1);
    start + Duration::seconds((rng.next_u64() % span as u64) as i64)
}

fn file_path(index: usize) -> String {
    format!("mod{:02}/f{index:03}.rs", index / 5)
}

/// Picks 1..=max files for an event: mostly from the author's home block,
/// sometimes anywhere.
fn pick_files(
    rng: &mut SplitMix64,
    spec: &SynthSpec,
    author_slot: usize,
    max_files: usize,
) -> Vec<String> {
    let count = 1 + rng.below(max_files);
    let block = (spec.files / spec.devs).max(1);
    let home_start = (author_slot * block) % spec.files;
    let mut picked = std::collections::BTreeSet::new();
    for _ in 0..count {
        let idx = if rng.next_f64() < 0.7 {
            (home_start + rng.below(block)) % spec.files
        } else {
            rng.below(spec.files)
        };
        picked.insert(idx);
    }
    picked.into_iter().map(file_path).collect()
}

/// Generates a synthetic corpus. Equal `(spec, seed)` pairs produce
/// byte-identical output.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<SynthCorpus, SynthError> {
    spec.validate()?;
    let mut rng = SplitMix64::new(seed);
    let mut roster = Roster::new(spec.devs, spec.skew);
    let starts = quarter_starts(spec.quarters);
    // Quarterly churn rate equivalent to the annual turnover fraction.
    let per_quarter_rate = 1.0 - (1.0 - spec.turnover).powf(0.25);

    let mut commits = String::new();
    let mut prs = String::new();
    let mut commit_seq = 0usize;
    let mut pr_seq = 0usize;

    for quarter in 0..spec.quarters {
        if quarter > 0 {
            roster.churn(&mut rng, per_quarter_rate);
        }
        let q_start = starts[quarter];
        let q_end = starts[quarter + 1];

        let mut quarter_events: Vec<(DateTime<Utc>, String, bool)> = Vec::new();

        for _ in 0..spec.commits_per_quarter {
            let slot = roster.sample_slot(&mut rng);
            let author = roster.slots[slot].clone();
            let at = instant_in(&mut rng, q_start, q_end);
            let mut files = pick_files(&mut rng, spec, slot, 3);
            // Occasional non-code file, exercising the ingest filter.
            if rng.next_f64() < 0.05 {
                files.push("docs/notes.md".to_string());
            }
            let record = serde_json::json!({
                "id": format!("c{commit_seq:06}"),
                "author_name": author,
                "author_email": format!("{author}@example.com"),
                "timestamp": at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                "files": files,
            });
            quarter_events.push((at, record.to_string(), true));
            commit_seq += 1;
        }

        for _ in 0..spec.prs_per_quarter {
            let slot = roster.sample_slot(&mut rng);
            let author = roster.slots[slot].clone();
            let created = instant_in(&mut rng, q_start, q_end);
            let merged = created + Duration::hours(12 + rng.below(14 * 24) as i64);
            let files = pick_files(&mut rng, spec, slot, 4);

            let mut reviews = Vec::new();
            if rng.next_f64() < spec.review_rate {
                let reviewer_count = 1 + rng.below(spec.max_reviewers);
                let mut seen = std::collections::BTreeSet::new();
                for _ in 0..reviewer_count {
                    let r_slot = roster.sample_slot_excluding(&mut rng, slot);
                    let reviewer = roster.slots[r_slot].clone();
                    if !seen.insert(reviewer.clone()) {
                        continue;
                    }
                    let at = instant_in(&mut rng, created, merged);
                    let file = if rng.next_f64() < 0.3 && !files.is_empty() {
                        Some(files[rng.below(files.len())].clone())
                    } else {
                        None
                    };
                    reviews.push(serde_json::json!({
                        "reviewer_name": reviewer.clone(),
                        "reviewer_email": format!("{reviewer}@example.com"),
                        "timestamp": at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                        "file": file,
                    }));
                }
            }
            // Occasional bot approval, exercising the bot filter.
            if rng.next_f64() < 0.05 {
                reviews.push(serde_json::json!({
                    "reviewer_name": "ci-bot",
                    "reviewer_email": "ci-bot@example.com",
                    "timestamp": created.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                    "file": serde_json::Value::Null,
                }));
            }

            let record = serde_json::json!({
                "id": format!("p{pr_seq:06}"),
                "author_name": author,
                "author_email": format!("{author}@example.com"),
                "created_at": created.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                "merged_at": merged.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                "files": files,
                "reviews": reviews,
            });
            quarter_events.push((created, record.to_string(), false));
            pr_seq += 1;
        }

        quarter_events.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
        for (_, line, is_commit) in quarter_events {
            if is_commit {
                commits.push_str(&line);
                commits.push('\n');
            } else {
                prs.push_str(&line);
                prs.push('\n');
            }
        }
    }

    Ok(SynthCorpus {
        commits_jsonl: commits,
        prs_jsonl: prs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_identical_output() {
        let spec = SynthSpec::default();
        let a = generate(&spec, 42).unwrap();
        let b = generate(&spec, 42).unwrap();
        assert_eq!(a, b);
        let c = generate(&spec, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn output_round_trips_through_loader() {
        let spec = SynthSpec {
            devs: 6,
            files: 20,
            quarters: 4,
            commits_per_quarter: 30,
            prs_per_quarter: 20,
            ..SynthSpec::default()
        };
        let corpus = generate(&spec, 7).unwrap().clean(&synth_config()).unwrap();
        assert!(corpus.exclusions.is_balanced());
        assert!(corpus.exclusions.retained_commits > 0);
        assert!(corpus.exclusions.retained_prs > 0);
        assert!(corpus.exclusions.retained_reviews > 0);
    }

    #[test]
    fn zero_turnover_keeps_roster() {
        let spec = SynthSpec {
            turnover: 0.0,
            quarters: 8,
            devs: 5,
            files: 10,
            commits_per_quarter: 10,
            prs_per_quarter: 5,
            ..SynthSpec::default()
        };
        let corpus = generate(&spec, 3).unwrap().clean(&synth_config()).unwrap();
        let mut authors = std::collections::BTreeSet::new();
        for commit in &corpus.commits {
            authors.insert(commit.author.clone());
        }
        // No replacements means every author is one of the original five.
        assert!(authors.len() <= 5);
        for author in authors {
            let idx: usize = author.as_str()[3..].parse().unwrap();
            assert!(idx < 5);
        }
    }

    #[test]
    fn turnover_introduces_new_identities() {
        let spec = SynthSpec {
            turnover: 0.5,
            quarters: 8,
            devs: 5,
            files: 10,
            commits_per_quarter: 10,
            prs_per_quarter: 5,
            ..SynthSpec::default()
        };
        let corpus = generate(&spec, 3).unwrap().clean(&synth_config()).unwrap();
        let max_idx = corpus
            .commits
            .iter()
            .map(|c| c.author.as_str()[3..].parse::<usize>().unwrap())
            .max()
            .unwrap();
        assert!(
            max_idx >= 5,
            "expected replacement identities, got max dev index {max_idx}"
        );
    }

    #[test]
    fn zero_review_rate_means_no_reviews() {
        let spec = SynthSpec {
            review_rate: 0.0,
            quarters: 3,
            devs: 4,
            files: 8,
            commits_per_quarter: 10,
            prs_per_quarter: 10,
            ..SynthSpec::default()
        };
        let corpus = generate(&spec, 9).unwrap().clean(&synth_config()).unwrap();
        assert_eq!(corpus.exclusions.retained_reviews, 0);
    }

    #[test]
    fn heavy_skew_concentrates_workload() {
        let spec = SynthSpec {
            skew: 4.0,
            quarters: 6,
            ..SynthSpec::default()
        };
        let corpus = generate(&spec, 11).unwrap().clean(&synth_config()).unwrap();
        let report =
            crate::metrics::workload_distribution(&corpus, crate::metrics::Period::Quarter)
                .unwrap();
        assert!(
            report.top_20_share.unwrap() > 0.7,
            "top-20% share {:?} not concentrated",
            report.top_20_share
        );
    }

    #[test]
    fn invalid_parameters_rejected() {
        let spec = SynthSpec {
            devs: 1,
            ..SynthSpec::default()
        };
        assert!(generate(&spec, 1).is_err());
        let spec = SynthSpec {
            review_rate: 1.5,
            ..SynthSpec::default()
        };
        assert!(generate(&spec, 1).is_err());
    }
}
