//! Counterfactual replay: pull-request history is re-run in order, one
//! seeded-random actual reviewer per PR is replaced by the recommender's top
//! eligible candidate, and the resulting knowledge state diverges from the
//! actual history for every later recommendation and outcome.
//!
//! The replay processes a single time-sorted event stream with three event
//! kinds: commits, PR openings, and PR merges. Recommendations happen at
//! opening time (so a recommender only ever sees history up to the PR's
//! creation), knowledge is attributed at merge time, and an assigned review
//! is "open" for workload purposes in between. Two ledgers evolve in
//! lockstep — one with the actual reviewers, one with the substitution — so
//! per-quarter outcome pairs come from a single pass.
//!
//! Which reviewer gets replaced depends only on `(seed, pr.id)` via an
//! FNV-1a keyed hash, never on the recommender, so runs with the same seed
//! replace the same reviewers across all recommenders.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{CleanCorpus, Commit, DeveloperId, PullRequest};
use crate::ledger::{
    ContributionEvent, KnowledgeLedger, LedgerError, Provenance, Quarter, QuarterGrid,
};
use crate::recommenders::{Branch, CandidateScore, Recommender, RecommenderParams, ReviewContext};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, key: &str) -> u64 {
    let mut hash = FNV_OFFSET;
    for byte in seed.to_be_bytes() {
        hash = (hash ^ u64::from(byte)).wrapping_mul(FNV_PRIME);
    }
    for byte in key.as_bytes() {
        hash = (hash ^ u64::from(*byte)).wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Deterministically picks the reviewer to replace on a PR: an FNV-1a hash
/// of `(seed, pr.id)` reduced modulo the reviewer count, over reviewers
/// sorted by key. Independent of any recommender. `None` when the PR has no
/// reviewers.
pub fn pick_replaced(pr: &PullRequest, seed: u64) -> Option<DeveloperId> {
    let reviewers = pr.reviewers();
    if reviewers.is_empty() {
        return None;
    }
    let idx = (fnv1a(seed, &pr.id) % reviewers.len() as u64) as usize;
    Some(reviewers[idx].clone())
}

/// One row of the replacement log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementRecord {
    pub pr_id: String,
    pub replaced: DeveloperId,
    pub substitute: DeveloperId,
    /// 1-based rank of the best-ranked actual reviewer in the
    /// recommendation list; `None` when no actual reviewer was recommended.
    pub rank_of_actual: Option<usize>,
    /// Branch taken by a bimodal recommender.
    pub branch: Option<Branch>,
    /// True when the recommendation was empty or fully ineligible and the
    /// original reviewer was kept.
    pub fallback: bool,
}

/// The full outcome of one simulation pass.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub seed: u64,
    pub recommender: Recommender,
    pub params: RecommenderParams,
    pub replacement_log: Vec<ReplacementRecord>,
    /// Reviewed PRs skipped because they had no reviewer after cleaning.
    pub skipped_prs: u64,
    /// Final state after replaying actual history.
    pub actual_ledger: KnowledgeLedger,
    /// Final state after replaying with substitutions.
    pub counterfactual_ledger: KnowledgeLedger,
}

impl SimulationRun {
    pub fn fallback_count(&self) -> u64 {
        self.replacement_log.iter().filter(|r| r.fallback).count() as u64
    }

    pub fn fallback_fraction(&self) -> f64 {
        if self.replacement_log.is_empty() {
            0.0
        } else {
            self.fallback_count() as f64 / self.replacement_log.len() as f64
        }
    }
}

/// Per-quarter accumulations gathered during the replay, for both histories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterAccum {
    pub quarter: Quarter,
    /// Summed per-review expertise (known-file fraction of the reviewer
    /// union), actual reviewers against the actual ledger.
    pub expertise_actual: f64,
    /// Same, substituted reviewers against the counterfactual ledger.
    pub expertise_simulated: f64,
    /// Reviewed PRs merged in the quarter.
    pub review_count: u64,
    /// Review participations per reviewer (actual history).
    pub reviews_per_reviewer_actual: BTreeMap<DeveloperId, u64>,
    /// Review participations per reviewer (counterfactual history).
    pub reviews_per_reviewer_simulated: BTreeMap<DeveloperId, u64>,
    /// Reciprocal-rank sum and PR count for the quarter's MRR.
    pub reciprocal_rank_sum: f64,
    pub recommended_prs: u64,
}

impl QuarterAccum {
    fn new(quarter: Quarter) -> Self {
        QuarterAccum {
            quarter,
            expertise_actual: 0.0,
            expertise_simulated: 0.0,
            review_count: 0,
            reviews_per_reviewer_actual: BTreeMap::new(),
            reviews_per_reviewer_simulated: BTreeMap::new(),
            reciprocal_rank_sum: 0.0,
            recommended_prs: 0,
        }
    }
}

/// Simulation result: the run itself plus quarter-bucketed accumulations
/// and the quarter grid they refer to.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub run: SimulationRun,
    pub quarters: Vec<QuarterAccum>,
    pub grid: QuarterGrid,
}

#[derive(Debug, thiserror::Error)]
pub enum SimulatorError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// Fraction of the files under review known by the union of `reviewers`,
/// per the given ledger.
pub fn review_expertise(
    pr: &PullRequest,
    reviewers: &[DeveloperId],
    ledger: &KnowledgeLedger,
) -> f64 {
    if pr.files.is_empty() {
        return 0.0;
    }
    let known = pr
        .files
        .iter()
        .filter(|file| {
            ledger.file(file).is_some_and(|k| {
                reviewers
                    .iter()
                    .any(|dev| k.per_dev.get(dev).is_some_and(|s| s.knows()))
            })
        })
        .count();
    known as f64 / pr.files.len() as f64
}

enum EventRef<'a> {
    Commit(&'a Commit),
    Open(&'a PullRequest),
    Merge(&'a PullRequest),
}

impl EventRef<'_> {
    fn sort_key(&self) -> (DateTime<Utc>, u8, &str) {
        match self {
            EventRef::Commit(c) => (c.timestamp, 0, c.id.as_str()),
            EventRef::Open(p) => (p.created_at, 1, p.id.as_str()),
            EventRef::Merge(p) => (p.merged_at, 2, p.id.as_str()),
        }
    }
}

struct PendingPr {
    actual_reviewers: Vec<DeveloperId>,
    cf_reviewers: Vec<DeveloperId>,
    replaced: DeveloperId,
    substitute: DeveloperId,
    expertise_actual: f64,
    expertise_cf: f64,
    reciprocal_rank: Option<f64>,
}

/// Builds the per-reviewer contribution event for a merged PR. `original`
/// names the actual reviewer whose comment records this event carries; the
/// substitute inherits the replaced reviewer's records.
fn reviewer_event(
    pr: &PullRequest,
    reviewer: &DeveloperId,
    original: &DeveloperId,
) -> ContributionEvent {
    let mut comments = Vec::new();
    for event in &pr.review_events {
        if event.reviewer != *original {
            continue;
        }
        match &event.file {
            Some(f) => comments.push((f.clone(), event.timestamp)),
            None => comments.extend(pr.files.iter().map(|f| (f.clone(), event.timestamp))),
        }
    }
    ContributionEvent {
        actor: reviewer.clone(),
        provenance: Provenance::Reviewed,
        timestamp: pr.merged_at,
        files: pr.files.clone(),
        mega: pr.mega,
        comments,
    }
}

/// Replays the full corpus under one recommender and seed.
pub fn run_simulation(
    corpus: &CleanCorpus,
    recommender: Recommender,
    params: &RecommenderParams,
    seed: u64,
) -> Result<SimOutput, SimulatorError> {
    let grid = QuarterGrid::from_corpus(corpus)?;
    let mut quarters: Vec<QuarterAccum> = grid
        .quarters()
        .iter()
        .map(|q| QuarterAccum::new(*q))
        .collect();

    let mut events: Vec<EventRef<'_>> =
        Vec::with_capacity(corpus.commits.len() + 2 * corpus.prs.len());
    events.extend(corpus.commits.iter().map(EventRef::Commit));
    for pr in &corpus.prs {
        events.push(EventRef::Open(pr));
        events.push(EventRef::Merge(pr));
    }
    events.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let mut actual = KnowledgeLedger::new();
    let mut cf = KnowledgeLedger::new();
    let mut pending: BTreeMap<&str, PendingPr> = BTreeMap::new();
    let mut log = Vec::new();
    let mut skipped = 0u64;

    for event in &events {
        match event {
            EventRef::Commit(commit) => {
                let contribution = ContributionEvent {
                    actor: commit.author.clone(),
                    provenance: Provenance::Authored,
                    timestamp: commit.timestamp,
                    files: commit.files.clone(),
                    mega: commit.mega,
                    comments: Vec::new(),
                };
                actual.apply_event(&contribution)?;
                cf.apply_event(&contribution)?;
            }
            EventRef::Open(pr) => {
                let actual_reviewers = pr.reviewers();
                if actual_reviewers.is_empty() {
                    skipped += 1;
                    continue;
                }
                let picked = pick_replaced(pr, seed).expect("non-empty reviewer set");

                let (ranked, branch) = score(recommender, pr, &cf, params, &picked);
                let rank_of_actual = ranked
                    .iter()
                    .position(|c| actual_reviewers.contains(&c.dev))
                    .map(|idx| idx + 1);

                let remaining: Vec<&DeveloperId> =
                    actual_reviewers.iter().filter(|d| **d != picked).collect();
                let substitute = ranked
                    .iter()
                    .map(|c| &c.dev)
                    .find(|d| !remaining.contains(d));
                let (substitute, fallback) = match substitute {
                    Some(dev) => (dev.clone(), false),
                    None => (picked.clone(), true),
                };

                let mut cf_reviewers: Vec<DeveloperId> = actual_reviewers
                    .iter()
                    .filter(|d| **d != picked)
                    .cloned()
                    .collect();
                cf_reviewers.push(substitute.clone());
                cf_reviewers.sort();

                for dev in &actual_reviewers {
                    actual.open_review(dev);
                }
                for dev in &cf_reviewers {
                    cf.open_review(dev);
                }

                let expertise_actual = review_expertise(pr, &actual_reviewers, &actual);
                let expertise_cf = review_expertise(pr, &cf_reviewers, &cf);

                log.push(ReplacementRecord {
                    pr_id: pr.id.clone(),
                    replaced: picked.clone(),
                    substitute: substitute.clone(),
                    rank_of_actual,
                    branch,
                    fallback,
                });
                pending.insert(
                    pr.id.as_str(),
                    PendingPr {
                        actual_reviewers,
                        cf_reviewers,
                        replaced: picked,
                        substitute,
                        expertise_actual,
                        expertise_cf,
                        reciprocal_rank: rank_of_actual.map(|r| 1.0 / r as f64),
                    },
                );
            }
            EventRef::Merge(pr) => {
                let Some(info) = pending.remove(pr.id.as_str()) else {
                    continue; // reviewer-less PR, already counted as skipped
                };

                for dev in &info.actual_reviewers {
                    actual.apply_event(&reviewer_event(pr, dev, dev))?;
                    actual.close_review(dev);
                }
                for dev in &info.cf_reviewers {
                    let original =
                        if *dev == info.substitute && !info.actual_reviewers.contains(dev) {
                            &info.replaced
                        } else {
                            dev
                        };
                    cf.apply_event(&reviewer_event(pr, dev, original))?;
                    cf.close_review(dev);
                }

                if let Some(q_idx) = grid.quarter_of(pr.merged_at) {
                    let accum = &mut quarters[q_idx];
                    accum.review_count += 1;
                    accum.expertise_actual += info.expertise_actual;
                    accum.expertise_simulated += info.expertise_cf;
                    for dev in &info.actual_reviewers {
                        *accum
                            .reviews_per_reviewer_actual
                            .entry(dev.clone())
                            .or_insert(0) += 1;
                    }
                    for dev in &info.cf_reviewers {
                        *accum
                            .reviews_per_reviewer_simulated
                            .entry(dev.clone())
                            .or_insert(0) += 1;
                    }
                    accum.recommended_prs += 1;
                    accum.reciprocal_rank_sum += info.reciprocal_rank.unwrap_or(0.0);
                }
            }
        }
    }

    Ok(SimOutput {
        run: SimulationRun {
            seed,
            recommender,
            params: *params,
            replacement_log: log,
            skipped_prs: skipped,
            actual_ledger: actual,
            counterfactual_ledger: cf,
        },
        quarters,
        grid,
    })
}

fn score(
    recommender: Recommender,
    pr: &PullRequest,
    snapshot: &KnowledgeLedger,
    params: &RecommenderParams,
    picked: &DeveloperId,
) -> (Vec<CandidateScore>, Option<Branch>) {
    if recommender == Recommender::Identity {
        return (
            vec![CandidateScore {
                dev: picked.clone(),
                score: 1.0,
                breakdown: BTreeMap::new(),
            }],
            None,
        );
    }
    let ctx = ReviewContext::new(pr, snapshot);
    let recommendation = recommender.recommend(&ctx, params);
    (recommendation.ranked, recommendation.branch)
}

/// Replays actual history only (no substitution) by running the identity
/// double; the actual and counterfactual sides of the result are identical.
pub fn replay_actual(corpus: &CleanCorpus) -> Result<SimOutput, SimulatorError> {
    run_simulation(
        corpus,
        Recommender::Identity,
        &RecommenderParams::default(),
        0,
    )
}

/// Renders the replacement log as CSV.
pub fn replacement_log_csv(log: &[ReplacementRecord]) -> String {
    let mut out = String::from("pr_id,replaced,substitute,rank_of_actual,branch,fallback\n");
    for record in log {
        let rank = record
            .rank_of_actual
            .map_or(String::new(), |r| r.to_string());
        let branch = record.branch.map_or("", |b| b.label());
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            record.pr_id, record.replaced, record.substitute, rank, branch, record.fallback
        ));
    }
    out
}
