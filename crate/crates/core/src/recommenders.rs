//! The nine reviewer scoring functions, as pure procedures over a ledger
//! snapshot and one pull request.
//!
//! Every recommender returns a ranked candidate list sorted by score
//! descending with ties broken by ascending developer key, so output is
//! identical across runs and platforms. The single-minded recommenders
//! (authorship, review ownership, cHRev, learning, retention, turnover,
//! WhoDo) score directly; Sofia and SofiaWL are bimodal and delegate to
//! turnover when any file under review is hoarded or abandoned, otherwise to
//! cHRev or WhoDo respectively.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{DeveloperId, PullRequest};
use crate::ledger::{parent_dir, utc_day, KnowledgeLedger};

/// Recency weighting rule for WhoDo's reciprocal days-since terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecencyRule {
    /// `1 / (days_since + 1)`: same-day activity weighs 1 instead of
    /// dividing by zero. The default.
    OffsetOneDay,
    /// `1 / days_since` with same-day activity contributing nothing.
    RawSkipSameDay,
}

/// Tunable weights shared by the scoring functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecommenderParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// Load-balancing strength in `[0, 1]` for WhoDo's dampening.
    pub theta: f64,
    /// Knower-count threshold at or below which a file counts as at risk for
    /// the bimodal recommenders. `k = 0` disables the turnover branch.
    pub k: usize,
    pub recency: RecencyRule,
}

impl Default for RecommenderParams {
    fn default() -> Self {
        RecommenderParams {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            theta: 0.5,
            k: 2,
            recency: RecencyRule::OffsetOneDay,
        }
    }
}

/// One scored candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub dev: DeveloperId,
    pub score: f64,
    /// Named score components, for report breakdowns.
    pub breakdown: BTreeMap<String, f64>,
}

impl CandidateScore {
    fn new(dev: DeveloperId, score: f64) -> Self {
        CandidateScore {
            dev,
            score,
            breakdown: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.breakdown.insert(key.to_string(), value);
        self
    }
}

/// Which arm of a bimodal recommender produced a ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Turnover,
    ChRev,
    WhoDo,
}

impl Branch {
    pub fn label(&self) -> &'static str {
        match self {
            Branch::Turnover => "turnover",
            Branch::ChRev => "chrev",
            Branch::WhoDo => "whodo",
        }
    }
}

/// A ranked recommendation and, for bimodal recommenders, the branch taken.
#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub ranked: Vec<CandidateScore>,
    pub branch: Option<Branch>,
}

impl Recommendation {
    fn plain(ranked: Vec<CandidateScore>) -> Self {
        Recommendation {
            ranked,
            branch: None,
        }
    }
}

/// Scoring input: one pull request against the ledger state at its creation
/// instant.
pub struct ReviewContext<'a> {
    pub pr: &'a PullRequest,
    pub snapshot: &'a KnowledgeLedger,
    /// Candidate universe: developers with at least one prior contribution,
    /// excluding the PR author, sorted by key.
    pub candidates: Vec<DeveloperId>,
}

impl<'a> ReviewContext<'a> {
    /// Builds the context with the default candidate universe.
    pub fn new(pr: &'a PullRequest, snapshot: &'a KnowledgeLedger) -> Self {
        let candidates = snapshot
            .known_developers()
            .filter(|d| **d != pr.author)
            .cloned()
            .collect();
        ReviewContext {
            pr,
            snapshot,
            candidates,
        }
    }
}

fn rank(mut scores: Vec<CandidateScore>) -> Vec<CandidateScore> {
    scores.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.dev.cmp(&b.dev))
    });
    scores
}

/// Commit-ownership scoring: a candidate's share of the commits made to the
/// files under review. Candidates with no commits to those files are
/// omitted; scores over the returned list sum to 1.
pub fn authorship_rec(ctx: &ReviewContext<'_>) -> Vec<CandidateScore> {
    share_of_file_touches(ctx, |stats| stats.commit_count)
}

/// Review-ownership scoring: a candidate's share of the past reviews of the
/// files under review. Same normalization as [`authorship_rec`].
pub fn rev_own_rec(ctx: &ReviewContext<'_>) -> Vec<CandidateScore> {
    share_of_file_touches(ctx, |stats| stats.review_count)
}

fn share_of_file_touches(
    ctx: &ReviewContext<'_>,
    count: impl Fn(&crate::ledger::DevFileStats) -> u64,
) -> Vec<CandidateScore> {
    let mut touches: BTreeMap<&DeveloperId, u64> = BTreeMap::new();
    for file in &ctx.pr.files {
        let Some(knowledge) = ctx.snapshot.file(file) else {
            continue;
        };
        for dev in &ctx.candidates {
            if let Some(stats) = knowledge.per_dev.get(dev) {
                let n = count(stats);
                if n > 0 {
                    *touches.entry(dev).or_insert(0) += n;
                }
            }
        }
    }
    let total: u64 = touches.values().sum();
    if total == 0 {
        return Vec::new();
    }
    rank(
        touches
            .into_iter()
            .map(|(dev, n)| {
                CandidateScore::new(dev.clone(), n as f64 / total as f64).with("touches", n as f64)
            })
            .collect(),
    )
}

/// Per-file review expertise: comment share plus work-day share plus a
/// recency term, all relative to the file's full comment history. Zero when
/// the developer (or anyone) has never commented on the file.
pub fn xfactor(dev: &DeveloperId, file: &str, snapshot: &KnowledgeLedger) -> f64 {
    let Some(knowledge) = snapshot.file(file) else {
        return 0.0;
    };
    let totals = &knowledge.review_totals;
    if totals.comment_count == 0 {
        return 0.0;
    }
    let Some(stats) = knowledge.per_dev.get(dev) else {
        return 0.0;
    };
    if stats.comment_count == 0 {
        return 0.0;
    }
    let comment_share = stats.comment_count as f64 / totals.comment_count as f64;
    let day_share = stats.comment_days.len() as f64 / totals.comment_days.len() as f64;
    let own_last = utc_day(stats.last_comment.expect("comment_count > 0"));
    let file_last = utc_day(totals.last_comment.expect("comment_count > 0"));
    let recency = 1.0 / ((own_last - file_last).abs() as f64 + 1.0);
    comment_share + day_share + recency
}

/// cHRev scoring: the summed per-file review expertise over the files under
/// review. Candidates with zero total are omitted.
pub fn chrev_rec(ctx: &ReviewContext<'_>) -> Vec<CandidateScore> {
    let mut scores = Vec::new();
    for dev in &ctx.candidates {
        let total: f64 = ctx
            .pr
            .files
            .iter()
            .map(|f| xfactor(dev, f, ctx.snapshot))
            .sum();
        if total > 0.0 {
            scores.push(CandidateScore::new(dev.clone(), total));
        }
    }
    rank(scores)
}

/// Fraction of the files under review the developer already knows.
pub fn reviewer_knows(dev: &DeveloperId, pr: &PullRequest, snapshot: &KnowledgeLedger) -> f64 {
    if pr.files.is_empty() {
        return 0.0;
    }
    let known = pr
        .files
        .iter()
        .filter(|f| {
            snapshot
                .file(f)
                .and_then(|k| k.per_dev.get(dev))
                .is_some_and(|s| s.knows())
        })
        .count();
    known as f64 / pr.files.len() as f64
}

/// Learning-oriented scoring: one minus the known-file fraction, over
/// candidates who know at least one file under review.
pub fn learn_rec(ctx: &ReviewContext<'_>) -> Vec<CandidateScore> {
    let mut scores = Vec::new();
    for dev in &ctx.candidates {
        let knows = reviewer_knows(dev, ctx.pr, ctx.snapshot);
        if knows > 0.0 {
            scores.push(CandidateScore::new(dev.clone(), 1.0 - knows).with("knows", knows));
        }
    }
    rank(scores)
}

/// Retention scoring: contribution consistency (active months out of
/// twelve) times the candidate's share of the project's last-365-day
/// commit+review volume. Candidates who know none of the files under review
/// are excluded, as for [`learn_rec`].
pub fn retention_rec(ctx: &ReviewContext<'_>, params: &RecommenderParams) -> Vec<CandidateScore> {
    let now = ctx.pr.created_at;
    let total_volume: u64 = ctx
        .snapshot
        .known_developers()
        .map(|d| ctx.snapshot.activity_profile(d, now).total())
        .sum();
    let mut scores = Vec::new();
    for dev in &ctx.candidates {
        let knows = reviewer_knows(dev, ctx.pr, ctx.snapshot);
        if knows == 0.0 {
            continue;
        }
        let profile = ctx.snapshot.activity_profile(dev, now);
        let consistency = profile.active_months_365 as f64 / 12.0;
        let contribution = if total_volume == 0 {
            0.0
        } else {
            profile.total() as f64 / total_volume as f64
        };
        let score = params.c1 * consistency * params.c2 * contribution;
        scores.push(
            CandidateScore::new(dev.clone(), score)
                .with("consistency", consistency)
                .with("contribution", contribution),
        );
    }
    rank(scores)
}

/// Combined learning and retention scoring over the candidates eligible for
/// both (those who know at least one file under review).
pub fn turnover_rec(ctx: &ReviewContext<'_>, params: &RecommenderParams) -> Vec<CandidateScore> {
    let retention: BTreeMap<DeveloperId, f64> = retention_rec(ctx, params)
        .into_iter()
        .map(|c| (c.dev, c.score))
        .collect();
    let mut scores = Vec::new();
    for candidate in learn_rec(ctx) {
        let Some(retention_score) = retention.get(&candidate.dev) else {
            continue;
        };
        let learn_score = candidate.score;
        let score = params.c1 * learn_score * params.c2 * retention_score;
        scores.push(
            CandidateScore::new(candidate.dev, score)
                .with("learn", learn_score)
                .with("retention", *retention_score),
        );
    }
    rank(scores)
}

/// WhoDo's exponential workload penalty.
pub fn load_dampening(open_reviews: u32, theta: f64) -> f64 {
    (theta * open_reviews as f64).exp()
}

fn recency_weight(
    last: Option<chrono::DateTime<chrono::Utc>>,
    now_day: i64,
    rule: RecencyRule,
) -> f64 {
    let Some(last) = last else {
        return 0.0;
    };
    let days_since = (now_day - utc_day(last)).max(0);
    match rule {
        RecencyRule::OffsetOneDay => 1.0 / (days_since as f64 + 1.0),
        RecencyRule::RawSkipSameDay => {
            if days_since == 0 {
                0.0
            } else {
                1.0 / days_since as f64
            }
        }
    }
}

/// WhoDo scoring: recency-weighted change and review counts over the files
/// under review and their immediate parent directories, divided by the
/// exponential open-review load penalty. Candidates with a zero raw score
/// are omitted.
pub fn whodo_rec(ctx: &ReviewContext<'_>, params: &RecommenderParams) -> Vec<CandidateScore> {
    let now_day = utc_day(ctx.pr.created_at);
    let dirs: BTreeSet<String> = ctx.pr.files.iter().map(|f| parent_dir(f)).collect();
    let mut scores = Vec::new();
    for dev in &ctx.candidates {
        let mut file_changes = 0.0;
        let mut file_reviews = 0.0;
        for file in &ctx.pr.files {
            let Some(stats) = ctx.snapshot.file(file).and_then(|k| k.per_dev.get(dev)) else {
                continue;
            };
            file_changes += stats.commit_count as f64
                * recency_weight(stats.last_commit, now_day, params.recency);
            file_reviews += stats.review_count as f64
                * recency_weight(stats.last_review, now_day, params.recency);
        }
        let mut dir_changes = 0.0;
        let mut dir_reviews = 0.0;
        for dir in &dirs {
            let Some(stats) = ctx.snapshot.dir_stats(dev, dir) else {
                continue;
            };
            dir_changes += stats.change_count as f64
                * recency_weight(stats.last_change, now_day, params.recency);
            dir_reviews += stats.review_count as f64
                * recency_weight(stats.last_review, now_day, params.recency);
        }
        let raw = params.c1 * file_changes
            + params.c2 * dir_changes
            + params.c3 * file_reviews
            + params.c4 * dir_reviews;
        if raw <= 0.0 {
            continue;
        }
        let load = load_dampening(ctx.snapshot.open_review_count(dev), params.theta);
        scores.push(
            CandidateScore::new(dev.clone(), raw / load)
                .with("raw", raw)
                .with("load", load),
        );
    }
    rank(scores)
}

/// True when any file under review currently has `k` or fewer knowers.
/// `k = 0` never fires, disabling the turnover branch.
pub fn has_risky_file(ctx: &ReviewContext<'_>, k: usize) -> bool {
    if k == 0 {
        return false;
    }
    ctx.pr
        .files
        .iter()
        .any(|f| ctx.snapshot.file(f).map_or(0, |fk| fk.knower_count()) <= k)
}

/// Sofia: turnover scoring when a file under review is hoarded or
/// abandoned, cHRev otherwise.
pub fn sofia_rec(ctx: &ReviewContext<'_>, params: &RecommenderParams) -> Recommendation {
    if has_risky_file(ctx, params.k) {
        Recommendation {
            ranked: turnover_rec(ctx, params),
            branch: Some(Branch::Turnover),
        }
    } else {
        Recommendation {
            ranked: chrev_rec(ctx),
            branch: Some(Branch::ChRev),
        }
    }
}

/// SofiaWL: turnover scoring when a file under review is hoarded or
/// abandoned, WhoDo otherwise.
pub fn sofia_wl_rec(ctx: &ReviewContext<'_>, params: &RecommenderParams) -> Recommendation {
    if has_risky_file(ctx, params.k) {
        Recommendation {
            ranked: turnover_rec(ctx, params),
            branch: Some(Branch::Turnover),
        }
    } else {
        Recommendation {
            ranked: whodo_rec(ctx, params),
            branch: Some(Branch::WhoDo),
        }
    }
}

/// The recommender registry. Names are the stable CLI/config keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Recommender {
    Authorship,
    RevOwn,
    ChRev,
    Learn,
    Retention,
    Turnover,
    Sofia,
    WhoDo,
    SofiaWl,
    /// Validation double: always re-selects the replaced reviewer, so a
    /// simulation under it reproduces actual history exactly. Resolved
    /// inside the simulator, not by a scoring function.
    Identity,
}

impl Recommender {
    pub const ALL: [Recommender; 10] = [
        Recommender::Authorship,
        Recommender::RevOwn,
        Recommender::ChRev,
        Recommender::Learn,
        Recommender::Retention,
        Recommender::Turnover,
        Recommender::Sofia,
        Recommender::WhoDo,
        Recommender::SofiaWl,
        Recommender::Identity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Recommender::Authorship => "authorship",
            Recommender::RevOwn => "revown",
            Recommender::ChRev => "chrev",
            Recommender::Learn => "learn",
            Recommender::Retention => "retention",
            Recommender::Turnover => "turnover",
            Recommender::Sofia => "sofia",
            Recommender::WhoDo => "whodo",
            Recommender::SofiaWl => "sofiawl",
            Recommender::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Recommender> {
        Recommender::ALL.into_iter().find(|r| r.name() == name)
    }

    /// Scores the context. [`Recommender::Identity`] has no scoring
    /// function and returns an empty ranking; the simulator intercepts it
    /// before scoring.
    pub fn recommend(&self, ctx: &ReviewContext<'_>, params: &RecommenderParams) -> Recommendation {
        match self {
            Recommender::Authorship => Recommendation::plain(authorship_rec(ctx)),
            Recommender::RevOwn => Recommendation::plain(rev_own_rec(ctx)),
            Recommender::ChRev => Recommendation::plain(chrev_rec(ctx)),
            Recommender::Learn => Recommendation::plain(learn_rec(ctx)),
            Recommender::Retention => Recommendation::plain(retention_rec(ctx, params)),
            Recommender::Turnover => Recommendation::plain(turnover_rec(ctx, params)),
            Recommender::Sofia => sofia_rec(ctx, params),
            Recommender::WhoDo => Recommendation::plain(whodo_rec(ctx, params)),
            Recommender::SofiaWl => sofia_wl_rec(ctx, params),
            Recommender::Identity => Recommendation::plain(Vec::new()),
        }
    }
}
