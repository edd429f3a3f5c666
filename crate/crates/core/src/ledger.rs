//! The evolving knowledge state: who knows which file, through authoring or
//! reviewing, who is currently active, and who counts as a leaver — all
//! bucketed into calendar quarters.
//!
//! The ledger is mutated strictly in replay order (event timestamps must be
//! non-decreasing) and records, per file and developer, when knowledge was
//! first attributed plus the count/recency aggregates the scoring functions
//! need. Leaver status is evaluated per quarter: a developer whose activity
//! timeline is silent for the four quarters following quarter `Q` is treated
//! as having left at the end of `Q`, and their knowledge becomes
//! inaccessible for that quarter's risk accounting.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Datelike, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{CleanCorpus, DeveloperId};

/// Whole days since the Unix epoch for a UTC instant. All "work day" and
/// recency arithmetic in the scoring functions runs on these day stamps.
pub fn utc_day(ts: DateTime<Utc>) -> i64 {
    ts.timestamp().div_euclid(86_400)
}

/// One calendar quarter (Jan/Apr/Jul/Oct boundaries) of the corpus span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quarter {
    /// Ordinal from the corpus anchor, starting at 0.
    pub index: usize,
    /// Inclusive start.
    pub start: DateTime<Utc>,
    /// Exclusive end (start of the next quarter).
    pub end: DateTime<Utc>,
}

/// The calendar-quarter partition of a corpus time span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarterGrid {
    quarters: Vec<Quarter>,
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("event at {at} arrived before ledger clock {clock} (replay must be sorted)")]
    OutOfOrder {
        at: DateTime<Utc>,
        clock: DateTime<Utc>,
    },
    #[error("corpus is empty; no quarters can be derived")]
    EmptyCorpus,
    #[error("events precede the configured quarter anchor")]
    EventsBeforeAnchor,
    #[error("quarter {index} lacks the four-quarter lookahead needed for leaver evaluation")]
    InsufficientLookahead { index: usize },
}

fn quarter_start_of(ts: DateTime<Utc>) -> DateTime<Utc> {
    let month = ((ts.month0() / 3) * 3) + 1;
    Utc.with_ymd_and_hms(ts.year(), month, 1, 0, 0, 0).unwrap()
}

fn next_quarter_start(start: DateTime<Utc>) -> DateTime<Utc> {
    let (year, month) = if start.month() >= 10 {
        (start.year() + 1, 1)
    } else {
        (start.year(), start.month() + 3)
    };
    Utc.with_ymd_and_hms(year, month, 1, 0, 0, 0).unwrap()
}

impl QuarterGrid {
    /// Builds the quarter partition covering every event in the corpus.
    ///
    /// Quarter 0 starts at the calendar quarter of the configured anchor, or
    /// of the earliest event when no anchor is set.
    pub fn from_corpus(corpus: &CleanCorpus) -> Result<QuarterGrid, LedgerError> {
        let first = corpus.first_instant().ok_or(LedgerError::EmptyCorpus)?;
        let last = corpus.last_instant().ok_or(LedgerError::EmptyCorpus)?;
        let origin = match corpus.config.quarter_anchor {
            Some(date) => {
                let anchored = Utc
                    .with_ymd_and_hms(date.year(), date.month(), date.day(), 0, 0, 0)
                    .unwrap();
                if first < quarter_start_of(anchored) {
                    return Err(LedgerError::EventsBeforeAnchor);
                }
                quarter_start_of(anchored)
            }
            None => quarter_start_of(first),
        };
        let mut quarters = Vec::new();
        let mut start = origin;
        let mut index = 0;
        loop {
            let end = next_quarter_start(start);
            quarters.push(Quarter { index, start, end });
            if last < end {
                break;
            }
            start = end;
            index += 1;
        }
        Ok(QuarterGrid { quarters })
    }

    pub fn quarters(&self) -> &[Quarter] {
        &self.quarters
    }

    pub fn len(&self) -> usize {
        self.quarters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quarters.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Quarter> {
        self.quarters.get(index)
    }

    /// Index of the quarter containing `ts`, if within the grid.
    pub fn quarter_of(&self, ts: DateTime<Utc>) -> Option<usize> {
        if self.quarters.is_empty() || ts < self.quarters[0].start {
            return None;
        }
        let idx = self.quarters.partition_point(|q| q.end <= ts);
        (idx < self.quarters.len()).then_some(idx)
    }

    /// The final quarter of the grid, which is excluded from analysis.
    pub fn last_index(&self) -> usize {
        self.quarters.len().saturating_sub(1)
    }

    /// Quarters reported on at all: everything but the final quarter.
    pub fn reportable(&self) -> impl Iterator<Item = &Quarter> {
        let last = self.last_index();
        self.quarters.iter().filter(move |q| q.index < last)
    }

    /// True when quarter `index` has the four quarters of lookahead that
    /// leaver evaluation requires.
    pub fn has_lookahead(&self, index: usize) -> bool {
        index + 4 <= self.last_index()
    }
}

/// How a developer came to know a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provenance {
    Authored,
    Reviewed,
}

/// Which knowledge provenance counts when computing knower sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnowerScope {
    /// Both committing and reviewing attribute knowledge (the default).
    AuthorsAndReviewers,
    /// Only committing attributes knowledge.
    AuthorsOnly,
}

/// Per-(file, developer) knowledge record and scoring aggregates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DevFileStats {
    /// First instant authorship knowledge was attributed.
    pub first_authored: Option<DateTime<Utc>>,
    /// First instant review knowledge was attributed.
    pub first_reviewed: Option<DateTime<Utc>>,
    /// Number of commits touching the file.
    pub commit_count: u64,
    pub last_commit: Option<DateTime<Utc>>,
    /// Number of PR reviews touching the file (one per PR per reviewer).
    pub review_count: u64,
    pub last_review: Option<DateTime<Utc>>,
    /// Number of review comments on the file (PR-level events expand to one
    /// comment per file).
    pub comment_count: u64,
    /// Distinct UTC days on which this developer commented on the file.
    pub comment_days: BTreeSet<i64>,
    pub last_comment: Option<DateTime<Utc>>,
}

impl DevFileStats {
    pub fn knows(&self) -> bool {
        self.first_authored.is_some() || self.first_reviewed.is_some()
    }

    /// Knowledge attributed strictly before `at`. Quarter snapshots pass
    /// the quarter's exclusive end, so an event landing exactly on a
    /// boundary instant counts toward the quarter it opens, matching
    /// [`QuarterGrid::quarter_of`].
    pub fn knows_at(&self, at: DateTime<Utc>) -> bool {
        self.first_authored.is_some_and(|t| t < at) || self.first_reviewed.is_some_and(|t| t < at)
    }

    pub fn authored_at(&self, at: DateTime<Utc>) -> bool {
        self.first_authored.is_some_and(|t| t < at)
    }
}

/// File-level review comment totals (denominators of the per-file expertise
/// score).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileReviewTotals {
    pub comment_count: u64,
    pub comment_days: BTreeSet<i64>,
    pub last_comment: Option<DateTime<Utc>>,
}

/// Knowledge and review-comment state for one file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileKnowledge {
    pub per_dev: BTreeMap<DeveloperId, DevFileStats>,
    pub review_totals: FileReviewTotals,
}

impl FileKnowledge {
    /// Developers who know the file right now, sorted by key.
    pub fn knowers(&self) -> impl Iterator<Item = &DeveloperId> {
        self.per_dev
            .iter()
            .filter(|(_, s)| s.knows())
            .map(|(d, _)| d)
    }

    pub fn knower_count(&self) -> usize {
        self.per_dev.values().filter(|s| s.knows()).count()
    }
}

/// Per-(developer, directory) count/recency aggregates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirStats {
    /// Commit events touching at least one file in the directory, counted
    /// once per event.
    pub change_count: u64,
    pub last_change: Option<DateTime<Utc>>,
    /// PR reviews touching at least one file in the directory, counted once
    /// per PR per reviewer.
    pub review_count: u64,
    pub last_review: Option<DateTime<Utc>>,
}

/// A developer's contribution timeline, split by kind. Both vectors are
/// appended in replay order, so they are sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityLog {
    pub commits: Vec<DateTime<Utc>>,
    pub reviews: Vec<DateTime<Utc>>,
}

impl ActivityLog {
    fn count_in(times: &[DateTime<Utc>], from: DateTime<Utc>, upto: DateTime<Utc>) -> u64 {
        let lo = times.partition_point(|t| *t < from);
        let hi = times.partition_point(|t| *t < upto);
        (hi - lo) as u64
    }

    /// Any commit or review in the half-open window `[from, upto)`, the
    /// same orientation quarters use.
    pub fn active_in(&self, from: DateTime<Utc>, upto: DateTime<Utc>) -> bool {
        Self::count_in(&self.commits, from, upto) > 0
            || Self::count_in(&self.reviews, from, upto) > 0
    }

    pub fn first_event(&self) -> Option<DateTime<Utc>> {
        match (self.commits.first(), self.reviews.first()) {
            (Some(a), Some(b)) => Some(*a.min(b)),
            (a, b) => a.or(b).copied(),
        }
    }
}

/// Activity summary over a strict 365-day lookback from a query instant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ActivityProfile {
    pub commits_365: u64,
    pub reviews_365: u64,
    /// Distinct active 30-day buckets counting back from the query instant,
    /// capped at 12 (buckets cover the trailing 360 days).
    pub active_months_365: u32,
}

impl ActivityProfile {
    pub fn total(&self) -> u64 {
        self.commits_365 + self.reviews_365
    }
}

/// A knowledge-attributing event: one commit, or one reviewer's credit for
/// one merged PR.
#[derive(Debug, Clone)]
pub struct ContributionEvent {
    pub actor: DeveloperId,
    pub provenance: Provenance,
    /// Attribution instant: commit timestamp, or PR merge instant.
    pub timestamp: DateTime<Utc>,
    /// Code files touched. Ignored for knowledge when `mega`.
    pub files: Vec<String>,
    pub mega: bool,
    /// For review events: the underlying comment records as
    /// (file, comment timestamp) pairs, PR-level comments already expanded.
    pub comments: Vec<(String, DateTime<Utc>)>,
}

/// Immediate parent directory of a repository-relative path.
pub fn parent_dir(path: &str) -> String {
    match path.rfind('/') {
        Some(idx) => path[..idx].to_string(),
        None => String::new(),
    }
}

/// The evolving knowledge ledger.
///
/// Mutation is strictly sequential; reads may happen at any point between
/// events and see the state as of the last applied event.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeLedger {
    files: BTreeMap<String, FileKnowledge>,
    dirs: BTreeMap<DeveloperId, BTreeMap<String, DirStats>>,
    activity: BTreeMap<DeveloperId, ActivityLog>,
    open_reviews: BTreeMap<DeveloperId, u32>,
    clock: Option<DateTime<Utc>>,
}

impl KnowledgeLedger {
    pub fn new() -> Self {
        KnowledgeLedger::default()
    }

    pub fn files(&self) -> &BTreeMap<String, FileKnowledge> {
        &self.files
    }

    pub fn file(&self, path: &str) -> Option<&FileKnowledge> {
        self.files.get(path)
    }

    pub fn activity(&self) -> &BTreeMap<DeveloperId, ActivityLog> {
        &self.activity
    }

    pub fn activity_of(&self, dev: &DeveloperId) -> Option<&ActivityLog> {
        self.activity.get(dev)
    }

    pub fn dir_stats(&self, dev: &DeveloperId, dir: &str) -> Option<&DirStats> {
        self.dirs.get(dev).and_then(|m| m.get(dir))
    }

    pub fn open_review_count(&self, dev: &DeveloperId) -> u32 {
        self.open_reviews.get(dev).copied().unwrap_or(0)
    }

    pub fn total_open_reviews(&self) -> u64 {
        self.open_reviews.values().map(|c| *c as u64).sum()
    }

    /// Developers with at least one recorded contribution, sorted by key.
    pub fn known_developers(&self) -> impl Iterator<Item = &DeveloperId> {
        self.activity.keys()
    }

    fn advance_clock(&mut self, to: DateTime<Utc>) -> Result<(), LedgerError> {
        if let Some(clock) = self.clock {
            if to < clock {
                return Err(LedgerError::OutOfOrder { at: to, clock });
            }
        }
        self.clock = Some(to);
        Ok(())
    }

    /// Applies one contribution event.
    ///
    /// Activity is always recorded; file knowledge and scoring aggregates
    /// are only touched for non-mega events. Events must arrive with
    /// non-decreasing timestamps.
    pub fn apply_event(&mut self, event: &ContributionEvent) -> Result<(), LedgerError> {
        self.advance_clock(event.timestamp)?;

        let log = self.activity.entry(event.actor.clone()).or_default();
        match event.provenance {
            Provenance::Authored => log.commits.push(event.timestamp),
            Provenance::Reviewed => log.reviews.push(event.timestamp),
        }
        if event.mega {
            return Ok(());
        }

        let mut touched_dirs = BTreeSet::new();
        for file in &event.files {
            touched_dirs.insert(parent_dir(file));
            let stats = self
                .files
                .entry(file.clone())
                .or_default()
                .per_dev
                .entry(event.actor.clone())
                .or_default();
            match event.provenance {
                Provenance::Authored => {
                    stats.first_authored.get_or_insert(event.timestamp);
                    stats.commit_count += 1;
                    stats.last_commit = Some(event.timestamp);
                }
                Provenance::Reviewed => {
                    stats.first_reviewed.get_or_insert(event.timestamp);
                    stats.review_count += 1;
                    stats.last_review = Some(event.timestamp);
                }
            }
        }

        for (file, comment_ts) in &event.comments {
            let knowledge = self.files.entry(file.clone()).or_default();
            let stats = knowledge.per_dev.entry(event.actor.clone()).or_default();
            stats.comment_count += 1;
            stats.comment_days.insert(utc_day(*comment_ts));
            stats.last_comment = Some(
                stats
                    .last_comment
                    .map_or(*comment_ts, |t| t.max(*comment_ts)),
            );
            let totals = &mut knowledge.review_totals;
            totals.comment_count += 1;
            totals.comment_days.insert(utc_day(*comment_ts));
            totals.last_comment = Some(
                totals
                    .last_comment
                    .map_or(*comment_ts, |t| t.max(*comment_ts)),
            );
        }

        let dev_dirs = self.dirs.entry(event.actor.clone()).or_default();
        for dir in touched_dirs {
            let stats = dev_dirs.entry(dir).or_default();
            match event.provenance {
                Provenance::Authored => {
                    stats.change_count += 1;
                    stats.last_change = Some(event.timestamp);
                }
                Provenance::Reviewed => {
                    stats.review_count += 1;
                    stats.last_review = Some(event.timestamp);
                }
            }
        }
        Ok(())
    }

    /// Registers an assigned, not-yet-merged review for workload tracking.
    pub fn open_review(&mut self, dev: &DeveloperId) {
        *self.open_reviews.entry(dev.clone()).or_insert(0) += 1;
    }

    /// Releases an open review at merge time.
    pub fn close_review(&mut self, dev: &DeveloperId) {
        if let Some(count) = self.open_reviews.get_mut(dev) {
            *count = count.saturating_sub(1);
        }
    }

    /// Activity counts over the strict 365-day lookback `(at - 365d, at]`.
    ///
    /// Active months are 30-day buckets counted back from `at`; only the
    /// twelve full buckets (the trailing 360 days) are eligible, so the
    /// result never exceeds 12.
    pub fn activity_profile(&self, dev: &DeveloperId, at: DateTime<Utc>) -> ActivityProfile {
        let Some(log) = self.activity.get(dev) else {
            return ActivityProfile::default();
        };
        let floor = at - chrono::Duration::days(365);
        let mut profile = ActivityProfile::default();
        let mut buckets = BTreeSet::new();
        let mut tally = |times: &[DateTime<Utc>]| -> u64 {
            let lo = times.partition_point(|t| *t <= floor);
            let hi = times.partition_point(|t| *t <= at);
            for ts in &times[lo..hi] {
                let days_back = (at - *ts).num_days();
                let bucket = days_back / 30;
                if bucket < 12 {
                    buckets.insert(bucket);
                }
            }
            (hi - lo) as u64
        };
        profile.commits_365 = tally(&log.commits);
        profile.reviews_365 = tally(&log.reviews);
        profile.active_months_365 = buckets.len() as u32;
        profile
    }

    /// Knowers of `file` at the end of `quarter`, minus leavers.
    ///
    /// A leaver at quarter `Q` has no commit and no review anywhere in the
    /// four quarters after `Q`. Requires four quarters of lookahead within
    /// the grid, and a fully replayed ledger (the lookahead reads future
    /// activity).
    pub fn active_devs(
        &self,
        grid: &QuarterGrid,
        quarter: usize,
        file: &str,
    ) -> Result<BTreeSet<DeveloperId>, LedgerError> {
        self.active_devs_scoped(grid, quarter, file, KnowerScope::AuthorsAndReviewers)
    }

    /// [`KnowledgeLedger::active_devs`] with an explicit knowledge scope:
    /// the authors-only scope replicates risk accounting that ignores
    /// review-acquired knowledge.
    pub fn active_devs_scoped(
        &self,
        grid: &QuarterGrid,
        quarter: usize,
        file: &str,
        scope: KnowerScope,
    ) -> Result<BTreeSet<DeveloperId>, LedgerError> {
        if !grid.has_lookahead(quarter) {
            return Err(LedgerError::InsufficientLookahead { index: quarter });
        }
        let q_end = grid
            .get(quarter)
            .expect("lookahead implies quarter exists")
            .end;
        let horizon = grid.get(quarter + 4).expect("lookahead checked above").end;
        let Some(knowledge) = self.files.get(file) else {
            return Ok(BTreeSet::new());
        };
        let mut active = BTreeSet::new();
        for (dev, stats) in &knowledge.per_dev {
            let knows = match scope {
                KnowerScope::AuthorsAndReviewers => stats.knows_at(q_end),
                KnowerScope::AuthorsOnly => stats.authored_at(q_end),
            };
            if !knows {
                continue;
            }
            let log = self.activity.get(dev);
            if log.is_some_and(|l| l.active_in(q_end, horizon)) {
                active.insert(dev.clone());
            }
        }
        Ok(active)
    }

    /// Files with at least one knowledge-attributing event at or before `at`.
    pub fn tracked_files_at(&self, at: DateTime<Utc>) -> impl Iterator<Item = &String> {
        self.files
            .iter()
            .filter(move |(_, k)| k.per_dev.values().any(|s| s.knows_at(at)))
            .map(|(f, _)| f)
    }

    /// Debug snapshot: per (file, quarter) knower and active-knower counts,
    /// as CSV.
    pub fn export_knower_counts(&self, grid: &QuarterGrid) -> String {
        let mut out = String::from("file,quarter,n_knowers,n_active_knowers\n");
        for (file, knowledge) in &self.files {
            for quarter in grid.quarters() {
                let end = quarter.end;
                let knowers = knowledge
                    .per_dev
                    .values()
                    .filter(|s| s.knows_at(end))
                    .count();
                if knowers == 0 {
                    continue;
                }
                let active = match self.active_devs(grid, quarter.index, file) {
                    Ok(set) => set.len().to_string(),
                    Err(_) => String::from(""),
                };
                out.push_str(&format!("{file},{},{knowers},{active}\n", quarter.index));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusConfig, ExclusionSummary};

    fn ts(s: &str) -> DateTime<Utc> {
        DateTime::parse_from_rfc3339(s).unwrap().with_timezone(&Utc)
    }

    fn dev(name: &str) -> DeveloperId {
        DeveloperId::new(name)
    }

    fn commit_event(actor: &str, at: &str, files: &[&str]) -> ContributionEvent {
        ContributionEvent {
            actor: dev(actor),
            provenance: Provenance::Authored,
            timestamp: ts(at),
            files: files.iter().map(|s| s.to_string()).collect(),
            mega: false,
            comments: Vec::new(),
        }
    }

    fn review_event(actor: &str, at: &str, files: &[&str]) -> ContributionEvent {
        ContributionEvent {
            actor: dev(actor),
            provenance: Provenance::Reviewed,
            timestamp: ts(at),
            files: files.iter().map(|s| s.to_string()).collect(),
            mega: false,
            comments: files.iter().map(|f| (f.to_string(), ts(at))).collect(),
        }
    }

    fn grid_over(start: &str, end: &str) -> QuarterGrid {
        let corpus = CleanCorpus {
            commits: vec![
                crate::corpus::Commit {
                    id: "a".into(),
                    author: dev("d1"),
                    timestamp: ts(start),
                    files: vec!["f.rs".into()],
                    mega: false,
                },
                crate::corpus::Commit {
                    id: "b".into(),
                    author: dev("d1"),
                    timestamp: ts(end),
                    files: vec!["f.rs".into()],
                    mega: false,
                },
            ],
            prs: Vec::new(),
            exclusions: ExclusionSummary::default(),
            config: CorpusConfig::default(),
        };
        QuarterGrid::from_corpus(&corpus).unwrap()
    }

    #[test]
    fn quarters_are_calendar_aligned() {
        let grid = grid_over("2020-02-15T00:00:00Z", "2020-11-01T00:00:00Z");
        assert_eq!(grid.len(), 4);
        assert_eq!(grid.get(0).unwrap().start, ts("2020-01-01T00:00:00Z"));
        assert_eq!(grid.get(0).unwrap().end, ts("2020-04-01T00:00:00Z"));
        assert_eq!(grid.get(3).unwrap().start, ts("2020-10-01T00:00:00Z"));
        assert_eq!(grid.quarter_of(ts("2020-05-01T00:00:00Z")), Some(1));
        assert_eq!(grid.quarter_of(ts("2019-12-31T23:59:59Z")), None);
    }

    #[test]
    fn apply_event_base_case() {
        let mut ledger = KnowledgeLedger::new();
        ledger
            .apply_event(&commit_event("d1", "2020-01-01T00:00:00Z", &["f1.rs"]))
            .unwrap();
        let knowledge = ledger.file("f1.rs").unwrap();
        let stats = knowledge.per_dev.get(&dev("d1")).unwrap();
        assert!(stats.first_authored.is_some());
        assert!(stats.first_reviewed.is_none());
        assert_eq!(knowledge.knower_count(), 1);
    }

    #[test]
    fn both_roles_one_knower() {
        let mut ledger = KnowledgeLedger::new();
        ledger
            .apply_event(&commit_event("d1", "2020-01-01T00:00:00Z", &["f1.rs"]))
            .unwrap();
        ledger
            .apply_event(&review_event("d1", "2020-02-01T00:00:00Z", &["f1.rs"]))
            .unwrap();
        let stats = ledger
            .file("f1.rs")
            .unwrap()
            .per_dev
            .get(&dev("d1"))
            .unwrap();
        assert!(stats.first_authored.is_some());
        assert!(stats.first_reviewed.is_some());
        assert_eq!(ledger.file("f1.rs").unwrap().knower_count(), 1);
    }

    #[test]
    fn mega_event_attributes_nothing() {
        let mut ledger = KnowledgeLedger::new();
        let mut event = review_event("d2", "2020-01-01T00:00:00Z", &["f1.rs"]);
        event.mega = true;
        event.comments.clear();
        ledger.apply_event(&event).unwrap();
        assert!(ledger.file("f1.rs").is_none());
        // Activity still counts.
        assert_eq!(ledger.activity_of(&dev("d2")).unwrap().reviews.len(), 1);
    }

    #[test]
    fn out_of_order_rejected() {
        let mut ledger = KnowledgeLedger::new();
        ledger
            .apply_event(&commit_event("d1", "2020-02-01T00:00:00Z", &["f1.rs"]))
            .unwrap();
        let err = ledger
            .apply_event(&commit_event("d1", "2020-01-01T00:00:00Z", &["f1.rs"]))
            .unwrap_err();
        assert!(matches!(err, LedgerError::OutOfOrder { .. }));
    }

    #[test]
    fn active_devs_requires_lookahead() {
        let grid = grid_over("2020-01-15T00:00:00Z", "2020-06-01T00:00:00Z");
        let ledger = KnowledgeLedger::new();
        let err = ledger.active_devs(&grid, 0, "f.rs").unwrap_err();
        assert!(matches!(
            err,
            LedgerError::InsufficientLookahead { index: 0 }
        ));
    }

    #[test]
    fn leaver_drops_out_after_four_silent_quarters() {
        // Grid spans 2020Q1..2021Q2 (6 quarters). d1 commits once in Q0 and
        // never again; d2 commits in Q0 and again in Q2.
        let grid = grid_over("2020-01-15T00:00:00Z", "2021-05-01T00:00:00Z");
        assert_eq!(grid.len(), 6);
        let mut ledger = KnowledgeLedger::new();
        ledger
            .apply_event(&commit_event("d1", "2020-01-20T00:00:00Z", &["f1.rs"]))
            .unwrap();
        ledger
            .apply_event(&commit_event("d2", "2020-02-20T00:00:00Z", &["f2.rs"]))
            .unwrap();
        ledger
            .apply_event(&commit_event("d2", "2020-08-20T00:00:00Z", &["other.rs"]))
            .unwrap();

        // Quarter 0 lookahead = Q1..Q4: d1 silent -> leaver; d2 active in Q2.
        let active_f1 = ledger.active_devs(&grid, 0, "f1.rs").unwrap();
        assert!(active_f1.is_empty());
        let active_f2 = ledger.active_devs(&grid, 0, "f2.rs").unwrap();
        assert_eq!(active_f2.len(), 1);
        assert!(active_f2.contains(&dev("d2")));
    }

    #[test]
    fn active_devs_subset_of_knowers() {
        let grid = grid_over("2020-01-15T00:00:00Z", "2021-05-01T00:00:00Z");
        let mut ledger = KnowledgeLedger::new();
        for (who, at) in [
            ("d1", "2020-01-20T00:00:00Z"),
            ("d2", "2020-02-20T00:00:00Z"),
            ("d3", "2020-03-20T00:00:00Z"),
        ] {
            ledger
                .apply_event(&commit_event(who, at, &["f.rs"]))
                .unwrap();
        }
        ledger
            .apply_event(&commit_event("d2", "2020-09-01T00:00:00Z", &["g.rs"]))
            .unwrap();
        let active = ledger.active_devs(&grid, 0, "f.rs").unwrap();
        let q_end = grid.get(0).unwrap().end;
        let knowers: BTreeSet<DeveloperId> = ledger
            .file("f.rs")
            .unwrap()
            .per_dev
            .iter()
            .filter(|(_, s)| s.knows_at(q_end))
            .map(|(d, _)| d.clone())
            .collect();
        assert!(active.is_subset(&knowers));
    }

    #[test]
    fn profile_empty_dev() {
        let ledger = KnowledgeLedger::new();
        let profile = ledger.activity_profile(&dev("ghost"), ts("2020-01-01T00:00:00Z"));
        assert_eq!(profile, ActivityProfile::default());
    }

    #[test]
    fn profile_twelve_consecutive_buckets() {
        let mut ledger = KnowledgeLedger::new();
        let at = ts("2021-01-01T00:00:00Z");
        // One commit in each of the 12 trailing 30-day buckets: 15, 45, ...
        // 345 days back.
        let mut instants: Vec<DateTime<Utc>> = (0..12)
            .map(|i| at - chrono::Duration::days(15 + 30 * i))
            .collect();
        instants.sort();
        for t in instants {
            ledger
                .apply_event(&ContributionEvent {
                    actor: dev("d1"),
                    provenance: Provenance::Authored,
                    timestamp: t,
                    files: vec!["f.rs".into()],
                    mega: false,
                    comments: Vec::new(),
                })
                .unwrap();
        }
        let profile = ledger.activity_profile(&dev("d1"), at);
        assert_eq!(profile.commits_365, 12);
        assert_eq!(profile.active_months_365, 12);
    }

    #[test]
    fn profile_matches_brute_force_filter() {
        // Pseudo-random timeline; oracle filters and buckets the raw list.
        let mut ledger = KnowledgeLedger::new();
        let base = ts("2018-01-01T00:00:00Z");
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut raw: Vec<(DateTime<Utc>, bool)> = Vec::new();
        let mut step = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let mut offsets: Vec<(i64, bool)> = (0..200)
            .map(|_| ((step() % 1200) as i64, step() % 2 == 0))
            .collect();
        offsets.sort();
        for (days, is_commit) in offsets {
            let t = base + chrono::Duration::days(days) + chrono::Duration::hours(3);
            raw.push((t, is_commit));
            ledger
                .apply_event(&ContributionEvent {
                    actor: dev("d1"),
                    provenance: if is_commit {
                        Provenance::Authored
                    } else {
                        Provenance::Reviewed
                    },
                    timestamp: t,
                    files: vec!["f.rs".into()],
                    mega: false,
                    comments: Vec::new(),
                })
                .unwrap();
        }
        let at = base + chrono::Duration::days(900);
        let profile = ledger.activity_profile(&dev("d1"), at);

        let floor = at - chrono::Duration::days(365);
        let mut commits = 0u64;
        let mut reviews = 0u64;
        let mut months = BTreeSet::new();
        for (t, is_commit) in &raw {
            if *t > floor && *t <= at {
                if *is_commit {
                    commits += 1;
                } else {
                    reviews += 1;
                }
                let bucket = (at - *t).num_days() / 30;
                if bucket < 12 {
                    months.insert(bucket);
                }
            }
        }
        assert_eq!(profile.commits_365, commits);
        assert_eq!(profile.reviews_365, reviews);
        assert_eq!(profile.active_months_365, months.len() as u32);
    }

    #[test]
    fn open_reviews_track_assignment_lifecycle() {
        let mut ledger = KnowledgeLedger::new();
        ledger.open_review(&dev("d1"));
        ledger.open_review(&dev("d1"));
        ledger.open_review(&dev("d2"));
        assert_eq!(ledger.open_review_count(&dev("d1")), 2);
        assert_eq!(ledger.total_open_reviews(), 3);
        ledger.close_review(&dev("d1"));
        assert_eq!(ledger.open_review_count(&dev("d1")), 1);
        assert_eq!(ledger.total_open_reviews(), 2);
    }

    #[test]
    fn parent_dir_rules() {
        assert_eq!(parent_dir("src/lib.rs"), "src");
        assert_eq!(parent_dir("a/b/c.rs"), "a/b");
        assert_eq!(parent_dir("top.rs"), "");
    }
}
