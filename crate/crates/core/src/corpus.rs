//! Corpus ingestion: raw commit and pull-request event files are parsed,
//! identities unified, and exclusion rules applied to produce a clean,
//! time-ordered event stream.
//!
//! Input is two JSONL files (one commit record or one pull-request record per
//! line) plus an optional JSON alias table. Cleaning drops bot activity,
//! non-code files, unmerged pull requests, post-merge review comments, and
//! self-reviews; changes touching at least `mega_change_threshold` files are
//! kept as events but flagged so that no knowledge is ever attributed to them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

/// Normalized developer identity key.
///
/// Two raw author records that refer to the same person map to the same key
/// after [`unify_identity`]. The key is lowercased and trimmed; ordering is
/// plain byte order, which is what every deterministic tie-break in the
/// engine relies on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeveloperId(String);

impl DeveloperId {
    /// Wraps an already-normalized key. Most callers should go through
    /// [`unify_identity`] instead.
    pub fn new(key: impl Into<String>) -> Self {
        DeveloperId(key.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DeveloperId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Table mapping raw normalized keys to canonical keys.
pub type AliasTable = BTreeMap<String, String>;

/// A cleaned commit event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commit {
    pub id: String,
    pub author: DeveloperId,
    pub timestamp: DateTime<Utc>,
    /// Repository-relative code file paths retained after filtering.
    pub files: Vec<String>,
    /// True when the raw change touched `mega_change_threshold` or more
    /// files. Mega events stay in the stream (they are still activity) but
    /// attribute no file knowledge.
    pub mega: bool,
}

/// A single review action inside a pull request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewEvent {
    pub reviewer: DeveloperId,
    pub timestamp: DateTime<Utc>,
    /// File-scoped comments name their file; approvals and PR-level comments
    /// carry `None` and are treated as touching every file in the PR.
    pub file: Option<String>,
}

/// A cleaned, merged pull request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullRequest {
    pub id: String,
    pub author: DeveloperId,
    pub created_at: DateTime<Utc>,
    pub merged_at: DateTime<Utc>,
    /// Code files under review after filtering.
    pub files: Vec<String>,
    /// Retained review events: pre-merge, non-self, non-bot.
    pub review_events: Vec<ReviewEvent>,
    /// See [`Commit::mega`].
    pub mega: bool,
}

impl PullRequest {
    /// Distinct reviewers, sorted by key. This is the reviewer set every
    /// downstream stage (replacement, knowledge attribution, workload)
    /// operates on.
    pub fn reviewers(&self) -> Vec<DeveloperId> {
        let set: BTreeSet<&DeveloperId> = self.review_events.iter().map(|e| &e.reviewer).collect();
        set.into_iter().cloned().collect()
    }
}

/// Ingestion configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusConfig {
    /// Changes touching at least this many files attribute no knowledge.
    pub mega_change_threshold: usize,
    /// File suffixes counted as code, e.g. `.rs`, `.cs`.
    pub code_extensions: BTreeSet<String>,
    /// Explicitly known bot identities, in addition to the `*bot` suffix rule.
    pub bot_names: BTreeSet<DeveloperId>,
    /// Optional calendar date anchoring quarter 0; defaults to the calendar
    /// quarter of the earliest event.
    pub quarter_anchor: Option<NaiveDate>,
}

impl CorpusConfig {
    pub fn new(code_extensions: impl IntoIterator<Item = String>) -> Self {
        CorpusConfig {
            mega_change_threshold: 100,
            code_extensions: code_extensions.into_iter().collect(),
            bot_names: BTreeSet::new(),
            quarter_anchor: None,
        }
    }

    fn is_code_file(&self, path: &str) -> bool {
        self.code_extensions
            .iter()
            .any(|ext| path.ends_with(ext.as_str()))
    }
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig::new(
            [
                ".rs", ".cs", ".java", ".scala", ".go", ".py", ".c", ".cpp", ".h",
            ]
            .iter()
            .map(|s| s.to_string()),
        )
    }
}

/// Per-category counts of everything the cleaning pipeline dropped or
/// flagged. Retained + excluded always reconciles with the raw input count
/// at each granularity (commits, PRs, review events).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionSummary {
    pub raw_commits: u64,
    pub retained_commits: u64,
    pub bot_commits: u64,
    pub non_code_commits: u64,
    /// Retained but knowledge-inert commits.
    pub mega_commits: u64,

    pub raw_prs: u64,
    pub retained_prs: u64,
    pub bot_prs: u64,
    pub unmerged_prs: u64,
    pub non_code_prs: u64,
    /// Retained but knowledge-inert PRs.
    pub mega_prs: u64,

    pub raw_reviews: u64,
    pub retained_reviews: u64,
    pub post_merge_reviews: u64,
    pub self_reviews: u64,
    pub bot_reviews: u64,
    pub non_code_reviews: u64,
    /// Review events discarded because their whole PR was dropped.
    pub reviews_on_dropped_prs: u64,
}

impl ExclusionSummary {
    /// Conservation check: every raw event is either retained or counted in
    /// exactly one exclusion category.
    pub fn is_balanced(&self) -> bool {
        self.raw_commits == self.retained_commits + self.bot_commits + self.non_code_commits
            && self.raw_prs
                == self.retained_prs + self.bot_prs + self.unmerged_prs + self.non_code_prs
            && self.raw_reviews
                == self.retained_reviews
                    + self.post_merge_reviews
                    + self.self_reviews
                    + self.bot_reviews
                    + self.non_code_reviews
                    + self.reviews_on_dropped_prs
    }
}

/// The cleaned, time-ordered event corpus.
///
/// Commits are sorted by `(timestamp, id)` and pull requests by
/// `(merged_at, id)`, so replaying the same inputs always yields the same
/// serialized bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanCorpus {
    pub commits: Vec<Commit>,
    pub prs: Vec<PullRequest>,
    pub exclusions: ExclusionSummary,
    pub config: CorpusConfig,
}

impl CleanCorpus {
    /// Earliest event instant (commit timestamp or PR creation), if any.
    pub fn first_instant(&self) -> Option<DateTime<Utc>> {
        let first_commit = self.commits.first().map(|c| c.timestamp);
        let first_pr = self.prs.iter().map(|p| p.created_at).min();
        match (first_commit, first_pr) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Latest event instant (commit timestamp or PR merge), if any.
    pub fn last_instant(&self) -> Option<DateTime<Utc>> {
        let last_commit = self.commits.last().map(|c| c.timestamp);
        let last_pr = self.prs.last().map(|p| p.merged_at);
        match (last_commit, last_pr) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.commits.is_empty() && self.prs.is_empty()
    }
}

/// Errors raised while loading or cleaning a corpus.
#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: malformed record: {detail}")]
    MalformedLine {
        file: String,
        line: usize,
        detail: String,
    },
    #[error("{file}:{line}: unparseable timestamp {value:?}")]
    BadTimestamp {
        file: String,
        line: usize,
        value: String,
    },
    #[error("{file}:{line}: duplicate event id {id:?}")]
    DuplicateId {
        file: String,
        line: usize,
        id: String,
    },
    #[error("identity record has neither name nor email")]
    EmptyIdentity,
    #[error("invalid alias table: {0}")]
    BadAliasTable(String),
    #[error("invalid corpus config: {0}")]
    BadConfig(&'static str),
}

/// Normalizes a raw (name, email) pair into a [`DeveloperId`].
///
/// The default key is the lowercased, trimmed local part of the email; when
/// the email is empty the lowercased, trimmed name is used. Alias table
/// entries, looked up by the default key, take precedence and map it to a
/// canonical key.
pub fn unify_identity(
    raw_name: &str,
    raw_email: &str,
    alias_table: &AliasTable,
) -> Result<DeveloperId, CorpusError> {
    let name = raw_name.trim();
    let email = raw_email.trim();
    if name.is_empty() && email.is_empty() {
        return Err(CorpusError::EmptyIdentity);
    }
    let key = if !email.is_empty() {
        let local = email.split('@').next().unwrap_or(email);
        local.to_lowercase()
    } else {
        name.to_lowercase()
    };
    match alias_table.get(&key) {
        Some(canonical) => Ok(DeveloperId(canonical.trim().to_lowercase())),
        None => Ok(DeveloperId(key)),
    }
}

/// True when the developer is a bot: either listed in `bot_names` or the key
/// ends with the token `bot` (e.g. `dependabot`, `ci-bot`). A `bot` fragment
/// in the middle of the name (`abbot-smith`) does not count.
pub fn is_bot(dev: &DeveloperId, config: &CorpusConfig) -> bool {
    config.bot_names.contains(dev) || dev.as_str().ends_with("bot")
}

// Raw wire records. Fields mirror the JSONL schema exactly.

#[derive(Debug, Deserialize)]
struct RawCommit {
    id: String,
    #[serde(default)]
    author_name: String,
    #[serde(default)]
    author_email: String,
    timestamp: String,
    #[serde(default)]
    files: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawReview {
    #[serde(default)]
    reviewer_name: String,
    #[serde(default)]
    reviewer_email: String,
    timestamp: String,
    #[serde(default)]
    file: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawPr {
    id: String,
    #[serde(default)]
    author_name: String,
    #[serde(default)]
    author_email: String,
    created_at: String,
    #[serde(default)]
    merged_at: Option<String>,
    #[serde(default)]
    files: Vec<String>,
    #[serde(default)]
    reviews: Vec<RawReview>,
}

fn parse_instant(value: &str, file: &str, line: usize) -> Result<DateTime<Utc>, CorpusError> {
    DateTime::parse_from_rfc3339(value)
        .map(|dt| dt.with_timezone(&Utc))
        .map_err(|_| CorpusError::BadTimestamp {
            file: file.to_string(),
            line,
            value: value.to_string(),
        })
}

/// Loads and cleans a corpus from commit and pull-request JSONL files.
///
/// The returned commits are sorted by `(timestamp, id)` and PRs by
/// `(merged_at, id)`; everything dropped along the way is tallied in the
/// [`ExclusionSummary`].
pub fn load_corpus(
    commit_file: &Path,
    pr_file: &Path,
    aliases: &AliasTable,
    config: &CorpusConfig,
) -> Result<CleanCorpus, CorpusError> {
    let commit_text = fs::read_to_string(commit_file).map_err(|e| CorpusError::Io {
        path: commit_file.display().to_string(),
        source: e,
    })?;
    let pr_text = fs::read_to_string(pr_file).map_err(|e| CorpusError::Io {
        path: pr_file.display().to_string(),
        source: e,
    })?;
    load_corpus_from_strs(
        &commit_text,
        &commit_file.display().to_string(),
        &pr_text,
        &pr_file.display().to_string(),
        aliases,
        config,
    )
}

/// In-memory variant of [`load_corpus`]; the `*_name` arguments only label
/// error messages.
pub fn load_corpus_from_strs(
    commit_text: &str,
    commit_name: &str,
    pr_text: &str,
    pr_name: &str,
    aliases: &AliasTable,
    config: &CorpusConfig,
) -> Result<CleanCorpus, CorpusError> {
    if config.mega_change_threshold < 1 {
        return Err(CorpusError::BadConfig(
            "mega_change_threshold must be at least 1",
        ));
    }
    if config.code_extensions.is_empty() {
        return Err(CorpusError::BadConfig("code_extensions must not be empty"));
    }
    let mut summary = ExclusionSummary::default();
    let mut commits = Vec::new();
    let mut seen_commit_ids = BTreeSet::new();

    for (idx, raw_line) in commit_text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let raw: RawCommit =
            serde_json::from_str(trimmed).map_err(|e| CorpusError::MalformedLine {
                file: commit_name.to_string(),
                line,
                detail: e.to_string(),
            })?;
        if !seen_commit_ids.insert(raw.id.clone()) {
            return Err(CorpusError::DuplicateId {
                file: commit_name.to_string(),
                line,
                id: raw.id,
            });
        }
        summary.raw_commits += 1;

        let timestamp = parse_instant(&raw.timestamp, commit_name, line)?;
        let author = unify_identity(&raw.author_name, &raw.author_email, aliases)?;
        if is_bot(&author, config) {
            summary.bot_commits += 1;
            continue;
        }
        let mega = raw.files.len() >= config.mega_change_threshold;
        let files: Vec<String> = raw
            .files
            .into_iter()
            .filter(|f| config.is_code_file(f))
            .collect();
        if files.is_empty() {
            summary.non_code_commits += 1;
            continue;
        }
        if mega {
            summary.mega_commits += 1;
        }
        summary.retained_commits += 1;
        commits.push(Commit {
            id: raw.id,
            author,
            timestamp,
            files,
            mega,
        });
    }

    let mut prs = Vec::new();
    let mut seen_pr_ids = BTreeSet::new();

    for (idx, raw_line) in pr_text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let raw: RawPr = serde_json::from_str(trimmed).map_err(|e| CorpusError::MalformedLine {
            file: pr_name.to_string(),
            line,
            detail: e.to_string(),
        })?;
        if !seen_pr_ids.insert(raw.id.clone()) {
            return Err(CorpusError::DuplicateId {
                file: pr_name.to_string(),
                line,
                id: raw.id,
            });
        }
        summary.raw_prs += 1;
        summary.raw_reviews += raw.reviews.len() as u64;

        let author = unify_identity(&raw.author_name, &raw.author_email, aliases)?;
        let created_at = parse_instant(&raw.created_at, pr_name, line)?;

        let merged_at = match raw.merged_at.as_deref() {
            Some(v) if !v.is_empty() => parse_instant(v, pr_name, line)?,
            _ => {
                summary.unmerged_prs += 1;
                summary.reviews_on_dropped_prs += raw.reviews.len() as u64;
                continue;
            }
        };
        if merged_at < created_at {
            return Err(CorpusError::MalformedLine {
                file: pr_name.to_string(),
                line,
                detail: format!("merged_at precedes created_at in PR {:?}", raw.id),
            });
        }
        if is_bot(&author, config) {
            summary.bot_prs += 1;
            summary.reviews_on_dropped_prs += raw.reviews.len() as u64;
            continue;
        }

        let mega = raw.files.len() >= config.mega_change_threshold;
        let files: Vec<String> = raw
            .files
            .into_iter()
            .filter(|f| config.is_code_file(f))
            .collect();
        if files.is_empty() {
            summary.non_code_prs += 1;
            summary.reviews_on_dropped_prs += raw.reviews.len() as u64;
            continue;
        }

        let mut review_events = Vec::new();
        for review in raw.reviews {
            let reviewer = unify_identity(&review.reviewer_name, &review.reviewer_email, aliases)?;
            let timestamp = parse_instant(&review.timestamp, pr_name, line)?;
            if timestamp > merged_at {
                summary.post_merge_reviews += 1;
                continue;
            }
            if reviewer == author {
                summary.self_reviews += 1;
                continue;
            }
            if is_bot(&reviewer, config) {
                summary.bot_reviews += 1;
                continue;
            }
            // File-scoped comments must target a retained code file of this PR.
            let file = match review.file {
                Some(f) => {
                    if files.iter().any(|pf| pf == &f) {
                        Some(f)
                    } else {
                        summary.non_code_reviews += 1;
                        continue;
                    }
                }
                None => None,
            };
            summary.retained_reviews += 1;
            review_events.push(ReviewEvent {
                reviewer,
                timestamp,
                file,
            });
        }
        if mega {
            summary.mega_prs += 1;
        }
        summary.retained_prs += 1;
        prs.push(PullRequest {
            id: raw.id,
            author,
            created_at,
            merged_at,
            files,
            review_events,
            mega,
        });
    }

    commits.sort_by(|a, b| (a.timestamp, &a.id).cmp(&(b.timestamp, &b.id)));
    prs.sort_by(|a, b| (a.merged_at, &a.id).cmp(&(b.merged_at, &b.id)));

    Ok(CleanCorpus {
        commits,
        prs,
        exclusions: summary,
        config: config.clone(),
    })
}

/// Parses an alias table from its JSON text (a flat string-to-string map).
pub fn parse_alias_table(text: &str) -> Result<AliasTable, CorpusError> {
    let table: BTreeMap<String, String> =
        serde_json::from_str(text).map_err(|e| CorpusError::BadAliasTable(e.to_string()))?;
    Ok(table
        .into_iter()
        .map(|(k, v)| (k.trim().to_lowercase(), v.trim().to_lowercase()))
        .collect())
}
