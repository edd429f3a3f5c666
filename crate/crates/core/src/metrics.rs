//! Outcome measures over quarterly snapshots: review expertise, workload
//! concentration (Gini over per-reviewer review counts), files at risk to
//! turnover, mean reciprocal rank, and the percentage deltas between actual
//! and simulated histories. Also the two purely historical analyses: the
//! authors-only versus authors-plus-reviewers risk comparison, and the
//! review workload distribution.
//!
//! The Gini coefficient is computed along two independent routes — the area
//! between the Lorenz curve and the equality line, and the normalized mean
//! absolute difference — which must agree to within 1e-9.

use std::collections::BTreeMap;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::corpus::{CleanCorpus, DeveloperId};
use crate::ledger::{utc_day, KnowerScope, KnowledgeLedger, LedgerError, QuarterGrid};
use crate::recommenders::{Recommender, RecommenderParams};
use crate::simulator::{run_simulation, ReplacementRecord, SimOutput, SimulatorError};

/// Lorenz curve in the inverted orientation: reviewers sorted busiest-first,
/// so the curve rises above the equality diagonal and its increments are
/// non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorenzCurve {
    /// `(cumulative reviewer fraction, cumulative review fraction)` from
    /// `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
}

impl LorenzCurve {
    /// Builds the curve from per-reviewer counts. `None` when the counts
    /// are empty or sum to zero.
    pub fn from_counts(counts: &[u64]) -> Option<LorenzCurve> {
        let total: u64 = counts.iter().sum();
        if counts.is_empty() || total == 0 {
            return None;
        }
        let mut sorted = counts.to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let n = sorted.len() as f64;
        let mut points = Vec::with_capacity(sorted.len() + 1);
        points.push((0.0, 0.0));
        let mut cumulative = 0u64;
        for (i, count) in sorted.iter().enumerate() {
            cumulative += count;
            points.push(((i + 1) as f64 / n, cumulative as f64 / total as f64));
        }
        Some(LorenzCurve { points })
    }

    /// Share of all reviews done by the busiest `fraction` of reviewers
    /// (nearest reviewer count, rounded up).
    pub fn top_share(&self, fraction: f64) -> f64 {
        let n = self.points.len() - 1;
        if n == 0 {
            return 0.0;
        }
        let k = ((n as f64 * fraction).ceil() as usize).clamp(1, n);
        self.points[k].1
    }

    /// Trapezoidal area under the curve.
    fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
            .sum()
    }
}

/// Gini coefficient via the Lorenz-curve area route: the area between the
/// curve and the equality line over the total area under the equality line.
pub fn gini_area(counts: &[u64]) -> Option<f64> {
    let curve = LorenzCurve::from_counts(counts)?;
    // Inverted curve lies above the diagonal: A = area(curve) - 1/2, B = 1/2.
    Some(2.0 * curve.area() - 1.0)
}

/// Gini coefficient via the normalized mean absolute difference:
/// `sum |x_i - x_j| / (2 n^2 mean)`.
pub fn gini_mean_difference(counts: &[u64]) -> Option<f64> {
    let total: u64 = counts.iter().sum();
    if counts.is_empty() || total == 0 {
        return None;
    }
    let n = counts.len() as f64;
    let mean = total as f64 / n;
    let mut sum_abs = 0.0;
    for (i, a) in counts.iter().enumerate() {
        for b in &counts[i + 1..] {
            sum_abs += (*a as f64 - *b as f64).abs();
        }
    }
    // Pairs were visited once each; the formula counts ordered pairs.
    Some(2.0 * sum_abs / (2.0 * n * n * mean))
}

/// Workload concentration for one quarter. Both computation routes must
/// agree within 1e-9; the area route's value is returned. `None` marks an
/// empty quarter, which is excluded from averages.
pub fn gini_work(counts: &[u64]) -> Option<f64> {
    let area = gini_area(counts)?;
    let mean_diff = gini_mean_difference(counts)?;
    debug_assert!(
        (area - mean_diff).abs() < 1e-9,
        "gini routes disagree: {area} vs {mean_diff}"
    );
    Some(area)
}

/// Files at risk, split by severity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FarCount {
    /// Files with zero active knowledgeable developers.
    pub abandoned: u64,
    /// Files with exactly one.
    pub hoarded: u64,
}

impl FarCount {
    pub fn total(&self) -> u64 {
        self.abandoned + self.hoarded
    }
}

/// Files at risk at the end of `quarter`: tracked files known by at most
/// one developer who is still active (not a leaver). Errors when the
/// quarter lacks the four-quarter lookahead.
pub fn far(
    ledger: &KnowledgeLedger,
    grid: &QuarterGrid,
    quarter: usize,
) -> Result<FarCount, LedgerError> {
    far_scoped(ledger, grid, quarter, KnowerScope::AuthorsAndReviewers)
}

/// [`far`] with an explicit knowledge scope.
pub fn far_scoped(
    ledger: &KnowledgeLedger,
    grid: &QuarterGrid,
    quarter: usize,
    scope: KnowerScope,
) -> Result<FarCount, LedgerError> {
    if !grid.has_lookahead(quarter) {
        return Err(LedgerError::InsufficientLookahead { index: quarter });
    }
    let q_end = grid
        .get(quarter)
        .ok_or(LedgerError::InsufficientLookahead { index: quarter })?
        .end;
    let mut count = FarCount::default();
    let tracked: Vec<&String> = ledger.tracked_files_at(q_end).collect();
    for file in tracked {
        let active = ledger.active_devs_scoped(grid, quarter, file, scope)?;
        match active.len() {
            0 => count.abandoned += 1,
            1 => count.hoarded += 1,
            _ => {}
        }
    }
    Ok(count)
}

/// Mean reciprocal rank over a replacement log: the mean of
/// `1 / rank_of_actual`, counting zero when no actual reviewer appeared in
/// the recommendation. `None` for an empty log.
pub fn mrr(log: &[ReplacementRecord]) -> Option<f64> {
    if log.is_empty() {
        return None;
    }
    let sum: f64 = log
        .iter()
        .map(|r| r.rank_of_actual.map_or(0.0, |rank| 1.0 / rank as f64))
        .sum();
    Some(sum / log.len() as f64)
}

/// Percentage change of `simulated` relative to `actual`:
/// `(simulated / actual - 1) * 100`. `None` when the actual value is zero.
pub fn percent_delta(actual: f64, simulated: f64) -> Option<f64> {
    if actual == 0.0 {
        None
    } else {
        Some((simulated / actual - 1.0) * 100.0)
    }
}

/// One reported quarter: actual and simulated outcome values plus their
/// percentage deltas. Undefined cells (excluded quarters, zero baselines)
/// are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterReport {
    pub quarter: usize,
    pub review_count: u64,
    pub expertise_actual: f64,
    pub expertise_simulated: f64,
    /// Per-review mean expertise, for cross-quarter comparison.
    pub expertise_mean_actual: Option<f64>,
    pub expertise_mean_simulated: Option<f64>,
    pub gini_actual: Option<f64>,
    pub gini_simulated: Option<f64>,
    pub far_actual: Option<FarCount>,
    pub far_simulated: Option<FarCount>,
    pub d_expertise: Option<f64>,
    pub d_gini: Option<f64>,
    pub d_far: Option<f64>,
    pub mrr: Option<f64>,
}

/// Builds the per-quarter outcome reports for a simulation.
///
/// The corpus's final quarter is excluded entirely; files-at-risk cells are
/// additionally `None` for quarters without four quarters of lookahead.
pub fn quarter_reports(output: &SimOutput) -> Vec<QuarterReport> {
    let grid = &output.grid;
    let mut reports = Vec::new();
    for accum in &output.quarters {
        let q = accum.quarter.index;
        if q >= grid.last_index() {
            continue;
        }
        let counts_actual: Vec<u64> = accum
            .reviews_per_reviewer_actual
            .values()
            .copied()
            .collect();
        let counts_sim: Vec<u64> = accum
            .reviews_per_reviewer_simulated
            .values()
            .copied()
            .collect();
        let gini_actual = gini_work(&counts_actual);
        let gini_simulated = gini_work(&counts_sim);
        let (far_actual, far_simulated) = if grid.has_lookahead(q) {
            (
                far(&output.run.actual_ledger, grid, q).ok(),
                far(&output.run.counterfactual_ledger, grid, q).ok(),
            )
        } else {
            (None, None)
        };
        let d_expertise = percent_delta(accum.expertise_actual, accum.expertise_simulated);
        let d_gini = match (gini_actual, gini_simulated) {
            (Some(a), Some(s)) => percent_delta(a, s),
            _ => None,
        };
        let d_far = match (far_actual, far_simulated) {
            (Some(a), Some(s)) => percent_delta(a.total() as f64, s.total() as f64),
            _ => None,
        };
        let quarter_mrr = if accum.recommended_prs > 0 {
            Some(accum.reciprocal_rank_sum / accum.recommended_prs as f64)
        } else {
            None
        };
        let mean = |sum: f64| {
            if accum.review_count > 0 {
                Some(sum / accum.review_count as f64)
            } else {
                None
            }
        };
        reports.push(QuarterReport {
            quarter: q,
            review_count: accum.review_count,
            expertise_actual: accum.expertise_actual,
            expertise_simulated: accum.expertise_simulated,
            expertise_mean_actual: mean(accum.expertise_actual),
            expertise_mean_simulated: mean(accum.expertise_simulated),
            gini_actual,
            gini_simulated,
            far_actual,
            far_simulated,
            d_expertise,
            d_gini,
            d_far,
            mrr: quarter_mrr,
        });
    }
    reports
}

/// Cross-quarter summary for one recommender run, mirroring the outcome
/// table columns: MRR plus the unweighted means of the three deltas over
/// the quarters where they are defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub recommender: String,
    pub seed: u64,
    pub mrr: Option<f64>,
    pub d_expertise: Option<f64>,
    pub d_gini_work: Option<f64>,
    pub d_far: Option<f64>,
    pub fallback_fraction: f64,
    pub replaced_prs: u64,
    pub skipped_prs: u64,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

/// Aggregates quarter reports into the summary row.
pub fn summarize(output: &SimOutput, reports: &[QuarterReport]) -> Summary {
    Summary {
        recommender: output.run.recommender.name().to_string(),
        seed: output.run.seed,
        mrr: mrr(&output.run.replacement_log),
        d_expertise: mean_defined(reports.iter().map(|r| r.d_expertise)),
        d_gini_work: mean_defined(reports.iter().map(|r| r.d_gini)),
        d_far: mean_defined(reports.iter().map(|r| r.d_far)),
        fallback_fraction: output.run.fallback_fraction(),
        replaced_prs: output.run.replacement_log.len() as u64,
        skipped_prs: output.run.skipped_prs,
    }
}

/// One quarter of the authors-only versus authors-plus-reviewers risk
/// comparison. No simulation is involved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FarComparisonRow {
    pub quarter: usize,
    pub far_author: FarCount,
    pub far: FarCount,
}

/// Computes files-at-risk twice per quarter over actual history: once with
/// authors-only knowledge, once crediting reviewers too.
pub fn historical_far_comparison(
    corpus: &CleanCorpus,
) -> Result<Vec<FarComparisonRow>, SimulatorError> {
    let output = crate::simulator::replay_actual(corpus)?;
    let ledger = &output.run.actual_ledger;
    let grid = &output.grid;
    let mut rows = Vec::new();
    for quarter in grid.reportable() {
        if !grid.has_lookahead(quarter.index) {
            continue;
        }
        let far_author = far_scoped(ledger, grid, quarter.index, KnowerScope::AuthorsOnly)?;
        let far_all = far_scoped(
            ledger,
            grid,
            quarter.index,
            KnowerScope::AuthorsAndReviewers,
        )?;
        rows.push(FarComparisonRow {
            quarter: quarter.index,
            far_author,
            far: far_all,
        });
    }
    Ok(rows)
}

/// Bucketing period for workload counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Period {
    Day,
    Week,
    Month,
    Quarter,
}

impl Period {
    pub fn name(&self) -> &'static str {
        match self {
            Period::Day => "day",
            Period::Week => "week",
            Period::Month => "month",
            Period::Quarter => "quarter",
        }
    }

    pub fn from_name(name: &str) -> Option<Period> {
        match name {
            "day" => Some(Period::Day),
            "week" => Some(Period::Week),
            "month" => Some(Period::Month),
            "quarter" => Some(Period::Quarter),
            _ => None,
        }
    }
}

/// Review workload distribution over actual history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadReport {
    pub period: Period,
    /// Median of the nonzero per-(reviewer, period) review counts.
    pub median: u64,
    /// 95th percentile (nearest rank).
    pub p95: u64,
    pub mean: f64,
    /// Lorenz curve over total per-reviewer review counts.
    pub lorenz: Option<LorenzCurve>,
    /// Share of all reviews done by the busiest 20% of reviewers.
    pub top_20_share: Option<f64>,
    /// Gini over total per-reviewer counts.
    pub gini: Option<f64>,
    /// Per-quarter Lorenz curves over that quarter's reviewer counts.
    pub quarterly_lorenz: Vec<(usize, LorenzCurve)>,
}

fn nearest_rank(sorted: &[u64], percentile: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (percentile / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Computes the review workload distribution: per-reviewer review counts in
/// each period (only periods where the reviewer did at least one review),
/// their percentiles, and the concentration curve over total counts.
pub fn workload_distribution(
    corpus: &CleanCorpus,
    period: Period,
) -> Result<WorkloadReport, SimulatorError> {
    let grid = QuarterGrid::from_corpus(corpus)?;
    let mut per_bucket: BTreeMap<(DeveloperId, i64), u64> = BTreeMap::new();
    let mut totals: BTreeMap<DeveloperId, u64> = BTreeMap::new();
    let mut per_quarter: BTreeMap<usize, BTreeMap<DeveloperId, u64>> = BTreeMap::new();
    for pr in &corpus.prs {
        let bucket = match period {
            Period::Day => utc_day(pr.merged_at),
            Period::Week => utc_day(pr.merged_at).div_euclid(7),
            Period::Month => i64::from(pr.merged_at.year()) * 12 + i64::from(pr.merged_at.month0()),
            Period::Quarter => grid.quarter_of(pr.merged_at).map_or(-1, |q| q as i64),
        };
        for reviewer in pr.reviewers() {
            *per_bucket.entry((reviewer.clone(), bucket)).or_insert(0) += 1;
            *totals.entry(reviewer.clone()).or_insert(0) += 1;
            if let Some(q) = grid.quarter_of(pr.merged_at) {
                *per_quarter
                    .entry(q)
                    .or_default()
                    .entry(reviewer)
                    .or_insert(0) += 1;
            }
        }
    }

    let mut observations: Vec<u64> = per_bucket.values().copied().collect();
    observations.sort_unstable();
    let mean = if observations.is_empty() {
        0.0
    } else {
        observations.iter().sum::<u64>() as f64 / observations.len() as f64
    };
    let total_counts: Vec<u64> = totals.values().copied().collect();
    let lorenz = LorenzCurve::from_counts(&total_counts);
    let quarterly_lorenz = per_quarter
        .into_iter()
        .filter_map(|(q, counts)| {
            let values: Vec<u64> = counts.values().copied().collect();
            LorenzCurve::from_counts(&values).map(|c| (q, c))
        })
        .collect();

    Ok(WorkloadReport {
        period,
        median: nearest_rank(&observations, 50.0),
        p95: nearest_rank(&observations, 95.0),
        mean,
        top_20_share: lorenz.as_ref().map(|c| c.top_share(0.2)),
        gini: gini_work(&total_counts),
        lorenz,
        quarterly_lorenz,
    })
}

/// One row of the threshold sensitivity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub k: usize,
    pub d_expertise: Option<f64>,
    pub d_gini_work: Option<f64>,
    pub d_far: Option<f64>,
}

/// Runs one full simulation per `k` in `k_range` under the same seed and
/// reports the aggregated deltas.
pub fn k_sensitivity(
    corpus: &CleanCorpus,
    recommender: Recommender,
    params: &RecommenderParams,
    seed: u64,
    k_range: impl IntoIterator<Item = usize>,
) -> Result<Vec<SensitivityRow>, SimulatorError> {
    let mut rows = Vec::new();
    for k in k_range {
        let mut swept = *params;
        swept.k = k;
        let output = run_simulation(corpus, recommender, &swept, seed)?;
        let reports = quarter_reports(&output);
        let summary = summarize(&output, &reports);
        rows.push(SensitivityRow {
            k,
            d_expertise: summary.d_expertise,
            d_gini_work: summary.d_gini_work,
            d_far: summary.d_far,
        });
    }
    Ok(rows)
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map_or(String::new(), |v| format!("{v:.6}"))
}

fn fmt_far(value: Option<FarCount>) -> (String, String, String) {
    match value {
        Some(f) => (
            f.total().to_string(),
            f.abandoned.to_string(),
            f.hoarded.to_string(),
        ),
        None => (String::new(), String::new(), String::new()),
    }
}

/// Renders quarter reports as CSV, one row per quarter.
pub fn quarterly_csv(recommender: &str, reports: &[QuarterReport]) -> String {
    let mut out = String::from(
        "recommender,quarter,reviews,expertise_actual,expertise_simulated,\
         expertise_mean_actual,expertise_mean_simulated,gini_actual,gini_simulated,\
         far_actual,far_actual_abandoned,far_actual_hoarded,\
         far_simulated,far_simulated_abandoned,far_simulated_hoarded,\
         d_expertise,d_gini_work,d_far,mrr\n",
    );
    for r in reports {
        let (fa, faa, fah) = fmt_far(r.far_actual);
        let (fs, fsa, fsh) = fmt_far(r.far_simulated);
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            recommender,
            r.quarter,
            r.review_count,
            r.expertise_actual,
            r.expertise_simulated,
            fmt_opt(r.expertise_mean_actual),
            fmt_opt(r.expertise_mean_simulated),
            fmt_opt(r.gini_actual),
            fmt_opt(r.gini_simulated),
            fa,
            faa,
            fah,
            fs,
            fsa,
            fsh,
            fmt_opt(r.d_expertise),
            fmt_opt(r.d_gini),
            fmt_opt(r.d_far),
            fmt_opt(r.mrr),
        ));
    }
    out
}

/// Renders summary rows as CSV.
pub fn summary_csv(summaries: &[Summary]) -> String {
    let mut out = String::from(
        "recommender,seed,mrr,d_expertise,d_gini_work,d_far,fallback_fraction,replaced_prs,skipped_prs\n",
    );
    for s in summaries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.6},{},{}\n",
            s.recommender,
            s.seed,
            fmt_opt(s.mrr),
            fmt_opt(s.d_expertise),
            fmt_opt(s.d_gini_work),
            fmt_opt(s.d_far),
            s.fallback_fraction,
            s.replaced_prs,
            s.skipped_prs,
        ));
    }
    out
}

/// Renders the historical risk comparison as CSV.
pub fn far_comparison_csv(rows: &[FarComparisonRow]) -> String {
    let mut out = String::from(
        "quarter,far_author,far_author_abandoned,far_author_hoarded,far,far_abandoned,far_hoarded\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.quarter,
            r.far_author.total(),
            r.far_author.abandoned,
            r.far_author.hoarded,
            r.far.total(),
            r.far.abandoned,
            r.far.hoarded,
        ));
    }
    out
}

/// Renders Lorenz curve points as CSV: the aggregate curve under quarter
/// label `all`, then one curve per quarter.
pub fn lorenz_csv(report: &WorkloadReport) -> String {
    let mut out = String::from("quarter,reviewer_fraction,review_fraction\n");
    if let Some(curve) = &report.lorenz {
        for (x, y) in &curve.points {
            out.push_str(&format!("all,{x:.6},{y:.6}\n"));
        }
    }
    for (quarter, curve) in &report.quarterly_lorenz {
        for (x, y) in &curve.points {
            out.push_str(&format!("{quarter},{x:.6},{y:.6}\n"));
        }
    }
    out
}

/// Renders the workload percentile table as CSV.
pub fn workload_csv(report: &WorkloadReport) -> String {
    let mut out = String::from("period,median,p95,mean,top_20_share,gini\n");
    out.push_str(&format!(
        "{},{},{},{:.6},{},{}\n",
        report.period.name(),
        report.median,
        report.p95,
        report.mean,
        fmt_opt(report.top_20_share),
        fmt_opt(report.gini),
    ));
    out
}

/// Renders the sensitivity sweep as CSV.
pub fn sensitivity_csv(recommender: &str, rows: &[SensitivityRow]) -> String {
    let mut out = String::from("recommender,k,d_expertise,d_gini_work,d_far\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            recommender,
            r.k,
            fmt_opt(r.d_expertise),
            fmt_opt(r.d_gini_work),
            fmt_opt(r.d_far),
        ));
    }
    out
}
