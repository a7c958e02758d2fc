//! Binary-relevance metrics: AP/MAP, R-precision, P@10 and P@20.
//!
//! Queries with no relevant document under the active qrels have no AP or
//! R-precision and are left out of those means, as trec_eval does. P@k is
//! defined for every query and always averaged over the full query set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::corpus::{natural_query_order, QueryJudgments, Qrels, RunEntry, RunList};
use crate::error::{Error, Result};
use crate::par;

impl AsRef<str> for RunEntry {
    fn as_ref(&self) -> &str {
        &self.doc_id
    }
}

/// Average precision over `ranked`, normalized by R(q) of `judgments`.
/// `None` when R(q) = 0.
pub fn average_precision<D: AsRef<str>>(ranked: &[D], judgments: &QueryJudgments) -> Option<f64> {
    let total = judgments.relevant_count();
    if total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranked.iter().enumerate() {
        if judgments.is_relevant(d.as_ref()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / total as f64)
}

fn hits_in_top<D: AsRef<str>>(ranked: &[D], judgments: &QueryJudgments, k: usize) -> usize {
    ranked
        .iter()
        .take(k)
        .filter(|d| judgments.is_relevant(d.as_ref()))
        .count()
}

/// Precision in the top R(q). `None` when R(q) = 0.
pub fn r_precision<D: AsRef<str>>(ranked: &[D], judgments: &QueryJudgments) -> Option<f64> {
    let total = judgments.relevant_count();
    if total == 0 {
        return None;
    }
    Some(hits_in_top(ranked, judgments, total) as f64 / total as f64)
}

/// Precision at `cutoff`. The denominator stays `cutoff` for shorter lists.
pub fn precision_at<D: AsRef<str>>(ranked: &[D], judgments: &QueryJudgments, cutoff: usize) -> f64 {
    assert!(cutoff >= 1, "precision cutoff must be positive");
    hits_in_top(ranked, judgments, cutoff) as f64 / cutoff as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Map,
    Rp,
    P10,
    P20,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Map, Metric::Rp, Metric::P10, Metric::P20];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Map => "map",
            Metric::Rp => "rp",
            Metric::P10 => "p10",
            Metric::P20 => "p20",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "map" => Ok(Metric::Map),
            "rp" | "r-prec" => Ok(Metric::Rp),
            "p10" | "p@10" => Ok(Metric::P10),
            "p20" | "p@20" => Ok(Metric::P20),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryMetrics {
    pub relevant: usize,
    pub ap: Option<f64>,
    pub rp: Option<f64>,
    pub p10: f64,
    pub p20: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanMetrics {
    pub map: f64,
    pub rp: f64,
    pub p10: f64,
    pub p20: f64,
}

impl MeanMetrics {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Map => self.map,
            Metric::Rp => self.rp,
            Metric::P10 => self.p10,
            Metric::P20 => self.p20,
        }
    }
}

/// Per-query and mean metrics of one run under one qrels.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub run_id: String,
    pub qrels_id: String,
    pub per_query: BTreeMap<String, QueryMetrics>,
    pub mean: MeanMetrics,
    /// Evaluated queries the run has no list for; they score 0.
    pub missing_from_run: Vec<String>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl EvalReport {
    pub fn with_qrels_id(mut self, id: &str) -> Self {
        self.qrels_id = id.to_owned();
        self
    }

    pub fn metric(&self, metric: Metric) -> f64 {
        self.mean.get(metric)
    }

    pub fn num_queries(&self) -> usize {
        self.per_query.len()
    }

    /// Mean R(q) over the evaluated queries.
    pub fn mean_relevant(&self) -> f64 {
        mean(self.per_query.values().map(|m| m.relevant as f64))
    }

    fn compute_means(per_query: &BTreeMap<String, QueryMetrics>) -> MeanMetrics {
        MeanMetrics {
            map: mean(per_query.values().filter_map(|m| m.ap)),
            rp: mean(per_query.values().filter_map(|m| m.rp)),
            p10: mean(per_query.values().map(|m| m.p10)),
            p20: mean(per_query.values().map(|m| m.p20)),
        }
    }

    /// `query_id,map,rp,p10,p20` per query in natural order, then `__mean__`.
    /// Undefined AP/RP values are left empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let fmt_opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        writeln!(out, "query_id,map,rp,p10,p20")?;
        for q in natural_query_order(self.per_query.keys().map(String::as_str)) {
            let m = &self.per_query[&q];
            writeln!(out, "{q},{},{},{:.6},{:.6}", fmt_opt(m.ap), fmt_opt(m.rp), m.p10, m.p20)?;
        }
        let m = &self.mean;
        writeln!(out, "__mean__,{:.6},{:.6},{:.6},{:.6}", m.map, m.rp, m.p10, m.p20)
    }
}

/// Scores `run` against `qrels` over `query_set`.
pub fn evaluate(run: &RunList, qrels: &Qrels, query_set: &BTreeSet<String>) -> Result<EvalReport> {
    if query_set.is_empty() {
        return Err(Error::InvalidArgument("evaluation needs at least one query".into()));
    }
    let no_judgments = QueryJudgments::default();
    let queries: Vec<&String> = query_set.iter().collect();
    let rows = par::map(&queries, |&q| {
        let judgments = qrels.query(q).unwrap_or(&no_judgments);
        let ranked = run.ranking(q).unwrap_or(&[]);
        let metrics = QueryMetrics {
            relevant: judgments.relevant_count(),
            ap: average_precision(ranked, judgments),
            rp: r_precision(ranked, judgments),
            p10: precision_at(ranked, judgments, 10),
            p20: precision_at(ranked, judgments, 20),
        };
        (q.clone(), metrics)
    });
    let missing_from_run: Vec<String> = query_set
        .iter()
        .filter(|q| run.ranking(q).is_none())
        .cloned()
        .collect();
    if !missing_from_run.is_empty() {
        log::warn!(
            "run {}: {} evaluated quer{} absent from the run score 0",
            run.tag(),
            missing_from_run.len(),
            if missing_from_run.len() == 1 { "y is" } else { "ies are" }
        );
    }
    let per_query: BTreeMap<String, QueryMetrics> = rows.into_iter().collect();
    Ok(EvalReport {
        run_id: run.tag().to_owned(),
        qrels_id: "qrels".to_owned(),
        mean: EvalReport::compute_means(&per_query),
        per_query,
        missing_from_run,
    })
}

/// Relative change `(partial - full) / full`. `None` when `full` is 0 and
/// `partial` is not.
pub fn percent_variance(full: f64, partial: f64) -> Option<f64> {
    if full == 0.0 {
        return (partial == 0.0).then_some(0.0);
    }
    Some((partial - full) / full)
}

/// Renders a relative change as a signed percentage, e.g. `-31.83%`.
pub fn format_variance(variance: Option<f64>) -> String {
    match variance {
        Some(v) => format!("{:+.2}%", 100.0 * v),
        None => "n/a".to_owned(),
    }
}

/// One metric of one run under the full qrels and under one partial qrels.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub qrels_label: String,
    pub metric: Metric,
    pub full: f64,
    pub partial: f64,
}

impl SensitivityRow {
    pub fn variance(&self) -> Option<f64> {
        percent_variance(self.full, self.partial)
    }

    pub fn variance_label(&self) -> String {
        format_variance(self.variance())
    }
}

/// Evaluates `run` under `full` and under each labelled partial qrels, over
/// the queries of `full`, and reports how each mean metric moves.
pub fn sensitivity_table(
    run: &RunList,
    full: &Qrels,
    partials: &[(String, Qrels)],
) -> Result<Vec<SensitivityRow>> {
    let queries: BTreeSet<String> = full.query_ids().map(str::to_owned).collect();
    let base = evaluate(run, full, &queries)?;
    let mut rows = Vec::with_capacity(partials.len() * Metric::ALL.len());
    for (label, partial) in partials {
        let report = evaluate(run, partial, &queries)?;
        rows.extend(Metric::ALL.iter().map(|&metric| SensitivityRow {
            qrels_label: label.clone(),
            metric,
            full: base.metric(metric),
            partial: report.metric(metric),
        }));
    }
    Ok(rows)
}

/// Writes one line per qrels: the full values first, then each partial
/// with its variance next to every metric.
pub fn write_sensitivity_csv<W: Write>(rows: &[SensitivityRow], mut out: W) -> std::io::Result<()> {
    write!(out, "qrels")?;
    for m in Metric::ALL {
        write!(out, ",{m},{m}_variance")?;
    }
    writeln!(out)?;
    if rows.is_empty() {
        return Ok(());
    }
    let value = |label: &str, metric: Metric| rows.iter().find(|r| r.qrels_label == label && r.metric == metric);

    write!(out, "full")?;
    for m in Metric::ALL {
        let full = rows.iter().find(|r| r.metric == m).map_or(0.0, |r| r.full);
        write!(out, ",{full:.4},")?;
    }
    writeln!(out)?;

    let mut labels: Vec<&str> = Vec::new();
    for r in rows {
        if !labels.contains(&r.qrels_label.as_str()) {
            labels.push(&r.qrels_label);
        }
    }
    for label in labels {
        write!(out, "{label}")?;
        for m in Metric::ALL {
            match value(label, m) {
                Some(r) => write!(out, ",{:.4},{}", r.partial, r.variance_label())?,
                None => write!(out, ",,")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}
