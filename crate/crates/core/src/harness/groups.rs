use std::collections::BTreeSet;
use std::io::Write;
use std::str::FromStr;

use crate::corpus::{natural_query_order, Qrels, RunList};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvalReport};

/// How queries are grouped by their relevant-document count R(q).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupMode {
    /// Group A holds queries with R(q) <= t, group B the rest.
    Threshold(usize),
    /// Three contiguous groups of near-equal size in ascending R(q).
    Tertiles,
}

impl FromStr for GroupMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("tertiles") {
            return Ok(GroupMode::Tertiles);
        }
        s.strip_prefix("threshold:")
            .and_then(|t| t.parse().ok())
            .map(GroupMode::Threshold)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("group mode {s:?}: expected `threshold:<n>` or `tertiles`"))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub label: String,
    pub queries: BTreeSet<String>,
    /// Mean R(q) over the group under the grouping qrels.
    pub mean_relevant: f64,
}

fn make_group(label: &str, ids: &[(String, usize)]) -> QueryGroup {
    let mean_relevant = if ids.is_empty() {
        0.0
    } else {
        ids.iter().map(|(_, r)| *r as f64).sum::<f64>() / ids.len() as f64
    };
    QueryGroup {
        label: label.to_owned(),
        queries: ids.iter().map(|(q, _)| q.clone()).collect(),
        mean_relevant,
    }
}

/// Tertile sizes for `n` queries: a single leftover query goes to the
/// middle group, two leftovers go one to each outer group.
fn tertile_sizes(n: usize) -> [usize; 3] {
    let base = n / 3;
    match n % 3 {
        0 => [base; 3],
        1 => [base, base + 1, base],
        _ => [base + 1, base, base + 1],
    }
}

pub fn group_by_relcount(qrels: &Qrels, mode: GroupMode) -> Result<Vec<QueryGroup>> {
    let with_counts: Vec<(String, usize)> = natural_query_order(qrels.query_ids())
        .into_iter()
        .map(|q| {
            let r = qrels.relevant_count(&q);
            (q, r)
        })
        .collect();
    match mode {
        GroupMode::Threshold(t) => {
            let (low, high): (Vec<_>, Vec<_>) = with_counts.into_iter().partition(|(_, r)| *r <= t);
            Ok(vec![make_group("A", &low), make_group("B", &high)])
        }
        GroupMode::Tertiles => {
            if with_counts.len() < 3 {
                return Err(Error::InvalidArgument(format!(
                    "tertile grouping needs at least 3 queries, found {}",
                    with_counts.len()
                )));
            }
            let mut sorted = with_counts;
            // stable: equal counts keep natural query order
            sorted.sort_by_key(|(_, r)| *r);
            let [low, mid, _] = tertile_sizes(sorted.len());
            Ok(vec![
                make_group("Low", &sorted[..low]),
                make_group("Middle", &sorted[low..low + mid]),
                make_group("High", &sorted[low + mid..]),
            ])
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroupReport {
    pub label: String,
    pub mean_relevant: f64,
    pub report: EvalReport,
}

/// Evaluates `run` per group and over the union of all groups (labelled
/// `all`, reported last). Empty groups are skipped.
pub fn grouped_eval(run: &RunList, qrels: &Qrels, groups: &[QueryGroup]) -> Result<Vec<GroupReport>> {
    let mut out = Vec::with_capacity(groups.len() + 1);
    let mut all = BTreeSet::new();
    let mut relevant_sum = 0.0;
    for g in groups {
        if g.queries.is_empty() {
            log::warn!("group {} is empty; skipped", g.label);
            continue;
        }
        all.extend(g.queries.iter().cloned());
        relevant_sum += g.mean_relevant * g.queries.len() as f64;
        out.push(GroupReport {
            label: g.label.clone(),
            mean_relevant: g.mean_relevant,
            report: evaluate(run, qrels, &g.queries)?,
        });
    }
    if all.is_empty() {
        return Err(Error::InvalidArgument("every group is empty".into()));
    }
    out.push(GroupReport {
        label: "all".to_owned(),
        mean_relevant: relevant_sum / all.len() as f64,
        report: evaluate(run, qrels, &all)?,
    });
    Ok(out)
}

pub fn write_grouped_csv<W: Write>(reports: &[GroupReport], mut out: W) -> std::io::Result<()> {
    writeln!(out, "run,group,num_queries,mean_relevant,map,rp,p10,p20")?;
    for g in reports {
        let m = &g.report.mean;
        writeln!(
            out,
            "{},{},{},{:.2},{:.6},{:.6},{:.6},{:.6}",
            g.report.run_id,
            g.label,
            g.report.num_queries(),
            g.mean_relevant,
            m.map,
            m.rp,
            m.p10,
            m.p20
        )?;
    }
    Ok(())
}
