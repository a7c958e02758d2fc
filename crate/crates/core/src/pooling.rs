//! Fixed-depth pools and the partial qrels derived from them.
//!
//! A pool of depth `k` holds, per query, the union of every run's top-`k`
//! documents. Restricting a full qrels to the pool simulates what assessors
//! would have found had only the pool been judged.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{Qrels, RunList};
use crate::error::{Error, Result};
use crate::par;

/// Pool depth plus the runs that feed the pool.
#[derive(Debug, Clone, Copy)]
pub struct PoolSpec<'a> {
    depth: usize,
    runs: &'a [RunList],
}

impl<'a> PoolSpec<'a> {
    pub fn new(depth: usize, runs: &'a [RunList]) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidArgument("pool depth must be at least 1".into()));
        }
        if runs.is_empty() {
            return Err(Error::InvalidArgument("a pool needs at least one run".into()));
        }
        Ok(Self { depth, runs })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn runs(&self) -> &'a [RunList] {
        self.runs
    }
}

/// Per-query set of pooled document ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Pool {
    queries: BTreeMap<String, BTreeSet<String>>,
}

impl Pool {
    pub fn query(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.queries.get(query_id)
    }

    pub fn queries(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.queries
    }

    pub fn len(&self) -> usize {
        self.queries.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn build_pool(spec: &PoolSpec<'_>) -> Pool {
    let mut queries: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for run in spec.runs {
        for (q, list) in run.queries() {
            queries
                .entry(q.clone())
                .or_default()
                .extend(list.iter().take(spec.depth).map(|e| e.doc_id.clone()));
        }
    }
    Pool { queries }
}

/// Restricts `full` to the pooled pairs. Pooled documents that `full` never
/// judged are kept with grade 0.
pub fn make_partial_qrels(pool: &Pool, full: &Qrels) -> Qrels {
    let mut partial = Qrels::new();
    for (q, docs) in &pool.queries {
        let judged = full.query(q);
        if judged.is_none() {
            log::warn!("query {q} is pooled but absent from the full qrels; its pooled documents get grade 0");
        }
        partial.touch_query(q);
        for d in docs {
            let grade = judged.and_then(|j| j.grade(d)).unwrap_or(0);
            partial.set(q, d, grade);
        }
    }
    partial
}

/// One line of a depth sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub depth: usize,
    pub relevant_count: usize,
    /// Share of the full qrels' relevant documents, in percent.
    pub percent: f64,
}

impl SweepRow {
    pub fn fraction(&self) -> f64 {
        self.percent / 100.0
    }
}

/// Relevant documents found at `depth`, counted without materializing qrels.
fn relevant_at_depth(runs: &[RunList], full: &Qrels, depth: usize) -> usize {
    let pool = build_pool(&PoolSpec { depth, runs });
    pool.queries
        .iter()
        .map(|(q, docs)| docs.iter().filter(|d| full.is_relevant(q, d)).count())
        .sum()
}

/// Fraction of `full`'s relevant documents found. An empty qrels counts as
/// fully covered.
fn coverage(found: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        found as f64 / total as f64
    }
}

pub fn pool_sweep(runs: &[RunList], full: &Qrels, depths: &[usize]) -> Result<Vec<SweepRow>> {
    if depths.is_empty() {
        return Err(Error::InvalidArgument("depth sweep needs at least one depth".into()));
    }
    if let Some(d) = depths.iter().find(|&&d| d == 0) {
        return Err(Error::InvalidArgument(format!("invalid pool depth {d}")));
    }
    if runs.is_empty() {
        return Err(Error::InvalidArgument("a pool needs at least one run".into()));
    }
    let total = full.total_relevant();
    Ok(par::map(depths, |&depth| {
        let relevant_count = relevant_at_depth(runs, full, depth);
        SweepRow {
            depth,
            relevant_count,
            percent: 100.0 * coverage(relevant_count, total),
        }
    }))
}

/// Picks the entry of `curve` (pairs of depth and fraction, depth ascending)
/// whose fraction is closest to `target`; near-equal distances go to the
/// smaller depth.
pub fn closest_depth(curve: &[(usize, f64)], target: f64) -> Option<(usize, f64)> {
    const TIE: f64 = 1e-12;
    let mut best: Option<(usize, f64, f64)> = None;
    for &(depth, fraction) in curve {
        let dist = (fraction - target).abs();
        match best {
            Some((_, _, best_dist)) if dist >= best_dist - TIE => {}
            _ => best = Some((depth, fraction, dist)),
        }
    }
    best.map(|(d, f, _)| (d, f))
}

/// Smallest depth in `1..=longest run` whose coverage is closest to
/// `target_fraction`, with the coverage it achieves.
pub fn pick_depth_for_fraction(
    runs: &[RunList],
    full: &Qrels,
    target_fraction: f64,
) -> Result<(usize, f64)> {
    if !(target_fraction > 0.0 && target_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target fraction {target_fraction} is outside (0, 1]"
        )));
    }
    if runs.is_empty() {
        return Err(Error::InvalidArgument("a pool needs at least one run".into()));
    }
    let total = full.total_relevant();
    let max_depth = runs.iter().map(RunList::max_depth).max().unwrap_or(0).max(1);
    let mut curve = Vec::new();
    for depth in 1..=max_depth {
        let fraction = coverage(relevant_at_depth(runs, full, depth), total);
        curve.push((depth, fraction));
        // coverage is non-decreasing, so nothing deeper can be closer
        if fraction >= target_fraction {
            break;
        }
    }
    Ok(closest_depth(&curve, target_fraction).expect("curve has at least one depth"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_qrels;

    fn ranked(tag: &str, q: &str, docs: &[&str]) -> RunList {
        let n = docs.len() as f64;
        RunList::from_scores(tag, docs.iter().enumerate().map(|(i, d)| (q, *d, n - i as f64))).unwrap()
    }

    #[test]
    fn union_of_prefixes() {
        let runs = [ranked("r1", "q", &["a", "b", "x"]), ranked("r2", "q", &["b", "c", "y"])];
        let pool = build_pool(&PoolSpec::new(2, &runs).unwrap());
        let expect: BTreeSet<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(pool.query("q"), Some(&expect));
    }

    #[test]
    fn short_lists_contribute_everything() {
        let runs = [ranked("r", "q", &["a", "b", "c", "d", "e"])];
        let pool = build_pool(&PoolSpec::new(50, &runs).unwrap());
        assert_eq!(pool.query("q").unwrap().len(), 5);
    }

    #[test]
    fn spec_validation() {
        let runs = [ranked("r", "q", &["a"])];
        assert!(PoolSpec::new(0, &runs).is_err());
        assert!(PoolSpec::new(1, &[]).is_err());
    }

    #[test]
    fn restriction_keeps_pooled_grades() {
        let runs = [ranked("r", "q", &["a", "b", "c"])];
        let full = parse_qrels("q 0 a 1\nq 0 b 0\nq 0 c 1\n".as_bytes()).unwrap();
        let partial = make_partial_qrels(&build_pool(&PoolSpec::new(2, &runs).unwrap()), &full);
        assert_eq!(partial.grade("q", "a"), Some(1));
        assert_eq!(partial.grade("q", "b"), Some(0));
        assert_eq!(partial.grade("q", "c"), None);
        assert_eq!(partial.relevant_count("q"), 1);
        assert_eq!(full.relevant_count("q"), 2);
    }

    #[test]
    fn unjudged_pooled_docs_are_non_relevant() {
        let runs = [ranked("r", "q", &["new", "a"]), ranked("s", "lost", &["z"])];
        let full = parse_qrels("q 0 a 1\n".as_bytes()).unwrap();
        let partial = make_partial_qrels(&build_pool(&PoolSpec::new(2, &runs).unwrap()), &full);
        assert_eq!(partial.grade("q", "new"), Some(0));
        assert_eq!(partial.grade("lost", "z"), Some(0));
    }

    #[test]
    fn saturated_pool_recovers_all_relevant() {
        let runs = [ranked("r", "q", &["a", "b", "c"])];
        let full = parse_qrels("q 0 a 1\nq 0 c 3\n".as_bytes()).unwrap();
        let partial = make_partial_qrels(&build_pool(&PoolSpec::new(3, &runs).unwrap()), &full);
        assert_eq!(partial.relevant_count("q"), full.relevant_count("q"));
        let rows = pool_sweep(&runs, &full, &[1, 2, 3]).unwrap();
        assert_eq!(rows[2].percent, 100.0);
    }

    #[test]
    fn closest_depth_by_enumeration() {
        let curve = [(1, 0.10), (2, 0.19), (3, 0.30)];
        // brute force: argmin over every depth of |f - 0.20|
        let brute = curve
            .iter()
            .min_by(|a, b| (a.1 - 0.2f64).abs().total_cmp(&(b.1 - 0.2f64).abs()))
            .unwrap();
        assert_eq!(brute.0, 2);
        assert_eq!(closest_depth(&curve, 0.20), Some((2, 0.19)));
    }

    #[test]
    fn equidistant_depths_prefer_smaller() {
        assert_eq!(closest_depth(&[(1, 0.1), (2, 0.3)], 0.2), Some((1, 0.1)));
    }

    #[test]
    fn target_fraction_bounds() {
        let runs = [ranked("r", "q", &["a"])];
        let full = Qrels::new();
        assert!(pick_depth_for_fraction(&runs, &full, 0.0).is_err());
        assert!(pick_depth_for_fraction(&runs, &full, 1.5).is_err());
        assert!(pool_sweep(&runs, &full, &[]).is_err());
    }
}
