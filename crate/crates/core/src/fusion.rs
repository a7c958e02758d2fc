//! Rank-to-score normalization and the fusion methods.
//!
//! Every method produces a [`FusedRun`]: per query, documents sorted by fused
//! score descending with doc id ascending as the tie-break, ranked 1..L and
//! truncated to the requested depth.
//!
//! Fused scores are accumulated from their terms in sorted order, so the sum
//! does not depend on the order runs were supplied in, and then rounded to 12
//! significant digits before ranking. Scores that are equal in exact
//! arithmetic (0.5 + 0.1 against 0.2 + 0.4) therefore tie and fall through to
//! the doc id tie-break instead of being split by the last bit of rounding.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::corpus::{rank_by_score, RunList};
use crate::error::{Error, Result};
use crate::par;
use crate::regression::WeightVector;

pub const DEFAULT_RECIPROCAL_CONSTANT: f64 = 60.0;
pub const DEFAULT_OUTPUT_DEPTH: usize = 1000;

/// A fused run is an ordinary canonical run whose scores are fused scores.
pub type FusedRun = RunList;

/// Per-query document scores derived from a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredList {
    tag: String,
    queries: BTreeMap<String, BTreeMap<String, f64>>,
}

impl ScoredList {
    pub fn from_maps(tag: &str, queries: BTreeMap<String, BTreeMap<String, f64>>) -> Self {
        Self {
            tag: tag.to_owned(),
            queries,
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn query(&self, query_id: &str) -> Option<&BTreeMap<String, f64>> {
        self.queries.get(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    pub fn score(&self, query_id: &str, doc_id: &str) -> Option<f64> {
        self.query(query_id).and_then(|m| m.get(doc_id)).copied()
    }

    pub fn restricted(&self, keep: &BTreeSet<String>) -> Self {
        Self {
            tag: self.tag.clone(),
            queries: self
                .queries
                .iter()
                .filter(|(q, _)| keep.contains(*q))
                .map(|(q, m)| (q.clone(), m.clone()))
                .collect(),
        }
    }
}

/// Converts ranks to scores with `1 / (constant + rank)`.
pub fn normalize_reciprocal(run: &RunList, constant: f64) -> Result<ScoredList> {
    if !(constant > -1.0 && constant.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "reciprocal constant must be finite and greater than -1, got {constant}"
        )));
    }
    let queries = run
        .queries()
        .iter()
        .map(|(q, list)| {
            let scores = list
                .iter()
                .map(|e| (e.doc_id.clone(), 1.0 / (constant + e.rank as f64)))
                .collect();
            (q.clone(), scores)
        })
        .collect();
    Ok(ScoredList {
        tag: run.tag().to_owned(),
        queries,
    })
}

/// Sums terms smallest-first so the result is independent of term order.
pub(crate) fn order_free_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// Rounds to 12 significant decimal digits.
pub(crate) fn snap(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

fn check_depth(depth: usize) -> Result<()> {
    if depth == 0 {
        return Err(Error::InvalidArgument("output depth must be at least 1".into()));
    }
    Ok(())
}

/// Runs `combine` over the per-system score vector of every document in the
/// per-query union and ranks the results.
fn fuse_scored<F>(scored: &[ScoredList], tag: &str, depth: usize, combine: F) -> Result<FusedRun>
where
    F: Fn(&[Option<f64>]) -> f64 + Sync + Send,
{
    check_depth(depth)?;
    let query_ids: Vec<&str> = scored
        .iter()
        .flat_map(ScoredList::query_ids)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let lists = par::map(&query_ids, |&q| {
        let maps: Vec<Option<&BTreeMap<String, f64>>> = scored.iter().map(|s| s.query(q)).collect();
        let docs: BTreeSet<&str> = maps.iter().flatten().flat_map(|m| m.keys().map(String::as_str)).collect();
        let mut row = Vec::with_capacity(scored.len());
        let fused: Vec<(String, f64)> = docs
            .into_iter()
            .map(|d| {
                row.clear();
                row.extend(maps.iter().map(|m| m.and_then(|m| m.get(d).copied())));
                (d.to_owned(), snap(combine(&row)))
            })
            .collect();
        let mut ranked = rank_by_score(fused);
        ranked.truncate(depth);
        (q.to_owned(), ranked)
    });
    Ok(RunList::from_canonical(tag.to_owned(), lists.into_iter().collect()))
}

fn require_inputs<T>(inputs: &[T]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("fusion needs at least one input run".into()));
    }
    Ok(())
}

/// Weighted sum `intercept + Σ w_j * s_j`, with missing scores taken as 0.
pub fn linear_combine(scored: &[ScoredList], weights: &WeightVector, depth: usize) -> Result<FusedRun> {
    weights.check_aligned(scored.iter().map(ScoredList::tag))?;
    let intercept = weights.intercept();
    let w = weights.weights();
    fuse_scored(scored, "LC-mlr", depth, |row| {
        let terms = std::iter::once(intercept)
            .chain(row.iter().zip(w).filter_map(|(s, w)| s.map(|s| s * w)))
            .collect();
        order_free_sum(terms)
    })
}

pub fn comb_sum(scored: &[ScoredList], depth: usize) -> Result<FusedRun> {
    require_inputs(scored)?;
    fuse_scored(scored, "combsum", depth, |row| {
        order_free_sum(row.iter().flatten().copied().collect())
    })
}

pub fn comb_mnz(scored: &[ScoredList], depth: usize) -> Result<FusedRun> {
    require_inputs(scored)?;
    fuse_scored(scored, "combmnz", depth, |row| {
        let hits: Vec<f64> = row.iter().flatten().copied().collect();
        hits.len() as f64 * order_free_sum(hits)
    })
}

/// Borda count over the per-query candidate union `C`: rank `r` earns
/// `|C| - r + 1` points, an unranked document earns nothing.
pub fn borda(runs: &[RunList], depth: usize) -> Result<FusedRun> {
    require_inputs(runs)?;
    check_depth(depth)?;
    let query_ids: Vec<&str> = runs
        .iter()
        .flat_map(RunList::query_ids)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let lists = par::map(&query_ids, |&q| {
        let candidates: BTreeSet<&str> = runs
            .iter()
            .filter_map(|r| r.ranking(q))
            .flat_map(|list| list.iter().map(|e| e.doc_id.as_str()))
            .collect();
        let size = candidates.len() as u64;
        let mut points: BTreeMap<&str, u64> = candidates.into_iter().map(|d| (d, 0)).collect();
        for list in runs.iter().filter_map(|r| r.ranking(q)) {
            for e in list {
                *points.get_mut(e.doc_id.as_str()).expect("candidate") += size - e.rank as u64 + 1;
            }
        }
        let mut ranked = rank_by_score(points.into_iter().map(|(d, p)| (d.to_owned(), p as f64)).collect());
        ranked.truncate(depth);
        (q.to_owned(), ranked)
    });
    Ok(RunList::from_canonical("borda".to_owned(), lists.into_iter().collect()))
}

/// Fusion methods selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FusionMethod {
    LinearCombination,
    CombSum,
    CombMnz,
    Borda,
}

impl FusionMethod {
    pub const ALL: [FusionMethod; 4] = [Self::LinearCombination, Self::CombSum, Self::CombMnz, Self::Borda];

    pub fn name(self) -> &'static str {
        match self {
            Self::LinearCombination => "LC-mlr",
            Self::CombSum => "combsum",
            Self::CombMnz => "combmnz",
            Self::Borda => "borda",
        }
    }
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lc" | "lc-mlr" => Ok(Self::LinearCombination),
            "combsum" => Ok(Self::CombSum),
            "combmnz" => Ok(Self::CombMnz),
            "borda" => Ok(Self::Borda),
            other => Err(Error::InvalidArgument(format!("unknown fusion method {other:?}"))),
        }
    }
}
