//! TREC run and qrels files.
//!
//! Runs are canonicalized on ingest: each query's documents are re-sorted by
//! score descending (ties by doc id ascending) and ranks are rewritten densely
//! from 1. The rank column of the input is only compared against the
//! canonical rank to count disagreements.

use std::cmp::Ordering;
use std::collections::{btree_map::Entry, BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

const DEFAULT_TAG: &str = "run";

/// One ranked document inside a query's list.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub doc_id: String,
    pub rank: usize,
    pub score: f64,
}

/// One system's ranked output over a set of queries, in canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct RunList {
    tag: String,
    queries: BTreeMap<String, Vec<RunEntry>>,
}

/// Counters collected while parsing a run file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunParseReport {
    pub entries: usize,
    /// Entries whose rank column differs from their canonical rank.
    pub rank_disagreements: usize,
}

fn validate_tag(tag: &str) -> Result<()> {
    if tag.is_empty() || tag.chars().any(char::is_whitespace) {
        return Err(Error::InvalidArgument(format!(
            "run tag {tag:?} must be a non-empty token without whitespace"
        )));
    }
    Ok(())
}

/// Orders by score descending, then doc id ascending. Total on finite scores.
pub(crate) fn score_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Sorts `(doc, score)` pairs into canonical order and assigns ranks 1..L.
pub(crate) fn rank_by_score(mut docs: Vec<(String, f64)>) -> Vec<RunEntry> {
    docs.sort_by(|a, b| score_order((&a.0, a.1), (&b.0, b.1)));
    docs.into_iter()
        .enumerate()
        .map(|(i, (doc_id, score))| RunEntry {
            doc_id,
            rank: i + 1,
            score,
        })
        .collect()
}

impl RunList {
    /// An empty run.
    pub fn empty(tag: &str) -> Result<Self> {
        validate_tag(tag)?;
        Ok(Self {
            tag: tag.to_owned(),
            queries: BTreeMap::new(),
        })
    }

    /// Builds a canonical run from unordered `(query_id, doc_id, score)`
    /// triples. Fails on a repeated `(query_id, doc_id)` pair or a
    /// non-finite score.
    pub fn from_scores<I, Q, D>(tag: &str, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Q, D, f64)>,
        Q: Into<String>,
        D: Into<String>,
    {
        validate_tag(tag)?;
        let mut per_query: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for (i, (q, d, score)) in entries.into_iter().enumerate() {
            let (q, d) = (q.into(), d.into());
            if !score.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite score for query {q}, document {d}"
                )));
            }
            match per_query.entry(q.clone()).or_default().entry(d.clone()) {
                Entry::Occupied(_) => {
                    return Err(Error::DuplicateEntry {
                        line: i + 1,
                        query_id: q,
                        doc_id: d,
                    })
                }
                Entry::Vacant(slot) => {
                    slot.insert(score);
                }
            }
        }
        Ok(Self::from_score_maps(tag.to_owned(), per_query))
    }

    pub(crate) fn from_score_maps(tag: String, maps: BTreeMap<String, BTreeMap<String, f64>>) -> Self {
        let queries = maps
            .into_iter()
            .map(|(q, docs)| (q, rank_by_score(docs.into_iter().collect())))
            .collect();
        Self { tag, queries }
    }

    /// Wraps lists that are already in canonical order.
    pub(crate) fn from_canonical(tag: String, queries: BTreeMap<String, Vec<RunEntry>>) -> Self {
        debug_assert!(queries
            .values()
            .all(|list| list.iter().enumerate().all(|(i, e)| e.rank == i + 1)));
        Self { tag, queries }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn with_tag(mut self, tag: &str) -> Result<Self> {
        validate_tag(tag)?;
        self.tag = tag.to_owned();
        Ok(self)
    }

    pub fn queries(&self) -> &BTreeMap<String, Vec<RunEntry>> {
        &self.queries
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    /// Ranked list for `query_id`, best first.
    pub fn ranking(&self, query_id: &str) -> Option<&[RunEntry]> {
        self.queries.get(query_id).map(Vec::as_slice)
    }

    pub fn num_queries(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Longest per-query list.
    pub fn max_depth(&self) -> usize {
        self.queries.values().map(Vec::len).max().unwrap_or(0)
    }

    /// Keeps the top `depth` entries of each query.
    pub fn truncated(&self, depth: usize) -> Self {
        let queries = self
            .queries
            .iter()
            .map(|(q, list)| (q.clone(), list.iter().take(depth).cloned().collect()))
            .collect();
        Self {
            tag: self.tag.clone(),
            queries,
        }
    }

    /// Keeps only the queries in `keep`.
    pub fn restricted(&self, keep: &BTreeSet<String>) -> Self {
        let queries = self
            .queries
            .iter()
            .filter(|(q, _)| keep.contains(*q))
            .map(|(q, list)| (q.clone(), list.clone()))
            .collect();
        Self {
            tag: self.tag.clone(),
            queries,
        }
    }

    /// Combines runs over disjoint query sets into one run tagged `tag`.
    pub fn merge_disjoint(tag: &str, parts: impl IntoIterator<Item = RunList>) -> Result<Self> {
        validate_tag(tag)?;
        let mut queries = BTreeMap::new();
        for part in parts {
            for (q, list) in part.queries {
                if queries.insert(q.clone(), list).is_some() {
                    return Err(Error::InvalidArgument(format!(
                        "query {q} appears in more than one merged run"
                    )));
                }
            }
        }
        Ok(Self {
            tag: tag.to_owned(),
            queries,
        })
    }
}

fn parse_error(line: usize, message: String) -> Error {
    Error::Parse { line, message }
}

/// Parses a TREC run file (`qid iter docno rank score tag`).
pub fn parse_run<R: BufRead>(reader: R) -> Result<RunList> {
    parse_run_with_report(reader).map(|(run, _)| run)
}

/// Like [`parse_run`] but also returns ingest counters.
pub fn parse_run_with_report<R: BufRead>(reader: R) -> Result<(RunList, RunParseReport)> {
    let mut tag: Option<String> = None;
    let mut per_query: BTreeMap<String, BTreeMap<String, (f64, u64)>> = BTreeMap::new();
    let mut entries = 0;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 6 {
            return Err(parse_error(
                line_no,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        let (qid, doc, rank_field, score_field, run_tag) =
            (fields[0], fields[2], fields[3], fields[4], fields[5]);
        let rank: u64 = rank_field.parse().map_err(|_| {
            parse_error(
                line_no,
                format!("rank field: expected a non-negative integer, found {rank_field:?}"),
            )
        })?;
        let score: f64 = score_field
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| {
                parse_error(
                    line_no,
                    format!("score field: expected a finite number, found {score_field:?}"),
                )
            })?;
        match &tag {
            None => tag = Some(run_tag.to_owned()),
            Some(seen) if seen != run_tag => {
                return Err(Error::MixedRunTags {
                    line: line_no,
                    expected: seen.clone(),
                    found: run_tag.to_owned(),
                })
            }
            Some(_) => {}
        }
        match per_query.entry(qid.to_owned()).or_default().entry(doc.to_owned()) {
            Entry::Occupied(_) => {
                return Err(Error::DuplicateEntry {
                    line: line_no,
                    query_id: qid.to_owned(),
                    doc_id: doc.to_owned(),
                })
            }
            Entry::Vacant(slot) => {
                slot.insert((score, rank));
            }
        }
        entries += 1;
    }

    let mut report = RunParseReport {
        entries,
        rank_disagreements: 0,
    };
    let mut queries = BTreeMap::new();
    for (q, docs) in per_query {
        let source_ranks: BTreeMap<&str, u64> =
            docs.iter().map(|(d, (_, r))| (d.as_str(), *r)).collect();
        let ranked = rank_by_score(docs.iter().map(|(d, (s, _))| (d.clone(), *s)).collect());
        report.rank_disagreements += ranked
            .iter()
            .filter(|e| source_ranks[e.doc_id.as_str()] != e.rank as u64)
            .count();
        queries.insert(q, ranked);
    }
    let run = RunList {
        tag: tag.unwrap_or_else(|| DEFAULT_TAG.to_owned()),
        queries,
    };
    Ok((run, report))
}

/// Writes the top `depth` entries of every query in TREC run format.
///
/// Scores are written in the shortest decimal form that parses back to the
/// same `f64`, so a written run re-reads into the identical ranking.
pub fn write_run<W: Write>(run: &RunList, depth: usize, mut out: W) -> std::io::Result<()> {
    for (q, list) in &run.queries {
        for e in list.iter().take(depth) {
            writeln!(out, "{q} Q0 {} {} {} {}", e.doc_id, e.rank, e.score, run.tag)?;
        }
    }
    Ok(())
}

/// Judgments for a single query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryJudgments {
    grades: BTreeMap<String, u32>,
}

impl QueryJudgments {
    pub fn grade(&self, doc_id: &str) -> Option<u32> {
        self.grades.get(doc_id).copied()
    }

    /// Binary view: judged with grade > 0.
    pub fn is_relevant(&self, doc_id: &str) -> bool {
        self.grade(doc_id).is_some_and(|g| g > 0)
    }

    /// R(q), the number of documents with grade > 0.
    pub fn relevant_count(&self) -> usize {
        self.grades.values().filter(|&&g| g > 0).count()
    }

    pub fn len(&self) -> usize {
        self.grades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.grades.iter().map(|(d, g)| (d.as_str(), *g))
    }

    pub fn relevant_docs(&self) -> impl Iterator<Item = &str> {
        self.iter().filter(|(_, g)| *g > 0).map(|(d, _)| d)
    }
}

/// Relevance judgments keyed by query then document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    queries: BTreeMap<String, QueryJudgments>,
}

/// Counters collected while parsing a qrels file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QrelsParseReport {
    pub judgments: usize,
    /// Repeated `(query, doc)` lines that agreed with the first grade.
    pub duplicate_judgments: usize,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a judgment, replacing any earlier grade for the pair.
    pub fn set(&mut self, query_id: &str, doc_id: &str, grade: u32) {
        self.queries
            .entry(query_id.to_owned())
            .or_default()
            .grades
            .insert(doc_id.to_owned(), grade);
    }

    /// Ensures `query_id` is present even with no judgments.
    pub fn touch_query(&mut self, query_id: &str) {
        self.queries.entry(query_id.to_owned()).or_default();
    }

    pub fn query(&self, query_id: &str) -> Option<&QueryJudgments> {
        self.queries.get(query_id)
    }

    pub fn queries(&self) -> &BTreeMap<String, QueryJudgments> {
        &self.queries
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> Option<u32> {
        self.query(query_id).and_then(|j| j.grade(doc_id))
    }

    pub fn is_relevant(&self, query_id: &str, doc_id: &str) -> bool {
        self.query(query_id).is_some_and(|j| j.is_relevant(doc_id))
    }

    pub fn relevant_count(&self, query_id: &str) -> usize {
        self.query(query_id).map_or(0, QueryJudgments::relevant_count)
    }

    pub fn total_relevant(&self) -> usize {
        self.queries.values().map(QueryJudgments::relevant_count).sum()
    }

    pub fn num_judgments(&self) -> usize {
        self.queries.values().map(QueryJudgments::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Parses a TREC qrels file (`qid iter docno grade`).
pub fn parse_qrels<R: BufRead>(reader: R) -> Result<Qrels> {
    parse_qrels_with_report(reader).map(|(q, _)| q)
}

/// Like [`parse_qrels`] but also returns ingest counters.
pub fn parse_qrels_with_report<R: BufRead>(reader: R) -> Result<(Qrels, QrelsParseReport)> {
    let mut qrels = Qrels::new();
    let mut report = QrelsParseReport::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 4 {
            return Err(parse_error(
                line_no,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let (qid, doc, grade_field) = (fields[0], fields[2], fields[3]);
        let grade: u32 = grade_field.parse().map_err(|_| {
            parse_error(
                line_no,
                format!("grade field: expected a non-negative integer, found {grade_field:?}"),
            )
        })?;
        match qrels.grade(qid, doc) {
            Some(prev) if prev != grade => {
                return Err(Error::ConflictingGrades {
                    line: line_no,
                    query_id: qid.to_owned(),
                    doc_id: doc.to_owned(),
                    first: prev,
                    second: grade,
                })
            }
            Some(_) => report.duplicate_judgments += 1,
            None => {
                qrels.set(qid, doc, grade);
                report.judgments += 1;
            }
        }
    }
    if report.duplicate_judgments > 0 {
        log::warn!(
            "qrels: {} duplicate judgment line(s) with identical grades ignored",
            report.duplicate_judgments
        );
    }
    Ok((qrels, report))
}

/// Writes qrels sorted by `(query_id, doc_id)` with iteration field `0`.
pub fn write_qrels<W: Write>(qrels: &Qrels, mut out: W) -> std::io::Result<()> {
    for (q, judgments) in &qrels.queries {
        for (d, g) in judgments.iter() {
            writeln!(out, "{q} 0 {d} {g}")?;
        }
    }
    Ok(())
}

/// Reads a run file from disk.
pub fn load_run(path: impl AsRef<Path>) -> Result<RunList> {
    parse_run(BufReader::new(File::open(path)?))
}

/// Reads a qrels file from disk.
pub fn load_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    parse_qrels(BufReader::new(File::open(path)?))
}

/// Sorts query ids numerically when every id is an unsigned integer,
/// lexicographically otherwise.
pub fn natural_query_order<'a, I>(ids: I) -> Vec<String>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut ids: Vec<String> = ids.into_iter().map(str::to_owned).collect();
    let numeric: Option<Vec<u128>> = ids.iter().map(|s| s.parse().ok()).collect();
    match numeric {
        Some(_) => ids.sort_by(|a, b| {
            let (x, y): (u128, u128) = (a.parse().unwrap(), b.parse().unwrap());
            x.cmp(&y).then_with(|| a.cmp(b))
        }),
        None => ids.sort(),
    }
    ids.dedup();
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> Result<RunList> {
        parse_run(text.as_bytes())
    }

    #[test]
    fn maps_fields_directly() {
        let r = run("301 Q0 FBIS3-1 1 12.5 runA\n").unwrap();
        assert_eq!(r.tag(), "runA");
        assert_eq!(
            r.ranking("301").unwrap(),
            &[RunEntry {
                doc_id: "FBIS3-1".into(),
                rank: 1,
                score: 12.5
            }]
        );
    }

    #[test]
    fn resorts_by_score() {
        let (r, report) =
            parse_run_with_report("301 Q0 docB 1 5.0 t\n301 Q0 docA 2 9.0 t\n".as_bytes()).unwrap();
        let docs: Vec<_> = r.ranking("301").unwrap().iter().map(|e| (e.doc_id.as_str(), e.rank)).collect();
        assert_eq!(docs, vec![("docA", 1), ("docB", 2)]);
        assert_eq!(report.rank_disagreements, 2);
    }

    #[test]
    fn score_ties_break_by_doc_id() {
        let r = run("1 Q0 z 1 1.0 t\n1 Q0 a 2 1.0 t\n1 Q0 m 3 1.0 t\n").unwrap();
        let docs: Vec<_> = r.ranking("1").unwrap().iter().map(|e| e.doc_id.as_str()).collect();
        assert_eq!(docs, vec!["a", "m", "z"]);
    }

    #[test]
    fn non_numeric_rank_names_field_and_line() {
        let err = run("301 Q0 docA 1 3.0 runA\n301 Q0 docX one 12.5 runA\n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{msg}");
        assert!(msg.contains("rank"), "{msg}");
    }

    #[test]
    fn malformed_runs_rejected() {
        assert!(matches!(run("1 Q0 a 1 2.0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(run("1 Q0 a 1 nan t\n"), Err(Error::Parse { .. })));
        assert!(matches!(run("1 Q0 a 1 x t\n"), Err(Error::Parse { .. })));
        assert!(matches!(
            run("1 Q0 a 1 2.0 t\n1 Q0 a 2 1.0 t\n"),
            Err(Error::DuplicateEntry { line: 2, .. })
        ));
        assert!(matches!(
            run("1 Q0 a 1 2.0 t\n1 Q0 b 2 1.0 u\n"),
            Err(Error::MixedRunTags { line: 2, .. })
        ));
    }

    #[test]
    fn blank_lines_and_q0_variants_accepted() {
        let r = run("\n1 0 a 1 2.0 t\n\n1 Q1 b 2 1.0 t\n").unwrap();
        assert_eq!(r.ranking("1").unwrap().len(), 2);
    }

    #[test]
    fn write_truncates_to_depth() {
        let entries = (0..2000).map(|i| ("7", format!("d{i}"), f64::from(2000 - i)));
        let r = RunList::from_scores("deep", entries).unwrap();
        let mut buf = Vec::new();
        write_run(&r, 1000, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1000);
        assert_eq!(parse_run(text.as_bytes()).unwrap(), r.truncated(1000));
    }

    #[test]
    fn single_entry_round_trips() {
        let r = run("301 Q0 FBIS3-1 1 12.5 runA\n").unwrap();
        let mut buf = Vec::new();
        write_run(&r, 1000, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "301 Q0 FBIS3-1 1 12.5 runA\n");
        assert_eq!(parse_run(buf.as_slice()).unwrap(), r);
    }

    #[test]
    fn empty_run_writes_nothing() {
        let r = run("").unwrap();
        let mut buf = Vec::new();
        write_run(&r, 10, &mut buf).unwrap();
        assert!(buf.is_empty());
        assert!(r.is_empty());
    }

    #[test]
    fn qrels_binarize_and_count() {
        let q = parse_qrels("301 0 FBIS3-1 2\n301 0 FBIS3-9 0\n301 0 X 1\n".as_bytes()).unwrap();
        assert_eq!(q.grade("301", "FBIS3-1"), Some(2));
        assert!(q.is_relevant("301", "FBIS3-1"));
        assert!(!q.is_relevant("301", "FBIS3-9"));
        assert!(!q.is_relevant("301", "unjudged"));
        assert_eq!(q.relevant_count("301"), 2);
    }

    #[test]
    fn qrels_duplicates() {
        let (q, report) = parse_qrels_with_report("1 0 a 1\n1 0 a 1\n".as_bytes()).unwrap();
        assert_eq!(report.duplicate_judgments, 1);
        assert_eq!(q.num_judgments(), 1);
        assert!(matches!(
            parse_qrels("1 0 a 1\n1 0 a 0\n".as_bytes()),
            Err(Error::ConflictingGrades { line: 2, first: 1, second: 0, .. })
        ));
        assert!(matches!(parse_qrels("1 0 a\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_qrels("1 0 a -1\n".as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn qrels_write_format() {
        let mut q = Qrels::new();
        q.set("301", "FBIS3-1", 2);
        let mut buf = Vec::new();
        write_qrels(&q, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "301 0 FBIS3-1 2\n");

        let mut buf = Vec::new();
        write_qrels(&Qrels::new(), &mut buf).unwrap();
        assert!(buf.is_empty());
    }

    #[test]
    fn natural_order() {
        assert_eq!(natural_query_order(["10", "9", "100"]), vec!["9", "10", "100"]);
        assert_eq!(natural_query_order(["qb", "qa", "10"]), vec!["10", "qa", "qb"]);
    }

    #[test]
    fn tags_must_be_tokens() {
        assert!(RunList::empty("").is_err());
        assert!(RunList::empty("a b").is_err());
        assert!(RunList::empty("LC-mlr").is_ok());
    }
}
