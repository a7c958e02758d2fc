//! Least-squares training of linear-combination weights.
//!
//! Each training row pairs the normalized scores that the `n` systems gave a
//! document for a query with its binary relevance. The solver minimizes
//!
//! ```text
//! G = Σ_rows (y - (β0 + β1·s1 + ... + βn·sn))²
//! ```
//!
//! through the normal equations `(XᵀX) β = Xᵀy`, where `X` carries a leading
//! column of ones for the intercept. `XᵀX` is Jacobi-scaled to unit diagonal
//! and factored by Cholesky; a pivot that collapses below
//! [`PIVOT_TOLERANCE`] marks the design as rank deficient and the solve is
//! retried with [`RANK_DEFICIENCY_RIDGE`] on the non-intercept diagonal.

use std::collections::{BTreeSet, HashSet};
use std::io::{BufRead, Write};

use crate::corpus::Qrels;
use crate::error::{Error, Result};
use crate::fusion::ScoredList;
use crate::par;

/// Ridge added to the system diagonal when the design is rank deficient.
pub const RANK_DEFICIENCY_RIDGE: f64 = 1e-8;

/// Smallest admissible Cholesky pivot of the unit-diagonal Gram matrix.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

const ROWS_PER_CHUNK: usize = 4096;
const INTERCEPT_KEY: &str = "__intercept__";
const RSS_KEY: &str = "__rss__";

/// Which documents of a training query become rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DocUniverse {
    /// Union of the documents retrieved by any system.
    #[default]
    Retrieved,
    /// The retrieved union plus relevant documents no system retrieved,
    /// which enter with all-zero scores.
    RetrievedAndRelevant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    pub query_id: String,
    pub doc_id: String,
    pub scores: Vec<f64>,
    pub relevant: bool,
}

impl MatrixRow {
    pub fn target(&self) -> f64 {
        if self.relevant {
            1.0
        } else {
            0.0
        }
    }
}

/// Training design: one row per `(query, doc)`, one score column per system.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    system_order: Vec<String>,
    rows: Vec<MatrixRow>,
}

impl ScoreMatrix {
    pub fn new(system_order: Vec<String>, rows: Vec<MatrixRow>) -> Result<Self> {
        if system_order.is_empty() {
            return Err(Error::InvalidArgument("score matrix needs at least one system".into()));
        }
        let n = system_order.len();
        let mut seen = HashSet::with_capacity(rows.len());
        for row in &rows {
            if row.scores.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.scores.len(),
                });
            }
            if !seen.insert((row.query_id.as_str(), row.doc_id.as_str())) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate row for query {}, document {}",
                    row.query_id, row.doc_id
                )));
            }
        }
        Ok(Self { system_order, rows })
    }

    pub fn system_order(&self) -> &[String] {
        &self.system_order
    }

    pub fn num_systems(&self) -> usize {
        self.system_order.len()
    }

    pub fn rows(&self) -> &[MatrixRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Builds training rows for `queries` from reciprocal-normalized runs.
/// A system that did not retrieve a document scores it 0; targets come from
/// the binarized `qrels`, unjudged counting as non-relevant.
pub fn assemble_matrix(
    scored: &[ScoredList],
    qrels: &Qrels,
    queries: &BTreeSet<String>,
    universe: DocUniverse,
) -> Result<ScoreMatrix> {
    if scored.is_empty() {
        return Err(Error::InvalidArgument("cannot train without any runs".into()));
    }
    if queries.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty query set".into()));
    }
    let query_list: Vec<&str> = queries.iter().map(String::as_str).collect();
    let per_query = par::map(&query_list, |&q| {
        let mut docs: BTreeSet<&str> = scored
            .iter()
            .filter_map(|s| s.query(q))
            .flat_map(|m| m.keys().map(String::as_str))
            .collect();
        if universe == DocUniverse::RetrievedAndRelevant {
            if let Some(j) = qrels.query(q) {
                docs.extend(j.relevant_docs());
            }
        }
        docs.into_iter()
            .map(|d| MatrixRow {
                query_id: q.to_owned(),
                doc_id: d.to_owned(),
                scores: scored.iter().map(|s| s.score(q, d).unwrap_or(0.0)).collect(),
                relevant: qrels.is_relevant(q, d),
            })
            .collect::<Vec<_>>()
    });
    Ok(ScoreMatrix {
        system_order: scored.iter().map(|s| s.tag().to_owned()).collect(),
        rows: per_query.into_iter().flatten().collect(),
    })
}

/// How a weight vector came about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Plain least squares on a full-rank design.
    Exact,
    /// Ridge was added to the normal equations.
    Regularized,
    /// Every target was zero; all coefficients are zero.
    Degenerate,
    /// Supplied by hand or read from a file.
    Given,
}

/// Intercept and per-system weights, aligned with `system_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    system_order: Vec<String>,
    intercept: f64,
    weights: Vec<f64>,
    rss: Option<f64>,
    condition: Option<f64>,
    status: SolveStatus,
}

impl WeightVector {
    pub fn new(system_order: Vec<String>, intercept: f64, weights: Vec<f64>) -> Result<Self> {
        if system_order.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: system_order.len(),
                found: weights.len(),
            });
        }
        Ok(Self {
            system_order,
            intercept,
            weights,
            rss: None,
            condition: None,
            status: SolveStatus::Given,
        })
    }

    /// Unit weights and zero intercept, i.e. CombSum.
    pub fn uniform(system_order: Vec<String>) -> Self {
        let weights = vec![1.0; system_order.len()];
        Self::new(system_order, 0.0, weights).expect("lengths match")
    }

    pub fn system_order(&self) -> &[String] {
        &self.system_order
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// G on the training matrix, when known.
    pub fn rss(&self) -> Option<f64> {
        self.rss
    }

    /// Squared ratio of the largest to the smallest Cholesky pivot of the
    /// scaled Gram matrix; a rough condition number.
    pub fn condition(&self) -> Option<f64> {
        self.condition
    }

    pub fn status(&self) -> SolveStatus {
        self.status
    }

    pub fn is_regularized(&self) -> bool {
        self.status == SolveStatus::Regularized
    }

    pub fn is_degenerate(&self) -> bool {
        self.status == SolveStatus::Degenerate
    }

    pub fn predict(&self, scores: &[f64]) -> f64 {
        self.intercept + scores.iter().zip(&self.weights).map(|(s, w)| s * w).sum::<f64>()
    }

    pub(crate) fn check_aligned<'a>(&self, tags: impl ExactSizeIterator<Item = &'a str>) -> Result<()> {
        if tags.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                found: tags.len(),
            });
        }
        for (position, (expected, found)) in self.system_order.iter().zip(tags).enumerate() {
            if expected != found {
                return Err(Error::SystemOrderMismatch {
                    position,
                    expected: expected.clone(),
                    found: found.to_owned(),
                });
            }
        }
        Ok(())
    }

    /// Writes `system,weight` rows followed by the intercept and G.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "system,weight")?;
        for (s, w) in self.system_order.iter().zip(&self.weights) {
            writeln!(out, "{s},{w}")?;
        }
        writeln!(out, "{INTERCEPT_KEY},{}", self.intercept)?;
        writeln!(out, "{RSS_KEY},{}", self.rss.unwrap_or(f64::NAN))?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut system_order = Vec::new();
        let mut weights = Vec::new();
        let mut intercept = None;
        let mut rss = None;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (line_no == 1 && line == "system,weight") {
                continue;
            }
            let (name, value) = line.rsplit_once(',').ok_or_else(|| Error::Parse {
                line: line_no,
                message: "expected `system,weight`".into(),
            })?;
            let value: f64 = value.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("weight field: expected a number, found {value:?}"),
            })?;
            match name {
                INTERCEPT_KEY => intercept = Some(value),
                RSS_KEY => rss = Some(value).filter(|v| !v.is_nan()),
                _ => {
                    system_order.push(name.to_owned());
                    weights.push(value);
                }
            }
        }
        let mut wv = Self::new(system_order, intercept.unwrap_or(0.0), weights)?;
        wv.rss = rss;
        Ok(wv)
    }
}

/// `G` for `candidate` on `matrix`.
pub fn objective_g(matrix: &ScoreMatrix, candidate: &WeightVector) -> Result<f64> {
    candidate.check_aligned(matrix.system_order.iter().map(String::as_str))?;
    Ok(matrix
        .rows
        .iter()
        .map(|r| (r.target() - candidate.predict(&r.scores)).powi(2))
        .sum())
}

/// Dense symmetric system `A β = b` of dimension `n + 1`.
struct NormalEquations {
    dim: usize,
    gram: Vec<f64>,
    rhs: Vec<f64>,
}

impl NormalEquations {
    fn zeros(dim: usize) -> Self {
        Self {
            dim,
            gram: vec![0.0; dim * dim],
            rhs: vec![0.0; dim],
        }
    }

    fn accumulate(rows: &[MatrixRow], dim: usize) -> Self {
        let mut ne = Self::zeros(dim);
        let mut x = vec![1.0; dim];
        for row in rows {
            x[1..].copy_from_slice(&row.scores);
            let y = row.target();
            for i in 0..dim {
                ne.rhs[i] += x[i] * y;
                for j in i..dim {
                    ne.gram[i * dim + j] += x[i] * x[j];
                }
            }
        }
        ne
    }

    fn add(&mut self, other: &Self) {
        self.gram.iter_mut().zip(&other.gram).for_each(|(a, b)| *a += b);
        self.rhs.iter_mut().zip(&other.rhs).for_each(|(a, b)| *a += b);
    }

    /// Chunks are summed in a fixed order so the result does not depend on
    /// how many threads accumulated them.
    fn from_matrix(matrix: &ScoreMatrix) -> Self {
        let dim = matrix.num_systems() + 1;
        let chunks: Vec<&[MatrixRow]> = matrix.rows.chunks(ROWS_PER_CHUNK).collect();
        let partials = par::map(&chunks, |chunk| Self::accumulate(chunk, dim));
        let mut total = Self::zeros(dim);
        for p in &partials {
            total.add(p);
        }
        for i in 0..dim {
            for j in 0..i {
                total.gram[i * dim + j] = total.gram[j * dim + i];
            }
        }
        total
    }

    /// Solves with `ridge` on the system diagonal. `min_pivot` bounds the
    /// Cholesky pivots of the unit-diagonal scaled matrix. Returns the
    /// coefficients and a condition estimate, or `None` if a pivot fails.
    fn solve(&self, ridge: f64, min_pivot: f64) -> Option<(Vec<f64>, f64)> {
        let dim = self.dim;
        let mut a = self.gram.clone();
        for j in 1..dim {
            a[j * dim + j] += ridge;
        }
        let mut scale = vec![0.0; dim];
        for j in 0..dim {
            let d = a[j * dim + j];
            if d <= 0.0 {
                return None;
            }
            scale[j] = 1.0 / d.sqrt();
        }
        for i in 0..dim {
            for j in 0..dim {
                a[i * dim + j] *= scale[i] * scale[j];
            }
        }

        // in-place lower Cholesky factor
        let mut pivots = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut d = a[j * dim + j];
            for k in 0..j {
                d -= a[j * dim + k] * a[j * dim + k];
            }
            if d.is_nan() || d <= min_pivot {
                return None;
            }
            let l = d.sqrt();
            a[j * dim + j] = l;
            pivots.push(d);
            for i in j + 1..dim {
                let mut s = a[i * dim + j];
                for k in 0..j {
                    s -= a[i * dim + k] * a[j * dim + k];
                }
                a[i * dim + j] = s / l;
            }
        }

        let mut z: Vec<f64> = (0..dim).map(|i| self.rhs[i] * scale[i]).collect();
        for i in 0..dim {
            let mut s = z[i];
            for k in 0..i {
                s -= a[i * dim + k] * z[k];
            }
            z[i] = s / a[i * dim + i];
        }
        for i in (0..dim).rev() {
            let mut s = z[i];
            for k in i + 1..dim {
                s -= a[k * dim + i] * z[k];
            }
            z[i] = s / a[i * dim + i];
        }
        let beta = z.iter().zip(&scale).map(|(v, s)| v * s).collect();
        let (lo, hi) = pivots
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &p| (lo.min(p), hi.max(p)));
        Some((beta, hi / lo))
    }
}

/// Least-squares weights minimizing `G` on `matrix`.
///
/// `ridge_epsilon > 0` regularizes from the start. A rank-deficient design
/// is retried with `max(ridge_epsilon, RANK_DEFICIENCY_RIDGE)` and flagged
/// [`SolveStatus::Regularized`]. If no row is relevant the zero vector is
/// returned, flagged [`SolveStatus::Degenerate`].
pub fn solve_ols(matrix: &ScoreMatrix, ridge_epsilon: f64) -> Result<WeightVector> {
    if matrix.is_empty() {
        return Err(Error::InvalidArgument("cannot solve least squares without rows".into()));
    }
    if !(ridge_epsilon >= 0.0 && ridge_epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid ridge epsilon {ridge_epsilon}")));
    }
    let n = matrix.num_systems();
    let order = matrix.system_order.clone();

    if matrix.rows.iter().all(|r| !r.relevant) {
        let mut wv = WeightVector::new(order, 0.0, vec![0.0; n])?;
        wv.status = SolveStatus::Degenerate;
        wv.rss = Some(0.0);
        return Ok(wv);
    }

    let ne = NormalEquations::from_matrix(matrix);
    let first = ne.solve(ridge_epsilon, PIVOT_TOLERANCE);
    let (solution, status) = match first {
        Some(sol) if ridge_epsilon == 0.0 => (sol, SolveStatus::Exact),
        Some(sol) => (sol, SolveStatus::Regularized),
        None => {
            let ridge = ridge_epsilon.max(RANK_DEFICIENCY_RIDGE);
            log::debug!("rank-deficient design over {order:?}; retrying with ridge {ridge}");
            let sol = ne.solve(ridge, 0.0).ok_or(Error::Singular)?;
            (sol, SolveStatus::Regularized)
        }
    };
    let (beta, condition) = solution;
    let mut wv = WeightVector::new(order, beta[0], beta[1..].to_vec())?;
    wv.status = status;
    wv.condition = Some(condition);
    wv.rss = Some(objective_g(matrix, &wv)?);
    Ok(wv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_qrels, RunList};
    use crate::fusion::normalize_reciprocal;

    fn matrix(cols: &[&[f64]], targets: &[bool]) -> ScoreMatrix {
        let n = cols.len();
        let rows = targets
            .iter()
            .enumerate()
            .map(|(i, &relevant)| MatrixRow {
                query_id: "q".into(),
                doc_id: format!("d{i}"),
                scores: cols.iter().map(|c| c[i]).collect(),
                relevant,
            })
            .collect();
        ScoreMatrix::new((1..=n).map(|j| format!("s{j}")).collect(), rows).unwrap()
    }

    /// Rows with arbitrary real targets, built outside `MatrixRow`'s 0/1 view
    /// by solving on the normal equations directly.
    fn solve_real_targets(xs: &[f64], ys: &[f64]) -> Vec<f64> {
        let mut ne = NormalEquations::zeros(2);
        for (&x, &y) in xs.iter().zip(ys) {
            let v = [1.0, x];
            for i in 0..2 {
                ne.rhs[i] += v[i] * y;
                for j in 0..2 {
                    ne.gram[i * 2 + j] += v[i] * v[j];
                }
            }
        }
        ne.solve(0.0, PIVOT_TOLERANCE).unwrap().0
    }

    #[test]
    fn two_points_interpolate() {
        let beta = solve_real_targets(&[1.0, 2.0], &[1.0, 3.0]);
        assert!((beta[0] + 1.0).abs() < 1e-12);
        assert!((beta[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn three_points_match_closed_form() {
        let (xs, ys) = ([1.0, 2.0, 3.0], [1.0, 2.0, 2.0]);
        let (b0, b1) = rankfuse_testkit::univariate_closed_form(&xs, &ys);
        let (g0, g1) = rankfuse_testkit::univariate_grid_search(&xs, &ys);
        assert!((b0 - 2.0 / 3.0).abs() < 1e-12 && (b1 - 0.5).abs() < 1e-12);
        assert!((g0 - b0).abs() < 1e-9 && (g1 - b1).abs() < 1e-9);
        let beta = solve_real_targets(&xs, &ys);
        assert!((beta[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((beta[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_fit_identifies_first_system() {
        let s1 = [0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        let s2 = [0.3, 0.9, 0.1, 0.5, 0.2, 0.7];
        let targets: Vec<bool> = s1.iter().map(|&v| v == 1.0).collect();
        let w = solve_ols(&matrix(&[&s1, &s2], &targets), 0.0).unwrap();
        assert_eq!(w.status(), SolveStatus::Exact);
        assert!(w.intercept().abs() < 1e-9);
        assert!((w.weights()[0] - 1.0).abs() < 1e-9);
        assert!(w.weights()[1].abs() < 1e-9);
        assert!(w.rss().unwrap() < 1e-18);
    }

    #[test]
    fn all_zero_targets_are_degenerate() {
        let m = matrix(&[&[0.1, 0.2]], &[false, false]);
        let w = solve_ols(&m, 0.0).unwrap();
        assert!(w.is_degenerate());
        assert_eq!((w.intercept(), w.weights()), (0.0, &[0.0][..]));
    }

    #[test]
    fn collinear_systems_fall_back_to_ridge() {
        let s = [0.1, 0.5, 0.3, 0.9];
        let m = matrix(&[&s, &s], &[false, true, false, true]);
        let w = solve_ols(&m, 0.0).unwrap();
        assert!(w.is_regularized());
        assert!((w.weights()[0] - w.weights()[1]).abs() < 1e-6);

        let zero = [0.0; 4];
        let m = matrix(&[&s, &zero], &[false, true, false, true]);
        let w = solve_ols(&m, 0.0).unwrap();
        assert!(w.is_regularized());
        assert_eq!(w.weights()[1], 0.0);
    }

    #[test]
    fn zero_weights_cost_the_relevant_count() {
        let m = matrix(&[&[0.1, 0.2, 0.3]], &[true, false, true]);
        let zero = WeightVector::new(vec!["s1".into()], 0.0, vec![0.0]).unwrap();
        assert_eq!(objective_g(&m, &zero).unwrap(), 2.0);
        let bad = WeightVector::new(vec!["s1".into(), "s2".into()], 0.0, vec![0.0, 0.0]).unwrap();
        assert!(matches!(objective_g(&m, &bad), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn assembly_from_reciprocal_scores() {
        let r1 = RunList::from_scores("run1", [("q", "a", 2.0), ("q", "b", 1.0)]).unwrap();
        let r2 = RunList::from_scores("run2", [("q", "b", 1.0)]).unwrap();
        let scored: Vec<_> = [r1, r2].iter().map(|r| normalize_reciprocal(r, 60.0).unwrap()).collect();
        let qrels = parse_qrels("q 0 a 1\nq 0 lost 1\n".as_bytes()).unwrap();
        let queries: BTreeSet<String> = ["q".to_string()].into();

        let m = assemble_matrix(&scored, &qrels, &queries, DocUniverse::Retrieved).unwrap();
        assert_eq!(m.system_order(), ["run1", "run2"]);
        assert_eq!(m.len(), 2);
        assert_eq!(m.rows()[0].doc_id, "a");
        assert_eq!(m.rows()[0].scores, [1.0 / 61.0, 0.0]);
        assert!(m.rows()[0].relevant);
        assert_eq!(m.rows()[1].scores, [1.0 / 62.0, 1.0 / 61.0]);
        assert!(!m.rows()[1].relevant);

        let m = assemble_matrix(&scored, &qrels, &queries, DocUniverse::RetrievedAndRelevant).unwrap();
        assert_eq!(m.len(), 3);
        let lost = m.rows().iter().find(|r| r.doc_id == "lost").unwrap();
        assert_eq!(lost.scores, [0.0, 0.0]);
        assert!(lost.relevant);

        assert!(assemble_matrix(&scored, &qrels, &BTreeSet::new(), DocUniverse::Retrieved).is_err());
        assert!(assemble_matrix(&[], &qrels, &queries, DocUniverse::Retrieved).is_err());
    }

    #[test]
    fn rows_add_up_over_queries() {
        let r1 = RunList::from_scores("r", [("q1", "a", 2.0), ("q1", "b", 1.0), ("q2", "c", 1.0)]).unwrap();
        let scored = [normalize_reciprocal(&r1, 60.0).unwrap()];
        let qrels = Qrels::new();
        let both: BTreeSet<String> = ["q1".to_string(), "q2".to_string()].into();
        let m = assemble_matrix(&scored, &qrels, &both, DocUniverse::Retrieved).unwrap();
        assert_eq!(m.len(), 3);
    }

    #[test]
    fn csv_round_trip() {
        let m = matrix(&[&[0.1, 0.5, 0.3, 0.9], &[0.4, 0.2, 0.6, 0.8]], &[false, true, false, true]);
        let w = solve_ols(&m, 0.0).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("system,weight\ns1,"));
        assert!(text.contains("\n__intercept__,"));
        let back = WeightVector::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.weights(), w.weights());
        assert_eq!(back.intercept(), w.intercept());
        assert_eq!(back.rss(), w.rss());
        assert_eq!(back.system_order(), w.system_order());
    }

    #[test]
    fn matrix_validation() {
        let row = |d: &str, n: usize| MatrixRow {
            query_id: "q".into(),
            doc_id: d.into(),
            scores: vec![0.0; n],
            relevant: false,
        };
        assert!(ScoreMatrix::new(vec!["a".into()], vec![row("x", 2)]).is_err());
        assert!(ScoreMatrix::new(vec!["a".into()], vec![row("x", 1), row("x", 1)]).is_err());
        assert!(ScoreMatrix::new(vec![], vec![]).is_err());
        let empty = ScoreMatrix::new(vec!["a".into()], vec![]).unwrap();
        assert!(solve_ols(&empty, 0.0).is_err());
    }
}
