use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use crate::corpus::{load_qrels, load_run, Qrels, RunList};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvalReport, MeanMetrics};
use crate::fusion::{
    borda, comb_mnz, comb_sum, linear_combine, normalize_reciprocal, FusedRun, FusionMethod,
    ScoredList, DEFAULT_OUTPUT_DEPTH, DEFAULT_RECIPROCAL_CONSTANT,
};
use crate::harness::split::{split_odd_even, FoldSplit};
use crate::par;
use crate::regression::{assemble_matrix, solve_ols, DocUniverse, WeightVector};

#[derive(Debug, Clone, PartialEq)]
pub struct FusionSettings {
    pub reciprocal_constant: f64,
    pub depth: usize,
    pub ridge_epsilon: f64,
    pub universe: DocUniverse,
}

impl Default for FusionSettings {
    fn default() -> Self {
        Self {
            reciprocal_constant: DEFAULT_RECIPROCAL_CONSTANT,
            depth: DEFAULT_OUTPUT_DEPTH,
            ridge_epsilon: 0.0,
            universe: DocUniverse::Retrieved,
        }
    }
}

/// File locations for an experiment. Runs are listed best first.
#[derive(Debug, Clone, Default)]
pub struct ExperimentConfig {
    pub runs: Vec<PathBuf>,
    pub qrels: PathBuf,
    pub settings: FusionSettings,
}

impl ExperimentConfig {
    pub fn load(&self) -> Result<Experiment> {
        let runs = self.runs.iter().map(load_run).collect::<Result<Vec<_>>>()?;
        Experiment::new(runs, load_qrels(&self.qrels)?, self.settings.clone())
    }
}

/// Loaded runs (best first), the official qrels every variant is evaluated
/// against, and the fusion settings.
#[derive(Debug, Clone)]
pub struct Experiment {
    runs: Vec<RunList>,
    scored: Vec<ScoredList>,
    official: Qrels,
    settings: FusionSettings,
}

impl Experiment {
    pub fn new(runs: Vec<RunList>, official: Qrels, settings: FusionSettings) -> Result<Self> {
        if runs.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "fusion experiments need at least 2 runs, found {}",
                runs.len()
            )));
        }
        if official.is_empty() {
            return Err(Error::InvalidArgument("official qrels contain no queries".into()));
        }
        let scored = runs
            .iter()
            .map(|r| normalize_reciprocal(r, settings.reciprocal_constant))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            runs,
            scored,
            official,
            settings,
        })
    }

    pub fn runs(&self) -> &[RunList] {
        &self.runs
    }

    pub fn scored(&self) -> &[ScoredList] {
        &self.scored
    }

    pub fn official(&self) -> &Qrels {
        &self.official
    }

    pub fn settings(&self) -> &FusionSettings {
        &self.settings
    }

    /// The topic set: every query of the official qrels.
    pub fn queries(&self) -> BTreeSet<String> {
        self.official.query_ids().map(str::to_owned).collect()
    }

    fn evaluate(&self, run: &RunList) -> Result<EvalReport> {
        Ok(evaluate(run, &self.official, &self.queries())?.with_qrels_id("official"))
    }
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub train: BTreeSet<String>,
    pub test: BTreeSet<String>,
    pub weights: WeightVector,
}

#[derive(Debug, Clone)]
pub struct XvalOutcome {
    pub fused: FusedRun,
    pub report: EvalReport,
    pub folds: [FoldResult; 2],
}

fn train_and_fuse(
    scored: &[ScoredList],
    training: &Qrels,
    train: &BTreeSet<String>,
    test: &BTreeSet<String>,
    settings: &FusionSettings,
) -> Result<(WeightVector, FusedRun)> {
    let train_lists: Vec<ScoredList> = scored.iter().map(|s| s.restricted(train)).collect();
    let matrix = assemble_matrix(&train_lists, training, train, settings.universe)?;
    let weights = solve_ols(&matrix, settings.ridge_epsilon)?;
    let test_lists: Vec<ScoredList> = scored.iter().map(|s| s.restricted(test)).collect();
    let fused = linear_combine(&test_lists, &weights, settings.depth)?;
    Ok((weights, fused))
}

fn cross_validate_scored(
    scored: &[ScoredList],
    training: &Qrels,
    split: &FoldSplit,
    exp: &Experiment,
) -> Result<XvalOutcome> {
    let settings = &exp.settings;
    let (first, second) = par::join(
        || train_and_fuse(scored, training, &split.a, &split.b, settings),
        || train_and_fuse(scored, training, &split.b, &split.a, settings),
    );
    let wrap = |fold: &'static str| move |e: Error| Error::Fold { fold, source: Box::new(e) };
    let (weights_a, fused_b) = first.map_err(wrap("A"))?;
    let (weights_b, fused_a) = second.map_err(wrap("B"))?;
    let fused = RunList::merge_disjoint(FusionMethod::LinearCombination.name(), [fused_b, fused_a])?;
    let report = exp.evaluate(&fused)?;
    Ok(XvalOutcome {
        fused,
        report,
        folds: [
            FoldResult {
                train: split.a.clone(),
                test: split.b.clone(),
                weights: weights_a,
            },
            FoldResult {
                train: split.b.clone(),
                test: split.a.clone(),
                weights: weights_b,
            },
        ],
    })
}

/// Two-fold odd/even cross-validation of least-squares linear combination.
///
/// Weights are trained on one fold from `training` (full or partial
/// judgments) and applied to the other fold's queries, in both directions.
/// The merged fused run is evaluated against the official qrels.
pub fn cross_validated_fusion(exp: &Experiment, training: &Qrels) -> Result<XvalOutcome> {
    let split = split_odd_even(exp.official.query_ids())?;
    cross_validate_scored(&exp.scored, training, &split, exp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub num_systems: usize,
    pub metrics: MeanMetrics,
}

/// Cross-validated LC over the best 2, 3, ..., n runs.
pub fn incremental_fusion_curve(exp: &Experiment, training: &Qrels) -> Result<Vec<CurveRow>> {
    let split = split_odd_even(exp.official.query_ids())?;
    let sizes: Vec<usize> = (2..=exp.scored.len()).collect();
    par::map(&sizes, |&k| {
        let outcome = cross_validate_scored(&exp.scored[..k], training, &split, exp)?;
        Ok(CurveRow {
            num_systems: k,
            metrics: outcome.report.mean,
        })
    })
    .into_iter()
    .collect()
}

/// Rows of a method comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CompareMethod {
    Fusion(FusionMethod),
    /// The first (best) input run on its own.
    BestComponent,
}

impl CompareMethod {
    pub const ALL: [CompareMethod; 5] = [
        CompareMethod::Fusion(FusionMethod::LinearCombination),
        CompareMethod::Fusion(FusionMethod::CombSum),
        CompareMethod::Fusion(FusionMethod::CombMnz),
        CompareMethod::Fusion(FusionMethod::Borda),
        CompareMethod::BestComponent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CompareMethod::Fusion(m) => m.name(),
            CompareMethod::BestComponent => "best-component",
        }
    }
}

impl fmt::Display for CompareMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CompareMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "best" | "best-component" => Ok(CompareMethod::BestComponent),
            other => other.parse().map(CompareMethod::Fusion),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub method: CompareMethod,
    pub num_systems: usize,
    pub metrics: MeanMetrics,
}

fn fuse_prefix(exp: &Experiment, training: &Qrels, split: &FoldSplit, method: FusionMethod, k: usize) -> Result<MeanMetrics> {
    let depth = exp.settings.depth;
    let fused = match method {
        FusionMethod::LinearCombination => {
            return Ok(cross_validate_scored(&exp.scored[..k], training, split, exp)?.report.mean)
        }
        FusionMethod::CombSum => comb_sum(&exp.scored[..k], depth)?,
        FusionMethod::CombMnz => comb_mnz(&exp.scored[..k], depth)?,
        FusionMethod::Borda => borda(&exp.runs[..k], depth)?,
    };
    Ok(exp.evaluate(&fused)?.mean)
}

/// Incremental curves for each fusion method in `methods`, plus one row for
/// the best component when requested. Only LC uses `training`.
pub fn compare_methods(exp: &Experiment, training: &Qrels, methods: &[CompareMethod]) -> Result<Vec<CompareRow>> {
    let split = split_odd_even(exp.official.query_ids())?;
    let mut jobs = Vec::new();
    for &method in methods {
        match method {
            CompareMethod::BestComponent => jobs.push((method, 1)),
            CompareMethod::Fusion(_) => jobs.extend((2..=exp.runs.len()).map(|k| (method, k))),
        }
    }
    par::map(&jobs, |&(method, k)| {
        let metrics = match method {
            CompareMethod::BestComponent => exp.evaluate(&exp.runs[0])?.mean,
            CompareMethod::Fusion(m) => fuse_prefix(exp, training, &split, m, k)?,
        };
        Ok(CompareRow {
            method,
            num_systems: k,
            metrics,
        })
    })
    .into_iter()
    .collect()
}

fn write_metrics<W: Write>(out: &mut W, m: &MeanMetrics) -> std::io::Result<()> {
    writeln!(out, "{:.6},{:.6},{:.6},{:.6}", m.map, m.rp, m.p10, m.p20)
}

pub fn write_curve_csv<W: Write>(rows: &[CurveRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "num_systems,map,rp,p10,p20")?;
    for r in rows {
        write!(out, "{},", r.num_systems)?;
        write_metrics(&mut out, &r.metrics)?;
    }
    Ok(())
}

pub fn write_compare_csv<W: Write>(rows: &[CompareRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "method,num_systems,map,rp,p10,p20")?;
    for r in rows {
        write!(out, "{},{},", r.method, r.num_systems)?;
        write_metrics(&mut out, &r.metrics)?;
    }
    Ok(())
}
