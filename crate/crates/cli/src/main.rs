//! `rankfuse`: pooling, fusion training and evaluation from the shell.
//!
//! Tables go to `--out`/`--csv` when given, otherwise to stdout. Every
//! command is a pure function of its inputs and seed.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rankfuse::corpus::{load_qrels, load_run, write_qrels, write_run, Qrels, RunList};
use rankfuse::evaluation::{evaluate, sensitivity_table, write_sensitivity_csv};
use rankfuse::fusion::{
    borda, comb_mnz, comb_sum, linear_combine, normalize_reciprocal, FusionMethod, ScoredList,
    DEFAULT_OUTPUT_DEPTH, DEFAULT_RECIPROCAL_CONSTANT,
};
use rankfuse::harness::{
    compare_methods, cross_validated_fusion, generate_synthetic, group_by_relcount, grouped_eval,
    incremental_fusion_curve, linear_profile, write_compare_csv, write_curve_csv, write_grouped_csv,
    CompareMethod, Experiment, FusionSettings, GroupMode, SynthConfig,
};
use rankfuse::pooling::{build_pool, make_partial_qrels, pick_depth_for_fraction, pool_sweep, PoolSpec};
use rankfuse::regression::{assemble_matrix, solve_ols, DocUniverse, WeightVector};

#[derive(Parser)]
#[command(name = "rankfuse", version, about = "Rank fusion with weights trained on partial relevance judgments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build partial qrels from a fixed-depth pool over the runs.
    Pool(PoolArgs),
    /// Relevant documents found by the pool at each depth.
    Sweep(SweepArgs),
    /// Fit least-squares fusion weights.
    Train(TrainArgs),
    /// Fuse runs into one ranked list.
    Fuse(FuseArgs),
    /// Per-query and mean MAP, RP, P@10, P@20.
    Eval(EvalArgs),
    /// Two-fold odd/even cross-validated linear combination.
    Xval(XvalArgs),
    /// Cross-validated fusion of the best 2, 3, ..., n runs.
    Curve(XvalArgs),
    /// Incremental curves for several fusion methods.
    Compare(CompareArgs),
    /// Metrics over query groups formed by relevant-document count.
    GroupEval(GroupEvalArgs),
    /// How a run's metrics move when evaluated with partial qrels.
    Sensitivity(SensitivityArgs),
    /// Generate synthetic runs and qrels.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunsArgs {
    /// Run files, best first.
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
}

#[derive(Args)]
struct FusionArgs {
    /// Constant c in the rank-to-score map 1/(c + rank).
    #[arg(long, default_value_t = DEFAULT_RECIPROCAL_CONSTANT)]
    constant: f64,
    /// Documents kept per query in fused output.
    #[arg(long, default_value_t = DEFAULT_OUTPUT_DEPTH)]
    depth: usize,
    /// Ridge added to the normal equations (0 fits plain least squares).
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    /// Also train on relevant documents no run retrieved (scored 0 everywhere).
    #[arg(long)]
    include_unretrieved: bool,
}

impl FusionArgs {
    fn settings(&self) -> FusionSettings {
        FusionSettings {
            reciprocal_constant: self.constant,
            depth: self.depth,
            ridge_epsilon: self.ridge,
            universe: universe(self.include_unretrieved),
        }
    }
}

fn universe(include_unretrieved: bool) -> DocUniverse {
    if include_unretrieved {
        DocUniverse::RetrievedAndRelevant
    } else {
        DocUniverse::Retrieved
    }
}

#[derive(Args)]
struct PoolArgs {
    #[command(flatten)]
    runs: RunsArgs,
    /// Full qrels to restrict.
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, required_unless_present = "target_fraction", conflicts_with = "target_fraction")]
    depth: Option<usize>,
    /// Pick the depth whose coverage of relevant documents is closest to this.
    #[arg(long)]
    target_fraction: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    runs: RunsArgs,
    #[arg(long)]
    qrels: PathBuf,
    /// Depths to report (default: 1 to the longest run).
    #[arg(long, value_delimiter = ',')]
    depths: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    runs: RunsArgs,
    /// Training qrels, full or partial.
    #[arg(long)]
    qrels: PathBuf,
    /// File of query ids to train on, one per line (default: all judged queries).
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    out_weights: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_RECIPROCAL_CONSTANT)]
    constant: f64,
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    #[arg(long)]
    include_unretrieved: bool,
}

#[derive(Args)]
struct FuseArgs {
    #[command(flatten)]
    runs: RunsArgs,
    #[arg(long, default_value = "lc")]
    method: FusionMethod,
    /// Weights CSV from `train`; required for `lc`.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_RECIPROCAL_CONSTANT)]
    constant: f64,
    #[arg(long, default_value_t = DEFAULT_OUTPUT_DEPTH)]
    depth: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct XvalArgs {
    #[command(flatten)]
    runs: RunsArgs,
    /// Official qrels used for evaluation.
    #[arg(long)]
    qrels: PathBuf,
    /// Qrels to train on (default: the official qrels).
    #[arg(long)]
    training_qrels: Option<PathBuf>,
    #[command(flatten)]
    fusion: FusionArgs,
    /// Fused run output (xval only).
    #[arg(long)]
    out_run: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    xval: XvalArgs,
    /// Methods among lc, combsum, combmnz, borda, best-component.
    #[arg(long, value_delimiter = ',', default_value = "lc,combsum,combmnz,borda,best-component")]
    methods: Vec<CompareMethod>,
}

#[derive(Args)]
struct GroupEvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// `threshold:<n>` or `tertiles`.
    #[arg(long, default_value = "threshold:10")]
    mode: GroupMode,
    /// Qrels whose relevant counts define the groups (default: --qrels).
    #[arg(long)]
    group_qrels: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SensitivityArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Partial qrels as `label=path`; repeatable.
    #[arg(long = "partial", required = true, value_parser = parse_labelled)]
    partials: Vec<(String, PathBuf)>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    queries: usize,
    /// Systems with qualities spaced from --best down to --worst.
    #[arg(long, default_value_t = 10, conflicts_with = "quality")]
    systems: usize,
    #[arg(long, default_value_t = 0.8)]
    best: f64,
    #[arg(long, default_value_t = 0.1)]
    worst: f64,
    /// Explicit per-system qualities in [0, 1].
    #[arg(long, value_delimiter = ',')]
    quality: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    docs: usize,
    #[arg(long, default_value_t = 20)]
    relevant: usize,
    /// Ranked list length per system (default: every candidate).
    #[arg(long)]
    run_depth: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_labelled(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((label, path)) if !label.is_empty() && !path.is_empty() => Ok((label.to_owned(), path.into())),
        _ => Err(format!("expected label=path, got {s:?}")),
    }
}

fn load_runs(paths: &[PathBuf]) -> Result<Vec<RunList>> {
    paths
        .iter()
        .map(|p| load_run(p).with_context(|| format!("reading run {}", p.display())))
        .collect()
}

fn read_qrels(path: &Path) -> Result<Qrels> {
    load_qrels(path).with_context(|| format!("reading qrels {}", path.display()))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    let mut out = sink(path)?;
    body(&mut out)?;
    out.flush()?;
    Ok(())
}

fn scored(runs: &[RunList], constant: f64) -> Result<Vec<ScoredList>> {
    Ok(runs
        .iter()
        .map(|r| normalize_reciprocal(r, constant))
        .collect::<rankfuse::Result<_>>()?)
}

fn experiment(args: &XvalArgs) -> Result<(Experiment, Qrels)> {
    let runs = load_runs(&args.runs.runs)?;
    let official = read_qrels(&args.qrels)?;
    let training = match &args.training_qrels {
        Some(p) => read_qrels(p)?,
        None => official.clone(),
    };
    Ok((Experiment::new(runs, official, args.fusion.settings())?, training))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pool(a) => {
            let runs = load_runs(&a.runs.runs)?;
            let full = read_qrels(&a.qrels)?;
            let depth = match (a.depth, a.target_fraction) {
                (Some(d), _) => d,
                (None, Some(f)) => {
                    let (d, coverage) = pick_depth_for_fraction(&runs, &full, f)?;
                    log::info!("depth {d} covers {:.2}% of relevant documents", coverage * 100.0);
                    d
                }
                (None, None) => bail!("either --depth or --target-fraction is required"),
            };
            let partial = make_partial_qrels(&build_pool(&PoolSpec::new(depth, &runs)?), &full);
            emit(a.out.as_deref(), |w| write_qrels(&partial, w))
        }
        Command::Sweep(a) => {
            let runs = load_runs(&a.runs.runs)?;
            let full = read_qrels(&a.qrels)?;
            let depths = if a.depths.is_empty() {
                (1..=runs.iter().map(RunList::max_depth).max().unwrap_or(1).max(1)).collect()
            } else {
                a.depths
            };
            let rows = pool_sweep(&runs, &full, &depths)?;
            emit(a.out.as_deref(), |w| {
                writeln!(w, "depth,relevant_count,percent")?;
                rows.iter()
                    .try_for_each(|r| writeln!(w, "{},{},{:.4}", r.depth, r.relevant_count, r.percent))
            })
        }
        Command::Train(a) => {
            let runs = load_runs(&a.runs.runs)?;
            let qrels = read_qrels(&a.qrels)?;
            let queries: BTreeSet<String> = match &a.queries {
                Some(p) => read_query_list(p)?,
                None => qrels.query_ids().map(str::to_owned).collect(),
            };
            let matrix = assemble_matrix(&scored(&runs, a.constant)?, &qrels, &queries, universe(a.include_unretrieved))?;
            let weights = solve_ols(&matrix, a.ridge)?;
            log::info!("trained on {} rows: {:?}", matrix.len(), weights.status());
            emit(a.out_weights.as_deref(), |w| weights.write_csv(w))
        }
        Command::Fuse(a) => {
            let runs = load_runs(&a.runs.runs)?;
            let fused = match a.method {
                FusionMethod::LinearCombination => {
                    let Some(path) = &a.weights else {
                        bail!("--weights is required for linear combination");
                    };
                    let file = File::open(path).with_context(|| format!("reading weights {}", path.display()))?;
                    let weights = WeightVector::read_csv(BufReader::new(file))?;
                    linear_combine(&scored(&runs, a.constant)?, &weights, a.depth)?
                }
                FusionMethod::CombSum => comb_sum(&scored(&runs, a.constant)?, a.depth)?,
                FusionMethod::CombMnz => comb_mnz(&scored(&runs, a.constant)?, a.depth)?,
                FusionMethod::Borda => borda(&runs, a.depth)?,
            };
            emit(a.out.as_deref(), |w| write_run(&fused, usize::MAX, w))
        }
        Command::Eval(a) => {
            let run = load_run(&a.run).with_context(|| format!("reading run {}", a.run.display()))?;
            let qrels = read_qrels(&a.qrels)?;
            let queries = qrels.query_ids().map(str::to_owned).collect();
            let report = evaluate(&run, &qrels, &queries)?;
            emit(a.csv.as_deref(), |w| report.write_csv(w))
        }
        Command::Xval(a) => {
            let (exp, training) = experiment(&a)?;
            let outcome = cross_validated_fusion(&exp, &training)?;
            if let Some(p) = &a.out_run {
                emit(Some(p), |w| write_run(&outcome.fused, usize::MAX, w))?;
            }
            emit(a.csv.as_deref(), |w| outcome.report.write_csv(w))
        }
        Command::Curve(a) => {
            let (exp, training) = experiment(&a)?;
            let rows = incremental_fusion_curve(&exp, &training)?;
            emit(a.csv.as_deref(), |w| write_curve_csv(&rows, w))
        }
        Command::Compare(a) => {
            let (exp, training) = experiment(&a.xval)?;
            let rows = compare_methods(&exp, &training, &a.methods)?;
            emit(a.xval.csv.as_deref(), |w| write_compare_csv(&rows, w))
        }
        Command::GroupEval(a) => {
            let run = load_run(&a.run).with_context(|| format!("reading run {}", a.run.display()))?;
            let qrels = read_qrels(&a.qrels)?;
            let grouping = match &a.group_qrels {
                Some(p) => read_qrels(p)?,
                None => qrels.clone(),
            };
            let groups = group_by_relcount(&grouping, a.mode)?;
            let reports = grouped_eval(&run, &qrels, &groups)?;
            emit(a.csv.as_deref(), |w| write_grouped_csv(&reports, w))
        }
        Command::Sensitivity(a) => {
            let run = load_run(&a.run).with_context(|| format!("reading run {}", a.run.display()))?;
            let full = read_qrels(&a.qrels)?;
            let partials = a
                .partials
                .iter()
                .map(|(label, p)| Ok((label.clone(), read_qrels(p)?)))
                .collect::<Result<Vec<_>>>()?;
            let rows = sensitivity_table(&run, &full, &partials)?;
            emit(a.csv.as_deref(), |w| write_sensitivity_csv(&rows, w))
        }
        Command::Synth(a) => {
            let quality = if a.quality.is_empty() {
                linear_profile(a.systems, a.best, a.worst)
            } else {
                a.quality
            };
            let config = SynthConfig {
                seed: a.seed,
                num_queries: a.queries,
                docs_per_query: a.docs,
                relevant_per_query: a.relevant,
                quality,
                run_depth: a.run_depth,
            };
            let (runs, qrels) = generate_synthetic(&config)?;
            fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
            for r in &runs {
                let path = a.out_dir.join(format!("{}.run", r.tag()));
                emit(Some(&path), |w| write_run(r, usize::MAX, w))?;
            }
            emit(Some(&a.out_dir.join("qrels.txt")), |w| write_qrels(&qrels, w))
        }
    }
}

fn read_query_list(path: &Path) -> Result<BTreeSet<String>> {
    let file = File::open(path).with_context(|| format!("reading query list {}", path.display()))?;
    let mut ids = BTreeSet::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let id = line.trim();
        if !id.is_empty() && !id.starts_with('#') {
            ids.insert(id.to_owned());
        }
    }
    if ids.is_empty() {
        bail!("query list {} is empty", path.display());
    }
    Ok(ids)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
