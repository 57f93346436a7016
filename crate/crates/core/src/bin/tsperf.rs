use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use log::error;

use tsperf::evaluation::{apae_matrix, average_ranks, read_results, write_results_file};
use tsperf::harness::{
    compare_to_baseline, parse_methods, reproduce_synthetic, run_experiment, ComparisonConfig, ConfigFile,
    EmbeddingMode, ExperimentConfig, ExperimentOutput, Source,
};
use tsperf::series::{load_csv, write_csv, Column};
use tsperf::splitters::build_plan;
use tsperf::stationarity::{ndiffs, wavelet_stationarity_test, Correction};
use tsperf::synthetic::{simulate_trial, DgpKind, DgpSpec};
use tsperf::{
    embed, estimate_embedding_dimension, Error, FnnConfig, LearnerKind, LearnerSpec, Method, MethodParams,
    Penalty, Result,
};

#[derive(Parser)]
#[command(name = "tsperf", version, about = "Performance estimation for time-series forecasters")]
struct Cli {
    /// key = value settings; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic series.
    Simulate(SimulateArgs),
    /// Run the estimation methods on series read from CSV files.
    Evaluate(EvaluateArgs),
    /// Monte Carlo study on a synthetic process: results, ranks and comparisons.
    Benchmark(BenchmarkArgs),
    /// Average APAE ranks from a results CSV.
    Rank(RankArgs),
    /// Bayes sign tests of every method against a baseline.
    Compare(CompareArgs),
    /// Differencing order and wavelet stationarity verdict per series.
    Stationarity(StationarityArgs),
    /// Estimate the embedding dimension, or write the embedded matrix.
    Embed(EmbedArgs),
    /// Print a resampling plan as JSON.
    Plan(PlanArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Share of each series used for estimation.
    #[arg(long)]
    fraction: Option<f64>,
    /// `auto` (false nearest neighbours) or a fixed dimension.
    #[arg(long)]
    embedding: Option<String>,
    #[command(flatten)]
    fnn: FnnArgs,
    /// lasso or knn.
    #[arg(long)]
    learner: Option<LearnerKind>,
    /// Fixed lasso penalty on the standardized problem.
    #[arg(long)]
    lambda: Option<f64>,
    /// Lasso penalty as a fraction of the smallest all-zero penalty.
    #[arg(long)]
    lambda_ratio: Option<f64>,
    #[arg(long)]
    neighbours: Option<usize>,
    /// Comma-separated method names, or `all`.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    nreps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (1 runs sequentially).
    #[arg(long)]
    threads: Option<usize>,
    /// Results CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rank table CSV.
    #[arg(long)]
    ranks_out: Option<PathBuf>,
}

#[derive(Args)]
struct FnnArgs {
    #[arg(long)]
    max_dimension: Option<usize>,
    #[arg(long)]
    fnn_tolerance: Option<f64>,
    /// Loneliness threshold, or `none` to drop that criterion.
    #[arg(long)]
    loneliness: Option<String>,
}

#[derive(Args)]
struct DgpArgs {
    /// s1, s2 or s3.
    #[arg(long)]
    dgp: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    length: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    dgp: DgpArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// One CSV per trial in this directory; without it a long-format CSV
    /// goes to stdout.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Column index (0-based) or header name.
    #[arg(long)]
    column: Option<Column>,
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Args)]
struct ComparisonArgs {
    #[arg(long)]
    baseline: Option<String>,
    /// Half-width of the region of practical equivalence, in percent.
    #[arg(long)]
    rope: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    prior: Option<f64>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    dgp: DgpArgs,
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[command(flatten)]
    comparison: ComparisonArgs,
}

#[derive(Args)]
struct RankArgs {
    results: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    results: PathBuf,
    #[command(flatten)]
    comparison: ComparisonArgs,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct StationarityArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    column: Option<Column>,
    #[arg(long)]
    alpha: Option<f64>,
    /// bonferroni or fdr.
    #[arg(long)]
    correction: Option<Correction>,
    #[arg(long)]
    max_d: Option<usize>,
}

#[derive(Args)]
struct EmbedArgs {
    input: PathBuf,
    #[arg(long)]
    column: Option<Column>,
    /// Write the embedded matrix for this dimension instead of estimating one.
    #[arg(long)]
    p: Option<usize>,
    #[command(flatten)]
    fnn: FnnArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    method: String,
    /// Number of embedded rows.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    nreps: Option<usize>,
    /// Removal radius for CV-Mod and CV-hvBl.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Flag value, else config-file value, else `None`.
fn pick<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.get(key),
    }
}

fn parse_flag<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("--{key} {value}: {e}")))
}

fn fnn_config(args: FnnArgs, file: &ConfigFile) -> Result<FnnConfig> {
    let mut cfg = FnnConfig::default();
    if let Some(d) = pick(args.max_dimension, file, "max-dimension")? {
        cfg.max_dimension = d;
    }
    if let Some(t) = pick(args.fnn_tolerance, file, "fnn-tolerance")? {
        cfg.tolerance = t;
    }
    if let Some(l) = pick(args.loneliness, file, "loneliness")? {
        cfg.loneliness_threshold = if l.eq_ignore_ascii_case("none") {
            None
        } else {
            Some(parse_flag("loneliness", &l)?)
        };
    }
    Ok(cfg)
}

fn column(flag: Option<Column>, file: &ConfigFile) -> Result<Column> {
    Ok(pick(flag, file, "column")?.unwrap_or(Column::Index(0)))
}

fn dgp_spec(args: &DgpArgs, file: &ConfigFile) -> Result<(DgpSpec, usize)> {
    let kind: DgpKind = pick(args.dgp.clone(), file, "dgp")?
        .ok_or_else(|| Error::Config("--dgp is required".into()))?
        .parse()?;
    let mut spec = DgpSpec::new(kind);
    if let Some(len) = pick(args.length, file, "length")? {
        spec.length = len;
    }
    let trials = pick(args.trials, file, "trials")?.unwrap_or(100);
    Ok((spec, trials))
}

fn experiment_config(source: Source, args: ExperimentArgs, file: &ConfigFile) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(source);
    if let Some(f) = pick(args.fraction, file, "fraction")? {
        cfg.estimation_fraction = f;
    }
    let fnn = fnn_config(args.fnn, file)?;
    cfg.embedding = match pick(args.embedding, file, "embedding")? {
        Some(e) if e.eq_ignore_ascii_case("auto") => EmbeddingMode::Auto(fnn),
        Some(e) => EmbeddingMode::Fixed(parse_flag("embedding", &e)?),
        None => match cfg.embedding {
            EmbeddingMode::Auto(_) => EmbeddingMode::Auto(fnn),
            fixed => fixed,
        },
    };
    let kind: LearnerKind = pick(args.learner, file, "learner")?.unwrap_or(LearnerKind::Lasso);
    cfg.learner = match kind {
        LearnerKind::Lasso => {
            let penalty = match (
                pick(args.lambda, file, "lambda")?,
                pick(args.lambda_ratio, file, "lambda-ratio")?,
            ) {
                (Some(_), Some(_)) => {
                    return Err(Error::Config("give either lambda or lambda-ratio, not both".into()))
                }
                (Some(l), None) => Penalty::Fixed(l),
                (None, Some(r)) => Penalty::FractionOfMax(r),
                (None, None) => Penalty::FractionOfMax(0.01),
            };
            LearnerSpec::lasso(penalty)
        }
        LearnerKind::Knn => LearnerSpec::knn(pick(args.neighbours, file, "neighbours")?.unwrap_or(5)),
    };
    if let Some(m) = pick(args.methods, file, "methods")? {
        cfg.methods = parse_methods(&m)?;
    }
    if let Some(k) = pick(args.folds, file, "folds")? {
        cfg.method_params.folds = k;
    }
    if let Some(r) = pick(args.nreps, file, "nreps")? {
        cfg.method_params.nreps = r;
    }
    if let Some(s) = pick(args.seed, file, "seed")? {
        cfg.base_seed = s;
    }
    cfg.threads = pick(args.threads, file, "threads")?;
    Ok(cfg)
}

fn comparison_config(args: ComparisonArgs, seed: Option<u64>, file: &ConfigFile) -> Result<ComparisonConfig> {
    let mut cmp = ComparisonConfig::default();
    if let Some(b) = pick(args.baseline, file, "baseline")? {
        cmp.baseline = b.parse()?;
    }
    if let Some(r) = pick(args.rope, file, "rope")? {
        cmp.rope = r;
    }
    if let Some(s) = pick(args.samples, file, "samples")? {
        cmp.samples = s;
    }
    if let Some(p) = pick(args.prior, file, "prior")? {
        cmp.prior_strength = p;
    }
    if let Some(s) = pick(seed, file, "seed")? {
        cmp.seed = s;
    }
    Ok(cmp)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_err(path: Option<&Path>) -> impl Fn(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf),
        source,
    }
}

/// Writes results and ranks; returns whether any problem or method failed.
fn emit_experiment(
    out: &ExperimentOutput,
    results_path: &Path,
    ranks_path: Option<&Path>,
) -> Result<bool> {
    write_results_file(&out.results, results_path)?;
    if let (Some(path), Some(ranks)) = (ranks_path, &out.ranks) {
        let mut w = output(Some(path))?;
        ranks.write_csv(&mut w).map_err(io_err(Some(path)))?;
        w.flush().map_err(io_err(Some(path)))?;
    }
    for f in &out.failures {
        let method = f.method.map_or("-", Method::name);
        eprintln!("failed: problem={} method={} reason={}", f.problem_id, method, f.reason);
    }
    Ok(!out.failures.is_empty())
}

fn simulate(args: SimulateArgs, file: &ConfigFile) -> Result<bool> {
    let (spec, trials) = dgp_spec(&args.dgp, file)?;
    let seed = pick(args.seed, file, "seed")?.unwrap_or(0);
    match args.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
                path: dir.clone(),
                source,
            })?;
            for trial in 0..trials {
                let s = simulate_trial(&spec, trial, seed)?.series;
                write_csv(&s, dir.join(format!("{}.csv", s.name())))?;
            }
        }
        None => {
            let mut w = output(None)?;
            let err = io_err(None);
            writeln!(w, "series,t,value").map_err(&err)?;
            for trial in 0..trials {
                let s = simulate_trial(&spec, trial, seed)?.series;
                for (t, v) in s.values().iter().enumerate() {
                    writeln!(w, "{},{t},{v}", s.name()).map_err(&err)?;
                }
            }
            w.flush().map_err(&err)?;
        }
    }
    Ok(false)
}

fn evaluate(args: EvaluateArgs, file: &ConfigFile) -> Result<bool> {
    let source = Source::Csv {
        paths: args.inputs,
        column: column(args.column, file)?,
    };
    let results = pick(args.experiment.out.clone(), file, "out")?.unwrap_or_else(|| "results.csv".into());
    let ranks = pick(args.experiment.ranks_out.clone(), file, "ranks-out")?;
    let cfg = experiment_config(source, args.experiment, file)?;
    let out = run_experiment(&cfg)?;
    emit_experiment(&out, &results, ranks.as_deref())
}

fn benchmark(args: BenchmarkArgs, file: &ConfigFile) -> Result<bool> {
    let (dgp, trials) = dgp_spec(&args.dgp, file)?;
    let results = pick(args.experiment.out.clone(), file, "out")?.unwrap_or_else(|| "results.csv".into());
    let ranks = pick(args.experiment.ranks_out.clone(), file, "ranks-out")?;
    let seed = args.experiment.seed;
    let cfg = experiment_config(Source::Synthetic { dgp, trials }, args.experiment, file)?;
    let cmp = comparison_config(args.comparison, seed, file)?;
    let study = reproduce_synthetic(&cfg, &cmp)?;
    let partial = emit_experiment(&study.output, &results, ranks.as_deref())?;

    let mut w = output(None)?;
    let err = io_err(None);
    if let Some(table) = &study.output.ranks {
        writeln!(w, "# mean APAE rank over {} trials", table.problems).map_err(&err)?;
        table.write_csv(&mut w).map_err(&err)?;
    }
    writeln!(w, "# sign tests against {} (rope +-{}%)", cmp.baseline, cmp.rope).map_err(&err)?;
    write_comparisons(&mut w, cmp.baseline, &study.comparisons).map_err(&err)?;
    w.flush().map_err(&err)?;
    Ok(partial)
}

fn write_comparisons(
    w: &mut impl Write,
    baseline: Method,
    rows: &[(Method, tsperf::BayesSignTest)],
) -> io::Result<()> {
    writeln!(w, "method,baseline,p_left,p_rope,p_right,left,rope,right")?;
    for (m, t) in rows {
        writeln!(
            w,
            "{m},{baseline},{},{},{},{},{},{}",
            t.p_left, t.p_rope, t.p_right, t.counts[0], t.counts[1], t.counts[2]
        )?;
    }
    Ok(())
}

/// Methods present in a results file, in canonical order.
fn methods_in(results: &[tsperf::EstimationResult]) -> Vec<Method> {
    Method::ALL
        .into_iter()
        .filter(|m| results.iter().any(|r| r.method == *m))
        .collect()
}

fn rank(args: RankArgs) -> Result<bool> {
    let results = read_results(&args.results)?;
    let methods = methods_in(&results);
    let (_, matrix) = apae_matrix(&results, &methods);
    let names: Vec<String> = methods.iter().map(|m| m.name().to_string()).collect();
    let table = average_ranks(&names, &matrix)?;
    let mut w = output(args.out.as_deref())?;
    let err = io_err(args.out.as_deref());
    table.write_csv(&mut w).map_err(&err)?;
    w.flush().map_err(&err)?;
    Ok(false)
}

fn compare(args: CompareArgs, file: &ConfigFile) -> Result<bool> {
    let results = read_results(&args.results)?;
    let cmp = comparison_config(args.comparison, args.seed, file)?;
    let methods = methods_in(&results);
    if !methods.contains(&cmp.baseline) {
        return Err(Error::Config(format!("baseline {} not in results", cmp.baseline)));
    }
    let rows = compare_to_baseline(&results, &methods, &cmp)?;
    let mut w = output(None)?;
    let err = io_err(None);
    write_comparisons(&mut w, cmp.baseline, &rows).map_err(&err)?;
    w.flush().map_err(&err)?;
    Ok(false)
}

fn stationarity(args: StationarityArgs, file: &ConfigFile) -> Result<bool> {
    let col = column(args.column, file)?;
    let alpha = pick(args.alpha, file, "alpha")?.unwrap_or(0.05);
    let correction: Correction = pick(args.correction, file, "correction")?.unwrap_or_default();
    let max_d = pick(args.max_d, file, "max-d")?.unwrap_or(2);
    let mut w = output(None)?;
    let err = io_err(None);
    writeln!(w, "series,I,S,rejections").map_err(&err)?;
    let mut partial = false;
    for path in &args.inputs {
        let row = load_csv(path, &col).and_then(|s| {
            let d = ndiffs(&s, max_d)?;
            let wt = wavelet_stationarity_test(&s, alpha, correction)?;
            let triples: Vec<String> = wt
                .rejections
                .iter()
                .map(|r| format!("{}:{}:{}", r.level, r.scale, r.position))
                .collect();
            Ok(format!("{},{d},{},{}", s.name(), u8::from(wt.stationary), triples.join(";")))
        });
        match row {
            Ok(line) => writeln!(w, "{line}").map_err(&err)?,
            Err(e) => {
                error!("series={} error=\"{e}\"", path.display());
                partial = true;
            }
        }
    }
    w.flush().map_err(&err)?;
    Ok(partial)
}

fn embed_cmd(args: EmbedArgs, file: &ConfigFile) -> Result<bool> {
    let series = load_csv(&args.input, &column(args.column, file)?)?;
    let mut w = output(args.out.as_deref())?;
    let err = io_err(args.out.as_deref());
    match args.p {
        Some(p) => {
            let data = embed(&series, p)?;
            let header: Vec<String> = (1..=p).map(|i| format!("x{i}")).collect();
            writeln!(w, "t,{},y", header.join(",")).map_err(&err)?;
            for k in 0..data.rows() {
                let row: Vec<String> = data.row(k).iter().map(|v| v.to_string()).collect();
                writeln!(w, "{},{},{}", data.target_time()[k], row.join(","), data.targets()[k]).map_err(&err)?;
            }
        }
        None => {
            let out = estimate_embedding_dimension(&series, &fnn_config(args.fnn, file)?)?;
            writeln!(w, "dimension,false_fraction").map_err(&err)?;
            for (d, f) in out.fractions.iter().enumerate() {
                writeln!(w, "{},{f}", d + 1).map_err(&err)?;
            }
            eprintln!(
                "embedding dimension {}{}",
                out.dimension,
                if out.reached_tolerance { "" } else { " (tolerance not reached)" }
            );
        }
    }
    w.flush().map_err(&err)?;
    Ok(false)
}

fn plan(args: PlanArgs, file: &ConfigFile) -> Result<bool> {
    let method: Method = args.method.parse()?;
    let mut params = MethodParams::default();
    if let Some(k) = pick(args.folds, file, "folds")? {
        params.folds = k;
    }
    if let Some(r) = pick(args.nreps, file, "nreps")? {
        params.nreps = r;
    }
    let p = args.p.unwrap_or(5);
    let seed = pick(args.seed, file, "seed")?.unwrap_or(0);
    let plan = build_plan(method, args.n, &params, p, seed)?;
    println!("{}", plan.to_json()?);
    Ok(false)
}

fn run(cli: Cli) -> Result<bool> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Simulate(a) => simulate(a, &file),
        Command::Evaluate(a) => evaluate(a, &file),
        Command::Benchmark(a) => benchmark(a, &file),
        Command::Rank(a) => rank(a),
        Command::Compare(a) => compare(a, &file),
        Command::Stationarity(a) => stationarity(a, &file),
        Command::Embed(a) => embed_cmd(a, &file),
        Command::Plan(a) => plan(a, &file),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
