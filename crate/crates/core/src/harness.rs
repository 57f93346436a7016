//! Experiment orchestration: for every problem, split the series into an
//! estimation and a validation part, estimate the loss with each configured
//! procedure, compute the loss actually incurred on the validation part and
//! record how far apart the two are.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;

use crate::embedding::{estimate_embedding_dimension, FnnConfig};
use crate::error::{Error, Result};
use crate::evaluation::{
    apae_matrix, average_ranks, bayes_sign_test, estimate_loss, relative_apae_differences, true_loss,
    BayesSignTest, EstimationResult, RankTable,
};
use crate::learners::LearnerSpec;
use crate::rng::method_seed;
use crate::series::{estimation_validation_split, load_csv, Column, TimeSeries};
use crate::splitters::{Method, MethodParams};
use crate::synthetic::{simulate_trial, DgpSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Csv { paths: Vec<PathBuf>, column: Column },
    Synthetic { dgp: DgpSpec, trials: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingMode {
    /// False Nearest Neighbours on the estimation part.
    Auto(FnnConfig),
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: Source,
    pub estimation_fraction: f64,
    pub embedding: EmbeddingMode,
    pub learner: LearnerSpec,
    pub methods: Vec<Method>,
    pub method_params: MethodParams,
    pub base_seed: u64,
    /// Worker threads; `None` uses the global pool, `Some(1)` runs inline.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(source: Source) -> Self {
        let embedding = match source {
            Source::Synthetic { .. } => EmbeddingMode::Fixed(5),
            Source::Csv { .. } => EmbeddingMode::Auto(FnnConfig::default()),
        };
        Self {
            source,
            estimation_fraction: 0.7,
            embedding,
            learner: LearnerSpec::default(),
            methods: Method::ALL.to_vec(),
            method_params: MethodParams::default(),
            base_seed: 0,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.estimation_fraction > 0.0 && self.estimation_fraction < 1.0) {
            return Err(Error::Config(format!(
                "estimation fraction {} not in (0, 1)",
                self.estimation_fraction
            )));
        }
        if self.method_params.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if let EmbeddingMode::Fixed(0) = self.embedding {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if let Source::Synthetic { trials: 0, .. } = self.source {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        self.learner.validate()
    }

    fn problem_count(&self) -> usize {
        match &self.source {
            Source::Csv { paths, .. } => paths.len(),
            Source::Synthetic { trials, .. } => *trials,
        }
    }

    fn load_problem(&self, index: usize) -> Result<TimeSeries> {
        match &self.source {
            Source::Csv { paths, column } => load_csv(&paths[index], column),
            Source::Synthetic { dgp, .. } => Ok(simulate_trial(dgp, index, self.base_seed)?.series),
        }
    }
}

/// A problem or (problem, method) pair that produced no result.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub problem_id: String,
    pub method: Option<Method>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub results: Vec<EstimationResult>,
    pub failures: Vec<Failure>,
    /// Ranks over problems where every method produced a result.
    pub ranks: Option<RankTable>,
}

struct ProblemOutcome {
    results: Vec<EstimationResult>,
    failures: Vec<Failure>,
}

/// Runs every configured method on every problem. Errors are recorded per
/// problem (or per method) and never abort the remaining work.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let count = config.problem_count();
    let run = |i: usize| run_problem(config, i);
    let outcomes: Vec<ProblemOutcome> = match config.threads {
        Some(1) => (0..count).map(run).collect(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| (0..count).into_par_iter().map(run).collect()),
        None => (0..count).into_par_iter().map(run).collect(),
    };

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        results.extend(o.results);
        failures.extend(o.failures);
    }
    let (_, matrix) = apae_matrix(&results, &config.methods);
    let ranks = if matrix.is_empty() {
        None
    } else {
        let names: Vec<String> = config.methods.iter().map(|m| m.name().to_string()).collect();
        Some(average_ranks(&names, &matrix)?)
    };
    info!(
        "event=experiment_done problems={} results={} failures={}",
        count,
        results.len(),
        failures.len()
    );
    Ok(ExperimentOutput {
        results,
        failures,
        ranks,
    })
}

fn run_problem(config: &ExperimentConfig, index: usize) -> ProblemOutcome {
    let fallback_id = match &config.source {
        Source::Csv { paths, .. } => paths[index]
            .file_stem()
            .map_or_else(|| format!("problem-{index:04}"), |s| s.to_string_lossy().into_owned()),
        Source::Synthetic { dgp, .. } => format!("{}-{index:04}", dgp.kind),
    };
    let fail = |id: String, reason: Error| {
        warn!("event=problem_failed problem={id} reason=\"{reason}\"");
        ProblemOutcome {
            results: Vec::new(),
            failures: vec![Failure {
                problem_id: id,
                method: None,
                reason: reason.to_string(),
            }],
        }
    };
    let series = match config.load_problem(index) {
        Ok(s) => s,
        Err(e) => return fail(fallback_id, e),
    };
    let id = series.name().to_string();
    let (estimation, validation) = match estimation_validation_split(&series, config.estimation_fraction) {
        Ok(parts) => parts,
        Err(e) => return fail(id, e),
    };
    let p = match &config.embedding {
        EmbeddingMode::Fixed(p) => *p,
        EmbeddingMode::Auto(fnn) => match estimate_embedding_dimension(&estimation, fnn) {
            Ok(out) => out.dimension,
            Err(e) => return fail(id, e),
        },
    };
    let truth = match true_loss(&estimation, &validation, &config.learner, p) {
        Ok(l) => l,
        Err(e) => return fail(id, e),
    };

    let mut outcome = ProblemOutcome {
        results: Vec::new(),
        failures: Vec::new(),
    };
    for &method in &config.methods {
        let seed = method_seed(config.base_seed, index as u64, method.name());
        match estimate_loss(&estimation, method, &config.method_params, &config.learner, p, seed) {
            Ok(est) => outcome
                .results
                .push(EstimationResult::new(id.clone(), method, est.estimate, truth)),
            Err(e) => {
                warn!("event=method_failed problem={id} method={method} reason=\"{e}\"");
                outcome.failures.push(Failure {
                    problem_id: id.clone(),
                    method: Some(method),
                    reason: e.to_string(),
                });
            }
        }
    }
    info!("event=problem_done problem={id} p={p} true_loss={truth}");
    outcome
}

/// Settings for the Bayes sign tests run after a study.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonConfig {
    pub baseline: Method,
    /// Half-width of the region of practical equivalence, in percent.
    pub rope: f64,
    pub samples: usize,
    pub prior_strength: f64,
    pub seed: u64,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            baseline: Method::RepHoldout,
            rope: 2.5,
            samples: 100_000,
            prior_strength: 1.0,
            seed: 0,
        }
    }
}

/// Sign tests of every other method against the baseline. Methods without
/// any paired problem are left out.
pub fn compare_to_baseline(
    results: &[EstimationResult],
    methods: &[Method],
    cmp: &ComparisonConfig,
) -> Result<Vec<(Method, BayesSignTest)>> {
    let mut out = Vec::new();
    for &m in methods.iter().filter(|&&m| m != cmp.baseline) {
        let diffs = relative_apae_differences(results, m, cmp.baseline);
        if diffs.is_empty() {
            continue;
        }
        let test = bayes_sign_test(&diffs, -cmp.rope, cmp.rope, cmp.samples, cmp.prior_strength, cmp.seed)?;
        out.push((m, test));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStudy {
    pub output: ExperimentOutput,
    pub comparisons: Vec<(Method, BayesSignTest)>,
}

/// Monte Carlo study over one synthetic process: run the experiment on
/// `trials` generated series, then rank the methods and compare them to the
/// baseline.
pub fn reproduce_synthetic(config: &ExperimentConfig, cmp: &ComparisonConfig) -> Result<SyntheticStudy> {
    if !matches!(config.source, Source::Synthetic { .. }) {
        return Err(Error::Config("synthetic study needs a synthetic source".into()));
    }
    let output = run_experiment(config)?;
    let comparisons = compare_to_baseline(&output.results, &config.methods, cmp)?;
    Ok(SyntheticStudy { output, comparisons })
}

/// Flat `key = value` settings, one per line; `#` starts a comment. Keys
/// match the long command-line flag names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            entries.insert(k.trim().replace('_', "-"), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Config(format!("{key} = {v}: {e}")))
            })
            .transpose()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Parses a comma-separated method list; `all` selects every method.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let m: Method = name.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("empty method list".into()));
    }
    Ok(out)
}
