//! Losses, estimator execution, ground-truth losses, accuracy of the
//! estimates, rank aggregation and the Bayes sign test.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::Rng as _;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::embedding::{embed, EmbeddedDataset};
use crate::error::{Error, Result};
use crate::learners::{fit, predict, LearnerSpec};
use crate::rng::rng_from_seed;
use crate::series::TimeSeries;
use crate::splitters::{build_plan, Method, MethodParams, ResamplingPlan};

/// Header of the results file, byte for byte.
pub const RESULTS_HEADER: &str = "problem_id,method,estimate,true_loss,apae,pae,pct_diff";

pub fn rmse(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    if predictions.len() != actuals.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} actuals",
            predictions.len(),
            actuals.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("rmse of an empty sample"));
    }
    let mse = predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>()
        / predictions.len() as f64;
    Ok(mse.sqrt())
}

/// Signed error of an estimate: negative means the loss was under-estimated.
pub fn pae(estimate: f64, true_loss: f64) -> f64 {
    estimate - true_loss
}

pub fn apae(estimate: f64, true_loss: f64) -> f64 {
    pae(estimate, true_loss).abs()
}

/// Percentual difference of the estimate relative to the true loss.
pub fn pct_diff(estimate: f64, true_loss: f64) -> Result<f64> {
    if !(true_loss > 0.0) {
        return Err(Error::invalid("percentual difference needs a positive true loss"));
    }
    Ok(100.0 * (estimate - true_loss) / true_loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEstimate {
    pub estimate: f64,
    pub iteration_losses: Vec<f64>,
}

/// Runs `plan` over `data`: fit on each training set, RMSE on each test set,
/// and the unweighted mean of those RMSEs.
pub fn run_plan(data: &EmbeddedDataset, plan: &ResamplingPlan, learner: &LearnerSpec) -> Result<LossEstimate> {
    if plan.n != data.rows() {
        return Err(Error::invalid(format!(
            "plan covers {} rows, dataset has {}",
            plan.n,
            data.rows()
        )));
    }
    if plan.iterations.is_empty() {
        return Err(Error::invalid("plan has no iterations"));
    }
    let p = data.dimension();
    let iteration_losses = plan
        .iterations
        .iter()
        .enumerate()
        .map(|(i, it)| {
            if it.train.is_empty() {
                return Err(Error::EmptyTrainingSet { iteration: i });
            }
            let (x_train, y_train) = data.select(&it.train);
            let (x_test, y_test) = data.select(&it.test);
            let model = fit(learner, &x_train, p, &y_train)?;
            rmse(&predict(&model, &x_test, p)?, &y_test)
        })
        .collect::<Result<Vec<f64>>>()?;
    let estimate = iteration_losses.iter().sum::<f64>() / iteration_losses.len() as f64;
    Ok(LossEstimate {
        estimate,
        iteration_losses,
    })
}

/// Loss estimate of `method` computed on the estimation part of a series.
pub fn estimate_loss(
    estimation: &TimeSeries,
    method: Method,
    params: &MethodParams,
    learner: &LearnerSpec,
    p: usize,
    seed: u64,
) -> Result<LossEstimate> {
    let data = embed(estimation, p)?;
    let plan = build_plan(method, data.rows(), params, p, seed)?;
    run_plan(&data, &plan, learner)
}

/// Ground-truth loss: train on every embedded row whose target lies in the
/// estimation part and test on every row whose target lies in the
/// validation part.
pub fn true_loss(
    estimation: &TimeSeries,
    validation: &TimeSeries,
    learner: &LearnerSpec,
    p: usize,
) -> Result<f64> {
    let full = estimation.concat(validation)?;
    let data = embed(&full, p)?;
    let cut = estimation.len();
    let (train, test): (Vec<usize>, Vec<usize>) =
        (0..data.rows()).partition(|&r| data.target_time()[r] < cut);
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet { iteration: 0 });
    }
    let (x_train, y_train) = data.select(&train);
    let (x_test, y_test) = data.select(&test);
    let model = fit(learner, &x_train, p, &y_train)?;
    rmse(&predict(&model, &x_test, p)?, &y_test)
}

/// One (problem, method) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub problem_id: String,
    pub method: Method,
    pub estimate: f64,
    pub true_loss: f64,
    pub apae: f64,
    pub pae: f64,
    /// `NaN` when the true loss is zero.
    pub pct_diff: f64,
}

impl EstimationResult {
    pub fn new(problem_id: impl Into<String>, method: Method, estimate: f64, true_loss: f64) -> Self {
        Self {
            problem_id: problem_id.into(),
            method,
            estimate,
            true_loss,
            apae: apae(estimate, true_loss),
            pae: pae(estimate, true_loss),
            pct_diff: pct_diff(estimate, true_loss).unwrap_or(f64::NAN),
        }
    }
}

pub fn write_results(results: &[EstimationResult], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(&r.problem_id),
            r.method,
            r.estimate,
            r.true_loss,
            r.apae,
            r.pae,
            r.pct_diff
        )?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_results_file(results: &[EstimationResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    write_results(results, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<EstimationResult>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != RESULTS_HEADER {
        return Err(Error::Config(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let num = |col: usize| -> Result<f64> {
            let cell = record.get(col).unwrap_or("");
            cell.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: i + 2,
                cell: cell.to_string(),
            })
        };
        out.push(EstimationResult {
            problem_id: record[0].to_string(),
            method: record[1].parse()?,
            estimate: num(2)?,
            true_loss: num(3)?,
            apae: num(4)?,
            pae: num(5)?,
            pct_diff: num(6)?,
        });
    }
    Ok(out)
}

/// Mean and standard deviation of each method's rank across problems.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankTable {
    pub methods: Vec<String>,
    pub mean_rank: Vec<f64>,
    /// Sample standard deviation (zero for a single problem).
    pub sd_rank: Vec<f64>,
    pub problems: usize,
}

impl RankTable {
    pub fn rank_of(&self, method: &str) -> Option<f64> {
        self.methods
            .iter()
            .position(|m| m == method)
            .map(|i| self.mean_rank[i])
    }

    /// Methods ordered from best (lowest mean rank) to worst.
    pub fn ordered(&self) -> Vec<(&str, f64, f64)> {
        let mut rows: Vec<_> = self
            .methods
            .iter()
            .zip(&self.mean_rank)
            .zip(&self.sd_rank)
            .map(|((m, &r), &s)| (m.as_str(), r, s))
            .collect();
        rows.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
        rows
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "method,mean_rank,sd_rank")?;
        for (m, r, s) in self.ordered() {
            writeln!(out, "{m},{r},{s}")?;
        }
        Ok(())
    }
}

/// Ranks (1 = best) of the values in one row, ties sharing the average of
/// their positions.
pub fn rank_row(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Aggregates a problems-by-methods APAE matrix into mean ranks.
pub fn average_ranks(methods: &[String], apae_matrix: &[Vec<f64>]) -> Result<RankTable> {
    if apae_matrix.is_empty() || methods.is_empty() {
        return Err(Error::invalid("rank table of an empty matrix"));
    }
    let z = methods.len();
    let mut all = Vec::with_capacity(apae_matrix.len());
    for (i, row) in apae_matrix.iter().enumerate() {
        if row.len() != z {
            return Err(Error::DimensionMismatch {
                expected: z,
                got: row.len(),
            });
        }
        if row.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid(format!("NaN in problem row {i}")));
        }
        all.push(rank_row(row));
    }
    let n = all.len() as f64;
    let mean_rank: Vec<f64> = (0..z).map(|m| all.iter().map(|r| r[m]).sum::<f64>() / n).collect();
    let sd_rank = (0..z)
        .map(|m| {
            if all.len() < 2 {
                return 0.0;
            }
            let ss: f64 = all.iter().map(|r| (r[m] - mean_rank[m]).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        })
        .collect();
    Ok(RankTable {
        methods: methods.to_vec(),
        mean_rank,
        sd_rank,
        problems: all.len(),
    })
}

/// Groups results into a problems-by-methods APAE matrix. Problems missing
/// any of `methods` are skipped; problem order follows first appearance.
pub fn apae_matrix(results: &[EstimationResult], methods: &[Method]) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut problems: Vec<&str> = Vec::new();
    for r in results {
        if !problems.contains(&r.problem_id.as_str()) {
            problems.push(&r.problem_id);
        }
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for pid in problems {
        let row: Option<Vec<f64>> = methods
            .iter()
            .map(|m| {
                results
                    .iter()
                    .find(|r| r.problem_id == pid && r.method == *m)
                    .map(|r| r.apae)
            })
            .collect();
        if let Some(row) = row {
            ids.push(pid.to_string());
            rows.push(row);
        }
    }
    (ids, rows)
}

/// Per-problem differences fed to the Bayes sign test:
/// `100 * (APAE_method - APAE_baseline) / true_loss`. Problems lacking either
/// method or with a zero true loss are skipped.
pub fn relative_apae_differences(results: &[EstimationResult], method: Method, baseline: Method) -> Vec<f64> {
    let mut out = Vec::new();
    for r in results.iter().filter(|r| r.method == method) {
        if let Some(b) = results
            .iter()
            .find(|b| b.method == baseline && b.problem_id == r.problem_id)
        {
            if r.true_loss > 0.0 {
                out.push(100.0 * (r.apae - b.apae) / r.true_loss);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BayesSignTest {
    pub p_left: f64,
    pub p_rope: f64,
    pub p_right: f64,
    pub counts: [usize; 3],
}

/// Bayes sign test with a region of practical equivalence.
///
/// Differences are counted below, inside and above `[rope_low, rope_high]`;
/// `samples` Dirichlet vectors are drawn with concentration
/// `(left, rope + prior_strength, right)` and each probability is the share
/// of draws where that component is the largest, ties split evenly.
pub fn bayes_sign_test(
    differences: &[f64],
    rope_low: f64,
    rope_high: f64,
    samples: usize,
    prior_strength: f64,
    seed: u64,
) -> Result<BayesSignTest> {
    if differences.is_empty() {
        return Err(Error::invalid("sign test needs at least one difference"));
    }
    if !(rope_low < rope_high) {
        return Err(Error::invalid(format!("rope [{rope_low}, {rope_high}] is empty")));
    }
    if samples == 0 || !(prior_strength >= 0.0) {
        return Err(Error::invalid("samples must be positive and prior strength >= 0"));
    }
    if differences.iter().any(|d| d.is_nan()) {
        return Err(Error::invalid("NaN difference"));
    }
    let mut counts = [0usize; 3];
    for &d in differences {
        let slot = if d < rope_low {
            0
        } else if d > rope_high {
            2
        } else {
            1
        };
        counts[slot] += 1;
    }
    let alpha = [
        counts[0] as f64,
        counts[1] as f64 + prior_strength,
        counts[2] as f64,
    ];
    let gammas: Vec<Option<Gamma<f64>>> = alpha
        .iter()
        .map(|&a| (a > 0.0).then(|| Gamma::new(a, 1.0).expect("positive shape")))
        .collect();
    if gammas.iter().all(Option::is_none) {
        return Err(Error::invalid("all Dirichlet concentrations are zero"));
    }
    let mut rng = rng_from_seed(seed);
    let mut wins = [0.0f64; 3];
    for _ in 0..samples {
        let draw: Vec<f64> = gammas
            .iter()
            .map(|g| g.as_ref().map_or(0.0, |g| rng.sample(g)))
            .collect();
        // normalizing does not change which component is largest
        let max = draw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tied = draw.iter().filter(|&&v| v == max).count() as f64;
        for (w, &v) in wins.iter_mut().zip(&draw) {
            if v == max {
                *w += 1.0 / tied;
            }
        }
    }
    let s = samples as f64;
    Ok(BayesSignTest {
        p_left: wins[0] / s,
        p_rope: wins[1] / s,
        p_right: wins[2] / s,
        counts,
    })
}
