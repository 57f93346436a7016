//! Regression learners behind one fit/predict contract.
//!
//! Predictor blocks are row-major `&[f64]` slices with a separate column
//! count, the layout produced by [`crate::EmbeddedDataset::select`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Lasso,
    Knn,
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lasso" => Ok(LearnerKind::Lasso),
            "knn" => Ok(LearnerKind::Knn),
            other => Err(Error::Config(format!("unknown learner {other:?}"))),
        }
    }
}

/// How the lasso penalty is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Penalty {
    /// Absolute penalty on the standardized problem.
    Fixed(f64),
    /// Fraction of the smallest penalty that zeroes every coefficient,
    /// computed from the training data at fit time.
    FractionOfMax(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub penalty: Penalty,
    pub neighbours: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LearnerSpec {
    fn default() -> Self {
        Self::lasso(Penalty::FractionOfMax(0.01))
    }
}

impl LearnerSpec {
    pub fn lasso(penalty: Penalty) -> Self {
        Self {
            kind: LearnerKind::Lasso,
            penalty,
            neighbours: 5,
            max_iter: 10_000,
            tol: 1e-9,
        }
    }

    pub fn knn(neighbours: usize) -> Self {
        Self {
            kind: LearnerKind::Knn,
            neighbours,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.penalty {
            Penalty::Fixed(l) | Penalty::FractionOfMax(l) if !(l >= 0.0 && l.is_finite()) => {
                return Err(Error::invalid(format!("penalty {l} must be a finite value >= 0")))
            }
            _ => {}
        }
        if self.neighbours == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Lasso(LassoModel),
    Knn(KnnModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoModel {
    /// Coefficients in the units of the raw predictors.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub means: Vec<f64>,
    /// Column standard deviations; zero marks a constant column.
    pub scales: Vec<f64>,
    pub lambda: f64,
    pub lambda_max: f64,
    pub sweeps: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    rows: Vec<f64>,
    targets: Vec<f64>,
    cols: usize,
    k: usize,
}

impl FittedModel {
    pub fn columns(&self) -> usize {
        match self {
            FittedModel::Lasso(m) => m.coefficients.len(),
            FittedModel::Knn(m) => m.cols,
        }
    }
}

fn check_block(x: &[f64], cols: usize, y: &[f64]) -> Result<usize> {
    if cols == 0 {
        return Err(Error::invalid("predictor block has no columns"));
    }
    if x.len() != y.len() * cols {
        return Err(Error::DimensionMismatch {
            expected: y.len() * cols,
            got: x.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::EmptyTrainingSet { iteration: 0 });
    }
    if let Some(index) = x.iter().chain(y).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(y.len())
}

pub fn fit(spec: &LearnerSpec, x: &[f64], cols: usize, y: &[f64]) -> Result<FittedModel> {
    spec.validate()?;
    check_block(x, cols, y)?;
    match spec.kind {
        LearnerKind::Lasso => Ok(FittedModel::Lasso(fit_lasso(spec, x, cols, y))),
        LearnerKind::Knn => {
            if y.len() < spec.neighbours {
                return Err(Error::invalid(format!(
                    "knn needs at least {} training rows, got {}",
                    spec.neighbours,
                    y.len()
                )));
            }
            Ok(FittedModel::Knn(KnnModel {
                rows: x.to_vec(),
                targets: y.to_vec(),
                cols,
                k: spec.neighbours,
            }))
        }
    }
}

pub fn predict(model: &FittedModel, x: &[f64], cols: usize) -> Result<Vec<f64>> {
    if cols != model.columns() {
        return Err(Error::DimensionMismatch {
            expected: model.columns(),
            got: cols,
        });
    }
    if !x.len().is_multiple_of(cols) {
        return Err(Error::invalid("predictor block is not a whole number of rows"));
    }
    Ok(match model {
        FittedModel::Lasso(m) => x
            .chunks_exact(cols)
            .map(|row| {
                m.intercept
                    + row
                        .iter()
                        .zip(&m.coefficients)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            })
            .collect(),
        FittedModel::Knn(m) => x.chunks_exact(cols).map(|row| m.predict_row(row)).collect(),
    })
}

impl KnnModel {
    fn predict_row(&self, query: &[f64]) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .chunks_exact(self.cols)
            .enumerate()
            .map(|(i, r)| {
                let d = r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                (d, i)
            })
            .collect();
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by_distance);
        }
        dist[..self.k].iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / self.k as f64
    }
}

/// Column-major standardized copy of the predictors.
struct Standardized {
    columns: Vec<Vec<f64>>,
    means: Vec<f64>,
    scales: Vec<f64>,
    centered_y: Vec<f64>,
    y_mean: f64,
}

fn standardize(x: &[f64], cols: usize, y: &[f64]) -> Standardized {
    let n = y.len();
    let nf = n as f64;
    let mut columns = vec![Vec::with_capacity(n); cols];
    for row in x.chunks_exact(cols) {
        for (c, v) in columns.iter_mut().zip(row) {
            c.push(*v);
        }
    }
    let mut means = Vec::with_capacity(cols);
    let mut scales = Vec::with_capacity(cols);
    for c in &mut columns {
        let mean = c.iter().sum::<f64>() / nf;
        let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf).sqrt();
        // constant up to rounding
        let scale = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 0.0 };
        for v in c.iter_mut() {
            *v = if scale > 0.0 { (*v - mean) / scale } else { 0.0 };
        }
        means.push(mean);
        scales.push(scale);
    }
    let y_mean = y.iter().sum::<f64>() / nf;
    Standardized {
        columns,
        means,
        scales,
        centered_y: y.iter().map(|v| v - y_mean).collect(),
        y_mean,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Largest KKT violation of standardized coefficients `beta` given the
/// residual `resid`.
fn kkt_violation(s: &Standardized, beta: &[f64], resid: &[f64], lambda: f64) -> f64 {
    let n = resid.len() as f64;
    s.columns
        .iter()
        .zip(beta)
        .zip(&s.scales)
        .filter(|(_, &scale)| scale > 0.0)
        .map(|((col, &b), _)| {
            let g = dot(col, resid) / n;
            if b != 0.0 {
                (g - lambda * b.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Penalty above which every standardized coefficient is zero.
pub fn lambda_max(x: &[f64], cols: usize, y: &[f64]) -> f64 {
    let s = standardize(x, cols, y);
    let n = y.len() as f64;
    s.columns
        .iter()
        .map(|c| dot(c, &s.centered_y).abs() / n)
        .fold(0.0, f64::max)
}

/// Cyclic coordinate descent on `(1/2n)||y - Xb||^2 + lambda ||b||_1` over
/// standardized predictors and a centered response.
fn fit_lasso(spec: &LearnerSpec, x: &[f64], cols: usize, y: &[f64]) -> LassoModel {
    let s = standardize(x, cols, y);
    let n = y.len() as f64;
    let lambda_max = s
        .columns
        .iter()
        .map(|c| dot(c, &s.centered_y).abs() / n)
        .fold(0.0, f64::max);
    let lambda = match spec.penalty {
        Penalty::Fixed(l) => l,
        Penalty::FractionOfMax(f) => f * lambda_max,
    };

    let mut beta = vec![0.0; cols];
    let mut resid = s.centered_y.clone();
    let mut sweeps = 0;
    let mut converged = s.scales.iter().all(|&sc| sc == 0.0);
    while !converged && sweeps < spec.max_iter {
        sweeps += 1;
        let mut max_delta = 0.0f64;
        for j in 0..cols {
            if s.scales[j] == 0.0 {
                continue;
            }
            let col = &s.columns[j];
            let rho = beta[j] + dot(col, &resid) / n;
            let updated = soft_threshold(rho, lambda);
            let delta = updated - beta[j];
            if delta != 0.0 {
                for (r, c) in resid.iter_mut().zip(col) {
                    *r -= delta * c;
                }
                beta[j] = updated;
                max_delta = max_delta.max(delta.abs());
            }
        }
        converged = max_delta < spec.tol && kkt_violation(&s, &beta, &resid, lambda) <= spec.tol;
    }

    let coefficients: Vec<f64> = beta
        .iter()
        .zip(&s.scales)
        .map(|(b, &sc)| if sc > 0.0 { b / sc } else { 0.0 })
        .collect();
    let intercept = s.y_mean - dot(&coefficients, &s.means);
    LassoModel {
        coefficients,
        intercept,
        means: s.means,
        scales: s.scales,
        lambda,
        lambda_max,
        sweeps,
        converged,
    }
}

impl LassoModel {
    /// Largest KKT violation of this fit on the given training data,
    /// measured on the standardized problem.
    pub fn kkt_residual(&self, x: &[f64], cols: usize, y: &[f64]) -> f64 {
        let s = standardize(x, cols, y);
        let beta: Vec<f64> = self
            .coefficients
            .iter()
            .zip(&s.scales)
            .map(|(b, sc)| b * sc)
            .collect();
        let resid: Vec<f64> = s
            .centered_y
            .iter()
            .enumerate()
            .map(|(i, yc)| {
                yc - s
                    .columns
                    .iter()
                    .zip(&beta)
                    .map(|(c, b)| c[i] * b)
                    .sum::<f64>()
            })
            .collect();
        kkt_violation(&s, &beta, &resid, self.lambda)
    }

    /// Penalized objective on the standardized problem.
    pub fn objective(&self, x: &[f64], cols: usize, y: &[f64]) -> f64 {
        let s = standardize(x, cols, y);
        let n = y.len() as f64;
        let beta: Vec<f64> = self.coefficients.iter().zip(&s.scales).map(|(b, sc)| b * sc).collect();
        let rss: f64 = (0..y.len())
            .map(|i| {
                let fitted: f64 = s.columns.iter().zip(&beta).map(|(c, b)| c[i] * b).sum();
                (s.centered_y[i] - fitted).powi(2)
            })
            .sum();
        rss / (2.0 * n) + self.lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }
}
