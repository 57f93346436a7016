//! Time-delay embedding and False Nearest Neighbours selection of the
//! embedding dimension.

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Lagged predictor matrix plus next-step targets.
///
/// Row `k` holds `(y[k], ..., y[k+p-1])` with the most recent lag in the last
/// column, and targets `y[k+p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedDataset {
    predictors: Vec<f64>,
    targets: Vec<f64>,
    target_time: Vec<usize>,
    dimension: usize,
}

impl EmbeddedDataset {
    pub fn rows(&self) -> usize {
        self.targets.len()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.predictors[k * self.dimension..(k + 1) * self.dimension]
    }

    /// Row-major predictor cells.
    pub fn predictors(&self) -> &[f64] {
        &self.predictors
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Index in the source series of each row's target.
    pub fn target_time(&self) -> &[usize] {
        &self.target_time
    }

    /// Gathers the given rows into a row-major predictor block and a target
    /// vector.
    pub fn select(&self, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(rows.len() * self.dimension);
        let mut y = Vec::with_capacity(rows.len());
        for &r in rows {
            x.extend_from_slice(self.row(r));
            y.push(self.targets[r]);
        }
        (x, y)
    }
}

pub fn embed(series: &TimeSeries, p: usize) -> Result<EmbeddedDataset> {
    if p == 0 {
        return Err(Error::invalid("embedding dimension must be at least 1"));
    }
    let y = series.values();
    if y.len() <= p {
        return Err(Error::SeriesTooShort {
            needed: p + 1,
            got: y.len(),
        });
    }
    let n = y.len() - p;
    let mut predictors = Vec::with_capacity(n * p);
    for k in 0..n {
        predictors.extend_from_slice(&y[k..k + p]);
    }
    Ok(EmbeddedDataset {
        predictors,
        targets: y[p..].to_vec(),
        target_time: (p..y.len()).collect(),
        dimension: p,
    })
}

/// Kennel et al. thresholds for the two false-neighbour criteria.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FnnConfig {
    pub max_dimension: usize,
    /// Largest acceptable fraction of false neighbours.
    pub tolerance: f64,
    /// Distance-ratio threshold.
    pub ratio_threshold: f64,
    /// Loneliness threshold, in units of the series standard deviation.
    /// `None` drops the criterion; on noisy series it flags a growing share
    /// of neighbours as the dimension rises.
    pub loneliness_threshold: Option<f64>,
}

impl Default for FnnConfig {
    fn default() -> Self {
        Self {
            max_dimension: 30,
            tolerance: 0.01,
            ratio_threshold: 10.0,
            loneliness_threshold: Some(2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnnOutcome {
    pub dimension: usize,
    /// False-neighbour fraction for every dimension examined, starting at 1.
    pub fractions: Vec<f64>,
    /// False when no dimension up to the maximum met the tolerance.
    pub reached_tolerance: bool,
}

/// Smallest dimension whose false-neighbour fraction is within tolerance.
pub fn estimate_embedding_dimension(series: &TimeSeries, config: &FnnConfig) -> Result<FnnOutcome> {
    let d_max = config.max_dimension;
    if d_max == 0 {
        return Err(Error::invalid("max_dimension must be at least 1"));
    }
    if !(config.tolerance > 0.0 && config.tolerance < 1.0) {
        return Err(Error::invalid(format!(
            "tolerance {} not in (0, 1)",
            config.tolerance
        )));
    }
    let y = series.values();
    if y.len() <= d_max + 1 {
        return Err(Error::SeriesTooShort {
            needed: d_max + 2,
            got: y.len(),
        });
    }
    let spread = std_dev(y);
    let mut fractions = Vec::new();
    for d in 1..=d_max {
        let f = false_neighbour_fraction(y, d, spread, config);
        fractions.push(f);
        if f <= config.tolerance {
            return Ok(FnnOutcome {
                dimension: d,
                fractions,
                reached_tolerance: true,
            });
        }
    }
    warn!(
        "series={} fnn did not reach tolerance {} up to dimension {}",
        series.name(),
        config.tolerance,
        d_max
    );
    Ok(FnnOutcome {
        dimension: d_max,
        fractions,
        reached_tolerance: false,
    })
}

fn false_neighbour_fraction(y: &[f64], d: usize, spread: f64, config: &FnnConfig) -> f64 {
    // points that still have a (d+1)-th coordinate
    let count = y.len() - d;
    // distances at rounding level count as zero
    let tiny = (1e-9 * spread).powi(2);
    let false_count: usize = (0..count)
        .into_par_iter()
        .map(|i| {
            let (nn, dist2) = nearest_neighbour(y, d, count, i);
            if dist2 <= tiny {
                return 0;
            }
            let dist = dist2.sqrt();
            let extra = (y[i + d] - y[nn + d]).abs();
            let ratio_false = extra / dist > config.ratio_threshold;
            let lonely = config
                .loneliness_threshold
                .is_some_and(|a| (dist2 + extra * extra).sqrt() / spread > a);
            usize::from(ratio_false || lonely)
        })
        .sum();
    false_count as f64 / count as f64
}

/// Nearest point to `i` among the first `count` delay vectors of dimension
/// `d`, excluding `i`. Ties go to the lowest index.
fn nearest_neighbour(y: &[f64], d: usize, count: usize, i: usize) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for j in 0..count {
        if j == i {
            continue;
        }
        let mut s = 0.0;
        for l in 0..d {
            let diff = y[i + l] - y[j + l];
            s += diff * diff;
            if s >= best.1 {
                break;
            }
        }
        if s < best.1 {
            best = (j, s);
        }
    }
    best
}

fn std_dev(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}
