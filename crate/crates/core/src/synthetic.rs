//! Synthetic data-generating processes and the Monte Carlo driver.
//!
//! * S1: stable AR(3) whose characteristic roots are drawn at random.
//! * S2: invertible MA(1) whose root is drawn the same way.
//! * S3: seasonal AR with one seasonal lag at period 12, fitted to the
//!   bundled monthly accidental-deaths series.
//!
//! Every output is shifted so that its minimum is exactly 1.

use std::f64::consts::TAU;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, trial_seed, Rng};
use crate::series::TimeSeries;

/// Intercept of the default S3 process, from a least-squares fit of
/// `y[t] = c + phi * y[t-12]` to the bundled accidental-deaths series.
pub const S3_INTERCEPT: f64 = 2006.858908595285;
/// Seasonal coefficient of the default S3 process (same fit).
pub const S3_SEASONAL: f64 = 0.7522454193707956;

/// Monthly US accidental deaths, 1973-1978.
pub const US_ACCIDENTAL_DEATHS_CSV: &str = include_str!("../data/us_accidental_deaths.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DgpKind {
    S1,
    S2,
    S3,
}

impl std::str::FromStr for DgpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s1" => Ok(DgpKind::S1),
            "s2" => Ok(DgpKind::S2),
            "s3" => Ok(DgpKind::S3),
            other => Err(Error::Config(format!("unknown process {other:?}"))),
        }
    }
}

impl std::fmt::Display for DgpKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DgpKind::S1 => "s1",
            DgpKind::S2 => "s2",
            DgpKind::S3 => "s3",
        })
    }
}

/// Seasonal AR parameters:
/// `y[t] = c + sum_k seasonal[k] * y[t - (k+1)*period] + sum_i ar[i] * y[t-1-i] + e[t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalAr {
    pub intercept: f64,
    pub period: usize,
    pub seasonal: Vec<f64>,
    pub ar: Vec<f64>,
}

impl Default for SeasonalAr {
    fn default() -> Self {
        Self {
            intercept: S3_INTERCEPT,
            period: 12,
            seasonal: vec![S3_SEASONAL],
            ar: Vec::new(),
        }
    }
}

impl SeasonalAr {
    /// Full lag polynomial `phi_1..phi_q` of the process.
    pub fn lag_coefficients(&self) -> Vec<f64> {
        let q = self.ar.len().max(self.seasonal.len() * self.period);
        let mut phi = vec![0.0; q];
        phi[..self.ar.len()].copy_from_slice(&self.ar);
        for (k, s) in self.seasonal.iter().enumerate() {
            phi[(k + 1) * self.period - 1] += s;
        }
        phi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    /// Upper bound on the modulus of sampled roots.
    pub root_bound: f64,
    pub length: usize,
    pub burn_in: usize,
    pub innovation_sd: f64,
    pub s3: SeasonalAr,
}

impl DgpSpec {
    pub fn new(kind: DgpKind) -> Self {
        Self {
            kind,
            root_bound: 5.0,
            length: 200,
            burn_in: 200,
            innovation_sd: 1.0,
            s3: SeasonalAr::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.root_bound > 1.1) {
            return Err(Error::invalid(format!("root bound {} must exceed 1.1", self.root_bound)));
        }
        if self.length < 20 {
            return Err(Error::invalid(format!("length {} below 20", self.length)));
        }
        if !(self.innovation_sd > 0.0 && self.innovation_sd.is_finite()) {
            return Err(Error::invalid("innovation sd must be positive"));
        }
        Ok(())
    }
}

/// A generated series together with the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub series: TimeSeries,
    /// AR lag coefficients (S1, S3).
    pub ar: Vec<f64>,
    /// Sampled characteristic roots (S1, S2).
    pub roots: Vec<f64>,
    /// MA(1) coefficient (S2).
    pub ma: Option<f64>,
}

/// Draws `count` roots uniformly from `[-r, -1.1] U [1.1, r]`.
pub fn sample_roots(count: usize, r: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("root count must be at least 1"));
    }
    if !(r > 1.1) {
        return Err(Error::invalid(format!("root bound {r} must exceed 1.1")));
    }
    // both intervals have the same length, so the sign is a fair coin
    Ok((0..count)
        .map(|_| {
            let magnitude = rng.random_range(1.1..=r);
            if rng.random::<bool>() {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect())
}

/// Expands `prod (1 - z / root)` and returns `phi` such that the product
/// equals `1 - phi_1 z - ... - phi_q z^q`.
pub fn roots_to_ar_coefficients(roots: &[f64]) -> Result<Vec<f64>> {
    if let Some(r) = roots.iter().find(|r| !(r.abs() > 1.0)) {
        return Err(Error::Unstable(format!("root {r} inside the unit circle")));
    }
    let mut poly = vec![1.0];
    for &root in roots {
        let mut next = vec![0.0; poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c / root;
        }
        poly = next;
    }
    Ok(poly[1..].iter().map(|c| -c).collect())
}

/// Moduli of the roots of `1 - phi_1 z - ... - phi_q z^q`. Trailing zero
/// coefficients lower the degree and show up as infinite moduli.
pub fn characteristic_root_moduli(phi: &[f64]) -> Vec<f64> {
    let degree = phi.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1);
    // inverse roots solve w^d - phi_1 w^(d-1) - ... - phi_d = 0
    let monic: Vec<f64> = phi[..degree].iter().map(|c| -c).collect();
    let mut moduli: Vec<f64> = aberth_roots(&monic).iter().map(|w| 1.0 / w.norm()).collect();
    moduli.resize(phi.len(), f64::INFINITY);
    moduli
}

/// Roots of `w^d + c_1 w^(d-1) + ... + c_d` by Aberth-Ehrlich iteration.
fn aberth_roots(c: &[f64]) -> Vec<Complex<f64>> {
    let d = c.len();
    if d == 0 {
        return Vec::new();
    }
    let eval = |w: Complex<f64>| {
        let mut p = Complex::new(1.0, 0.0);
        let mut dp = Complex::new(0.0, 0.0);
        for &ci in c {
            dp = dp * w + p;
            p = p * w + ci;
        }
        (p, dp)
    };
    let radius = c
        .iter()
        .enumerate()
        .map(|(i, ci)| ci.abs().powf(1.0 / (i + 1) as f64))
        .fold(0.0, f64::max)
        .max(1e-3);
    let mut w: Vec<Complex<f64>> = (0..d)
        .map(|k| Complex::from_polar(radius, TAU * k as f64 / d as f64 + 0.4))
        .collect();
    for _ in 0..1000 {
        let mut largest = 0.0f64;
        for k in 0..d {
            let (p, dp) = eval(w[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex<f64> = (0..d).filter(|&j| j != k).map(|j| (w[k] - w[j]).inv()).sum();
            let step = ratio / (Complex::new(1.0, 0.0) - ratio * repulsion);
            w[k] -= step;
            largest = largest.max(step.norm() / (1.0 + w[k].norm()));
        }
        if largest < 1e-15 {
            break;
        }
    }
    w
}

pub fn positivize(series: &TimeSeries) -> TimeSeries {
    let min = series.values().iter().copied().fold(f64::INFINITY, f64::min);
    let values = series.values().iter().map(|v| v - min + 1.0).collect();
    TimeSeries::new(series.name(), values).expect("shift of a finite series stays finite")
}

fn positive_from(name: &str, raw: &[f64]) -> Result<TimeSeries> {
    Ok(positivize(&TimeSeries::new(name, raw.to_vec())?))
}

fn innovations(count: usize, sd: f64, rng: &mut Rng) -> Vec<f64> {
    (0..count)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Runs `y[t] = c + sum phi_i y[t-i] + e[t]` from a start at the process
/// mean and returns the last `length` values.
fn run_ar(c: f64, phi: &[f64], length: usize, burn_in: usize, sd: f64, rng: &mut Rng) -> Vec<f64> {
    let q = phi.len();
    let denom = 1.0 - phi.iter().sum::<f64>();
    let start = if denom.abs() > 1e-12 { c / denom } else { 0.0 };
    let total = burn_in + length;
    let eps = innovations(total, sd, rng);
    let mut y = vec![start; q];
    y.reserve(total);
    for e in eps {
        let t = y.len();
        let ar: f64 = phi.iter().enumerate().map(|(i, p)| p * y[t - 1 - i]).sum();
        y.push(c + ar + e);
    }
    y.split_off(q + burn_in)
}

pub fn simulate(spec: &DgpSpec, rng: &mut Rng) -> Result<Simulated> {
    spec.validate()?;
    let name = spec.kind.to_string();
    match spec.kind {
        DgpKind::S1 => {
            let roots = sample_roots(3, spec.root_bound, rng)?;
            let phi = roots_to_ar_coefficients(&roots)?;
            let raw = run_ar(0.0, &phi, spec.length, spec.burn_in, spec.innovation_sd, rng);
            Ok(Simulated {
                series: positive_from(&name, &raw)?,
                ar: phi,
                roots,
                ma: None,
            })
        }
        DgpKind::S2 => {
            let roots = sample_roots(1, spec.root_bound, rng)?;
            let theta = -1.0 / roots[0];
            let raw = run_ma1(theta, spec, rng);
            Ok(Simulated {
                series: positive_from(&name, &raw)?,
                ar: Vec::new(),
                roots,
                ma: Some(theta),
            })
        }
        DgpKind::S3 => {
            let phi = spec.s3.lag_coefficients();
            if let Some(m) = characteristic_root_moduli(&phi)
                .into_iter()
                .find(|m| !(*m > 1.0))
            {
                return Err(Error::Unstable(format!(
                    "seasonal AR coefficients have a root of modulus {m}"
                )));
            }
            let raw = run_ar(
                spec.s3.intercept,
                &phi,
                spec.length,
                spec.burn_in,
                spec.innovation_sd,
                rng,
            );
            Ok(Simulated {
                series: positive_from(&name, &raw)?,
                ar: phi,
                roots: Vec::new(),
                ma: None,
            })
        }
    }
}

fn run_ma1(theta: f64, spec: &DgpSpec, rng: &mut Rng) -> Vec<f64> {
    let eps = innovations(spec.burn_in + spec.length + 1, spec.innovation_sd, rng);
    eps.windows(2)
        .skip(spec.burn_in)
        .map(|w| w[1] + theta * w[0])
        .collect()
}

fn simulate_kind(kind: DgpKind, spec: &DgpSpec, rng: &mut Rng) -> Result<TimeSeries> {
    if spec.kind != kind {
        return Err(Error::invalid(format!("spec is for {}, not {kind}", spec.kind)));
    }
    Ok(simulate(spec, rng)?.series)
}

/// Stable AR(3).
pub fn simulate_s1(spec: &DgpSpec, rng: &mut Rng) -> Result<TimeSeries> {
    simulate_kind(DgpKind::S1, spec, rng)
}

/// Invertible MA(1).
pub fn simulate_s2(spec: &DgpSpec, rng: &mut Rng) -> Result<TimeSeries> {
    simulate_kind(DgpKind::S2, spec, rng)
}

/// Seasonal AR, period 12.
pub fn simulate_s3(spec: &DgpSpec, rng: &mut Rng) -> Result<TimeSeries> {
    simulate_kind(DgpKind::S3, spec, rng)
}

/// Trial `i` draws from a generator seeded with `base_seed ^ i`.
pub fn monte_carlo(
    spec: &DgpSpec,
    trials: usize,
    base_seed: u64,
) -> impl Iterator<Item = Result<Simulated>> + '_ {
    (0..trials).map(move |i| simulate_trial(spec, i, base_seed))
}

pub fn simulate_trial(spec: &DgpSpec, trial: usize, base_seed: u64) -> Result<Simulated> {
    let mut rng = rng_from_seed(trial_seed(base_seed, trial as u64));
    let mut sim = simulate(spec, &mut rng)?;
    sim.series = sim.series.renamed(format!("{}-{trial:04}", spec.kind));
    Ok(sim)
}

/// Least-squares seasonal AR fit: `y[t]` on an intercept and
/// `y[t - k*period]` for `k = 1..=seasonal_order`.
pub fn fit_seasonal_ar(series: &TimeSeries, period: usize, seasonal_order: usize) -> Result<SeasonalAr> {
    if period == 0 || seasonal_order == 0 {
        return Err(Error::invalid("period and seasonal order must be positive"));
    }
    let y = series.values();
    let max_lag = period * seasonal_order;
    if y.len() <= max_lag + 1 {
        return Err(Error::SeriesTooShort {
            needed: max_lag + 2,
            got: y.len(),
        });
    }
    let rows = y.len() - max_lag;
    let cols = seasonal_order + 1;
    let design = DMatrix::from_fn(rows, cols, |r, c| {
        if c == 0 {
            1.0
        } else {
            y[r + max_lag - c * period]
        }
    });
    let target = DVector::from_column_slice(&y[max_lag..]);
    let gram = design.transpose() * &design;
    let rhs = design.transpose() * target;
    let scale = gram.diagonal().max();
    let chol = gram.cholesky().ok_or(Error::SingularDesign)?;
    // a rank-deficient design can still factor once rounding makes it positive
    if chol.l().diagonal().iter().any(|d| d * d <= 1e-12 * scale) {
        return Err(Error::SingularDesign);
    }
    let beta = chol.solve(&rhs);
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::SingularDesign);
    }
    Ok(SeasonalAr {
        intercept: beta[0],
        period,
        seasonal: beta.iter().skip(1).copied().collect(),
        ar: Vec::new(),
    })
}

/// The bundled reference series.
pub fn us_accidental_deaths() -> TimeSeries {
    let values = US_ACCIDENTAL_DEATHS_CSV
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(1))
        .map(|v| v.trim().parse::<f64>().expect("bundled data is numeric"))
        .collect();
    TimeSeries::new("us-accidental-deaths", values).expect("bundled data is valid")
}
