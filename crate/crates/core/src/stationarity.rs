//! Stationarity diagnostics: the KPSS statistic, KPSS-driven differencing
//! order, and a Haar wavelet-spectrum test of second-order stationarity.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::series::{difference, TimeSeries};

/// 5% critical value of the level-stationarity KPSS statistic.
pub const KPSS_LEVEL_CRITICAL_5: f64 = 0.463;
/// 5% critical value of the trend-stationarity KPSS statistic.
pub const KPSS_TREND_CRITICAL_5: f64 = 0.146;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KpssNull {
    Level,
    Trend,
}

impl KpssNull {
    pub fn critical_value_5(self) -> f64 {
        match self {
            KpssNull::Level => KPSS_LEVEL_CRITICAL_5,
            KpssNull::Trend => KPSS_TREND_CRITICAL_5,
        }
    }
}

/// Bartlett bandwidth `floor(4 (n/100)^(1/4))`.
pub fn kpss_bandwidth(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// KPSS statistic: squared partial sums of the detrended series over a
/// Bartlett long-run variance. Zero when the residuals vanish.
pub fn kpss_statistic(series: &TimeSeries, null: KpssNull) -> Result<f64> {
    let y = series.values();
    let n = y.len();
    if n < 10 {
        return Err(Error::SeriesTooShort { needed: 10, got: n });
    }
    let resid = detrend(y, null);
    let nf = n as f64;
    let rss: f64 = resid.iter().map(|e| e * e).sum();
    let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if rss <= nf * (1e-10 * scale).powi(2) {
        return Ok(0.0);
    }
    let lags = kpss_bandwidth(n);
    let mut lrv = rss;
    for s in 1..=lags.min(n - 1) {
        let w = 1.0 - s as f64 / (lags as f64 + 1.0);
        let gamma: f64 = resid[s..].iter().zip(&resid).map(|(a, b)| a * b).sum();
        lrv += 2.0 * w * gamma;
    }
    lrv /= nf;
    if lrv <= 0.0 {
        return Ok(0.0);
    }
    let mut partial = 0.0;
    let mut sum_sq = 0.0;
    for e in &resid {
        partial += e;
        sum_sq += partial * partial;
    }
    Ok(sum_sq / (nf * nf * lrv))
}

fn detrend(y: &[f64], null: KpssNull) -> Vec<f64> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    match null {
        KpssNull::Level => y.iter().map(|v| v - mean).collect(),
        KpssNull::Trend => {
            let t_mean = (n - 1.0) / 2.0;
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for (t, v) in y.iter().enumerate() {
                let dt = t as f64 - t_mean;
                sxy += dt * (v - mean);
                sxx += dt * dt;
            }
            let slope = sxy / sxx;
            y.iter()
                .enumerate()
                .map(|(t, v)| v - mean - slope * (t as f64 - t_mean))
                .collect()
        }
    }
}

/// Whether the KPSS test rejects stationarity at the 5% level.
pub fn kpss_rejects(series: &TimeSeries, null: KpssNull) -> Result<bool> {
    Ok(kpss_statistic(series, null)? > null.critical_value_5())
}

/// Smallest `d <= max_d` after which the trend KPSS test no longer rejects
/// at 5%; `max_d` if it always rejects.
pub fn ndiffs(series: &TimeSeries, max_d: usize) -> Result<usize> {
    if max_d > 2 {
        return Err(Error::invalid(format!("max_d {max_d} above 2")));
    }
    if series.len() < 10 + max_d {
        return Err(Error::SeriesTooShort {
            needed: 10 + max_d,
            got: series.len(),
        });
    }
    for d in 0..max_d {
        if !kpss_rejects(&difference(series, d)?, KpssNull::Trend)? {
            return Ok(d);
        }
    }
    Ok(max_d)
}

/// Multiple-testing correction over all wavelet coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Correction {
    #[default]
    Bonferroni,
    /// Benjamini-Hochberg false discovery rate.
    FalseDiscoveryRate,
}

impl std::str::FromStr for Correction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bonferroni" => Ok(Correction::Bonferroni),
            "fdr" => Ok(Correction::FalseDiscoveryRate),
            other => Err(Error::Config(format!("unknown correction {other:?}"))),
        }
    }
}

/// A Haar coefficient of the smoothed periodogram found significant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rejection {
    /// Periodogram level `j` (the wavelet at this level spans `2^j` points).
    pub level: usize,
    /// Haar scale `r` of the tested coefficient (spans `2^r` points).
    pub scale: usize,
    /// Index of the coefficient within its scale.
    pub position: usize,
    /// Index in the original series where the coefficient's support starts.
    pub time: usize,
    pub z: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveletTest {
    pub stationary: bool,
    pub rejections: Vec<Rejection>,
    pub tests: usize,
}

/// Tests second-order stationarity from the Haar coefficients of a smoothed
/// non-decimated Haar periodogram.
///
/// Steps: keep the last `2^J` observations; at each level `j = 1..=J-3`
/// compute the non-decimated Haar coefficients (periodic boundary) and
/// square them; smooth with a circular running mean of width
/// `W = 2^ceil(J/2)`; take decimated Haar coefficients of the smoothed
/// sequence at every dyadic scale from `W` up to `2^J`; test each one
/// two-sided with the chosen correction.
///
/// The raw periodogram is not bias-corrected. Scales finer than `W` are not
/// tested: there a coefficient reduces to a difference of two raw ordinates.
/// Under a Gaussian stationary null `Cov(I_a, I_b) = 2 Cov(d_a, d_b)^2`, so
/// the null variance of each coefficient is a quadratic form in the sample
/// covariance of the details. A coefficient is a difference of two positive
/// sums of squared Gaussians; each sum is matched to a Gamma law by its first
/// two moments and tail probabilities come from the saddlepoint
/// approximation to the difference of two such Gammas.
pub fn wavelet_stationarity_test(
    series: &TimeSeries,
    alpha: f64,
    correction: Correction,
) -> Result<WaveletTest> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::invalid(format!("alpha {alpha} not in (0, 0.5)")));
    }
    let full = series.values();
    if full.len() < 64 {
        return Err(Error::SeriesTooShort {
            needed: 64,
            got: full.len(),
        });
    }
    let big_j = usize::BITS as usize - 1 - full.len().leading_zeros() as usize;
    let n = 1usize << big_j;
    let offset = full.len() - n;
    let x = &full[offset..];
    let window_log = big_j.div_ceil(2);
    let window = 1usize << window_log;

    let mut candidates = Vec::new();
    for level in 1..=big_j - 3 {
        let details = haar_details(x, level);
        let periodogram: Vec<f64> = details.iter().map(|d| d * d).collect();
        let smoothed = running_mean(&periodogram, window);
        let mean_ordinate = periodogram.iter().sum::<f64>() / n as f64;
        let lag_cov = periodogram_covariance(&details, 1 << (level + 1));
        for scale in window_log..=big_j {
            let width = 1usize << scale;
            let half = width / 2;
            let norm = (width as f64).sqrt();
            let weights = coefficient_weights(n, width, window);
            let var = circular_quadratic(&weights, &lag_cov);
            let positive: Vec<f64> = weights.iter().map(|w| w.max(0.0)).collect();
            let pos_mean = mean_ordinate * positive.iter().sum::<f64>();
            let pos_var = circular_quadratic(&positive, &lag_cov);
            // Gamma shape of each half; scale fixed by the total variance
            let shape = pos_mean * pos_mean / pos_var;
            let theta = (var / (2.0 * shape)).sqrt();
            for (position, block) in smoothed.chunks_exact(width).enumerate() {
                let c = (block[..half].iter().sum::<f64>() - block[half..].iter().sum::<f64>()) / norm;
                let (z, p_value) = if var > 0.0 && pos_var > 0.0 {
                    let z = c / var.sqrt();
                    (z, two_sided_p(c.abs(), z.abs(), shape, theta))
                } else {
                    (0.0, 1.0)
                };
                candidates.push(Rejection {
                    level,
                    scale,
                    position,
                    time: offset + position * width,
                    z,
                    p_value,
                });
            }
        }
    }

    let tests = candidates.len();
    let threshold = match correction {
        Correction::Bonferroni => alpha / tests as f64,
        Correction::FalseDiscoveryRate => {
            let mut p: Vec<f64> = candidates.iter().map(|c| c.p_value).collect();
            p.sort_by(f64::total_cmp);
            p.iter()
                .enumerate()
                .filter(|(i, &pv)| pv <= alpha * (i + 1) as f64 / tests as f64)
                .map(|(_, &pv)| pv)
                .fold(0.0, f64::max)
        }
    };
    let rejections: Vec<Rejection> = candidates
        .into_iter()
        .filter(|c| match correction {
            Correction::Bonferroni => c.p_value < threshold,
            Correction::FalseDiscoveryRate => c.p_value <= threshold && threshold > 0.0,
        })
        .collect();
    Ok(WaveletTest {
        stationary: rejections.is_empty(),
        rejections,
        tests,
    })
}

/// Non-decimated Haar details at `level` with periodic boundary:
/// `(sum of first half - sum of second half) / sqrt(2^level)`.
fn haar_details(x: &[f64], level: usize) -> Vec<f64> {
    let n = x.len();
    let width = 1usize << level;
    let half = width / 2;
    let norm = (width as f64).sqrt();
    let mut prefix = Vec::with_capacity(n + width + 1);
    prefix.push(0.0);
    for i in 0..n + width {
        prefix.push(prefix[i] + x[i % n]);
    }
    (0..n)
        .map(|k| {
            let a = prefix[k + half] - prefix[k];
            let b = prefix[k + width] - prefix[k + half];
            (a - b) / norm
        })
        .collect()
}

/// Circular running mean: entry `k` averages `v[k..k + window]` (wrapping).
fn running_mean(v: &[f64], window: usize) -> Vec<f64> {
    let n = v.len();
    let w = window as f64;
    let mut acc: f64 = (0..window).map(|i| v[i % n]).sum();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        out.push(acc / w);
        acc += v[(k + window) % n] - v[k];
    }
    out
}

/// `Cov(I_k, I_{k+tau}) = 2 Cov(d_k, d_{k+tau})^2` for `tau = 0..=max_lag`,
/// circular sample covariances.
fn periodogram_covariance(details: &[f64], max_lag: usize) -> Vec<f64> {
    let n = details.len();
    (0..=max_lag.min(n / 2 - 1))
        .map(|tau| {
            let c = (0..n).map(|k| details[k] * details[(k + tau) % n]).sum::<f64>() / n as f64;
            2.0 * c * c
        })
        .collect()
}

/// Weights on the raw periodogram of the Haar coefficient at position 0 of
/// width `width`, taken over the running mean of width `window`.
fn coefficient_weights(n: usize, width: usize, window: usize) -> Vec<f64> {
    let half = width / 2;
    let norm = (width as f64).sqrt() * window as f64;
    let mut weights = vec![0.0; n];
    for m in 0..width {
        let sign = if m < half { 1.0 } else { -1.0 };
        for i in m..m + window {
            weights[i % n] += sign / norm;
        }
    }
    weights
}

/// `sum_a sum_b w_a w_b c_|a-b|` with circular lags, `c` zero past its end.
fn circular_quadratic(weights: &[f64], lag_cov: &[f64]) -> f64 {
    let n = weights.len();
    let mut total = 0.0;
    for (a, &wa) in weights.iter().enumerate() {
        if wa == 0.0 {
            continue;
        }
        let mut row = wa * lag_cov[0];
        for (tau, c) in lag_cov.iter().enumerate().skip(1) {
            row += 2.0 * weights[(a + tau) % n] * c;
        }
        total += wa * row;
    }
    total
}

/// Two-sided p-value of `|c|` under the difference of two independent
/// Gamma(`shape`, `theta`) variables. Near the centre the normal
/// approximation is used; it agrees there and the saddlepoint formula is
/// numerically unstable.
fn two_sided_p(c: f64, z: f64, shape: f64, theta: f64) -> f64 {
    if z < 1.0 || !shape.is_finite() || shape <= 0.0 {
        return erfc(z / std::f64::consts::SQRT_2);
    }
    (2.0 * gamma_difference_sf(c, shape, theta)).min(1.0)
}

/// Lugannani-Rice approximation to `P(G1 - G2 > q)`, `q > 0`, where the
/// cumulant generating function is `-k log(1 - theta^2 s^2)`.
fn gamma_difference_sf(q: f64, k: f64, theta: f64) -> f64 {
    let s = ((k * k * theta * theta + q * q).sqrt() - k * theta) / (q * theta);
    let ts2 = theta * theta * s * s;
    let cgf = -k * (1.0 - ts2).ln();
    let cgf2 = 2.0 * k * theta * theta * (1.0 + ts2) / ((1.0 - ts2) * (1.0 - ts2));
    let w = (2.0 * (s * q - cgf)).max(0.0).sqrt();
    let u = s * cgf2.sqrt();
    let upper = 0.5 * erfc(w / std::f64::consts::SQRT_2);
    let density = (-0.5 * w * w).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (upper + density * (1.0 / u - 1.0 / w)).clamp(0.0, 0.5)
}
