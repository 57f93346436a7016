//! Resampling plans for the eleven estimation procedures.
//!
//! Every plan indexes rows of an embedded dataset (not raw observations).
//! Block-based procedures share one partition rule: `n` rows are cut into
//! `K` contiguous blocks and the first `n mod K` blocks get one extra row.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// The estimation procedures, in the order results are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "Holdout")]
    Holdout,
    #[serde(rename = "Rep-Holdout")]
    RepHoldout,
    #[serde(rename = "Preq-Bls")]
    PreqBls,
    #[serde(rename = "Preq-Sld-Bls")]
    PreqSldBls,
    #[serde(rename = "Preq-Bls-Gap")]
    PreqBlsGap,
    #[serde(rename = "Preq-Grow")]
    PreqGrow,
    #[serde(rename = "Preq-Slide")]
    PreqSlide,
    #[serde(rename = "CV")]
    Cv,
    #[serde(rename = "CV-Bl")]
    CvBl,
    #[serde(rename = "CV-Mod")]
    CvMod,
    #[serde(rename = "CV-hvBl")]
    CvHvBl,
}

impl Method {
    pub const ALL: [Method; 11] = [
        Method::Holdout,
        Method::RepHoldout,
        Method::PreqBls,
        Method::PreqSldBls,
        Method::PreqBlsGap,
        Method::PreqGrow,
        Method::PreqSlide,
        Method::Cv,
        Method::CvBl,
        Method::CvMod,
        Method::CvHvBl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Holdout => "Holdout",
            Method::RepHoldout => "Rep-Holdout",
            Method::PreqBls => "Preq-Bls",
            Method::PreqSldBls => "Preq-Sld-Bls",
            Method::PreqBlsGap => "Preq-Bls-Gap",
            Method::PreqGrow => "Preq-Grow",
            Method::PreqSlide => "Preq-Slide",
            Method::Cv => "CV",
            Method::CvBl => "CV-Bl",
            Method::CvMod => "CV-Mod",
            Method::CvHvBl => "CV-hvBl",
        }
    }

    /// Cross-validation family: test folds partition all rows.
    pub fn is_cross_validation(self) -> bool {
        matches!(
            self,
            Method::Cv | Method::CvBl | Method::CvMod | Method::CvHvBl
        )
    }

    /// Out-of-sample and prequential family: always trains on the past.
    pub fn preserves_order(self) -> bool {
        !self.is_cross_validation()
    }

    pub fn is_randomized(self) -> bool {
        matches!(self, Method::RepHoldout | Method::Cv | Method::CvMod)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name().to_ascii_lowercase() == key)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// One train/test round. `gap` holds rows withheld from both sides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Iteration {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub gap: Vec<usize>,
}

impl Iteration {
    fn contiguous(train: Range<usize>, test: Range<usize>) -> Self {
        Self {
            train: train.collect(),
            test: test.collect(),
            gap: Vec::new(),
        }
    }
}

/// Parameters recorded alongside a plan.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub removal: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nreps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refit_interval: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplingPlan {
    pub method: Method,
    pub n: usize,
    pub params: PlanParams,
    pub iterations: Vec<Iteration>,
}

impl ResamplingPlan {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Row ranges of the `k` contiguous blocks over `n` rows.
pub fn blocks(n: usize, k: usize) -> Vec<Range<usize>> {
    let base = n / k;
    let extra = n % k;
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

fn check_folds(n: usize, k: usize, min_k: usize) -> Result<()> {
    if k < min_k {
        return Err(Error::invalid(format!("need at least {min_k} folds, got {k}")));
    }
    if k > n {
        return Err(Error::invalid(format!("{k} folds exceed {n} rows")));
    }
    Ok(())
}

fn check_removal(p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::invalid("removal radius must be at least 1"));
    }
    Ok(())
}

fn complement(n: usize, excluded: &[bool]) -> Vec<usize> {
    (0..n).filter(|&i| !excluded[i]).collect()
}

/// Randomized K-fold cross-validation.
pub fn plan_cv(n: usize, k: usize, seed: u64) -> Result<ResamplingPlan> {
    plan_cv_shuffled(n, k, seed, true)
}

/// K-fold cross-validation with the shuffle switchable. Without the shuffle
/// the plan coincides with blocked cross-validation.
pub fn plan_cv_shuffled(n: usize, k: usize, seed: u64, shuffle: bool) -> Result<ResamplingPlan> {
    check_folds(n, k, 2)?;
    let folds = random_folds(n, k, seed, shuffle);
    let iterations = folds
        .into_iter()
        .map(|test| {
            let mut in_test = vec![false; n];
            test.iter().for_each(|&i| in_test[i] = true);
            Iteration {
                train: complement(n, &in_test),
                test,
                gap: Vec::new(),
            }
        })
        .collect();
    Ok(ResamplingPlan {
        method: Method::Cv,
        n,
        params: PlanParams {
            folds: Some(k),
            seed: Some(seed),
            ..PlanParams::default()
        },
        iterations,
    })
}

fn random_folds(n: usize, k: usize, seed: u64, shuffle: bool) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(&mut rng_from_seed(seed));
    }
    blocks(n, k)
        .into_iter()
        .map(|b| {
            let mut fold = order[b].to_vec();
            fold.sort_unstable();
            fold
        })
        .collect()
}

/// Blocked cross-validation: contiguous folds, no shuffle.
pub fn plan_cv_bl(n: usize, k: usize) -> Result<ResamplingPlan> {
    check_folds(n, k, 2)?;
    let iterations = blocks(n, k)
        .into_iter()
        .map(|b| Iteration {
            train: (0..b.start).chain(b.end..n).collect(),
            test: b.collect(),
            gap: Vec::new(),
        })
        .collect();
    Ok(ResamplingPlan {
        method: Method::CvBl,
        n,
        params: PlanParams {
            folds: Some(k),
            ..PlanParams::default()
        },
        iterations,
    })
}

/// Modified cross-validation: randomized folds, then every training row
/// within `p` rows of any test row is moved to the gap.
pub fn plan_cv_mod(n: usize, k: usize, p: usize, seed: u64) -> Result<ResamplingPlan> {
    check_folds(n, k, 2)?;
    check_removal(p)?;
    let mut iterations = Vec::with_capacity(k);
    for (it, test) in random_folds(n, k, seed, true).into_iter().enumerate() {
        // 0 = train, 1 = gap, 2 = test
        let mut role = vec![0u8; n];
        for &j in &test {
            for i in j.saturating_sub(p)..=(j + p).min(n - 1) {
                role[i] = role[i].max(1);
            }
        }
        test.iter().for_each(|&j| role[j] = 2);
        let train: Vec<usize> = (0..n).filter(|&i| role[i] == 0).collect();
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet { iteration: it });
        }
        iterations.push(Iteration {
            train,
            gap: (0..n).filter(|&i| role[i] == 1).collect(),
            test,
        });
    }
    Ok(ResamplingPlan {
        method: Method::CvMod,
        n,
        params: PlanParams {
            folds: Some(k),
            removal: Some(p),
            seed: Some(seed),
            ..PlanParams::default()
        },
        iterations,
    })
}

/// hv-blocked cross-validation: blocked folds with `p` rows removed on each
/// side of the test block.
pub fn plan_cv_hvbl(n: usize, k: usize, p: usize) -> Result<ResamplingPlan> {
    check_folds(n, k, 2)?;
    check_removal(p)?;
    let mut iterations = Vec::with_capacity(k);
    for (it, b) in blocks(n, k).into_iter().enumerate() {
        let lo = b.start.saturating_sub(p);
        let hi = (b.end + p).min(n);
        let train: Vec<usize> = (0..lo).chain(hi..n).collect();
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet { iteration: it });
        }
        iterations.push(Iteration {
            train,
            gap: (lo..b.start).chain(b.end..hi).collect(),
            test: b.collect(),
        });
    }
    Ok(ResamplingPlan {
        method: Method::CvHvBl,
        n,
        params: PlanParams {
            folds: Some(k),
            removal: Some(p),
            ..PlanParams::default()
        },
        iterations,
    })
}

fn window_size(fraction: f64, n: usize, what: &str) -> Result<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("{what} fraction {fraction} not in (0, 1)")));
    }
    let size = (fraction * n as f64).floor() as usize;
    if size < 1 {
        return Err(Error::DegenerateSplit(format!(
            "{what} fraction {fraction} of {n} rows is empty"
        )));
    }
    Ok(size)
}

/// Single split: the first `floor(train_fraction * n)` rows train, the rest test.
pub fn plan_holdout(n: usize, train_fraction: f64) -> Result<ResamplingPlan> {
    let cut = window_size(train_fraction, n, "train")?;
    if cut >= n {
        return Err(Error::DegenerateSplit(format!(
            "train fraction {train_fraction} of {n} rows leaves no test rows"
        )));
    }
    Ok(ResamplingPlan {
        method: Method::Holdout,
        n,
        params: PlanParams {
            train_fraction: Some(train_fraction),
            ..PlanParams::default()
        },
        iterations: vec![Iteration::contiguous(0..cut, cut..n)],
    })
}

/// Repeated holdout: `nreps` random cut points, each followed by a test
/// window and preceded by a training window of fixed sizes.
pub fn plan_rep_holdout(
    n: usize,
    nreps: usize,
    train_fraction: f64,
    test_fraction: f64,
    seed: u64,
) -> Result<ResamplingPlan> {
    if nreps == 0 {
        return Err(Error::invalid("nreps must be at least 1"));
    }
    if train_fraction + test_fraction > 1.0 {
        return Err(Error::invalid(format!(
            "window fractions {train_fraction} + {test_fraction} exceed 1"
        )));
    }
    let train = window_size(train_fraction, n, "train")?;
    let test = window_size(test_fraction, n, "test")?;
    let mut rng = rng_from_seed(seed);
    let iterations = (0..nreps)
        .map(|_| {
            let a = rng.random_range(train..=n - test);
            Iteration::contiguous(a - train..a, a..a + test)
        })
        .collect();
    Ok(ResamplingPlan {
        method: Method::RepHoldout,
        n,
        params: PlanParams {
            nreps: Some(nreps),
            train_fraction: Some(train_fraction),
            test_fraction: Some(test_fraction),
            seed: Some(seed),
            ..PlanParams::default()
        },
        iterations,
    })
}

/// Cut points `a` that [`plan_rep_holdout`] draws from, as an inclusive range.
pub fn rep_holdout_cut_range(n: usize, train_fraction: f64, test_fraction: f64) -> (usize, usize) {
    let train = (train_fraction * n as f64).floor() as usize;
    let test = (test_fraction * n as f64).floor() as usize;
    (train, n - test)
}

/// Prequential evaluation in blocks with a growing window.
pub fn plan_preq_bls(n: usize, k: usize) -> Result<ResamplingPlan> {
    check_folds(n, k, 2)?;
    let b = blocks(n, k);
    let iterations = (1..k)
        .map(|i| Iteration::contiguous(0..b[i].start, b[i].clone()))
        .collect();
    Ok(ResamplingPlan {
        method: Method::PreqBls,
        n,
        params: PlanParams {
            folds: Some(k),
            ..PlanParams::default()
        },
        iterations,
    })
}

/// Prequential evaluation in blocks with a sliding window of one block.
pub fn plan_preq_sld_bls(n: usize, k: usize) -> Result<ResamplingPlan> {
    plan_preq_sld_bls_window(n, k, 1)
}

/// Sliding-window prequential blocks where the training window spans up to
/// `window_blocks` blocks.
pub fn plan_preq_sld_bls_window(n: usize, k: usize, window_blocks: usize) -> Result<ResamplingPlan> {
    check_folds(n, k, 2)?;
    if window_blocks == 0 {
        return Err(Error::invalid("window must span at least one block"));
    }
    let b = blocks(n, k);
    let iterations = (1..k)
        .map(|i| {
            let first = i.saturating_sub(window_blocks);
            Iteration::contiguous(b[first].start..b[i].start, b[i].clone())
        })
        .collect();
    Ok(ResamplingPlan {
        method: Method::PreqSldBls,
        n,
        params: PlanParams {
            folds: Some(k),
            window: Some(window_blocks),
            ..PlanParams::default()
        },
        iterations,
    })
}

/// Growing-window prequential blocks with one gap block between train and test.
pub fn plan_preq_bls_gap(n: usize, k: usize) -> Result<ResamplingPlan> {
    check_folds(n, k, 3)?;
    let b = blocks(n, k);
    let iterations = (2..k)
        .map(|i| Iteration {
            train: (0..b[i - 1].start).collect(),
            gap: b[i - 1].clone().collect(),
            test: b[i].clone().collect(),
        })
        .collect();
    Ok(ResamplingPlan {
        method: Method::PreqBlsGap,
        n,
        params: PlanParams {
            folds: Some(k),
            ..PlanParams::default()
        },
        iterations,
    })
}

fn check_prequential(n: usize, window: usize, refit_interval: usize) -> Result<()> {
    if window == 0 || window >= n {
        return Err(Error::invalid(format!(
            "window {window} must lie in [1, {}]",
            n.saturating_sub(1)
        )));
    }
    if refit_interval == 0 {
        return Err(Error::invalid("refit interval must be at least 1"));
    }
    Ok(())
}

/// Exhaustive prequential evaluation with a growing (landmark) window.
pub fn plan_preq_grow(n: usize, initial_window: usize, refit_interval: usize) -> Result<ResamplingPlan> {
    check_prequential(n, initial_window, refit_interval)?;
    let iterations = (initial_window..n)
        .step_by(refit_interval)
        .map(|j| Iteration::contiguous(0..j, j..(j + refit_interval).min(n)))
        .collect();
    Ok(ResamplingPlan {
        method: Method::PreqGrow,
        n,
        params: PlanParams {
            window: Some(initial_window),
            refit_interval: Some(refit_interval),
            ..PlanParams::default()
        },
        iterations,
    })
}

/// Exhaustive prequential evaluation with a sliding window of fixed size.
pub fn plan_preq_slide(n: usize, window: usize, refit_interval: usize) -> Result<ResamplingPlan> {
    check_prequential(n, window, refit_interval)?;
    let iterations = (window..n)
        .step_by(refit_interval)
        .map(|j| Iteration::contiguous(j - window..j, j..(j + refit_interval).min(n)))
        .collect();
    Ok(ResamplingPlan {
        method: Method::PreqSlide,
        n,
        params: PlanParams {
            window: Some(window),
            refit_interval: Some(refit_interval),
            ..PlanParams::default()
        },
        iterations,
    })
}

/// Settings shared by all procedures.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodParams {
    /// Folds / blocks for the block-based and CV procedures.
    pub folds: usize,
    pub nreps: usize,
    pub holdout_train_fraction: f64,
    pub rep_train_fraction: f64,
    pub rep_test_fraction: f64,
    /// Window for Preq-Grow / Preq-Slide; `None` means `floor(n / folds)`.
    pub preq_window: Option<usize>,
    pub refit_interval: usize,
    pub sliding_blocks: usize,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            folds: 10,
            nreps: 10,
            holdout_train_fraction: 0.7,
            rep_train_fraction: 0.6,
            rep_test_fraction: 0.1,
            preq_window: None,
            refit_interval: 1,
            sliding_blocks: 1,
        }
    }
}

/// Builds the plan for `method` over `n` rows. `removal` is the CV-Mod /
/// CV-hvBl radius (the embedding dimension); `seed` only matters for the
/// randomized procedures.
pub fn build_plan(
    method: Method,
    n: usize,
    params: &MethodParams,
    removal: usize,
    seed: u64,
) -> Result<ResamplingPlan> {
    let k = params.folds;
    match method {
        Method::Holdout => plan_holdout(n, params.holdout_train_fraction),
        Method::RepHoldout => plan_rep_holdout(
            n,
            params.nreps,
            params.rep_train_fraction,
            params.rep_test_fraction,
            seed,
        ),
        Method::PreqBls => plan_preq_bls(n, k),
        Method::PreqSldBls => plan_preq_sld_bls_window(n, k, params.sliding_blocks),
        Method::PreqBlsGap => plan_preq_bls_gap(n, k),
        Method::PreqGrow => plan_preq_grow(n, preq_window(n, params)?, params.refit_interval),
        Method::PreqSlide => plan_preq_slide(n, preq_window(n, params)?, params.refit_interval),
        Method::Cv => plan_cv(n, k, seed),
        Method::CvBl => plan_cv_bl(n, k),
        Method::CvMod => plan_cv_mod(n, k, removal, seed),
        Method::CvHvBl => plan_cv_hvbl(n, k, removal),
    }
}

fn preq_window(n: usize, params: &MethodParams) -> Result<usize> {
    match params.preq_window {
        Some(w) => Ok(w),
        None if params.folds == 0 => Err(Error::invalid("folds must be positive")),
        None => Ok(n / params.folds),
    }
}
