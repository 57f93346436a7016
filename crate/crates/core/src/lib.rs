//! Performance estimation for time-series forecasting models.
//!
//! The crate estimates the out-of-sample loss of an auto-regressive
//! forecaster with eleven resampling procedures (out-of-sample,
//! prequential and cross-validation families) and measures how close each
//! estimate lands to the loss actually incurred on a held-out tail of the
//! series. Around that core sit the pieces needed to run such studies:
//! time-delay embedding, two regression learners, synthetic data
//! generators, stationarity diagnostics and rank/Bayesian aggregation.

pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod learners;
pub mod rng;
pub mod series;
pub mod splitters;
pub mod stationarity;
pub mod synthetic;

pub use embedding::{embed, estimate_embedding_dimension, EmbeddedDataset, FnnConfig, FnnOutcome};
pub use error::{Error, Result};
pub use evaluation::{
    apae, average_ranks, bayes_sign_test, estimate_loss, pae, pct_diff, rmse, true_loss,
    BayesSignTest, EstimationResult, RankTable,
};
pub use learners::{FittedModel, LearnerKind, LearnerSpec, Penalty};
pub use series::{difference, estimation_validation_split, load_csv, TimeSeries};
pub use splitters::{Iteration, Method, MethodParams, ResamplingPlan};
pub use synthetic::{DgpKind, DgpSpec};
