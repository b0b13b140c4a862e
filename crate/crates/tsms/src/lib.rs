//! Explainable adaptive model selection for univariate time-series
//! forecasting with tree ensembles.
//!
//! A pool of 21 tree-based forecasters (single CART trees, random forests
//! and gradient-boosted ensembles) is trained once on the first half of a
//! series. Each model then gets a Region of Competence (RoC): the salient
//! subsequences of validation chunks it won, extracted by thresholding
//! exact interventional Shapley attributions of the model's loss. At test
//! time the forecaster whose RoC contains the member closest (in DTW
//! distance) to the current lag window makes the prediction, and a
//! Hoeffding-bound drift detector triggers RoC recreation when the input
//! distribution shifts. The harness evaluates the adaptive, static and
//! periodic variants against the best single pool member across datasets.

pub mod drift;
pub mod dtw;
pub mod error;
pub mod harness;
pub mod roc;
pub mod selector;
pub mod series;
pub mod shapley;
pub mod tree;

pub use error::{Result, TsmsError};
