//! Bayesian classification with local probabilistic models.
//!
//! Around each query point the classifier builds a small hypercube per
//! class, fits a simple density (uniform, Gaussian or kernel) to the class
//! samples inside it, and combines the in-region sample count with that
//! local density into a posterior. Neighborhood size and model complexity
//! are tuned by cross-validation; kNN, distance-weighted kNN, local-mean and
//! naive Bayes classifiers are all special cases.

pub mod classifier;
pub mod cli;
pub mod data;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod lpm;
pub mod neighborhood;
pub mod rng;
pub mod verify;

pub use classifier::{
    decide, posteriors, predict, predict_named, score, Classifier, ClassifierConfig, LossMatrix,
    Prediction, Variant,
};
pub use dataset::{stratified_folds, Dataset, Folds, Scaler};
pub use error::{Error, Result};
pub use lpm::{Assumption, Bandwidth, Covariance, LocalModel};
pub use neighborhood::{build_regions, distance, kth_nearest_radius, Metric, NeighborhoodMode, Region};
pub use rng::Rng;
