//! The local Bayesian decision rule.
//!
//! For each class l a region R_l(x) around the query is built, a local model
//! is fitted to the k_l class-l samples inside it, and the class score is
//! `ln k_l + ln f_{R_l}(x | l)`. Posteriors are the normalized exponentials
//! of the scores; the decision minimizes expected loss.
//!
//! The joint prior estimate is k_l / n. The common 1/n is left out of the
//! scores because it cancels in both the argmax and the posteriors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Scaler};
use crate::error::{Error, Result};
use crate::lpm::{log_sum_exp, Assumption, Bandwidth, Covariance, LocalModel};
use crate::neighborhood::{ClassRegion, Metric, NeighborhoodMode, SortedNeighbors};

/// Loss λ(y, l) of deciding l when the truth is y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossMatrix {
    n_classes: usize,
    /// Row-major, row = true class.
    values: Vec<f64>,
}

impl LossMatrix {
    /// Zero on the diagonal, one elsewhere.
    pub fn zero_one(n_classes: usize) -> LossMatrix {
        let mut values = vec![1.0; n_classes * n_classes];
        for i in 0..n_classes {
            values[i * n_classes + i] = 0.0;
        }
        LossMatrix { n_classes, values }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<LossMatrix> {
        let c = rows.len();
        if c == 0 || rows.iter().any(|r| r.len() != c) {
            return Err(Error::invalid("loss matrix must be square and non-empty"));
        }
        if rows.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("loss entries must be finite and nonnegative"));
        }
        Ok(LossMatrix {
            n_classes: c,
            values: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, truth: usize, decision: usize) -> f64 {
        self.values[truth * self.n_classes + decision]
    }

    pub fn is_zero_one(&self) -> bool {
        *self == LossMatrix::zero_one(self.n_classes)
    }
}

/// Neighborhood, local model and metric of the rule, plus an optional loss
/// matrix (0-1 loss when absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    mode: NeighborhoodMode,
    assumption: Assumption,
    metric: Metric,
    loss: Option<LossMatrix>,
}

impl ClassifierConfig {
    pub fn new(mode: NeighborhoodMode, assumption: Assumption, metric: Metric) -> Result<Self> {
        if mode == NeighborhoodMode::Global && assumption == Assumption::Lua {
            return Err(Error::invalid(
                "the uniform assumption has no density over the whole space",
            ));
        }
        if mode.k() == Some(0) {
            return Err(Error::invalid("k must be at least 1"));
        }
        Ok(Self {
            mode,
            assumption,
            metric,
            loss: None,
        })
    }

    pub fn with_loss(mut self, loss: LossMatrix) -> Self {
        self.loss = Some(loss);
        self
    }

    pub fn mode(&self) -> NeighborhoodMode {
        self.mode
    }

    pub fn assumption(&self) -> Assumption {
        self.assumption
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn loss(&self) -> Option<&LossMatrix> {
        self.loss.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    pub posteriors: Vec<f64>,
    /// ln k_l + ln f_{R_l}(x | l), `-inf` for classes without members.
    pub log_scores: Vec<f64>,
    /// k_l of every class.
    pub counts: Vec<usize>,
    pub selected_k: Option<usize>,
    pub selected_assumption: Assumption,
    /// Every score was `-inf`; posteriors are the training class frequencies.
    pub prior_fallback: bool,
}

/// Class scores from already-built regions.
pub(crate) fn scores_from_regions(
    train: &Dataset,
    regions: &[ClassRegion],
    assumption: Assumption,
    query: &[f64],
) -> Result<Vec<f64>> {
    regions
        .iter()
        .map(|cr| {
            if cr.members.is_empty() {
                return Ok(f64::NEG_INFINITY);
            }
            let members: Vec<&[f64]> = cr.members.iter().map(|&i| train.row(i)).collect();
            let model = LocalModel::fit(assumption, cr.region.clone(), &members)?;
            Ok((cr.count() as f64).ln() + model.log_lpd(query)?)
        })
        .collect()
}

fn regions_for(train: &Dataset, query: &[f64], config: &ClassifierConfig) -> Result<Vec<ClassRegion>> {
    SortedNeighbors::new(train, query, config.metric)?.regions(config.mode)
}

/// Log score of every class: `ln k_l + ln f_{R_l(x)}(x | l)`.
pub fn score(train: &Dataset, query: &[f64], config: &ClassifierConfig) -> Result<Vec<f64>> {
    let regions = regions_for(train, query, config)?;
    scores_from_regions(train, &regions, config.assumption, query)
}

/// Normalized exponentials of the log scores, via log-sum-exp.
///
/// `None` when no score is finite (or +inf), since there is nothing to
/// normalize.
pub fn posteriors(log_scores: &[f64]) -> Option<Vec<f64>> {
    if log_scores.iter().any(|s| s.is_nan()) {
        return None;
    }
    let n_inf = log_scores.iter().filter(|&&s| s == f64::INFINITY).count();
    if n_inf > 0 {
        return Some(
            log_scores
                .iter()
                .map(|&s| if s == f64::INFINITY { 1.0 / n_inf as f64 } else { 0.0 })
                .collect(),
        );
    }
    let lse = log_sum_exp(log_scores);
    if lse == f64::NEG_INFINITY {
        return None;
    }
    Some(log_scores.iter().map(|s| (s - lse).exp()).collect())
}

/// Class that minimizes Σ_y λ(y, l) P(y | x). Ties go to the lowest index.
pub fn decide(posteriors: &[f64], loss: &LossMatrix) -> usize {
    if loss.is_zero_one() {
        return argmax(posteriors);
    }
    let c = posteriors.len();
    let risks: Vec<f64> = (0..c)
        .map(|l| (0..c).map(|y| loss.get(y, l) * posteriors[y]).sum())
        .collect();
    argmin(&risks)
}

/// First index of the largest value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Builds a prediction from log scores, falling back to class frequencies
/// when every score is `-inf`.
pub(crate) fn finish(
    log_scores: Vec<f64>,
    counts: Vec<usize>,
    train_class_counts: &[usize],
    config: &ClassifierConfig,
) -> Prediction {
    let (posteriors, prior_fallback) = match posteriors(&log_scores) {
        Some(p) => (p, false),
        None => {
            let n: usize = train_class_counts.iter().sum();
            (
                train_class_counts.iter().map(|&k| k as f64 / n as f64).collect(),
                true,
            )
        }
    };
    let label = match &config.loss {
        Some(loss) => decide(&posteriors, loss),
        None => argmax(&posteriors),
    };
    Prediction {
        label,
        posteriors,
        log_scores,
        counts,
        selected_k: config.mode.k(),
        selected_assumption: config.assumption,
        prior_fallback,
    }
}

pub fn predict(train: &Dataset, query: &[f64], config: &ClassifierConfig) -> Result<Prediction> {
    if let Some(loss) = &config.loss {
        if loss.n_classes() != train.n_classes() {
            return Err(Error::invalid(format!(
                "loss matrix is {0}x{0} but the data has {1} classes",
                loss.n_classes(),
                train.n_classes()
            )));
        }
    }
    let regions = regions_for(train, query, config)?;
    let scores = scores_from_regions(train, &regions, config.assumption, query)?;
    let counts = regions.iter().map(ClassRegion::count).collect();
    Ok(finish(scores, counts, &train.class_counts(), config))
}

/// Classic local classifiers expressed as configurations of the rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Shared region, uniform model: majority vote of the k nearest.
    VotingKnn,
    /// Shared region, unit-bandwidth kernel model: Gaussian-weighted vote.
    DwKnn,
    /// Per-class regions, identity-covariance Gaussian: nearest local mean.
    LocalMean,
    /// Shared region, Gaussian model.
    LdKnn,
    /// Whole space, Gaussian model: Gaussian naive Bayes.
    GaussianNb,
    /// Whole space, Silverman kernel model: kernel naive Bayes.
    KdeNb,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::VotingKnn,
        Variant::DwKnn,
        Variant::LocalMean,
        Variant::LdKnn,
        Variant::GaussianNb,
        Variant::KdeNb,
    ];

    pub fn config(self, k: usize) -> Result<ClassifierConfig> {
        let (mode, assumption) = match self {
            Variant::VotingKnn => (NeighborhoodMode::Shared { k }, Assumption::Lua),
            Variant::DwKnn => (NeighborhoodMode::Shared { k }, Assumption::lca(Bandwidth::Unit)),
            Variant::LocalMean => (
                NeighborhoodMode::PerClass { k },
                Assumption::Lga {
                    covariance: Covariance::Identity,
                },
            ),
            Variant::LdKnn => (NeighborhoodMode::Shared { k }, Assumption::LGA),
            Variant::GaussianNb => (NeighborhoodMode::Global, Assumption::LGA),
            Variant::KdeNb => (NeighborhoodMode::Global, Assumption::lca(Bandwidth::Silverman)),
        };
        ClassifierConfig::new(mode, assumption, Metric::Chebychev)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::VotingKnn => "voting_knn",
            Variant::DwKnn => "dw_knn",
            Variant::LocalMean => "local_mean",
            Variant::LdKnn => "ld_knn",
            Variant::GaussianNb => "gaussian_nb",
            Variant::KdeNb => "kde_nb",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string() == s.replace('-', "_"))
            .ok_or_else(|| Error::invalid(format!("unknown variant '{s}'")))
    }
}

pub fn predict_named(train: &Dataset, query: &[f64], variant: Variant, k: usize) -> Result<Prediction> {
    predict(train, query, &variant.config(k)?)
}

/// A training set bundled with its scaler and a configuration, ready to
/// classify raw (unscaled) queries.
#[derive(Debug, Clone)]
pub struct Classifier {
    scaler: Option<Scaler>,
    train: Dataset,
    config: ClassifierConfig,
}

impl Classifier {
    /// Standardizes `train` on itself when `standardize` is set; queries are
    /// then transformed with the same parameters.
    pub fn fit(train: Dataset, config: ClassifierConfig, standardize: bool) -> Result<Classifier> {
        let (scaler, train) = if standardize {
            let scaler = Scaler::fit(&train)?;
            let scaled = scaler.apply(&train)?;
            (Some(scaler), scaled)
        } else {
            (None, train)
        };
        Ok(Classifier {
            scaler,
            train,
            config,
        })
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn predict(&self, query: &[f64]) -> Result<Prediction> {
        match &self.scaler {
            Some(s) => predict(&self.train, &s.apply_row(query)?, &self.config),
            None => predict(&self.train, query, &self.config),
        }
    }
}
