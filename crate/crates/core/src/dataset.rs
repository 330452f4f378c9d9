//! Labeled feature matrices, feature standardization and stratified folds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Continuous features with class labels.
///
/// Features are stored row-major. Labels are indices into `class_names`,
/// which is ordered by first appearance in the source data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    class_names: Vec<String>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset and checks every invariant: finite values, labels
    /// within the vocabulary and no empty class.
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::invalid("dataset needs at least one feature"));
        }
        if labels.is_empty() {
            return Err(Error::invalid("dataset is empty"));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::invalid(format!(
                "feature buffer has {} values, expected {} rows x {} features",
                features.len(),
                labels.len(),
                n_features
            )));
        }
        if feature_names.len() != n_features {
            return Err(Error::invalid(format!(
                "{} feature names for {} features",
                feature_names.len(),
                n_features
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at row {}, feature {}",
                pos / n_features,
                pos % n_features
            )));
        }
        let c = class_names.len();
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::invalid(format!(
                "label index {bad} outside vocabulary of {c} classes"
            )));
        }
        let ds = Self {
            features,
            n_features,
            labels,
            class_names,
            feature_names,
        };
        if let Some(empty) = ds.class_counts().iter().position(|&k| k == 0) {
            return Err(Error::invalid(format!(
                "class '{}' has no samples",
                ds.class_names[empty]
            )));
        }
        Ok(ds)
    }

    /// Builds a dataset from rows and string labels. The class vocabulary
    /// follows first appearance; feature names default to `f1..fd`.
    pub fn from_rows<S: AsRef<str>>(rows: &[Vec<f64>], labels: &[S]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let d = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::invalid(format!("row {i} has a different width")));
        }
        let mut class_names: Vec<String> = Vec::new();
        let mut idx = Vec::with_capacity(labels.len());
        for l in labels {
            let l = l.as_ref();
            let pos = match class_names.iter().position(|c| c == l) {
                Some(p) => p,
                None => {
                    class_names.push(l.to_string());
                    class_names.len() - 1
                }
            };
            idx.push(pos);
        }
        let features = rows.iter().flatten().copied().collect();
        let names = (1..=d).map(|j| format!("f{j}")).collect();
        Self::new(features, d, idx, class_names, names)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Smallest per-class count (N_m of a training split).
    pub fn min_class_count(&self) -> usize {
        self.class_counts().into_iter().min().unwrap_or(0)
    }

    /// Rows at `indices`, in that order. The class vocabulary is kept as is,
    /// so a subset may contain classes with zero samples.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let d = self.n_features;
        let mut features = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            n_features: d,
            labels,
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Same samples with labels replaced. Used by leakage checks.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Dataset> {
        if labels.len() != self.labels.len() || labels.iter().any(|&l| l >= self.n_classes()) {
            return Err(Error::invalid("replacement labels do not fit the dataset"));
        }
        Ok(Dataset {
            labels,
            ..self.clone()
        })
    }
}

const STDDEV_FLOOR: f64 = 1e-12;

/// Per-feature standardization parameters fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    means: Vec<f64>,
    stddevs: Vec<f64>,
}

impl Scaler {
    /// Population mean and standard deviation of every feature. Standard
    /// deviations below 1e-12 are replaced by 1 so constant columns are
    /// only shifted.
    pub fn fit(train: &Dataset) -> Result<Scaler> {
        let n = train.n_samples();
        if n == 0 {
            return Err(Error::invalid("cannot fit a scaler on an empty dataset"));
        }
        let d = train.n_features();
        let mut means = vec![0.0; d];
        for row in train.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n as f64);
        let mut vars = vec![0.0; d];
        for row in train.rows() {
            for ((s, v), m) in vars.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stddevs = vars
            .into_iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd < STDDEV_FLOOR {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Scaler { means, stddevs })
    }

    pub fn from_parts(means: Vec<f64>, stddevs: Vec<f64>) -> Result<Scaler> {
        if means.len() != stddevs.len() || means.is_empty() {
            return Err(Error::invalid("scaler means and stddevs must be equal, nonzero length"));
        }
        if stddevs.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("scaler stddevs must be positive and finite"));
        }
        Ok(Scaler { means, stddevs })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stddevs(&self) -> &[f64] {
        &self.stddevs
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        self.check_dim(data.n_features())?;
        let mut out = data.clone();
        for row in out.features.chunks_exact_mut(data.n_features) {
            self.transform_in_place(row);
        }
        Ok(out)
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(row.len())?;
        let mut out = row.to_vec();
        self.transform_in_place(&mut out);
        Ok(out)
    }

    pub fn invert_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(row.len())?;
        Ok(row
            .iter()
            .zip(self.means.iter().zip(&self.stddevs))
            .map(|(z, (m, s))| z * s + m)
            .collect())
    }

    fn transform_in_place(&self, row: &mut [f64]) {
        for (v, (m, s)) in row.iter_mut().zip(self.means.iter().zip(&self.stddevs)) {
            *v = (*v - m) / s;
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::invalid(format!(
                "scaler fitted on {} features, got {}",
                self.dim(),
                d
            )));
        }
        Ok(())
    }
}

/// Fold assignment produced by [`stratified_folds`].
#[derive(Debug, Clone, PartialEq)]
pub struct Folds {
    /// Sample indices of each fold, ascending.
    pub folds: Vec<Vec<usize>>,
    /// Classes that had fewer samples than folds.
    pub warnings: Vec<String>,
}

impl Folds {
    /// Indices outside fold `k`, ascending.
    pub fn train_indices(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        idx.sort_unstable();
        idx
    }
}

/// Randomly partitions the samples into `folds` groups with the class
/// proportions preserved: per-class counts in any two folds differ by at
/// most one.
///
/// Each class is shuffled and dealt round-robin. The dealer position carries
/// over from one class to the next so fold sizes also stay balanced.
pub fn stratified_folds(data: &Dataset, folds: usize, rng: &mut Rng) -> Result<Folds> {
    if folds < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {folds}")));
    }
    if data.n_samples() < folds {
        return Err(Error::invalid(format!(
            "{} samples cannot fill {} folds",
            data.n_samples(),
            folds
        )));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); data.n_classes()];
    for (i, &l) in data.labels().iter().enumerate() {
        per_class[l].push(i);
    }
    let mut out = vec![Vec::new(); folds];
    let mut warnings = Vec::new();
    let mut dealer = 0usize;
    for (class, mut members) in per_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < folds {
            warnings.push(format!(
                "class '{}' has {} samples for {} folds; some folds get none",
                data.class_names()[class],
                members.len(),
                folds
            ));
        }
        rng.shuffle(&mut members);
        for i in members {
            out[dealer % folds].push(i);
            dealer += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(Folds {
        folds: out,
        warnings,
    })
}
