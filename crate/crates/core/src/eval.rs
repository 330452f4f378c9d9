//! Cross-validated evaluation.
//!
//! The outer loop is a repeated stratified cross test. Inside every training
//! split the features are standardized and the neighborhood size and local
//! model are chosen by an inner stratified cross-validation over a grid of
//! k values derived from the smallest class. Accuracy and a Brier-style
//! squared error are recorded per test fold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{finish, scores_from_regions, ClassifierConfig, Prediction};
use crate::dataset::{stratified_folds, Dataset, Scaler};
use crate::error::{Error, Result};
use crate::lpm::{Assumption, Bandwidth};
use crate::neighborhood::{Metric, NeighborhoodMode, SortedNeighbors};
use crate::rng::Rng;

/// Fraction of correct labels.
pub fn accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() || truth.is_empty() {
        return Err(Error::invalid(format!(
            "accuracy needs equal, non-zero lengths (got {} and {})",
            predictions.len(),
            truth.len()
        )));
    }
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Mean over samples and classes of `(1{l = y} - P(l))²`, i.e. the
/// multiclass Brier score divided by the number of classes.
pub fn mse(posterior_rows: &[Vec<f64>], truth: &[usize]) -> Result<f64> {
    if posterior_rows.len() != truth.len() || truth.is_empty() {
        return Err(Error::invalid("mse needs one posterior row per label"));
    }
    let c = posterior_rows[0].len();
    let mut total = 0.0;
    for (i, (row, &y)) in posterior_rows.iter().zip(truth).enumerate() {
        if row.len() != c || y >= c {
            return Err(Error::invalid(format!("posterior row {i} does not match {c} classes")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || row.iter().any(|p| !(0.0..=1.0 + 1e-12).contains(p)) {
            return Err(Error::invalid(format!("posterior row {i} is not a probability vector")));
        }
        total += row
            .iter()
            .enumerate()
            .map(|(l, p)| {
                let target = if l == y { 1.0 } else { 0.0 };
                (target - p) * (target - p)
            })
            .sum::<f64>();
    }
    Ok(total / (truth.len() * c) as f64)
}

/// Neighborhood sizes and local models searched by the inner selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionGrid {
    pub k_values: Vec<usize>,
    pub assumptions: Vec<Assumption>,
}

impl SelectionGrid {
    /// k from `{1, 0.1 N_m, 0.2 N_m, ..., N_m}`, rounded, clamped to
    /// `[1, N_m]` and deduplicated.
    pub fn from_min_class_count(n_m: usize, assumptions: Vec<Assumption>) -> Result<SelectionGrid> {
        let fractions: Vec<f64> = (0..=10).map(|j| j as f64 / 10.0).collect();
        Self::from_fractions(n_m, &fractions, assumptions)
    }

    pub fn from_fractions(n_m: usize, fractions: &[f64], assumptions: Vec<Assumption>) -> Result<SelectionGrid> {
        if n_m == 0 {
            return Err(Error::Infeasible("smallest class is empty".into()));
        }
        let mut k_values: Vec<usize> = std::iter::once(1)
            .chain(fractions.iter().map(|&f| k_for_fraction(f, n_m)))
            .collect();
        k_values.sort_unstable();
        k_values.dedup();
        Self::new(k_values, assumptions)
    }

    pub fn new(k_values: Vec<usize>, mut assumptions: Vec<Assumption>) -> Result<SelectionGrid> {
        if k_values.is_empty() || assumptions.is_empty() {
            return Err(Error::invalid("selection grid needs at least one k and one assumption"));
        }
        if k_values.contains(&0) {
            return Err(Error::invalid("k values must be at least 1"));
        }
        let mut k_values = k_values;
        k_values.sort_unstable();
        k_values.dedup();
        assumptions.sort_by_key(Assumption::rank);
        assumptions.dedup();
        Ok(SelectionGrid {
            k_values,
            assumptions,
        })
    }

    fn cells(&self) -> Vec<(usize, Assumption)> {
        self.k_values
            .iter()
            .flat_map(|&k| self.assumptions.iter().map(move |&a| (k, a)))
            .collect()
    }
}

/// `round(fraction · N_m)` clamped to `[1, N_m]`.
pub fn k_for_fraction(fraction: f64, n_m: usize) -> usize {
    ((fraction * n_m as f64).round() as usize).clamp(1, n_m.max(1))
}

/// How each outer training split picks its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Selection {
    /// Inner stratified cross-validation over the standard k grid.
    InnerCv { folds: usize },
    /// k = round(fraction · N_m) of the training split, fixed assumption.
    Fixed { k_fraction: f64, assumption: Assumption },
}

/// Everything that determines an evaluation besides the data and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub folds: usize,
    pub repeats: usize,
    /// Neighborhood kind; the k inside is replaced by the selected value.
    pub mode: NeighborhoodMode,
    pub metric: Metric,
    pub assumptions: Vec<Assumption>,
    pub selection: Selection,
}

impl Default for Protocol {
    /// 8 repeats of a 5-fold cross test, per-class Chebychev neighborhoods,
    /// inner 4-fold selection over LUA, LGA and LCA.
    fn default() -> Self {
        Protocol {
            folds: 5,
            repeats: 8,
            mode: NeighborhoodMode::PerClass { k: 1 },
            metric: Metric::Chebychev,
            assumptions: Assumption::standard_set(Bandwidth::default()),
            selection: Selection::InnerCv { folds: 4 },
        }
    }
}

impl Protocol {
    fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::invalid("need at least 2 folds"));
        }
        if self.repeats == 0 {
            return Err(Error::invalid("need at least 1 repeat"));
        }
        if self.assumptions.is_empty() {
            return Err(Error::invalid("need at least one assumption"));
        }
        if self.mode == NeighborhoodMode::Global && self.assumptions.contains(&Assumption::Lua) {
            return Err(Error::invalid("the uniform assumption cannot be used in global mode"));
        }
        match &self.selection {
            Selection::InnerCv { folds } if *folds < 2 => Err(Error::invalid("need at least 2 inner folds")),
            Selection::Fixed { k_fraction, .. } if !(0.0..=1.0).contains(k_fraction) => {
                Err(Error::invalid(format!("k fraction {k_fraction} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// Outcome of one repeat × fold cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub repeat: usize,
    pub fold: usize,
    pub acc: f64,
    pub mse: f64,
    /// `None` in global mode, where there is no neighborhood size.
    pub chosen_k: Option<usize>,
    pub chosen_assumption: Assumption,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub mean_acc: f64,
    pub mean_mse: f64,
    /// Sample standard deviation over cells (0 for a single cell).
    pub std_acc: f64,
    pub std_mse: f64,
}

impl Aggregates {
    pub fn from_records(cells: &[FoldRecord]) -> Result<Aggregates> {
        if cells.is_empty() {
            return Err(Error::invalid("no cells to aggregate"));
        }
        let acc: Vec<f64> = cells.iter().map(|c| c.acc).collect();
        let mse: Vec<f64> = cells.iter().map(|c| c.mse).collect();
        Ok(Aggregates {
            mean_acc: mean(&acc),
            mean_mse: mean(&mse),
            std_acc: sample_std(&acc),
            std_mse: sample_std(&mse),
        })
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub dataset: String,
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub seed: u64,
    pub protocol: Protocol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ReportConfig,
    pub cells: Vec<FoldRecord>,
    pub aggregates: Aggregates,
}

impl EvalReport {
    /// Checks that the aggregates agree with the per-fold records.
    pub fn validate(&self) -> Result<()> {
        let recomputed = Aggregates::from_records(&self.cells)?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        if !close(recomputed.mean_acc, self.aggregates.mean_acc)
            || !close(recomputed.mean_mse, self.aggregates.mean_mse)
        {
            return Err(Error::invalid("report aggregates disagree with its cells"));
        }
        Ok(())
    }
}

/// Chosen hyperparameters and their inner cross-validated accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Choice {
    pub k: usize,
    pub assumption: Assumption,
    pub inner_accuracy: f64,
}

/// Predicts every test point under every (k, assumption) cell, reusing one
/// distance sort per point. Returns per point, per cell predictions.
fn predict_cells(
    train: &Dataset,
    test: &[&[f64]],
    mode: NeighborhoodMode,
    metric: Metric,
    cells: &[(usize, Assumption)],
) -> Result<Vec<Vec<Prediction>>> {
    let class_counts = train.class_counts();
    let n_m = class_counts.iter().copied().min().unwrap_or(0);
    test.par_iter()
        .map(|query| {
            let neighbors = SortedNeighbors::new(train, query, metric)?;
            let mut out = Vec::with_capacity(cells.len());
            let mut cached: Option<(usize, Vec<crate::neighborhood::ClassRegion>)> = None;
            for &(k, assumption) in cells {
                let k = match mode {
                    // an inner split can have fewer samples per class than
                    // the outer grid expects
                    NeighborhoodMode::PerClass { .. } => k.min(n_m),
                    NeighborhoodMode::Shared { .. } => k.min(train.n_samples()),
                    NeighborhoodMode::Global => k,
                };
                let cell_mode = mode.with_k(k);
                if cached.as_ref().map(|(ck, _)| *ck) != Some(k) {
                    cached = Some((k, neighbors.regions(cell_mode)?));
                }
                let regions = &cached.as_ref().expect("regions cached").1;
                let scores = scores_from_regions(train, regions, assumption, query)?;
                let counts = regions.iter().map(|r| r.count()).collect();
                let config = ClassifierConfig::new(cell_mode, assumption, metric)?;
                out.push(finish(scores, counts, &class_counts, &config));
            }
            Ok(out)
        })
        .collect()
}

/// Picks the grid cell with the best inner cross-validated accuracy on
/// `train`. Ties go to the smaller k, then to the simpler assumption.
pub fn select_hyperparams(
    train: &Dataset,
    grid: &SelectionGrid,
    mode: NeighborhoodMode,
    metric: Metric,
    inner_folds: usize,
    rng: &mut Rng,
) -> Result<Choice> {
    let folds = stratified_folds(train, inner_folds, rng)?;
    let cells = if mode == NeighborhoodMode::Global {
        grid.assumptions.iter().map(|&a| (0, a)).collect::<Vec<_>>()
    } else {
        grid.cells()
    };
    let mut hits = vec![0usize; cells.len()];
    let mut total = 0usize;
    for (f, test_idx) in folds.folds.iter().enumerate() {
        if test_idx.is_empty() {
            continue;
        }
        let inner_train = train.subset(&folds.train_indices(f));
        if inner_train.class_counts().contains(&0) && !matches!(mode, NeighborhoodMode::Shared { .. }) {
            // a class vanished from this inner split
            continue;
        }
        let queries: Vec<&[f64]> = test_idx.iter().map(|&i| train.row(i)).collect();
        let preds = predict_cells(&inner_train, &queries, mode, metric, &cells)?;
        for (row, &i) in preds.iter().zip(test_idx) {
            for (c, p) in row.iter().enumerate() {
                if p.label == train.label(i) {
                    hits[c] += 1;
                }
            }
        }
        total += test_idx.len();
    }
    if total == 0 {
        return Err(Error::Infeasible("no inner split could be evaluated".into()));
    }
    // cells are ordered by k, then by assumption rank, so keeping the first
    // maximum applies the tie rule
    let mut best = 0;
    for c in 1..cells.len() {
        if hits[c] > hits[best] {
            best = c;
        }
    }
    let (k, assumption) = cells[best];
    Ok(Choice {
        k,
        assumption,
        inner_accuracy: hits[best] as f64 / total as f64,
    })
}

/// Runs one outer split: standardize on the training part, choose
/// hyperparameters on it, then score the test part.
pub fn evaluate_split(
    data: &Dataset,
    train_idx: &[usize],
    test_idx: &[usize],
    protocol: &Protocol,
    rng: &mut Rng,
) -> Result<(Choice, f64, f64)> {
    let raw_train = data.subset(train_idx);
    let scaler = Scaler::fit(&raw_train)?;
    let train = scaler.apply(&raw_train)?;
    let test = scaler.apply(&data.subset(test_idx))?;
    let n_m = train.min_class_count();
    if n_m == 0 && !matches!(protocol.mode, NeighborhoodMode::Shared { .. }) {
        return Err(Error::Infeasible("a class is missing from a training split".into()));
    }
    let choice = match &protocol.selection {
        Selection::InnerCv { folds } => {
            let grid = SelectionGrid::from_min_class_count(n_m.max(1), protocol.assumptions.clone())?;
            select_hyperparams(&train, &grid, protocol.mode, protocol.metric, *folds, rng)?
        }
        Selection::Fixed {
            k_fraction,
            assumption,
        } => Choice {
            k: k_for_fraction(*k_fraction, n_m.max(1)),
            assumption: *assumption,
            inner_accuracy: f64::NAN,
        },
    };
    let queries: Vec<&[f64]> = test.rows().collect();
    let preds = predict_cells(&train, &queries, protocol.mode, protocol.metric, &[(choice.k, choice.assumption)])?;
    let labels: Vec<usize> = preds.iter().map(|p| p[0].label).collect();
    let rows: Vec<Vec<f64>> = preds.into_iter().map(|mut p| p.swap_remove(0).posteriors).collect();
    let acc = accuracy(&labels, test.labels())?;
    let err = mse(&rows, test.labels())?;
    Ok((choice, acc, err))
}

/// Repeated stratified cross test.
///
/// Repeat r draws its fold assignment from `rng.stream(r)`; fold f of that
/// repeat selects hyperparameters with `rng.stream(r).stream(f)`. Cells run
/// in parallel and are reported in (repeat, fold) order.
pub fn cross_test(data: &Dataset, name: &str, protocol: &Protocol, rng: &Rng) -> Result<EvalReport> {
    protocol.validate()?;
    let mut jobs = Vec::new();
    for r in 0..protocol.repeats {
        let repeat_rng = rng.stream(r as u64);
        let folds = stratified_folds(data, protocol.folds, &mut repeat_rng.clone())?;
        for (f, test_idx) in folds.folds.iter().enumerate() {
            jobs.push((r, f, folds.train_indices(f), test_idx.clone(), repeat_rng.stream(f as u64)));
        }
    }
    let cells = jobs
        .into_par_iter()
        .map(|(repeat, fold, train_idx, test_idx, mut fold_rng)| {
            let (choice, acc, mse) = evaluate_split(data, &train_idx, &test_idx, protocol, &mut fold_rng)?;
            Ok(FoldRecord {
                repeat,
                fold,
                acc,
                mse,
                chosen_k: protocol.mode.with_k(choice.k).k(),
                chosen_assumption: choice.assumption,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregates = Aggregates::from_records(&cells)?;
    Ok(EvalReport {
        config: ReportConfig {
            dataset: name.to_string(),
            n_samples: data.n_samples(),
            n_features: data.n_features(),
            n_classes: data.n_classes(),
            seed: rng.seed(),
            protocol: protocol.clone(),
        },
        cells,
        aggregates,
    })
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k_fraction: f64,
    pub assumption: Assumption,
    pub mean_acc: f64,
    pub mean_mse: f64,
}

/// Fixed-hyperparameter cross tests over every (k fraction, assumption)
/// pair, with the same folds for every pair. Rows are ordered by fraction,
/// then by the order of `assumptions`.
pub fn sweep(
    data: &Dataset,
    k_fractions: &[f64],
    assumptions: &[Assumption],
    protocol: &Protocol,
    rng: &Rng,
) -> Result<Vec<SweepRow>> {
    if k_fractions.is_empty() || assumptions.is_empty() {
        return Err(Error::invalid("sweep needs at least one k fraction and one assumption"));
    }
    if let Some(f) = k_fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::invalid(format!("k fraction {f} outside [0, 1]")));
    }
    let check = Protocol {
        assumptions: assumptions.to_vec(),
        selection: Selection::Fixed {
            k_fraction: k_fractions[0],
            assumption: assumptions[0],
        },
        ..protocol.clone()
    };
    check.validate()?;
    let pairs: Vec<(f64, Assumption)> = k_fractions
        .iter()
        .flat_map(|&f| assumptions.iter().map(move |&a| (f, a)))
        .collect();

    let mut jobs = Vec::new();
    for r in 0..protocol.repeats {
        let repeat_rng = rng.stream(r as u64);
        let folds = stratified_folds(data, protocol.folds, &mut repeat_rng.clone())?;
        for (f, test_idx) in folds.folds.iter().enumerate() {
            jobs.push((folds.train_indices(f), test_idx.clone(), f));
        }
    }
    // per job, per pair: (acc, mse)
    let per_job = jobs
        .into_par_iter()
        .map(|(train_idx, test_idx, _)| {
            let raw_train = data.subset(&train_idx);
            let scaler = Scaler::fit(&raw_train)?;
            let train = scaler.apply(&raw_train)?;
            let test = scaler.apply(&data.subset(&test_idx))?;
            let n_m = train.min_class_count().max(1);
            let cells: Vec<(usize, Assumption)> =
                pairs.iter().map(|&(f, a)| (k_for_fraction(f, n_m), a)).collect();
            let queries: Vec<&[f64]> = test.rows().collect();
            let preds = predict_cells(&train, &queries, protocol.mode, protocol.metric, &cells)?;
            (0..cells.len())
                .map(|c| {
                    let labels: Vec<usize> = preds.iter().map(|p| p[c].label).collect();
                    let rows: Vec<Vec<f64>> = preds.iter().map(|p| p[c].posteriors.clone()).collect();
                    Ok((accuracy(&labels, test.labels())?, mse(&rows, test.labels())?))
                })
                .collect::<Result<Vec<(f64, f64)>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(pairs
        .iter()
        .enumerate()
        .map(|(c, &(k_fraction, assumption))| {
            let acc: Vec<f64> = per_job.iter().map(|j| j[c].0).collect();
            let err: Vec<f64> = per_job.iter().map(|j| j[c].1).collect();
            SweepRow {
                k_fraction,
                assumption,
                mean_acc: mean(&acc),
                mean_mse: mean(&err),
            }
        })
        .collect())
}
