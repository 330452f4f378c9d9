//! Oracle suites for the invariants of the rule.
//!
//! Every suite draws seeded random instances, runs the library on them and
//! compares with an independently coded reference: plain majority vote,
//! textbook Gaussian naive Bayes, Gaussian-weighted vote, nearest local mean,
//! numerical integration and cell-by-cell table checks.

use std::fmt;

use crate::classifier::{predict, ClassifierConfig, Variant};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::lpm::{verify_local_independence, Assumption, Bandwidth, IndexBox, LocalModel};
use crate::neighborhood::Region;
use crate::rng::Rng;

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub passed: usize,
    /// Up to ten failure descriptions.
    pub failures: Vec<String>,
    /// Extra information, such as how many candidates were screened out.
    pub note: String,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        SuiteResult {
            name,
            cases: 0,
            passed: 0,
            failures: Vec::new(),
            note: String::new(),
        }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if ok {
            self.passed += 1;
        } else if self.failures.len() < 10 {
            self.failures.push(what());
        }
    }

    pub fn ok(&self) -> bool {
        self.cases > 0 && self.passed == self.cases
    }
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.ok() { "PASS" } else { "FAIL" };
        write!(f, "{status} {} ({}/{})", self.name, self.passed, self.cases)?;
        if !self.note.is_empty() {
            write!(f, " [{}]", self.note)?;
        }
        for fail in &self.failures {
            write!(f, "\n    {fail}")?;
        }
        Ok(())
    }
}

fn chebychev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn first_max(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

fn posterior_sum_ok(p: &[f64]) -> bool {
    (p.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

/// Random training set with every class present; `draw(rng, class, feature)`.
fn random_train(rng: &mut Rng, n: usize, d: usize, c: usize, mut draw: impl FnMut(&mut Rng, usize, usize) -> f64) -> Dataset {
    let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    rng.shuffle(&mut labels);
    let features = labels.iter().flat_map(|&l| (0..d).map(|j| draw(rng, l, j)).collect::<Vec<_>>()).collect();
    Dataset::new(
        features,
        d,
        labels,
        (0..c).map(|l| format!("c{l}")).collect(),
        (1..=d).map(|j| format!("f{j}")).collect(),
    )
    .expect("generated data is valid")
}

/// Indices sorted by Chebychev distance to `q`, with the distances.
fn sorted_by_distance(train: &Dataset, q: &[f64], subset: impl Fn(usize) -> bool) -> Vec<(f64, usize)> {
    let mut v: Vec<(f64, usize)> = (0..train.n_samples())
        .filter(|&i| subset(i))
        .map(|i| (chebychev(train.row(i), q), i))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

/// The k nearest must be separated from the (k+1)-th.
fn tie_free(sorted: &[(f64, usize)], k: usize) -> bool {
    sorted.len() <= k || sorted[k].0 > sorted[k - 1].0 * (1.0 + 1e-9)
}

/// Shared-region uniform model against a plain majority vote.
pub fn voting_knn_suite(rng: &Rng, instances: usize) -> Result<SuiteResult> {
    let mut out = SuiteResult::new("voting-knn equivalence");
    let mut screened = 0;
    let mut i = 0u64;
    while out.cases < instances {
        let mut r = rng.stream(i);
        i += 1;
        let (n, d, c) = (10 + r.below(50), 1 + r.below(5), 2 + r.below(3));
        let train = random_train(&mut r, n, d, c, |r, _, _| r.uniform());
        let q: Vec<f64> = (0..d).map(|_| r.uniform()).collect();
        let k = 1 + r.below(n);
        let sorted = sorted_by_distance(&train, &q, |_| true);
        if !tie_free(&sorted, k) {
            screened += 1;
            continue;
        }
        let mut votes = vec![0.0; c];
        for &(_, idx) in &sorted[..k] {
            votes[train.label(idx)] += 1.0;
        }
        let expected = first_max(&votes);
        let p = predict(&train, &q, &Variant::VotingKnn.config(k)?)?;
        out.record(p.label == expected && posterior_sum_ok(&p.posteriors), || {
            format!("instance {}: n={n} d={d} k={k} got {} expected {expected}", i - 1, p.label)
        });
    }
    out.note = format!("{screened} tied candidates skipped");
    Ok(out)
}

/// Whole-space Gaussian model against textbook Gaussian naive Bayes with
/// ln(class count) priors. Scores and posteriors must agree to 1e-9.
pub fn gaussian_nb_suite(rng: &Rng, instances: usize) -> Result<SuiteResult> {
    let mut out = SuiteResult::new("gaussian-nb equivalence");
    for i in 0..instances as u64 {
        let mut r = rng.stream(i);
        let (n, d, c) = (10 + r.below(60), 1 + r.below(6), 2 + r.below(3));
        let offsets: Vec<f64> = (0..c).map(|_| r.uniform_in(-2.0, 2.0)).collect();
        let spreads: Vec<f64> = (0..c).map(|_| r.uniform_in(0.3, 2.0)).collect();
        let train = random_train(&mut r, n, d, c, |r, l, _| offsets[l] + spreads[l] * r.standard_normal());
        let q: Vec<f64> = (0..d).map(|_| r.uniform_in(-3.0, 3.0)).collect();

        let mut scores = vec![0.0; c];
        for (l, s) in scores.iter_mut().enumerate() {
            let rows: Vec<&[f64]> = (0..n).filter(|&j| train.label(j) == l).map(|j| train.row(j)).collect();
            let m = rows.len() as f64;
            *s = m.ln();
            for j in 0..d {
                let mu = rows.iter().map(|x| x[j]).sum::<f64>() / m;
                let var = (rows.iter().map(|x| (x[j] - mu).powi(2)).sum::<f64>() / m).max(1e-6);
                *s += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (q[j] - mu).powi(2) / (2.0 * var);
            }
        }
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - top).exp()).sum();
        let post: Vec<f64> = scores.iter().map(|s| (s - top).exp() / z).collect();
        let expected = first_max(&post);

        let p = predict(&train, &q, &Variant::GaussianNb.config(1)?)?;
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        out.record(
            p.label == expected && close(&p.log_scores, &scores) && close(&p.posteriors, &post) && posterior_sum_ok(&p.posteriors),
            || format!("instance {i}: got {:?} expected {:?}", p.log_scores, scores),
        );
    }
    Ok(out)
}

fn phi(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

/// Shared-region unit-bandwidth kernel model against a vote weighted by
/// exp(-|x - x_i|² / 2).
///
/// The kernel model is renormalized to the region, and that factor depends
/// on where each class's members sit. An instance counts as tie-free when
/// the weighted vote's winning log margin exceeds the largest possible
/// normalizer gap, ln(1 / smallest in-region kernel mass); on those the
/// labels must agree.
pub fn dw_knn_suite(rng: &Rng, instances: usize) -> Result<SuiteResult> {
    let mut out = SuiteResult::new("dw-knn equivalence");
    let (mut screened, mut screened_agree) = (0, 0);
    let mut i = 0u64;
    while out.cases < instances {
        let mut r = rng.stream(i);
        i += 1;
        let (n, d, c) = (10 + r.below(40), 1 + r.below(3), 2 + r.below(2));
        let train = random_train(&mut r, n, d, c, |r, _, _| r.uniform_in(0.0, 10.0));
        let q: Vec<f64> = (0..d).map(|_| r.uniform_in(0.0, 10.0)).collect();
        let k = 1 + r.below(n);
        let sorted = sorted_by_distance(&train, &q, |_| true);
        if !tie_free(&sorted, k) {
            continue;
        }
        let radius = sorted[k - 1].0.max(crate::neighborhood::RADIUS_FLOOR);
        let members: Vec<usize> = sorted.iter().filter(|(dist, _)| *dist <= radius).map(|&(_, j)| j).collect();

        let mut weight = vec![0.0; c];
        let mut min_mass = 1.0f64;
        for &j in &members {
            let x = train.row(j);
            let sq: f64 = x.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum();
            weight[train.label(j)] += (-0.5 * sq).exp();
            let mass: f64 = (0..d).map(|t| phi(q[t] + radius - x[t]) - phi(q[t] - radius - x[t])).product();
            min_mass = min_mass.min(mass);
        }
        let expected = first_max(&weight);
        let mut sorted_w = weight.clone();
        sorted_w.sort_by(|a, b| b.total_cmp(a));
        let margin = (sorted_w[0] / sorted_w[1]).ln();

        let p = predict(&train, &q, &Variant::DwKnn.config(k)?)?;
        if margin <= -min_mass.ln() {
            screened += 1;
            if p.label == expected {
                screened_agree += 1;
            }
            continue;
        }
        out.record(p.label == expected && posterior_sum_ok(&p.posteriors), || {
            format!("instance {}: n={n} d={d} k={k} got {} expected {expected}", i - 1, p.label)
        });
    }
    out.note = format!("{screened} near-tie candidates screened, {screened_agree} of them agree anyway");
    Ok(out)
}

/// Per-class regions with the identity-covariance Gaussian against the
/// nearest local mean, on well separated classes.
pub fn local_mean_suite(rng: &Rng, instances: usize) -> Result<SuiteResult> {
    let mut out = SuiteResult::new("local-mean equivalence");
    let mut i = 0u64;
    while out.cases < instances {
        let mut r = rng.stream(i);
        i += 1;
        let (d, c) = (1 + r.below(4), 2 + r.below(3));
        let n = c * (5 + r.below(20));
        let centers: Vec<Vec<f64>> = (0..c).map(|l| (0..d).map(|j| if j == 0 { 6.0 * l as f64 } else { r.uniform_in(-1.0, 1.0) }).collect()).collect();
        let train = random_train(&mut r, n, d, c, |r, l, j| centers[l][j] + r.standard_normal());
        let target = r.below(c);
        let q: Vec<f64> = centers[target].iter().map(|v| v + r.uniform_in(-1.0, 1.0)).collect();
        let k = 1 + r.below(train.min_class_count());

        let mut dist2 = vec![0.0; c];
        let mut tied = false;
        for (l, dl) in dist2.iter_mut().enumerate() {
            let sorted = sorted_by_distance(&train, &q, |s| train.label(s) == l);
            tied |= !tie_free(&sorted, k);
            let mut mu = vec![0.0; d];
            for &(_, s) in &sorted[..k] {
                for (m, v) in mu.iter_mut().zip(train.row(s)) {
                    *m += v / k as f64;
                }
            }
            *dl = mu.iter().zip(&q).map(|(m, x)| (m - x).powi(2)).sum();
        }
        if tied {
            continue;
        }
        let neg: Vec<f64> = dist2.iter().map(|v| -v).collect();
        let expected = first_max(&neg);
        let p = predict(&train, &q, &Variant::LocalMean.config(k)?)?;
        out.record(p.label == expected && posterior_sum_ok(&p.posteriors), || {
            format!("instance {}: k={k} got {} expected {expected}", i - 1, p.label)
        });
    }
    Ok(out)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            loop {
                let (mut p0, mut p1) = (1.0, x);
                for m in 2..=n {
                    let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    let (mut p0, mut p1) = (1.0, x);
                    for m in 2..=n {
                        let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    return (x, 2.0 / ((1.0 - x * x) * dp * dp));
                }
            }
        })
        .collect()
}

/// Composite Gauss-Legendre rule over [lo, hi]: `panels` panels of 8 nodes.
fn composite_nodes(lo: f64, hi: f64, panels: usize, gl: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let w = (hi - lo) / panels as f64;
    (0..panels)
        .flat_map(|p| {
            let a = lo + p as f64 * w;
            gl.iter().map(move |&(x, wt)| (a + 0.5 * w * (x + 1.0), 0.5 * w * wt))
        })
        .collect()
}

/// Smallest length scale of a fitted model, which sets the panel width.
fn model_scale(model: &LocalModel) -> f64 {
    let r = model.region().radius();
    let s = match (model.variance(), model.bandwidth()) {
        (Some(v), _) => v.iter().map(|v| v.sqrt()).fold(f64::INFINITY, f64::min),
        (_, Some(h)) => h.iter().copied().fold(f64::INFINITY, f64::min),
        _ => r,
    };
    s.min(r)
}

fn random_fit(r: &mut Rng, d: usize, assumption: Assumption) -> Result<LocalModel> {
    let center: Vec<f64> = (0..d).map(|_| r.uniform_in(-2.0, 2.0)).collect();
    let radius = r.uniform_in(0.3, 2.5);
    let region = Region::hypercube(center.clone(), radius)?;
    let k = 3 + r.below(10);
    let members: Vec<Vec<f64>> = (0..k)
        .map(|_| center.iter().map(|c| c + r.uniform_in(-radius, radius)).collect())
        .collect();
    let refs: Vec<&[f64]> = members.iter().map(Vec::as_slice).collect();
    LocalModel::fit(assumption, region, &refs)
}

/// Every fitted model integrates to one over its region: tensor-product
/// Gauss-Legendre quadrature for d <= 3 (tolerance 1e-4), Monte Carlo with
/// 4*10^5 uniform points and a five standard error band above that. The
/// wide band keeps the false alarm rate low across the whole suite.
pub fn unitarity_suite(rng: &Rng, fits: usize) -> Result<SuiteResult> {
    let mut out = SuiteResult::new("unitarity");
    let gl = gauss_legendre(8);
    let assumptions = [
        Assumption::Lua,
        Assumption::LGA,
        Assumption::lca(Bandwidth::Unit),
        Assumption::lca(Bandwidth::Silverman),
    ];
    for i in 0..fits as u64 {
        let mut r = rng.stream(i);
        let d = 1 + r.below(5);
        let assumption = assumptions[i as usize % assumptions.len()];
        let model = random_fit(&mut r, d, assumption)?;
        let region = model.region();
        let eval = |x: &[f64]| model.log_lpd(x).map(f64::exp);
        if d <= 3 {
            let panels = ((2.0 * region.radius() / model_scale(&model)).ceil() as usize).clamp(2, [400, 60, 16][d - 1]);
            let axes: Vec<Vec<(f64, f64)>> = (0..d)
                .map(|j| {
                    let (lo, hi) = region.bounds(j);
                    composite_nodes(lo, hi, panels, &gl)
                })
                .collect();
            let mut total = 0.0;
            let mut idx = vec![0usize; d];
            let mut x = vec![0.0; d];
            'grid: loop {
                let mut w = 1.0;
                for j in 0..d {
                    x[j] = axes[j][idx[j]].0;
                    w *= axes[j][idx[j]].1;
                }
                total += w * eval(&x)?;
                for j in 0..d {
                    idx[j] += 1;
                    if idx[j] < axes[j].len() {
                        continue 'grid;
                    }
                    idx[j] = 0;
                }
                break;
            }
            out.record((total - 1.0).abs() <= 1e-4, || format!("fit {i}: {assumption} d={d} integral {total}"));
        } else {
            let n = 400_000;
            let volume = region.log_volume().exp();
            let (mut s1, mut s2) = (0.0, 0.0);
            let mut x = vec![0.0; d];
            for _ in 0..n {
                for (j, xj) in x.iter_mut().enumerate() {
                    let (lo, hi) = region.bounds(j);
                    *xj = r.uniform_in(lo, hi);
                }
                let v = volume * eval(&x)?;
                s1 += v;
                s2 += v * v;
            }
            let mean = s1 / n as f64;
            let se = ((s2 / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
            out.record((mean - 1.0).abs() <= 5.0 * se.max(1e-12), || {
                format!("fit {i}: {assumption} d={d} estimate {mean} +- {se}")
            });
        }
    }
    Ok(out)
}

fn random_marginal(r: &mut Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| r.uniform_in(0.05, 1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn random_box(r: &mut Rng, rows: usize, cols: usize) -> IndexBox {
    let a = r.below(rows);
    let b = a + 1 + r.below(rows - a);
    let c = r.below(cols);
    let e = c + 1 + r.below(cols - c);
    IndexBox { rows: a..b, cols: c..e }
}

/// Product joints stay independent on random boxes; joints with a
/// mass-preserving dependence perturbation are rejected on the full table.
pub fn independence_suite(rng: &Rng, products: usize, dependent: usize) -> Result<SuiteResult> {
    let mut out = SuiteResult::new("local independence");
    for i in 0..products as u64 {
        let mut r = rng.stream(i);
        let (nr, nc) = (2 + r.below(7), 2 + r.below(7));
        let p = random_marginal(&mut r, nr);
        let q = random_marginal(&mut r, nc);
        let mut joint: Vec<Vec<f64>> = p.iter().map(|a| q.iter().map(|b| a * b).collect()).collect();
        let total: f64 = joint.iter().flatten().sum();
        joint.iter_mut().flatten().for_each(|v| *v /= total);
        let b = random_box(&mut r, nr, nc);
        let ok = verify_local_independence(&joint, &b)?;
        out.record(ok, || format!("product joint {i} {nr}x{nc} box {b:?} reported dependent"));
    }
    for i in 0..dependent as u64 {
        let mut r = rng.stream(1_000_000 + i);
        let (nr, nc) = (2 + r.below(7), 2 + r.below(7));
        let p = random_marginal(&mut r, nr);
        let q = random_marginal(&mut r, nc);
        let mut joint: Vec<Vec<f64>> = p.iter().map(|a| q.iter().map(|b| a * b).collect()).collect();
        // moves mass along a 2x2 cycle: marginals are unchanged but the
        // table is no longer their product
        let eps = 0.5 * joint[0][1].min(joint[1][0]);
        joint[0][0] += eps;
        joint[1][1] += eps;
        joint[0][1] -= eps;
        joint[1][0] -= eps;
        let total: f64 = joint.iter().flatten().sum();
        joint.iter_mut().flatten().for_each(|v| *v /= total);
        let full = IndexBox { rows: 0..nr, cols: 0..nc };
        let ok = !verify_local_independence(&joint, &full)?;
        out.record(ok, || format!("dependent joint {i} {nr}x{nc} reported independent"));
    }
    Ok(out)
}

/// Every suite at its standard size.
pub fn run_all(seed: u64) -> Result<Vec<SuiteResult>> {
    let rng = Rng::new(seed);
    Ok(vec![
        voting_knn_suite(&rng.stream(1), 200)?,
        gaussian_nb_suite(&rng.stream(2), 200)?,
        dw_knn_suite(&rng.stream(3), 200)?,
        local_mean_suite(&rng.stream(4), 100)?,
        unitarity_suite(&rng.stream(5), 300)?,
        independence_suite(&rng.stream(6), 200, 50)?,
    ])
}

/// Posteriors from the same scores shifted by a constant.
pub fn shift_invariance(train: &Dataset, query: &[f64], config: &ClassifierConfig, shift: f64) -> Result<bool> {
    let p = predict(train, query, config)?;
    let shifted: Vec<f64> = p.log_scores.iter().map(|s| s + shift).collect();
    let q = crate::classifier::posteriors(&shifted);
    Ok(match q {
        Some(q) => first_max(&q) == p.label && q.iter().zip(&p.posteriors).all(|(a, b)| (a - b).abs() <= 1e-12),
        None => p.prior_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighborhood::{Metric, NeighborhoodMode};

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let gl = gauss_legendre(8);
        let w: f64 = gl.iter().map(|p| p.1).sum();
        assert!((w - 2.0).abs() < 1e-13);
        // exact through degree 15
        let x14: f64 = gl.iter().map(|(x, w)| w * x.powi(14)).sum();
        assert!((x14 - 2.0 / 15.0).abs() < 1e-13);
    }

    #[test]
    fn small_suites_pass() {
        let rng = Rng::new(99);
        for s in [
            voting_knn_suite(&rng.stream(1), 20).unwrap(),
            gaussian_nb_suite(&rng.stream(2), 20).unwrap(),
            dw_knn_suite(&rng.stream(3), 20).unwrap(),
            local_mean_suite(&rng.stream(4), 10).unwrap(),
            unitarity_suite(&rng.stream(5), 16).unwrap(),
            independence_suite(&rng.stream(6), 20, 5).unwrap(),
        ] {
            assert!(s.ok(), "{s}");
        }
    }

    #[test]
    fn constant_shift_keeps_decision() {
        let train = Dataset::from_rows(&[vec![0.0], vec![0.5], vec![2.0], vec![2.4]], &["a", "a", "b", "b"]).unwrap();
        let config = ClassifierConfig::new(NeighborhoodMode::PerClass { k: 2 }, Assumption::LGA, Metric::Chebychev).unwrap();
        for shift in [-1e3, -5.0, 0.0, 7.0, 1e3] {
            assert!(shift_invariance(&train, &[1.0], &config, shift).unwrap());
        }
    }
}
