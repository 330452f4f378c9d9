//! Distance metrics and the local region around a query point.
//!
//! A region is an axis-aligned hypercube centred on the query. Its half-width
//! is the distance to the k-th nearest training point, so under the
//! Chebychev metric the k nearest points are exactly the points inside it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Smallest half-width a bounded region may have. Duplicate points give a
/// k-th distance of zero, which would make the volume vanish.
pub const RADIUS_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Chebychev,
    Euclidean,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::invalid(format!(
                "distance between vectors of length {} and {}",
                a.len(),
                b.len()
            )));
        }
        Ok(self.distance_unchecked(a, b))
    }

    #[inline]
    pub(crate) fn distance_unchecked(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Chebychev => a
                .iter()
                .zip(b)
                .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs())),
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Chebychev => "chebychev",
            Metric::Euclidean => "euclidean",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chebychev" | "chebyshev" => Ok(Metric::Chebychev),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::invalid(format!("unknown metric '{other}'"))),
        }
    }
}

pub fn distance(metric: Metric, a: &[f64], b: &[f64]) -> Result<f64> {
    metric.distance(a, b)
}

/// Closed axis-aligned hypercube `[center - r, center + r]^d`, or the whole
/// space when unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    center: Vec<f64>,
    half_width: Option<f64>,
}

impl Region {
    /// Hypercube with the given half-width, floored at [`RADIUS_FLOOR`].
    pub fn hypercube(center: Vec<f64>, radius: f64) -> Result<Region> {
        if center.is_empty() {
            return Err(Error::invalid("region needs at least one dimension"));
        }
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("invalid region radius {radius}")));
        }
        Ok(Region {
            center,
            half_width: Some(radius.max(RADIUS_FLOOR)),
        })
    }

    pub fn whole_space(center: Vec<f64>) -> Region {
        Region {
            center,
            half_width: None,
        }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.half_width.is_some()
    }

    /// Half-width, `+inf` for the whole space.
    pub fn radius(&self) -> f64 {
        self.half_width.unwrap_or(f64::INFINITY)
    }

    /// `d * ln(2r)`; `+inf` for the whole space.
    pub fn log_volume(&self) -> f64 {
        match self.half_width {
            Some(r) => self.dim() as f64 * (2.0 * r).ln(),
            None => f64::INFINITY,
        }
    }

    /// Interval of feature `j`.
    pub fn bounds(&self, j: usize) -> (f64, f64) {
        match self.half_width {
            Some(r) => (self.center[j] - r, self.center[j] + r),
            None => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self.half_width {
            Some(r) => x.iter().zip(&self.center).all(|(v, c)| (v - c).abs() <= r),
            None => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NeighborhoodMode {
    /// One region per class holding that class's k nearest points.
    PerClass { k: usize },
    /// One region for all classes holding the k nearest points overall.
    Shared { k: usize },
    /// The whole sample space.
    Global,
}

impl NeighborhoodMode {
    pub fn k(&self) -> Option<usize> {
        match *self {
            NeighborhoodMode::PerClass { k } | NeighborhoodMode::Shared { k } => Some(k),
            NeighborhoodMode::Global => None,
        }
    }

    pub fn with_k(self, k: usize) -> Self {
        match self {
            NeighborhoodMode::PerClass { .. } => NeighborhoodMode::PerClass { k },
            NeighborhoodMode::Shared { .. } => NeighborhoodMode::Shared { k },
            NeighborhoodMode::Global => NeighborhoodMode::Global,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NeighborhoodMode::PerClass { .. } => "per-class",
            NeighborhoodMode::Shared { .. } => "shared",
            NeighborhoodMode::Global => "global",
        }
    }
}

/// Distance from `query` to its k-th nearest point (1-based `k`).
pub fn kth_nearest_radius(points: &[&[f64]], query: &[f64], k: usize, metric: Metric) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > points.len() {
        return Err(Error::Infeasible(format!(
            "k = {k} exceeds the {} available points",
            points.len()
        )));
    }
    let mut dists = points
        .iter()
        .map(|p| metric.distance(p, query))
        .collect::<Result<Vec<f64>>>()?;
    let (_, kth, _) = dists.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// Region of one class and the indices (into the training set) of that
/// class's samples inside it. `members.len()` is the k_l of the class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassRegion {
    pub region: Region,
    pub members: Vec<usize>,
}

impl ClassRegion {
    pub fn count(&self) -> usize {
        self.members.len()
    }
}

/// Distances from one query to every training point, sorted once and reused
/// for any neighborhood size.
#[derive(Debug, Clone)]
pub struct SortedNeighbors {
    query: Vec<f64>,
    /// (distance, index) over all points, ascending.
    all: Vec<(f64, usize)>,
    /// Same, split by class.
    by_class: Vec<Vec<(f64, usize)>>,
    class_names: Vec<String>,
}

impl SortedNeighbors {
    pub fn new(train: &Dataset, query: &[f64], metric: Metric) -> Result<Self> {
        if query.len() != train.n_features() {
            return Err(Error::invalid(format!(
                "query has {} features, training data has {}",
                query.len(),
                train.n_features()
            )));
        }
        let mut all: Vec<(f64, usize)> = train
            .rows()
            .enumerate()
            .map(|(i, row)| (metric.distance_unchecked(row, query), i))
            .collect();
        all.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut by_class = vec![Vec::new(); train.n_classes()];
        for &(dist, i) in &all {
            by_class[train.label(i)].push((dist, i));
        }
        Ok(Self {
            query: query.to_vec(),
            all,
            by_class,
            class_names: train.class_names().to_vec(),
        })
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        self.by_class.iter().map(Vec::len).collect()
    }

    pub fn regions(&self, mode: NeighborhoodMode) -> Result<Vec<ClassRegion>> {
        match mode {
            NeighborhoodMode::PerClass { k } => {
                if k == 0 {
                    return Err(Error::invalid("k must be at least 1"));
                }
                self.by_class
                    .iter()
                    .enumerate()
                    .map(|(class, sorted)| {
                        if k > sorted.len() {
                            return Err(Error::Infeasible(format!(
                                "k = {k} exceeds the {} samples of class '{}'",
                                sorted.len(),
                                self.class_names[class]
                            )));
                        }
                        let region = Region::hypercube(self.query.clone(), sorted[k - 1].0)?;
                        let members = within(sorted, region.radius());
                        Ok(ClassRegion { region, members })
                    })
                    .collect()
            }
            NeighborhoodMode::Shared { k } => {
                if k == 0 {
                    return Err(Error::invalid("k must be at least 1"));
                }
                if k > self.all.len() {
                    return Err(Error::Infeasible(format!(
                        "k = {k} exceeds the {} training samples",
                        self.all.len()
                    )));
                }
                let region = Region::hypercube(self.query.clone(), self.all[k - 1].0)?;
                let r = region.radius();
                Ok(self
                    .by_class
                    .iter()
                    .map(|sorted| ClassRegion {
                        region: region.clone(),
                        members: within(sorted, r),
                    })
                    .collect())
            }
            NeighborhoodMode::Global => Ok(self
                .by_class
                .iter()
                .map(|sorted| {
                    let mut members: Vec<usize> = sorted.iter().map(|&(_, i)| i).collect();
                    members.sort_unstable();
                    ClassRegion {
                        region: Region::whole_space(self.query.clone()),
                        members,
                    }
                })
                .collect()),
        }
    }
}

/// Indices with distance <= r from a distance-sorted list, ascending by index.
fn within(sorted: &[(f64, usize)], r: f64) -> Vec<usize> {
    let end = sorted.partition_point(|&(dist, _)| dist <= r);
    let mut members: Vec<usize> = sorted[..end].iter().map(|&(_, i)| i).collect();
    members.sort_unstable();
    members
}

/// Region and member set of every class around `query`.
///
/// Membership is geometric: all points at distance <= r belong to the
/// region, so k_l can exceed k when several points tie at the k-th distance.
pub fn build_regions(
    train: &Dataset,
    query: &[f64],
    mode: NeighborhoodMode,
    metric: Metric,
) -> Result<Vec<ClassRegion>> {
    SortedNeighbors::new(train, query, metric)?.regions(mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    #[test]
    fn metric_examples() {
        assert_eq!(distance(Metric::Chebychev, &[0.0, 0.0], &[1.0, 3.0]).unwrap(), 3.0);
        assert_eq!(distance(Metric::Chebychev, &[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert_eq!(distance(Metric::Euclidean, &[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert!(distance(Metric::Euclidean, &[0.0], &[3.0, 4.0]).is_err());
    }

    #[test]
    fn metric_parse() {
        assert_eq!("chebychev".parse::<Metric>().unwrap(), Metric::Chebychev);
        assert_eq!("Euclidean".parse::<Metric>().unwrap(), Metric::Euclidean);
        assert!("manhattan".parse::<Metric>().is_err());
    }

    proptest! {
        #[test]
        fn metric_axioms(a in prop::collection::vec(-1e3f64..1e3, 4), b in prop::collection::vec(-1e3f64..1e3, 4)) {
            for m in [Metric::Chebychev, Metric::Euclidean] {
                prop_assert_eq!(m.distance(&a, &a).unwrap(), 0.0);
                prop_assert_eq!(m.distance(&a, &b).unwrap(), m.distance(&b, &a).unwrap());
                prop_assert!(m.distance(&a, &b).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn kth_radius_examples() {
        let pts: Vec<Vec<f64>> = vec![vec![1.0], vec![2.0], vec![5.0]];
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        assert_eq!(kth_nearest_radius(&refs, &[0.0], 2, Metric::Chebychev).unwrap(), 2.0);
        assert_eq!(kth_nearest_radius(&refs, &[2.0], 1, Metric::Chebychev).unwrap(), 0.0);
        assert!(matches!(
            kth_nearest_radius(&refs, &[0.0], 4, Metric::Chebychev),
            Err(Error::Infeasible(_))
        ));
        assert!(kth_nearest_radius(&refs, &[0.0], 0, Metric::Chebychev).is_err());
    }

    #[test]
    fn kth_radius_matches_full_sort() {
        let mut rng = Rng::new(5);
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..3).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
            .collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let q = [0.1, -0.2, 0.3];
        for metric in [Metric::Chebychev, Metric::Euclidean] {
            let mut all: Vec<f64> = pts.iter().map(|p| metric.distance(p, &q).unwrap()).collect();
            all.sort_by(f64::total_cmp);
            assert_eq!(kth_nearest_radius(&refs, &q, 7, metric).unwrap(), all[6]);
        }
    }

    #[test]
    fn region_basics() {
        let r = Region::hypercube(vec![0.0, 0.0], 0.5).unwrap();
        assert!(r.contains(&[0.0, 0.0]));
        assert!(r.contains(&[0.5, -0.5]));
        assert!(!r.contains(&[0.5, 0.51]));
        assert!(r.log_volume().abs() < 1e-15);
        let zero = Region::hypercube(vec![1.0], 0.0).unwrap();
        assert_eq!(zero.radius(), RADIUS_FLOOR);
        assert!(zero.log_volume().is_finite());
        let g = Region::whole_space(vec![3.0]);
        assert!(g.contains(&[1e300]));
        assert_eq!(g.log_volume(), f64::INFINITY);
        assert!(Region::hypercube(vec![0.0], -1.0).is_err());
    }

    #[test]
    fn per_class_symmetric_tie() {
        let train = Dataset::from_rows(&[vec![-1.0], vec![1.0], vec![10.0]], &["A", "A", "B"]).unwrap();
        let regions = build_regions(&train, &[0.0], NeighborhoodMode::PerClass { k: 1 }, Metric::Chebychev).unwrap();
        assert_eq!(regions[0].region.radius(), 1.0);
        assert_eq!(regions[0].members, vec![0, 1]);
        assert_eq!(regions[1].region.radius(), 10.0);
        assert_eq!(regions[1].members, vec![2]);
    }

    #[test]
    fn shared_with_all_points_counts_whole_classes() {
        let train = Dataset::from_rows(
            &[vec![0.0], vec![1.0], vec![2.0], vec![7.0], vec![9.0]],
            &["a", "b", "a", "b", "b"],
        )
        .unwrap();
        let regions = build_regions(&train, &[3.0], NeighborhoodMode::Shared { k: 5 }, Metric::Chebychev).unwrap();
        assert_eq!(regions[0].count(), 2);
        assert_eq!(regions[1].count(), 3);
        let small = build_regions(&train, &[0.0], NeighborhoodMode::Shared { k: 1 }, Metric::Chebychev).unwrap();
        assert_eq!(small[0].count(), 1);
        assert_eq!(small[1].count(), 0);
    }

    #[test]
    fn global_mode_takes_every_sample() {
        let train = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], &["a", "b", "a"]).unwrap();
        let regions = build_regions(&train, &[0.5], NeighborhoodMode::Global, Metric::Chebychev).unwrap();
        assert_eq!(regions[0].members, vec![0, 2]);
        assert_eq!(regions[1].members, vec![1]);
        assert!(!regions[0].region.is_bounded());
    }

    #[test]
    fn infeasible_k_names_the_class() {
        let train = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], &["a", "rare", "a"]).unwrap();
        let err = build_regions(&train, &[0.5], NeighborhoodMode::PerClass { k: 2 }, Metric::Chebychev).unwrap_err();
        assert!(matches!(&err, Error::Infeasible(m) if m.contains("rare")), "{err}");
        assert!(build_regions(&train, &[0.5], NeighborhoodMode::Shared { k: 4 }, Metric::Chebychev).is_err());
        assert!(build_regions(&train, &[0.5, 1.0], NeighborhoodMode::Shared { k: 1 }, Metric::Chebychev).is_err());
    }

    fn random_train(rng: &mut Rng, n: usize, d: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.uniform_in(-2.0, 2.0)).collect()).collect();
        let labels: Vec<&str> = (0..n).map(|i| if i % 2 == 0 { "x" } else { "y" }).collect();
        Dataset::from_rows(&rows, &labels).unwrap()
    }

    #[test]
    fn per_class_matches_exhaustive_scan() {
        let mut rng = Rng::new(17);
        for _ in 0..50 {
            let train = random_train(&mut rng, 40, 2);
            let q = [rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0)];
            let regions = build_regions(&train, &q, NeighborhoodMode::PerClass { k: 5 }, Metric::Chebychev).unwrap();
            for (class, cr) in regions.iter().enumerate() {
                let r = cr.region.radius();
                let expected: Vec<usize> = (0..train.n_samples())
                    .filter(|&i| train.label(i) == class)
                    .filter(|&i| Metric::Chebychev.distance(train.row(i), &q).unwrap() <= r)
                    .collect();
                assert_eq!(cr.members, expected);
                assert_eq!(cr.count(), 5);
                for &i in &cr.members {
                    assert!(cr.region.contains(train.row(i)));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn radius_monotone_in_k(seed in any::<u64>(), n in 10usize..50) {
            let mut rng = Rng::new(seed);
            let train = random_train(&mut rng, n, 3);
            let q = [0.0, 0.5, -0.5];
            let nb = SortedNeighbors::new(&train, &q, Metric::Chebychev).unwrap();
            let mut prev = 0.0;
            for k in 1..=train.min_class_count() {
                let regions = nb.regions(NeighborhoodMode::PerClass { k }).unwrap();
                prop_assert!(regions[0].region.radius() >= prev);
                prev = regions[0].region.radius();
                for cr in &regions {
                    prop_assert!(cr.count() >= k);
                }
            }
            for k in 1..=n {
                let regions = nb.regions(NeighborhoodMode::Shared { k }).unwrap();
                let total: usize = regions.iter().map(ClassRegion::count).sum();
                prop_assert!(total >= k);
                for cr in &regions {
                    for &i in &cr.members {
                        prop_assert!(Metric::Chebychev.distance(train.row(i), &q).unwrap() <= cr.region.radius());
                    }
                }
            }
        }
    }
}
