use lpmbc::eval::{accuracy, k_for_fraction, mse, SelectionGrid};
use lpmbc::lpm::LocalModel;
use lpmbc::verify::shift_invariance;
use lpmbc::{
    build_regions, kth_nearest_radius, predict, Assumption, Bandwidth, ClassifierConfig, Dataset, Metric,
    NeighborhoodMode, Region, Rng,
};
use proptest::prelude::*;

fn dataset(seed: u64, n: usize, d: usize, c: usize) -> Dataset {
    let mut rng = Rng::new(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.standard_normal()).collect()).collect();
    let labels: Vec<String> = (0..n).map(|i| format!("c{}", i % c)).collect();
    Dataset::from_rows(&rows, &labels).unwrap()
}

fn assumption(i: usize) -> Assumption {
    [Assumption::Lua, Assumption::LGA, Assumption::lca(Bandwidth::Unit), Assumption::lca(Bandwidth::Silverman)][i % 4]
}

fn mode(i: usize, k: usize) -> NeighborhoodMode {
    match i % 3 {
        0 => NeighborhoodMode::PerClass { k },
        1 => NeighborhoodMode::Shared { k },
        _ => NeighborhoodMode::Global,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posteriors_sum_to_one(seed in any::<u64>(), n in 6usize..40, d in 1usize..6, c in 2usize..4,
                             a in 0usize..4, m in 0usize..3, kf in 0.0f64..1.0) {
        let data = dataset(seed, n, d, c);
        let k = k_for_fraction(kf, data.min_class_count());
        let mode = mode(m, k);
        let a = if mode == NeighborhoodMode::Global && assumption(a) == Assumption::Lua { Assumption::LGA } else { assumption(a) };
        let config = ClassifierConfig::new(mode, a, Metric::Chebychev).unwrap();
        let mut rng = Rng::new(seed ^ 1);
        let q: Vec<f64> = (0..d).map(|_| 2.0 * rng.standard_normal()).collect();
        let p = predict(&data, &q, &config).unwrap();
        prop_assert!((p.posteriors.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.posteriors.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(p.label < c);
        prop_assert!(shift_invariance(&data, &q, &config, 123.0).unwrap());
    }

    #[test]
    fn regions_contain_their_members(seed in any::<u64>(), n in 4usize..40, d in 1usize..5, kf in 0.0f64..1.0, m in 0usize..2) {
        let data = dataset(seed, n, d, 2);
        let k = k_for_fraction(kf, data.min_class_count());
        let mut rng = Rng::new(seed ^ 2);
        let q: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let regions = build_regions(&data, &q, mode(m, k), Metric::Chebychev).unwrap();
        for (l, cr) in regions.iter().enumerate() {
            for &i in &cr.members {
                prop_assert_eq!(data.label(i), l);
                prop_assert!(cr.region.contains(data.row(i)));
            }
            // non-members of the class lie outside
            for i in (0..n).filter(|i| data.label(*i) == l && !cr.members.contains(i)) {
                prop_assert!(!cr.region.contains(data.row(i)));
            }
        }
        if let NeighborhoodMode::PerClass { .. } = mode(m, k) {
            prop_assert!(regions.iter().all(|cr| cr.count() >= k));
        }
    }

    #[test]
    fn kth_radius_is_monotone_in_k(seed in any::<u64>(), n in 2usize..30, d in 1usize..4) {
        let data = dataset(seed, n, d, 1.max(1));
        let pts: Vec<&[f64]> = data.rows().collect();
        let q = vec![0.0; d];
        let mut prev = 0.0;
        for k in 1..=n {
            let r = kth_nearest_radius(&pts, &q, k, Metric::Euclidean).unwrap();
            prop_assert!(r >= prev);
            prev = r;
        }
    }

    #[test]
    fn fitted_density_vanishes_outside(seed in any::<u64>(), d in 1usize..4, a in 0usize..4) {
        let mut rng = Rng::new(seed);
        let center: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let region = Region::hypercube(center.clone(), 0.5).unwrap();
        let members: Vec<Vec<f64>> = (0..4).map(|_| center.iter().map(|c| c + rng.uniform_in(-0.5, 0.5)).collect()).collect();
        let refs: Vec<&[f64]> = members.iter().map(Vec::as_slice).collect();
        let m = LocalModel::fit(assumption(a), region, &refs).unwrap();
        let mut outside = center.clone();
        outside[0] += 0.5 + rng.uniform_in(1e-6, 3.0);
        prop_assert_eq!(m.log_lpd(&outside).unwrap(), f64::NEG_INFINITY);
        let inside: Vec<f64> = center.iter().map(|c| c + rng.uniform_in(-0.49, 0.49)).collect();
        prop_assert!(m.log_lpd(&inside).unwrap().exp() >= 0.0);
    }

    #[test]
    fn selection_grid_is_sorted_unique_and_clamped(n_m in 1usize..500) {
        let g = SelectionGrid::from_min_class_count(n_m, vec![Assumption::Lua]).unwrap();
        prop_assert_eq!(g.k_values[0], 1);
        prop_assert_eq!(*g.k_values.last().unwrap(), n_m);
        prop_assert!(g.k_values.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(g.k_values.len() <= 11);
    }

    #[test]
    fn metrics_stay_in_unit_interval(seed in any::<u64>(), n in 1usize..50, c in 2usize..6) {
        let mut rng = Rng::new(seed);
        let truth: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        let preds: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        let rows: Vec<Vec<f64>> = (0..n).map(|_| {
            let raw: Vec<f64> = (0..c).map(|_| rng.uniform()).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        }).collect();
        let acc = accuracy(&preds, &truth).unwrap();
        let e = mse(&rows, &truth).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
        prop_assert!((0.0..=1.0).contains(&e));
        let one_hot: Vec<Vec<f64>> = truth.iter().map(|&t| (0..c).map(|l| if l == t { 1.0 } else { 0.0 }).collect()).collect();
        prop_assert_eq!(mse(&one_hot, &truth).unwrap(), 0.0);
    }
}
