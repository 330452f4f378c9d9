use lpmbc::data::{gen_synthetic, SyntheticSpec};
use lpmbc::eval::{cross_test, select_hyperparams, sweep, Protocol, SelectionGrid};
use lpmbc::{Assumption, Bandwidth, Dataset, Metric, NeighborhoodMode, Rng, Scaler};

/// Two unit-variance Gaussians with centers (0, 2.5) and (0, -2.5): Bayes
/// error about 0.6%.
fn separated_gaussians(seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..200 {
        let center = if i % 2 == 0 { 2.5 } else { -2.5 };
        rows.push(vec![rng.standard_normal(), center + rng.standard_normal()]);
        labels.push(if i % 2 == 0 { "1" } else { "2" });
    }
    let raw = Dataset::from_rows(&rows, &labels).unwrap();
    Scaler::fit(&raw).unwrap().apply(&raw).unwrap()
}

#[test]
fn gaussian_problem_does_not_select_kernel_model() {
    let mut simple = 0;
    for seed in 1..=20 {
        let train = separated_gaussians(seed);
        let grid = SelectionGrid::from_min_class_count(train.min_class_count(), Assumption::standard_set(Bandwidth::Silverman)).unwrap();
        let choice = select_hyperparams(&train, &grid, NeighborhoodMode::PerClass { k: 1 }, Metric::Chebychev, 4, &mut Rng::new(100 + seed)).unwrap();
        if matches!(choice.assumption, Assumption::Lua | Assumption::Lga { .. }) {
            simple += 1;
        }
    }
    assert!(simple >= 18, "simple models chosen on {simple} of 20 seeds");
}

const FRACTIONS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

#[test]
fn strong_dependence_favors_small_neighborhoods() {
    let protocol = Protocol { repeats: 2, ..Protocol::default() };
    let raw = gen_synthetic(&SyntheticSpec { n_per_class: 100, covariance_c: 2.0 }, &mut Rng::new(1)).unwrap();
    let rows = sweep(&raw, &FRACTIONS, &[Assumption::LGA], &protocol, &Rng::new(2)).unwrap();
    let small = rows.first().unwrap().mean_acc;
    let large = rows.last().unwrap().mean_acc;
    assert!(small > large, "k=0.1 N_m: {small}, k=N_m: {large}");
}

#[test]
fn independent_problem_suits_large_gaussian_neighborhoods() {
    let protocol = Protocol { repeats: 2, ..Protocol::default() };
    let raw = gen_synthetic(&SyntheticSpec { n_per_class: 100, covariance_c: 0.0 }, &mut Rng::new(3)).unwrap();
    let assumptions = Assumption::standard_set(Bandwidth::Silverman);
    let rows = sweep(&raw, &FRACTIONS, &assumptions, &protocol, &Rng::new(4)).unwrap();
    let best = rows.iter().map(|r| r.mean_acc).fold(0.0, f64::max);
    let lga_full = rows.iter().find(|r| r.k_fraction == 1.0 && r.assumption == Assumption::LGA).unwrap().mean_acc;
    assert!(best - lga_full <= 0.03, "best {best}, LGA at N_m {lga_full}");
}

#[test]
fn separable_data_is_learned_by_every_assumption() {
    let mut rng = Rng::new(11);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..200 {
        let side = if i % 2 == 0 { 1.0 } else { -1.0 };
        rows.push(vec![side * rng.uniform_in(0.5, 3.0), rng.uniform_in(-3.0, 3.0)]);
        labels.push(if side > 0.0 { "pos" } else { "neg" });
    }
    let data = Dataset::from_rows(&rows, &labels).unwrap();
    for a in Assumption::standard_set(Bandwidth::Silverman) {
        let protocol = Protocol { repeats: 2, assumptions: vec![a], ..Protocol::default() };
        let report = cross_test(&data, "separable", &protocol, &Rng::new(12)).unwrap();
        assert!(report.aggregates.mean_acc >= 0.95, "{a}: {}", report.aggregates.mean_acc);
    }
}
