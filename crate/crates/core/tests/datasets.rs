use std::path::PathBuf;

use lpmbc::data::{load_csv, CsvSchema};
use lpmbc::{stratified_folds, Rng};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn benchmark_shapes() {
    for (file, n, d, c) in [
        ("iris.csv", 150, 4, 3),
        ("wine.csv", 178, 13, 3),
        ("sonar.csv", 208, 60, 2),
        ("libras.csv", 360, 90, 15),
    ] {
        let ds = load_csv(data(file), &CsvSchema::default()).unwrap();
        assert_eq!((ds.n_samples(), ds.n_features(), ds.n_classes()), (n, d, c), "{file}");
    }
}

#[test]
fn iris_folds_hold_ten_per_class() {
    let ds = load_csv(data("iris.csv"), &CsvSchema::default()).unwrap();
    assert_eq!(ds.class_counts(), vec![50, 50, 50]);
    let folds = stratified_folds(&ds, 5, &mut Rng::new(7)).unwrap();
    for f in &folds.folds {
        let mut per_class = [0; 3];
        for &i in f {
            per_class[ds.label(i)] += 1;
        }
        assert_eq!(per_class, [10, 10, 10]);
    }
    assert!(folds.warnings.is_empty());
}
