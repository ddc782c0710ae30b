mod common;

use ppforest_core::{standardize, stratified_bootstrap, BootstrapKind, BootstrapRecord, Dataset, Matrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dataset() -> impl Strategy<Value = Dataset> {
    (2usize..6, 1usize..5, 2usize..5).prop_flat_map(|(per_class, p, g)| {
        let n = per_class * g;
        (prop::collection::vec(-1e4f64..1e4, n * p), Just((n, p, g)))
    })
    .prop_filter_map("columns need spread", |(vals, (n, p, g))| {
        let labels: Vec<String> = (0..n).map(|i| format!("class-{}", (i * 7 + 3) % g)).collect();
        let m = Matrix::from_vec(n, p, vals).ok()?;
        let d = Dataset::from_labels(m, &labels, (0..p).map(|j| format!("v{j}")).collect()).ok()?;
        standardize(&d).ok()?;
        Some(d)
    })
}

proptest! {
    #[test]
    fn standardize_round_trips(d in dataset()) {
        let (s, params) = standardize(&d).unwrap();
        let back = params.invert(s.features()).unwrap();
        for i in 0..d.n() {
            for j in 0..d.p() {
                let (orig, got) = (d.features()[(i, j)], back[(i, j)]);
                prop_assert!((orig - got).abs() <= 1e-9 * orig.abs().max(1.0), "{orig} vs {got}");
            }
        }
    }

    #[test]
    fn class_encoding_round_trips(labels in prop::collection::vec("[a-c]{1,2}", 2..30)) {
        let distinct: std::collections::BTreeSet<_> = labels.iter().collect();
        prop_assume!(distinct.len() >= 2);
        let n = labels.len();
        let m = Matrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        let d = Dataset::from_labels(m, &labels, vec!["x".into()]).unwrap();
        for (i, l) in labels.iter().enumerate() {
            prop_assert_eq!(&d.class_names()[d.labels()[i]], l);
        }
        // first-appearance order
        let mut seen = Vec::new();
        for l in &labels {
            if !seen.contains(l) {
                seen.push(l.clone());
            }
        }
        prop_assert_eq!(d.class_names(), &seen[..]);
    }

    #[test]
    fn bootstrap_partitions_cases(d in dataset(), seed in any::<u64>(), plain in any::<bool>()) {
        let kind = if plain { BootstrapKind::Plain } else { BootstrapKind::Stratified };
        let b = BootstrapRecord::draw(&d, kind, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(b.in_bag.len(), d.n());
        let distinct = b.in_bag_distinct();
        let mut all: Vec<usize> = distinct.iter().chain(&b.oob).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..d.n()).collect::<Vec<_>>());
        if !plain {
            for (c, members) in d.class_members().iter().enumerate() {
                let drawn = b.in_bag.iter().filter(|&&i| d.labels()[i] == c).count();
                prop_assert_eq!(drawn, members.len());
            }
        }
    }
}

#[test]
fn crabs_shape_and_standardized_moments() {
    let d = common::crabs();
    assert_eq!((d.n(), d.p(), d.n_classes()), (200, 5, 4));
    assert_eq!(d.var_names(), ["FL", "RW", "CL", "CW", "BD"]);
    let (s, _) = standardize(&d).unwrap();
    let fl = s.features().column(0);
    let mean = fl.iter().sum::<f64>() / 200.0;
    let var = fl.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 199.0;
    assert!(mean.abs() < 1e-12 && (var.sqrt() - 1.0).abs() < 1e-12);
}

#[test]
fn mean_oob_size_is_near_n_over_e() {
    let d = common::crabs();
    let total: usize = (0..1000).map(|seed| stratified_bootstrap(&d, seed).oob.len()).sum();
    let mean = total as f64 / 1000.0;
    assert!((mean - 200.0 * (-1.0f64).exp()).abs() <= 5.0, "mean |oob| = {mean}");
    assert_eq!(stratified_bootstrap(&d, 9), stratified_bootstrap(&d, 9));
}
