#![allow(dead_code)]

use ppforest_core::{Dataset, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// The crabs data, parsed without the CSV reader of the companion crate.
pub fn crabs() -> Dataset {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/crabs.csv");
    let text = std::fs::read_to_string(path).expect("crabs.csv");
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let p = header.len() - 1;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        rows.push(cells[..p].iter().map(|c| c.parse::<f64>().unwrap()).collect::<Vec<_>>());
        labels.push(cells[p].to_string());
    }
    let names = header[..p].iter().map(|s| s.to_string()).collect();
    Dataset::from_labels(Matrix::from_rows(&rows).unwrap(), &labels, names).unwrap()
}

pub fn is_blue(d: &Dataset, class: usize) -> bool {
    d.class_names()[class].starts_with("Blue")
}

/// Gaussian clusters; `centres[c]` is the mean of class `c`.
pub fn clusters(centres: &[Vec<f64>], per_class: usize, sd: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, sd).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, mu) in centres.iter().enumerate() {
        for _ in 0..per_class {
            rows.push(mu.iter().map(|m| m + z.sample(&mut rng)).collect::<Vec<_>>());
            labels.push(format!("c{c}"));
        }
    }
    let names = (0..centres[0].len()).map(|j| format!("x{j}")).collect();
    Dataset::from_labels(Matrix::from_rows(&rows).unwrap(), &labels, names).unwrap()
}

/// Uniform cases in `[0, 1]^p` labelled by `x0 + x1 > 1`, with a margin.
pub fn oblique(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    while rows.len() < n {
        let x: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        let s = x[0] + x[1] - 1.0;
        if s.abs() < 0.02 {
            continue;
        }
        labels.push(if s > 0.0 { "above" } else { "below" });
        rows.push(x);
    }
    let names = (0..p).map(|j| format!("x{j}")).collect();
    Dataset::from_labels(Matrix::from_rows(&rows).unwrap(), &labels, names).unwrap()
}
