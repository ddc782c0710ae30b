use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ensemble::VoteMatrix;
use crate::matrix::Matrix;

/// Vertices of a regular `(G-1)`-simplex centred at the origin with unit
/// circumradius, one row per class.
///
/// Built from the Helmert basis of the plane `Σ v = 0`, so for `G = 3` it is
/// the usual equilateral ternary triangle.
pub fn simplex_vertices(g: usize) -> Matrix {
    let dims = g.saturating_sub(1);
    let mut v = Matrix::zeros(g, dims);
    if g < 2 {
        return v;
    }
    let scale = libm::sqrt(g as f64 / dims as f64);
    for k in 1..g {
        // h_k = (1, …, 1, −k, 0, …) / √(k(k+1)), k ones
        let norm = libm::sqrt((k * (k + 1)) as f64);
        for c in 0..k {
            v[(c, k - 1)] = scale / norm;
        }
        v[(k, k - 1)] = -scale * k as f64 / norm;
    }
    v
}

/// Barycentric image of one vote row.
pub fn simplex_point(vertices: &Matrix, votes: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; vertices.cols()];
    for (c, w) in votes.iter().enumerate() {
        for (o, v) in out.iter_mut().zip(vertices.row(c)) {
            *o += w * v;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexCoords {
    /// `n × (G-1)`, `None` for cases never out-of-bag.
    pub coords: Vec<Option<Vec<f64>>>,
    /// `G × (G-1)`.
    pub vertices: Vec<Vec<f64>>,
}

pub fn simplex_coords(v: &VoteMatrix) -> SimplexCoords {
    let vertices = simplex_vertices(v.n_classes());
    let coords = (0..v.n_cases()).map(|i| v.row(i).map(|r| simplex_point(&vertices, r))).collect();
    SimplexCoords { coords, vertices: vertices.to_nested() }
}
