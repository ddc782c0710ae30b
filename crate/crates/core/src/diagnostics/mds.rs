use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensemble::ProximityMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::stream_rng;

/// How proximities become dissimilarities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dissimilarity {
    /// `1 − prox`.
    #[default]
    OneMinus,
    /// `√(1 − prox)`.
    SqrtOneMinus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdsEmbedding {
    /// `n × dims`, columns in decreasing eigenvalue order.
    pub coords: Vec<Vec<f64>>,
    /// Eigenvalues of the double-centred matrix, descending. All `n` of them
    /// for the dense solver; the leading block only for large inputs.
    pub eigenvalues: Vec<f64>,
    pub dims: usize,
    pub requested_dims: usize,
    /// Eigenvalues below zero (non-Euclidean part, truncated).
    pub negative_eigenvalues: usize,
    pub warning: Option<String>,
}

/// Above this size the leading eigenpairs come from subspace iteration.
pub const DENSE_EIGEN_MAX_N: usize = 1000;

/// Classical (Torgerson) scaling of a symmetric dissimilarity matrix.
pub fn classical_mds(dissim: &Matrix, d_out: usize) -> Result<MdsEmbedding> {
    let n = dissim.rows();
    if dissim.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: dissim.cols() });
    }
    if n < 2 || d_out == 0 || d_out > n - 1 {
        return Err(Error::InvalidConfig(alloc::format!(
            "output dimension must be in 1..={}, got {d_out}",
            n.saturating_sub(1)
        )));
    }
    // B = −½ J D² J
    let mut b = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let d = dissim[(i, j)];
            b[(i, j)] = -0.5 * d * d;
        }
    }
    let row_means: Vec<f64> = (0..n).map(|i| b.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] += grand - row_means[i] - row_means[j];
        }
    }
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = avg;
            b[(j, i)] = avg;
        }
    }

    let (values, vectors) = if n <= DENSE_EIGEN_MAX_N {
        dense_eigenpairs(b)
    } else {
        leading_eigenpairs(&b, d_out)
    };
    let scale = values.first().map_or(0.0, |v| v.abs()).max(f64::MIN_POSITIVE);
    let tol = 1e-10 * scale;
    let positive = values.iter().take_while(|&&v| v > tol).count();
    let negative_eigenvalues = values.iter().filter(|&&v| v < -tol).count();
    let dims = d_out.min(positive);
    let warning = (dims < d_out).then(|| {
        alloc::format!("only {positive} positive eigenvalues; returning {dims} of {d_out} requested dimensions")
    });

    let mut coords = vec![vec![0.0; dims]; n];
    for c in 0..dims {
        let s = libm::sqrt(values[c]);
        let col = &vectors[c];
        let mean = col.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            coords[i][c] = (col[i] - mean) * s;
        }
    }
    Ok(MdsEmbedding {
        coords,
        eigenvalues: values,
        dims,
        requested_dims: d_out,
        negative_eigenvalues,
        warning,
    })
}

/// Classical scaling of forest proximities.
pub fn mds_embed(pm: &ProximityMatrix, d_out: usize, kind: Dissimilarity) -> Result<MdsEmbedding> {
    let n = pm.n();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let gap = (1.0 - pm.get(i, j)).max(0.0);
            d[(i, j)] = match kind {
                Dissimilarity::OneMinus => gap,
                Dissimilarity::SqrtOneMinus => libm::sqrt(gap),
            };
        }
    }
    classical_mds(&d, d_out)
}

/// All eigenpairs, descending by eigenvalue; vectors as columns.
fn dense_eigenpairs(b: DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
    (values, vectors)
}

/// Leading eigenpairs of a symmetric matrix by block subspace iteration with
/// Rayleigh–Ritz extraction.
fn leading_eigenpairs(b: &DMatrix<f64>, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = b.nrows();
    let block = (k + 10).min(n);
    let mut rng = stream_rng(0x6d64_735f, 0);
    let mut q = DMatrix::<f64>::from_fn(n, block, |_, _| rng.random_range(-1.0..1.0));
    q = q.qr().q();
    let mut prev: Vec<f64> = vec![f64::INFINITY; k];
    let mut ritz = (Vec::new(), Vec::new());
    for _ in 0..2000 {
        let z = b * &q;
        q = z.qr().q();
        let h = q.transpose() * b * &q;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
        let rotated = &q * &eig.eigenvectors;
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors: Vec<Vec<f64>> =
            order.iter().map(|&i| rotated.column(i).iter().copied().collect()).collect();
        let scale = values.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        let converged = values.iter().zip(&prev).take(k).all(|(v, p)| (v - p).abs() <= 1e-13 * scale);
        prev = values.iter().take(k).copied().collect();
        // keep the Ritz basis sorted so the next product starts from it
        q = DMatrix::from_fn(n, block, |r, c| vectors[c][r]);
        ritz = (values, vectors);
        if converged {
            break;
        }
    }
    ritz
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subspace_iteration_matches_dense_solver() {
        let n = 120;
        let mut rng = stream_rng(5, 0);
        let pts: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0), rng.random_range(-0.3..0.3)])
            .collect();
        let b = DMatrix::from_fn(n, n, |i, j| {
            pts[i].iter().zip(&pts[j]).map(|(a, c)| a * c).sum::<f64>()
        });
        let (dense, _) = dense_eigenpairs(b.clone());
        let (fast, _) = leading_eigenpairs(&b, 3);
        for c in 0..3 {
            assert!((dense[c] - fast[c]).abs() < 1e-8 * dense[0]);
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        let d = Matrix::zeros(3, 3);
        assert!(classical_mds(&d, 3).is_err());
        assert!(classical_mds(&d, 0).is_err());
    }

    #[test]
    fn zero_dissimilarity_has_no_positive_axes() {
        let d = Matrix::zeros(4, 4);
        let e = classical_mds(&d, 2).unwrap();
        assert_eq!(e.dims, 0);
        assert!(e.warning.is_some());
    }
}
