//! The 1-D LDA projection pursuit index and its optimizer.
//!
//! For a two-group sample with pooled within-group scatter `W` and
//! between-group scatter `B`, the index of a direction `a` is
//!
//! ```text
//! I(a) = 1 - aᵀWa / aᵀ(W+B)a
//! ```
//!
//! i.e. the share of projected variance explained by the group split. It is
//! invariant to rescaling `a` and lies in `[0, 1]`. Because `B` has rank one
//! for two groups, the maximizer is `W⁻¹(μ₀ - μ₁)`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};
use crate::rng::stream_rng;

/// A unit-norm linear combination of a subset of variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub var_ids: Vec<usize>,
    pub coeffs: Vec<f64>,
}

impl Projection {
    /// Normalizes `coeffs` to unit length with the largest-magnitude entry positive.
    pub fn new(var_ids: Vec<usize>, coeffs: Vec<f64>) -> Result<Self> {
        if var_ids.len() != coeffs.len() || var_ids.is_empty() {
            return Err(Error::InvalidConfig(alloc::format!(
                "projection needs matching non-empty var_ids/coeffs ({} vs {})",
                var_ids.len(),
                coeffs.len()
            )));
        }
        let mut sorted = var_ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("projection var_ids must be distinct".into()));
        }
        let coeffs = normalize_direction(&coeffs)
            .ok_or(Error::DegenerateData("projection coefficients are all zero"))?;
        Ok(Projection { var_ids, coeffs })
    }

    /// Projects a full-length case vector.
    #[inline]
    pub fn project(&self, x: &[f64]) -> f64 {
        self.var_ids.iter().zip(&self.coeffs).map(|(&j, c)| c * x[j]).sum()
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }
}

/// Unit-norm copy of `a` with its largest-magnitude entry positive; `None` for a zero vector.
pub fn normalize_direction(a: &[f64]) -> Option<Vec<f64>> {
    let len = norm(a);
    if !(len > 0.0) || !len.is_finite() {
        return None;
    }
    let mut lead = 0;
    for (i, v) in a.iter().enumerate() {
        if v.abs() > a[lead].abs() {
            lead = i;
        }
    }
    let sign = if a[lead] < 0.0 { -1.0 } else { 1.0 };
    Some(a.iter().map(|v| sign * v / len).collect())
}

/// Value of the projection pursuit index, always in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexValue(f64);

impl IndexValue {
    pub fn new(v: f64) -> Self {
        IndexValue(v.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Scatter matrices of a two-group sample.
#[derive(Debug, Clone)]
pub struct TwoGroupScatter {
    pub within: DMatrix<f64>,
    pub between: DMatrix<f64>,
    /// Mean of group 0 minus mean of group 1.
    pub mean_diff: DVector<f64>,
    pub counts: [usize; 2],
    data_scale: f64,
}

impl TwoGroupScatter {
    /// `groups[i]` must be 0 or 1 for every row of `x`.
    pub fn new(x: &Matrix, groups: &[usize]) -> Result<Self> {
        let (k, m) = (x.rows(), x.cols());
        if groups.len() != k {
            return Err(Error::InvalidData(alloc::format!(
                "{} group labels for {k} cases",
                groups.len()
            )));
        }
        if m == 0 {
            return Err(Error::InvalidConfig("need at least one variable".into()));
        }
        let mut counts = [0usize; 2];
        let mut sums = [vec![0.0; m], vec![0.0; m]];
        for (i, &g) in groups.iter().enumerate() {
            if g > 1 {
                return Err(Error::InvalidData(alloc::format!("group label {g} is not 0 or 1")));
            }
            counts[g] += 1;
            for (s, v) in sums[g].iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        if counts[0] == 0 || counts[1] == 0 {
            return Err(Error::InvalidData("both groups need at least one case".into()));
        }
        let means: [Vec<f64>; 2] =
            [0, 1].map(|g| sums[g].iter().map(|s| s / counts[g] as f64).collect());
        let grand: Vec<f64> = (0..m)
            .map(|j| (sums[0][j] + sums[1][j]) / k as f64)
            .collect();

        let mut within = DMatrix::zeros(m, m);
        let mut dev = vec![0.0; m];
        let mut data_scale = 0.0;
        for (i, &g) in groups.iter().enumerate() {
            let row = x.row(i);
            for j in 0..m {
                dev[j] = row[j] - means[g][j];
                data_scale += row[j] * row[j];
            }
            for a in 0..m {
                for b in a..m {
                    within[(a, b)] += dev[a] * dev[b];
                }
            }
        }
        let mut between = DMatrix::zeros(m, m);
        for g in 0..2 {
            let w = counts[g] as f64;
            for a in 0..m {
                let da = means[g][a] - grand[a];
                for b in a..m {
                    between[(a, b)] += w * da * (means[g][b] - grand[b]);
                }
            }
        }
        for a in 0..m {
            for b in 0..a {
                within[(a, b)] = within[(b, a)];
                between[(a, b)] = between[(b, a)];
            }
        }
        let mean_diff = DVector::from_iterator(m, (0..m).map(|j| means[0][j] - means[1][j]));
        Ok(TwoGroupScatter { within, between, mean_diff, counts, data_scale })
    }

    pub fn dim(&self) -> usize {
        self.mean_diff.len()
    }

    fn total(&self) -> DMatrix<f64> {
        &self.within + &self.between
    }

    fn is_degenerate(&self) -> bool {
        !(self.total().trace() > 1e-24 * self.data_scale)
    }

    /// Index of direction `a` (need not be unit length).
    pub fn index(&self, a: &[f64]) -> Result<IndexValue> {
        if a.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: a.len() });
        }
        let a = DVector::from_column_slice(a);
        let total = self.total();
        let den = a.dot(&(&total * &a));
        let num = a.dot(&(&self.within * &a));
        if !(den > 1e-14 * total.trace() * a.norm_squared()) {
            return Err(Error::DegenerateData("projected data has zero variance"));
        }
        Ok(IndexValue::new(1.0 - num / den))
    }
}

/// LDA index of direction `a` on two-group data `x` (groups labelled 0/1).
pub fn lda_index(x: &Matrix, groups: &[usize], a: &[f64]) -> Result<IndexValue> {
    TwoGroupScatter::new(x, groups)?.index(a)
}

/// Exact maximizer of the LDA index, with its index value.
///
/// The returned projection indexes columns of `x` (`var_ids = 0..m`).
pub fn optimize_projection(x: &Matrix, groups: &[usize]) -> Result<(Projection, IndexValue)> {
    let scatter = TwoGroupScatter::new(x, groups)?;
    optimize_scatter(&scatter)
}

pub(crate) fn optimize_scatter(s: &TwoGroupScatter) -> Result<(Projection, IndexValue)> {
    if s.is_degenerate() {
        return Err(Error::DegenerateData("all cases are identical"));
    }
    let m = s.dim();
    let direction: Vec<f64> = if m == 1 {
        vec![1.0]
    } else if s.mean_diff.norm() == 0.0 {
        // every direction scores 0; take the axis of largest total spread
        leading_eigenvector(&s.total())
    } else {
        solve_within(&s.within, &s.mean_diff).as_slice().to_vec()
    };
    let ids = (0..m).collect();
    let proj = Projection::new(ids, direction)?;
    let value = s.index(&proj.coeffs)?;
    Ok((proj, value))
}

/// Solves `W a = d`, adding a small ridge when `W` is singular.
fn solve_within(w: &DMatrix<f64>, d: &DVector<f64>) -> DVector<f64> {
    let m = w.nrows();
    if let Some(chol) = well_conditioned_cholesky(w.clone()) {
        return chol.solve(d);
    }
    let trace = w.trace();
    if !(trace > 0.0) {
        // zero within-group spread: any direction with a component along d separates perfectly
        return d.clone();
    }
    let ridge = 1e-8 * trace / m as f64;
    let mut reg = w.clone();
    for i in 0..m {
        reg[(i, i)] += ridge;
    }
    match Cholesky::new(reg) {
        Some(chol) => chol.solve(d),
        None => d.clone(),
    }
}

fn well_conditioned_cholesky(w: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let chol = Cholesky::new(w)?;
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)]).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    // condition number of W is roughly (max/min)^2
    if min > 1e-7 * max {
        Some(chol)
    } else {
        None
    }
}

fn leading_eigenvector(m: &DMatrix<f64>) -> Vec<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let mut best = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    eig.eigenvectors.column(best).iter().copied().collect()
}

/// Derivative-free maximizer of the LDA index: random-restart coordinate
/// ascent on the unit sphere.
///
/// Slower and approximate; it exists so alternative indices can reuse it and
/// so the closed-form route has an independent cross-check.
pub fn search_projection(
    x: &Matrix,
    groups: &[usize],
    restarts: usize,
    seed: u64,
) -> Result<(Projection, IndexValue)> {
    let s = TwoGroupScatter::new(x, groups)?;
    if s.is_degenerate() {
        return Err(Error::DegenerateData("all cases are identical"));
    }
    let m = s.dim();
    let score = |a: &[f64]| s.index(a).map(IndexValue::value).unwrap_or(0.0);
    let mut rng = stream_rng(seed, 0);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let start: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut a = normalize_direction(&start).unwrap_or_else(|| unit(m, 0));
        let mut current = score(&a);
        let mut step = 0.5;
        let mut iters = 0;
        while step > 1e-12 && iters < 20_000 {
            iters += 1;
            let mut improved = false;
            for i in 0..m {
                for delta in [step, -step] {
                    let mut cand = a.clone();
                    cand[i] += delta;
                    if let Some(cand) = normalize_direction(&cand) {
                        let v = score(&cand);
                        if v > current {
                            a = cand;
                            current = v;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if best.as_ref().is_none_or(|(_, v)| current > *v) {
            best = Some((a, current));
        }
    }
    let (a, _) = best.expect("at least one restart");
    let proj = Projection::new((0..m).collect(), a)?;
    let value = s.index(&proj.coeffs)?;
    Ok((proj, value))
}

fn unit(m: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; m];
    e[i] = 1.0;
    e
}

/// Leading discriminant direction for several classes: top eigenvector of `W⁻¹B`.
///
/// `classes[i]` is the class of row `i`; every class id in `0..n_classes`
/// must be present.
pub fn multiclass_lda_direction(x: &Matrix, classes: &[usize], n_classes: usize) -> Result<Vec<f64>> {
    let (k, m) = (x.rows(), x.cols());
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let mut counts = vec![0usize; n_classes];
    let mut means = vec![vec![0.0; m]; n_classes];
    for i in 0..k {
        counts[classes[i]] += 1;
        for (s, v) in means[classes[i]].iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    for (mean, &c) in means.iter_mut().zip(&counts) {
        if c == 0 {
            return Err(Error::InvalidData("every class needs at least one case".into()));
        }
        mean.iter_mut().for_each(|v| *v /= c as f64);
    }
    let grand: Vec<f64> = (0..m)
        .map(|j| (0..n_classes).map(|c| means[c][j] * counts[c] as f64).sum::<f64>() / k as f64)
        .collect();
    let mut within = DMatrix::<f64>::zeros(m, m);
    for i in 0..k {
        let row = x.row(i);
        let mu = &means[classes[i]];
        for a in 0..m {
            for b in 0..m {
                within[(a, b)] += (row[a] - mu[a]) * (row[b] - mu[b]);
            }
        }
    }
    let mut between = DMatrix::<f64>::zeros(m, m);
    for c in 0..n_classes {
        for a in 0..m {
            for b in 0..m {
                between[(a, b)] +=
                    counts[c] as f64 * (means[c][a] - grand[a]) * (means[c][b] - grand[b]);
            }
        }
    }
    let trace = within.trace();
    let chol = match well_conditioned_cholesky(within.clone()) {
        Some(c) => c,
        None => {
            let ridge = if trace > 0.0 { 1e-8 * trace / m as f64 } else { 1.0 };
            let mut reg = within.clone();
            for i in 0..m {
                reg[(i, i)] += ridge;
            }
            Cholesky::new(reg).ok_or(Error::DegenerateData("within-class scatter is not PSD"))?
        }
    };
    // symmetric reduction: C = L⁻¹ B L⁻ᵀ, a = L⁻ᵀ v
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(Error::DegenerateData("within-class scatter is singular"))?;
    let c = &linv * &between * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let v = DVector::from_vec(leading_eigenvector(&c));
    let a = linv.transpose() * v;
    normalize_direction(a.as_slice()).ok_or(Error::DegenerateData("no discriminant direction"))
}

pub(crate) fn project_rows(x: &Matrix, a: &[f64]) -> Vec<f64> {
    x.iter_rows().map(|r| dot(r, a)).collect()
}
