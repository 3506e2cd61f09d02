//! Top-M pixel selection by variance mass, truncation of the restricted
//! covariance via symmetric eigendecomposition (the SVD of a symmetric
//! matrix up to signs), and the jittered rank-M quadratic form.
//!
//! Factorization costs O(M^3) once; each quadratic-form evaluation is
//! O(M^2) through the stored factors.

use nalgebra::{DMatrix, DVector};

use crate::density::DensityField;
use crate::error::{Error, Result};

/// Relative jitter applied to the spectrum when the caller does not pick an
/// absolute value: `lambda = DEFAULT_JITTER_REL * c_1`.
pub const DEFAULT_JITTER_REL: f64 = 1e-6;

/// Rank-M approximation of a covariance restricted to the selected pixels.
///
/// `right_vectors` equal `left_vectors` up to per-column signs, as for any
/// symmetric matrix; the signed spectrum is cached for the quadratic form.
#[derive(Debug, Clone)]
pub struct RankMApprox {
    selected: Vec<usize>,
    singular_values: Vec<f64>,
    signs: Vec<f64>,
    left: DMatrix<f64>,
    jitter: f64,
}

impl RankMApprox {
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// Singular values `c_1 >= c_2 >= ... >= 0`.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// Number of selected pixels `|L|`.
    pub fn subspace_dim(&self) -> usize {
        self.left.nrows()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn left_vectors(&self) -> &DMatrix<f64> {
        &self.left
    }

    pub fn right_vectors(&self) -> DMatrix<f64> {
        let mut right = self.left.clone();
        for (i, s) in self.signs.iter().enumerate() {
            right.column_mut(i).scale_mut(*s);
        }
        right
    }

    /// Signed eigenvalue `c_i * sign_i` for factor `i`.
    fn eigenvalue(&self, i: usize) -> f64 {
        self.singular_values[i] * self.signs[i]
    }

    /// Dense reconstruction `sum_i c_i u_i v_i^T` on the selected subspace.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let m = self.subspace_dim();
        let mut out = DMatrix::zeros(m, m);
        for i in 0..self.rank() {
            let u = self.left.column(i);
            let lam = self.eigenvalue(i);
            for a in 0..m {
                for b in 0..m {
                    out[(a, b)] += lam * u[a] * u[b];
                }
            }
        }
        out
    }

    fn check_invertible(&self) -> Result<()> {
        if self.rank() < self.subspace_dim() && !(self.jitter > 0.0) {
            return Err(Error::SingularQuadraticForm);
        }
        for i in 0..self.rank() {
            if !(self.eigenvalue(i) + self.jitter > 0.0) {
                return Err(Error::SingularQuadraticForm);
            }
        }
        Ok(())
    }

    /// Applies `(Sigma_hat + lambda I)^{-1}` to a vector on the selected
    /// subspace. O(M * |L|).
    pub fn apply_inverse(&self, d: &[f64]) -> Result<Vec<f64>> {
        self.check_invertible()?;
        let m = self.subspace_dim();
        if d.len() != m {
            return Err(Error::GridMismatch(format!(
                "vector length {} does not match the {} selected pixels",
                d.len(),
                m
            )));
        }
        let dv = DVector::from_column_slice(d);
        let z = self.left.transpose() * &dv;
        let mut scaled = z.clone();
        for i in 0..self.rank() {
            scaled[i] /= self.eigenvalue(i) + self.jitter;
        }
        let mut out = &self.left * scaled;
        if self.rank() < m {
            // complement of the kept factors carries curvature 1/lambda
            let residual = &dv - &self.left * z;
            out += residual / self.jitter;
        }
        Ok(out.as_slice().to_vec())
    }

    /// Applies `(Sigma_hat + lambda I)` to a vector on the selected
    /// subspace. O(M * |L|).
    pub fn apply_forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        let m = self.subspace_dim();
        if v.len() != m {
            return Err(Error::GridMismatch(format!(
                "vector length {} does not match the {} selected pixels",
                v.len(),
                m
            )));
        }
        let dv = DVector::from_column_slice(v);
        let mut z = self.left.transpose() * &dv;
        for i in 0..self.rank() {
            z[i] *= self.eigenvalue(i);
        }
        let out = &self.left * z + dv * self.jitter;
        Ok(out.as_slice().to_vec())
    }

    /// Quadratic form `d^T (Sigma_hat + lambda I)^{-1} d` on the selected
    /// subspace.
    pub fn quadratic_form(&self, d: &[f64]) -> Result<f64> {
        self.check_invertible()?;
        let m = self.subspace_dim();
        if d.len() != m {
            return Err(Error::GridMismatch(format!(
                "vector length {} does not match the {} selected pixels",
                d.len(),
                m
            )));
        }
        let dv = DVector::from_column_slice(d);
        let z = self.left.transpose() * &dv;
        let mut acc = 0.0;
        for i in 0..self.rank() {
            acc += z[i] * z[i] / (self.eigenvalue(i) + self.jitter);
        }
        if self.rank() < m {
            let residual = (dv.dot(&dv) - z.dot(&z)).max(0.0);
            acc += residual / self.jitter;
        }
        Ok(acc)
    }
}

/// Smallest prefix of pixels, ordered by variance descending, whose summed
/// variance strictly exceeds `mass_threshold` of the total. Ties go to the
/// lower pixel index; the returned list is sorted by pixel index.
pub fn select_pixels(diag_var: &[f64], mass_threshold: f64) -> Result<Vec<usize>> {
    if !(mass_threshold > 0.0 && mass_threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "mass threshold must lie in (0, 1), got {mass_threshold}"
        )));
    }
    let max_abs = diag_var.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let clamped: Vec<f64> = diag_var
        .iter()
        .map(|&v| {
            if v < 0.0 {
                // round-off from the closed form; anything materially
                // negative is a caller bug
                if v < -1e-9 * max_abs {
                    f64::NAN
                } else {
                    0.0
                }
            } else {
                v
            }
        })
        .collect();
    if clamped.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter(
            "variance diagonal has materially negative entries".into(),
        ));
    }
    let total: f64 = clamped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NoVarianceMass);
    }
    let mut order: Vec<usize> = (0..clamped.len()).collect();
    order.sort_by(|&a, &b| clamped[b].total_cmp(&clamped[a]).then(a.cmp(&b)));
    let target = mass_threshold * total;
    let mut cum = 0.0;
    let mut taken = Vec::new();
    for &j in &order {
        cum += clamped[j];
        taken.push(j);
        if cum > target {
            break;
        }
    }
    taken.sort_unstable();
    Ok(taken)
}

/// Restricts `cov` to `selected x selected`, factors it, and keeps the top
/// `rank` singular triples. `jitter` is the absolute lambda later added to
/// the diagonal before inversion; pass
/// `DEFAULT_JITTER_REL * c_1` via [`truncate_cov_default_jitter`] for the
/// spectrum-relative default.
pub fn truncate_cov(
    cov: &DMatrix<f64>,
    selected: &[usize],
    rank: usize,
    jitter: f64,
) -> Result<RankMApprox> {
    if selected.is_empty() || rank == 0 || rank > selected.len() {
        return Err(Error::InvalidParameter(format!(
            "rank {rank} must lie in [1, {}]",
            selected.len()
        )));
    }
    if selected.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "selected indices must be strictly increasing".into(),
        ));
    }
    if !cov.is_square() || selected[selected.len() - 1] >= cov.nrows() {
        return Err(Error::GridMismatch(format!(
            "covariance is {}x{} but selection reaches index {}",
            cov.nrows(),
            cov.ncols(),
            selected[selected.len() - 1]
        )));
    }
    if !(jitter >= 0.0) || !jitter.is_finite() {
        return Err(Error::InvalidParameter("jitter must be nonnegative".into()));
    }
    let m = selected.len();
    let mut sub = DMatrix::zeros(m, m);
    for (a, &j) in selected.iter().enumerate() {
        for (b, &k) in selected.iter().enumerate() {
            sub[(a, b)] = cov[(j, k)];
        }
    }
    // enforce exact symmetry before factoring
    for a in 0..m {
        for b in (a + 1)..m {
            let v = 0.5 * (sub[(a, b)] + sub[(b, a)]);
            sub[(a, b)] = v;
            sub[(b, a)] = v;
        }
    }
    let diag_min = (0..m).map(|i| sub[(i, i)]).fold(f64::INFINITY, f64::min);
    let diag_max = (0..m).map(|i| sub[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    let max_abs = sub.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let eigen = nalgebra::SymmetricEigen::try_new(sub, f64::EPSILON, 100_000).ok_or(
        Error::EigenFailed {
            dim: m,
            max_abs,
            diag_min,
            diag_max,
        },
    )?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .abs()
            .total_cmp(&eigen.eigenvalues[a].abs())
            .then(a.cmp(&b))
    });
    let mut singular_values = Vec::with_capacity(rank);
    let mut signs = Vec::with_capacity(rank);
    let mut left = DMatrix::zeros(m, rank);
    for (col, &i) in order.iter().take(rank).enumerate() {
        let lam = eigen.eigenvalues[i];
        singular_values.push(lam.abs());
        signs.push(if lam < 0.0 { -1.0 } else { 1.0 });
        left.column_mut(col).copy_from(&eigen.eigenvectors.column(i));
    }
    Ok(RankMApprox {
        selected: selected.to_vec(),
        singular_values,
        signs,
        left,
        jitter,
    })
}

/// [`truncate_cov`] with `jitter = DEFAULT_JITTER_REL * c_1`.
pub fn truncate_cov_default_jitter(
    cov: &DMatrix<f64>,
    selected: &[usize],
    rank: usize,
) -> Result<RankMApprox> {
    let approx = truncate_cov(cov, selected, rank, 0.0)?;
    let c1 = approx.singular_values.first().copied().unwrap_or(0.0);
    Ok(RankMApprox {
        jitter: DEFAULT_JITTER_REL * c1,
        ..approx
    })
}

/// Rank-M approximate negative log-likelihood
/// `d^T (Sigma_hat_L + lambda I)^{-1} d` with `d = (pred - mean)` restricted
/// to the selected pixels.
pub fn neg_log_likelihood(
    pred: &DensityField,
    mean: &[f64],
    approx: &RankMApprox,
) -> Result<f64> {
    let d = restrict_residual(pred, mean, approx)?;
    approx.quadratic_form(&d)
}

/// `(pred - mean)` restricted to the selected pixels, with grid checks.
pub fn restrict_residual(
    pred: &DensityField,
    mean: &[f64],
    approx: &RankMApprox,
) -> Result<Vec<f64>> {
    if pred.values.len() != mean.len() {
        return Err(Error::GridMismatch(format!(
            "prediction has {} pixels but the mean has {}",
            pred.values.len(),
            mean.len()
        )));
    }
    if let Some(&max) = approx.selected().last() {
        if max >= mean.len() {
            return Err(Error::GridMismatch(format!(
                "selected pixel {max} outside a grid of {} pixels",
                mean.len()
            )));
        }
    }
    Ok(approx
        .selected()
        .iter()
        .map(|&j| pred.values[j] - mean[j])
        .collect())
}
