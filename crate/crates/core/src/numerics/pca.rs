use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{ensure_dim, Error, Result};
use crate::numerics::linalg::complete_orthonormal_rows;

/// Principal components fitted on a centered sample.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: DVector<f64>,
    /// `k × d`, orthonormal rows, ordered by decreasing variance.
    pub components: DMatrix<f64>,
    pub explained_variance: Vec<f64>,
    pub variance_ratio: Vec<f64>,
}

impl Pca {
    pub fn fit(x: &DMatrix<f64>, k: usize) -> Result<Self> {
        let (n, d) = x.shape();
        if k == 0 || k > n.min(d) {
            return Err(Error::invalid(format!(
                "PCA needs 1 <= k <= min(N, d) = {}, got {k}",
                n.min(d)
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("PCA input must be finite"));
        }
        let mean = x.row_mean().transpose();
        let mut xc = x.clone();
        for mut row in xc.row_iter_mut() {
            row -= mean.transpose();
        }
        let denom = (n.max(2) - 1) as f64;

        // (eigenvalue, direction) pairs from the smaller of the two Gram forms.
        let mut pairs: Vec<(f64, DVector<f64>)> = if d <= n {
            let eig = SymmetricEigen::new(xc.transpose() * &xc / denom);
            eig.eigenvalues
                .iter()
                .zip(eig.eigenvectors.column_iter())
                .map(|(&s, v)| (s.max(0.0), v.into_owned()))
                .collect()
        } else {
            let eig = SymmetricEigen::new(&xc * xc.transpose() / denom);
            let max_ev = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(*v));
            eig.eigenvalues
                .iter()
                .zip(eig.eigenvectors.column_iter())
                .filter(|(s, _)| **s > max_ev * 1e-12 && **s > 0.0)
                .map(|(&s, u)| {
                    let v = xc.transpose() * u;
                    let norm = v.norm();
                    (s, v / norm)
                })
                .collect()
        };
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        pairs.truncate(k);

        let total: f64 = (0..d).map(|c| xc.column(c).norm_squared()).sum::<f64>() / denom;
        let mut rows: Vec<DVector<f64>> = pairs.iter().map(|(_, v)| canonical_sign(v.clone())).collect();
        let mut explained: Vec<f64> = pairs.iter().map(|(s, _)| *s).collect();
        if rows.len() < k {
            rows = complete_orthonormal_rows(rows, d, k);
            explained.resize(k, 0.0);
        }
        let components = DMatrix::from_fn(k, d, |r, c| rows[r][c]);
        let variance_ratio = explained
            .iter()
            .map(|s| if total > 0.0 { s / total } else { 0.0 })
            .collect();
        Ok(Self {
            mean,
            components,
            explained_variance: explained,
            variance_ratio,
        })
    }

    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        ensure_dim(self.mean.len(), x.ncols())?;
        let mut xc = x.clone();
        for mut row in xc.row_iter_mut() {
            row -= self.mean.transpose();
        }
        Ok(xc * self.components.transpose())
    }

    pub fn inverse_transform(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        ensure_dim(self.k(), z.ncols())?;
        let mut x = z * &self.components;
        for mut row in x.row_iter_mut() {
            row += self.mean.transpose();
        }
        Ok(x)
    }
}

/// Flips `v` so its largest-magnitude entry is positive.
fn canonical_sign(v: DVector<f64>) -> DVector<f64> {
    let pivot = v
        .iter()
        .copied()
        .fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if pivot < 0.0 {
        -v
    } else {
        v
    }
}

/// Fits `k` components and returns them with the centered projections.
pub fn pca_fit_project(x: &DMatrix<f64>, k: usize) -> Result<(Pca, DMatrix<f64>)> {
    let pca = Pca::fit(x, k)?;
    let z = pca.transform(x)?;
    Ok((pca, z))
}
