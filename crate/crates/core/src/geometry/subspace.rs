use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::numerics::linalg::{gram_schmidt, orthonormality_error, project_out, rows_to_matrix};
use crate::numerics::{sweep_ridge, Pca, RidgeFit};
use crate::probes::ProbeTarget;
use crate::store::{ActivationDataset, Split};

/// Retention ratios above this are flagged as noise-inflated.
pub const RETENTION_FLAG: f64 = 1.1;
const CCA_REG: f64 = 1e-8;

/// Orthonormal basis of a predictive subspace in PCA feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    /// `k × feature_dim`, orthonormal rows.
    pub basis: DMatrix<f64>,
    pub source_target: ProbeTarget,
    pub layer: u32,
    pub feature_dim: usize,
}

impl Subspace {
    pub fn k(&self) -> usize {
        self.basis.nrows()
    }

    /// The subspace spanned by the first `m` basis rows.
    pub fn top(&self, m: usize) -> Result<Subspace> {
        if m == 0 || m > self.k() {
            return Err(Error::invalid(format!("cannot take {m} of {} basis rows", self.k())));
        }
        Ok(Subspace {
            basis: self.basis.rows(0, m).into_owned(),
            ..self.clone()
        })
    }
}

/// PCA features of one dataset, fitted on its training rows and applied to
/// every row.
pub struct AnalysisSpace<'a> {
    pub ds: &'a ActivationDataset,
    pub pca: Pca,
    /// `N × pca_dim` projections of all rows.
    pub features: DMatrix<f64>,
}

impl<'a> AnalysisSpace<'a> {
    pub fn new(ds: &'a ActivationDataset, pca_dim: usize) -> Result<Self> {
        let train = ds.split_indices(Split::Train);
        if train.is_empty() {
            return Err(Error::invalid("dataset has no train rows; assign splits first"));
        }
        if pca_dim == 0 || pca_dim > ds.dim {
            return Err(Error::invalid(format!(
                "pca_dim must be in 1..={}, got {pca_dim}",
                ds.dim
            )));
        }
        let pca = Pca::fit(&ds.matrix_of(&train), pca_dim)?;
        let features = pca.transform(&ds.matrix())?;
        Ok(Self { ds, pca, features })
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    fn rows(&self, target: ProbeTarget, split: Split) -> (Vec<usize>, Vec<f64>) {
        let mut idx = Vec::new();
        let mut y = Vec::new();
        for (i, m) in self.ds.meta.iter().enumerate() {
            if m.split == Some(split) {
                if let Some(v) = target.value(m) {
                    idx.push(i);
                    y.push(v);
                }
            }
        }
        (idx, y)
    }

    /// Ridge probe for `target` on `features` (rows aligned with the dataset),
    /// λ chosen on validation rows and scored on test rows.
    pub fn probe_on(&self, features: &DMatrix<f64>, target: ProbeTarget, lambdas: &[f64]) -> Result<RidgeFit> {
        ensure_dim(self.ds.len(), features.nrows())?;
        let (tr, y_tr) = self.rows(target, Split::Train);
        let (va, y_va) = self.rows(target, Split::Val);
        let (te, y_te) = self.rows(target, Split::Test);
        for (name, idx) in [("train", &tr), ("val", &va), ("test", &te)] {
            if idx.is_empty() {
                return Err(Error::invalid(format!("no {name} rows carry {}", target.field())));
            }
        }
        let pick = |idx: &[usize]| DMatrix::from_fn(idx.len(), features.ncols(), |r, c| features[(idx[r], c)]);
        let mut fit = sweep_ridge(&pick(&tr), &y_tr, &pick(&va), &y_va, lambdas)?;
        fit.score_test(&pick(&te), &y_te)?;
        Ok(fit)
    }

    /// `k` predictive directions for `target` by repeated ridge fits, each
    /// followed by projecting the fitted direction out of the features.
    pub fn extract_subspace(&self, target: ProbeTarget, k: usize, lambdas: &[f64]) -> Result<Subspace> {
        if k == 0 || k > self.feature_dim() {
            return Err(Error::invalid(format!(
                "subspace size must be in 1..={}, got {k}",
                self.feature_dim()
            )));
        }
        let mut x = self.features.clone();
        let mut dirs: Vec<DVector<f64>> = Vec::with_capacity(k);
        for i in 0..k {
            let fit = self.probe_on(&x, target, lambdas)?;
            let w = DVector::from_column_slice(&fit.weights);
            let n = w.norm();
            if n.is_nan() || n <= 0.0 {
                return Err(Error::numerical(format!(
                    "features exhausted after {i} of {k} directions"
                )));
            }
            let w = w / n;
            x = project_out(&x, &DMatrix::from_row_slice(1, w.len(), w.as_slice()));
            dirs.push(w);
        }
        let ortho = gram_schmidt(&dirs, 1e-8);
        if ortho.len() < k {
            return Err(Error::numerical(format!(
                "deflated directions span only {} of {k} dimensions",
                ortho.len()
            )));
        }
        let basis = rows_to_matrix(&ortho, self.feature_dim());
        debug_assert!(orthonormality_error(&basis) < 1e-8);
        Ok(Subspace {
            basis,
            source_target: target,
            layer: self.ds.layer,
            feature_dim: self.feature_dim(),
        })
    }

    fn test_projection(&self, s: &Subspace, m: usize) -> Result<DMatrix<f64>> {
        ensure_dim(self.feature_dim(), s.feature_dim)?;
        let te = self.ds.split_indices(Split::Test);
        let x = DMatrix::from_fn(te.len(), self.feature_dim(), |r, c| self.features[(te[r], c)]);
        Ok(x * s.top(m)?.basis.transpose())
    }

    /// Canonical correlations between test-row projections onto the first `m`
    /// directions of each subspace.
    pub fn cca_top(&self, a: &Subspace, b: &Subspace, m: usize) -> Result<Vec<f64>> {
        let n_test = self.ds.split_indices(Split::Test).len();
        if n_test < 2 * m {
            return Err(Error::invalid(format!(
                "CCA on {m} directions needs at least {} test rows, found {n_test}",
                2 * m
            )));
        }
        canonical_correlations(&self.test_projection(a, m)?, &self.test_projection(b, m)?)
    }

    /// Test R² for `target` before and after projecting `remove` out of the
    /// features.
    pub fn removal_retention(&self, target: ProbeTarget, remove: &Subspace, lambdas: &[f64]) -> Result<Retention> {
        ensure_dim(self.feature_dim(), remove.feature_dim)?;
        let before = self.probe_on(&self.features, target, lambdas)?.r2_test.expect("scored");
        let after = self
            .probe_on(&project_out(&self.features, &remove.basis), target, lambdas)?
            .r2_test
            .expect("scored");
        Ok(Retention::new(before, after))
    }

    /// Test R² for `target` from projections onto its own subspace (`full`)
    /// and onto the other concept's subspace (`shared`).
    pub fn variance_decomposition(
        &self,
        target: ProbeTarget,
        own: &Subspace,
        other: &Subspace,
        lambdas: &[f64],
    ) -> Result<VarianceSplit> {
        ensure_dim(self.feature_dim(), own.feature_dim)?;
        ensure_dim(self.feature_dim(), other.feature_dim)?;
        let full = self
            .probe_on(&(&self.features * own.basis.transpose()), target, lambdas)?
            .r2_test
            .expect("scored");
        let shared = self
            .probe_on(&(&self.features * other.basis.transpose()), target, lambdas)?
            .r2_test
            .expect("scored");
        Ok(VarianceSplit {
            full,
            shared,
            unique: (full - shared).max(0.0),
        })
    }
}

/// PCA-reduce `ds` and extract a `k`-dimensional subspace for `target`.
pub fn extract_subspace(
    ds: &ActivationDataset,
    target: ProbeTarget,
    k: usize,
    pca_dim: usize,
    lambdas: &[f64],
) -> Result<Subspace> {
    AnalysisSpace::new(ds, pca_dim)?.extract_subspace(target, k, lambdas)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Retention {
    pub r2_before: f64,
    pub r2_after: f64,
    /// `r2_after / r2_before`; absent when `r2_before ≤ 0`.
    pub ratio: Option<f64>,
    /// The ratio exceeds [`RETENTION_FLAG`].
    pub flagged: bool,
}

impl Retention {
    pub fn new(r2_before: f64, r2_after: f64) -> Self {
        let ratio = (r2_before > 0.0).then(|| r2_after / r2_before);
        Self {
            r2_before,
            r2_after,
            ratio,
            flagged: ratio.is_some_and(|r| r > RETENTION_FLAG),
        }
    }
}

/// Split of a target's predictable variance. `unique = max(full − shared, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceSplit {
    pub full: f64,
    pub shared: f64,
    pub unique: f64,
}

/// Principal angles in degrees, ascending.
pub fn principal_angles(a: &Subspace, b: &Subspace) -> Result<Vec<f64>> {
    ensure_dim(a.feature_dim, b.feature_dim)?;
    principal_angles_of(&a.basis, &b.basis)
}

/// Principal angles between the row spaces of two matrices with orthonormal rows.
///
/// Small angles come from the sines (residual of the smaller basis after
/// projecting onto the larger), where arccos of a cosine near 1 loses
/// half the digits.
pub fn principal_angles_of(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    ensure_dim(a.ncols(), b.ncols())?;
    let (big, small) = if a.nrows() >= b.nrows() { (a, b) } else { (b, a) };
    let mut cos: Vec<f64> = (big * small.transpose()).singular_values().iter().copied().collect();
    cos.sort_by(|x, y| y.total_cmp(x));
    let resid = small - small * big.transpose() * big;
    let mut sin: Vec<f64> = resid.singular_values().iter().copied().collect();
    sin.sort_by(f64::total_cmp);
    Ok(cos
        .iter()
        .zip(&sin)
        .map(|(&c, &s)| {
            let theta = if c > std::f64::consts::FRAC_1_SQRT_2 {
                s.clamp(0.0, 1.0).asin()
            } else {
                c.clamp(0.0, 1.0).acos()
            };
            theta.to_degrees()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleBaseline {
    pub mean_deg: f64,
    /// Twice the sample standard deviation of the per-pair mean angle.
    pub two_sigma_deg: f64,
}

/// Haar-random `k`-dimensional subspace of `R^ambient`, as orthonormal rows.
pub fn random_subspace(k: usize, ambient: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(ambient, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q().transpose()
}

/// Mean principal angle between independent random subspace pairs.
pub fn random_angle_baseline(k: usize, ambient: usize, trials: usize, seed: u64) -> Result<AngleBaseline> {
    if k == 0 || k > ambient {
        return Err(Error::invalid(format!(
            "need 1 <= k <= ambient, got k={k}, ambient={ambient}"
        )));
    }
    if trials < 2 {
        return Err(Error::invalid("random baseline needs at least 2 trials"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_pair: Vec<f64> = (0..trials)
        .map(|_| {
            let a = random_subspace(k, ambient, &mut rng);
            let b = random_subspace(k, ambient, &mut rng);
            let angles = principal_angles_of(&a, &b).expect("same ambient");
            angles.iter().sum::<f64>() / k as f64
        })
        .collect();
    let mean = per_pair.iter().sum::<f64>() / trials as f64;
    let var = per_pair.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    Ok(AngleBaseline {
        mean_deg: mean,
        two_sigma_deg: 2.0 * var.sqrt(),
    })
}

fn centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = x.row_mean();
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    c
}

/// `(C + ε·tr(C)/p·I)^{-1/2}` for a covariance `C`.
fn inverse_sqrt(c: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = c.nrows();
    let reg = CCA_REG * (c.trace() / p as f64).max(f64::MIN_POSITIVE);
    let eig = SymmetricEigen::new(c + DMatrix::identity(p, p) * reg);
    if eig.eigenvalues.iter().any(|&s| s.is_nan() || s <= 0.0) {
        return Err(Error::numerical("CCA covariance is not positive definite"));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|s| 1.0 / s.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Canonical correlations between the columns of `x` and `y`, descending.
pub fn canonical_correlations(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Vec<f64>> {
    ensure_dim(x.nrows(), y.nrows())?;
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("CCA needs at least 2 rows"));
    }
    let (xc, yc) = (centered(x), centered(y));
    let denom = (n - 1) as f64;
    let wx = inverse_sqrt(xc.transpose() * &xc / denom)?;
    let wy = inverse_sqrt(yc.transpose() * &yc / denom)?;
    let cxy = xc.transpose() * &yc / denom;
    let m = wx * cxy * wy;
    let mut s: Vec<f64> = m.singular_values().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s.truncate(x.ncols().min(y.ncols()));
    Ok(s)
}
