//! Small dense helpers shared by the subspace code.

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_dim, Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    ensure_dim(a.len(), b.len())?;
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("cosine of a zero vector is undefined"));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Modified Gram–Schmidt with one re-orthogonalization pass. Vectors whose
/// residual norm falls below `tol` relative to their input norm are dropped.
pub fn gram_schmidt(vectors: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let scale = v.norm();
        if scale == 0.0 {
            continue;
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = q.dot(&r);
                r -= q * c;
            }
        }
        let n = r.norm();
        if n > tol * scale {
            out.push(r / n);
        }
    }
    out
}

/// Extends orthonormal `rows` to `k` orthonormal vectors in `R^d` using the
/// standard basis as candidates.
pub fn complete_orthonormal_rows(rows: Vec<DVector<f64>>, d: usize, k: usize) -> Vec<DVector<f64>> {
    let mut out = rows;
    let mut e = 0;
    while out.len() < k && e < d {
        let mut cand = DVector::zeros(d);
        cand[e] = 1.0;
        e += 1;
        let mut extended = out.clone();
        extended.push(cand);
        let ortho = gram_schmidt(&extended, 1e-8);
        if ortho.len() == out.len() + 1 {
            out = ortho;
        }
    }
    out
}

/// Stacks vectors as rows of a matrix.
pub fn rows_to_matrix(rows: &[DVector<f64>], d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), d, |r, c| rows[r][c])
}

/// `X (I − BᵀB)` for a basis `B` with orthonormal rows.
pub fn project_out(x: &DMatrix<f64>, basis: &DMatrix<f64>) -> DMatrix<f64> {
    x - (x * basis.transpose()) * basis
}

/// Largest absolute entry of `B Bᵀ − I`.
pub fn orthonormality_error(basis: &DMatrix<f64>) -> f64 {
    let k = basis.nrows();
    (basis * basis.transpose() - DMatrix::<f64>::identity(k, k)).amax()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_basics() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(cosine(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn gram_schmidt_drops_dependent() {
        let vs = vec![
            DVector::from_vec(vec![1.0, 1.0, 0.0]),
            DVector::from_vec(vec![2.0, 2.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 1.0]),
        ];
        let q = gram_schmidt(&vs, 1e-10);
        assert_eq!(q.len(), 2);
        assert!(q[0].dot(&q[1]).abs() < 1e-14);
    }

    #[test]
    fn completion_fills_to_k() {
        let v = vec![DVector::from_vec(vec![0.0, 0.6, 0.8])];
        let out = complete_orthonormal_rows(v, 3, 3);
        let m = rows_to_matrix(&out, 3);
        assert!(orthonormality_error(&m) < 1e-12);
    }
}
