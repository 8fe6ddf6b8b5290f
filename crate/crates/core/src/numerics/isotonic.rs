//! Isotonic (nondecreasing) least-squares regression via pool-adjacent-violators.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

/// Weighted PAVA over a sequence already ordered by the predictor.
///
/// Returns the fitted value for each element: every pooled block takes the
/// weighted mean of its members and block values never decrease.
pub fn pava(y: &[f64], w: &[f64]) -> Vec<f64> {
    debug_assert_eq!(y.len(), w.len());
    // (weighted sum, weight, element count) per block
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&yi, &wi) in y.iter().zip(w) {
        blocks.push((yi * wi, wi, 1));
        while blocks.len() > 1 {
            let (s1, w1, _) = blocks[blocks.len() - 1];
            let (s0, w0, _) = blocks[blocks.len() - 2];
            if s0 / w0 <= s1 / w1 {
                break;
            }
            let last = blocks.pop().expect("len > 1");
            let prev = blocks.last_mut().expect("len > 1");
            prev.0 += last.0;
            prev.1 += last.1;
            prev.2 += last.2;
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (s, wt, count) in blocks {
        out.extend(std::iter::repeat_n(s / wt, count));
    }
    out
}

/// Monotone map learned by isotonic regression, evaluated by linear
/// interpolation between knots and clamped outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicModel {
    pub knot_x: Vec<f64>,
    pub knot_y: Vec<f64>,
}

impl IsotonicModel {
    pub fn from_knots(knot_x: Vec<f64>, knot_y: Vec<f64>) -> Result<Self> {
        ensure_dim(knot_x.len(), knot_y.len())?;
        if knot_x.is_empty() {
            return Err(Error::invalid("isotonic model needs at least one knot"));
        }
        if knot_x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("isotonic knots must be strictly ascending in x"));
        }
        if knot_y.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("isotonic knot values must be nondecreasing"));
        }
        Ok(Self { knot_x, knot_y })
    }

    pub fn predict(&self, x: f64) -> f64 {
        let (kx, ky) = (&self.knot_x, &self.knot_y);
        let n = kx.len();
        if x <= kx[0] {
            return ky[0];
        }
        if x >= kx[n - 1] {
            return ky[n - 1];
        }
        let i = kx.partition_point(|&v| v <= x);
        let (x0, x1) = (kx[i - 1], kx[i]);
        let t = (x - x0) / (x1 - x0);
        ky[i - 1] + t * (ky[i] - ky[i - 1])
    }

    pub fn predict_many(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.predict(v)).collect()
    }
}

/// Fits a nondecreasing function of `x` to `y`. Tied `x` values are pooled
/// first, so each distinct `x` becomes one knot.
pub fn isotonic_fit(x: &[f64], y: &[f64]) -> Result<IsotonicModel> {
    ensure_dim(x.len(), y.len())?;
    if x.is_empty() {
        return Err(Error::invalid("isotonic regression needs at least one point"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("isotonic inputs must be finite"));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));

    let mut ux: Vec<f64> = Vec::new();
    let mut uy: Vec<f64> = Vec::new();
    let mut uw: Vec<f64> = Vec::new();
    for &i in &order {
        match ux.last() {
            Some(&last) if last == x[i] => {
                *uy.last_mut().expect("nonempty") += y[i];
                *uw.last_mut().expect("nonempty") += 1.0;
            }
            _ => {
                ux.push(x[i]);
                uy.push(y[i]);
                uw.push(1.0);
            }
        }
    }
    let means: Vec<f64> = uy.iter().zip(&uw).map(|(s, w)| s / w).collect();
    let fitted = pava(&means, &uw);
    Ok(IsotonicModel {
        knot_x: ux,
        knot_y: fitted,
    })
}
