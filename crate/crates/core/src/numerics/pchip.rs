//! Monotone piecewise cubic Hermite interpolation (Fritsch–Carlson) and its
//! inverse.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

/// Bisection stops once the residual is this small.
const INVERT_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneInterpolant {
    pub knot_x: Vec<f64>,
    pub knot_y: Vec<f64>,
    /// Hermite derivative at each knot.
    pub slopes: Vec<f64>,
}

/// Result of inverting the interpolant at one target value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub x: f64,
    /// The target was outside the knot value range and `x` is an endpoint.
    pub clamped: bool,
}

fn direction(y: &[f64]) -> Option<f64> {
    let up = y.windows(2).all(|w| w[0] <= w[1]);
    let down = y.windows(2).all(|w| w[0] >= w[1]);
    match (up, down) {
        (true, _) => Some(1.0),
        (false, true) => Some(-1.0),
        _ => None,
    }
}

impl MonotoneInterpolant {
    /// Fits through `(x, y)`; `x` strictly ascending, `y` monotone in either
    /// direction.
    pub fn fit(x: &[f64], y: &[f64]) -> Result<Self> {
        ensure_dim(x.len(), y.len())?;
        let n = x.len();
        if n < 2 {
            return Err(Error::invalid("monotone interpolation needs at least 2 knots"));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("interpolation knots must be finite"));
        }
        if x.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("interpolation knot x must be strictly ascending"));
        }
        if direction(y).is_none() {
            return Err(Error::invalid(
                "interpolation knot y must be monotone; smooth the data first",
            ));
        }

        let secants: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut m = vec![0.0; n];
        m[0] = secants[0];
        m[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            m[i] = if secants[i - 1] * secants[i] <= 0.0 {
                0.0
            } else {
                0.5 * (secants[i - 1] + secants[i])
            };
        }
        for i in 0..n - 1 {
            let s = secants[i];
            if s == 0.0 {
                m[i] = 0.0;
                m[i + 1] = 0.0;
                continue;
            }
            let a = m[i] / s;
            let b = m[i + 1] / s;
            let r = a * a + b * b;
            if r > 9.0 {
                let t = 3.0 / r.sqrt();
                m[i] = t * a * s;
                m[i + 1] = t * b * s;
            }
        }

        Ok(Self {
            knot_x: x.to_vec(),
            knot_y: y.to_vec(),
            slopes: m,
        })
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.knot_x[0], *self.knot_x.last().expect("nonempty"))
    }

    /// Evaluates the interpolant, holding the end values outside the knots.
    pub fn eval(&self, x: f64) -> f64 {
        let (kx, ky) = (&self.knot_x, &self.knot_y);
        let n = kx.len();
        if x <= kx[0] {
            return ky[0];
        }
        if x >= kx[n - 1] {
            return ky[n - 1];
        }
        let i = kx.partition_point(|&v| v <= x) - 1;
        if x == kx[i] {
            return ky[i];
        }
        let h = kx[i + 1] - kx[i];
        let t = (x - kx[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * ky[i] + h10 * h * self.slopes[i] + h01 * ky[i + 1] + h11 * h * self.slopes[i + 1];
        // Round-off can push a cubic a hair outside its bracket.
        let (lo, hi) = if ky[i] <= ky[i + 1] {
            (ky[i], ky[i + 1])
        } else {
            (ky[i + 1], ky[i])
        };
        v.clamp(lo, hi)
    }

    /// Finds `x` with `eval(x) = target` by bisection. Targets beyond the knot
    /// values return the endpoint knot whose value is nearer, flagged as clamped.
    pub fn invert(&self, target: f64) -> Result<Inversion> {
        if !target.is_finite() {
            return Err(Error::invalid(format!("inversion target must be finite, got {target}")));
        }
        let (kx, ky) = (&self.knot_x, &self.knot_y);
        let n = kx.len();
        let sign = if ky[n - 1] > ky[0] { 1.0 } else { -1.0 };
        if ky.windows(2).any(|w| sign * (w[1] - w[0]) <= 0.0) {
            return Err(Error::numerical(
                "interpolant is not strictly monotone and cannot be inverted",
            ));
        }
        // Work in increasing orientation.
        let g = |v: f64| sign * v;
        let t = g(target);
        let (first, last) = (g(ky[0]), g(ky[n - 1]));
        if t < first {
            return Ok(Inversion {
                x: kx[0],
                clamped: true,
            });
        }
        if t > last {
            return Ok(Inversion {
                x: kx[n - 1],
                clamped: true,
            });
        }
        if let Some(i) = ky.iter().position(|&v| v == target) {
            return Ok(Inversion {
                x: kx[i],
                clamped: false,
            });
        }
        let i = ky.partition_point(|&v| g(v) < t) - 1;
        let (mut lo, mut hi) = (kx[i], kx[i + 1]);
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            let r = g(self.eval(mid)) - t;
            if r.abs() <= INVERT_TOL || mid == lo || mid == hi {
                return Ok(Inversion { x: mid, clamped: false });
            }
            if r < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Inversion {
            x: 0.5 * (lo + hi),
            clamped: false,
        })
    }
}

pub fn monotone_interp_fit(x: &[f64], y: &[f64]) -> Result<MonotoneInterpolant> {
    MonotoneInterpolant::fit(x, y)
}

pub fn monotone_interp_invert(f: &MonotoneInterpolant, target: f64) -> Result<Inversion> {
    f.invert(target)
}
