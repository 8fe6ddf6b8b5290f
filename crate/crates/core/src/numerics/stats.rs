use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Bessel-corrected sample variance.
pub fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Cohen's d with a pooled, Bessel-corrected standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohensD {
    pub d: f64,
    /// Set when the pooled SD is zero; `d` is then ±∞ (or 0 for equal means).
    pub zero_pooled_sd: bool,
}

pub fn cohens_d(group_a: &[f64], group_b: &[f64]) -> Result<CohensD> {
    if group_a.len() < 2 || group_b.len() < 2 {
        return Err(Error::invalid(format!(
            "Cohen's d needs at least 2 samples per group, got {} and {}",
            group_a.len(),
            group_b.len()
        )));
    }
    let (na, nb) = (group_a.len() as f64, group_b.len() as f64);
    let pooled =
        (((na - 1.0) * sample_variance(group_a) + (nb - 1.0) * sample_variance(group_b)) / (na + nb - 2.0)).sqrt();
    let diff = mean(group_a) - mean(group_b);
    if pooled == 0.0 {
        let d = if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        return Ok(CohensD {
            d,
            zero_pooled_sd: true,
        });
    }
    Ok(CohensD {
        d: diff / pooled,
        zero_pooled_sd: false,
    })
}

/// Pearson product-moment correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    ensure_dim(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::invalid("correlation needs at least 2 samples"));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("correlation undefined for zero-variance input"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Linear-interpolation quantile (type 7) of unsorted data, `q ∈ [0, 1]`.
pub fn quantile(x: &[f64], q: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cohens_d_hand_example() {
        let d = cohens_d(&[2.0, 3.0], &[0.0, 1.0]).unwrap();
        assert!((d.d - 2.0 / 0.5f64.sqrt()).abs() < 1e-12);
        assert!(!d.zero_pooled_sd);
    }

    #[test]
    fn cohens_d_identical_and_shuffled() {
        let a = [0.3, 1.7, 2.2, 0.9];
        assert_eq!(cohens_d(&a, &a).unwrap().d, 0.0);
        let shuffled = [2.2, 0.3, 0.9, 1.7];
        assert!(cohens_d(&a, &shuffled).unwrap().d.abs() < 1e-12);
    }

    #[test]
    fn cohens_d_zero_sd_sentinel() {
        let d = cohens_d(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!(d.zero_pooled_sd && d.d == f64::INFINITY);
        assert!(cohens_d(&[1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn pearson_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson_r(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_r(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson_r(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(pearson_r(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        assert!((quantile(&[0.9, 0.1], 0.75) - 0.7).abs() < 1e-12);
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
    }
}
