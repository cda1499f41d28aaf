//! Small statistics helpers: log-log slope fits and sample covariances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Ordinary least squares of `ys` on `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Domain(format!("need matching sequences of length >= 2, got {} and {}", xs.len(), ys.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if xs.len() > 2 {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit { slope, intercept, stderr })
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn slope_fit(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() < 4 {
        return Err(Error::Domain(format!("slope fit needs at least 4 points, got {}", xs.len())));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| v.is_nan() || **v <= 0.0) {
        return Err(Error::Domain(format!("slope fit needs positive values, got {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Sample mean and unbiased covariance of the rows.
#[allow(clippy::needless_range_loop)]
pub fn mean_and_covariance<const D: usize>(rows: &[[f64; D]]) -> ([f64; D], [[f64; D]; D]) {
    let r = rows.len();
    let mut mean = [0.0; D];
    for row in rows {
        for i in 0..D {
            mean[i] += row[i];
        }
    }
    for m in &mut mean {
        *m /= r as f64;
    }
    let mut cov = [[0.0; D]; D];
    if r < 2 {
        return (mean, cov);
    }
    for row in rows {
        for i in 0..D {
            let di = row[i] - mean[i];
            for j in i..D {
                cov[i][j] += di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..D {
        for j in i..D {
            cov[i][j] /= (r - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    (mean, cov)
}

/// Second moments about a fixed centre, `(1/R) Σ (row - c)(row - c)ᵗ`.
pub fn second_moment_about<const D: usize>(rows: &[[f64; D]], centre: &[f64; D]) -> [[f64; D]; D] {
    let mut out = [[0.0; D]; D];
    if rows.is_empty() {
        return out;
    }
    for row in rows {
        for i in 0..D {
            for j in 0..D {
                out[i][j] += (row[i] - centre[i]) * (row[j] - centre[j]);
            }
        }
    }
    for r in out.iter_mut() {
        for v in r.iter_mut() {
            *v /= rows.len() as f64;
        }
    }
    out
}
