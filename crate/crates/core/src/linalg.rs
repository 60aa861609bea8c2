//! Weighted ridge least squares with an unpenalized intercept.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

/// Minimizes `sum_i w_i (y_i - b - c . x_i)^2 + lambda * |c|^2`.
///
/// Solved on weighted-centered data, which removes the intercept from the
/// normal equations; the remaining k x k system is factored by Cholesky.
pub fn weighted_ridge(rows: &[Vec<f64>], y: &[f64], weights: &[f64], lambda: f64) -> Result<LinearFit> {
    let n = rows.len();
    if y.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: y.len(),
        });
    }
    if weights.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: weights.len(),
        });
    }
    if n == 0 {
        return Err(Error::InsufficientHistory {
            needed: 1,
            available: 0,
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("ridge penalty must be >= 0, got {lambda}")));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::Config(format!("weights must be positive and finite, got {w}")));
    }
    let k = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != k) {
        return Err(Error::Dimension {
            expected: k,
            actual: r.len(),
        });
    }

    let wsum: f64 = weights.iter().sum();
    let mut xbar = vec![0.0; k];
    let mut ybar = 0.0;
    for ((row, &yi), &wi) in rows.iter().zip(y).zip(weights) {
        for (m, &x) in xbar.iter_mut().zip(row) {
            *m += wi * x;
        }
        ybar += wi * yi;
    }
    xbar.iter_mut().for_each(|m| *m /= wsum);
    ybar /= wsum;

    let mut a = vec![0.0; k * k];
    let mut b = vec![0.0; k];
    let mut xc = vec![0.0; k];
    let mut raw = vec![0.0; k];
    for ((row, &yi), &wi) in rows.iter().zip(y).zip(weights) {
        for j in 0..k {
            xc[j] = row[j] - xbar[j];
            raw[j] += wi * row[j] * row[j];
        }
        let yc = yi - ybar;
        for i in 0..k {
            let wx = wi * xc[i];
            b[i] += wx * yc;
            for j in 0..=i {
                a[i * k + j] += wx * xc[j];
            }
        }
    }
    for i in 0..k {
        a[i * k + i] += lambda;
        for j in 0..i {
            a[j * k + i] = a[i * k + j];
        }
    }

    let coefficients = if k == 0 {
        Vec::new()
    } else {
        let tol: Vec<f64> = if lambda > 0.0 {
            vec![0.0; k]
        } else {
            raw.iter().map(|r| 1e-12 * r.max(f64::MIN_POSITIVE)).collect()
        };
        cholesky_solve(&mut a, &mut b, k, &tol)?;
        b
    };
    let intercept = ybar - coefficients.iter().zip(&xbar).map(|(c, m)| c * m).sum::<f64>();
    Ok(LinearFit {
        intercept,
        coefficients,
    })
}

/// In-place Cholesky factorization and solve of a symmetric k x k system.
/// A squared pivot at or below `tol[j]` is treated as rank deficiency.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], k: usize, tol: &[f64]) -> Result<()> {
    for j in 0..k {
        let mut d = a[j * k + j];
        for p in 0..j {
            d -= a[j * k + p] * a[j * k + p];
        }
        if !(d > tol[j]) || !d.is_finite() {
            return Err(Error::Singular);
        }
        let d = d.sqrt();
        a[j * k + j] = d;
        for i in j + 1..k {
            let mut s = a[i * k + j];
            for p in 0..j {
                s -= a[i * k + p] * a[j * k + p];
            }
            a[i * k + j] = s / d;
        }
    }
    // L z = b
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s -= a[i * k + p] * b[p];
        }
        b[i] = s / a[i * k + i];
    }
    // L^T x = z
    for i in (0..k).rev() {
        let mut s = b[i];
        for p in i + 1..k {
            s -= a[p * k + i] * b[p];
        }
        b[i] = s / a[i * k + i];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
        let fit = weighted_ridge(&rows, &[2.0, 4.0, 6.0], &[1.0; 3], 0.0).unwrap();
        assert!(fit.intercept.abs() < 1e-10);
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn no_features_is_weighted_mean() {
        let rows = vec![vec![]; 3];
        let fit = weighted_ridge(&rows, &[1.0, 2.0, 4.0], &[1.0, 1.0, 2.0], 0.0).unwrap();
        assert!((fit.intercept - 11.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn collinear_without_ridge_is_singular() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        assert!(matches!(
            weighted_ridge(&rows, &[1.0, 2.0, 3.0], &[1.0; 3], 0.0),
            Err(Error::Singular)
        ));
        assert!(weighted_ridge(&rows, &[1.0, 2.0, 3.0], &[1.0; 3], 1e-8).is_ok());
    }

    #[test]
    fn constant_column_without_ridge_is_singular() {
        // 0.1 is not exactly representable, so the weighted mean carries roundoff.
        let rows = vec![vec![0.1]; 300];
        let y = vec![1.0; 300];
        assert!(matches!(weighted_ridge(&rows, &y, &vec![1.0; 300], 0.0), Err(Error::Singular)));
        let fit = weighted_ridge(&rows, &y, &vec![1.0; 300], 1e-8).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_weights() {
        let rows = vec![vec![1.0], vec![2.0]];
        assert!(weighted_ridge(&rows, &[1.0, 2.0], &[1.0, 0.0], 0.0).is_err());
        assert!(weighted_ridge(&rows, &[1.0, 2.0], &[1.0], 0.0).is_err());
    }
}
