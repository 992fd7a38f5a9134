use super::NumericsError;

/// Solves `a x = b` for symmetric positive-definite `a` (row-major `n x n`).
pub fn cholesky_solve(a: &[f64], b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let n = b.len();
    if a.len() != n * n {
        return Err(NumericsError::DimensionMismatch {
            what: "cholesky matrix",
            expected: n * n,
            got: a.len(),
        });
    }
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(NumericsError::NotPositiveDefinite(s));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Ok(x)
}

/// Least squares `min |X w - y|^2 + reg |w|^2`. The regularizer grows tenfold
/// (up to five times) if the normal equations are not numerically positive definite.
pub fn ridge_regression(rows: &[Vec<f64>], targets: &[f64], reg: f64) -> Result<Vec<f64>, NumericsError> {
    if rows.len() != targets.len() {
        return Err(NumericsError::DimensionMismatch {
            what: "regression targets",
            expected: rows.len(),
            got: targets.len(),
        });
    }
    let d = rows.first().map_or(0, |r| r.len());
    let mut xtx = vec![0.0; d * d];
    let mut xty = vec![0.0; d];
    for (row, &y) in rows.iter().zip(targets) {
        if row.len() != d {
            return Err(NumericsError::DimensionMismatch {
                what: "regression features",
                expected: d,
                got: row.len(),
            });
        }
        for i in 0..d {
            xty[i] += row[i] * y;
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            for j in 0..=i {
                xtx[i * d + j] += ri * row[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            xtx[j * d + i] = xtx[i * d + j];
        }
    }
    let mut lambda = reg;
    let mut last = NumericsError::NotPositiveDefinite(0.0);
    for _ in 0..5 {
        let mut a = xtx.clone();
        for i in 0..d {
            a[i * d + i] += lambda;
        }
        match cholesky_solve(&a, &xty) {
            Ok(w) if w.iter().all(|v| v.is_finite()) => return Ok(w),
            Ok(_) => {}
            Err(e) => last = e,
        }
        lambda *= 10.0;
    }
    Err(last)
}
