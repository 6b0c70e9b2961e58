//! Ordinary least squares by Householder QR.

use serde::{Deserialize, Serialize};

use super::stats::two_sided_p;
use super::RegressionError;

/// Relative column norm below which a column counts as dependent on the
/// columns before it.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub stderr: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub r_squared: f64,
    pub ssr: f64,
    pub sst: f64,
    pub n: usize,
    pub dof: usize,
}

impl OlsFit {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Fits `y = X b + e` where `x` holds the design columns (an intercept, if
/// wanted, must be one of them). `R²` is `1 - SSR/SST` with SST centred,
/// and is 0 when `y` is constant.
pub fn ols(columns: &[Vec<f64>], names: &[String], y: &[f64]) -> Result<OlsFit, RegressionError> {
    let n = y.len();
    let p = columns.len();
    if names.len() != p {
        return Err(RegressionError::LengthMismatch {
            what: "column names",
            expected: p,
            found: names.len(),
        });
    }
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(RegressionError::LengthMismatch {
            what: "design column",
            expected: n,
            found: c.len(),
        });
    }
    if n <= p {
        return Err(RegressionError::NotEnoughObservations { n, p });
    }

    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let constant = y.iter().all(|v| *v == y[0]);
    if constant {
        if let Some(fit) = constant_fit(columns, names, y, n) {
            return Ok(fit);
        }
    }

    // a[j] is column j, reduced in place to R's column j above the diagonal
    let mut a: Vec<Vec<f64>> = columns.to_vec();
    let mut qty = y.to_vec();
    for j in 0..p {
        let original: f64 = columns[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm: f64 = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if original == 0.0 || norm <= RANK_TOL * original {
            return Err(RegressionError::RankDeficient {
                column: names[j].clone(),
            });
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        let reflect = |col: &mut [f64]| {
            let dot: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in col.iter_mut().zip(&v) {
                *c -= f * vi;
            }
        };
        a[j][j] = alpha;
        for x in a[j][j + 1..].iter_mut() {
            *x = 0.0;
        }
        for col in a.iter_mut().skip(j + 1) {
            reflect(&mut col[j..]);
        }
        reflect(&mut qty[j..]);
    }

    // R b = Q'y
    let r = |i: usize, j: usize| a[j][i];
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| r(i, j) * beta[j]).sum();
        beta[i] = (qty[i] - s) / r(i, i);
    }
    // inverse of R, upper triangular; diag((X'X)^-1) = row sums of squares
    let mut rinv = vec![vec![0.0; p]; p];
    for i in (0..p).rev() {
        rinv[i][i] = 1.0 / r(i, i);
        for j in i + 1..p {
            let s: f64 = (i + 1..=j).map(|k| r(i, k) * rinv[k][j]).sum();
            rinv[i][j] = -s / r(i, i);
        }
    }

    let ssr: f64 = (0..n)
        .map(|i| {
            let fit: f64 = columns.iter().zip(&beta).map(|(c, b)| c[i] * b).sum();
            (y[i] - fit) * (y[i] - fit)
        })
        .sum();
    let dof = n - p;
    let sigma2 = ssr / dof as f64;
    let mut stderr = Vec::with_capacity(p);
    let mut t = Vec::with_capacity(p);
    let mut pv = Vec::with_capacity(p);
    for (i, b) in beta.iter().enumerate() {
        let diag: f64 = rinv[i].iter().map(|v| v * v).sum();
        let se = (sigma2 * diag).sqrt();
        let ti = t_stat(*b, se);
        stderr.push(se);
        t.push(ti);
        pv.push(two_sided_p(ti, dof as f64)?);
    }
    let r_squared = if constant || sst == 0.0 {
        0.0
    } else {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    };
    Ok(OlsFit {
        names: names.to_vec(),
        coefficients: beta,
        stderr,
        t,
        p: pv,
        r_squared,
        ssr,
        sst,
        n,
        dof,
    })
}

fn t_stat(beta: f64, se: f64) -> f64 {
    if se > 0.0 {
        beta / se
    } else if beta == 0.0 {
        0.0
    } else {
        beta.signum() * f64::INFINITY
    }
}

/// Exact answer for constant `y` when the design has a constant column:
/// that column absorbs y, every other coefficient is 0 with p = 1.
fn constant_fit(columns: &[Vec<f64>], names: &[String], y: &[f64], n: usize) -> Option<OlsFit> {
    let p = columns.len();
    let ci = columns
        .iter()
        .position(|c| c[0] != 0.0 && c.iter().all(|v| *v == c[0]))?;
    let mut coefficients = vec![0.0; p];
    coefficients[ci] = y[0] / columns[ci][0];
    Some(OlsFit {
        names: names.to_vec(),
        coefficients,
        stderr: vec![0.0; p],
        t: vec![0.0; p],
        p: vec![1.0; p],
        r_squared: 0.0,
        ssr: 0.0,
        sst: 0.0,
        n,
        dof: n - p,
    })
}

/// Intercept column followed by the given predictors.
pub fn with_intercept(predictors: &[Vec<f64>], names: &[String], n: usize) -> (Vec<Vec<f64>>, Vec<String>) {
    let mut cols = vec![vec![1.0; n]];
    cols.extend(predictors.iter().cloned());
    let mut all = vec!["intercept".to_string()];
    all.extend(names.iter().cloned());
    (cols, all)
}
