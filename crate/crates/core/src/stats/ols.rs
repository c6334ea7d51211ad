//! Least squares via Householder QR.

use serde::{Deserialize, Serialize};

use super::distribution::{cap_p_value, two_sided_t};
use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged design rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values do not fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Keep only the listed columns, in the given order.
    pub fn select_columns(&self, keep: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, keep.len());
        for r in 0..self.rows {
            for (j, &c) in keep.iter().enumerate() {
                out.set(r, j, self.get(r, c));
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Relative threshold under which a column is treated as collinear.
const RANK_TOL: f64 = 1e-10;

/// Householder factorization that skips (drops) numerically dependent columns.
struct Qr {
    /// Column-major working copy; upper part holds R for kept columns.
    a: Vec<Vec<f64>>,
    /// Householder vectors, one per kept column.
    reflectors: Vec<Vec<f64>>,
    kept: Vec<usize>,
    dropped: Vec<usize>,
    n: usize,
}

impl Qr {
    fn factor(x: &Matrix) -> Self {
        let n = x.rows();
        let k = x.cols();
        let mut a: Vec<Vec<f64>> = (0..k).map(|c| x.column(c)).collect();
        let norms: Vec<f64> = a.iter().map(|c| norm(c)).collect();
        let mut reflectors = Vec::new();
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        for j in 0..k {
            let r = kept.len();
            if r >= n {
                dropped.push(j);
                continue;
            }
            let sub = norm(&a[j][r..]);
            if sub <= RANK_TOL * norms[j] || norms[j] == 0.0 {
                dropped.push(j);
                continue;
            }
            let alpha = if a[j][r] > 0.0 { -sub } else { sub };
            let mut v: Vec<f64> = a[j][r..].to_vec();
            v[0] -= alpha;
            let vnorm = norm(&v);
            for x in v.iter_mut() {
                *x /= vnorm;
            }
            for col in a.iter_mut().skip(j) {
                reflect(&v, &mut col[r..]);
            }
            reflectors.push(v);
            kept.push(j);
        }
        Qr {
            a,
            reflectors,
            kept,
            dropped,
            n,
        }
    }

    fn rank(&self) -> usize {
        self.kept.len()
    }

    /// Apply Q' to `y`.
    fn qt(&self, y: &[f64]) -> Vec<f64> {
        let mut z = y.to_vec();
        for (r, v) in self.reflectors.iter().enumerate() {
            reflect(v, &mut z[r..]);
        }
        z
    }

    /// Upper-triangular R restricted to kept columns.
    fn r(&self, i: usize, j: usize) -> f64 {
        self.a[self.kept[j]][i]
    }

    /// Coefficients for the kept columns.
    fn solve(&self, y: &[f64]) -> Vec<f64> {
        let z = self.qt(y);
        let k = self.rank();
        let mut b = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = z[i];
            for j in i + 1..k {
                s -= self.r(i, j) * b[j];
            }
            b[i] = s / self.r(i, i);
        }
        b
    }

    /// Diagonal of (R'R)^{-1}.
    fn inverse_gram_diagonal(&self) -> Vec<f64> {
        let k = self.rank();
        // Rinv is upper triangular; solve R * col = e_c column by column.
        let mut rinv = vec![vec![0.0; k]; k];
        for c in 0..k {
            for i in (0..=c).rev() {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for j in i + 1..=c {
                    s -= self.r(i, j) * rinv[j][c];
                }
                rinv[i][c] = s / self.r(i, i);
            }
        }
        rinv.iter()
            .map(|row| row.iter().map(|v| v * v).sum())
            .collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    // scaled to avoid overflow on large demand values
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale
        * v.iter()
            .map(|x| (x / scale) * (x / scale))
            .sum::<f64>()
            .sqrt()
}

fn reflect(v: &[f64], x: &mut [f64]) {
    let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= 2.0 * dot * vi;
    }
}

/// Ordinary least squares estimates with classical inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    #[serde(with = "crate::serde_nonfinite::vec")]
    pub t_statistics: Vec<f64>,
    pub p_values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub sse: f64,
    pub n_obs: usize,
    pub n_params: usize,
}

impl RegressionFit {
    pub fn df_resid(&self) -> usize {
        self.n_obs - self.n_params
    }

    /// Unbiased residual variance estimate.
    pub fn sigma2(&self) -> f64 {
        self.sse / self.df_resid() as f64
    }
}

fn check_inputs(design: &Matrix, response: &[f64]) -> Result<()> {
    if design.rows() != response.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows but response has {} values",
            design.rows(),
            response.len()
        )));
    }
    if design.cols() == 0 {
        return Err(Error::InvalidInput("design has no columns".into()));
    }
    if design.data.iter().chain(response).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "non-finite value in regression input".into(),
        ));
    }
    Ok(())
}

/// Fit `response ~ design` by least squares.
///
/// Fails with [`Error::InsufficientData`] when there are no residual degrees
/// of freedom and with [`Error::RankDeficient`] naming the columns that are
/// linear combinations of earlier ones.
pub fn ols_fit(design: &Matrix, response: &[f64]) -> Result<RegressionFit> {
    check_inputs(design, response)?;
    let n = design.rows();
    let k = design.cols();
    if n <= k {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {k} parameters"
        )));
    }
    let qr = Qr::factor(design);
    if !qr.dropped.is_empty() {
        return Err(Error::RankDeficient {
            columns: qr.dropped.clone(),
        });
    }
    let coefficients = qr.solve(response);
    let fitted = design.mul_vec(&coefficients);
    let residuals: Vec<f64> = response.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let df = (n - k) as f64;
    let sigma2 = sse / df;
    let diag = qr.inverse_gram_diagonal();
    let standard_errors: Vec<f64> = diag.iter().map(|d| (sigma2 * d).sqrt()).collect();
    let mut t_statistics = Vec::with_capacity(k);
    let mut p_values = Vec::with_capacity(k);
    for (b, se) in coefficients.iter().zip(&standard_errors) {
        let t = if *se > 0.0 {
            b / se
        } else if *b == 0.0 {
            0.0
        } else {
            b.signum() * f64::INFINITY
        };
        t_statistics.push(t);
        p_values.push(cap_p_value(two_sided_t(t, df)?));
    }
    Ok(RegressionFit {
        coefficients,
        standard_errors,
        t_statistics,
        p_values,
        residuals,
        fitted,
        sse,
        n_obs: n,
        n_params: k,
    })
}

/// Residual sum of squares and numerical rank, tolerating dependent columns.
pub(crate) fn rank_aware_sse(design: &Matrix, response: &[f64]) -> Result<(f64, usize)> {
    check_inputs(design, response)?;
    let qr = Qr::factor(design);
    let b = qr.solve(response);
    let x = design.select_columns(&qr.kept);
    let fitted = x.mul_vec(&b);
    let sse = response
        .iter()
        .zip(&fitted)
        .map(|(y, f)| (y - f) * (y - f))
        .sum();
    debug_assert_eq!(qr.n, response.len());
    Ok((sse, qr.rank()))
}
