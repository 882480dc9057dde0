use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::distributions::{normal_quantile_unchecked, StudentT};
use crate::error::{invalid_param, Result};
use crate::numeric::mvn::{bvn_cdf, bvt_cdf, mv_orthant};
use crate::numeric::special::ln_gamma;

/// Absolute error target for quasi-Monte-Carlo CDF evaluation in three or more dimensions.
pub const QMC_ABS_TOL: f64 = 1e-6;

pub type Corr = Vec<Vec<f64>>;

pub fn validate_corr(corr: &Corr) -> Result<()> {
    let d = corr.len();
    if d < 2 {
        return invalid_param("correlation matrix must be at least 2x2");
    }
    for (i, row) in corr.iter().enumerate() {
        if row.len() != d {
            return invalid_param("correlation matrix must be square");
        }
        if (row[i] - 1.0).abs() > 1e-12 {
            return invalid_param("correlation matrix must have unit diagonal");
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || (v - corr[j][i]).abs() > 1e-12 {
                return invalid_param("correlation matrix must be finite and symmetric");
            }
        }
    }
    cholesky(corr).map(|_| ())
}

pub fn to_matrix(corr: &Corr) -> DMatrix<f64> {
    let d = corr.len();
    DMatrix::from_fn(d, d, |i, j| corr[i][j])
}

pub fn cholesky(corr: &Corr) -> Result<Cholesky<f64, Dyn>> {
    match Cholesky::new(to_matrix(corr)) {
        Some(c) => Ok(c),
        None => invalid_param("correlation matrix is not positive definite"),
    }
}

pub fn bivariate(rho: f64) -> Corr {
    vec![vec![1.0, rho], vec![rho, 1.0]]
}

pub fn equicorrelated(d: usize, rho: f64) -> Corr {
    (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { rho }).collect()).collect()
}

pub fn submatrix(corr: &Corr, keep: &[usize]) -> Corr {
    keep.iter().map(|&i| keep.iter().map(|&j| corr[i][j]).collect()).collect()
}

/// Rescale a positive-definite matrix to unit diagonal.
pub fn normalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { m[(i, j)] / (m[(i, i)] * m[(j, j)]).sqrt() })
}

pub fn from_matrix(m: &DMatrix<f64>) -> Corr {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Correlation matrix built from partial correlations on a C-vine, row-major over pairs `k < i`.
pub fn corr_from_partials(d: usize, partials: &[f64]) -> Corr {
    let mut p = vec![vec![0.0; d]; d];
    let mut it = partials.iter();
    for k in 0..d {
        for i in k + 1..d {
            p[k][i] = *it.next().expect("partial count");
        }
    }
    let mut r = vec![vec![0.0; d]; d];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for k in 0..d {
        for i in k + 1..d {
            let mut v = p[k][i];
            for l in (0..k).rev() {
                v = v * ((1.0 - p[l][i] * p[l][i]) * (1.0 - p[l][k] * p[l][k])).sqrt() + p[l][i] * p[l][k];
            }
            r[k][i] = v;
            r[i][k] = v;
        }
    }
    r
}

/// Inverse of [`corr_from_partials`].
pub fn partials_from_corr(corr: &Corr) -> Vec<f64> {
    let d = corr.len();
    let mut p = vec![vec![0.0; d]; d];
    let mut out = Vec::with_capacity(d * (d - 1) / 2);
    for k in 0..d {
        for i in k + 1..d {
            let mut v = corr[k][i];
            for l in 0..k {
                v = (v - p[l][i] * p[l][k]) / ((1.0 - p[l][i] * p[l][i]) * (1.0 - p[l][k] * p[l][k])).sqrt();
            }
            p[k][i] = v;
            out.push(v);
        }
    }
    out
}

/// CDF of the Gaussian (`nu = None`) or Student-t copula. Arguments equal to one are dropped
/// before integration, so margins of lower dimension are evaluated exactly.
pub fn elliptical_cdf(corr: &Corr, nu: Option<f64>, u: &[f64]) -> f64 {
    if u.iter().any(|&x| x <= 0.0) {
        return 0.0;
    }
    let keep: Vec<usize> = (0..u.len()).filter(|&i| u[i] < 1.0).collect();
    let quantile = |p: f64| match nu {
        None => normal_quantile_unchecked(p),
        Some(nu) => StudentT::new(nu).expect("validated nu").quantile_unchecked(p),
    };
    match keep.len() {
        0 => 1.0,
        1 => u[keep[0]],
        2 => {
            let (i, j) = (keep[0], keep[1]);
            let (h, k) = (quantile(u[i]), quantile(u[j]));
            match nu {
                None => bvn_cdf(h, k, corr[i][j]),
                Some(nu) => bvt_cdf(h, k, corr[i][j], nu),
            }
        }
        _ => {
            let sub = submatrix(corr, &keep);
            let chol = cholesky(&sub).expect("validated correlation").l();
            let l: Vec<Vec<f64>> = (0..keep.len()).map(|i| (0..keep.len()).map(|j| chol[(i, j)]).collect()).collect();
            let b: Vec<f64> = keep.iter().map(|&i| quantile(u[i])).collect();
            mv_orthant(&b, &l, nu, QMC_ABS_TOL).0
        }
    }
}

/// Precomputed pieces of an elliptical copula log-density for a fixed correlation matrix.
pub struct EllipticalDensity {
    inv: DMatrix<f64>,
    half_ln_det: f64,
    nu: Option<f64>,
    ln_const: f64,
}

impl EllipticalDensity {
    pub fn new(corr: &Corr, nu: Option<f64>) -> Result<Self> {
        let chol = cholesky(corr)?;
        let d = corr.len() as f64;
        let half_ln_det: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum();
        let inv = chol.inverse();
        let ln_const = match nu {
            None => 0.0,
            Some(nu) => {
                ln_gamma(0.5 * (nu + d)) + (d - 1.0) * ln_gamma(0.5 * nu) - d * ln_gamma(0.5 * (nu + 1.0))
            }
        };
        Ok(EllipticalDensity { inv, half_ln_det, nu, ln_const })
    }

    /// Log-density given the quantile-transformed point `x` (normal or t scores).
    pub fn ln_density_scores(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let mut q = 0.0;
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.inv[(i, j)] * x[j];
            }
            q += x[i] * acc;
        }
        match self.nu {
            None => {
                let ss: f64 = x.iter().map(|v| v * v).sum();
                -self.half_ln_det - 0.5 * (q - ss)
            }
            Some(nu) => {
                let marg: f64 = x.iter().map(|v| (v * v / nu).ln_1p()).sum();
                self.ln_const - self.half_ln_det - 0.5 * (nu + d as f64) * (q / nu).ln_1p()
                    + 0.5 * (nu + 1.0) * marg
            }
        }
    }
}

/// Normal or t scores of a pseudo-observation row.
pub fn scores(u: &[f64], nu: Option<f64>) -> Vec<f64> {
    match nu {
        None => u.iter().map(|&p| normal_quantile_unchecked(p)).collect(),
        Some(nu) => {
            let t = StudentT::new(nu).expect("validated nu");
            u.iter().map(|&p| t.quantile_unchecked(p)).collect()
        }
    }
}
