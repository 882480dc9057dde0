use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fit::FittedMarginal;
use super::model::VarianceKind;
use crate::distributions::StudentT;
use crate::error::{invalid_input, Error, Result};
use crate::numeric::special::{chi2_sf, f_sf, gamma_sf};
use crate::stats::autocorrelations;

/// Default number of lags for the portmanteau tests.
pub const DEFAULT_LAGS: usize = 8;
/// Significance level for all diagnostic decisions.
pub const LEVEL: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

impl TestResult {
    pub fn passes(&self) -> bool {
        self.p_value > LEVEL
    }
}

/// Ljung–Box `Q = n(n+2) Σ r_k² / (n-k)` against χ²(lags − dof_reduction).
pub fn ljung_box(x: &[f64], lags: usize, dof_reduction: usize) -> Result<TestResult> {
    if lags <= dof_reduction {
        return invalid_input(format!("Ljung-Box needs lags ({lags}) > dof reduction ({dof_reduction})"));
    }
    let n = x.len();
    if n <= lags + 1 {
        return invalid_input(format!("Ljung-Box needs more than {} observations", lags + 1));
    }
    let r = autocorrelations(x, lags);
    let nf = n as f64;
    let q: f64 = r.iter().enumerate().map(|(k, rk)| rk * rk / (nf - (k + 1) as f64)).sum::<f64>() * nf * (nf + 2.0);
    Ok(TestResult { statistic: q, p_value: chi2_sf(q, (lags - dof_reduction) as f64) })
}

/// McLeod–Li test: Ljung–Box applied to the squared series.
pub fn mcleod_li(x: &[f64], lags: usize, dof_reduction: usize) -> Result<TestResult> {
    let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    ljung_box(&sq, lags, dof_reduction)
}

/// Weighted Li–Mak statistic on squared standardized residuals with `fitdf` fitted
/// ARCH/GARCH parameters: `n Σ_{k=fitdf+1}^{lags} w_k r_k²`, `w_k = (lags − k + fitdf + 1) / lags`,
/// referred to a gamma distribution. With `weighted = false` all weights are one and the
/// reference is χ²(lags − fitdf).
pub fn weighted_li_mak_statistic(z: &[f64], lags: usize, fitdf: usize, weighted: bool) -> Result<TestResult> {
    if lags <= fitdf {
        return invalid_input(format!("weighted Li-Mak test needs lags ({lags}) > fitted order ({fitdf})"));
    }
    let n = z.len();
    if n <= lags + 1 {
        return invalid_input(format!("weighted Li-Mak test needs more than {} observations", lags + 1));
    }
    let sq: Vec<f64> = z.iter().map(|v| v * v).collect();
    let r = autocorrelations(&sq, lags);
    let (l, b) = (lags as f64, fitdf as f64);
    let nf = n as f64;
    if !weighted {
        let stat: f64 = nf * r[fitdf..].iter().map(|v| v * v).sum::<f64>();
        return Ok(TestResult { statistic: stat, p_value: chi2_sf(stat, l - b) });
    }
    let stat: f64 = nf
        * (fitdf + 1..=lags).map(|k| (l - k as f64 + b + 1.0) / l * r[k - 1] * r[k - 1]).sum::<f64>();
    let denom = 2.0 * l * l + 3.0 * l + 2.0 * l * b + 2.0 * b * b + 3.0 * b + 1.0;
    let shape = 0.75 * (l + b + 1.0).powi(2) * (l - b) / denom;
    let scale = (2.0 / 3.0) * denom / (l * (l + b + 1.0));
    Ok(TestResult { statistic: stat, p_value: gamma_sf(stat, shape, scale) })
}

/// Weighted Li–Mak test for a fitted model, correcting for its `P + Q` variance parameters.
pub fn weighted_li_mak(fitted: &FittedMarginal, lags: usize) -> Result<TestResult> {
    let fitdf = match fitted.spec.variance {
        VarianceKind::None => 0,
        _ => fitted.spec.arch + fitted.spec.garch,
    };
    weighted_li_mak_statistic(&fitted.z, lags, fitdf, true)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignBias {
    pub sign: TestResult,
    pub negative: TestResult,
    pub positive: TestResult,
    pub joint: TestResult,
}

impl SignBias {
    pub fn passes(&self) -> bool {
        self.passes_at(LEVEL)
    }

    pub fn passes_at(&self, level: f64) -> bool {
        [self.sign, self.negative, self.positive, self.joint].iter().all(|t| t.p_value > level)
    }
}

/// Sign-bias regression `z_t² = c0 + c1 S⁻ + c2 S⁻ ε_{t-1} + c3 S⁺ ε_{t-1}` with
/// `S⁻ = 1{ε_{t-1} < 0}`; t-tests on c1..c3 and an F-test of all three.
pub fn sign_bias_regression(z: &[f64], eps: &[f64]) -> Result<SignBias> {
    if z.len() != eps.len() {
        return Err(Error::DimensionMismatch { expected: z.len(), got: eps.len() });
    }
    let n = z.len() - 1;
    if n < 10 {
        return invalid_input("sign-bias test needs at least 11 observations");
    }
    let negatives = eps[..n].iter().filter(|&&e| e < 0.0).count();
    if negatives == 0 || negatives == n {
        return invalid_input("sign-bias test: lagged residuals all share one sign");
    }
    let y = DVector::from_iterator(n, z[1..].iter().map(|v| v * v));
    let x = DMatrix::from_fn(n, 4, |t, j| {
        let e = eps[t];
        let neg = if e < 0.0 { 1.0 } else { 0.0 };
        match j {
            0 => 1.0,
            1 => neg,
            2 => neg * e,
            _ => (1.0 - neg) * e,
        }
    });
    let xtx = x.transpose() * &x;
    let inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("sign-bias test: regressors are collinear".into()))?;
    let beta = &inv * (x.transpose() * &y);
    let resid = &y - &x * &beta;
    let rss = resid.dot(&resid);
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if !(tss > 0.0) || !(rss > 0.0) {
        return invalid_input("sign-bias test: squared residuals are constant");
    }
    let df = (n - 4) as f64;
    let s2 = rss / df;
    let t = StudentT::new(df)?;
    let t_test = |j: usize| {
        let stat = beta[j] / (s2 * inv[(j, j)]).sqrt();
        TestResult { statistic: stat, p_value: (2.0 * t.cdf(-stat.abs())).min(1.0) }
    };
    let f = ((tss - rss) / 3.0) / s2;
    Ok(SignBias {
        sign: t_test(1),
        negative: t_test(2),
        positive: t_test(3),
        joint: TestResult { statistic: f, p_value: f_sf(f, 3.0, df) },
    })
}

pub fn sign_bias_tests(fitted: &FittedMarginal) -> Result<SignBias> {
    sign_bias_regression(&fitted.z, &fitted.eps)
}

/// Diagnostic summary reported alongside a fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub lags: usize,
    pub ljung_box: Option<TestResult>,
    pub ljung_box_squared: Option<TestResult>,
    pub weighted_li_mak: Option<TestResult>,
    pub sign_bias: Option<SignBias>,
}

/// Runs every test that applies to the fitted model; tests that cannot be computed are `None`.
pub fn diagnose(fitted: &FittedMarginal, lags: usize) -> Diagnostics {
    let arma = fitted.spec.ar + fitted.spec.ma;
    let lb_lags = lags.max(arma + 1);
    Diagnostics {
        lags,
        ljung_box: ljung_box(&fitted.z, lb_lags, arma).ok(),
        ljung_box_squared: mcleod_li(&fitted.z, lb_lags, arma).ok(),
        weighted_li_mak: weighted_li_mak(fitted, lags).ok(),
        sign_bias: sign_bias_tests(fitted).ok(),
    }
}
