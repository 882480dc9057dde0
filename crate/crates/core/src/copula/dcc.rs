use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::elliptical::{self, Corr, EllipticalDensity};
use super::fit::{check_pseudo_obs, NU_MAX};
use crate::distributions::{clamp_unit, StudentT};
use crate::error::{invalid_param, Error, Result};
use crate::numeric::{minimize_bounded_scalar, nelder_mead, NelderMeadOptions};

/// DCC recursion for a t copula:
/// `Q_t = (1 - a - b) Q̄ + a z*_{t-1} z*_{t-1}' + b Q_{t-1}`, `Q_0 = Q̄`,
/// `R_t = diag(Q_t)^{-1/2} Q_t diag(Q_t)^{-1/2}`, with `z*` the unit-variance t scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DccTSpec {
    pub a: f64,
    pub b: f64,
    pub nu: f64,
    pub q_bar: Vec<Vec<f64>>,
}

impl DccTSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.b >= 0.0) {
            return invalid_param(format!("DCC coefficients must be nonnegative, got a={}, b={}", self.a, self.b));
        }
        if self.a + self.b >= 1.0 {
            return invalid_param(format!("DCC requires a + b < 1, got {}", self.a + self.b));
        }
        if !(self.nu > 2.0 && self.nu.is_finite()) {
            return invalid_param(format!("DCC nu must exceed 2, got {}", self.nu));
        }
        let d = self.q_bar.len();
        if d < 2 || self.q_bar.iter().any(|r| r.len() != d) {
            return invalid_param("DCC Q-bar must be a square matrix of size at least 2");
        }
        elliptical::cholesky(&self.q_bar).map(|_| ())
    }
}

fn standardized_scores(u: &[Vec<f64>], nu: f64) -> Vec<Vec<f64>> {
    let t = StudentT::new(nu).expect("validated nu");
    let s = ((nu - 2.0) / nu).sqrt();
    u.iter().map(|r| r.iter().map(|&p| t.quantile_unchecked(p) * s).collect()).collect()
}

fn r_path_from_scores(a: f64, b: f64, q_bar: &DMatrix<f64>, z: &[Vec<f64>]) -> Vec<DMatrix<f64>> {
    let d = q_bar.nrows();
    let mut q = q_bar.clone();
    let mut out = Vec::with_capacity(z.len());
    for zt in z {
        out.push(elliptical::normalize(&q));
        let outer = DMatrix::from_fn(d, d, |i, j| zt[i] * zt[j]);
        q = q_bar * (1.0 - a - b) + outer * a + &q * b;
    }
    out
}

/// Correlation-matrix path of the DCC recursion for the given pseudo-observations.
pub fn dcc_r_path(u: &[Vec<f64>], spec: &DccTSpec) -> Result<Vec<Corr>> {
    spec.validate()?;
    let d = spec.q_bar.len();
    for row in u {
        if row.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: row.len() });
        }
    }
    let z = standardized_scores(u, spec.nu);
    let q_bar = elliptical::to_matrix(&spec.q_bar);
    Ok(r_path_from_scores(spec.a, spec.b, &q_bar, &z).iter().map(elliptical::from_matrix).collect())
}

fn loglik(u_scores: &[Vec<f64>], z: &[Vec<f64>], a: f64, b: f64, nu: f64, q_bar: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for (r, x) in r_path_from_scores(a, b, q_bar, z).iter().zip(u_scores) {
        match EllipticalDensity::new(&elliptical::from_matrix(r), Some(nu)) {
            Ok(dens) => total += dens.ln_density_scores(x),
            Err(_) => return f64::NEG_INFINITY,
        }
    }
    total
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DccFit {
    pub spec: DccTSpec,
    pub loglik: f64,
    pub aic: f64,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Two-stage fit: Q̄ is the sample second moment of the standardized t scores for each
/// candidate ν; (a, b) are then estimated by maximum likelihood and ν is profiled.
pub fn fit_dcc(u: &[Vec<f64>]) -> Result<DccFit> {
    check_pseudo_obs(u, 50)?;
    let n = u.len() as f64;
    let stage = |nu: f64, warm: &[f64]| -> Result<(Vec<f64>, f64, DMatrix<f64>)> {
        let z = standardized_scores(u, nu);
        let d = z[0].len();
        let mut m = DMatrix::zeros(d, d);
        for zt in &z {
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] += zt[i] * zt[j] / n;
                }
            }
        }
        if m.clone().cholesky().is_none() {
            return Err(Error::Fit("sample second-moment matrix of the scores is not positive definite".into()));
        }
        let scale = (nu / (nu - 2.0)).sqrt();
        let x: Vec<Vec<f64>> = z.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
        let nll = |p: &[f64]| {
            let s = 0.999 * logistic(p[0]);
            let a = s * logistic(p[1]);
            -loglik(&x, &z, a, s - a, nu, &m)
        };
        let res = nelder_mead(nll, warm, &NelderMeadOptions::new(2).with_step(vec![0.5, 0.5]));
        Ok((res.x, res.value, m))
    };

    let start = vec![logit(0.95 / 0.999), logit(0.05 / 0.95)];
    let mut warm = start.clone();
    let mut failure = None;
    let (z, _) = minimize_bounded_scalar(
        |lz| match stage(2.0 + lz.exp(), &warm) {
            Ok((x, v, _)) => {
                if v.is_finite() {
                    warm = x;
                }
                v
            }
            Err(e) => {
                failure = Some(e);
                f64::INFINITY
            }
        },
        (0.05f64).ln(),
        (NU_MAX - 2.0).ln(),
        1e-3,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let nu = 2.0 + z.exp();
    let (x, v, m) = stage(nu, &warm)?;
    if !v.is_finite() {
        return Err(Error::Fit("DCC likelihood is not finite".into()));
    }
    let s = 0.999 * logistic(x[0]);
    let a = s * logistic(x[1]);
    let spec = DccTSpec { a, b: s - a, nu, q_bar: elliptical::from_matrix(&m) };
    Ok(DccFit { spec, loglik: -v, aic: 6.0 + 2.0 * v })
}

/// Simulates `n` pseudo-observations from the DCC t copula. Returns `(rows, R path)`.
pub fn simulate_dcc(spec: &DccTSpec, n: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<Corr>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.q_bar.len();
    let t = StudentT::new(spec.nu)?;
    let chi = ChiSquared::new(spec.nu).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let q_bar = elliptical::to_matrix(&spec.q_bar);
    let std_scale = ((spec.nu - 2.0) / spec.nu).sqrt();
    let mut q = q_bar.clone();
    let mut rows = Vec::with_capacity(n);
    let mut path = Vec::with_capacity(n);
    for _ in 0..n {
        let r = elliptical::normalize(&q);
        let l = r.clone().cholesky().ok_or_else(|| Error::Fit("DCC correlation lost definiteness".into()))?.l();
        let e: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let w = (spec.nu / chi.sample(&mut rng)).sqrt();
        let x: Vec<f64> = (0..d).map(|i| (0..=i).map(|j| l[(i, j)] * e[j]).sum::<f64>() * w).collect();
        rows.push(x.iter().map(|&v| clamp_unit(t.cdf(v))).collect());
        let z = DMatrix::from_fn(d, d, |i, j| x[i] * x[j] * std_scale * std_scale);
        q = &q_bar * (1.0 - spec.a - spec.b) + z * spec.a + &q * spec.b;
        path.push(elliptical::from_matrix(&r));
    }
    Ok((rows, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q_bar() -> Vec<Vec<f64>> {
        vec![vec![1.0, 0.5, 0.3], vec![0.5, 1.0, 0.4], vec![0.3, 0.4, 1.0]]
    }

    #[test]
    fn static_recursion_is_constant() {
        let spec = DccTSpec { a: 0.0, b: 0.0, nu: 6.0, q_bar: vec![vec![2.0, 0.6], vec![0.6, 0.5]] };
        let u: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 + 0.5) / 20.0, 1.0 - (i as f64 + 0.5) / 20.0]).collect();
        let path = dcc_r_path(&u, &spec).unwrap();
        let expected = 0.6 / (2.0f64 * 0.5).sqrt();
        assert!(path.iter().all(|r| (r[0][1] - expected).abs() < 1e-15));
    }

    #[test]
    fn unit_diagonal() {
        let spec = DccTSpec { a: 0.08, b: 0.9, nu: 5.0, q_bar: q_bar() };
        let (u, _) = simulate_dcc(&spec, 300, 3).unwrap();
        for r in dcc_r_path(&u, &spec).unwrap() {
            for i in 0..3 {
                assert!((r[i][i] - 1.0).abs() < 1e-14);
            }
            elliptical::validate_corr(&r).unwrap();
        }
    }

    #[test]
    fn invalid_specs() {
        let bad = DccTSpec { a: 0.5, b: 0.5, nu: 5.0, q_bar: q_bar() };
        assert!(dcc_r_path(&[vec![0.5; 3]], &bad).is_err());
        let non_pd = DccTSpec { a: 0.1, b: 0.1, nu: 5.0, q_bar: vec![vec![1.0, 2.0], vec![2.0, 1.0]] };
        assert!(dcc_r_path(&[vec![0.5; 2]], &non_pd).is_err());
    }

    #[test]
    fn refit_recovers_persistence() {
        let spec = DccTSpec { a: 0.05, b: 0.9, nu: 6.0, q_bar: q_bar() };
        let (u, _) = simulate_dcc(&spec, 2000, 17).unwrap();
        let fit = fit_dcc(&u).unwrap();
        let s = fit.spec.a + fit.spec.b;
        assert!((s - 0.95).abs() < 0.1, "{:?}", fit.spec);
    }
}
