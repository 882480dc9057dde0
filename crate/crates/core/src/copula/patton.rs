use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::fit::{check_pseudo_obs, fit_ml, NU_MAX};
use super::{CopulaSpec, Family};
use crate::distributions::{clamp_unit, StudentT};
use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::numeric::special::ln_gamma;
use crate::numeric::{minimize_bounded_scalar, nelder_mead, NelderMeadOptions};

/// Number of lagged score products averaged in the forcing term.
pub const PATTON_LAGS: usize = 10;

/// tanh saturates to ±1 in floating point; keep the correlation strictly inside.
const THETA_MAX: f64 = 1.0 - 1e-10;

/// Time-varying bivariate t copula with correlation
/// `θ_t = tanh((ω + β θ_{t-1} + c · mean_l x1_{t-l} x2_{t-l}) / 2)`,
/// where `x = t_ν^{-1}(u)` and the mean runs over the last `min(t, 10)` observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PattonTSpec {
    pub omega: f64,
    pub beta: f64,
    pub c: f64,
    pub nu: f64,
    /// Value of θ before the first observation.
    pub init: f64,
}

impl PattonTSpec {
    pub fn validate(&self) -> Result<()> {
        if ![self.omega, self.beta, self.c].iter().all(|v| v.is_finite()) {
            return invalid_param("Patton recursion coefficients must be finite");
        }
        if !(self.nu > 2.0 && self.nu.is_finite()) {
            return invalid_param(format!("Patton nu must exceed 2, got {}", self.nu));
        }
        if !(self.init > -1.0 && self.init < 1.0) {
            return invalid_param(format!("Patton initial theta must lie in (-1, 1), got {}", self.init));
        }
        Ok(())
    }
}

fn step(spec: &PattonTSpec, prev: f64, products: &[f64], t: usize) -> f64 {
    let lags = t.min(PATTON_LAGS);
    let forcing = if lags == 0 { 0.0 } else { products[t - lags..t].iter().sum::<f64>() / lags as f64 };
    (0.5 * (spec.omega + spec.beta * prev + spec.c * forcing)).tanh().clamp(-THETA_MAX, THETA_MAX)
}

fn path_from_scores(spec: &PattonTSpec, x: &[[f64; 2]]) -> Vec<f64> {
    let products: Vec<f64> = x.iter().map(|r| r[0] * r[1]).collect();
    let mut prev = spec.init;
    (0..x.len())
        .map(|t| {
            prev = step(spec, prev, &products, t);
            prev
        })
        .collect()
}

fn t_scores(pairs: &[Vec<f64>], nu: f64) -> Vec<[f64; 2]> {
    let t = StudentT::new(nu).expect("validated nu");
    pairs.iter().map(|r| [t.quantile_unchecked(r[0]), t.quantile_unchecked(r[1])]).collect()
}

fn check_pairs(pairs: &[Vec<f64>]) -> Result<()> {
    if pairs.len() <= PATTON_LAGS {
        return invalid_input(format!("Patton recursion needs more than {PATTON_LAGS} observations"));
    }
    if pairs.iter().any(|r| r.len() != 2) {
        return Err(Error::DimensionMismatch { expected: 2, got: pairs.iter().find(|r| r.len() != 2).unwrap().len() });
    }
    if pairs.iter().flatten().any(|&x| !(x > 0.0 && x < 1.0)) {
        return invalid_input("pseudo-observations must lie strictly inside (0, 1)");
    }
    Ok(())
}

/// Correlation path implied by the recursion for a series of bivariate pseudo-observations.
pub fn patton_theta_path(pairs: &[Vec<f64>], spec: &PattonTSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    check_pairs(pairs)?;
    Ok(path_from_scores(spec, &t_scores(pairs, spec.nu)))
}

fn bivariate_t_ln_density(x: [f64; 2], rho: f64, nu: f64, ln_const: f64) -> f64 {
    let s = 1.0 - rho * rho;
    let q = (x[0] * x[0] - 2.0 * rho * x[0] * x[1] + x[1] * x[1]) / (nu * s);
    let marg = (x[0] * x[0] / nu).ln_1p() + (x[1] * x[1] / nu).ln_1p();
    ln_const - 0.5 * s.ln() - 0.5 * (nu + 2.0) * q.ln_1p() + 0.5 * (nu + 1.0) * marg
}

fn t2_const(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 2.0)) + ln_gamma(0.5 * nu) - 2.0 * ln_gamma(0.5 * (nu + 1.0))
}

fn loglik_scores(spec: &PattonTSpec, x: &[[f64; 2]]) -> f64 {
    let c = t2_const(spec.nu);
    path_from_scores(spec, x)
        .iter()
        .zip(x)
        .map(|(&rho, &xi)| bivariate_t_ln_density(xi, rho, spec.nu, c))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PattonFit {
    pub spec: PattonTSpec,
    pub loglik: f64,
    pub aic: f64,
    pub theta_path: Vec<f64>,
}

/// Maximum-likelihood fit of the Patton recursion. The pre-sample θ is the static
/// t-copula correlation estimate; ν is profiled on a bounded log scale.
pub fn fit_patton(pairs: &[Vec<f64>]) -> Result<PattonFit> {
    check_pairs(pairs)?;
    check_pseudo_obs(pairs, 50)?;
    let static_fit = fit_ml(pairs, Family::StudentT)?;
    let CopulaSpec::StudentT { corr, .. } = static_fit.spec else { unreachable!() };
    let rho0 = corr[0][1].clamp(-0.99, 0.99);

    let inner = |nu: f64, warm: &[f64]| {
        let x = t_scores(pairs, nu);
        let nll = |p: &[f64]| {
            let spec = PattonTSpec { omega: p[0], beta: p[1], c: p[2], nu, init: rho0 };
            -loglik_scores(&spec, &x)
        };
        let starts = [warm.to_vec(), vec![2.0 * rho0.atanh(), 0.0, 0.0], vec![0.5 * rho0.atanh(), 0.0, 0.3]];
        starts
            .iter()
            .map(|s| nelder_mead(nll, s, &NelderMeadOptions::new(3).with_step(vec![0.3, 0.3, 0.1])))
            .min_by(|a, b| a.value.total_cmp(&b.value))
            .expect("nonempty starts")
    };

    let mut warm = vec![2.0 * rho0.atanh(), 0.0, 0.0];
    let lo = (0.05f64).ln();
    let hi = (NU_MAX - 2.0).ln();
    let (z, _) = minimize_bounded_scalar(
        |z| {
            let r = inner(2.0 + z.exp(), &warm);
            if r.value.is_finite() {
                warm = r.x.clone();
            }
            r.value
        },
        lo,
        hi,
        1e-3,
    );
    let nu = 2.0 + z.exp();
    let best = inner(nu, &warm).require_converged()?;
    let spec = PattonTSpec { omega: best.x[0], beta: best.x[1], c: best.x[2], nu, init: rho0 };
    let theta_path = patton_theta_path(pairs, &spec)?;
    Ok(PattonFit { loglik: -best.value, aic: 8.0 + 2.0 * best.value, spec, theta_path })
}

/// Simulates `n` pseudo-observation pairs from the recursion. Returns `(pairs, θ path)`.
pub fn simulate_patton(spec: &PattonTSpec, n: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = StudentT::new(spec.nu)?;
    let chi = ChiSquared::new(spec.nu).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut products = Vec::with_capacity(n);
    let mut pairs = Vec::with_capacity(n);
    let mut path = Vec::with_capacity(n);
    let mut prev = spec.init;
    for i in 0..n {
        let rho = step(spec, prev, &products, i);
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let w = (spec.nu / chi.sample(&mut rng)).sqrt();
        let x1 = z1 * w;
        let x2 = (rho * z1 + (1.0 - rho * rho).sqrt() * z2) * w;
        pairs.push(vec![clamp_unit(t.cdf(x1)), clamp_unit(t.cdf(x2))]);
        products.push(x1 * x2);
        path.push(rho);
        prev = rho;
    }
    Ok((pairs, path))
}
