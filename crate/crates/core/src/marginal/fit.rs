use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::model::{filter, loglik_with, ArmaGjrGarchSpec, MarginalParams, VarianceKind};
use crate::distributions::{pit, SkewT, SkewTParams};
use crate::error::{invalid_input, Error, Result};
use crate::numeric::{bfgs, numerical_hessian, BfgsOptions};
use crate::stats;

/// Minimum series length accepted by [`fit`].
pub const MIN_FIT_LENGTH: usize = 250;
const NU_LO: f64 = 2.01;
const NU_HI: f64 = 200.0;
/// Weight of the logarithmic barrier keeping persistence below one.
const BARRIER: f64 = 1e-3;

/// An estimated marginal model together with its filtered paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedMarginal {
    pub spec: ArmaGjrGarchSpec,
    pub params: MarginalParams,
    pub param_names: Vec<String>,
    /// Standard errors from the inverse numerical Hessian; `None` where it is not positive definite.
    pub std_errors: Vec<Option<f64>>,
    pub loglik: f64,
    pub aic: f64,
    pub n_params: usize,
    pub x: Vec<f64>,
    pub eps: Vec<f64>,
    pub sigma: Vec<f64>,
    pub z: Vec<f64>,
    pub forecast_mean: f64,
    pub forecast_sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl FittedMarginal {
    /// Builds the fitted object from given parameters, filtering `x`.
    pub fn from_params(spec: ArmaGjrGarchSpec, params: MarginalParams, x: &[f64]) -> Result<Self> {
        spec.validate()?;
        params.check_shape(&spec)?;
        let dist = SkewT::new(params.skew_t)?;
        let ll = loglik_with(&spec, &params, x, &dist);
        let paths = filter(&spec, &params, x);
        let n = x.len();
        let sigma: Vec<f64> = paths.sigma2[..n].iter().map(|v| v.sqrt()).collect();
        let z: Vec<f64> = paths.eps.iter().zip(&sigma).map(|(e, s)| e / s).collect();
        let k = spec.n_params();
        Ok(FittedMarginal {
            param_names: spec.param_names(),
            std_errors: vec![None; k],
            loglik: ll,
            aic: 2.0 * k as f64 - 2.0 * ll,
            n_params: k,
            x: x.to_vec(),
            eps: paths.eps,
            sigma,
            z,
            forecast_mean: paths.mean[n],
            forecast_sigma: paths.sigma2[n].sqrt(),
            warning: None,
            spec,
            params,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Conditional mean at index `t` (`t == len()` is the one-step forecast).
    pub fn mean_at(&self, t: usize) -> Result<f64> {
        let n = self.len();
        if t < n {
            Ok(self.x[t] - self.eps[t])
        } else if t == n {
            Ok(self.forecast_mean)
        } else {
            invalid_input(format!("index {t} beyond forecast horizon {n}"))
        }
    }

    /// Conditional standard deviation at index `t` (`t == len()` is the one-step forecast).
    pub fn sigma_at(&self, t: usize) -> Result<f64> {
        let n = self.len();
        if t < n {
            Ok(self.sigma[t])
        } else if t == n {
            Ok(self.forecast_sigma)
        } else {
            invalid_input(format!("index {t} beyond forecast horizon {n}"))
        }
    }

    /// One-day-ahead conditional mean and standard deviation.
    pub fn forecast_one_step(&self) -> (f64, f64) {
        (self.forecast_mean, self.forecast_sigma)
    }

    /// Parametric VaR `μ_t + σ_t F_z^{-1}(α)`; `t == len()` gives the forecast.
    pub fn var_parametric(&self, alpha: f64, t: usize) -> Result<f64> {
        let q = SkewT::new(self.params.skew_t)?.quantile(alpha)?;
        Ok(self.mean_at(t)? + self.sigma_at(t)? * q)
    }

    /// Inverse of [`Self::var_parametric`]: marginal probability of a return level at `t`.
    pub fn cdf_at(&self, value: f64, t: usize) -> Result<f64> {
        let z = (value - self.mean_at(t)?) / self.sigma_at(t)?;
        Ok(SkewT::new(self.params.skew_t)?.cdf(z))
    }

    /// Probability integral transform of the standardized residuals.
    pub fn pseudo_observations(&self) -> Result<Vec<f64>> {
        pit(&self.z, self.params.skew_t)
    }

    /// Refits-free refiltering of a series with the stored parameters.
    pub fn refilter(&self, x: &[f64]) -> Result<FittedMarginal> {
        FittedMarginal::from_params(self.spec, self.params.clone(), x)
    }
}

/// Unconstrained parameterization used by the optimizer. Works on the series divided by
/// its standard deviation.
struct Layout {
    spec: ArmaGjrGarchSpec,
}

impl Layout {
    fn decode(&self, th: &[f64]) -> MarginalParams {
        let s = &self.spec;
        let mut it = th.iter().copied();
        let mut take = |k: usize| -> Vec<f64> { (0..k).map(|_| it.next().expect("layout")).collect() };
        let mu = if s.include_mu { take(1)[0] } else { 0.0 };
        let phi = take(s.ar);
        let psi = take(s.ma);
        let omega = take(1)[0].exp();
        let a = take(s.arch);
        let lambda: Vec<f64> = a.iter().map(|v| v * v).collect();
        let gamma = if s.variance == VarianceKind::Gjr {
            take(s.arch).iter().zip(&lambda).map(|(g, l)| g * g - l).collect()
        } else {
            vec![0.0; s.arch]
        };
        let delta = take(s.garch).iter().map(|v| v * v).collect();
        let rest = take(2);
        let skew_t = SkewTParams { zeta: rest[0].exp(), nu: NU_LO + rest[1].exp() };
        MarginalParams { mu, phi, psi, omega, lambda, gamma, delta, skew_t }
    }

    fn encode(&self, p: &MarginalParams) -> Vec<f64> {
        let s = &self.spec;
        let mut th = Vec::new();
        if s.include_mu {
            th.push(p.mu);
        }
        th.extend(&p.phi);
        th.extend(&p.psi);
        th.push(p.omega.ln());
        th.extend(p.lambda.iter().map(|l| l.max(0.0).sqrt()));
        if s.variance == VarianceKind::Gjr {
            th.extend(p.lambda.iter().zip(&p.gamma).map(|(l, g)| (l + g).max(0.0).sqrt()));
        }
        th.extend(p.delta.iter().map(|d| d.max(0.0).sqrt()));
        th.push(p.skew_t.zeta.ln());
        th.push((p.skew_t.nu - NU_LO).max(1e-6).ln());
        th
    }

    fn start(&self, y: &[f64]) -> MarginalParams {
        let s = &self.spec;
        let var = stats::variance(y);
        let (omega, lambda, delta) = match s.variance {
            VarianceKind::None => (var, vec![], vec![]),
            _ => {
                let (l_tot, d) = if s.garch > 0 { (0.08, 0.87) } else { (0.3, 0.0) };
                let lambda = vec![l_tot / s.arch as f64; s.arch];
                let delta = vec![d; s.garch];
                (var * (1.0 - l_tot - d), lambda, delta)
            }
        };
        MarginalParams {
            mu: if s.include_mu { stats::mean(y) } else { 0.0 },
            phi: vec![0.0; s.ar],
            psi: vec![0.0; s.ma],
            omega,
            gamma: vec![0.0; s.arch],
            lambda,
            delta,
            skew_t: SkewTParams { zeta: 1.0, nu: 6.0 },
        }
    }

    fn objective(&self, th: &[f64], y: &[f64]) -> f64 {
        let p = self.decode(th);
        if !(p.skew_t.nu <= NU_HI && p.skew_t.zeta.is_finite() && p.omega > 0.0 && p.omega.is_finite()) {
            return f64::INFINITY;
        }
        let pers = p.persistence();
        let barrier = match self.spec.variance {
            VarianceKind::None => 0.0,
            _ if pers >= 1.0 => return f64::INFINITY,
            _ => -BARRIER * (1.0 - pers).ln(),
        };
        let dist = match SkewT::new(p.skew_t) {
            Ok(d) => d,
            Err(_) => return f64::INFINITY,
        };
        -loglik_with(&self.spec, &p, y, &dist) + barrier
    }
}

fn scale_params(p: &MarginalParams, sc: f64) -> MarginalParams {
    MarginalParams { mu: p.mu * sc, omega: p.omega * sc * sc, ..p.clone() }
}

/// Maximum-likelihood estimation of an ARMA-(GJR-)GARCH model with skew-t innovations.
pub fn fit(x: &[f64], spec: &ArmaGjrGarchSpec) -> Result<FittedMarginal> {
    fit_with_start(x, spec, None)
}

/// As [`fit`], starting the optimizer at `start` (natural units) when it is feasible.
pub fn fit_with_start(x: &[f64], spec: &ArmaGjrGarchSpec, start: Option<&MarginalParams>) -> Result<FittedMarginal> {
    spec.validate()?;
    if x.len() < MIN_FIT_LENGTH {
        return invalid_input(format!("series has {} observations, at least {MIN_FIT_LENGTH} required", x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid_input("series contains missing or non-finite values");
    }
    let sc = stats::variance(x).sqrt();
    if !(sc > 0.0) {
        return invalid_input("series is constant");
    }
    let y: Vec<f64> = x.iter().map(|v| v / sc).collect();
    let layout = Layout { spec: *spec };
    let obj = |th: &[f64]| layout.objective(th, &y);

    let opts = BfgsOptions::default();
    let default_start = layout.encode(&layout.start(&y));
    let th0 = start
        .filter(|p| p.check_shape(spec).is_ok())
        .map(|p| layout.encode(&scale_params(p, 1.0 / sc)))
        .filter(|th| obj(th).is_finite())
        .unwrap_or(default_start);
    let mut best = bfgs(obj, &th0, &opts);
    // A restart resets the curvature estimate, which helps on flat ARMA ridges.
    for _ in 0..2 {
        let again = bfgs(obj, &best.x, &opts);
        let improved = again.value < best.value - 1e-9 * (1.0 + best.value.abs());
        if again.value <= best.value {
            best = again;
        }
        if !improved {
            break;
        }
    }
    if !best.value.is_finite() {
        return Err(Error::Fit(format!("{}: likelihood is not finite at any trial point", spec.label())));
    }
    let best = best.require_converged()?;

    let p_y = layout.decode(&best.x);
    if spec.variance != VarianceKind::None && p_y.persistence() >= 1.0 {
        return Err(Error::Fit(format!("{}: persistence {} at optimum", spec.label(), p_y.persistence())));
    }
    if p_y.lambda.iter().zip(&p_y.gamma).any(|(l, g)| l + g < 0.0) {
        return Err(Error::Fit(format!("{}: negative shock coefficient at optimum", spec.label())));
    }

    let p_x = scale_params(&p_y, sc);
    let mut fitted = FittedMarginal::from_params(*spec, p_x, x)?;
    fitted.std_errors = standard_errors(spec, &p_y, &y, sc);

    let zvar = stats::variance(&fitted.z);
    if !(0.8..=1.2).contains(&zvar) {
        fitted.warning = Some(format!("standardized residual variance {zvar:.3} outside [0.8, 1.2]"));
    }
    Ok(fitted)
}

fn standard_errors(spec: &ArmaGjrGarchSpec, p_y: &MarginalParams, y: &[f64], sc: f64) -> Vec<Option<f64>> {
    let v0 = p_y.to_vector(spec);
    let nll = |v: &[f64]| {
        let p = MarginalParams::from_vector(spec, v);
        match SkewT::new(p.skew_t) {
            Ok(d) => -loglik_with(spec, &p, y, &d),
            Err(_) => f64::NAN,
        }
    };
    let h = numerical_hessian(nll, &v0, 1e-4, 1e-3);
    let k = v0.len();
    let m = DMatrix::from_fn(k, k, |i, j| h[i][j]);
    let names = spec.param_names();
    let Some(inv) = m.try_inverse() else {
        return vec![None; k];
    };
    (0..k)
        .map(|i| {
            let var = inv[(i, i)];
            if !(var > 0.0 && var.is_finite()) {
                return None;
            }
            let factor = match names[i].as_str() {
                "mu" => sc,
                "omega" => sc * sc,
                _ => 1.0,
            };
            Some(var.sqrt() * factor)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginal::model::simulate;

    fn garch_truth() -> (ArmaGjrGarchSpec, MarginalParams) {
        let spec = ArmaGjrGarchSpec::garch11();
        let p = MarginalParams {
            mu: 0.0005,
            phi: vec![],
            psi: vec![],
            omega: 1e-4,
            lambda: vec![0.1],
            gamma: vec![0.0],
            delta: vec![0.85],
            skew_t: SkewTParams { zeta: 1.05, nu: 5.0 },
        };
        (spec, p)
    }

    #[test]
    fn garch_fit_recovers_parameters() {
        let (spec, truth) = garch_truth();
        let x = simulate(&spec, &truth, 5000, 500, 42).unwrap();
        let f = fit(&x, &spec).unwrap();
        assert!((f.params.lambda[0] - 0.1).abs() < 0.03, "{:?}", f.params);
        assert!((f.params.delta[0] - 0.85).abs() < 0.04, "{:?}", f.params);
        assert!((f.params.skew_t.nu - 5.0).abs() < 1.2, "{:?}", f.params);
        assert!(f.std_errors.iter().all(|s| s.is_some()), "{:?}", f.std_errors);
        assert_eq!(f.aic, 2.0 * f.n_params as f64 - 2.0 * f.loglik);
    }

    #[test]
    fn refilter_reproduces_residuals() {
        let (spec, truth) = garch_truth();
        let x = simulate(&spec, &truth, 1000, 200, 7).unwrap();
        let f = fit(&x, &spec).unwrap();
        let g = f.refilter(&x).unwrap();
        for (a, b) in f.z.iter().zip(&g.z) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_variance_forecast_is_sqrt_omega() {
        let (spec, truth) = garch_truth();
        let x = simulate(&spec, &truth, 600, 100, 8).unwrap();
        let f = fit(&x, &ArmaGjrGarchSpec::arma(0, 0, true).unwrap()).unwrap();
        assert!((f.forecast_one_step().1 - f.params.omega.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_short_or_bad_series() {
        assert!(fit(&[0.01; 100], &ArmaGjrGarchSpec::garch11()).is_err());
        let mut x = vec![0.01; 300];
        x[3] = f64::NAN;
        assert!(fit(&x, &ArmaGjrGarchSpec::garch11()).is_err());
    }
}
