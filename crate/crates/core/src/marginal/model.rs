use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{SkewT, SkewTParams};
use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::stats;

/// Largest ARMA and ARCH order accepted (orders are `< 6`).
pub const MAX_ORDER: usize = 5;
/// Largest GARCH order accepted (orders are `< 2`).
pub const MAX_GARCH_ORDER: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceKind {
    /// Constant conditional variance `σ² = ω`.
    None,
    /// GARCH(P, Q).
    Symmetric,
    /// GJR-GARCH(P, Q) with asymmetry terms on non-positive shocks.
    Gjr,
}

/// Orders and options of an ARMA(p, q)-(GJR-)GARCH(P, Q) model with skew-t innovations.
///
/// `arch` is the number of lagged squared shocks (P) and `garch` the number of
/// lagged variances (Q).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArmaGjrGarchSpec {
    pub ar: usize,
    pub ma: usize,
    pub arch: usize,
    pub garch: usize,
    pub include_mu: bool,
    pub variance: VarianceKind,
}

impl ArmaGjrGarchSpec {
    pub fn new(ar: usize, ma: usize, arch: usize, garch: usize, include_mu: bool, variance: VarianceKind) -> Result<Self> {
        let s = Self { ar, ma, arch, garch, include_mu, variance };
        s.validate()?;
        Ok(s)
    }

    /// Constant-variance ARMA(p, q).
    pub fn arma(ar: usize, ma: usize, include_mu: bool) -> Result<Self> {
        Self::new(ar, ma, 0, 0, include_mu, VarianceKind::None)
    }

    /// GARCH(1,1) with an estimated constant mean.
    pub fn garch11() -> Self {
        Self { ar: 0, ma: 0, arch: 1, garch: 1, include_mu: true, variance: VarianceKind::Symmetric }
    }

    /// GJR-GARCH(1,1) with zero mean.
    pub fn gjr11_zero_mean() -> Self {
        Self { ar: 0, ma: 0, arch: 1, garch: 1, include_mu: false, variance: VarianceKind::Gjr }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ar > MAX_ORDER || self.ma > MAX_ORDER || self.arch > MAX_ORDER {
            return invalid_param(format!("ARMA and ARCH orders must be below {}", MAX_ORDER + 1));
        }
        if self.garch > MAX_GARCH_ORDER {
            return invalid_param(format!("GARCH order must be below {}", MAX_GARCH_ORDER + 1));
        }
        match self.variance {
            VarianceKind::None if self.arch + self.garch > 0 => {
                invalid_param("a constant-variance model has no ARCH or GARCH terms")
            }
            VarianceKind::Symmetric | VarianceKind::Gjr if self.arch == 0 => {
                invalid_param("a GARCH-type model needs at least one ARCH term")
            }
            _ => Ok(()),
        }
    }

    /// Number of estimated parameters, including the two innovation parameters.
    pub fn n_params(&self) -> usize {
        let gamma = if self.variance == VarianceKind::Gjr { self.arch } else { 0 };
        usize::from(self.include_mu) + self.ar + self.ma + 1 + self.arch + gamma + self.garch + 2
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.include_mu {
            names.push("mu".to_string());
        }
        names.extend((1..=self.ar).map(|i| format!("phi{i}")));
        names.extend((1..=self.ma).map(|i| format!("psi{i}")));
        names.push("omega".into());
        names.extend((1..=self.arch).map(|i| format!("lambda{i}")));
        if self.variance == VarianceKind::Gjr {
            names.extend((1..=self.arch).map(|i| format!("gamma{i}")));
        }
        names.extend((1..=self.garch).map(|i| format!("delta{i}")));
        names.push("zeta".into());
        names.push("nu".into());
        names
    }

    /// Short label such as `ARMA(1,0)-GJR-GARCH(1,1)`.
    pub fn label(&self) -> String {
        let mean = format!("ARMA({},{})", self.ar, self.ma);
        let var = match self.variance {
            VarianceKind::None => String::new(),
            VarianceKind::Symmetric => format!("-GARCH({},{})", self.arch, self.garch),
            VarianceKind::Gjr => format!("-GJR-GARCH({},{})", self.arch, self.garch),
        };
        let mu = if self.include_mu { "" } else { " mu=0" };
        format!("{mean}{var}{mu}")
    }
}

/// Coefficients of a marginal model in natural units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalParams {
    pub mu: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub omega: f64,
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
    pub skew_t: SkewTParams,
}

impl MarginalParams {
    /// `Σλ + Σγ/2 + Σδ`.
    pub fn persistence(&self) -> f64 {
        self.lambda.iter().sum::<f64>() + 0.5 * self.gamma.iter().sum::<f64>() + self.delta.iter().sum::<f64>()
    }

    /// Flattens the parameters in the order of [`ArmaGjrGarchSpec::param_names`].
    pub fn to_vector(&self, spec: &ArmaGjrGarchSpec) -> Vec<f64> {
        let mut v = Vec::with_capacity(spec.n_params());
        if spec.include_mu {
            v.push(self.mu);
        }
        v.extend(&self.phi);
        v.extend(&self.psi);
        v.push(self.omega);
        v.extend(&self.lambda);
        if spec.variance == VarianceKind::Gjr {
            v.extend(&self.gamma);
        }
        v.extend(&self.delta);
        v.push(self.skew_t.zeta);
        v.push(self.skew_t.nu);
        v
    }

    pub fn from_vector(spec: &ArmaGjrGarchSpec, v: &[f64]) -> Self {
        let mut it = v.iter().copied();
        let mut take = |k: usize| -> Vec<f64> { (0..k).map(|_| it.next().expect("parameter count")).collect() };
        let mu = if spec.include_mu { take(1)[0] } else { 0.0 };
        let phi = take(spec.ar);
        let psi = take(spec.ma);
        let omega = take(1)[0];
        let lambda = take(spec.arch);
        let gamma = if spec.variance == VarianceKind::Gjr { take(spec.arch) } else { vec![0.0; spec.arch] };
        let delta = take(spec.garch);
        let rest = take(2);
        MarginalParams { mu, phi, psi, omega, lambda, gamma, delta, skew_t: SkewTParams { zeta: rest[0], nu: rest[1] } }
    }

    pub fn check_shape(&self, spec: &ArmaGjrGarchSpec) -> Result<()> {
        let ok = self.phi.len() == spec.ar
            && self.psi.len() == spec.ma
            && self.lambda.len() == spec.arch
            && self.gamma.len() == spec.arch
            && self.delta.len() == spec.garch;
        if ok {
            Ok(())
        } else {
            invalid_param(format!("coefficient vector lengths do not match {}", spec.label()))
        }
    }
}

/// Conditional mean and variance paths. `mean` and `sigma2` have one more entry than the
/// data: the last element is the one-step-ahead forecast.
#[derive(Clone, Debug, PartialEq)]
pub struct Paths {
    pub mean: Vec<f64>,
    pub eps: Vec<f64>,
    pub sigma2: Vec<f64>,
}

/// Runs the ARMA-GJR-GARCH recursion over `x`.
///
/// Pre-sample shocks are zero, pre-sample deviations `x - μ` are zero, the first
/// conditional variance and all pre-sample variances equal the sample variance of `x`.
pub fn filter(spec: &ArmaGjrGarchSpec, p: &MarginalParams, x: &[f64]) -> Paths {
    let n = x.len();
    let s2 = stats::variance(x);
    let mut mean = Vec::with_capacity(n + 1);
    let mut eps = Vec::with_capacity(n);
    let mut sigma2 = Vec::with_capacity(n + 1);
    for t in 0..=n {
        let mut m = p.mu;
        for (i, phi) in p.phi.iter().enumerate() {
            if t > i {
                m += phi * (x[t - i - 1] - p.mu);
            }
        }
        for (j, psi) in p.psi.iter().enumerate() {
            if t > j {
                m += psi * eps[t - j - 1];
            }
        }
        let v = match spec.variance {
            VarianceKind::None => p.omega,
            _ if t == 0 => s2,
            _ => {
                let mut v = p.omega;
                for i in 0..spec.arch {
                    if t > i {
                        let e: f64 = eps[t - i - 1];
                        let coef = if e <= 0.0 { p.lambda[i] + p.gamma[i] } else { p.lambda[i] };
                        v += coef * e * e;
                    }
                }
                for (j, d) in p.delta.iter().enumerate() {
                    v += d * if t > j { sigma2[t - j - 1] } else { s2 };
                }
                v
            }
        };
        mean.push(m);
        sigma2.push(v);
        if t < n {
            eps.push(x[t] - m);
        }
    }
    Paths { mean, eps, sigma2 }
}

/// Log-likelihood under skew-t innovations; `-inf` for inadmissible paths.
pub fn loglik(spec: &ArmaGjrGarchSpec, p: &MarginalParams, x: &[f64]) -> Result<f64> {
    p.check_shape(spec)?;
    let dist = SkewT::new(p.skew_t)?;
    Ok(loglik_with(spec, p, x, &dist))
}

pub(crate) fn loglik_with(spec: &ArmaGjrGarchSpec, p: &MarginalParams, x: &[f64], dist: &SkewT) -> f64 {
    let paths = filter(spec, p, x);
    let mut ll = 0.0;
    for (e, &v) in paths.eps.iter().zip(&paths.sigma2) {
        if !(v > 0.0 && v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        ll += dist.ln_pdf(e / v.sqrt()) - 0.5 * v.ln();
    }
    if ll.is_nan() {
        f64::NEG_INFINITY
    } else {
        ll
    }
}

/// Simulates `n` observations after discarding `burn` warm-up draws.
pub fn simulate(spec: &ArmaGjrGarchSpec, p: &MarginalParams, n: usize, burn: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return invalid_input("simulation length must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..n + burn)
        .map(|_| loop {
            let u: f64 = rng.gen();
            if u > 0.0 {
                break u;
            }
        })
        .collect();
    simulate_from_uniforms(spec, p, &u, burn)
}

/// Simulates a path whose innovations are the skew-t quantiles of the given uniforms; the
/// first `burn` values are discarded. Feeding copula samples column-wise gives dependent paths.
pub fn simulate_from_uniforms(spec: &ArmaGjrGarchSpec, p: &MarginalParams, uniforms: &[f64], burn: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    p.check_shape(spec)?;
    if uniforms.len() <= burn {
        return invalid_input("simulation length must be positive");
    }
    if uniforms.iter().any(|&u| !(u > 0.0 && u < 1.0)) {
        return invalid_input("uniforms must lie in (0, 1)");
    }
    if spec.variance != VarianceKind::None && p.persistence() >= 1.0 {
        return Err(Error::InvalidParameter("simulation requires persistence below one".into()));
    }
    let dist = SkewT::new(p.skew_t)?;
    let uncond = match spec.variance {
        VarianceKind::None => p.omega,
        _ => p.omega / (1.0 - p.persistence()),
    };
    let total = uniforms.len();
    let mut x = Vec::with_capacity(total);
    let mut eps: Vec<f64> = Vec::with_capacity(total);
    let mut sig2: Vec<f64> = Vec::with_capacity(total);
    for t in 0..total {
        let mut m = p.mu;
        for (i, phi) in p.phi.iter().enumerate() {
            if t > i {
                m += phi * (x[t - i - 1] - p.mu);
            }
        }
        for (j, psi) in p.psi.iter().enumerate() {
            if t > j {
                m += psi * eps[t - j - 1];
            }
        }
        let v = match spec.variance {
            VarianceKind::None => p.omega,
            _ => {
                let mut v = p.omega;
                for i in 0..spec.arch {
                    v += if t > i {
                        let e: f64 = eps[t - i - 1];
                        let coef = if e <= 0.0 { p.lambda[i] + p.gamma[i] } else { p.lambda[i] };
                        coef * e * e
                    } else {
                        (p.lambda[i] + 0.5 * p.gamma[i]) * uncond
                    };
                }
                for (j, d) in p.delta.iter().enumerate() {
                    v += d * if t > j { sig2[t - j - 1] } else { uncond };
                }
                v
            }
        };
        let e = v.sqrt() * dist.quantile_unchecked(uniforms[t]);
        eps.push(e);
        sig2.push(v);
        x.push(m + e);
    }
    Ok(x.split_off(burn))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(spec: &ArmaGjrGarchSpec) -> MarginalParams {
        MarginalParams {
            mu: 0.001,
            phi: vec![0.2; spec.ar],
            psi: vec![-0.1; spec.ma],
            omega: 1e-5,
            lambda: vec![0.08; spec.arch],
            gamma: vec![if spec.variance == VarianceKind::Gjr { 0.05 } else { 0.0 }; spec.arch],
            delta: vec![0.85; spec.garch],
            skew_t: SkewTParams { zeta: 1.1, nu: 6.0 },
        }
    }

    #[test]
    fn vector_round_trip_and_names() {
        let spec = ArmaGjrGarchSpec::new(2, 1, 1, 1, true, VarianceKind::Gjr).unwrap();
        let p = params(&spec);
        let v = p.to_vector(&spec);
        assert_eq!(v.len(), spec.n_params());
        assert_eq!(spec.param_names().len(), spec.n_params());
        assert_eq!(MarginalParams::from_vector(&spec, &v), p);
    }

    #[test]
    fn spec_validation() {
        assert!(ArmaGjrGarchSpec::new(6, 0, 0, 0, true, VarianceKind::None).is_err());
        assert!(ArmaGjrGarchSpec::new(0, 0, 1, 2, true, VarianceKind::Symmetric).is_err());
        assert!(ArmaGjrGarchSpec::new(0, 0, 0, 1, true, VarianceKind::Symmetric).is_err());
        assert!(ArmaGjrGarchSpec::new(0, 0, 1, 0, true, VarianceKind::None).is_err());
        assert_eq!(ArmaGjrGarchSpec::garch11().n_params(), 6);
        assert_eq!(ArmaGjrGarchSpec::gjr11_zero_mean().n_params(), 6);
    }

    #[test]
    fn filter_garch11_by_hand() {
        let spec = ArmaGjrGarchSpec::gjr11_zero_mean();
        let mut p = params(&spec);
        p.mu = 0.0;
        let x = [0.01, -0.02, 0.015, -0.005];
        let paths = filter(&spec, &p, &x);
        let s2 = stats::variance(&x);
        assert_eq!(paths.sigma2[0], s2);
        let v1 = p.omega + 0.08 * 0.01f64.powi(2) + 0.85 * s2;
        assert!((paths.sigma2[1] - v1).abs() < 1e-18);
        let v2 = p.omega + (0.08 + 0.05) * 0.02f64.powi(2) + 0.85 * v1;
        assert!((paths.sigma2[2] - v2).abs() < 1e-18);
        assert_eq!(paths.mean.len(), 5);
        assert_eq!(paths.eps, x.to_vec());
    }

    #[test]
    fn simulation_is_reproducible() {
        let spec = ArmaGjrGarchSpec::new(1, 1, 1, 1, true, VarianceKind::Gjr).unwrap();
        let p = params(&spec);
        let a = simulate(&spec, &p, 500, 100, 4).unwrap();
        assert_eq!(a, simulate(&spec, &p, 500, 100, 4).unwrap());
        assert!(a.iter().all(|v| v.is_finite()));
    }
}
