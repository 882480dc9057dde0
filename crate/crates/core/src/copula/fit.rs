use serde::{Deserialize, Serialize};

use super::archimedean::{clayton_ln_density, gumbel_ln_density};
use super::elliptical::{self, corr_from_partials, partials_from_corr, Corr, EllipticalDensity};
use super::{CopulaSpec, Family};
use crate::error::{invalid_input, Error, Result};
use crate::numeric::{minimize_bounded_scalar, nelder_mead, NelderMeadOptions};

/// Upper bound for the estimated t-copula degrees of freedom.
pub const NU_MAX: f64 = 500.0;
const NU_MIN: f64 = 1.0;

/// Outcome of a maximum-likelihood copula fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: CopulaSpec,
    pub loglik: f64,
    pub aic: f64,
    pub n_params: usize,
    pub n_obs: usize,
}

impl FitResult {
    fn new(spec: CopulaSpec, loglik: f64, n_obs: usize) -> Self {
        let n_params = spec.n_params();
        FitResult { spec, loglik, aic: 2.0 * n_params as f64 - 2.0 * loglik, n_params, n_obs }
    }
}

pub(crate) fn check_pseudo_obs(u: &[Vec<f64>], min_rows: usize) -> Result<usize> {
    let n = u.len();
    if n < min_rows {
        return invalid_input(format!("need at least {min_rows} observations, got {n}"));
    }
    let d = u[0].len();
    if d < 2 {
        return invalid_input("pseudo-observations need at least two columns");
    }
    for row in u {
        if row.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: row.len() });
        }
        if row.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return invalid_input("pseudo-observations must lie strictly inside (0, 1)");
        }
    }
    let min_distinct = (n / 20).max(3);
    for j in 0..d {
        let mut col: Vec<f64> = u.iter().map(|r| r[j]).collect();
        col.sort_by(f64::total_cmp);
        col.dedup();
        if col.len() < min_distinct {
            return Err(Error::Fit(format!(
                "column {j} is degenerate: {} distinct values among {n} observations",
                col.len()
            )));
        }
    }
    Ok(d)
}

/// Maximum-likelihood fit of a static copula family to pseudo-observations (rows in (0,1)^d).
pub fn fit_ml(u: &[Vec<f64>], family: Family) -> Result<FitResult> {
    let d = check_pseudo_obs(u, 50)?;
    let n = u.len();
    match family {
        Family::Independence => Ok(FitResult::new(CopulaSpec::Independence { dim: d }, 0.0, n)),
        Family::Comonotone => Err(Error::Unsupported("the comonotone copula has no density to maximize".into())),
        Family::Clayton => {
            let lu: Vec<Vec<f64>> = u.iter().map(|r| r.iter().map(|x| x.ln()).collect()).collect();
            let nll = |x: f64| -> f64 {
                let th = x.exp();
                -lu.iter().map(|r| clayton_ln_density(th, r)).sum::<f64>()
            };
            let (x, v) = minimize_bounded_scalar(nll, (1e-6f64).ln(), 200f64.ln(), 1e-10);
            finite_or_fail(v)?;
            Ok(FitResult::new(CopulaSpec::Clayton { theta: x.exp(), dim: d }, -v, n))
        }
        Family::Gumbel => {
            let lu: Vec<Vec<f64>> = u.iter().map(|r| r.iter().map(|x| x.ln()).collect()).collect();
            let llu: Vec<Vec<f64>> = lu.iter().map(|r| r.iter().map(|l| (-l).ln()).collect()).collect();
            let nll = |x: f64| -> f64 {
                let th = 1.0 + x.exp();
                -lu.iter().zip(&llu).map(|(a, b)| gumbel_ln_density(th, a, b)).sum::<f64>()
            };
            let (x, v) = minimize_bounded_scalar(nll, (1e-8f64).ln(), 199f64.ln(), 1e-10);
            finite_or_fail(v)?;
            Ok(FitResult::new(CopulaSpec::Gumbel { theta: 1.0 + x.exp(), dim: d }, -v, n))
        }
        Family::Gaussian => {
            let x: Vec<Vec<f64>> = u.iter().map(|r| elliptical::scores(r, None)).collect();
            let start = moment_corr(&x);
            let (corr, ll) = fit_corr(&x, None, &start)?;
            Ok(FitResult::new(CopulaSpec::Gaussian { corr }, ll, n))
        }
        Family::StudentT => {
            let xn: Vec<Vec<f64>> = u.iter().map(|r| elliptical::scores(r, None)).collect();
            let mut warm = moment_corr(&xn);
            let mut failure: Option<Error> = None;
            let profile = |lnu: f64, warm: &mut Corr, failure: &mut Option<Error>| -> f64 {
                let nu = lnu.exp();
                let x: Vec<Vec<f64>> = u.iter().map(|r| elliptical::scores(r, Some(nu))).collect();
                match fit_corr(&x, Some(nu), warm) {
                    Ok((c, ll)) => {
                        *warm = c;
                        -ll
                    }
                    Err(e) => {
                        *failure = Some(e);
                        f64::INFINITY
                    }
                }
            };
            let (lnu, v) =
                minimize_bounded_scalar(|l| profile(l, &mut warm, &mut failure), NU_MIN.ln(), NU_MAX.ln(), 1e-4);
            if !v.is_finite() {
                return Err(failure.unwrap_or_else(|| Error::Fit("t copula likelihood is not finite".into())));
            }
            let nu = lnu.exp();
            let x: Vec<Vec<f64>> = u.iter().map(|r| elliptical::scores(r, Some(nu))).collect();
            let (corr, ll) = fit_corr(&x, Some(nu), &warm)?;
            Ok(FitResult::new(CopulaSpec::StudentT { corr, nu }, ll, n))
        }
    }
}

fn finite_or_fail(v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Fit("copula likelihood is not finite at any parameter value".into()))
    }
}

/// Correlation of the score vectors (normalized second-moment matrix).
pub(crate) fn moment_corr(x: &[Vec<f64>]) -> Corr {
    let d = x[0].len();
    let mut m = vec![vec![0.0; d]; d];
    for r in x {
        for i in 0..d {
            for j in 0..d {
                m[i][j] += r[i] * r[j];
            }
        }
    }
    let mut c = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            c[i][j] = if i == j { 1.0 } else { (m[i][j] / (m[i][i] * m[j][j]).sqrt()).clamp(-0.99, 0.99) };
        }
    }
    c
}

fn corr_loglik(x: &[Vec<f64>], nu: Option<f64>, corr: &Corr) -> f64 {
    match EllipticalDensity::new(corr, nu) {
        Ok(dens) => x.iter().map(|r| dens.ln_density_scores(r)).sum(),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Maximizes the elliptical log-likelihood over correlation matrices for fixed scores.
fn fit_corr(x: &[Vec<f64>], nu: Option<f64>, start: &Corr) -> Result<(Corr, f64)> {
    let d = start.len();
    if d == 2 {
        let (z, v) = minimize_bounded_scalar(
            |z| -corr_loglik(x, nu, &elliptical::bivariate(z.tanh())),
            -6.0,
            6.0,
            1e-10,
        );
        finite_or_fail(v)?;
        return Ok((elliptical::bivariate(z.tanh()), -v));
    }
    let z0: Vec<f64> = partials_from_corr(start).iter().map(|p| p.clamp(-0.999, 0.999).atanh()).collect();
    let nll = |z: &[f64]| {
        let p: Vec<f64> = z.iter().map(|v| v.tanh()).collect();
        -corr_loglik(x, nu, &corr_from_partials(d, &p))
    };
    let res = nelder_mead(nll, &z0, &NelderMeadOptions::new(z0.len())).require_converged()?;
    let p: Vec<f64> = res.x.iter().map(|v| v.tanh()).collect();
    Ok((corr_from_partials(d, &p), -res.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::elliptical::equicorrelated;
    use crate::copula::{sample, AnyCopula};

    #[test]
    fn clayton_recovers_theta() {
        let u = sample(&AnyCopula::Static(CopulaSpec::clayton(2.0, 2).unwrap()), 10_000, 1).unwrap();
        let fit = fit_ml(&u, Family::Clayton).unwrap();
        let CopulaSpec::Clayton { theta, .. } = fit.spec else { panic!() };
        assert!((1.85..=2.15).contains(&theta), "{theta}");
        assert!((fit.aic - (2.0 - 2.0 * fit.loglik)).abs() < 1e-12);
    }

    #[test]
    fn gumbel_trivariate_recovers_theta() {
        let u = sample(&AnyCopula::Static(CopulaSpec::gumbel(1.8, 3).unwrap()), 5_000, 2).unwrap();
        let CopulaSpec::Gumbel { theta, .. } = fit_ml(&u, Family::Gumbel).unwrap().spec else { panic!() };
        assert!((theta - 1.8).abs() < 0.08, "{theta}");
    }

    #[test]
    fn gaussian_trivariate_recovers_corr() {
        let corr = vec![vec![1.0, 0.5, 0.2], vec![0.5, 1.0, -0.3], vec![0.2, -0.3, 1.0]];
        let u = sample(&AnyCopula::Static(CopulaSpec::gaussian(corr.clone()).unwrap()), 5_000, 3).unwrap();
        let fit = fit_ml(&u, Family::Gaussian).unwrap();
        let CopulaSpec::Gaussian { corr: est } = fit.spec else { panic!() };
        for i in 0..3 {
            for j in 0..3 {
                assert!((est[i][j] - corr[i][j]).abs() < 0.04);
            }
        }
        assert_eq!(fit.n_params, 3);
    }

    #[test]
    fn independence_has_no_parameters() {
        let u = sample(&AnyCopula::Static(CopulaSpec::independence(2).unwrap()), 200, 4).unwrap();
        let fit = fit_ml(&u, Family::Independence).unwrap();
        assert_eq!((fit.n_params, fit.loglik, fit.aic), (0, 0.0, 0.0));
    }

    #[test]
    fn t_recovers_nu_and_goes_large_on_gaussian_data() {
        let u = sample(&AnyCopula::Static(CopulaSpec::student_t(equicorrelated(2, 0.6), 4.0).unwrap()), 5_000, 5)
            .unwrap();
        let CopulaSpec::StudentT { nu, corr } = fit_ml(&u, Family::StudentT).unwrap().spec else { panic!() };
        assert!((nu - 4.0).abs() < 1.2, "{nu}");
        assert!((corr[0][1] - 0.6).abs() < 0.03);

        let u = sample(&AnyCopula::Static(CopulaSpec::gaussian(equicorrelated(2, 0.5)).unwrap()), 5_000, 6).unwrap();
        let CopulaSpec::StudentT { nu, .. } = fit_ml(&u, Family::StudentT).unwrap().spec else { panic!() };
        assert!(nu > 50.0, "{nu}");
    }

    #[test]
    fn rejects_bad_input() {
        let tied = vec![vec![0.5, 0.5]; 100];
        assert!(matches!(fit_ml(&tied, Family::Clayton), Err(Error::Fit(_))));
        let few = vec![vec![0.2, 0.3]; 10];
        assert!(fit_ml(&few, Family::Clayton).is_err());
        let u = sample(&AnyCopula::Static(CopulaSpec::clayton(1.0, 2).unwrap()), 100, 1).unwrap();
        assert!(matches!(fit_ml(&u, Family::Comonotone), Err(Error::Unsupported(_))));
    }
}
