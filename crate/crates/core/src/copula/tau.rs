use std::f64::consts::FRAC_PI_2;

use super::{CopulaSpec, Family};
use crate::error::{invalid_input, Error, Result};

/// Kendall's tau of a one-parameter family. For the elliptical families `theta` is ρ.
pub fn theta_to_tau(family: Family, theta: f64) -> Result<f64> {
    match family {
        Family::Independence => Ok(0.0),
        Family::Comonotone => Ok(1.0),
        Family::Gaussian | Family::StudentT => {
            if !(-1.0..=1.0).contains(&theta) {
                return invalid_input(format!("correlation out of range: {theta}"));
            }
            Ok(theta.asin() / FRAC_PI_2)
        }
        Family::Clayton => {
            if !(theta > 0.0) {
                return invalid_input(format!("Clayton theta must be positive, got {theta}"));
            }
            Ok(theta / (theta + 2.0))
        }
        Family::Gumbel => {
            if !(theta >= 1.0) {
                return invalid_input(format!("Gumbel theta must be >= 1, got {theta}"));
            }
            Ok(1.0 - 1.0 / theta)
        }
    }
}

/// Inverse of [`theta_to_tau`].
pub fn tau_to_theta(family: Family, tau: f64) -> Result<f64> {
    match family {
        Family::Gaussian | Family::StudentT => {
            if !(tau > -1.0 && tau < 1.0) {
                return invalid_input(format!("tau must lie in (-1, 1) for {family}, got {tau}"));
            }
            Ok((FRAC_PI_2 * tau).sin())
        }
        Family::Clayton | Family::Gumbel => {
            if !(tau > 0.0 && tau < 1.0) {
                return invalid_input(format!("tau must lie in (0, 1) for {family}, got {tau}"));
            }
            Ok(if family == Family::Clayton { 2.0 * tau / (1.0 - tau) } else { 1.0 / (1.0 - tau) })
        }
        Family::Independence | Family::Comonotone => {
            Err(Error::Unsupported(format!("{family} has no parameter")))
        }
    }
}

/// Kendall's tau of a copula described by a single dependence parameter.
pub fn kendall_tau(spec: &CopulaSpec) -> Result<f64> {
    match spec {
        CopulaSpec::Independence { .. } => Ok(0.0),
        CopulaSpec::Comonotone { .. } => Ok(1.0),
        CopulaSpec::Clayton { theta, .. } => theta_to_tau(Family::Clayton, *theta),
        CopulaSpec::Gumbel { theta, .. } => theta_to_tau(Family::Gumbel, *theta),
        CopulaSpec::Gaussian { corr } | CopulaSpec::StudentT { corr, .. } => {
            let r = corr[0][1];
            let d = corr.len();
            let single = (0..d).all(|i| (0..d).all(|j| i == j || (corr[i][j] - r).abs() < 1e-14));
            if !single {
                return invalid_input("kendall_tau: correlation matrix is not equicorrelated");
            }
            theta_to_tau(spec.family(), r)
        }
    }
}
