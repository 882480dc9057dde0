//! Copula families, evaluation, sampling and estimation.

mod archimedean;
mod dcc;
pub mod elliptical;
mod fit;
mod hac;
mod patton;
mod sample;
mod tau;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use archimedean::Generator;
pub use dcc::{dcc_r_path, fit_dcc, simulate_dcc, DccFit, DccTSpec};
pub use elliptical::Corr;
pub use fit::{fit_ml, FitResult};
pub use hac::HacSpec;
pub use patton::{fit_patton, patton_theta_path, simulate_patton, PattonFit, PattonTSpec};
pub use sample::{sample, sample_with};
pub use tau::{kendall_tau, tau_to_theta, theta_to_tau};

use crate::error::{invalid_input, invalid_param, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Independence,
    Comonotone,
    Gaussian,
    #[serde(rename = "t")]
    StudentT,
    Clayton,
    Gumbel,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Independence,
        Family::Comonotone,
        Family::Gaussian,
        Family::StudentT,
        Family::Clayton,
        Family::Gumbel,
    ];

    pub fn is_archimedean(self) -> bool {
        matches!(self, Family::Clayton | Family::Gumbel)
    }

    pub fn is_elliptical(self) -> bool {
        matches!(self, Family::Gaussian | Family::StudentT)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Independence => "independence",
            Family::Comonotone => "comonotone",
            Family::Gaussian => "gaussian",
            Family::StudentT => "t",
            Family::Clayton => "clayton",
            Family::Gumbel => "gumbel",
        };
        f.write_str(s)
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "independence" | "indep" | "product" => Ok(Family::Independence),
            "comonotone" | "comonotonic" => Ok(Family::Comonotone),
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "t" | "student" | "studentt" | "student-t" => Ok(Family::StudentT),
            "clayton" => Ok(Family::Clayton),
            "gumbel" => Ok(Family::Gumbel),
            _ => Err(Error::InvalidInput(format!("unknown copula family '{s}'"))),
        }
    }
}

/// A static copula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum CopulaSpec {
    Independence { dim: usize },
    Comonotone { dim: usize },
    Gaussian { corr: Corr },
    #[serde(rename = "t")]
    StudentT { corr: Corr, nu: f64 },
    Clayton { theta: f64, dim: usize },
    Gumbel { theta: f64, dim: usize },
}

impl CopulaSpec {
    pub fn independence(dim: usize) -> Result<Self> {
        let s = CopulaSpec::Independence { dim };
        s.validate()?;
        Ok(s)
    }

    pub fn comonotone(dim: usize) -> Result<Self> {
        let s = CopulaSpec::Comonotone { dim };
        s.validate()?;
        Ok(s)
    }

    pub fn gaussian(corr: Corr) -> Result<Self> {
        let s = CopulaSpec::Gaussian { corr };
        s.validate()?;
        Ok(s)
    }

    pub fn student_t(corr: Corr, nu: f64) -> Result<Self> {
        let s = CopulaSpec::StudentT { corr, nu };
        s.validate()?;
        Ok(s)
    }

    pub fn clayton(theta: f64, dim: usize) -> Result<Self> {
        let s = CopulaSpec::Clayton { theta, dim };
        s.validate()?;
        Ok(s)
    }

    pub fn gumbel(theta: f64, dim: usize) -> Result<Self> {
        let s = CopulaSpec::Gumbel { theta, dim };
        s.validate()?;
        Ok(s)
    }

    /// One-parameter member of `family` with the given dimension and Kendall's tau
    /// (equicorrelated for the elliptical families).
    pub fn from_tau(family: Family, dim: usize, tau: f64, nu: Option<f64>) -> Result<Self> {
        match family {
            Family::Independence => CopulaSpec::independence(dim),
            Family::Comonotone => CopulaSpec::comonotone(dim),
            Family::Gaussian => CopulaSpec::gaussian(elliptical::equicorrelated(dim, tau_to_theta(family, tau)?)),
            Family::StudentT => {
                let nu = nu.ok_or_else(|| Error::InvalidParameter("t copula requires nu".into()))?;
                CopulaSpec::student_t(elliptical::equicorrelated(dim, tau_to_theta(family, tau)?), nu)
            }
            Family::Clayton => CopulaSpec::clayton(tau_to_theta(family, tau)?, dim),
            Family::Gumbel => CopulaSpec::gumbel(tau_to_theta(family, tau)?, dim),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            CopulaSpec::Independence { .. } => Family::Independence,
            CopulaSpec::Comonotone { .. } => Family::Comonotone,
            CopulaSpec::Gaussian { .. } => Family::Gaussian,
            CopulaSpec::StudentT { .. } => Family::StudentT,
            CopulaSpec::Clayton { .. } => Family::Clayton,
            CopulaSpec::Gumbel { .. } => Family::Gumbel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() < 2 {
            return invalid_param(format!("copula dimension must be at least 2, got {}", self.dim()));
        }
        match self {
            CopulaSpec::Gaussian { corr } => elliptical::validate_corr(corr),
            CopulaSpec::StudentT { corr, nu } => {
                if !(*nu > 0.0 && nu.is_finite()) {
                    return invalid_param(format!("t copula nu must be positive and finite, got {nu}"));
                }
                elliptical::validate_corr(corr)
            }
            CopulaSpec::Clayton { theta, .. } => Generator::Clayton(*theta).validate(),
            CopulaSpec::Gumbel { theta, .. } => Generator::Gumbel(*theta).validate(),
            _ => Ok(()),
        }
    }

    pub fn generator(&self) -> Option<Generator> {
        match *self {
            CopulaSpec::Clayton { theta, .. } => Some(Generator::Clayton(theta)),
            CopulaSpec::Gumbel { theta, .. } => Some(Generator::Gumbel(theta)),
            _ => None,
        }
    }

    /// Number of free parameters.
    pub fn n_params(&self) -> usize {
        let d = self.dim();
        match self {
            CopulaSpec::Independence { .. } | CopulaSpec::Comonotone { .. } => 0,
            CopulaSpec::Gaussian { .. } => d * (d - 1) / 2,
            CopulaSpec::StudentT { .. } => d * (d - 1) / 2 + 1,
            CopulaSpec::Clayton { .. } | CopulaSpec::Gumbel { .. } => 1,
        }
    }

    fn marginal_spec(&self, keep: &[usize]) -> CopulaSpec {
        let k = keep.len();
        match self {
            CopulaSpec::Independence { .. } => CopulaSpec::Independence { dim: k },
            CopulaSpec::Comonotone { .. } => CopulaSpec::Comonotone { dim: k },
            CopulaSpec::Gaussian { corr } => CopulaSpec::Gaussian { corr: elliptical::submatrix(corr, keep) },
            CopulaSpec::StudentT { corr, nu } => {
                CopulaSpec::StudentT { corr: elliptical::submatrix(corr, keep), nu: *nu }
            }
            CopulaSpec::Clayton { theta, .. } => CopulaSpec::Clayton { theta: *theta, dim: k },
            CopulaSpec::Gumbel { theta, .. } => CopulaSpec::Gumbel { theta: *theta, dim: k },
        }
    }
}

/// Evaluation interface shared by static and hierarchical copulas.
pub trait Copula: fmt::Debug + Send + Sync {
    fn dim(&self) -> usize;

    /// CDF at a point whose validity has already been checked.
    fn cdf_unchecked(&self, u: &[f64]) -> f64;

    fn cdf(&self, u: &[f64]) -> Result<f64> {
        check_point(self.dim(), u)?;
        Ok(self.cdf_unchecked(u).clamp(0.0, 1.0))
    }

    /// Survival copula `C̄(u) = P(U > 1 - u)`, by inclusion–exclusion over the base copula.
    fn survival_cdf(&self, u: &[f64]) -> Result<f64> {
        check_point(self.dim(), u)?;
        Ok(survival_by_inclusion_exclusion(u, |w| self.cdf_unchecked(w)).clamp(0.0, 1.0))
    }

    /// Copula of the sub-vector `keep` (dropped arguments set to one).
    fn marginalize(&self, keep: &[usize]) -> Result<Box<dyn Copula>>;

    /// Generator of the level containing the first variable, when the copula is Archimedean
    /// there. Enables closed-form conditional quantiles with the target in position 0.
    fn outer_generator(&self) -> Option<Generator> {
        None
    }

    /// Whether `cdf` is computed by numerical integration rather than exactly.
    fn cdf_is_approximate(&self) -> bool {
        false
    }
}

pub(crate) fn check_point(dim: usize, u: &[f64]) -> Result<()> {
    if u.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: u.len() });
    }
    if u.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return invalid_input(format!("copula arguments must lie in [0, 1], got {u:?}"));
    }
    Ok(())
}

pub(crate) fn check_keep(dim: usize, keep: &[usize]) -> Result<()> {
    if keep.is_empty() || keep.len() >= dim {
        return invalid_input("marginalize: keep must be a nonempty proper subset");
    }
    let mut seen = vec![false; dim];
    for &k in keep {
        if k >= dim || seen[k] {
            return invalid_input(format!("marginalize: invalid or repeated index {k}"));
        }
        seen[k] = true;
    }
    Ok(())
}

/// `sum_{S} (-1)^|S| C(w^S)` with `w^S_i = 1 - u_i` for `i ∈ S` and 1 otherwise.
pub fn survival_by_inclusion_exclusion<F: FnMut(&[f64]) -> f64>(u: &[f64], mut cdf: F) -> f64 {
    let d = u.len();
    let mut w = vec![1.0; d];
    let mut total = 0.0;
    for mask in 0u32..(1 << d) {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = if mask & (1 << i) != 0 { 1.0 - u[i] } else { 1.0 };
        }
        let v = if mask == 0 { 1.0 } else { cdf(&w) };
        if mask.count_ones() % 2 == 0 {
            total += v;
        } else {
            total -= v;
        }
    }
    total
}

impl Copula for CopulaSpec {
    fn dim(&self) -> usize {
        match self {
            CopulaSpec::Independence { dim }
            | CopulaSpec::Comonotone { dim }
            | CopulaSpec::Clayton { dim, .. }
            | CopulaSpec::Gumbel { dim, .. } => *dim,
            CopulaSpec::Gaussian { corr } | CopulaSpec::StudentT { corr, .. } => corr.len(),
        }
    }

    fn cdf_unchecked(&self, u: &[f64]) -> f64 {
        match self {
            CopulaSpec::Independence { .. } => u.iter().product(),
            CopulaSpec::Comonotone { .. } => u.iter().cloned().fold(1.0, f64::min),
            CopulaSpec::Gaussian { corr } => elliptical::elliptical_cdf(corr, None, u),
            CopulaSpec::StudentT { corr, nu } => elliptical::elliptical_cdf(corr, Some(*nu), u),
            CopulaSpec::Clayton { theta, .. } => Generator::Clayton(*theta).cdf(u),
            CopulaSpec::Gumbel { theta, .. } => Generator::Gumbel(*theta).cdf(u),
        }
    }

    fn survival_cdf(&self, u: &[f64]) -> Result<f64> {
        check_point(self.dim(), u)?;
        // Independence, comonotone and elliptical copulas are radially symmetric.
        let v = match self {
            CopulaSpec::Clayton { .. } | CopulaSpec::Gumbel { .. } => {
                survival_by_inclusion_exclusion(u, |w| self.cdf_unchecked(w))
            }
            _ => self.cdf_unchecked(u),
        };
        Ok(v.clamp(0.0, 1.0))
    }

    fn marginalize(&self, keep: &[usize]) -> Result<Box<dyn Copula>> {
        check_keep(self.dim(), keep)?;
        if keep.len() == 1 {
            return Ok(Box::new(UniformMargin));
        }
        Ok(Box::new(self.marginal_spec(keep)))
    }

    fn outer_generator(&self) -> Option<Generator> {
        self.generator()
    }

    fn cdf_is_approximate(&self) -> bool {
        self.family().is_elliptical() && self.dim() >= 4
    }
}

/// One-dimensional margin of any copula: `C(u) = u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UniformMargin;

impl Copula for UniformMargin {
    fn dim(&self) -> usize {
        1
    }

    fn cdf_unchecked(&self, u: &[f64]) -> f64 {
        u[0]
    }

    fn survival_cdf(&self, u: &[f64]) -> Result<f64> {
        self.cdf(u)
    }

    fn marginalize(&self, _keep: &[usize]) -> Result<Box<dyn Copula>> {
        invalid_input("marginalize: a one-dimensional copula has no proper margins")
    }
}

/// Either a static or a hierarchical copula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnyCopula {
    Static(CopulaSpec),
    Hac(HacSpec),
}

impl AnyCopula {
    pub fn as_copula(&self) -> &dyn Copula {
        match self {
            AnyCopula::Static(s) => s,
            AnyCopula::Hac(h) => h,
        }
    }
}

pub fn copula_cdf(spec: &dyn Copula, u: &[f64]) -> Result<f64> {
    spec.cdf(u)
}

pub fn survival_copula_cdf(spec: &dyn Copula, u: &[f64]) -> Result<f64> {
    spec.survival_cdf(u)
}

pub fn marginalize(spec: &dyn Copula, keep: &[usize]) -> Result<Box<dyn Copula>> {
    spec.marginalize(keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let c = CopulaSpec::clayton(2.0, 2).unwrap();
        assert!((c.cdf(&[0.5, 0.5]).unwrap() - 7f64.powf(-0.5)).abs() < 1e-12);
        let i = CopulaSpec::independence(2).unwrap();
        assert!((i.cdf(&[0.3, 0.7]).unwrap() - 0.21).abs() < 1e-15);
    }

    #[test]
    fn gumbel_one_is_independence() {
        let g = CopulaSpec::gumbel(1.0, 2).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let u = [(i as f64 + 0.5) / 10.0, (j as f64 + 0.5) / 10.0];
                assert!((g.cdf(&u).unwrap() - u[0] * u[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grounded_with_uniform_margins() {
        let specs = [
            CopulaSpec::clayton(1.3, 3).unwrap(),
            CopulaSpec::gumbel(2.2, 3).unwrap(),
            CopulaSpec::gaussian(elliptical::equicorrelated(3, 0.4)).unwrap(),
            CopulaSpec::student_t(elliptical::equicorrelated(3, 0.4), 5.0).unwrap(),
            CopulaSpec::comonotone(3).unwrap(),
        ];
        for s in &specs {
            assert_eq!(s.cdf(&[0.4, 0.0, 0.9]).unwrap(), 0.0);
            assert!((s.cdf(&[1.0, 0.37, 1.0]).unwrap() - 0.37).abs() < 1e-12, "{s:?}");
        }
    }

    #[test]
    fn bivariate_survival_identity() {
        let c = CopulaSpec::clayton(1.5, 2).unwrap();
        for i in 1..10 {
            for j in 1..10 {
                let (a, b) = (i as f64 / 10.0, j as f64 / 10.0);
                let lhs = c.survival_cdf(&[a, b]).unwrap();
                let rhs = a + b - 1.0 + c.cdf(&[1.0 - a, 1.0 - b]).unwrap();
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn errors() {
        let c = CopulaSpec::clayton(1.5, 2).unwrap();
        assert!(matches!(c.cdf(&[0.1, 0.2, 0.3]), Err(Error::DimensionMismatch { .. })));
        assert!(c.cdf(&[0.1, 1.2]).is_err());
        assert!(CopulaSpec::clayton(-0.5, 2).is_err());
        assert!(CopulaSpec::gumbel(0.9, 2).is_err());
        assert!(CopulaSpec::gaussian(vec![vec![1.0, 1.2], vec![1.2, 1.0]]).is_err());
        assert!(c.marginalize(&[]).is_err());
        assert!(c.marginalize(&[0, 1]).is_err());
    }

    #[test]
    fn marginal_to_one_dimension_is_identity() {
        for s in [CopulaSpec::clayton(2.0, 2).unwrap(), CopulaSpec::gaussian(elliptical::bivariate(0.7)).unwrap()] {
            let m = s.marginalize(&[1]).unwrap();
            assert!((m.cdf(&[0.42]).unwrap() - 0.42).abs() < 1e-12);
        }
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.to_string().parse::<Family>().unwrap(), f);
        }
    }

    #[test]
    fn spec_serializes_with_family_tag() {
        let s = CopulaSpec::clayton(2.0, 3).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"family\":\"clayton\""));
        let back: CopulaSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}
