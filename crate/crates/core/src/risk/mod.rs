//! Conditional quantile measures solved on the copula scale.
//!
//! Every solver returns the probability level `u` of the target margin; the value of the
//! measure is the target's conditional quantile at `u`.

mod series;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::copula::{Copula, CopulaSpec};
use crate::distributions::normal_quantile;
use crate::error::{invalid_param, Error, Result};
use crate::marginal::FittedMarginal;
use crate::numeric::brent_root;

pub use series::{
    fit_dependence, measure_series, scovar, var_series, DependenceKind, FittedDependence, RiskSeries, ScovarResult,
};

/// Search interval for all level solvers.
pub const U_LO: f64 = 1e-12;
pub const U_HI: f64 = 1.0 - 1e-12;
/// Root tolerance in `u`.
pub const U_TOL: f64 = 1e-12;
/// Root tolerance when the copula CDF is evaluated by lattice integration (elliptical, d ≥ 3).
pub const U_TOL_NUMERIC_CDF: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbLevels {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ProbLevels {
    fn default() -> Self {
        Self { alpha: 0.05, beta: 0.05 }
    }
}

impl ProbLevels {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let l = Self { alpha, beta };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v < 1.0) {
                return invalid_param(format!("{name} must lie strictly inside (0, 1), got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    VaR,
    CoVaR,
    SCoVaR,
    MCoVaR,
    VCoVaR,
}

impl Measure {
    pub const ALL: [Measure; 5] = [Measure::VaR, Measure::CoVaR, Measure::SCoVaR, Measure::MCoVaR, Measure::VCoVaR];
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown measure '{s}'")))
    }
}

/// Limiting dependence regimes with known solutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Independence,
    Comonotone,
}

/// Level `β` under independence and `αβ` under comonotonicity, shared by all three
/// conditional measures.
pub fn limit_level(levels: ProbLevels, regime: Regime) -> Result<f64> {
    levels.validate()?;
    Ok(match regime {
        Regime::Independence => levels.beta,
        Regime::Comonotone => levels.alpha * levels.beta,
    })
}

/// Root tolerance appropriate for a copula's CDF accuracy.
fn tolerance(c: &dyn Copula) -> f64 {
    if c.cdf_is_approximate() {
        U_TOL_NUMERIC_CDF
    } else {
        U_TOL
    }
}

fn solve<F: FnMut(f64) -> f64>(f: F, tol: f64) -> Result<f64> {
    brent_root(f, U_LO, U_HI, tol)
}

fn check_dim(c: &dyn Copula, min: usize, what: &str) -> Result<()> {
    if c.dim() < min {
        return Err(Error::InvalidInput(format!("{what} needs a copula of dimension at least {min}, got {}", c.dim())));
    }
    Ok(())
}

/// Closed form `u = ψ(φ(βc) − φ(c))` for a target joined by an Archimedean generator to a
/// conditioning block with joint probability `c`.
fn archimedean_level(c: &dyn Copula, cond_prob: f64, beta: f64) -> Option<f64> {
    let g = c.outer_generator()?;
    Some(g.psi(g.phi(beta * cond_prob) - g.phi(cond_prob)))
}

/// Probability that all conditioning variables are at or below `alpha`.
fn conditioning_prob(c: &dyn Copula, alpha: f64) -> Result<f64> {
    let p = c.dim() - 1;
    let keep: Vec<usize> = (1..=p).collect();
    c.marginalize(&keep)?.cdf(&vec![alpha; p])
}

/// CoVaR level: solves `C(u, α) = αβ`, closed form for Archimedean copulas.
pub fn covar_level(c: &dyn Copula, levels: ProbLevels) -> Result<f64> {
    levels.validate()?;
    if c.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: c.dim() });
    }
    match archimedean_level(c, levels.alpha, levels.beta) {
        Some(u) => Ok(u),
        None => covar_level_numeric(c, levels),
    }
}

/// CoVaR level by bracketed root finding regardless of family.
pub fn covar_level_numeric(c: &dyn Copula, levels: ProbLevels) -> Result<f64> {
    levels.validate()?;
    if c.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: c.dim() });
    }
    let target = levels.alpha * levels.beta;
    solve(|u| c.cdf_unchecked(&[u, levels.alpha]) - target, U_TOL)
}

/// MCoVaR level: solves `C_{p+1}(u, α, …, α) = β C_p(α, …, α)`, target in position 0.
pub fn mcovar_level(c: &dyn Copula, levels: ProbLevels) -> Result<f64> {
    levels.validate()?;
    check_dim(c, 2, "MCoVaR")?;
    let cp = conditioning_prob(c, levels.alpha)?;
    match archimedean_level(c, cp, levels.beta) {
        Some(u) => Ok(u),
        None => mcovar_root(c, levels, cp),
    }
}

/// MCoVaR level by bracketed root finding regardless of family.
pub fn mcovar_level_numeric(c: &dyn Copula, levels: ProbLevels) -> Result<f64> {
    levels.validate()?;
    check_dim(c, 2, "MCoVaR")?;
    let cp = conditioning_prob(c, levels.alpha)?;
    mcovar_root(c, levels, cp)
}

fn mcovar_root(c: &dyn Copula, levels: ProbLevels, cp: f64) -> Result<f64> {
    if !(cp > 0.0) {
        return Err(Error::InvalidInput("conditioning event has zero probability".into()));
    }
    let target = levels.beta * cp;
    let mut x = vec![levels.alpha; c.dim()];
    let tol = tolerance(c);
    solve(
        |u| {
            x[0] = u;
            c.cdf_unchecked(&x) - target
        },
        tol,
    )
}

/// VCoVaR level: solves
/// `[u − C̄_p(1−α) + C̄_{p+1}(1−u, 1−α)] / [1 − C̄_p(1−α)] = β`,
/// i.e. `P(U_0 ≤ u | some U_i ≤ α) = β`.
pub fn vcovar_level(c: &dyn Copula, levels: ProbLevels) -> Result<f64> {
    levels.validate()?;
    check_dim(c, 2, "VCoVaR")?;
    let p = c.dim() - 1;
    let keep: Vec<usize> = (1..=p).collect();
    let sp = c.marginalize(&keep)?.survival_cdf(&vec![1.0 - levels.alpha; p])?;
    let denom = 1.0 - sp;
    if !(denom > 0.0) {
        return Err(Error::InvalidInput("conditioning event has zero probability".into()));
    }
    let mut x = vec![1.0 - levels.alpha; p + 1];
    let tol = tolerance(c);
    solve(
        |u| {
            x[0] = 1.0 - u;
            let s = c.survival_cdf(&x).unwrap_or(f64::NAN);
            (u - sp + s) / denom - levels.beta
        },
        tol,
    )
}

/// Level of any conditional measure on a copula whose first variable is the target.
pub fn measure_level(measure: Measure, c: &dyn Copula, levels: ProbLevels) -> Result<f64> {
    match measure {
        Measure::VaR => {
            levels.validate()?;
            Ok(levels.alpha)
        }
        Measure::CoVaR | Measure::SCoVaR => covar_level(c, levels),
        Measure::MCoVaR => mcovar_level(c, levels),
        Measure::VCoVaR => vcovar_level(c, levels),
    }
}

/// A target margin: maps a probability level at date `t` to a return quantile.
pub trait TargetMargin {
    fn quantile_at(&self, u: f64, t: usize) -> Result<f64>;
}

/// Standard normal margin, identical at every date.
#[derive(Clone, Copy, Debug, Default)]
pub struct StandardNormalMargin;

impl TargetMargin for StandardNormalMargin {
    fn quantile_at(&self, u: f64, _t: usize) -> Result<f64> {
        normal_quantile(u)
    }
}

impl TargetMargin for FittedMarginal {
    fn quantile_at(&self, u: f64, t: usize) -> Result<f64> {
        self.var_parametric(u, t)
    }
}

pub fn covar(c: &dyn Copula, margin: &dyn TargetMargin, levels: ProbLevels, t: usize) -> Result<f64> {
    margin.quantile_at(covar_level(c, levels)?, t)
}

pub fn mcovar(c: &dyn Copula, margin: &dyn TargetMargin, levels: ProbLevels, t: usize) -> Result<f64> {
    margin.quantile_at(mcovar_level(c, levels)?, t)
}

pub fn vcovar(c: &dyn Copula, margin: &dyn TargetMargin, levels: ProbLevels, t: usize) -> Result<f64> {
    margin.quantile_at(vcovar_level(c, levels)?, t)
}

/// Target quantile at `β` (independence) or `αβ` (comonotonicity).
pub fn limit_value(margin: &dyn TargetMargin, levels: ProbLevels, regime: Regime, t: usize) -> Result<f64> {
    margin.quantile_at(limit_level(levels, regime)?, t)
}

/// Convenience: bivariate copula of a static family spec for the CoVaR solvers.
pub fn bivariate(spec: &CopulaSpec) -> Result<&dyn Copula> {
    if spec.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: spec.dim() });
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{CopulaSpec, Generator, HacSpec};

    const L: ProbLevels = ProbLevels { alpha: 0.05, beta: 0.05 };

    #[test]
    fn independence_and_comonotone_limits() {
        for p in 1..=3 {
            let ind = CopulaSpec::independence(p + 1).unwrap();
            let com = CopulaSpec::comonotone(p + 1).unwrap();
            for (c, want) in [(&ind, 0.05), (&com, 0.0025)] {
                assert!((mcovar_level(c, L).unwrap() - want).abs() < 1e-10);
                assert!((vcovar_level(c, L).unwrap() - want).abs() < 1e-10);
                if p == 1 {
                    assert!((covar_level(c, L).unwrap() - want).abs() < 1e-10);
                }
            }
        }
        let ind = limit_value(&StandardNormalMargin, L, Regime::Independence, 0).unwrap();
        let com = limit_value(&StandardNormalMargin, L, Regime::Comonotone, 0).unwrap();
        assert!((ind + 1.645).abs() < 1e-3);
        assert!((com + 2.807).abs() < 1e-3);
        assert!(limit_level(ProbLevels { alpha: 0.05, beta: 1.0 }, Regime::Independence).is_err());
    }

    #[test]
    fn clayton_closed_form_matches_root() {
        let c = CopulaSpec::clayton(2.0, 2).unwrap();
        let a = covar_level(&c, L).unwrap();
        let b = covar_level_numeric(&c, L).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} {b}");
    }

    #[test]
    fn gumbel_mcovar_closed_form_matches_root() {
        let c = CopulaSpec::gumbel(2.0, 3).unwrap();
        let a = mcovar_level(&c, L).unwrap();
        let b = mcovar_level_numeric(&c, L).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} {b}");
        let h = HacSpec::new(Generator::Gumbel(1.5), Generator::Gumbel(3.0), 3).unwrap();
        let a = mcovar_level(&h, L).unwrap();
        let b = mcovar_level_numeric(&h, L).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} {b}");
    }

    #[test]
    fn bivariate_reductions() {
        for c in [
            CopulaSpec::clayton(1.3, 2).unwrap(),
            CopulaSpec::gumbel(2.2, 2).unwrap(),
            CopulaSpec::gaussian(crate::copula::elliptical::bivariate(0.6)).unwrap(),
            CopulaSpec::student_t(crate::copula::elliptical::bivariate(0.4), 5.0).unwrap(),
        ] {
            let a = covar_level(&c, L).unwrap();
            assert_eq!(a, mcovar_level(&c, L).unwrap());
            assert!((a - vcovar_level(&c, L).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn ordering_under_positive_dependence() {
        for c in [CopulaSpec::clayton(1.0, 3).unwrap(), CopulaSpec::gumbel(1.8, 3).unwrap()] {
            let um = mcovar_level(&c, L).unwrap();
            let uv = vcovar_level(&c, L).unwrap();
            let pair = c.marginalize(&[0, 1]).unwrap();
            let uc = covar_level(pair.as_ref(), L).unwrap();
            assert!(um <= uc && um <= uv && uv <= L.beta, "{um} {uc} {uv}");
        }
    }
}
