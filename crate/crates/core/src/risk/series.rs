use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{measure_level, Measure, ProbLevels};
use crate::copula::{
    dcc_r_path, elliptical, fit_dcc, fit_ml, fit_patton, patton_theta_path, Copula, CopulaSpec, DccFit, Family,
    FitResult, PattonFit,
};
use crate::error::{Error, Result};
use crate::ingest::{ReturnSeries, SystemSeries};
use crate::marginal::{fit, ArmaGjrGarchSpec, FittedMarginal};

/// Dependence model used for a measure: a static family or one of the dynamic t copulas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DependenceKind {
    Static(Family),
    Patton,
    Dcc,
}

impl fmt::Display for DependenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DependenceKind::Static(fam) => write!(f, "{fam}"),
            DependenceKind::Patton => f.write_str("patton-t"),
            DependenceKind::Dcc => f.write_str("dcc-t"),
        }
    }
}

impl FromStr for DependenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "patton" | "patton-t" => Ok(DependenceKind::Patton),
            "dcc" | "dcc-t" => Ok(DependenceKind::Dcc),
            other => Ok(DependenceKind::Static(other.parse()?)),
        }
    }
}

/// A fitted dependence model able to supply the copula valid at each date.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedDependence {
    Static(FitResult),
    /// `theta_path` has one entry per observation plus the one-step forecast.
    Patton { fit: PattonFit, theta_path: Vec<f64> },
    /// `corr_path` has one entry per observation plus the one-step forecast.
    Dcc { fit: DccFit, corr_path: Vec<elliptical::Corr> },
}

impl FittedDependence {
    pub fn is_static(&self) -> bool {
        matches!(self, FittedDependence::Static(_))
    }

    pub fn loglik(&self) -> f64 {
        match self {
            FittedDependence::Static(f) => f.loglik,
            FittedDependence::Patton { fit, .. } => fit.loglik,
            FittedDependence::Dcc { fit, .. } => fit.loglik,
        }
    }

    pub fn aic(&self) -> f64 {
        match self {
            FittedDependence::Static(f) => f.aic,
            FittedDependence::Patton { fit, .. } => fit.aic,
            FittedDependence::Dcc { fit, .. } => fit.aic,
        }
    }

    /// Copula at date index `t`; `t` equal to the sample size gives the one-step forecast.
    pub fn copula_at(&self, t: usize) -> Result<CopulaSpec> {
        let out_of_range = |len: usize| Error::InvalidInput(format!("date index {t} beyond dependence path of length {len}"));
        match self {
            FittedDependence::Static(f) => Ok(f.spec.clone()),
            FittedDependence::Patton { fit, theta_path } => {
                let rho = *theta_path.get(t).ok_or_else(|| out_of_range(theta_path.len()))?;
                CopulaSpec::student_t(elliptical::bivariate(rho), fit.spec.nu)
            }
            FittedDependence::Dcc { fit, corr_path } => {
                let r = corr_path.get(t).ok_or_else(|| out_of_range(corr_path.len()))?;
                CopulaSpec::student_t(r.clone(), fit.spec.nu)
            }
        }
    }
}

/// Fits a dependence model to pseudo-observations with the target in column 0.
pub fn fit_dependence(kind: DependenceKind, u: &[Vec<f64>]) -> Result<FittedDependence> {
    // The extra row only feeds the recursion past the last observation; the forecast entry does
    // not depend on its value.
    let extended = || {
        let mut v = u.to_vec();
        v.push(vec![0.5; u.first().map_or(0, Vec::len)]);
        v
    };
    match kind {
        DependenceKind::Static(family) => Ok(FittedDependence::Static(fit_ml(u, family)?)),
        DependenceKind::Patton => {
            if u.first().map(Vec::len) != Some(2) {
                return Err(Error::Unsupported("the Patton copula is bivariate only".into()));
            }
            let fit = fit_patton(u)?;
            let theta_path = patton_theta_path(&extended(), &fit.spec)?;
            Ok(FittedDependence::Patton { fit, theta_path })
        }
        DependenceKind::Dcc => {
            let fit = fit_dcc(u)?;
            let corr_path = dcc_r_path(&extended(), &fit.spec)?;
            Ok(FittedDependence::Dcc { fit, corr_path })
        }
    }
}

/// Dated values of one measure for one target and conditioning set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskSeries {
    pub measure: Measure,
    pub target: String,
    pub conditioning: Vec<String>,
    /// Dependence model label; empty for VaR.
    pub copula: String,
    pub levels: ProbLevels,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    /// Solved probability level per date.
    pub u: Vec<f64>,
}

impl RiskSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub const CSV_HEADER: [&'static str; 8] = ["date", "measure", "target", "conditioning", "copula", "alpha", "beta", "value"];

    /// Writes rows `date, measure, target, conditioning, copula, alpha, beta, value`.
    pub fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        let cond = self.conditioning.join("+");
        for (d, v) in self.dates.iter().zip(&self.values) {
            w.write_record([
                d.to_string(),
                self.measure.to_string(),
                self.target.clone(),
                cond.clone(),
                self.copula.clone(),
                self.levels.alpha.to_string(),
                self.levels.beta.to_string(),
                format!("{v:.12e}"),
            ])?;
        }
        Ok(())
    }
}

/// Parametric VaR path `μ_t + σ_t F_z^{-1}(level)` of a fitted marginal.
pub fn var_series(fitted: &FittedMarginal, asset: &str, dates: &[NaiveDate], levels: ProbLevels, level: f64) -> Result<RiskSeries> {
    if dates.len() != fitted.len() {
        return Err(Error::DimensionMismatch { expected: fitted.len(), got: dates.len() });
    }
    let values = (0..fitted.len()).map(|t| fitted.var_parametric(level, t)).collect::<Result<_>>()?;
    Ok(RiskSeries {
        measure: Measure::VaR,
        target: asset.to_string(),
        conditioning: vec![],
        copula: String::new(),
        levels,
        dates: dates.to_vec(),
        values,
        u: vec![level; fitted.len()],
    })
}

/// Solves a conditional measure at every date. Static copulas are solved once; dynamic ones
/// per date.
pub fn measure_series(
    measure: Measure,
    dependence: &FittedDependence,
    target: &FittedMarginal,
    target_id: &str,
    conditioning: &[String],
    dates: &[NaiveDate],
    levels: ProbLevels,
    copula_label: &str,
) -> Result<RiskSeries> {
    let n = target.len();
    if dates.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: dates.len() });
    }
    let u: Vec<f64> = if dependence.is_static() {
        let c = dependence.copula_at(0)?;
        vec![measure_level(measure, &c as &dyn Copula, levels)?; n]
    } else {
        (0..n)
            .into_par_iter()
            .map(|t| measure_level(measure, &dependence.copula_at(t)? as &dyn Copula, levels))
            .collect::<Result<_>>()?
    };
    let values = u.iter().enumerate().map(|(t, &ut)| target.var_parametric(ut, t)).collect::<Result<_>>()?;
    Ok(RiskSeries {
        measure,
        target: target_id.to_string(),
        conditioning: conditioning.to_vec(),
        copula: copula_label.to_string(),
        levels,
        dates: dates.to_vec(),
        values,
        u,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScovarResult {
    pub series: RiskSeries,
    pub system: SystemSeries,
    pub system_fit: FittedMarginal,
    /// VaR of the system at `α`, which defines the conditioning event.
    pub system_var: RiskSeries,
    pub dependence: FittedDependence,
}

/// CoVaR with the sum of the conditioning returns as conditioning variable. The sum gets a
/// GARCH(1,1) skew-t marginal; the bivariate copula is fitted on (target, sum) pseudo-observations.
pub fn scovar(
    target: &FittedMarginal,
    target_u: &[f64],
    target_id: &str,
    conditioning: &[&ReturnSeries],
    kind: DependenceKind,
    levels: ProbLevels,
) -> Result<ScovarResult> {
    let system = SystemSeries::new(conditioning)?;
    if system.values.len() != target.len() || target_u.len() != target.len() {
        return Err(Error::DimensionMismatch { expected: target.len(), got: system.values.len() });
    }
    let system_fit = fit(&system.values, &ArmaGjrGarchSpec::garch11())?;
    let su = system_fit.pseudo_observations()?;
    let pairs: Vec<Vec<f64>> = target_u.iter().zip(&su).map(|(&a, &b)| vec![a, b]).collect();
    let dependence = fit_dependence(kind, &pairs)?;
    let name = system.name();
    let series = measure_series(
        Measure::SCoVaR,
        &dependence,
        target,
        target_id,
        &[name.clone()],
        &system.dates,
        levels,
        &kind.to_string(),
    )?;
    let system_var = var_series(&system_fit, &name, &system.dates, levels, levels.alpha)?;
    Ok(ScovarResult { series, system, system_fit, system_var, dependence })
}
