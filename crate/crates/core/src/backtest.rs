//! In-sample violation rates and rolling one-step-ahead forecasts.

use std::collections::HashMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{fit_ml, Copula, CopulaSpec, Family};
use crate::error::{Error, Result};
use crate::ingest::{check_aligned, ReturnSeries, SystemSeries};
use crate::marginal::{fit_with_start, select_model_with, ArmaGjrGarchSpec, FittedMarginal, MarginalParams, SelectionConfig};
use crate::risk::{
    fit_dependence, measure_level, measure_series, var_series, DependenceKind, FittedDependence, Measure, ProbLevels,
    RiskSeries,
};

/// Smallest rolling window accepted.
pub const MIN_WINDOW: usize = 250;

/// Violation counts of one measure among the dates meeting its conditioning event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub measure: Measure,
    pub target: String,
    pub conditioning: Vec<String>,
    pub copula: String,
    pub condition_count: usize,
    pub violation_count: usize,
    /// `None` when no date meets the conditioning event.
    pub rate: Option<f64>,
    /// Nominal rate: α for VaR, β for the conditional measures.
    pub expected: f64,
}

impl ViolationReport {
    fn new(
        measure: Measure,
        levels: ProbLevels,
        target: &str,
        conditioning: Vec<String>,
        copula: &str,
        events: &[bool],
        hits: &[bool],
    ) -> Self {
        let condition_count = events.iter().filter(|&&e| e).count();
        let violation_count = events.iter().zip(hits).filter(|(&e, &h)| e && h).count();
        ViolationReport {
            measure,
            target: target.to_string(),
            conditioning,
            copula: copula.to_string(),
            condition_count,
            violation_count,
            rate: (condition_count > 0).then(|| violation_count as f64 / condition_count as f64),
            expected: if measure == Measure::VaR { levels.alpha } else { levels.beta },
        }
    }

    pub const CSV_HEADER: [&'static str; 8] =
        ["measure", "target", "conditioning", "copula", "condition_count", "violation_count", "rate", "expected"];

    pub fn csv_record(&self) -> [String; 8] {
        [
            self.measure.to_string(),
            self.target.clone(),
            self.conditioning.join("+"),
            self.copula.clone(),
            self.condition_count.to_string(),
            self.violation_count.to_string(),
            self.rate.map_or_else(|| "NA".to_string(), |r| format!("{r:.6}")),
            self.expected.to_string(),
        ]
    }
}

/// Conditioning event per date for a measure, given `below[k][t]` = conditioning variable `k`
/// at or below its VaR on date `t`.
pub fn condition_events(measure: Measure, below: &[Vec<bool>]) -> Result<Vec<bool>> {
    let n = below.first().map_or(0, Vec::len);
    match measure {
        Measure::VaR => Ok(vec![true; n]),
        Measure::CoVaR | Measure::SCoVaR => {
            if below.len() != 1 {
                return Err(Error::InvalidInput(format!("{measure} conditions on exactly one variable")));
            }
            Ok(below[0].clone())
        }
        Measure::MCoVaR => Ok((0..n).map(|t| below.iter().all(|b| b[t])).collect()),
        Measure::VCoVaR => Ok((0..n).map(|t| below.iter().any(|b| b[t])).collect()),
    }
}

fn below_var(returns: &ReturnSeries, var: &RiskSeries) -> Result<Vec<bool>> {
    if returns.dates != var.dates {
        return Err(Error::Data(format!("{} returns and VaR are not aligned on dates", returns.asset)));
    }
    Ok(returns.values.iter().zip(&var.values).map(|(r, v)| r <= v).collect())
}

/// In-sample violation rates. `returns` and `vars` are looked up by asset name (the VaR
/// series at α for every conditioning variable, including system series); each risk series
/// is evaluated against its target's returns.
pub fn insample_rates(returns: &[ReturnSeries], risks: &[RiskSeries], vars: &[RiskSeries]) -> Result<Vec<ViolationReport>> {
    let ret: HashMap<&str, &ReturnSeries> = returns.iter().map(|r| (r.asset.as_str(), r)).collect();
    let var: HashMap<&str, &RiskSeries> = vars.iter().map(|v| (v.target.as_str(), v)).collect();
    let lookup = |name: &str| -> Result<(&ReturnSeries, &RiskSeries)> {
        let r = ret.get(name).ok_or_else(|| Error::Data(format!("no returns for {name}")))?;
        let v = var.get(name).ok_or_else(|| Error::Data(format!("no VaR series for {name}")))?;
        Ok((r, v))
    };
    risks
        .iter()
        .map(|risk| {
            let target = ret.get(risk.target.as_str()).ok_or_else(|| Error::Data(format!("no returns for {}", risk.target)))?;
            if target.dates != risk.dates {
                return Err(Error::Data(format!("{} returns and {} are not aligned", risk.target, risk.measure)));
            }
            let hits: Vec<bool> = target.values.iter().zip(&risk.values).map(|(r, v)| r <= v).collect();
            let below = risk
                .conditioning
                .iter()
                .map(|c| {
                    let (r, v) = lookup(c)?;
                    below_var(r, v)
                })
                .collect::<Result<Vec<_>>>()?;
            let events = if risk.measure == Measure::VaR { vec![true; hits.len()] } else { condition_events(risk.measure, &below)? };
            Ok(ViolationReport::new(risk.measure, risk.levels, &risk.target, risk.conditioning.clone(), &risk.copula, &events, &hits))
        })
        .collect()
}

/// Marginal model choice for every series of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalPolicy {
    Auto(SelectionConfig),
    Fixed(ArmaGjrGarchSpec),
}

fn fit_marginal(x: &[f64], policy: &MarginalPolicy) -> Result<FittedMarginal> {
    match policy {
        MarginalPolicy::Auto(cfg) => Ok(select_model_with(x, cfg)?.model),
        MarginalPolicy::Fixed(spec) => fit_with_start(x, spec, None),
    }
}

/// Everything estimated for one in-sample run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsampleResult {
    pub marginals: Vec<(String, FittedMarginal)>,
    pub system_fit: Option<FittedMarginal>,
    pub dependence: Vec<(String, Vec<String>, FittedDependence)>,
    pub risks: Vec<RiskSeries>,
    pub vars: Vec<RiskSeries>,
    pub reports: Vec<ViolationReport>,
}

fn pseudo_rows(cols: &[&[f64]]) -> Vec<Vec<f64>> {
    (0..cols[0].len()).map(|t| cols.iter().map(|c| c[t]).collect()).collect()
}

/// In-sample pipeline: marginal models, PIT, dependence fits for every kind, all measures
/// (CoVaR for each conditioning asset, SCoVaR, MCoVaR, VCoVaR) and their violation rates.
/// Measures a dependence kind cannot express (the bivariate Patton copula beyond two
/// dimensions) are skipped.
pub fn run_insample(
    target: &ReturnSeries,
    conditioning: &[&ReturnSeries],
    kinds: &[DependenceKind],
    policy: &MarginalPolicy,
    levels: ProbLevels,
) -> Result<InsampleResult> {
    levels.validate()?;
    if conditioning.is_empty() {
        return Err(Error::InvalidInput("at least one conditioning asset is required".into()));
    }
    if conditioning.iter().any(|c| c.asset == target.asset) {
        return Err(Error::InvalidInput(format!("target {} is also in the conditioning set", target.asset)));
    }
    let mut all = vec![target];
    all.extend_from_slice(conditioning);
    check_aligned(&all)?;
    let dates = &target.dates;

    let marginals: Vec<(String, FittedMarginal)> = all
        .iter()
        .map(|s| fit_marginal(&s.values, policy).map(|f| (s.asset.clone(), f)).map_err(|e| stage_err(&s.asset, e)))
        .collect::<Result<_>>()?;
    let pits: Vec<Vec<f64>> = marginals.iter().map(|(_, f)| f.pseudo_observations()).collect::<Result<_>>()?;
    let tfit = &marginals[0].1;
    let cond_names: Vec<String> = conditioning.iter().map(|c| c.asset.clone()).collect();

    let mut vars = Vec::new();
    for (name, f) in &marginals {
        vars.push(var_series(f, name, dates, levels, levels.alpha)?);
    }

    let mut dependence = Vec::new();
    let mut risks = Vec::new();
    let mut system_fit = None;
    let mut extra_returns = Vec::new();
    for &kind in kinds {
        let label = kind.to_string();
        for (k, name) in cond_names.iter().enumerate() {
            let u = pseudo_rows(&[&pits[0], &pits[k + 1]]);
            let dep = fit_dependence(kind, &u).map_err(|e| stage_err(&format!("{label} copula {}-{name}", target.asset), e))?;
            risks.push(measure_series(Measure::CoVaR, &dep, tfit, &target.asset, &[name.clone()], dates, levels, &label)?);
            dependence.push((target.asset.clone(), vec![name.clone()], dep));
        }
        let s = crate::risk::scovar(tfit, &pits[0], &target.asset, conditioning, kind, levels)
            .map_err(|e| stage_err(&format!("{label} system"), e))?;
        risks.push(s.series);
        if system_fit.is_none() {
            vars.push(s.system_var);
            extra_returns.push(s.system.to_return_series());
            system_fit = Some(s.system_fit);
        }
        dependence.push((target.asset.clone(), vec![s.system.name()], s.dependence));

        if kind == DependenceKind::Patton && !cond_names.is_empty() && cond_names.len() + 1 > 2 {
            continue;
        }
        let cols: Vec<&[f64]> = pits.iter().map(Vec::as_slice).collect();
        let u = pseudo_rows(&cols);
        let dep = fit_dependence(kind, &u).map_err(|e| stage_err(&format!("{label} joint copula"), e))?;
        for m in [Measure::MCoVaR, Measure::VCoVaR] {
            risks.push(measure_series(m, &dep, tfit, &target.asset, &cond_names, dates, levels, &label)?);
        }
        dependence.push((target.asset.clone(), cond_names.clone(), dep));
    }

    let mut returns: Vec<ReturnSeries> = all.iter().map(|s| (*s).clone()).collect();
    returns.extend(extra_returns);
    let mut reports = insample_rates(&returns, &vars[..1], &vars)?;
    reports.extend(insample_rates(&returns, &risks, &vars)?);
    Ok(InsampleResult { marginals, system_fit, dependence, risks, vars, reports })
}

fn stage_err(stage: &str, e: Error) -> Error {
    match e {
        Error::Fit(m) => Error::Fit(format!("{stage}: {m}")),
        Error::NotConverged { .. } => Error::Fit(format!("{stage}: {e}")),
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    pub window: usize,
    pub levels: ProbLevels,
    pub family: Family,
    pub measures: Vec<Measure>,
    /// Re-estimate models every `refit_stride` windows; parameters are carried in between.
    pub refit_stride: usize,
}

impl RollingConfig {
    pub fn new(family: Family, levels: ProbLevels) -> Self {
        Self { window: 500, levels, family, measures: Measure::ALL.to_vec(), refit_stride: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        self.levels.validate()?;
        if self.window < MIN_WINDOW {
            return Err(Error::InvalidInput(format!("window must be at least {MIN_WINDOW}, got {}", self.window)));
        }
        if self.refit_stride == 0 {
            return Err(Error::InvalidInput("refit stride must be positive".into()));
        }
        if matches!(self.family, Family::Comonotone) {
            return Err(Error::Unsupported("the comonotone copula cannot be estimated".into()));
        }
        Ok(())
    }
}

/// Parameters carried between windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RollingState {
    /// Marginal parameters for target, conditioning assets and the system, in that order.
    pub marginals: Vec<MarginalParams>,
    /// Pair copulas (target, conditioning k), the (target, system) copula and the joint copula.
    pub pairs: Vec<CopulaSpec>,
    pub system_pair: CopulaSpec,
    pub joint: CopulaSpec,
}

impl RollingState {
    fn new(fits: &[FittedMarginal], copulas: &[CopulaSpec]) -> Self {
        let p = copulas.len() - 2;
        RollingState {
            marginals: fits.iter().map(|f| f.params.clone()).collect(),
            pairs: copulas[..p].to_vec(),
            system_pair: copulas[p].clone(),
            joint: copulas[p + 1].clone(),
        }
    }

    fn copulas(&self) -> Vec<CopulaSpec> {
        let mut c = self.pairs.clone();
        c.push(self.system_pair.clone());
        c.push(self.joint.clone());
        c
    }
}

/// One-step-ahead forecasts for one date.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowForecast {
    /// Index (into the return series) of the forecast date.
    pub index: usize,
    pub date: NaiveDate,
    pub target_return: f64,
    pub target_var: f64,
    pub conditioning_returns: Vec<f64>,
    pub conditioning_vars: Vec<f64>,
    pub system_return: f64,
    pub system_var: f64,
    pub covar: Vec<f64>,
    pub scovar: f64,
    pub mcovar: f64,
    pub vcovar: f64,
    /// Number of models whose estimation failed and were carried from the previous window.
    pub carried: usize,
    pub state: RollingState,
}

/// Rolling-window forecaster. Windows in a chunk are estimated in parallel; a serial pass then
/// replaces failed fits with the previous window's parameters.
pub struct RollingForecaster<'a> {
    target: &'a ReturnSeries,
    conditioning: Vec<&'a ReturnSeries>,
    system: SystemSeries,
    cfg: RollingConfig,
    state: Option<RollingState>,
}

const CHUNK: usize = 64;

fn rolling_spec() -> ArmaGjrGarchSpec {
    ArmaGjrGarchSpec::gjr11_zero_mean()
}

struct Estimates {
    marginals: Vec<Result<FittedMarginal>>,
    /// Pair copulas, system pair, joint; `None` when some marginal failed.
    copulas: Option<Vec<Result<CopulaSpec>>>,
}

struct Resolved {
    k: usize,
    fits: Vec<FittedMarginal>,
    copulas: Vec<CopulaSpec>,
    carried: usize,
}

impl<'a> RollingForecaster<'a> {
    pub fn new(target: &'a ReturnSeries, conditioning: &[&'a ReturnSeries], cfg: RollingConfig) -> Result<Self> {
        cfg.validate()?;
        if conditioning.is_empty() {
            return Err(Error::InvalidInput("at least one conditioning asset is required".into()));
        }
        let mut all = vec![target];
        all.extend_from_slice(conditioning);
        check_aligned(&all)?;
        if target.len() <= cfg.window + 1 {
            return Err(Error::InvalidInput(format!(
                "series length {} must exceed window + 1 = {}",
                target.len(),
                cfg.window + 1
            )));
        }
        let system = SystemSeries::new(conditioning)?;
        Ok(Self { target, conditioning: conditioning.to_vec(), system, cfg, state: None })
    }

    /// Number of forecast dates.
    pub fn len(&self) -> usize {
        self.target.len() - self.cfg.window
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Resumes from a saved state (the state of the window preceding the next one run).
    pub fn with_state(mut self, state: RollingState) -> Self {
        self.state = Some(state);
        self
    }

    pub fn state(&self) -> Option<&RollingState> {
        self.state.as_ref()
    }

    pub fn system_name(&self) -> String {
        self.system.name()
    }

    /// Window `k` uses observations `k .. k + window`: target, conditioning assets, system.
    fn slices(&self, k: usize) -> Vec<&[f64]> {
        let r = k..k + self.cfg.window;
        let mut s: Vec<&[f64]> = vec![&self.target.values[r.clone()]];
        s.extend(self.conditioning.iter().map(|c| &c.values[r.clone()]));
        s.push(&self.system.values[r]);
        s
    }

    fn fit_copulas(&self, fits: &[FittedMarginal]) -> Result<Vec<Result<CopulaSpec>>> {
        let pits: Vec<Vec<f64>> = fits.iter().map(|f| f.pseudo_observations()).collect::<Result<_>>()?;
        let p = self.conditioning.len();
        let fit = |cols: &[usize]| {
            let c: Vec<&[f64]> = cols.iter().map(|&i| pits[i].as_slice()).collect();
            fit_ml(&pseudo_rows(&c), self.cfg.family).map(|r| r.spec)
        };
        let mut out: Vec<_> = (1..=p).map(|j| fit(&[0, j])).collect();
        out.push(fit(&[0, p + 1]));
        out.push(fit(&(0..=p).collect::<Vec<_>>()));
        Ok(out)
    }

    fn estimate(&self, k: usize) -> Estimates {
        let spec = rolling_spec();
        let marginals: Vec<Result<FittedMarginal>> = self.slices(k).into_iter().map(|x| fit_with_start(x, &spec, None)).collect();
        let copulas = if marginals.iter().all(|m| m.is_ok()) {
            let fits: Vec<FittedMarginal> = marginals.iter().map(|m| m.as_ref().unwrap().clone()).collect();
            self.fit_copulas(&fits).ok()
        } else {
            None
        };
        Estimates { marginals, copulas }
    }

    fn resolve(&mut self, k: usize, est: Option<Estimates>) -> Result<Resolved> {
        let spec = rolling_spec();
        let slices = self.slices(k);
        let prev = self.state.clone();
        let mut carried = 0;
        let (fits, copulas) = match est {
            None => {
                let s = prev.as_ref().ok_or_else(|| Error::InvalidInput(format!("window {k} has no parameters to reuse")))?;
                let fits = slices
                    .iter()
                    .zip(&s.marginals)
                    .map(|(x, p)| FittedMarginal::from_params(spec, p.clone(), x))
                    .collect::<Result<Vec<_>>>()?;
                (fits, s.copulas())
            }
            Some(est) => {
                let mut any_carried = false;
                let mut fits = Vec::with_capacity(slices.len());
                for (i, (res, x)) in est.marginals.into_iter().zip(&slices).enumerate() {
                    fits.push(match (res, &prev) {
                        (Ok(f), _) => f,
                        (Err(e), Some(s)) => {
                            log::warn!("window {k}: marginal {i} fit failed ({e}); carrying previous parameters");
                            carried += 1;
                            any_carried = true;
                            FittedMarginal::from_params(spec, s.marginals[i].clone(), x)?
                        }
                        (Err(e), None) => return Err(stage_err(&format!("window {k} marginal {i}"), e)),
                    });
                }
                let fitted = match est.copulas {
                    Some(c) if !any_carried => c,
                    _ => self.fit_copulas(&fits)?,
                };
                let before = prev.as_ref().map(RollingState::copulas);
                let mut copulas = Vec::with_capacity(fitted.len());
                for (i, res) in fitted.into_iter().enumerate() {
                    copulas.push(match (res, &before) {
                        (Ok(c), _) => c,
                        (Err(e), Some(b)) => {
                            log::warn!("window {k}: copula {i} fit failed ({e}); carrying previous parameters");
                            carried += 1;
                            b[i].clone()
                        }
                        (Err(e), None) => return Err(stage_err(&format!("window {k} copula {i}"), e)),
                    });
                }
                (fits, copulas)
            }
        };
        self.state = Some(RollingState::new(&fits, &copulas));
        Ok(Resolved { k, fits, copulas, carried })
    }

    fn forecast(&self, r: &Resolved) -> Result<WindowForecast> {
        let w = self.cfg.window;
        let idx = r.k + w;
        let p = self.conditioning.len();
        let levels = self.cfg.levels;
        let tf = &r.fits[0];
        let wants = |m: Measure| self.cfg.measures.contains(&m);
        let solve = |m: Measure, c: &CopulaSpec| -> Result<f64> {
            if wants(m) {
                tf.var_parametric(measure_level(m, c as &dyn Copula, levels)?, w)
            } else {
                Ok(f64::NAN)
            }
        };
        let var = |i: usize| r.fits[i].var_parametric(levels.alpha, w);
        Ok(WindowForecast {
            index: idx,
            date: self.target.dates[idx],
            target_return: self.target.values[idx],
            target_var: var(0)?,
            conditioning_returns: self.conditioning.iter().map(|c| c.values[idx]).collect(),
            conditioning_vars: (1..=p).map(var).collect::<Result<_>>()?,
            system_return: self.system.values[idx],
            system_var: var(p + 1)?,
            covar: r.copulas[..p].iter().map(|c| solve(Measure::CoVaR, c)).collect::<Result<_>>()?,
            scovar: solve(Measure::SCoVaR, &r.copulas[p])?,
            mcovar: solve(Measure::MCoVaR, &r.copulas[p + 1])?,
            vcovar: solve(Measure::VCoVaR, &r.copulas[p + 1])?,
            carried: r.carried,
            state: RollingState::new(&r.fits, &r.copulas),
        })
    }

    /// Forecasts for windows `from..to`, continuing from the current state.
    pub fn run_range(&mut self, from: usize, to: usize) -> Result<Vec<WindowForecast>> {
        if to > self.len() || from > to {
            return Err(Error::InvalidInput(format!("window range {from}..{to} outside 0..{}", self.len())));
        }
        let mut out = Vec::with_capacity(to - from);
        let mut start = from;
        while start < to {
            let end = (start + CHUNK).min(to);
            let first_needs_fit = self.state.is_none();
            let refit: Vec<usize> = (start..end)
                .filter(|&k| k % self.cfg.refit_stride == 0 || (k == start && first_needs_fit))
                .collect();
            let this = &*self;
            let mut estimates: Vec<(usize, Estimates)> = refit.par_iter().map(|&k| (k, this.estimate(k))).collect();
            estimates.reverse();
            let mut resolved = Vec::with_capacity(end - start);
            for k in start..end {
                let est = match estimates.last() {
                    Some((j, _)) if *j == k => estimates.pop().map(|(_, e)| e),
                    _ => None,
                };
                resolved.push(self.resolve(k, est)?);
            }
            let this = &*self;
            let chunk: Vec<WindowForecast> = resolved.par_iter().map(|r| this.forecast(r)).collect::<Result<_>>()?;
            out.extend(chunk);
            start = end;
        }
        Ok(out)
    }

    /// Runs windows `from..len()`.
    pub fn run_from(&mut self, from: usize) -> Result<Vec<WindowForecast>> {
        let n = self.len();
        self.run_range(from, n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RollingResult {
    pub forecasts: Vec<WindowForecast>,
    pub risks: Vec<RiskSeries>,
    pub reports: Vec<ViolationReport>,
}

/// Rolling one-step-ahead forecasts of every configured measure with their realized violation
/// rates (conditioning events use the forecasted VaRs).
pub fn rolling_forecast(target: &ReturnSeries, conditioning: &[&ReturnSeries], cfg: &RollingConfig) -> Result<RollingResult> {
    let mut f = RollingForecaster::new(target, conditioning, cfg.clone())?;
    let forecasts = f.run_from(0)?;
    let cond: Vec<String> = conditioning.iter().map(|c| c.asset.clone()).collect();
    Ok(summarize(&forecasts, &target.asset, &cond, &f.system_name(), cfg))
}

/// Builds forecast series and violation reports from window forecasts.
pub fn summarize(forecasts: &[WindowForecast], target: &str, cond: &[String], system: &str, cfg: &RollingConfig) -> RollingResult {
    let levels = cfg.levels;
    let label = cfg.family.to_string();
    let dates: Vec<NaiveDate> = forecasts.iter().map(|f| f.date).collect();
    let hit = |v: &dyn Fn(&WindowForecast) -> f64| -> Vec<bool> { forecasts.iter().map(|f| f.target_return <= v(f)).collect() };
    let series = |measure: Measure, conditioning: Vec<String>, copula: &str, v: &dyn Fn(&WindowForecast) -> f64| RiskSeries {
        measure,
        target: target.to_string(),
        conditioning,
        copula: copula.to_string(),
        levels,
        dates: dates.clone(),
        values: forecasts.iter().map(v).collect(),
        u: vec![],
    };
    let below: Vec<Vec<bool>> = (0..cond.len())
        .map(|j| forecasts.iter().map(|f| f.conditioning_returns[j] <= f.conditioning_vars[j]).collect())
        .collect();
    let sys_below: Vec<bool> = forecasts.iter().map(|f| f.system_return <= f.system_var).collect();

    let mut risks = vec![series(Measure::VaR, vec![], "", &|f| f.target_var)];
    let mut reports = vec![ViolationReport::new(Measure::VaR, levels, target, vec![], "", &vec![true; forecasts.len()], &hit(&|f| f.target_var))];
    for m in &cfg.measures {
        match m {
            Measure::VaR => {}
            Measure::CoVaR => {
                for (j, name) in cond.iter().enumerate() {
                    let v = move |f: &WindowForecast| f.covar[j];
                    risks.push(series(*m, vec![name.clone()], &label, &v));
                    reports.push(ViolationReport::new(*m, levels, target, vec![name.clone()], &label, &below[j], &hit(&v)));
                }
            }
            Measure::SCoVaR => {
                let v = |f: &WindowForecast| f.scovar;
                risks.push(series(*m, vec![system.to_string()], &label, &v));
                reports.push(ViolationReport::new(*m, levels, target, vec![system.to_string()], &label, &sys_below, &hit(&v)));
            }
            Measure::MCoVaR | Measure::VCoVaR => {
                let mc = *m == Measure::MCoVaR;
                let v = move |f: &WindowForecast| if mc { f.mcovar } else { f.vcovar };
                let events = condition_events(*m, &below).expect("multi-variable event");
                risks.push(series(*m, cond.to_vec(), &label, &v));
                reports.push(ViolationReport::new(*m, levels, target, cond.to_vec(), &label, &events, &hit(&v)));
            }
        }
    }
    RollingResult { forecasts: forecasts.to_vec(), risks, reports }
}
