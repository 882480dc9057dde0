use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sysrisk::backtest::{run_insample, summarize, RollingConfig, RollingForecaster, ViolationReport, WindowForecast};
use sysrisk::copula::Family;
use sysrisk::ingest::{describe as describe_series, kendall_matrix, load_prices, to_log_returns, ReturnSeries};
use sysrisk::risk::{FittedDependence, Measure, ProbLevels, RiskSeries};
use sysrisk::simulation::{dependence_curve, hac_surface, validate_violation_rate, SweepConfig, ValidationConfig};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{csv_err, fmt_opt, lib_csv_err, num, OutDir};

/// Rolling windows processed between checkpoints.
const CHECKPOINT_EVERY: usize = 100;

fn load_returns(cfg: &RunConfig) -> CliResult<Vec<ReturnSeries>> {
    let path = cfg.data_path()?;
    let table = load_prices(path, &cfg.data.schema()).map_err(|e| CliError::stage("reading prices", e))?;
    if table.dropped_rows > 0 {
        log::info!("{}: dropped {} rows with missing prices", path.display(), table.dropped_rows);
    }
    to_log_returns(&table).map_err(|e| CliError::stage(format!("{}", path.display()), e))
}

/// Target and conditioning series; every other asset conditions when none are configured.
fn select_assets<'a>(cfg: &RunConfig, all: &'a [ReturnSeries]) -> CliResult<(&'a ReturnSeries, Vec<&'a ReturnSeries>)> {
    let target = cfg.target()?;
    let find = |name: &str| {
        all.iter().find(|s| s.asset == name).ok_or_else(|| CliError::Config(format!("asset {name} not in the data file")))
    };
    let t = find(target)?;
    let cond = if cfg.conditioning.is_empty() {
        all.iter().filter(|s| s.asset != target).collect()
    } else {
        cfg.conditioning.iter().map(|c| find(c)).collect::<CliResult<Vec<_>>>()?
    };
    if cond.is_empty() {
        return Err(CliError::Config("no conditioning asset available".into()));
    }
    Ok((t, cond))
}

fn write_reports(out: &mut OutDir, name: &str, reports: &[ViolationReport]) -> CliResult<()> {
    out.table(name, &ViolationReport::CSV_HEADER, |w| {
        for r in reports {
            w.write_record(r.csv_record()).map_err(csv_err)?;
        }
        Ok(())
    })?;
    Ok(())
}

fn write_series(out: &mut OutDir, name: &str, series: &[&RiskSeries]) -> CliResult<()> {
    out.table(name, &RiskSeries::CSV_HEADER, |w| {
        for s in series {
            s.write_csv(w).map_err(lib_csv_err)?;
        }
        Ok(())
    })?;
    Ok(())
}

fn file_label(s: &str) -> String {
    s.to_ascii_lowercase().replace(|c: char| !c.is_ascii_alphanumeric() && c != '-', "_")
}

/// Summary statistics of each return series and the Kendall τ matrix.
pub fn describe(cfg: &RunConfig, out: &mut OutDir) -> CliResult<Vec<String>> {
    let returns = load_returns(cfg)?;
    let stats = returns
        .iter()
        .map(|s| describe_series(s).map_err(|e| CliError::stage(format!("describe {}", s.asset), e)))
        .collect::<CliResult<Vec<_>>>()?;
    out.table(
        "descriptives.csv",
        &["asset", "n", "min", "mean", "median", "max", "sd", "skewness", "kurtosis", "jarque_bera", "jarque_bera_p", "ljung_box_p"],
        |w| {
            for d in &stats {
                let v = [d.min, d.mean, d.median, d.max, d.sd, d.skewness, d.kurtosis, d.jarque_bera, d.jarque_bera_p, d.ljung_box_p];
                let mut row = vec![d.asset.clone(), d.n.to_string()];
                row.extend(v.iter().map(|x| num(*x)));
                w.write_record(row).map_err(csv_err)?;
            }
            Ok(())
        },
    )?;
    let refs: Vec<&ReturnSeries> = returns.iter().collect();
    let tau = kendall_matrix(&refs).map_err(|e| CliError::stage("kendall", e))?;
    let mut header = vec!["asset"];
    header.extend(returns.iter().map(|s| s.asset.as_str()));
    out.table("kendall.csv", &header, |w| {
        for (s, row) in returns.iter().zip(&tau) {
            let mut r = vec![s.asset.clone()];
            r.extend(row.iter().map(|x| num(*x)));
            w.write_record(r).map_err(csv_err)?;
        }
        Ok(())
    })?;
    Ok(stats.iter().map(|d| format!("{}: n = {}, mean = {:.6}, sd = {:.6}", d.asset, d.n, d.mean, d.sd)).collect())
}

fn dependence_params(d: &FittedDependence) -> String {
    match d {
        FittedDependence::Static(f) => serde_json::to_string(&f.spec),
        FittedDependence::Patton { fit, .. } => serde_json::to_string(&fit.spec),
        FittedDependence::Dcc { fit, .. } => serde_json::to_string(&fit.spec),
    }
    .unwrap_or_default()
}

/// In-sample pipeline: marginals, PIT, copula fits, every measure and its violation rate.
pub fn measure(cfg: &RunConfig, out: &mut OutDir) -> CliResult<Vec<String>> {
    let returns = load_returns(cfg)?;
    let (target, cond) = select_assets(cfg, &returns)?;
    let kinds = cfg.dependence_kinds()?;
    let policy = cfg.marginal.policy()?;
    let levels = cfg.levels()?;
    let res = run_insample(target, &cond, &kinds, &policy, levels).map_err(|e| CliError::stage("measure", e))?;

    let mut marginals: Vec<(String, &sysrisk::marginal::FittedMarginal)> = res.marginals.iter().map(|(n, f)| (n.clone(), f)).collect();
    if let Some(s) = &res.system_fit {
        marginals.push((res.vars.last().map(|v| v.target.clone()).unwrap_or_default(), s));
    }
    out.table("marginals.csv", &["asset", "model", "loglik", "aic", "parameters", "warning"], |w| {
        for (name, f) in &marginals {
            let params: Vec<String> = f
                .param_names
                .iter()
                .zip(f.params.to_vector(&f.spec))
                .map(|(n, v)| format!("{n}={v}"))
                .collect();
            w.write_record([
                name.clone(),
                f.spec.label(),
                num(f.loglik),
                num(f.aic),
                params.join(";"),
                f.warning.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        Ok(())
    })?;
    out.table("dependence.csv", &["target", "conditioning", "copula", "loglik", "aic", "parameters"], |w| {
        for (t, c, d) in &res.dependence {
            let label = match d {
                FittedDependence::Static(f) => f.spec.family().to_string(),
                FittedDependence::Patton { .. } => "patton-t".into(),
                FittedDependence::Dcc { .. } => "dcc-t".into(),
            };
            w.write_record([t.clone(), c.join("+"), label, num(d.loglik()), num(d.aic()), dependence_params(d)])
                .map_err(csv_err)?;
        }
        Ok(())
    })?;
    write_series(out, "var.csv", &res.vars.iter().collect::<Vec<_>>())?;
    let mut groups: Vec<(Measure, String)> = vec![];
    for r in &res.risks {
        if !groups.contains(&(r.measure, r.copula.clone())) {
            groups.push((r.measure, r.copula.clone()));
        }
    }
    for (m, c) in &groups {
        let series: Vec<&RiskSeries> = res.risks.iter().filter(|r| r.measure == *m && &r.copula == c).collect();
        write_series(out, &format!("risk_{}_{}.csv", file_label(&m.to_string()), file_label(c)), &series)?;
    }
    write_reports(out, "insample_rates.csv", &res.reports)?;
    Ok(res
        .reports
        .iter()
        .map(|r| {
            format!(
                "{} {} | {} [{}]: {} of {} events, rate {}",
                r.measure,
                r.target,
                r.conditioning.join("+"),
                r.copula,
                r.violation_count,
                r.condition_count,
                fmt_opt(r.rate)
            )
        })
        .collect())
}

/// Average violation rates of fitted measures on simulated copula samples.
pub fn simulate(cfg: &RunConfig, out: &mut OutDir) -> CliResult<Vec<String>> {
    let s = &cfg.simulate;
    let families = cfg.simulate_families()?;
    let measures = cfg.simulate_measures()?;
    if s.levels.is_empty() || s.taus.is_empty() {
        return Err(CliError::Config("simulate needs at least one level and one tau".into()));
    }
    let mut rows = vec![];
    for &level in &s.levels {
        let levels = ProbLevels::new(level, level).map_err(|e| CliError::stage("simulate.levels", e))?;
        for &measure in &measures {
            for &family in &families {
                for &tau in &s.taus {
                    let vc = ValidationConfig { measure, family, tau, levels, n: s.n, replications: s.replications, seed: cfg.seed };
                    let r = validate_violation_rate(&vc)
                        .map_err(|e| CliError::stage(format!("simulate {measure} {family} tau={tau} level={level}"), e))?;
                    log::info!("{measure} {family} tau={tau} level={level}: {:.4}", r.mean_rate);
                    rows.push(r);
                }
            }
        }
    }
    out.table(
        "violation_rates.csv",
        &["measure", "family", "tau", "alpha", "beta", "n", "replications", "mean_rate", "failed_fits", "empty_events"],
        |w| {
            for r in &rows {
                let c = &r.config;
                w.write_record([
                    c.measure.to_string(),
                    c.family.to_string(),
                    num(c.tau),
                    num(c.levels.alpha),
                    num(c.levels.beta),
                    c.n.to_string(),
                    c.replications.to_string(),
                    num(r.mean_rate),
                    r.failed_fits.to_string(),
                    r.empty_events.to_string(),
                ])
                .map_err(csv_err)?;
            }
            Ok(())
        },
    )?;
    Ok(rows
        .iter()
        .map(|r| format!("{} {} tau={} level={}: {:.4}", r.config.measure, r.config.family, r.config.tau, r.config.levels.alpha, r.mean_rate))
        .collect())
}

/// Dependence curves with a standard normal target margin and nested-copula surfaces.
pub fn curves(cfg: &RunConfig, out: &mut OutDir) -> CliResult<Vec<String>> {
    let levels = cfg.levels()?;
    let grid = if cfg.curves.taus.is_empty() { sysrisk::simulation::default_tau_grid() } else { cfg.curves.taus.clone() };
    let sgrid = if cfg.curves.surface_taus.is_empty() { grid.clone() } else { cfg.curves.surface_taus.clone() };
    let mut specs = vec![];
    for f in [Family::Gaussian, Family::StudentT, Family::Clayton, Family::Gumbel] {
        specs.push((Measure::CoVaR, f));
    }
    for m in [Measure::MCoVaR, Measure::VCoVaR] {
        for f in [Family::Clayton, Family::Gumbel] {
            specs.push((m, f));
        }
    }
    let curves = specs
        .iter()
        .map(|&(measure, family)| {
            let sc = SweepConfig { measure, family, tau_grid: grid.clone(), levels, nu: cfg.curves.nu };
            dependence_curve(&sc).map_err(|e| CliError::stage(format!("curve {measure} {family}"), e))
        })
        .collect::<CliResult<Vec<_>>>()?;
    out.table("curves.csv", &["measure", "family", "tau", "u", "value", "independence_limit", "comonotone_limit"], |w| {
        for c in &curves {
            for p in &c.points {
                w.write_record([
                    c.measure.to_string(),
                    c.family.to_string(),
                    num(p.tau),
                    num(p.u),
                    num(p.value),
                    num(c.independence_limit),
                    num(c.comonotone_limit),
                ])
                .map_err(csv_err)?;
            }
        }
        Ok(())
    })?;
    let mut surfaces = vec![];
    for m in [Measure::MCoVaR, Measure::VCoVaR] {
        for f in [Family::Clayton, Family::Gumbel] {
            let cells = hac_surface(m, f, f, &sgrid, &sgrid, levels).map_err(|e| CliError::stage(format!("surface {m} {f}"), e))?;
            surfaces.push((m, f, cells));
        }
    }
    out.table("surfaces.csv", &["measure", "family", "tau1", "tau2", "value"], |w| {
        for (m, f, cells) in &surfaces {
            for c in cells {
                w.write_record([m.to_string(), f.to_string(), num(c.tau1), num(c.tau2), fmt_opt(c.value)])
                    .map_err(csv_err)?;
            }
        }
        Ok(())
    })?;
    Ok(curves
        .iter()
        .map(|c| {
            let first = c.points.first().map_or(f64::NAN, |p| p.value);
            let last = c.points.last().map_or(f64::NAN, |p| p.value);
            format!("{} {}: {:.4} .. {:.4} (limits {:.4}, {:.4})", c.measure, c.family, first, last, c.independence_limit, c.comonotone_limit)
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    fingerprint: String,
    forecasts: Vec<WindowForecast>,
}

fn fingerprint(cfg: &RollingConfig, target: &ReturnSeries, cond: &[&ReturnSeries]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cfg).unwrap_or_default());
    for s in std::iter::once(target).chain(cond.iter().copied()) {
        h.update(s.asset.as_bytes());
        for v in &s.values {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn read_checkpoint(path: &Path, fp: &str) -> Option<Vec<WindowForecast>> {
    let text = fs::read(path).ok()?;
    let c: Checkpoint = serde_json::from_slice(&text).ok()?;
    if c.fingerprint != fp {
        log::warn!("{}: checkpoint was written for different inputs; starting over", path.display());
        return None;
    }
    Some(c.forecasts)
}

/// Rolling one-step-ahead forecasts and out-of-sample violation rates for each configured
/// static copula family. With `resume`, completed windows are read back from checkpoints.
pub fn backtest(cfg: &RunConfig, out: &mut OutDir, resume: bool) -> CliResult<Vec<String>> {
    let returns = load_returns(cfg)?;
    let (target, cond) = select_assets(cfg, &returns)?;
    let families = cfg.static_families()?;
    let levels = cfg.levels()?;
    let cond_names: Vec<String> = cond.iter().map(|c| c.asset.clone()).collect();
    let mut reports = vec![];
    for family in families {
        let rc = RollingConfig { window: cfg.window, levels, family, measures: Measure::ALL.to_vec(), refit_stride: cfg.refit_stride };
        let stage = format!("backtest {family}");
        let mut f = RollingForecaster::new(target, &cond, rc.clone()).map_err(|e| CliError::stage(&stage, e))?;
        let fp = fingerprint(&rc, target, &cond);
        let ckpt = out.path(&format!("backtest_{}.checkpoint.json", file_label(&family.to_string())));
        let mut done = if resume { read_checkpoint(&ckpt, &fp).unwrap_or_default() } else { vec![] };
        done.truncate(f.len());
        if let Some(last) = done.last() {
            log::info!("{stage}: resuming after {} completed windows", done.len());
            f = f.with_state(last.state.clone());
        }
        while done.len() < f.len() {
            let from = done.len();
            let to = (from + CHECKPOINT_EVERY).min(f.len());
            done.extend(f.run_range(from, to).map_err(|e| CliError::stage(&stage, e))?);
            let c = Checkpoint { fingerprint: fp.clone(), forecasts: done.clone() };
            let text = serde_json::to_vec(&c).map_err(|e| CliError::Io(e.to_string()))?;
            fs::write(&ckpt, text).map_err(|e| CliError::io(&ckpt, e))?;
            log::info!("{stage}: {to} of {} windows", f.len());
        }
        let res = summarize(&done, &target.asset, &cond_names, &f.system_name(), &rc);
        let carried: usize = done.iter().map(|w| w.carried).sum();
        if carried > 0 {
            log::warn!("{stage}: {carried} model fits reused the previous window's parameters");
        }
        write_series(out, &format!("forecasts_{}.csv", file_label(&family.to_string())), &res.risks.iter().collect::<Vec<_>>())?;
        reports.extend(res.reports);
    }
    write_reports(out, "backtest_rates.csv", &reports)?;
    Ok(reports
        .iter()
        .map(|r| {
            format!(
                "{} [{}] {}: {} of {} events, rate {}",
                r.measure,
                r.copula,
                r.conditioning.join("+"),
                r.violation_count,
                r.condition_count,
                fmt_opt(r.rate)
            )
        })
        .collect())
}
