use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagnostics::{ljung_box, mcleod_li, sign_bias_tests, weighted_li_mak, DEFAULT_LAGS, LEVEL};
use super::fit::{fit, FittedMarginal};
use super::model::{ArmaGjrGarchSpec, VarianceKind, MAX_GARCH_ORDER, MAX_ORDER};
use crate::error::{invalid_input, Error, Result};

/// Minimum series length for automatic selection.
pub const MIN_SELECT_LENGTH: usize = 500;

/// Order caps (exclusive) and test settings for [`select_model_with`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub max_arma: usize,
    pub max_arch: usize,
    pub max_garch: usize,
    pub lags: usize,
    pub level: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { max_arma: MAX_ORDER + 1, max_arch: MAX_ORDER + 1, max_garch: MAX_GARCH_ORDER + 1, lags: DEFAULT_LAGS, level: LEVEL }
    }
}

impl SelectionConfig {
    fn validate(&self) -> Result<()> {
        if self.max_arma == 0 || self.max_arma > MAX_ORDER + 1 {
            return invalid_input(format!("ARMA cap must be in 1..={}", MAX_ORDER + 1));
        }
        if self.max_arch < 2 || self.max_arch > MAX_ORDER + 1 {
            return invalid_input(format!("ARCH cap must be in 2..={}", MAX_ORDER + 1));
        }
        if self.max_garch == 0 || self.max_garch > MAX_GARCH_ORDER + 1 {
            return invalid_input(format!("GARCH cap must be in 1..={}", MAX_GARCH_ORDER + 1));
        }
        if self.lags == 0 || !(self.level > 0.0 && self.level < 1.0) {
            return invalid_input("lags must be positive and the level in (0, 1)");
        }
        Ok(())
    }
}

/// Stage at which the selection stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Arma,
    Garch,
    Gjr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub model: FittedMarginal,
    pub stage: Stage,
    /// Number of candidates successfully estimated at each stage visited.
    pub candidates: Vec<usize>,
    /// Whether the returned model passed every test of its stage.
    pub passed: bool,
}

fn arma_grid(cap: usize) -> impl Iterator<Item = (usize, usize, bool)> {
    (0..cap).flat_map(move |p| (0..cap).flat_map(move |q| [true, false].into_iter().map(move |m| (p, q, m))))
}

fn candidates(cfg: &SelectionConfig, variance: VarianceKind) -> Vec<ArmaGjrGarchSpec> {
    match variance {
        VarianceKind::None => arma_grid(cfg.max_arma)
            .map(|(ar, ma, include_mu)| ArmaGjrGarchSpec { ar, ma, arch: 0, garch: 0, include_mu, variance })
            .collect(),
        _ => arma_grid(cfg.max_arma)
            .flat_map(|(ar, ma, include_mu)| {
                (1..cfg.max_arch).flat_map(move |arch| {
                    (0..cfg.max_garch).map(move |garch| ArmaGjrGarchSpec { ar, ma, arch, garch, include_mu, variance })
                })
            })
            .collect(),
    }
}

/// Ljung–Box on standardized residuals with `p + q` degrees of freedom removed; the lag count is
/// raised to `p + q + 1` when the configured lags would leave no degrees of freedom.
fn arma_lb(f: &FittedMarginal, lags: usize) -> Result<f64> {
    let dof = f.spec.ar + f.spec.ma;
    Ok(ljung_box(&f.z, lags.max(dof + 1), dof)?.p_value)
}

fn passes(f: &FittedMarginal, variance: VarianceKind, cfg: &SelectionConfig) -> bool {
    let ok = |p: Result<f64>| matches!(p, Ok(v) if v > cfg.level);
    if !ok(arma_lb(f, cfg.lags)) {
        return false;
    }
    if variance == VarianceKind::None {
        return true;
    }
    if !ok(weighted_li_mak(f, cfg.lags).map(|t| t.p_value)) {
        return false;
    }
    if variance == VarianceKind::Gjr {
        return matches!(sign_bias_tests(f), Ok(sb) if sb.passes_at(cfg.level));
    }
    true
}

/// Minimum AIC, ties broken toward fewer parameters.
fn best<'a>(models: impl Iterator<Item = &'a FittedMarginal>) -> Option<&'a FittedMarginal> {
    models.min_by(|a, b| a.aic.total_cmp(&b.aic).then(a.n_params.cmp(&b.n_params)))
}

struct StageOutcome {
    model: FittedMarginal,
    passed: bool,
    fitted: usize,
}

fn run_stage(x: &[f64], cfg: &SelectionConfig, variance: VarianceKind) -> Result<StageOutcome> {
    let specs = candidates(cfg, variance);
    let fits: Vec<(FittedMarginal, bool)> = specs
        .par_iter()
        .filter_map(|s| fit(x, s).ok())
        .map(|f| {
            let ok = passes(&f, variance, cfg);
            (f, ok)
        })
        .collect();
    if fits.is_empty() {
        return Err(Error::Fit(format!("no {variance:?} candidate could be estimated")));
    }
    let fitted = fits.len();
    if let Some(m) = best(fits.iter().filter(|(_, ok)| *ok).map(|(f, _)| f)) {
        return Ok(StageOutcome { model: m.clone(), passed: true, fitted });
    }
    let model = best(fits.iter().map(|(f, _)| f)).expect("non-empty").clone();
    Ok(StageOutcome { model, passed: false, fitted })
}

fn finish(mut out: StageOutcome, stage: Stage, mut counts: Vec<usize>) -> Selection {
    counts.push(out.fitted);
    if !out.passed {
        let msg = format!("no {stage:?} candidate passed all residual tests; returning the minimum-AIC model");
        log::warn!("{msg}");
        out.model.warning = Some(match out.model.warning.take() {
            Some(w) => format!("{w}; {msg}"),
            None => msg,
        });
    }
    Selection { model: out.model, stage, candidates: counts, passed: out.passed }
}

/// Selection with default caps; see [`select_model_with`].
pub fn select_model(x: &[f64]) -> Result<FittedMarginal> {
    Ok(select_model_with(x, &SelectionConfig::default())?.model)
}

/// Escalating ARMA → ARMA-GARCH → ARMA-GJR-GARCH search. Each stage keeps the candidates whose
/// residuals pass the stage's tests and takes the one with the lowest AIC; escalation happens
/// when McLeod–Li detects ARCH effects and then when any sign-bias test rejects.
pub fn select_model_with(x: &[f64], cfg: &SelectionConfig) -> Result<Selection> {
    cfg.validate()?;
    if x.len() < MIN_SELECT_LENGTH {
        return invalid_input(format!(
            "model selection needs at least {MIN_SELECT_LENGTH} observations, got {}",
            x.len()
        ));
    }
    let arma = run_stage(x, cfg, VarianceKind::None)?;
    let dof = arma.model.spec.ar + arma.model.spec.ma;
    let arch = mcleod_li(&arma.model.z, cfg.lags.max(dof + 1), dof)?;
    if arch.p_value > cfg.level {
        return Ok(finish(arma, Stage::Arma, vec![]));
    }
    let counts = vec![arma.fitted];
    let garch = run_stage(x, cfg, VarianceKind::Symmetric)?;
    let asym = sign_bias_tests(&garch.model)?;
    if asym.passes_at(cfg.level) {
        return Ok(finish(garch, Stage::Garch, counts));
    }
    let counts = vec![arma.fitted, garch.fitted];
    let gjr = run_stage(x, cfg, VarianceKind::Gjr)?;
    Ok(finish(gjr, Stage::Gjr, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::SkewTParams;
    use crate::marginal::model::{simulate, MarginalParams};

    fn small() -> SelectionConfig {
        SelectionConfig { max_arma: 2, max_arch: 2, max_garch: 2, ..Default::default() }
    }

    #[test]
    fn candidate_counts() {
        let cfg = SelectionConfig::default();
        assert_eq!(candidates(&cfg, VarianceKind::None).len(), 72);
        assert_eq!(candidates(&cfg, VarianceKind::Symmetric).len(), 72 * 5 * 2);
        assert_eq!(candidates(&small(), VarianceKind::Gjr).len(), 8 * 2);
    }

    #[test]
    fn returned_model_has_minimal_aic_among_passing() {
        let spec = ArmaGjrGarchSpec::arma(1, 0, true).unwrap();
        let p = MarginalParams {
            mu: 0.1,
            phi: vec![0.4],
            psi: vec![],
            omega: 1.0,
            lambda: vec![],
            gamma: vec![],
            delta: vec![],
            skew_t: SkewTParams { zeta: 1.0, nu: 8.0 },
        };
        let x = simulate(&spec, &p, 800, 100, 11).unwrap();
        let cfg = small();
        let sel = select_model_with(&x, &cfg).unwrap();
        assert_eq!(sel.stage, Stage::Arma);
        let fits: Vec<_> = candidates(&cfg, VarianceKind::None).iter().filter_map(|s| fit(&x, s).ok()).collect();
        let min = fits.iter().filter(|f| passes(f, VarianceKind::None, &cfg)).map(|f| f.aic).fold(f64::INFINITY, f64::min);
        assert_eq!(sel.model.aic, min);
        assert_eq!(sel.model.spec.ar, 1);
    }

    #[test]
    fn rejects_short_series() {
        assert!(select_model(&[0.0; 100]).is_err());
    }
}
