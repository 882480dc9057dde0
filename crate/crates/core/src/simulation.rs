//! Dependence sweeps of the conditional measures and Monte-Carlo validation of their
//! violation rates.

use chrono::{Days, NaiveDate};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{fit_ml, sample, sample_with, tau_to_theta, AnyCopula, Copula, CopulaSpec, Family, Generator, HacSpec};
use crate::distributions::{clamp_unit, normal_quantile};
use crate::error::{invalid_input, Error, Result};
use crate::ingest::ReturnSeries;
use crate::marginal::{simulate_from_uniforms, ArmaGjrGarchSpec, MarginalParams};
use crate::risk::{limit_level, measure_level, Measure, ProbLevels, Regime};
use crate::stats::empirical_quantile;

/// Degrees of freedom of the t copula in sweeps unless configured otherwise.
pub const DEFAULT_SWEEP_NU: f64 = 4.0;
/// Conditioning dimension for the multivariate sweeps.
pub const SWEEP_CONDITIONING: usize = 2;
/// Largest tolerated share of replications whose fit fails.
pub const MAX_FAILURE_SHARE: f64 = 0.10;

/// 37 points from 0.025 to 0.925.
pub fn default_tau_grid() -> Vec<f64> {
    (1..=37).map(|k| k as f64 * 0.025).collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return invalid_input("tau grid values must lie strictly inside (0, 1)");
    }
    Ok(())
}

fn conditioning_dim(measure: Measure) -> Result<usize> {
    match measure {
        Measure::CoVaR => Ok(1),
        Measure::MCoVaR | Measure::VCoVaR => Ok(SWEEP_CONDITIONING),
        other => invalid_input(format!("{other} is not swept over copula parameters")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub measure: Measure,
    pub family: Family,
    pub tau_grid: Vec<f64>,
    pub levels: ProbLevels,
    /// Degrees of freedom for the t family.
    pub nu: f64,
}

impl SweepConfig {
    pub fn new(measure: Measure, family: Family, levels: ProbLevels) -> Self {
        Self { measure, family, tau_grid: default_tau_grid(), levels, nu: DEFAULT_SWEEP_NU }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub tau: f64,
    pub u: f64,
    pub value: f64,
}

/// Measure values over Kendall's τ with a standard normal target margin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub measure: Measure,
    pub family: Family,
    pub levels: ProbLevels,
    pub points: Vec<CurvePoint>,
    /// Standard normal quantile at β.
    pub independence_limit: f64,
    /// Standard normal quantile at αβ.
    pub comonotone_limit: f64,
}

pub fn dependence_curve(cfg: &SweepConfig) -> Result<Curve> {
    check_grid(&cfg.tau_grid)?;
    cfg.levels.validate()?;
    let p = conditioning_dim(cfg.measure)?;
    if p > 1 && cfg.family.is_elliptical() {
        return Err(Error::Unsupported("multivariate sweeps use exchangeable Archimedean copulas".into()));
    }
    let nu = (cfg.family == Family::StudentT).then_some(cfg.nu);
    let points = cfg
        .tau_grid
        .iter()
        .map(|&tau| {
            let c = CopulaSpec::from_tau(cfg.family, p + 1, tau, nu)?;
            let u = measure_level(cfg.measure, &c, cfg.levels)?;
            Ok(CurvePoint { tau, u, value: normal_quantile(u)? })
        })
        .collect::<Result<_>>()?;
    Ok(Curve {
        measure: cfg.measure,
        family: cfg.family,
        levels: cfg.levels,
        points,
        independence_limit: normal_quantile(limit_level(cfg.levels, Regime::Independence)?)?,
        comonotone_limit: normal_quantile(limit_level(cfg.levels, Regime::Comonotone)?)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell {
    /// τ between the target and the conditioning block.
    pub tau1: f64,
    /// τ within the conditioning block.
    pub tau2: f64,
    /// `None` where the nesting condition τ1 ≤ τ2 fails.
    pub value: Option<f64>,
}

fn generator(family: Family, tau: f64) -> Result<Generator> {
    Generator::new(family, tau_to_theta(family, tau)?)
}

/// Measure values of the nested copula `C1{u1, C2(u2, u3)}` over a (τ1, τ2) grid.
pub fn hac_surface(
    measure: Measure,
    outer: Family,
    inner: Family,
    tau1_grid: &[f64],
    tau2_grid: &[f64],
    levels: ProbLevels,
) -> Result<Vec<SurfaceCell>> {
    check_grid(tau1_grid)?;
    check_grid(tau2_grid)?;
    levels.validate()?;
    if outer != inner || !outer.is_archimedean() {
        return Err(Error::Unsupported("nested copulas need one Archimedean family at both levels".into()));
    }
    let mut cells = Vec::with_capacity(tau1_grid.len() * tau2_grid.len());
    for &tau1 in tau1_grid {
        for &tau2 in tau2_grid {
            let value = if tau1 <= tau2 {
                let h = HacSpec::new(generator(outer, tau1)?, generator(inner, tau2)?, 3)?;
                Some(normal_quantile(measure_level(measure, &h as &dyn Copula, levels)?)?)
            } else {
                None
            };
            cells.push(SurfaceCell { tau1, tau2, value });
        }
    }
    Ok(cells)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub measure: Measure,
    pub family: Family,
    pub tau: f64,
    pub levels: ProbLevels,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
}

impl ValidationConfig {
    pub fn validate(&self) -> Result<()> {
        self.levels.validate()?;
        if self.n < 100 {
            return invalid_input(format!("sample size must be at least 100, got {}", self.n));
        }
        if self.replications == 0 {
            return invalid_input("at least one replication is required");
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return invalid_input(format!("tau must lie strictly inside (0, 1), got {}", self.tau));
        }
        conditioning_dim(self.measure).map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub config: ValidationConfig,
    pub mean_rate: f64,
    /// Rates of the replications that produced a conditioning event.
    pub rates: Vec<f64>,
    pub failed_fits: usize,
    pub empty_events: usize,
}

/// Violation counts of one replication: `(condition events, violations)`.
pub fn count_violations(sample: &[Vec<f64>], measure: Measure, u: f64, alpha: f64) -> (usize, usize) {
    let d = sample[0].len();
    let q: Vec<f64> = (1..d)
        .map(|k| empirical_quantile(&sample.iter().map(|r| r[k]).collect::<Vec<_>>(), alpha))
        .collect();
    let mut events = 0;
    let mut hits = 0;
    for r in sample {
        let mut below = r[1..].iter().zip(&q).map(|(x, q)| x <= q);
        let event = match measure {
            Measure::MCoVaR => below.all(|b| b),
            _ => below.any(|b| b),
        };
        if event {
            events += 1;
            if r[0] <= u {
                hits += 1;
            }
        }
    }
    (events, hits)
}

fn replication(cfg: &ValidationConfig, truth: &AnyCopula, rep: usize) -> Result<Option<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rep as u64);
    let x = sample_with(truth, cfg.n, &mut rng)?;
    let fitted = fit_ml(&x, cfg.family)?;
    let u = measure_level(cfg.measure, &fitted.spec, cfg.levels)?;
    let (events, hits) = count_violations(&x, cfg.measure, u, cfg.levels.alpha);
    Ok((events > 0).then(|| hits as f64 / events as f64))
}

/// Average violation rate of a measure over replications that sample the true copula, refit
/// it by maximum likelihood and compare the solved level with the sampled target values among
/// the observations meeting the conditioning event.
pub fn validate_violation_rate(cfg: &ValidationConfig) -> Result<ValidationResult> {
    cfg.validate()?;
    let dim = conditioning_dim(cfg.measure)? + 1;
    let nu = (cfg.family == Family::StudentT).then_some(DEFAULT_SWEEP_NU);
    let truth = AnyCopula::Static(CopulaSpec::from_tau(cfg.family, dim, cfg.tau, nu)?);
    let outcomes: Vec<Result<Option<f64>>> =
        (0..cfg.replications).into_par_iter().map(|rep| replication(cfg, &truth, rep)).collect();
    let mut rates = Vec::with_capacity(outcomes.len());
    let mut failed = 0;
    let mut empty = 0;
    for o in outcomes {
        match o {
            Ok(Some(r)) => rates.push(r),
            Ok(None) => empty += 1,
            Err(e) => {
                log::warn!("replication failed: {e}");
                failed += 1;
            }
        }
    }
    if failed as f64 > MAX_FAILURE_SHARE * cfg.replications as f64 {
        return Err(Error::Fit(format!("{failed} of {} replications failed", cfg.replications)));
    }
    if rates.is_empty() {
        return Err(Error::Fit("no replication produced a conditioning event".into()));
    }
    let mean_rate = rates.iter().sum::<f64>() / rates.len() as f64;
    Ok(ValidationResult { config: cfg.clone(), mean_rate, rates, failed_fits: failed, empty_events: empty })
}

/// Dependent GARCH-type return paths: copula draws feed the innovation uniforms of each
/// asset's marginal model. Dates are consecutive calendar days from `start`.
pub fn simulate_returns(
    copula: &AnyCopula,
    marginals: &[(String, ArmaGjrGarchSpec, MarginalParams)],
    n: usize,
    burn: usize,
    start: NaiveDate,
    seed: u64,
) -> Result<Vec<ReturnSeries>> {
    let dim = copula.as_copula().dim();
    if dim != marginals.len() {
        return Err(Error::DimensionMismatch { expected: dim, got: marginals.len() });
    }
    if n == 0 {
        return invalid_input("simulation length must be positive");
    }
    let u = sample(copula, n + burn, seed)?;
    let dates: Vec<NaiveDate> = (0..n as u64).map(|i| start + Days::new(i)).collect();
    marginals
        .iter()
        .enumerate()
        .map(|(j, (name, spec, params))| {
            let col: Vec<f64> = u.iter().map(|row| clamp_unit(row[j])).collect();
            let x = simulate_from_uniforms(spec, params, &col, burn)?;
            ReturnSeries::new(name.clone(), dates.clone(), x)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const L: ProbLevels = ProbLevels { alpha: 0.05, beta: 0.05 };

    #[test]
    fn grid_shape() {
        let g = default_tau_grid();
        assert_eq!(g.len(), 37);
        assert!((g[0] - 0.025).abs() < 1e-15 && (g[36] - 0.925).abs() < 1e-12);
    }

    #[test]
    fn curve_values_within_limits() {
        for (m, fam) in [(Measure::CoVaR, Family::Gaussian), (Measure::CoVaR, Family::Clayton), (Measure::VCoVaR, Family::Gumbel), (Measure::VCoVaR, Family::Clayton)] {
            let c = dependence_curve(&SweepConfig::new(m, fam, L)).unwrap();
            for p in &c.points {
                assert!(p.value <= c.independence_limit + 1e-9 && p.value >= c.comonotone_limit - 1e-9, "{m} {fam} {p:?}");
            }
        }
    }

    #[test]
    fn mcovar_can_undershoot_the_comonotone_level() {
        // C(u, α, α) = β C(α, α) only forces u ≥ β C(α, α), which is below αβ at intermediate
        // dependence.
        let c = CopulaSpec::from_tau(Family::Gumbel, 3, 0.55, None).unwrap();
        let u = measure_level(Measure::MCoVaR, &c, L).unwrap();
        let pair = c.marginalize(&[1, 2]).unwrap().cdf(&[0.05, 0.05]).unwrap();
        assert!(u < 0.0025 && u >= 0.05 * pair);
    }

    #[test]
    fn surface_skips_invalid_nesting_and_matches_diagonal() {
        let grid = [0.2, 0.4, 0.6];
        let cells = hac_surface(Measure::VCoVaR, Family::Gumbel, Family::Gumbel, &grid, &grid, L).unwrap();
        assert_eq!(cells.len(), 9);
        assert!(cells.iter().filter(|c| c.tau1 > c.tau2).all(|c| c.value.is_none()));
        let mut cfg = SweepConfig::new(Measure::VCoVaR, Family::Gumbel, L);
        cfg.tau_grid = grid.to_vec();
        let curve = dependence_curve(&cfg).unwrap();
        for p in &curve.points {
            let cell = cells.iter().find(|c| c.tau1 == p.tau && c.tau2 == p.tau).unwrap();
            assert!((cell.value.unwrap() - p.value).abs() < 1e-8);
        }
        assert!(hac_surface(Measure::MCoVaR, Family::Clayton, Family::Gumbel, &grid, &grid, L).is_err());
    }

    #[test]
    fn seeded_validation_is_reproducible() {
        let cfg = ValidationConfig {
            measure: Measure::CoVaR,
            family: Family::Clayton,
            tau: 0.5,
            levels: L,
            n: 2000,
            replications: 4,
            seed: 9,
        };
        let a = validate_violation_rate(&cfg).unwrap();
        let b = validate_violation_rate(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.rates.iter().all(|r| (0.0..=1.0).contains(r)));
    }

    #[test]
    fn counting_by_hand() {
        let s = vec![vec![0.01, 0.01, 0.9], vec![0.5, 0.02, 0.01], vec![0.2, 0.8, 0.8], vec![0.03, 0.9, 0.9]];
        // α = 0.25 → type-1 quantile is the smallest value of each column.
        assert_eq!(count_violations(&s, Measure::VCoVaR, 0.05, 0.25), (2, 1));
        assert_eq!(count_violations(&s, Measure::MCoVaR, 0.05, 0.25), (0, 0));
    }
}
