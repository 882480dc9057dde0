use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sysrisk::backtest::MarginalPolicy;
use sysrisk::copula::Family;
use sysrisk::ingest::Schema;
use sysrisk::marginal::{ArmaGjrGarchSpec, SelectionConfig, VarianceKind};
use sysrisk::risk::{DependenceKind, Measure, ProbLevels};

use crate::error::{CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SYSRISK_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub date_column: String,
    /// Price columns to load; every non-date column when empty.
    pub columns: Vec<String>,
    pub delimiter: char,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { path: None, date_column: "date".into(), columns: vec![], delimiter: ',' }
    }
}

impl DataConfig {
    pub fn schema(&self) -> Schema {
        Schema {
            date_column: self.date_column.clone(),
            columns: (!self.columns.is_empty()).then(|| self.columns.clone()),
            delimiter: self.delimiter,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalMode {
    Auto,
    Fixed,
}

/// Marginal model policy: automatic selection with order caps, or one fixed specification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarginalConfig {
    pub mode: MarginalMode,
    pub max_arma: usize,
    pub max_arch: usize,
    pub max_garch: usize,
    pub lags: usize,
    pub ar: usize,
    pub ma: usize,
    pub arch: usize,
    pub garch: usize,
    pub include_mu: bool,
    pub variance: VarianceKind,
}

impl Default for MarginalConfig {
    fn default() -> Self {
        let s = SelectionConfig::default();
        Self {
            mode: MarginalMode::Auto,
            max_arma: s.max_arma,
            max_arch: s.max_arch,
            max_garch: s.max_garch,
            lags: s.lags,
            ar: 0,
            ma: 0,
            arch: 1,
            garch: 1,
            include_mu: false,
            variance: VarianceKind::Gjr,
        }
    }
}

impl MarginalConfig {
    pub fn policy(&self) -> CliResult<MarginalPolicy> {
        match self.mode {
            MarginalMode::Auto => Ok(MarginalPolicy::Auto(SelectionConfig {
                max_arma: self.max_arma,
                max_arch: self.max_arch,
                max_garch: self.max_garch,
                lags: self.lags,
                ..SelectionConfig::default()
            })),
            MarginalMode::Fixed => ArmaGjrGarchSpec::new(self.ar, self.ma, self.arch, self.garch, self.include_mu, self.variance)
                .map(MarginalPolicy::Fixed)
                .map_err(|e| CliError::stage("marginal", e)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n: usize,
    pub replications: usize,
    pub taus: Vec<f64>,
    pub families: Vec<String>,
    pub measures: Vec<String>,
    /// Each entry is used for both α and β.
    pub levels: Vec<f64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            replications: 100,
            taus: vec![0.25, 0.5, 0.75],
            families: vec!["clayton".into(), "gumbel".into()],
            measures: vec!["covar".into(), "mcovar".into(), "vcovar".into()],
            levels: vec![0.05, 0.01],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvesConfig {
    /// Degrees of freedom of the t copula in sweeps.
    pub nu: f64,
    /// τ grid for curves; the default 37-point grid when empty.
    pub taus: Vec<f64>,
    /// τ grid for both axes of the nested surfaces; the curve grid when empty.
    pub surface_taus: Vec<f64>,
}

impl Default for CurvesConfig {
    fn default() -> Self {
        Self { nu: sysrisk::simulation::DEFAULT_SWEEP_NU, taus: vec![], surface_taus: vec![] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub target: Option<String>,
    pub conditioning: Vec<String>,
    pub alpha: f64,
    pub beta: f64,
    /// Dependence models: static families or `patton` / `dcc`.
    pub copulas: Vec<String>,
    pub marginal: MarginalConfig,
    pub window: usize,
    pub refit_stride: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub simulate: SimulateConfig,
    pub curves: CurvesConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let levels = ProbLevels::default();
        Self {
            data: DataConfig::default(),
            target: None,
            conditioning: vec![],
            alpha: levels.alpha,
            beta: levels.beta,
            copulas: vec!["gaussian".into(), "t".into(), "clayton".into(), "gumbel".into()],
            marginal: MarginalConfig::default(),
            window: 500,
            refit_stride: 1,
            seed: 1,
            threads: None,
            out: None,
            simulate: SimulateConfig::default(),
            curves: CurvesConfig::default(),
        }
    }
}

fn parse_all<T: std::str::FromStr<Err = sysrisk::Error>>(what: &str, items: &[String]) -> CliResult<Vec<T>> {
    items.iter().map(|s| s.parse().map_err(|e| CliError::stage(what, e))).collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut c: RunConfig = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // Relative data paths are taken relative to the configuration file.
        if let (Some(p), Some(dir)) = (&c.data.path, path.parent()) {
            if p.is_relative() {
                c.data.path = Some(dir.join(p));
            }
        }
        Ok(c)
    }

    pub fn levels(&self) -> CliResult<ProbLevels> {
        ProbLevels::new(self.alpha, self.beta).map_err(|e| CliError::stage("levels", e))
    }

    pub fn dependence_kinds(&self) -> CliResult<Vec<DependenceKind>> {
        if self.copulas.is_empty() {
            return Err(CliError::Config("no copula configured".into()));
        }
        parse_all("copula", &self.copulas)
    }

    pub fn static_families(&self) -> CliResult<Vec<Family>> {
        self.dependence_kinds()?
            .into_iter()
            .map(|k| match k {
                DependenceKind::Static(f) => Ok(f),
                other => Err(CliError::Config(format!("{other} is not a static copula family"))),
            })
            .collect()
    }

    pub fn simulate_families(&self) -> CliResult<Vec<Family>> {
        parse_all("simulate.families", &self.simulate.families)
    }

    pub fn simulate_measures(&self) -> CliResult<Vec<Measure>> {
        parse_all("simulate.measures", &self.simulate.measures)
    }

    pub fn data_path(&self) -> CliResult<&Path> {
        self.data.path.as_deref().ok_or_else(|| CliError::Config("no data file given (--data or data.path)".into()))
    }

    pub fn target(&self) -> CliResult<&str> {
        self.target.as_deref().ok_or_else(|| CliError::Config("no target asset given (--target or target)".into()))
    }

    /// Checks shared by every subcommand.
    pub fn validate(&self) -> CliResult<()> {
        self.levels()?;
        if let Some(t) = &self.target {
            if self.conditioning.iter().any(|c| c == t) {
                return Err(CliError::Config(format!("target {t} is also in the conditioning set")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.conditioning.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(CliError::Config(format!("conditioning asset {dup} listed twice")));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be positive".into()));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("sysrisk-out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_toml() {
        let c: RunConfig = toml::from_str(
            r#"
            target = "A"
            conditioning = ["B", "C"]
            copulas = ["clayton", "dcc"]
            [data]
            path = "prices.csv"
            [marginal]
            mode = "fixed"
            variance = "symmetric"
            "#,
        )
        .unwrap();
        assert_eq!(c.alpha, 0.05);
        assert_eq!(c.window, 500);
        assert_eq!(c.dependence_kinds().unwrap(), vec![DependenceKind::Static(Family::Clayton), DependenceKind::Dcc]);
        assert!(c.static_families().is_err());
        assert!(matches!(c.marginal.policy().unwrap(), MarginalPolicy::Fixed(s) if s.variance == VarianceKind::Symmetric));
    }

    #[test]
    fn rejects_unknown_keys_and_target_in_conditioning() {
        assert!(toml::from_str::<RunConfig>("windw = 3").is_err());
        let c = RunConfig { target: Some("A".into()), conditioning: vec!["A".into()], ..RunConfig::default() };
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }
}
