//! Univariate ARMA-(GJR-)GARCH models with skew-t innovations.

pub mod diagnostics;
pub mod fit;
pub mod model;
pub mod select;

pub use diagnostics::{diagnose, ljung_box, mcleod_li, sign_bias_tests, weighted_li_mak, Diagnostics, SignBias, TestResult};
pub use fit::{fit, fit_with_start, FittedMarginal, MIN_FIT_LENGTH};
pub use model::{filter, loglik, simulate, simulate_from_uniforms, ArmaGjrGarchSpec, MarginalParams, Paths, VarianceKind};
pub use select::{select_model, select_model_with, Selection, SelectionConfig, Stage};
