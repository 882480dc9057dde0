use serde::{Deserialize, Serialize};

use super::{check_keep, Copula, CopulaSpec, Generator, UniformMargin};
use crate::error::{invalid_input, invalid_param, Error, Result};

/// Two-level hierarchical Archimedean copula `C1{u1, C2(u2, ..., ud)}`.
///
/// The first variable sits at the outer level with generator `outer`; the
/// remaining `dim - 1` variables are joined by `inner`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HacSpec {
    pub outer: Generator,
    pub inner: Generator,
    pub dim: usize,
}

impl HacSpec {
    pub fn new(outer: Generator, inner: Generator, dim: usize) -> Result<Self> {
        let h = HacSpec { outer, inner, dim };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        self.outer.validate()?;
        self.inner.validate()?;
        if self.dim < 3 {
            return invalid_param(format!("hierarchical copula needs at least 3 variables, got {}", self.dim));
        }
        if self.outer.family() != self.inner.family() {
            return Err(Error::Unsupported(format!(
                "nesting {} inside {} is not supported",
                self.inner.family(),
                self.outer.family()
            )));
        }
        // Sufficient nesting condition for same-family generators.
        if self.outer.theta() > self.inner.theta() * (1.0 + 1e-12) {
            return invalid_param(format!(
                "nesting condition violated: outer tau {} exceeds inner tau {}",
                self.outer.tau(),
                self.inner.tau()
            ));
        }
        Ok(())
    }
}

impl Copula for HacSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn cdf_unchecked(&self, u: &[f64]) -> f64 {
        if u.iter().any(|&x| x <= 0.0) {
            return 0.0;
        }
        let c2 = self.inner.cdf(&u[1..]);
        self.outer.psi(self.outer.phi(u[0]) + self.outer.phi(c2))
    }

    fn marginalize(&self, keep: &[usize]) -> Result<Box<dyn Copula>> {
        check_keep(self.dim, keep)?;
        if keep.len() == 1 {
            return Ok(Box::new(UniformMargin));
        }
        match keep.iter().position(|&k| k == 0) {
            None => Ok(Box::new(inner_spec(self.inner, keep.len()))),
            Some(0) if keep.len() == 2 => Ok(Box::new(inner_spec(self.outer, 2))),
            Some(0) => Ok(Box::new(HacSpec { outer: self.outer, inner: self.inner, dim: keep.len() })),
            Some(_) => invalid_input("marginalize: the outer-level variable must stay in first position"),
        }
    }

    fn outer_generator(&self) -> Option<Generator> {
        Some(self.outer)
    }
}

fn inner_spec(g: Generator, dim: usize) -> CopulaSpec {
    match g {
        Generator::Clayton(theta) => CopulaSpec::Clayton { theta, dim },
        Generator::Gumbel(theta) => CopulaSpec::Gumbel { theta, dim },
    }
}
