//! Univariate kernels: standard normal, Student-t and the unit-variance
//! Fernandez-Steel skew-t used for GARCH innovations.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, invalid_param, Result};
use crate::numeric::special::{beta_reg, erfc, ln_beta};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

// ---------------------------------------------------------------- normal

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Acklam's rational approximation (relative error ~1e-9).
pub(crate) fn normal_quantile_approx(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Standard normal inverse CDF: rational approximation followed by one
/// Halley refinement step, giving close to full double precision.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return invalid_input(format!("probability {p} outside (0, 1)"));
    }
    Ok(normal_quantile_unchecked(p))
}

pub(crate) fn normal_quantile_unchecked(p: f64) -> f64 {
    let x = normal_quantile_approx(p);
    // Halley step; the residual is taken on the smaller tail for accuracy.
    let e = if p < 0.5 {
        normal_cdf(x) - p
    } else {
        (1.0 - p) - normal_cdf(-x)
    };
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

// ------------------------------------------------------------- student-t

/// Student-t with `nu > 0` degrees of freedom (not standardized).
#[derive(Debug, Clone, Copy)]
pub struct StudentT {
    nu: f64,
    ln_norm: f64,
}

impl StudentT {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0) || nu.is_nan() {
            return invalid_param(format!("Student-t degrees of freedom must be positive, got {nu}"));
        }
        let ln_norm = if nu.is_infinite() {
            -LN_SQRT_2PI
        } else {
            -0.5 * nu.ln() - ln_beta(0.5, 0.5 * nu)
        };
        Ok(Self { nu, ln_norm })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if self.nu.is_infinite() {
            return self.ln_norm - 0.5 * x * x;
        }
        self.ln_norm - 0.5 * (self.nu + 1.0) * (x * x / self.nu).ln_1p()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        let nu = self.nu;
        if nu > 1e5 {
            // Large-nu normal approximation with first-order correction,
            // error O(1/nu^2); the continued fraction below converges slowly there.
            let z = x * (1.0 - 0.25 / nu) / (1.0 + 0.5 * x * x / nu).sqrt();
            return normal_cdf(z);
        }
        let x2 = x * x;
        let tail = if x2 < nu {
            // 1 - I_{x^2/(nu+x^2)}(1/2, nu/2) is accurate near the centre.
            1.0 - beta_reg(0.5, 0.5 * nu, x2 / (nu + x2))
        } else {
            beta_reg(0.5 * nu, 0.5, nu / (nu + x2))
        };
        if x > 0.0 {
            1.0 - 0.5 * tail
        } else {
            0.5 * tail
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return invalid_input(format!("probability {p} outside (0, 1)"));
        }
        Ok(self.quantile_unchecked(p))
    }

    pub fn quantile_unchecked(&self, p: f64) -> f64 {
        if p == 0.5 {
            return 0.0;
        }
        if p > 0.5 {
            return -self.quantile_unchecked(1.0 - p);
        }
        let nu = self.nu;
        if nu == 1.0 {
            return (std::f64::consts::PI * (p - 0.5)).tan();
        }
        if nu == 2.0 {
            return (2.0 * p - 1.0) / (2.0 * p * (1.0 - p)).sqrt();
        }
        let z = normal_quantile_unchecked(p);
        let mut x0 = z + (z * z * z + z) / (4.0 * nu)
            + (5.0 * z.powi(5) + 16.0 * z.powi(3) + 3.0 * z) / (96.0 * nu * nu);
        if nu < 3.0 {
            // Tail approximation F(x) ~ c |x|^-nu for small nu.
            let c = (self.ln_norm + 0.5 * (nu + 1.0) * nu.ln() - nu.ln()).exp();
            let tail = -(c / p).powf(1.0 / nu);
            if tail < x0 {
                x0 = tail;
            }
        }
        invert_monotone(|x| self.cdf(x), |x| self.pdf(x), p, x0.min(0.0), 1e-14)
    }
}

/// Safeguarded Newton inversion of a continuous increasing CDF.
fn invert_monotone<C, D>(cdf: C, pdf: D, p: f64, x0: f64, rtol: f64) -> f64
where
    C: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = x0;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for _ in 0..200 {
        let f = cdf(x) - p;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = pdf(x);
        let mut next = x - f / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else if lo.is_finite() {
                x + x.abs().max(1.0)
            } else {
                x - x.abs().max(1.0)
            };
        }
        if (next - x).abs() <= rtol * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

pub fn student_t_quantile(p: f64, nu: f64) -> Result<f64> {
    StudentT::new(nu)?.quantile(p)
}

pub fn student_t_cdf(x: f64, nu: f64) -> Result<f64> {
    Ok(StudentT::new(nu)?.cdf(x))
}

// --------------------------------------------------------------- skew-t

/// Skewness `zeta > 0` and shape `nu > 2` of the standardized skew-t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewTParams {
    pub zeta: f64,
    pub nu: f64,
}

impl SkewTParams {
    pub fn new(zeta: f64, nu: f64) -> Result<Self> {
        let p = Self { zeta, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn symmetric(nu: f64) -> Result<Self> {
        Self::new(1.0, nu)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0) || !self.zeta.is_finite() {
            return invalid_param(format!("skew-t skewness must be positive, got {}", self.zeta));
        }
        if !(self.nu > 2.0) || self.nu.is_nan() {
            return invalid_param(format!("skew-t shape must exceed 2, got {}", self.nu));
        }
        Ok(())
    }
}

/// Fernandez-Steel skew-t shifted and scaled to zero mean and unit variance.
///
/// With `f0` the unit-variance Student-t density, the raw skewed variable has
/// density `g f0(z / zeta)` for `z >= 0` and `g f0(z zeta)` for `z < 0`, where
/// `g = 2 / (zeta + 1/zeta)`. Its moments are
///
/// * `m1 = E|Y| = 2 sqrt(nu - 2) / ((nu - 1) B(1/2, nu/2))` for `Y ~ f0`,
/// * mean `mu = m1 (zeta - 1/zeta)`,
/// * variance `sigma^2 = (1 - m1^2)(zeta^2 + zeta^-2) + 2 m1^2 - 1`,
///
/// and the standardized variable is `x = (z - mu) / sigma`.
#[derive(Debug, Clone, Copy)]
pub struct SkewT {
    params: SkewTParams,
    base: StudentT,
    /// sqrt(nu / (nu - 2)): maps unit-variance t values to raw t values.
    k: f64,
    mu: f64,
    sigma: f64,
    g: f64,
    ln_const: f64,
}

impl SkewT {
    pub fn new(params: SkewTParams) -> Result<Self> {
        params.validate()?;
        let SkewTParams { zeta, nu } = params;
        let base = StudentT::new(nu)?;
        let k = (nu / (nu - 2.0)).sqrt();
        let m1 = 2.0 * (nu - 2.0).sqrt() / ((nu - 1.0) * ln_beta(0.5, 0.5 * nu).exp());
        let mu = m1 * (zeta - 1.0 / zeta);
        let sigma = ((1.0 - m1 * m1) * (zeta * zeta + 1.0 / (zeta * zeta)) + 2.0 * m1 * m1 - 1.0).sqrt();
        let g = 2.0 / (zeta + 1.0 / zeta);
        let ln_const = g.ln() + sigma.ln() + k.ln();
        Ok(Self {
            params,
            base,
            k,
            mu,
            sigma,
            g,
            ln_const,
        })
    }

    pub fn params(&self) -> SkewTParams {
        self.params
    }

    fn raw(&self, x: f64) -> f64 {
        x * self.sigma + self.mu
    }

    /// Unit-variance Student-t CDF.
    fn f0(&self, y: f64) -> f64 {
        self.base.cdf(y * self.k)
    }

    fn f0_inv(&self, p: f64) -> f64 {
        self.base.quantile_unchecked(p) / self.k
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = self.raw(x);
        let y = if z >= 0.0 { z / self.params.zeta } else { z * self.params.zeta };
        self.ln_const + self.base.ln_pdf(y * self.k)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        let zeta = self.params.zeta;
        let z = self.raw(x);
        if z < 0.0 {
            self.g / zeta * self.f0(z * zeta)
        } else {
            1.0 - self.g * zeta * self.f0(-z / zeta)
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return invalid_input(format!("probability {p} outside (0, 1)"));
        }
        Ok(self.quantile_unchecked(p))
    }

    /// Quantile without the range check; `p` must lie in (0, 1).
    pub fn quantile_unchecked(&self, p: f64) -> f64 {
        let zeta = self.params.zeta;
        let split = 1.0 / (1.0 + zeta * zeta);
        let z = if p < split {
            self.f0_inv(p * zeta / self.g) / zeta
        } else {
            -zeta * self.f0_inv((1.0 - p) / (self.g * zeta))
        };
        (z - self.mu) / self.sigma
    }
}

pub fn skew_t_logpdf(x: f64, params: SkewTParams) -> Result<f64> {
    if !x.is_finite() {
        return invalid_input(format!("skew-t log-density at non-finite point {x}"));
    }
    Ok(SkewT::new(params)?.ln_pdf(x))
}

pub fn skew_t_cdf(x: f64, params: SkewTParams) -> Result<f64> {
    Ok(SkewT::new(params)?.cdf(x))
}

pub fn skew_t_quantile(p: f64, params: SkewTParams) -> Result<f64> {
    SkewT::new(params)?.quantile(p)
}

/// Smallest distance from 0 and 1 kept by [`pit`], so pseudo-observations
/// stay strictly inside the unit interval for copula likelihoods.
pub const PIT_CLAMP: f64 = 1e-12;

/// Keeps a probability inside `[PIT_CLAMP, 1 - PIT_CLAMP]`.
pub fn clamp_unit(p: f64) -> f64 {
    p.clamp(PIT_CLAMP, 1.0 - PIT_CLAMP)
}

/// Parametric probability integral transform of standardized residuals.
pub fn pit(z: &[f64], params: SkewTParams) -> Result<Vec<f64>> {
    let dist = SkewT::new(params)?;
    z.iter()
        .map(|&x| {
            if x.is_nan() {
                return invalid_input("PIT of NaN residual");
            }
            Ok(clamp_unit(dist.cdf(x)))
        })
        .collect()
}
