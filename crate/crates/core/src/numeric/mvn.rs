//! Orthant probabilities `P(X <= b)` for correlated normal and Student-t
//! vectors.
//!
//! Bivariate normal values use Genz's Gauss-Legendre scheme (double
//! precision accuracy); bivariate t values integrate the normal result over
//! the chi-square mixing variable; trivariate values integrate the first
//! coordinate against the conditional bivariate CDF; four or more dimensions
//! use Genz's sequential conditioning transform integrated with a randomly shifted
//! Richtmyer lattice. Shifts are drawn from a fixed seed so repeated calls
//! with the same arguments are bit-identical.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::quad::{cached_rule, integrate};
use super::special::{gamma_p, ln_gamma};
use crate::distributions::{normal_cdf, normal_quantile_approx};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// `P(X > h, Y > k)` for a standard bivariate normal with correlation `r`.
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::NEG_INFINITY {
        return normal_cdf(-k);
    }
    if k == f64::NEG_INFINITY {
        return normal_cdf(-h);
    }
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if r >= 1.0 {
        return normal_cdf(-h.max(k));
    }
    if r <= -1.0 {
        return (normal_cdf(-h) - normal_cdf(k)).max(0.0);
    }
    let (x, w) = if r.abs() < 0.3 {
        cached_rule(6)
    } else if r.abs() < 0.75 {
        cached_rule(12)
    } else {
        cached_rule(20)
    };
    let half = x.len() / 2;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = r.asin();
        for i in 0..half {
            for sign in [-1.0, 1.0] {
                let sn = (asr * (1.0 + sign * x[i]) / 2.0).sin();
                bvn += w[i] * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn * asr / (2.0 * TWO_PI) + normal_cdf(-h) * normal_cdf(-k)
    } else {
        let mut k = k;
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a * (-(bs / a_s + hk) / 2.0).exp()
            * (1.0 - c * (bs - a_s) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        if hk > -160.0 {
            let b = bs.sqrt();
            bvn -= (-hk / 2.0).exp() * TWO_PI.sqrt() * normal_cdf(-b / a) * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for i in 0..half {
            for sign in [-1.0, 1.0] {
                let xs = (a * (sign * x[i] + 1.0)).powi(2);
                let rs = (1.0 - xs).sqrt();
                bvn += a * w[i]
                    * ((-bs / (2.0 * xs) - hk / (1.0 + rs)).exp() / rs
                        - (-(bs / xs + hk) / 2.0).exp() * (1.0 + c * xs * (1.0 + d * xs)));
            }
        }
        bvn = -bvn / TWO_PI;
        if r > 0.0 {
            bvn + normal_cdf(-h.max(k))
        } else {
            let mut v = -bvn;
            if k > h {
                v += if h < 0.0 {
                    normal_cdf(k) - normal_cdf(h)
                } else {
                    normal_cdf(-h) - normal_cdf(-k)
                };
            }
            v
        }
    }
}

/// Lower-orthant bivariate normal CDF `P(X <= h, Y <= k)`.
pub fn bvn_cdf(h: f64, k: f64, r: f64) -> f64 {
    bvn_upper(-h, -k, r).clamp(0.0, 1.0)
}

fn ln_chi2_range(nu: f64) -> (f64, f64) {
    let lo = (nu.ln() - 15.0 * (2.0 / nu).sqrt()).min(-78.0 / nu);
    let hi = (nu + 20.0 * (2.0 * nu).sqrt() + 80.0).ln();
    (lo, hi)
}

/// Lower-orthant bivariate Student-t CDF with `nu` degrees of freedom:
/// `E_W[Phi_2(h sqrt(W/nu), k sqrt(W/nu); r)]`, `W ~ chi^2_nu`, integrated
/// over `ln W`.
pub fn bvt_cdf(h: f64, k: f64, r: f64, nu: f64) -> f64 {
    bvt_cdf_tol(h, k, r, nu, 1e-14)
}

fn bvt_cdf_tol(h: f64, k: f64, r: f64, nu: f64, abs_tol: f64) -> f64 {
    if nu.is_infinite() {
        return bvn_cdf(h, k, r);
    }
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    let half = 0.5 * nu;
    let norm = -half * 2f64.ln() - ln_gamma(half);
    let (lo, hi) = ln_chi2_range(nu);
    let integrand = |x: f64| {
        let w = x.exp();
        let dens = (norm + half * x - 0.5 * w).exp();
        if dens == 0.0 {
            return 0.0;
        }
        let s = (w / nu).sqrt();
        dens * bvn_cdf(h * s, k * s, r)
    };
    let (v, _) = integrate(integrand, lo, hi, abs_tol, 1e-13);
    v.clamp(0.0, 1.0)
}

/// Trivariate normal CDF `P(X <= b)` with correlations `r = [r12, r13, r23]`, by integrating
/// the first coordinate against the conditional bivariate normal CDF of the other two.
pub fn tvn_cdf(b: [f64; 3], r: [f64; 3]) -> f64 {
    if b.iter().any(|&x| x == f64::NEG_INFINITY) {
        return 0.0;
    }
    let [r12, r13, r23] = r;
    let (s2, s3) = ((1.0 - r12 * r12).sqrt(), (1.0 - r13 * r13).sqrt());
    if s2 == 0.0 || s3 == 0.0 {
        return f64::NAN;
    }
    let rho = ((r23 - r12 * r13) / (s2 * s3)).clamp(-1.0, 1.0);
    let integrand = |x: f64| {
        let dens = (-0.5 * x * x).exp() / TWO_PI.sqrt();
        if dens == 0.0 {
            return 0.0;
        }
        dens * bvn_cdf((b[1] - r12 * x) / s2, (b[2] - r13 * x) / s3, rho)
    };
    let lo = b[0].min(0.0) - 9.0;
    let (v, _) = integrate(integrand, lo, b[0], 1e-16, 1e-12);
    v.clamp(0.0, 1.0)
}

/// Trivariate Student-t CDF: the first coordinate is integrated against the conditional
/// bivariate t (with `nu + 1` degrees of freedom) of the other two. The half-line
/// `(-inf, b1]` is mapped to `[0, 1)` by `x = b1 - s / (1 - s)`.
pub fn tvt_cdf(b: [f64; 3], r: [f64; 3], nu: f64) -> f64 {
    if nu.is_infinite() {
        return tvn_cdf(b, r);
    }
    if b.iter().any(|&x| x == f64::NEG_INFINITY) {
        return 0.0;
    }
    let [r12, r13, r23] = r;
    let (s2, s3) = ((1.0 - r12 * r12).sqrt(), (1.0 - r13 * r13).sqrt());
    if s2 == 0.0 || s3 == 0.0 {
        return f64::NAN;
    }
    let rho = ((r23 - r12 * r13) / (s2 * s3)).clamp(-1.0, 1.0);
    let t = crate::distributions::StudentT::new(nu).expect("positive nu");
    let integrand = |s: f64| {
        let x = b[0] - s / (1.0 - s);
        let dens = t.pdf(x) / ((1.0 - s) * (1.0 - s));
        if dens == 0.0 || !dens.is_finite() {
            return 0.0;
        }
        let c = ((nu + x * x) / (nu + 1.0)).sqrt();
        dens * bvt_cdf_tol((b[1] - r12 * x) / (s2 * c), (b[2] - r13 * x) / (s3 * c), rho, nu + 1.0, 1e-13)
    };
    let (v, _) = integrate(integrand, 0.0, 1.0, 1e-13, 1e-10);
    v.clamp(0.0, 1.0)
}

/// Chi-square quantile by Newton iteration on the regularized lower
/// incomplete gamma function, started from Wilson-Hilferty.
pub(crate) fn chi2_quantile(p: f64, nu: f64) -> f64 {
    let a = 0.5 * nu;
    let z = normal_quantile_approx(p);
    let c = 2.0 / (9.0 * nu);
    let mut x = (nu * (1.0 - c + z * c.sqrt()).powi(3)).max(1e-3 * nu.min(1.0));
    if x.is_nan() || x <= 0.0 {
        x = 1e-3;
    }
    let ln_norm = ln_gamma(a) + a * 2f64.ln();
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    for _ in 0..60 {
        let f = gamma_p(a, 0.5 * x) - p;
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = ((a - 1.0) * x.ln() - 0.5 * x - ln_norm).exp();
        let mut next = x - f / dens;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x };
        }
        if (next - x).abs() <= 1e-12 * x {
            return next;
        }
        x = next;
    }
    x
}

const PRIMES: [f64; 12] = [2., 3., 5., 7., 11., 13., 17., 19., 23., 29., 31., 37.];
const SHIFTS: usize = 8;
const MIN_POINTS: usize = 1 << 10;
const MAX_POINTS: usize = 1 << 16;

fn shifts(dim: usize) -> &'static Vec<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static Vec<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard.entry(dim).or_insert_with(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0000 + dim as u64);
        let v: Vec<Vec<f64>> = (0..SHIFTS)
            .map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect())
            .collect();
        Box::leak(Box::new(v))
    })
}

#[inline]
fn lattice_coord(j: usize, i: usize, shift: f64) -> f64 {
    let z = PRIMES[i].sqrt().fract();
    let v = (j as f64 * z + shift).fract();
    // baker's (tent) transform
    (1.0 - (2.0 * v - 1.0).abs()).clamp(1e-15, 1.0 - 1e-15)
}

struct ChiScales {
    values: Vec<Vec<f64>>,
}

fn chi_scale_cache() -> &'static Mutex<HashMap<u64, ChiScales>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, ChiScales>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `sqrt(W / nu)` at the chi coordinate of lattice points `[0, n)` for each
/// shift; memoized per `nu` because solvers evaluate many orthants with the
/// same shape parameter.
fn chi_scales(nu: f64, dim: usize, n: usize) -> Vec<Vec<f64>> {
    let key = nu.to_bits() ^ ((dim as u64) << 56);
    let mut cache = chi_scale_cache().lock().unwrap();
    if cache.len() > 64 && !cache.contains_key(&key) {
        cache.clear();
    }
    let entry = cache.entry(key).or_insert_with(|| ChiScales {
        values: vec![Vec::new(); SHIFTS],
    });
    let sh = shifts(dim);
    for (s, vals) in entry.values.iter_mut().enumerate() {
        let start = vals.len();
        for j in start..n {
            let w = lattice_coord(j, dim - 1, sh[s][dim - 1]);
            vals.push((chi2_quantile(w, nu) / nu).sqrt());
        }
    }
    entry.values.iter().map(|v| v[..n].to_vec()).collect()
}

/// `P(X <= b)` for `X ~ N(0, R)` (or multivariate t with `nu` degrees of
/// freedom when given), with `chol` the lower Cholesky factor of `R` in
/// row-major nested form. Returns `(estimate, standard error)`; lattice size
/// doubles until three standard errors fall below `abs_tol`.
pub fn mv_orthant(b: &[f64], chol: &[Vec<f64>], nu: Option<f64>, abs_tol: f64) -> (f64, f64) {
    let d = b.len();
    if b.iter().any(|&x| x == f64::NEG_INFINITY) {
        return (0.0, 0.0);
    }
    match (d, nu) {
        (1, None) => return (normal_cdf(b[0] / chol[0][0]), 0.0),
        (1, Some(nu)) => {
            let t = crate::distributions::StudentT::new(nu).expect("positive nu");
            return (t.cdf(b[0] / chol[0][0]), 0.0);
        }
        (2, _) => {
            let r = chol[1][0] / (chol[1][0].powi(2) + chol[1][1].powi(2)).sqrt();
            let s0 = chol[0][0];
            let s1 = (chol[1][0].powi(2) + chol[1][1].powi(2)).sqrt();
            let v = match nu {
                None => bvn_cdf(b[0] / s0, b[1] / s1, r),
                Some(nu) => bvt_cdf(b[0] / s0, b[1] / s1, r, nu),
            };
            return (v, 0.0);
        }
        (3, _) => {
            let row = |i: usize, j: usize| (0..3).map(|k| chol[i][k] * chol[j][k]).sum::<f64>();
            let s: Vec<f64> = (0..3).map(|i| row(i, i).sqrt()).collect();
            let bs = [b[0] / s[0], b[1] / s[1], b[2] / s[2]];
            let r = [row(0, 1) / (s[0] * s[1]), row(0, 2) / (s[0] * s[2]), row(1, 2) / (s[1] * s[2])];
            let v = match nu {
                None => tvn_cdf(bs, r),
                Some(nu) => tvt_cdf(bs, r, nu),
            };
            return (v, 0.0);
        }
        _ => {}
    }
    lattice_orthant(b, chol, nu, abs_tol)
}

fn lattice_orthant(b: &[f64], chol: &[Vec<f64>], nu: Option<f64>, abs_tol: f64) -> (f64, f64) {
    let d = b.len();
    let dim = if nu.is_some() { d } else { d - 1 };
    let sh = shifts(dim);
    let mut sums = [0.0f64; SHIFTS];
    let mut n_done = 0usize;
    let mut n_target = MIN_POINTS;
    let mut y = vec![0.0; d];
    loop {
        let scales = nu.map(|nu| chi_scales(nu, dim, n_target));
        for (s, sum) in sums.iter_mut().enumerate() {
            for j in n_done..n_target {
                let r = scales.as_ref().map_or(1.0, |sc| sc[s][j]);
                let mut e = normal_cdf(b[0] * r / chol[0][0]);
                let mut f = e;
                for i in 1..d {
                    if f == 0.0 {
                        break;
                    }
                    let w = lattice_coord(j, i - 1, sh[s][i - 1]);
                    y[i - 1] = normal_quantile_approx((w * e).clamp(1e-300, 1.0 - 1e-16));
                    let mut acc = 0.0;
                    for (k, yk) in y.iter().enumerate().take(i) {
                        acc += chol[i][k] * yk;
                    }
                    e = normal_cdf((b[i] * r - acc) / chol[i][i]);
                    f *= e;
                }
                *sum += f;
            }
        }
        n_done = n_target;
        let means: Vec<f64> = sums.iter().map(|s| s / n_done as f64).collect();
        let mean = means.iter().sum::<f64>() / SHIFTS as f64;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / ((SHIFTS - 1) * SHIFTS) as f64;
        let se = var.sqrt();
        if 3.0 * se <= abs_tol || n_done >= MAX_POINTS {
            return (mean.clamp(0.0, 1.0), se);
        }
        n_target *= 2;
    }
}
