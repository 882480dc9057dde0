use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Gamma, StandardNormal};

use super::elliptical::cholesky;
use super::{AnyCopula, CopulaSpec, Generator, HacSpec};
use crate::distributions::{normal_cdf, StudentT};
use crate::error::{invalid_input, Result};

/// Draw `n` iid rows from the copula; reproducible for a fixed seed.
pub fn sample(spec: &AnyCopula, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(spec, n, &mut rng)
}

pub fn sample_with<R: Rng + ?Sized>(spec: &AnyCopula, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return invalid_input("sample size must be at least 1");
    }
    match spec {
        AnyCopula::Static(s) => {
            s.validate()?;
            sample_static(s, n, rng)
        }
        AnyCopula::Hac(h) => {
            h.validate()?;
            Ok((0..n).map(|_| sample_hac_row(h, rng)).collect())
        }
    }
}

fn sample_static<R: Rng + ?Sized>(spec: &CopulaSpec, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    use super::Copula;
    let d = spec.dim();
    let rows = match spec {
        CopulaSpec::Independence { .. } => (0..n).map(|_| (0..d).map(|_| open_uniform(rng)).collect()).collect(),
        CopulaSpec::Comonotone { .. } => (0..n).map(|_| vec![open_uniform(rng); d]).collect(),
        CopulaSpec::Gaussian { corr } | CopulaSpec::StudentT { corr, .. } => {
            let nu = match spec {
                CopulaSpec::StudentT { nu, .. } => Some(*nu),
                _ => None,
            };
            let l = cholesky(corr)?.l();
            let t = nu.map(|nu| StudentT::new(nu).expect("validated nu"));
            let chi = nu.map(|nu| ChiSquared::new(nu).expect("validated nu"));
            (0..n)
                .map(|_| {
                    let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                    let scale = chi.as_ref().map_or(1.0, |c| (nu.unwrap() / c.sample(rng)).sqrt());
                    (0..d)
                        .map(|i| {
                            let x: f64 = (0..=i).map(|j| l[(i, j)] * z[j]).sum::<f64>() * scale;
                            match &t {
                                None => normal_cdf(x),
                                Some(t) => t.cdf(x),
                            }
                        })
                        .collect()
                })
                .collect()
        }
        CopulaSpec::Clayton { .. } | CopulaSpec::Gumbel { .. } => {
            let g = spec.generator().expect("archimedean");
            (0..n)
                .map(|_| {
                    let v = frailty(g, rng);
                    (0..d).map(|_| laplace_psi(g, rng.sample::<f64, _>(Exp1) / v)).collect()
                })
                .collect()
        }
    };
    Ok(rows)
}

fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Generator normalized as a Laplace transform: Clayton `(1 + s)^(-1/θ)`, Gumbel `exp(-s^(1/θ))`.
fn laplace_psi(g: Generator, s: f64) -> f64 {
    match g {
        Generator::Clayton(th) => (-(s.ln_1p()) / th).exp(),
        Generator::Gumbel(th) => (-s.powf(1.0 / th)).exp(),
    }
}

/// Mixing variable whose Laplace transform is [`laplace_psi`].
fn frailty<R: Rng + ?Sized>(g: Generator, rng: &mut R) -> f64 {
    match g {
        Generator::Clayton(th) => Gamma::new(1.0 / th, 1.0).expect("positive shape").sample(rng),
        Generator::Gumbel(th) => positive_stable(1.0 / th, rng),
    }
}

/// Positive stable variate with Laplace transform `exp(-t^alpha)`, 0 < alpha ≤ 1.
fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    let u = PI * open_uniform(rng);
    let w: f64 = rng.sample(Exp1);
    (alpha * u).sin() / u.sin().powf(1.0 / alpha) * ((1.0 - alpha) * u).sin().powf((1.0 - alpha) / alpha)
        / w.powf((1.0 - alpha) / alpha)
}

/// Variate with Laplace transform `exp(-c((1 + t)^alpha - 1))`, sampled as a sum of
/// `ceil(c)` exponentially tilted stable pieces, each by rejection.
fn tilted_stable<R: Rng + ?Sized>(alpha: f64, c: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return c;
    }
    let m = c.ceil().max(1.0) as usize;
    let scale = (c / m as f64).powf(1.0 / alpha);
    let mut total = 0.0;
    for _ in 0..m {
        loop {
            let s = scale * positive_stable(alpha, rng);
            if open_uniform(rng) <= (-s).exp() {
                total += s;
                break;
            }
        }
    }
    total
}

fn sample_hac_row<R: Rng + ?Sized>(h: &HacSpec, rng: &mut R) -> Vec<f64> {
    let v0 = frailty(h.outer, rng);
    let alpha = h.outer.theta() / h.inner.theta();
    let v01 = match h.outer {
        Generator::Gumbel(_) => v0.powf(1.0 / alpha) * positive_stable(alpha, rng),
        Generator::Clayton(_) => tilted_stable(alpha, v0, rng),
    };
    let mut row = Vec::with_capacity(h.dim);
    row.push(laplace_psi(h.outer, rng.sample::<f64, _>(Exp1) / v0));
    for _ in 1..h.dim {
        row.push(laplace_psi(h.inner, rng.sample::<f64, _>(Exp1) / v01));
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::elliptical::equicorrelated;
    use crate::stats::{kendall_tau, ks_uniform};

    fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
        rows.iter().map(|r| r[j]).collect()
    }

    #[test]
    fn deterministic_for_seed() {
        let spec = AnyCopula::Static(CopulaSpec::gumbel(1.7, 3).unwrap());
        assert_eq!(sample(&spec, 100, 9).unwrap(), sample(&spec, 100, 9).unwrap());
    }

    #[test]
    fn kendall_tau_matches_parameter() {
        let cases = [
            (CopulaSpec::clayton(2.0, 2).unwrap(), 0.5),
            (CopulaSpec::gumbel(2.0, 2).unwrap(), 0.5),
            (CopulaSpec::gaussian(equicorrelated(2, 0.5f64.sqrt())).unwrap(), 0.5),
            (CopulaSpec::student_t(equicorrelated(2, 0.5), 4.0).unwrap(), 1.0 / 3.0),
        ];
        for (spec, tau) in cases {
            let rows = sample(&AnyCopula::Static(spec.clone()), 20_000, 3).unwrap();
            let t = kendall_tau(&column(&rows, 0), &column(&rows, 1)).unwrap();
            assert!((t - tau).abs() < 0.015, "{spec:?}: {t}");
        }
    }

    #[test]
    fn margins_uniform() {
        let specs = [
            AnyCopula::Static(CopulaSpec::clayton(3.0, 3).unwrap()),
            AnyCopula::Static(CopulaSpec::student_t(equicorrelated(3, 0.6), 3.0).unwrap()),
            AnyCopula::Hac(HacSpec::new(Generator::Clayton(0.5), Generator::Clayton(4.0), 3).unwrap()),
            AnyCopula::Hac(HacSpec::new(Generator::Gumbel(1.5), Generator::Gumbel(3.0), 3).unwrap()),
        ];
        for spec in &specs {
            let rows = sample(spec, 10_000, 11).unwrap();
            for j in 0..3 {
                let (_, p) = ks_uniform(&column(&rows, j));
                assert!(p > 0.001, "{spec:?} margin {j}: p={p}");
            }
        }
    }

    #[test]
    fn hac_pairwise_taus() {
        for (outer, inner) in [
            (Generator::Clayton(0.5), Generator::Clayton(4.0)),
            (Generator::Gumbel(1.25), Generator::Gumbel(3.0)),
        ] {
            let h = HacSpec::new(outer, inner, 3).unwrap();
            let rows = sample(&AnyCopula::Hac(h), 20_000, 5).unwrap();
            let t01 = kendall_tau(&column(&rows, 0), &column(&rows, 1)).unwrap();
            let t02 = kendall_tau(&column(&rows, 0), &column(&rows, 2)).unwrap();
            let t12 = kendall_tau(&column(&rows, 1), &column(&rows, 2)).unwrap();
            assert!((t01 - outer.tau()).abs() < 0.015, "{outer:?} {t01}");
            assert!((t02 - outer.tau()).abs() < 0.015, "{outer:?} {t02}");
            assert!((t12 - inner.tau()).abs() < 0.015, "{inner:?} {t12}");
        }
    }

    #[test]
    fn comonotone_rows_are_constant() {
        let rows = sample(&AnyCopula::Static(CopulaSpec::comonotone(3).unwrap()), 10, 1).unwrap();
        assert!(rows.iter().all(|r| r[0] == r[1] && r[1] == r[2]));
    }
}
