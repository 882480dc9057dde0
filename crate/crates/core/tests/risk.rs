use sysrisk::copula::{CopulaSpec, Family};
use sysrisk::distributions::{normal_cdf, normal_pdf, normal_quantile};
use sysrisk::risk::{covar_level, mcovar_level, vcovar_level, ProbLevels};

fn bisect(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bivariate normal copula at `(u, a)` by Simpson integration of the conditional CDF.
fn gaussian_copula(u: f64, a: f64, rho: f64) -> f64 {
    let upper = normal_quantile(u).unwrap();
    let qa = normal_quantile(a).unwrap();
    let lower = upper.min(0.0) - 12.0;
    let n = 20_000;
    let h = (upper - lower) / n as f64;
    let s = (1.0 - rho * rho).sqrt();
    let g = |x: f64| normal_pdf(x) * normal_cdf((qa - rho * x) / s);
    let mut total = g(lower) + g(upper);
    for k in 1..n {
        let x = lower + k as f64 * h;
        total += if k % 2 == 1 { 4.0 * g(x) } else { 2.0 * g(x) };
    }
    total * h / 3.0
}

#[test]
fn clayton_covar_matches_hand_solution() {
    for &(theta, a, b) in &[(0.5f64, 0.05f64, 0.05f64), (2.0, 0.01, 0.05), (5.0, 0.1, 0.2), (0.05, 0.05, 0.01)] {
        let levels = ProbLevels::new(a, b).unwrap();
        let c = CopulaSpec::clayton(theta, 2).unwrap();
        // (u^-θ + a^-θ - 1)^(-1/θ) = ab solved for u.
        let expected = ((a * b).powf(-theta) - a.powf(-theta) + 1.0).powf(-1.0 / theta);
        let u = covar_level(&c, levels).unwrap();
        assert!((u - expected).abs() < 1e-12 * expected.max(1e-3), "theta {theta}: {u} vs {expected}");
    }
}

#[test]
fn gumbel_covar_matches_bisection() {
    for &(theta, a, b) in &[(1.2f64, 0.05f64, 0.05f64), (3.0, 0.01, 0.1)] {
        let levels = ProbLevels::new(a, b).unwrap();
        let cdf = |u: f64| (-((-u.ln()).powf(theta) + (-a.ln()).powf(theta)).powf(1.0 / theta)).exp();
        let expected = bisect(|u| cdf(u) - a * b, 1e-15, 1.0);
        let u = covar_level(&CopulaSpec::gumbel(theta, 2).unwrap(), levels).unwrap();
        assert!((u - expected).abs() < 1e-11, "theta {theta}: {u} vs {expected}");
    }
}

#[test]
fn gaussian_covar_matches_integrated_cdf() {
    for &rho in &[0.2, 0.5, 0.8] {
        let levels = ProbLevels::default();
        let corr = sysrisk::copula::elliptical::bivariate(rho);
        let c = CopulaSpec::gaussian(corr).unwrap();
        let expected = bisect(|u| gaussian_copula(u, 0.05, rho) - 0.0025, 1e-8, 0.5);
        let u = covar_level(&c, levels).unwrap();
        assert!((u - expected).abs() < 1e-7, "rho {rho}: {u} vs {expected}");
    }
}

#[test]
fn clayton_mcovar_matches_hand_solution() {
    let (theta, a, b): (f64, f64, f64) = (1.0, 0.05, 0.05);
    let c = CopulaSpec::clayton(theta, 3).unwrap();
    // C_2(a, a) = (2a^-θ - 1)^(-1/θ); C_3(u, a, a) = β C_2(a, a).
    let c2 = (2.0 * a.powf(-theta) - 1.0).powf(-1.0 / theta);
    let expected = ((b * c2).powf(-theta) - 2.0 * a.powf(-theta) + 2.0).powf(-1.0 / theta);
    let u = mcovar_level(&c, ProbLevels::new(a, b).unwrap()).unwrap();
    assert!((u - expected).abs() < 1e-12, "{u} vs {expected}");
}

#[test]
fn clayton_vcovar_matches_direct_probability() {
    let (theta, a, b): (f64, f64, f64) = (1.0, 0.05, 0.05);
    let c3 = |u: [f64; 3]| (u.iter().map(|x| x.powf(-theta)).sum::<f64>() - 2.0).powf(-1.0 / theta);
    let c2 = |x: f64, y: f64| (x.powf(-theta) + y.powf(-theta) - 1.0).powf(-1.0 / theta);
    // P(U1 <= u, U2 <= a or U3 <= a) / P(U2 <= a or U3 <= a)
    let cond = 2.0 * a - c2(a, a);
    let joint = |u: f64| c2(u, a) + c2(u, a) - c3([u, a, a]);
    let expected = bisect(|u| joint(u) / cond - b, 1e-15, 1.0);
    let c = CopulaSpec::from_tau(Family::Clayton, 3, theta / (theta + 2.0), None).unwrap();
    let u = vcovar_level(&c, ProbLevels::new(a, b).unwrap()).unwrap();
    assert!((u - expected).abs() < 1e-10, "{u} vs {expected}");
}
