use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Convergence when the simplex objective spread falls below this.
    pub ftol: f64,
    /// ... and the simplex diameter below this.
    pub xtol: f64,
    /// Initial simplex edge per coordinate.
    pub initial_step: Vec<f64>,
    /// Number of restarts from the best vertex after convergence.
    pub restarts: usize,
}

impl NelderMeadOptions {
    pub fn new(dim: usize) -> Self {
        Self {
            max_evals: 400 * (dim + 1),
            ftol: 1e-9,
            xtol: 1e-7,
            initial_step: vec![0.1; dim],
            restarts: 1,
        }
    }

    pub fn with_step(mut self, step: Vec<f64>) -> Self {
        self.initial_step = step;
        self
    }

    pub fn with_max_evals(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

impl OptimResult {
    /// Converts a non-converged result into an error carrying the best iterate.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                evals: self.evals,
                best_value: self.value,
                best_point: self.x,
            })
        }
    }
}

/// Minimizes `f` with the Nelder-Mead simplex method. Non-finite objective
/// values are treated as `+inf`, so infeasible regions can be encoded by
/// returning `f64::INFINITY`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut evals = 0usize;
    if n == 0 {
        let v = eval(x0, &mut evals);
        return OptimResult {
            x: vec![],
            value: v,
            evals,
            converged: v.is_finite(),
        };
    }

    let mut best_x = x0.to_vec();
    let mut best_v = eval(x0, &mut evals);
    let mut converged = false;

    for round in 0..=opts.restarts {
        let step_scale = if round == 0 { 1.0 } else { 0.5 };
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut values: Vec<f64> = Vec::with_capacity(n + 1);
        simplex.push(best_x.clone());
        values.push(best_v);
        for i in 0..n {
            let mut x = best_x.clone();
            let h = opts.initial_step.get(i).copied().unwrap_or(0.1) * step_scale;
            x[i] += if h == 0.0 { 1e-4 } else { h };
            let v = eval(&x, &mut evals);
            simplex.push(x);
            values.push(v);
        }

        converged = false;
        while evals < opts.max_evals {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread = (values[n] - values[0]).abs();
            let diameter = simplex[1..]
                .iter()
                .map(|x| {
                    x.iter()
                        .zip(&simplex[0])
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if values[0].is_finite()
                && spread <= opts.ftol * (1.0 + values[0].abs())
                && diameter <= opts.xtol
            {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; n];
            for x in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let xr = along(-1.0);
            let vr = eval(&xr, &mut evals);
            if vr < values[0] {
                let xe = along(-2.0);
                let ve = eval(&xe, &mut evals);
                if ve < vr {
                    simplex[n] = xe;
                    values[n] = ve;
                } else {
                    simplex[n] = xr;
                    values[n] = vr;
                }
            } else if vr < values[n - 1] {
                simplex[n] = xr;
                values[n] = vr;
            } else {
                let (xc, vc) = if vr < values[n] {
                    let xc = along(-0.5);
                    let vc = eval(&xc, &mut evals);
                    (xc, vc)
                } else {
                    let xc = along(0.5);
                    let vc = eval(&xc, &mut evals);
                    (xc, vc)
                };
                if vc < values[n].min(vr) {
                    simplex[n] = xc;
                    values[n] = vc;
                } else {
                    for i in 1..=n {
                        let x: Vec<f64> = simplex[0]
                            .iter()
                            .zip(&simplex[i])
                            .map(|(b, x)| b + 0.5 * (x - b))
                            .collect();
                        values[i] = eval(&x, &mut evals);
                        simplex[i] = x;
                    }
                }
            }
        }

        let (imin, vmin) = values
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if vmin <= best_v {
            best_v = vmin;
            best_x = simplex[imin].clone();
        }
        if !converged {
            break;
        }
    }

    OptimResult {
        x: best_x,
        value: best_v,
        evals,
        converged: converged && best_v.is_finite(),
    }
}

/// Brent's minimizer on `[lo, hi]`: golden-section search accelerated by
/// parabolic interpolation steps. Returns `(argmin, min)`.
pub fn minimize_bounded_scalar<F>(mut f: F, lo: f64, hi: f64, xtol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = eval(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..500 {
        let m = 0.5 * (a + b);
        let tol = 1e-10 * x.abs() + xtol / 3.0;
        let t2 = 2.0 * tol;
        if (x - m).abs() <= t2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let etemp = e;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < t2 || b - u < t2 {
                    d = tol.copysign(m - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= m { a - x } else { b - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol { x + d } else { x + tol.copysign(d) };
        let fu = eval(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

#[derive(Debug, Clone)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when the largest gradient component falls below `gtol * (1 + |f|)`.
    pub gtol: f64,
    /// ... or when successive objective values differ by less than `ftol * (1 + |f|)`
    /// for three consecutive iterations.
    pub ftol: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iter: 500, gtol: 1e-6, ftol: 1e-12, fd_step: 1e-6 }
    }
}

fn fd_gradient<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], fx: f64, rel: f64, evals: &mut usize) -> Vec<f64> {
    let mut p = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let h = rel * x[i].abs().max(1.0);
        p[i] = x[i] + h;
        let fp = f(&p);
        p[i] = x[i] - h;
        let fm = f(&p);
        p[i] = x[i];
        *evals += 2;
        g[i] = if fp.is_finite() && fm.is_finite() {
            (fp - fm) / (2.0 * h)
        } else if fp.is_finite() {
            (fp - fx) / h
        } else if fm.is_finite() {
            (fx - fm) / h
        } else {
            0.0
        };
    }
    g
}

/// Quasi-Newton minimization with finite-difference gradients and a
/// backtracking Armijo line search. Non-finite objective values are
/// rejected by the line search, so infeasible regions may return `+inf`.
pub fn bfgs<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut evals = 1;
    if !fx.is_finite() {
        return OptimResult { x, value: f64::INFINITY, evals, converged: false };
    }
    let mut g = fd_gradient(&mut f, &x, fx, opts.fd_step, &mut evals);
    let mut h = vec![vec![0.0; n]; n];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut small_steps = 0;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax <= opts.gtol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        let mut d: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| h[i][j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            // Lost descent direction: reset to steepest descent.
            for (i, row) in h.iter_mut().enumerate() {
                row.iter_mut().for_each(|v| *v = 0.0);
                row[i] = 1.0;
            }
            d = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let fnew = f(&xn);
            evals += 1;
            if fnew.is_finite() && fnew <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fnew));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            converged = g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= 1e3 * opts.gtol * (1.0 + fx.abs());
            break;
        };
        let gn = fd_gradient(&mut f, &xn, fnew, opts.fd_step, &mut evals);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 * (s.iter().map(|v| v * v).sum::<f64>().sqrt() * y.iter().map(|v| v * v).sum::<f64>().sqrt()) {
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i][j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
        let df = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        if df <= opts.ftol * (1.0 + fx.abs()) {
            small_steps += 1;
            if small_steps >= 3 {
                converged = true;
                break;
            }
        } else {
            small_steps = 0;
        }
    }
    OptimResult { x, value: fx, evals, converged }
}

/// Central-difference Hessian of `f` at `x`, with per-coordinate steps
/// `h_i = rel * max(|x_i|, floor)`.
pub fn numerical_hessian<F>(mut f: F, x: &[f64], rel: f64, floor: f64) -> Vec<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|xi| rel * xi.abs().max(floor)).collect();
    let f0 = f(x);
    let mut hess = vec![vec![0.0; n]; n];
    let mut p = x.to_vec();
    for i in 0..n {
        p[i] = x[i] + h[i];
        let fp = f(&p);
        p[i] = x[i] - h[i];
        let fm = f(&p);
        p[i] = x[i];
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut s = 0.0;
            for (si, sj, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                p[i] = x[i] + si * h[i];
                p[j] = x[j] + sj * h[j];
                s += sign * f(&p);
            }
            p[i] = x[i];
            p[j] = x[j];
            let v = s / (4.0 * h[i] * h[j]);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess
}
