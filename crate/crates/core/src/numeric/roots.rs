use crate::error::{Error, Result};

/// Brent's bracketed root finder (bisection safeguarding secant and inverse
/// quadratic steps). `f(lo)` and `f(hi)` must differ in sign; the returned
/// root lies in the final bracket of width `<= 2 * xtol`.
pub fn brent_root<F>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::NoBracket {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::InvalidInput(format!(
                "root objective is not finite at {b}"
            )));
        }
    }
    Ok(b)
}

/// Grows `[lo, hi]` geometrically away from `start` until `f` changes sign.
/// Used for unbounded quantile inversion.
pub fn expand_bracket<F>(mut f: F, start: f64, step: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let f0 = f(start);
    if f0 == 0.0 {
        return Ok((start, start));
    }
    let dir = if f0 > 0.0 { -1.0 } else { 1.0 };
    let mut width = step.abs().max(1e-8);
    let mut prev = start;
    for _ in 0..200 {
        let next = start + dir * width;
        let fn_ = f(next);
        if fn_.signum() != f0.signum() || fn_ == 0.0 {
            return Ok(if dir > 0.0 { (prev, next) } else { (next, prev) });
        }
        prev = next;
        width *= 2.0;
    }
    Err(Error::NoBracket {
        lo: start,
        hi: start + dir * width,
        f_lo: f0,
        f_hi: f0,
    })
}
