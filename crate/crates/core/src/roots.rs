//! Bracketed scalar root finding (Brent's method).

use crate::error::{Error, Result};

/// Finds a root of `f` in `[lo, hi]` where `f(lo)` and `f(hi)` differ in sign.
///
/// Terminates once the bracket is narrower than `xtol` (plus a few ulps) or
/// `f` vanishes exactly. Errors from `f` are propagated.
pub fn brent<F>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    brent_with_values(&mut f, &mut a, &mut b, &mut fa, &mut fb, xtol)
}

/// Same as [`brent`] when the end-point values are already known.
pub fn brent_known<F>(mut f: F, lo: (f64, f64), hi: (f64, f64), xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut fa) = lo;
    let (mut b, mut fb) = hi;
    brent_with_values(&mut f, &mut a, &mut b, &mut fa, &mut fb, xtol)
}

fn brent_with_values<F>(
    f: &mut F,
    a: &mut f64,
    b: &mut f64,
    fa: &mut f64,
    fb: &mut f64,
    xtol: f64,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if *fa == 0.0 {
        return Ok(*a);
    }
    if *fb == 0.0 {
        return Ok(*b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NoBracket { lo: *a, hi: *b });
    }

    let (mut c, mut fc) = (*a, *fa);
    let mut d = *b - *a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = *a;
            fc = *fa;
            d = *b - *a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            *a = *b;
            *b = c;
            c = *a;
            *fa = *fb;
            *fb = fc;
            fc = *fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - *b);
        if m.abs() <= tol || *fb == 0.0 {
            return Ok(*b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            // Inverse quadratic interpolation, or secant when only two points differ.
            let s = *fb / *fa;
            let (mut p, mut q);
            if *a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = *fa / fc;
                let r = *fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (*b - *a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
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
        *a = *b;
        *fa = *fb;
        *b += if d.abs() > tol { d } else { tol.copysign(m) };
        *fb = f(*b)?;
    }
    Ok(*b)
}

/// Sign changes of sampled values: index pairs `(i, i + 1)`.
pub fn sign_changes(values: &[f64]) -> impl Iterator<Item = usize> + '_ {
    values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].is_finite() && w[1].is_finite() && (w[0] * w[1] < 0.0 || w[1] == 0.0))
        .map(|(i, _)| i)
}
