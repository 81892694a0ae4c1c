//! Adaptive Dormand-Prince 5(4) integrator with FSAL and optional
//! sampling on a uniform grid.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MAX_STEPS: usize = 5_000_000;

#[derive(Debug, Clone, Copy)]
pub(crate) struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// When set, steps are clipped so that every multiple of this spacing
    /// (measured from the start point) is hit exactly and reported.
    pub sample_step: Option<f64>,
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates `y' = f(x, y)` from `x0` to `x1` (either direction).
///
/// `observe` is called with the start point, every sampled grid point when
/// `sample_step` is set, and otherwise every accepted step. Returning an
/// error from it aborts the integration.
pub(crate) fn integrate<const N: usize, F, O>(
    f: F,
    x0: f64,
    x1: f64,
    y0: [f64; N],
    ctl: &StepControl,
    mut observe: O,
) -> Result<[f64; N]>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N]) -> Result<()>,
{
    observe(x0, &y0)?;
    let span = x1 - x0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut max_step = ctl.max_step;
    if let Some(s) = ctl.sample_step {
        max_step = max_step.min(s);
    }
    let mut h = (span.abs().min(max_step).min(1e-2)) * dir;

    let mut x = x0;
    let mut y = y0;
    let mut k1 = f(x, &y);
    let mut next_sample = 1usize;
    let mut steps = 0usize;

    loop {
        // Distance to the next mandatory stop: a sample point or the end.
        let mut stop = x1;
        if let Some(s) = ctl.sample_step {
            let xs = x0 + dir * s * next_sample as f64;
            if (xs - x1) * dir < 0.0 {
                stop = xs;
            }
        }
        let remaining = stop - x;
        let hit = h.abs() >= remaining.abs();
        let step = if hit { remaining } else { h };

        if step.abs() < 16.0 * f64::EPSILON * x.abs().max(1.0) && !hit {
            return Err(Error::StepUnderflow { x });
        }
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::StepUnderflow { x });
        }

        let k2 = f(x + C2 * step, &axpy(&y, step, &[(A21, &k1)]));
        let k3 = f(x + C3 * step, &axpy(&y, step, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(
            x + C4 * step,
            &axpy(&y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = f(
            x + C5 * step,
            &axpy(&y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            x + step,
            &axpy(
                &y,
                step,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = axpy(
            &y,
            step,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let x_new = if hit { stop } else { x + step };
        let k7 = f(x_new, &y_new);

        let mut err: f64 = 0.0;
        for i in 0..N {
            let e = step
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = ctl.abs_tol + ctl.rel_tol * y[i].abs().max(y_new[i].abs());
            err = err.max(e.abs() / scale);
        }
        if !err.is_finite() {
            h = step * 0.2;
            if h.abs() < 16.0 * f64::EPSILON * x.abs().max(1.0) {
                return Err(Error::StepUnderflow { x });
            }
            continue;
        }

        if err <= 1.0 {
            x = x_new;
            y = y_new;
            k1 = k7;
            let at_end = hit && stop == x1;
            if hit && stop != x1 {
                next_sample += 1;
                observe(x, &y)?;
            } else if ctl.sample_step.is_none() || at_end {
                observe(x, &y)?;
            }
            if at_end {
                return Ok(y);
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // A clipped step says nothing about the natural step length.
            let base = if hit { h.abs().max(step.abs()) } else { step.abs() };
            h = dir * (base * factor).min(max_step);
        } else {
            let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h = step * factor;
        }
    }
}
