//! Small explicit Runge-Kutta drivers for fixed-size state vectors.
//!
//! A stage that fails with [`Error::EnvelopeCollapse`] aborts the
//! fixed-step driver and makes the adaptive driver retry with a smaller
//! step. Any other error propagates unchanged.

use crate::error::{Error, Result};

pub(crate) type Rhs<'a, const N: usize> = dyn FnMut(f64, &[f64; N]) -> Result<[f64; N]> + 'a;

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += c * k[i];
        }
    }
    out
}

/// One classical fourth-order Runge-Kutta step.
pub(crate) fn rk4_step<const N: usize>(
    rhs: &mut Rhs<'_, N>,
    s: f64,
    y: &[f64; N],
    h: f64,
) -> Result<[f64; N]> {
    let k1 = rhs(s, y)?;
    let k2 = rhs(s + 0.5 * h, &axpy(y, &[(0.5 * h, &k1)]))?;
    let k3 = rhs(s + 0.5 * h, &axpy(y, &[(0.5 * h, &k2)]))?;
    let k4 = rhs(s + h, &axpy(y, &[(h, &k3)]))?;
    Ok(axpy(
        y,
        &[(h / 6.0, &k1), (h / 3.0, &k2), (h / 3.0, &k3), (h / 6.0, &k4)],
    ))
}

/// Advance from `s0` to `s1` in `n` equal RK4 steps.
pub(crate) fn rk4_span<const N: usize>(
    rhs: &mut Rhs<'_, N>,
    s0: f64,
    y0: [f64; N],
    s1: f64,
    n: usize,
) -> Result<[f64; N]> {
    let h = (s1 - s0) / n as f64;
    let mut y = y0;
    for i in 0..n {
        let s = s0 + i as f64 * h;
        y = rk4_step(rhs, s, &y, h)?;
    }
    Ok(y)
}

// Dormand-Prince 5(4) tableau.
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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b_hat
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

/// Adaptive Dormand-Prince integration from `s0` to exactly `s1`.
///
/// `h` is the trial step on entry and the last proposed step on exit, so
/// consecutive calls over adjacent spans keep the controller warm.
pub(crate) fn dopri_span<const N: usize>(
    rhs: &mut Rhs<'_, N>,
    s0: f64,
    y0: [f64; N],
    s1: f64,
    h: &mut f64,
    tol: Tolerances,
) -> Result<[f64; N]> {
    let span = s1 - s0;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut s = s0;
    let mut y = y0;
    let mut step = h.abs().min(span.abs()).max(f64::MIN_POSITIVE) * dir;
    let mut collapsed = None;
    loop {
        let remaining = s1 - s;
        let last = (remaining - step) * dir <= 1e-12 * span.abs();
        if last {
            step = remaining;
        }
        if step.abs() <= 1e-14 * s.abs().max(1.0) {
            return Err(collapsed.take().unwrap_or(Error::StepUnderflow { s }));
        }
        match dopri_trial(rhs, s, &y, step, tol) {
            Ok((y_new, err)) if err <= 1.0 => {
                collapsed = None;
                s = if last { s1 } else { s + step };
                y = y_new;
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last {
                    *h = step.abs() * factor;
                }
                if last {
                    return Ok(y);
                }
                step *= factor;
            }
            Ok((_, err)) => {
                step *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
            Err(err @ Error::EnvelopeCollapse { .. }) => {
                collapsed = Some(err);
                step *= 0.25;
            }
            Err(other) => return Err(other),
        }
    }
}

fn dopri_trial<const N: usize>(
    rhs: &mut Rhs<'_, N>,
    s: f64,
    y: &[f64; N],
    h: f64,
    tol: Tolerances,
) -> Result<([f64; N], f64)> {
    let k1 = rhs(s, y)?;
    let k2 = rhs(s + C2 * h, &axpy(y, &[(h * A21, &k1)]))?;
    let k3 = rhs(s + C3 * h, &axpy(y, &[(h * A31, &k1), (h * A32, &k2)]))?;
    let k4 = rhs(
        s + C4 * h,
        &axpy(y, &[(h * A41, &k1), (h * A42, &k2), (h * A43, &k3)]),
    )?;
    let k5 = rhs(
        s + C5 * h,
        &axpy(
            y,
            &[(h * A51, &k1), (h * A52, &k2), (h * A53, &k3), (h * A54, &k4)],
        ),
    )?;
    let k6 = rhs(
        s + h,
        &axpy(
            y,
            &[
                (h * A61, &k1),
                (h * A62, &k2),
                (h * A63, &k3),
                (h * A64, &k4),
                (h * A65, &k5),
            ],
        ),
    )?;
    let y_new = axpy(
        y,
        &[
            (h * B1, &k1),
            (h * B3, &k3),
            (h * B4, &k4),
            (h * B5, &k5),
            (h * B6, &k6),
        ],
    );
    let k7 = rhs(s + h, &y_new)?;
    let mut sum = 0.0;
    for i in 0..N {
        let e = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let scale = tol.abs + tol.rel * y[i].abs().max(y_new[i].abs());
        sum += (e / scale).powi(2);
    }
    Ok((y_new, (sum / N as f64).sqrt()))
}
