//! Dormand-Prince 5(4) integration of `u'' = (V(x) - z) u` written as a
//! first-order system in `(u, u')`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::Piece;

pub(crate) type State = [Complex64; 2];

/// Renormalization window for `max(|u|, |u'|)`.
pub(crate) const OVERFLOW: f64 = 1e100;
pub(crate) const UNDERFLOW: f64 = 1e-100;

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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn rhs(piece: &Piece, z: Complex64, x: f64, y: &State) -> State {
    [y[1], (piece.eval(x) - z) * y[0]]
}

#[inline]
fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += k[0] * (h * c);
        out[1] += k[1] * (h * c);
    }
    out
}

/// One Dormand-Prince step; returns the fifth-order solution, the embedded
/// error estimate, and the derivative at the new point.
fn dp_step(piece: &Piece, z: Complex64, x: f64, y: &State, k1: &State, h: f64) -> (State, State, State) {
    let k2 = rhs(piece, z, x + C2 * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = rhs(piece, z, x + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = rhs(piece, z, x + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = rhs(piece, z, x + C5 * h, &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = rhs(piece, z, x + h, &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y5 = axpy(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = rhs(piece, z, x + h, &y5);
    let mut err = [Complex64::new(0.0, 0.0); 2];
    for i in 0..2 {
        err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
    }
    (y5, err, k7)
}

#[inline]
pub(crate) fn state_norm(y: &State) -> f64 {
    y[0].norm().max(y[1].norm())
}

/// Rescales `y` to unit size when it leaves the renormalization window.
#[inline]
pub(crate) fn renormalize(y: &mut State, log_scale: &mut f64) {
    let n = state_norm(y);
    if n > OVERFLOW || (n < UNDERFLOW && n > 0.0) {
        y[0] /= n;
        y[1] /= n;
        *log_scale += n.ln();
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
}

/// Point reached by the integrator, in the (mantissa, log-scale) representation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Node {
    pub x: f64,
    pub y: State,
    pub log_scale: f64,
}

/// Integrates from `x0` to `x1` (either direction) on a knot-free segment.
///
/// `h` carries the step-size guess between segments. Every accepted step is
/// reported through `sink`, the last one landing exactly on `x1`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate_adaptive(
    piece: &Piece,
    z: Complex64,
    x0: f64,
    x1: f64,
    y: &mut State,
    log_scale: &mut f64,
    h: &mut f64,
    ctl: &StepControl,
    mut sink: impl FnMut(Node),
) -> Result<()> {
    let dir = if x1 >= x0 { 1.0 } else { -1.0 };
    let mut x = x0;
    let mut k1 = rhs(piece, z, x, y);
    while (x1 - x) * dir > 0.0 {
        // cap by the local oscillation scale so consecutive samples stay within a fraction of a turn
        let local = (z - piece.eval(x)).norm() + 1.0;
        let mut cap = 0.5 / local.sqrt();
        if ctl.max_step > 0.0 {
            cap = cap.min(ctl.max_step);
        }
        let remaining = (x1 - x).abs();
        let mut step = h.min(cap).min(remaining);
        if remaining - step <= 1e-12 * remaining.max(x.abs()).max(1.0) {
            step = remaining;
        }
        let (y5, err, k7) = dp_step(piece, z, x, y, &k1, dir * step);
        let mut acc = 0.0;
        for i in 0..2 {
            let sc = ctl.atol + ctl.rtol * y[i].norm().max(y5[i].norm());
            acc += (err[i].norm() / sc).powi(2);
        }
        let e = (acc / 2.0).sqrt();
        if !e.is_finite() {
            return Err(Error::StepFailure { x, step });
        }
        if e <= 1.0 {
            x = if step == remaining { x1 } else { x + dir * step };
            *y = y5;
            k1 = k7;
            let before = *log_scale;
            renormalize(y, log_scale);
            if *log_scale != before {
                k1 = rhs(piece, z, x, y);
            }
            sink(Node { x, y: *y, log_scale: *log_scale });
            let grow = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            // a step truncated to land on x1 says nothing about the admissible size
            if step < *h && step == remaining {
                continue;
            }
            *h = step * grow;
        } else {
            *h = step * (0.9 * e.powf(-0.2)).clamp(0.2, 1.0);
            if *h < 1e-13 * x.abs().max(1.0) {
                return Err(Error::StepFailure { x, step: *h });
            }
        }
    }
    Ok(())
}

/// Integrates through the prescribed `nodes` (excluding `x0`, ending at `x1`)
/// with one fifth-order step per node, without error control.
pub(crate) fn integrate_on_mesh(
    piece: &Piece,
    z: Complex64,
    x0: f64,
    nodes: &[f64],
    y: &mut State,
    log_scale: &mut f64,
    mut sink: impl FnMut(Node),
) {
    let mut x = x0;
    for &xn in nodes {
        let k1 = rhs(piece, z, x, y);
        let (y5, _, _) = dp_step(piece, z, x, y, &k1, xn - x);
        *y = y5;
        x = xn;
        renormalize(y, log_scale);
        sink(Node { x, y: *y, log_scale: *log_scale });
    }
}
