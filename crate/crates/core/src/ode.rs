//! Dormand–Prince 5(4) stepper with continuous (dense) output.
//!
//! The stepper performs single trial steps; step-size control and event handling are left to
//! the caller, which needs to interleave them with active-set bookkeeping.

use nalgebra::DVector;

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

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// An accepted or rejected trial step together with its interpolant.
#[derive(Debug, Clone)]
pub struct Step {
    pub t0: f64,
    pub h: f64,
    pub y1: DVector<f64>,
    /// Derivative at the end point (first-same-as-last).
    pub k7: DVector<f64>,
    /// Scaled error norm; the step is acceptable when this is at most 1.
    pub err: f64,
    r1: DVector<f64>,
    r2: DVector<f64>,
    r3: DVector<f64>,
    r4: DVector<f64>,
    r5: DVector<f64>,
}

impl Step {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Fourth-order continuous extension evaluated at `t` within the step.
    pub fn dense(&self, t: f64) -> DVector<f64> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut y = &self.r5 * th1;
        y += &self.r4;
        y *= th;
        y += &self.r3;
        y *= th1;
        y += &self.r2;
        y *= th;
        y += &self.r1;
        y
    }
}

/// One Dormand–Prince step of size `h` (which may be negative) from `(t0, y0)` with known `k1 = f(t0, y0)`.
///
/// Returns `None` when the right-hand side fails at any stage.
pub fn dopri_step<F>(
    f: &mut F,
    t0: f64,
    y0: &DVector<f64>,
    k1: &DVector<f64>,
    h: f64,
    rtol: f64,
    atol: f64,
) -> Option<Step>
where
    F: FnMut(f64, &DVector<f64>) -> Option<DVector<f64>>,
{
    let k2 = f(t0 + C2 * h, &(y0 + k1 * (h * A21)))?;
    let k3 = f(t0 + C3 * h, &(y0 + (k1 * A31 + &k2 * A32) * h))?;
    let k4 = f(t0 + C4 * h, &(y0 + (k1 * A41 + &k2 * A42 + &k3 * A43) * h))?;
    let k5 = f(
        t0 + C5 * h,
        &(y0 + (k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h),
    )?;
    let k6 = f(
        t0 + h,
        &(y0 + (k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h),
    )?;
    let y1 = y0 + (k1 * A71 + &k3 * A73 + &k4 * A74 + &k5 * A75 + &k6 * A76) * h;
    let k7 = f(t0 + h, &y1)?;

    let e = (k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
    let mut acc = 0.0;
    for i in 0..y0.len() {
        let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
        acc += (e[i] / sc).powi(2);
    }
    let err = if y0.is_empty() {
        0.0
    } else {
        (acc / y0.len() as f64).sqrt()
    };
    if !err.is_finite() || y1.iter().any(|v| !v.is_finite()) {
        return None;
    }

    let ydiff = &y1 - y0;
    let bspl = k1 * h - &ydiff;
    let r4 = &ydiff - &k7 * h - &bspl;
    let r5 = (k1 * D1 + &k3 * D3 + &k4 * D4 + &k5 * D5 + &k6 * D6 + &k7 * D7) * h;
    Some(Step {
        t0,
        h,
        r1: y0.clone(),
        r2: ydiff,
        r3: bspl,
        r4,
        r5,
        y1,
        k7,
        err,
    })
}

/// Standard step-size update factor from a scaled error norm.
pub fn step_factor(err: f64) -> f64 {
    if err == 0.0 {
        return 5.0;
    }
    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
}
