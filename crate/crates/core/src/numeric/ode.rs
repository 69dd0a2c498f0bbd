//! Dormand-Prince 5(4) embedded Runge-Kutta pair for autonomous planar systems.

use crate::error::{Error, Result};

pub type State = [f64; 2];

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

// fifth-order weights minus fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct StepperOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// Components with `active[i] == false` are frozen and excluded from
    /// error control.
    pub active: [bool; 2],
}

/// One accepted step `(t0, y0) -> (t1, y1)`.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub t0: f64,
    pub y0: State,
    pub t1: f64,
    pub y1: State,
}

impl Segment {
    pub fn h(&self) -> f64 {
        self.t1 - self.t0
    }
}

pub enum Control {
    Continue,
    Stop { t: f64, y: State },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint {
    pub t: f64,
    pub y: State,
    pub steps: usize,
    pub stopped: bool,
}

pub struct Dopri5<F> {
    rhs: F,
    opts: StepperOptions,
}

#[inline]
fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

impl<F> Dopri5<F>
where
    F: Fn(&State) -> State,
{
    pub fn new(rhs: F, opts: StepperOptions) -> Self {
        Self { rhs, opts }
    }

    fn masked(&self, mut k: State) -> State {
        for i in 0..2 {
            if !self.opts.active[i] {
                k[i] = 0.0;
            }
        }
        k
    }

    pub fn rhs(&self, y: &State) -> State {
        self.masked((self.rhs)(y))
    }

    /// A full step of size `h` from `y` with known slope `k1`; returns the
    /// fifth-order solution, the embedded error vector and the slope at the
    /// new point.
    pub fn trial(&self, y: &State, k1: &State, h: f64) -> (State, State, State) {
        let k2 = self.rhs(&axpy(y, &[(A21, k1)], h));
        let k3 = self.rhs(&axpy(y, &[(A31, k1), (A32, &k2)], h));
        let k4 = self.rhs(&axpy(y, &[(A41, k1), (A42, &k2), (A43, &k3)], h));
        let k5 = self.rhs(&axpy(y, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = self.rhs(&axpy(y, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
        let y5 = axpy(y, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], h);
        let k7 = self.rhs(&y5);
        let mut err = [0.0; 2];
        for i in 0..2 {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        (y5, err, k7)
    }

    /// Single fifth-order step without error control, used to localize
    /// events inside an accepted step.
    pub fn step_once(&self, y: &State, h: f64) -> State {
        let k1 = self.rhs(y);
        self.trial(y, &k1, h).0
    }

    fn error_norm(&self, y0: &State, y1: &State, err: &State) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            if !self.opts.active[i] {
                continue;
            }
            let sc = self.opts.atol + self.opts.rtol * y0[i].abs().max(y1[i].abs());
            let e = err[i].abs() / sc;
            if e.is_nan() {
                return f64::INFINITY;
            }
            worst = worst.max(e);
        }
        worst
    }

    /// Integrates from `(0, y0)` toward `t_end` (either sign). `observe` is
    /// called after every accepted step and may stop the integration early.
    pub fn run<O>(&self, y0: State, t_end: f64, mut observe: O) -> Result<Endpoint>
    where
        O: FnMut(&Self, &Segment) -> Result<Control>,
    {
        let dir = if t_end >= 0.0 { 1.0 } else { -1.0 };
        let mut t = 0.0;
        let mut y = y0;
        if t_end == 0.0 {
            return Ok(Endpoint { t, y, steps: 0, stopped: false });
        }
        let mut k1 = self.rhs(&y);
        let speed = k1[0].abs().max(k1[1].abs());
        let scale = self.opts.atol + self.opts.rtol * y[0].abs().max(y[1].abs());
        let mut h = if speed > 0.0 { 0.05 * scale.powf(0.2) / speed } else { t_end.abs() };
        h = h.min(self.opts.max_step).min(t_end.abs());
        if !(h > 0.0) {
            h = t_end.abs().min(self.opts.max_step);
        }
        let mut steps = 0;
        let mut rejected_last = false;
        loop {
            if steps >= self.opts.max_steps {
                return Err(Error::StepLimitExceeded { max_steps: self.opts.max_steps, t });
            }
            let remaining = (t_end - t).abs();
            let last = h >= remaining;
            let h_try = if last { remaining } else { h };
            let (y_new, err, k7) = self.trial(&y, &k1, dir * h_try);
            let en = self.error_norm(&y, &y_new, &err);
            if en <= 1.0 {
                steps += 1;
                let t_new = if last { t_end } else { t + dir * h_try };
                let seg = Segment { t0: t, y0: y, t1: t_new, y1: y_new };
                if let Control::Stop { t: ts, y: ys } = observe(self, &seg)? {
                    return Ok(Endpoint { t: ts, y: ys, steps, stopped: true });
                }
                t = t_new;
                y = y_new;
                k1 = k7;
                if last {
                    return Ok(Endpoint { t, y, steps, stopped: false });
                }
                let grow = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
                h = h_try * if rejected_last { grow.min(1.0) } else { grow };
                rejected_last = false;
            } else {
                let shrink = if en.is_finite() { (0.9 * en.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                h = h_try * shrink;
                rejected_last = true;
            }
            h = h.min(self.opts.max_step);
            if h <= 1e-15 * t.abs().max(1e-300) || h < f64::MIN_POSITIVE * 1e10 {
                return Err(Error::StepSizeUnderflow { t, h });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(tol: f64) -> StepperOptions {
        StepperOptions { rtol: tol, atol: tol, max_step: f64::INFINITY, max_steps: 100_000, active: [true, true] }
    }

    #[test]
    fn harmonic_oscillator_full_period() {
        let solver = Dopri5::new(|y: &State| [y[1], -y[0]], opts(1e-11));
        let end = solver.run([1.0, 0.0], 2.0 * std::f64::consts::PI, |_, _| Ok(Control::Continue)).unwrap();
        assert!((end.y[0] - 1.0).abs() < 1e-9);
        assert!(end.y[1].abs() < 1e-9);
    }

    #[test]
    fn backward_integration() {
        let solver = Dopri5::new(|y: &State| [y[0], 0.5 * y[1]], opts(1e-12));
        let end = solver.run([1.0, 1.0], -2.0, |_, _| Ok(Control::Continue)).unwrap();
        assert!((end.y[0] - (-2f64).exp()).abs() < 1e-11);
        assert!((end.y[1] - (-1f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn frozen_component_stays_put() {
        let mut o = opts(1e-10);
        o.active = [false, true];
        let solver = Dopri5::new(|y: &State| [1.0, -y[1]], o);
        let end = solver.run([3.0, 1.0], 1.0, |_, _| Ok(Control::Continue)).unwrap();
        assert_eq!(end.y[0], 3.0);
    }

    #[test]
    fn step_limit_is_reported() {
        let mut o = opts(1e-12);
        o.max_steps = 3;
        let solver = Dopri5::new(|y: &State| [y[1], -y[0]], o);
        let err = solver.run([1.0, 0.0], 100.0, |_, _| Ok(Control::Continue)).unwrap_err();
        assert!(matches!(err, Error::StepLimitExceeded { .. }));
    }
}
