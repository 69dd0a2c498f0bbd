//! The neutral saddle flow
//! `x' = x (a0 x^k + a2 y^k + px(x, y))`, `y' = -y (b0 x^k + b2 y^k + py(x, y))`
//! on the closed first quadrant.
//!
//! Orbits are integrated in logarithmic coordinates `(ln x, ln y)`, where the
//! multipliers become the right-hand side directly. Points on an axis keep
//! that coordinate frozen at zero, which preserves axis invariance exactly.

mod first_integral;
pub mod reduction;

pub use first_integral::{first_integral, FirstIntegral};
pub use reduction::{compute_g, exit_time_quadrature, omega_of_xi, ExitPoint, ExitTimeSolver, MIntegral};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::ode::{Control, Dopri5, Segment, State, StepperOptions};
use crate::numeric::roots::{brent, RootTol};
use crate::params::SaddleParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
}

impl PhaseState {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self { x: 0.0, y: 0.0 }
    }

    fn check(&self) -> Result<()> {
        if !(self.x >= 0.0 && self.y >= 0.0 && self.x.is_finite() && self.y.is_finite()) {
            return Err(Error::InvalidDomain(format!("({}, {}) is not in the closed first quadrant", self.x, self.y)));
        }
        Ok(())
    }
}

/// `coeff * x^i * y^j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub i: u32,
    pub j: u32,
    pub coeff: f64,
}

impl Monomial {
    #[inline]
    fn eval(&self, x: f64, y: f64) -> f64 {
        self.coeff * x.powi(self.i as i32) * y.powi(self.j as i32)
    }
}

/// Homogeneous corrections of degree `k + 1` added to the two multipliers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    #[serde(default)]
    pub px: Vec<Monomial>,
    #[serde(default)]
    pub py: Vec<Monomial>,
}

impl Perturbation {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(px: Vec<Monomial>, py: Vec<Monomial>, kappa: u32) -> Result<Self> {
        let pert = Self { px, py };
        pert.validate(kappa)?;
        Ok(pert)
    }

    pub fn is_empty(&self) -> bool {
        self.px.iter().chain(&self.py).all(|m| m.coeff == 0.0)
    }

    pub fn validate(&self, kappa: u32) -> Result<()> {
        for m in self.px.iter().chain(&self.py) {
            if m.i + m.j != kappa + 1 {
                return Err(Error::InvalidArgument(format!(
                    "perturbation monomial x^{} y^{} has degree {}, expected {}",
                    m.i,
                    m.j,
                    m.i + m.j,
                    kappa + 1
                )));
            }
            if !m.coeff.is_finite() {
                return Err(Error::InvalidArgument("perturbation coefficient is not finite".into()));
            }
        }
        Ok(())
    }

    /// `(px(x, y), py(x, y))`.
    pub fn eval(&self, x: f64, y: f64) -> (f64, f64) {
        (self.px.iter().map(|m| m.eval(x, y)).sum(), self.py.iter().map(|m| m.eval(x, y)).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// Orbits with either coordinate above `bound` fail with `LeftDomain`.
    pub bound: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-12, abs_tol: 1e-15, max_step: 1e12, max_steps: 2_000_000, bound: 10.0 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, tol) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(1e-15..=1e-3).contains(&tol) {
                return Err(Error::InvalidArgument(format!("{name} = {tol:e} outside [1e-15, 1e-3]")));
            }
        }
        if !(self.max_step > 0.0) || self.max_steps == 0 || !(self.bound > 0.0) {
            return Err(Error::InvalidArgument("max_step, max_steps and bound must be positive".into()));
        }
        Ok(())
    }
}

/// Time-stamped samples at the accepted integrator steps, in increasing `t`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<(f64, PhaseState)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// The vector field at `z`.
pub fn eval_field(p: &SaddleParams, pert: &Perturbation, z: PhaseState) -> (f64, f64) {
    let k = p.kappa as i32;
    let (xk, yk) = (z.x.powi(k), z.y.powi(k));
    let (qx, qy) = pert.eval(z.x, z.y);
    (z.x * (p.a0 * xk + p.a2 * yk + qx), -z.y * (p.b0 * xk + p.b2 * yk + qy))
}

/// The flow in logarithmic coordinates for one starting point.
struct LogFlow<'a> {
    p: &'a SaddleParams,
    pert: &'a Perturbation,
    cfg: IntegratorConfig,
    active: [bool; 2],
}

impl<'a> LogFlow<'a> {
    fn new(p: &'a SaddleParams, pert: &'a Perturbation, cfg: &IntegratorConfig, z: PhaseState) -> Result<Self> {
        cfg.validate()?;
        pert.validate(p.kappa)?;
        z.check()?;
        Ok(Self { p, pert, cfg: *cfg, active: [z.x > 0.0, z.y > 0.0] })
    }

    fn to_log(&self, z: PhaseState) -> State {
        [if self.active[0] { z.x.ln() } else { 0.0 }, if self.active[1] { z.y.ln() } else { 0.0 }]
    }

    fn to_phase(&self, s: &State) -> PhaseState {
        PhaseState::new(if self.active[0] { s[0].exp() } else { 0.0 }, if self.active[1] { s[1].exp() } else { 0.0 })
    }

    fn solver(&self) -> Dopri5<impl Fn(&State) -> State + '_> {
        let k = self.p.kappa as i32;
        let active = self.active;
        let rhs = move |s: &State| {
            let x = if active[0] { s[0].exp() } else { 0.0 };
            let y = if active[1] { s[1].exp() } else { 0.0 };
            let (xk, yk) = (x.powi(k), y.powi(k));
            let (qx, qy) = self.pert.eval(x, y);
            [self.p.a0 * xk + self.p.a2 * yk + qx, -(self.p.b0 * xk + self.p.b2 * yk + qy)]
        };
        let opts = StepperOptions {
            rtol: 0.0,
            // an absolute error in ln x is a relative error in x
            atol: self.cfg.rel_tol + self.cfg.abs_tol,
            max_step: self.cfg.max_step,
            max_steps: self.cfg.max_steps,
            active: self.active,
        };
        Dopri5::new(rhs, opts)
    }

    fn check_bound(&self, t: f64, s: &State) -> Result<()> {
        let z = self.to_phase(s);
        if z.x > self.cfg.bound || z.y > self.cfg.bound || !z.x.is_finite() || !z.y.is_finite() {
            return Err(Error::LeftDomain { t, x: z.x, y: z.y });
        }
        Ok(())
    }
}

/// Flow of the field for time `t` (either sign).
pub fn flow(p: &SaddleParams, pert: &Perturbation, z0: PhaseState, t: f64, cfg: &IntegratorConfig) -> Result<PhaseState> {
    let lf = LogFlow::new(p, pert, cfg, z0)?;
    if !lf.active[0] && !lf.active[1] {
        return Ok(z0);
    }
    let solver = lf.solver();
    let end = solver.run(lf.to_log(z0), t, |_, seg| {
        lf.check_bound(seg.t1, &seg.y1)?;
        Ok(Control::Continue)
    })?;
    Ok(lf.to_phase(&end.y))
}

/// As [`flow`], also recording the accepted steps.
pub fn flow_trajectory(
    p: &SaddleParams,
    pert: &Perturbation,
    z0: PhaseState,
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<(PhaseState, Trajectory)> {
    let lf = LogFlow::new(p, pert, cfg, z0)?;
    let mut samples = vec![(0.0, z0)];
    if (!lf.active[0] && !lf.active[1]) || t == 0.0 {
        if t != 0.0 {
            samples.push((t, z0));
        }
        if t < 0.0 {
            samples.reverse();
        }
        return Ok((z0, Trajectory { samples }));
    }
    let solver = lf.solver();
    let end = solver.run(lf.to_log(z0), t, |_, seg| {
        lf.check_bound(seg.t1, &seg.y1)?;
        samples.push((seg.t1, lf.to_phase(&seg.y1)));
        Ok(Control::Continue)
    })?;
    if t < 0.0 {
        samples.reverse();
    }
    Ok((lf.to_phase(&end.y), Trajectory { samples }))
}

pub fn time_one_map(p: &SaddleParams, pert: &Perturbation, z: PhaseState, cfg: &IntegratorConfig) -> Result<PhaseState> {
    flow(p, pert, z, 1.0, cfg)
}

/// `((Phi^1(x, 0))_x / x - 1) / x^k`, which tends to `a0` as `x -> 0`.
pub fn unstable_axis_probe(p: &SaddleParams, x: f64, cfg: &IntegratorConfig) -> Result<f64> {
    let z = time_one_map(p, &Perturbation::none(), PhaseState::new(x, 0.0), cfg)?;
    Ok(((z.x / x).ln().exp_m1()) / x.powi(p.kappa as i32))
}

/// `(1 - (Phi^1(0, y))_y / y) / y^k`, which tends to `b2` as `y -> 0`.
pub fn stable_axis_probe(p: &SaddleParams, y: f64, cfg: &IntegratorConfig) -> Result<f64> {
    let z = time_one_map(p, &Perturbation::none(), PhaseState::new(0.0, y), cfg)?;
    Ok(-((z.y / y).ln().exp_m1()) / y.powi(p.kappa as i32))
}

/// `x(t) = (x0^-k - k a0 t)^(-1/k)` on the unstable axis; `None` past blow-up.
pub fn unstable_axis_solution(p: &SaddleParams, x0: f64, t: f64) -> Option<f64> {
    let k = p.kappa_f();
    let base = x0.powf(-k) - k * p.a0 * t;
    (base > 0.0).then(|| base.powf(-1.0 / k))
}

/// `y(t) = (y0^-k + k b2 t)^(-1/k)` on the stable axis; `None` past blow-up.
pub fn stable_axis_solution(p: &SaddleParams, y0: f64, t: f64) -> Option<f64> {
    let k = p.kappa_f();
    let base = y0.powf(-k) + k * p.b2 * t;
    (base > 0.0).then(|| base.powf(-1.0 / k))
}

const EVENT_TOL: RootTol = RootTol { abs: 1e-13, rel: 1e-15, max_iter: 200 };

/// Locates a zero of `g` on the state along `seg` by re-stepping from its
/// start; `g` must change sign over the segment.
fn localize<F, G>(solver: &Dopri5<F>, seg: &Segment, g: G) -> Result<(f64, State)>
where
    F: Fn(&State) -> State,
    G: Fn(&State) -> f64,
{
    let h_full = seg.h();
    let g0 = g(&seg.y0);
    let g1 = g(&seg.y1);
    let phi = |h: f64| {
        if h == 0.0 {
            g0
        } else if h == h_full {
            g1
        } else {
            g(&solver.step_once(&seg.y0, h))
        }
    };
    let tol = RootTol { abs: EVENT_TOL.abs.max(1e-15 * seg.t0.abs()), ..EVENT_TOL };
    let h = brent(phi, 0.0, h_full, tol)?;
    let y = if h == h_full { seg.y1 } else { solver.step_once(&seg.y0, h) };
    Ok((seg.t0 + h, y))
}

/// Forward flow time from `z0` to the section `x = zeta0`; `None` if the
/// orbit has not reached it by `horizon`.
pub fn exit_time_flow_capped(
    p: &SaddleParams,
    pert: &Perturbation,
    z0: PhaseState,
    zeta0: f64,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<Option<f64>> {
    if !(z0.x > 0.0 && z0.y > 0.0 && z0.x <= zeta0) {
        return Err(Error::InvalidDomain(format!("({}, {}) is not in the open quadrant left of x = {zeta0}", z0.x, z0.y)));
    }
    if z0.x == zeta0 {
        return Ok(Some(0.0));
    }
    let lf = LogFlow::new(p, pert, cfg, z0)?;
    let solver = lf.solver();
    let ln_zeta = zeta0.ln();
    let end = solver.run(lf.to_log(z0), horizon, |s, seg| {
        if seg.y1[0] >= ln_zeta {
            let (t, y) = localize(s, seg, |y| y[0] - ln_zeta)?;
            return Ok(Control::Stop { t, y });
        }
        lf.check_bound(seg.t1, &seg.y1)?;
        Ok(Control::Continue)
    })?;
    Ok(end.stopped.then_some(end.t))
}

/// Forward flow time from `z0` to the section `x = zeta0`.
pub fn exit_time_flow(p: &SaddleParams, pert: &Perturbation, z0: PhaseState, zeta0: f64, cfg: &IntegratorConfig) -> Result<f64> {
    let horizon = f64::MAX;
    exit_time_flow_capped(p, pert, z0, zeta0, horizon, cfg)?
        .ok_or(Error::StepLimitExceeded { max_steps: cfg.max_steps, t: horizon })
}

/// The diagonal point `(d, d)` on the orbit through `z`.
pub fn diagonal_crossing(p: &SaddleParams, pert: &Perturbation, z: PhaseState, cfg: &IntegratorConfig) -> Result<f64> {
    if !(z.x > 0.0 && z.y > 0.0) {
        return Err(Error::InvalidDomain(format!("({}, {}) is not in the open quadrant", z.x, z.y)));
    }
    if z.x == z.y {
        return Ok(z.x);
    }
    let lf = LogFlow::new(p, pert, cfg, z)?;
    let solver = lf.solver();
    let start = lf.to_log(z);
    let above = start[1] > start[0];
    // above the diagonal x grows and y shrinks in forward time
    let horizon = if above { f64::MAX } else { -f64::MAX };
    let end = solver
        .run(start, horizon, |s, seg| {
            if (seg.y1[1] > seg.y1[0]) != above {
                let (t, y) = localize(s, seg, |y| y[1] - y[0])?;
                return Ok(Control::Stop { t, y });
            }
            lf.check_bound(seg.t1, &seg.y1)?;
            Ok(Control::Continue)
        })
        .map_err(|e| match e {
            Error::LeftDomain { .. } | Error::StepLimitExceeded { .. } | Error::StepSizeUnderflow { .. } => {
                Error::DiagonalNotReached
            }
            other => other,
        })?;
    if !end.stopped {
        return Err(Error::DiagonalNotReached);
    }
    Ok((0.5 * (end.y[0] + end.y[1])).exp())
}

/// The unperturbed first integral evaluated at the diagonal crossing of the
/// (possibly perturbed) orbit through `z`; constant along perturbed orbits.
pub fn perturbed_first_integral(p: &SaddleParams, pert: &Perturbation, z: PhaseState, cfg: &IntegratorConfig) -> Result<f64> {
    let fi = FirstIntegral::new(p)?;
    let d = diagonal_crossing(p, pert, z, cfg)?;
    Ok(fi.on_diagonal(d))
}
