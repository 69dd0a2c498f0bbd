//! Exact exit times through the reduction to `M = y/x`.
//!
//! Along a level set of the first integral the ratio `M` obeys a scalar
//! equation whose separated form gives
//!
//! ```text
//! G(xi, eta) T = ∫_{omega/zeta0}^{eta/xi} M^(1/beta0 - 1) (c0 + c2 M^k)^(-p) dM,
//! p = 1/(k beta0) + 1/(k beta2).
//! ```
//!
//! [`MIntegral`] evaluates that integrand's partial integrals: binomial
//! series near `0` and `∞`, a fixed Gauss-Legendre rule in between. The
//! total over `(0, ∞)` is cross-checked against the adaptive quadrature of
//! [`m_integral_quadrature`].

use crate::error::{Error, Result};
use crate::numeric::quad::{adaptive, gauss_legendre, QuadTol};
use crate::numeric::roots::{newton_bracketed, newton_bracketed_with, RootTol};
use crate::params::{derive_constants, DerivedConstants, SaddleParams};

/// Series are used where `|z| <= SERIES_RADIUS`, z the binomial argument.
const SERIES_RADIUS: f64 = 0.25;
const SERIES_MAX_TERMS: usize = 200;
const GL_ORDER: usize = 24;
const TOTAL_RTOL: f64 = 1e-12;
const CROSS_CHECK_RTOL: f64 = 1e-10;

/// Which improper integral: the one entering `xi0` or the one entering
/// `omega0` (exponent `1 - 1/beta2`, bracket `c0 M^k + c2`). They are equal
/// under `M -> 1/M`; both are computed independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Xi,
    Omega,
}

/// Adaptive quadrature of the improper integral in `s = ln M`, truncated
/// where the analytic envelopes `c^(-p) e^(alpha s)` (left) and
/// `c^(-p) e^(-gamma s)` (right) bound the remainder by `rtol * 1e-3` of the
/// running estimate.
pub fn m_integral_quadrature(d: &DerivedConstants, orientation: Orientation, rtol: f64) -> Result<f64> {
    check_integrable(d)?;
    let k = d.kappa_f();
    let p = d.bracket_exponent();
    let (alpha, gamma, c_small, c_large) = match orientation {
        Orientation::Xi => (1.0 / d.beta0, 1.0 / d.beta2, d.c0, d.c2),
        Orientation::Omega => (1.0 / d.beta2, 1.0 / d.beta0, d.c2, d.c0),
    };
    let integrand = |s: f64| (alpha * s - p * (c_small + c_large * (k * s).exp()).ln()).exp();
    // centre of mass of the bell in s: where c_small = c_large e^{k s}
    let centre = (c_small / c_large).ln() / k;
    // envelope tails: ∫_{-∞}^{s} c_small^{-p} e^{alpha t} dt, ∫_{s}^{∞} c_large^{-p} e^{-gamma t} dt
    let left_env = |s: f64| c_small.powf(-p) * (alpha * s).exp() / alpha;
    let right_env = |s: f64| c_large.powf(-p) * (-(gamma) * s).exp() / gamma;
    let peak = integrand(centre).max(f64::MIN_POSITIVE);
    let target = rtol * 1e-3 * peak;
    let mut lo = centre - 1.0;
    while left_env(lo) > target {
        lo -= 1.0;
    }
    let mut hi = centre + 1.0;
    while right_env(hi) > target {
        hi += 1.0;
    }
    let panels = ((hi - lo) / 2.0).ceil() as usize;
    let r = adaptive(integrand, lo, hi, panels, QuadTol { abs: 0.0, rel: rtol, max_intervals: 10_000 })?;
    Ok(r.value)
}

fn check_integrable(d: &DerivedConstants) -> Result<()> {
    if !(d.beta0.is_finite() && d.beta0 > 0.0) {
        return Err(Error::NonIntegrable(format!("beta0 = {} (a0 = 0): integrand ~ 1/M at 0", d.beta0)));
    }
    if !(d.beta2.is_finite() && d.beta2 > 0.0) {
        return Err(Error::NonIntegrable(format!("beta2 = {} (b2 = 0): integrand ~ 1/M at infinity", d.beta2)));
    }
    Ok(())
}

/// Partial integrals of `f(M) = M^(alpha-1) (c0 + c2 M^k)^(-p)`.
#[derive(Debug, Clone)]
pub struct MIntegral {
    kappa: f64,
    c0: f64,
    c2: f64,
    alpha: f64,
    gamma: f64,
    p: f64,
    binom: Vec<f64>,
    a_cut: f64,
    b_cut: f64,
    lower_at_cut: f64,
    upper_at_cut: f64,
    total: f64,
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
}

impl MIntegral {
    pub fn new(d: &DerivedConstants) -> Result<Self> {
        check_integrable(d)?;
        let kappa = d.kappa_f();
        let p = d.bracket_exponent();
        let mut binom = Vec::with_capacity(SERIES_MAX_TERMS);
        let mut c = 1.0;
        for j in 0..SERIES_MAX_TERMS {
            binom.push(c);
            c *= (-p - j as f64) / (j as f64 + 1.0);
        }
        let (gl_nodes, gl_weights) = gauss_legendre(GL_ORDER);
        let a_cut = (SERIES_RADIUS * d.c0 / d.c2).powf(1.0 / kappa);
        let b_cut = (d.c0 / (SERIES_RADIUS * d.c2)).powf(1.0 / kappa);
        let mut m = Self {
            kappa,
            c0: d.c0,
            c2: d.c2,
            alpha: 1.0 / d.beta0,
            gamma: 1.0 / d.beta2,
            p,
            binom,
            a_cut,
            b_cut,
            lower_at_cut: 0.0,
            upper_at_cut: 0.0,
            total: 0.0,
            gl_nodes,
            gl_weights,
        };
        m.lower_at_cut = m.lower_series(a_cut);
        m.upper_at_cut = m.upper_series(b_cut);
        m.total = m.lower_at_cut + m.gauss_middle(a_cut.ln(), b_cut.ln()) + m.upper_at_cut;

        let reference = m_integral_quadrature(d, Orientation::Xi, TOTAL_RTOL)?;
        if (reference - m.total).abs() > CROSS_CHECK_RTOL * reference {
            return Err(Error::Consistency(format!(
                "series/Gauss total {} disagrees with adaptive quadrature {}",
                m.total, reference
            )));
        }
        Ok(m)
    }

    /// `∫_0^∞ f(M) dM`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn integrand(&self, m: f64) -> f64 {
        m.powf(self.alpha - 1.0) * (self.c0 + self.c2 * m.powf(self.kappa)).powf(-self.p)
    }

    /// `M f(M)` at `M = e^s`, the integrand in log coordinates.
    pub fn integrand_log(&self, s: f64) -> f64 {
        (self.alpha * s - self.p * (self.c0 + self.c2 * (self.kappa * s).exp()).ln()).exp()
    }

    fn lower_series(&self, a: f64) -> f64 {
        // ∫_0^a = c0^{-p} a^alpha Σ C(-p, j) z^j / (alpha + k j),  z = c2 a^k / c0
        let z = self.c2 * a.powf(self.kappa) / self.c0;
        let mut sum = 0.0;
        let mut zj = 1.0;
        for (j, c) in self.binom.iter().enumerate() {
            let term = c * zj / (self.alpha + self.kappa * j as f64);
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            zj *= z;
        }
        self.c0.powf(-self.p) * a.powf(self.alpha) * sum
    }

    fn upper_series(&self, b: f64) -> f64 {
        // ∫_b^∞ = c2^{-p} b^{-gamma} Σ C(-p, j) w^j / (gamma + k j),  w = c0 / (c2 b^k)
        let w = self.c0 / (self.c2 * b.powf(self.kappa));
        let mut sum = 0.0;
        let mut wj = 1.0;
        for (j, c) in self.binom.iter().enumerate() {
            let term = c * wj / (self.gamma + self.kappa * j as f64);
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            wj *= w;
        }
        self.c2.powf(-self.p) * b.powf(-self.gamma) * sum
    }

    fn gauss_middle(&self, s0: f64, s1: f64) -> f64 {
        let c = 0.5 * (s0 + s1);
        let h = 0.5 * (s1 - s0);
        self.gl_nodes
            .iter()
            .zip(&self.gl_weights)
            .map(|(x, w)| w * self.integrand_log(c + h * x))
            .sum::<f64>()
            * h
    }

    /// `∫_0^a f(M) dM` for `a` not above the upper series cut.
    fn cumulative(&self, a: f64) -> f64 {
        if a <= 0.0 {
            0.0
        } else if a <= self.a_cut {
            self.lower_series(a)
        } else if a >= self.b_cut {
            self.total - self.upper_series(a)
        } else {
            self.lower_at_cut + self.gauss_middle(self.a_cut.ln(), a.ln())
        }
    }

    /// `∫_0^a f(M) dM`.
    pub fn lower_tail(&self, a: f64) -> f64 {
        self.cumulative(a)
    }

    /// `∫_b^∞ f(M) dM`.
    pub fn upper_tail(&self, b: f64) -> f64 {
        if b >= self.b_cut {
            self.upper_series(b)
        } else if b <= self.a_cut {
            self.total - self.lower_series(b.max(0.0))
        } else {
            self.upper_at_cut + self.gauss_middle(b.ln(), self.b_cut.ln())
        }
    }

    /// `∫_a^b f(M) dM` for `0 < a <= b`.
    pub fn partial(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let (sa, sb) = (a.ln(), b.ln());
        if sb - sa <= 1.0 {
            return self.gauss_middle(sa, sb);
        }
        if a >= self.b_cut {
            return self.upper_series(a) - self.upper_series(b);
        }
        if b <= self.a_cut {
            return self.lower_series(b) - self.lower_series(a);
        }
        self.cumulative(b) - self.cumulative(a)
    }
}

/// `G(xi, eta) = xi^(1/beta2) eta^(1/beta0) (c0 xi^k + c2 eta^k)^(1 - p)`.
pub fn compute_g(d: &DerivedConstants, xi: f64, eta: f64) -> f64 {
    let k = d.kappa_f();
    let p = d.bracket_exponent();
    let mix = d.c0 * xi.powf(k) + d.c2 * eta.powf(k);
    (xi.ln() / d.beta2 + eta.ln() / d.beta0 + (1.0 - p) * mix.ln()).exp()
}

/// Exit-time machinery for one parameter set and section `x = zeta0`.
#[derive(Debug, Clone)]
pub struct ExitTimeSolver {
    params: SaddleParams,
    constants: DerivedConstants,
    m: MIntegral,
    zeta0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitPoint {
    pub t: f64,
    pub omega: f64,
}

impl ExitTimeSolver {
    pub fn new(p: &SaddleParams, zeta0: f64) -> Result<Self> {
        let d = derive_constants(p)?;
        Self::with_constants(p, &d, zeta0)
    }

    pub fn with_constants(p: &SaddleParams, d: &DerivedConstants, zeta0: f64) -> Result<Self> {
        if !(zeta0 > 0.0 && zeta0.is_finite()) {
            return Err(Error::InvalidArgument(format!("zeta0 must be positive, got {zeta0}")));
        }
        Ok(Self { params: *p, constants: *d, m: MIntegral::new(d)?, zeta0 })
    }

    pub fn params(&self) -> &SaddleParams {
        &self.params
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.constants
    }

    pub fn m_integral(&self) -> &MIntegral {
        &self.m
    }

    pub fn zeta0(&self) -> f64 {
        self.zeta0
    }

    /// Log of the level-set function `x^u y^v (c0 x^k + c2 y^k)` with the
    /// sign conventions folded out.
    fn level(&self, ln_x: f64, ln_y: f64) -> f64 {
        let d = &self.constants;
        let k = d.kappa_f();
        let p0 = d.c0.ln() + k * ln_x;
        let p2 = d.c2.ln() + k * ln_y;
        let (hi, lo) = if p0 > p2 { (p0, p2) } else { (p2, p0) };
        d.u * ln_x + d.v * ln_y + hi + (lo - hi).exp().ln_1p()
    }

    /// The exit height `omega` with `(xi, eta)` and `(zeta0, omega)` on one
    /// level set.
    pub fn omega(&self, xi: f64, eta: f64) -> Result<f64> {
        self.check_entry(xi, eta)?;
        if xi == self.zeta0 {
            return Ok(eta);
        }
        let d = &self.constants;
        let k = d.kappa_f();
        let ln_z = self.zeta0.ln();
        let target = self.level(xi.ln(), eta.ln());
        let f = |lw: f64| {
            let value = self.level(ln_z, lw) - target;
            let w_k = (k * lw).exp();
            let slope = d.v + k * d.c2 * w_k / (d.c0 * self.zeta0.powf(k) + d.c2 * w_k);
            (value, slope)
        };
        // ignoring c2 w^k next to c0 zeta0^k gives a starting point
        let guess = (target - d.u * ln_z - (d.c0.ln() + k * ln_z)) / d.v;
        let hi = eta.ln();
        let mut lo = guess.min(hi) - 1.0;
        let sign_hi = f(hi).0.signum();
        let mut width = 1.0;
        while f(lo).0.signum() == sign_hi {
            width *= 2.0;
            lo -= width;
            if lo < -745.0 {
                let (f_lo, _) = f(lo);
                return Err(Error::BracketFailure { lo, hi, f_lo, f_hi: f(hi).0 });
            }
        }
        let lw = newton_bracketed(f, lo, hi, Some(guess.clamp(lo, hi)), RootTol { abs: 1e-15, rel: 1e-15, max_iter: 200 })?;
        Ok(lw.exp())
    }

    fn check_entry(&self, xi: f64, eta: f64) -> Result<()> {
        if !(xi > 0.0 && xi <= self.zeta0) {
            return Err(Error::InvalidArgument(format!("xi = {xi} must lie in (0, zeta0 = {}]", self.zeta0)));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
        }
        Ok(())
    }

    /// Exit time and exit height from `(xi, eta)` to the section `x = zeta0`.
    pub fn exit(&self, xi: f64, eta: f64) -> Result<ExitPoint> {
        let omega = self.omega(xi, eta)?;
        if xi == self.zeta0 {
            return Ok(ExitPoint { t: 0.0, omega });
        }
        let integral = self.m.partial(omega / self.zeta0, eta / xi);
        Ok(ExitPoint { t: integral / compute_g(&self.constants, xi, eta), omega })
    }

    pub fn exit_time(&self, xi: f64, eta: f64) -> Result<f64> {
        Ok(self.exit(xi, eta)?.t)
    }

    /// `(T, d ln T / d ln xi)` at fixed `eta`.
    pub fn exit_time_log_slope(&self, xi: f64, eta: f64) -> Result<(f64, f64)> {
        let omega = self.omega(xi, eta)?;
        let d = &self.constants;
        let k = d.kappa_f();
        let p = d.bracket_exponent();
        let (lo, hi) = (omega / self.zeta0, eta / xi);
        let integral = self.m.partial(lo, hi);
        let t = integral / compute_g(d, xi, eta);
        let xi_k = xi.powf(k);
        let w_k = omega.powf(k);
        let frac_xi = d.c0 * xi_k / (d.c0 * xi_k + d.c2 * eta.powf(k));
        let frac_w = d.c2 * w_k / (d.c0 * self.zeta0.powf(k) + d.c2 * w_k);
        let dln_omega = (d.u + k * frac_xi) / (d.v + k * frac_w);
        let dln_integral = (-self.m.integrand_log(hi.ln()) - self.m.integrand_log(lo.ln()) * dln_omega) / integral;
        let dln_g = 1.0 / d.beta2 + (1.0 - p) * k * frac_xi;
        Ok((t, dln_integral - dln_g))
    }

    /// `xi0(eta) = c2^(-1/u) eta^(-a2/b2) I^beta2`.
    pub fn xi0(&self, eta: f64) -> f64 {
        let d = &self.constants;
        let p = &self.params;
        ((-1.0 / d.u) * d.c2.ln() - (p.a2 / p.b2) * eta.ln() + d.beta2 * self.m.total().ln()).exp()
    }

    /// The unique `xi in (0, zeta0)` with `T(xi, eta) = t`.
    pub fn invert(&self, eta: f64, t: f64) -> Result<f64> {
        self.invert_near(eta, t, None)
    }

    /// As [`invert`](Self::invert), starting the bracket search at `guess`
    /// (for instance the root for a nearby `t`) instead of the leading-order
    /// asymptotic value.
    pub fn invert_near(&self, eta: f64, t: f64, guess: Option<f64>) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("exit time must be positive, got {t}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
        }
        let ln_t = t.ln();
        let ln_zeta = self.zeta0.ln();
        let f = |lx: f64| -> (f64, f64) {
            if lx >= ln_zeta {
                return (f64::NEG_INFINITY, f64::NAN);
            }
            match self.exit_time_log_slope(lx.exp(), eta) {
                Ok((tt, slope)) if tt > 0.0 => (tt.ln() - ln_t, slope),
                Ok(_) => (f64::NEG_INFINITY, f64::NAN),
                Err(_) => (f64::NAN, f64::NAN),
            }
        };
        let (start, mut width) = match guess {
            Some(g) if g > 0.0 && g < self.zeta0 => (g.ln(), 1e-3),
            _ => ((self.xi0(eta).ln() - self.constants.beta2 * ln_t).min(ln_zeta - 1e-3), 0.25),
        };
        let (f_start, slope) = f(start);
        if f_start.is_nan() {
            return Err(Error::BracketFailure { lo: start, hi: start, f_lo: f_start, f_hi: f_start });
        }
        if f_start == 0.0 {
            return Ok(start.exp());
        }
        // T decreases in xi, so f > 0 to the left of the root
        let (mut lo, mut hi) = ((start, f_start), (start, f_start));
        if f_start > 0.0 {
            loop {
                let x = (hi.0 + width).min(ln_zeta);
                hi = (x, f(x).0);
                if hi.1 <= 0.0 || hi.1.is_nan() {
                    break;
                }
                lo = hi;
                width *= 2.0;
            }
        } else {
            loop {
                let x = lo.0 - width;
                lo = (x, f(x).0);
                if lo.1 >= 0.0 || lo.1.is_nan() || x < -700.0 {
                    break;
                }
                hi = lo;
                width *= 2.0;
            }
        }
        let newton_guess = start - f_start / slope;
        let tol = RootTol { abs: 1e-15, rel: 1e-15, max_iter: 200 };
        let lx = newton_bracketed_with(f, lo, hi, Some(newton_guess), tol)?;
        Ok(lx.exp())
    }
}

pub fn omega_of_xi(p: &SaddleParams, xi: f64, eta: f64, zeta0: f64) -> Result<f64> {
    ExitTimeSolver::new(p, zeta0)?.omega(xi, eta)
}

pub fn exit_time_quadrature(p: &SaddleParams, xi: f64, eta: f64, zeta0: f64) -> Result<f64> {
    ExitTimeSolver::new(p, zeta0)?.exit_time(xi, eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::quad::adaptive;
    use approx::assert_relative_eq;

    fn p2() -> SaddleParams {
        SaddleParams::new(1.0, 1.0, 1.0, 2.0, 2)
    }

    fn p1() -> SaddleParams {
        SaddleParams::new(1.0, 3.0, 2.0, 1.0, 2)
    }

    #[test]
    fn compute_g_p1_unit_point() {
        let d = derive_constants(&p1()).unwrap();
        assert_relative_eq!(compute_g(&d, 1.0, 1.0), 7f64.powf(5.0 / 12.0), max_relative = 1e-14);
        assert!(compute_g(&d, 1e-300, 1.0) < 1e-140);
    }

    #[test]
    fn partial_integrals_match_direct_quadrature() {
        for p in [p1(), p2(), SaddleParams::new(0.7, 2.5, 1.3, 0.4, 4)] {
            let d = derive_constants(&p).unwrap();
            let m = MIntegral::new(&d).unwrap();
            for &(a, b) in &[(1e-6, 1e-3), (1e-4, 0.5), (0.2, 0.9), (0.3, 40.0), (3.0, 1e5), (1e-8, 1e8), (50.0, 51.0)] {
                let direct = adaptive(|s| m.integrand_log(s), f64::ln(a), f64::ln(b), 8, QuadTol::rel(1e-13)).unwrap();
                assert_relative_eq!(m.partial(a, b), direct.value, max_relative = 1e-12);
            }
            assert_relative_eq!(m.lower_tail(0.3) + m.partial(0.3, 7.0) + m.upper_tail(7.0), m.total(), max_relative = 1e-13);
        }
    }

    #[test]
    fn omega_back_substitution() {
        let s = ExitTimeSolver::new(&p2(), 0.4).unwrap();
        let d = s.constants();
        let w = s.omega(0.1, 0.4).unwrap();
        let lhs = 0.1f64.powf(d.u) * 0.4f64.powf(d.v) * (d.c0 * 0.01 + d.c2 * 0.16);
        let rhs = 0.4f64.powf(d.u) * w.powf(d.v) * (d.c0 * 0.16 + d.c2 * w * w);
        assert!(((lhs - rhs) / lhs).abs() <= 1e-10);
        assert_eq!(s.omega(0.4, 0.4).unwrap(), 0.4);
    }

    #[test]
    fn omega_increases_with_xi() {
        for p in [p1(), p2()] {
            let s = ExitTimeSolver::new(&p, 0.4).unwrap();
            let mut prev = 0.0;
            for i in 1..=100 {
                let xi = 0.4 * i as f64 / 101.0;
                let w = s.omega(xi, 0.4).unwrap();
                assert!(w > prev);
                prev = w;
            }
        }
    }

    #[test]
    fn exit_time_boundary_and_monotonicity() {
        let s = ExitTimeSolver::new(&p2(), 0.4).unwrap();
        assert_eq!(s.exit_time(0.4, 0.4).unwrap(), 0.0);
        let mut prev = f64::INFINITY;
        for i in 1..=60 {
            let xi = 0.4 * (i as f64 / 61.0).powi(3);
            let t = s.exit_time(xi, 0.4).unwrap();
            assert!(t < prev, "T not decreasing at xi = {xi}");
            prev = t;
        }
    }

    #[test]
    fn log_slope_matches_finite_difference() {
        let s = ExitTimeSolver::new(&p1(), 0.5).unwrap();
        for &xi in &[1e-4, 1e-2, 0.2] {
            let (_, slope) = s.exit_time_log_slope(xi, 0.6).unwrap();
            let h = 1e-5;
            let tp = s.exit_time(xi * f64::exp(h), 0.6).unwrap().ln();
            let tm = s.exit_time(xi * f64::exp(-h), 0.6).unwrap().ln();
            assert_relative_eq!(slope, (tp - tm) / (2.0 * h), max_relative = 1e-6);
        }
    }

    #[test]
    fn inversion_round_trip() {
        let s = ExitTimeSolver::new(&p2(), 1.0).unwrap();
        for &t in &[1e-3, 1.0, 10.0, 1e3, 1e6, 1e9] {
            let xi = s.invert(1.0, t).unwrap();
            let back = s.exit_time(xi, 1.0).unwrap();
            assert_relative_eq!(back, t, max_relative = 1e-10);
        }
    }

    #[test]
    fn orientations_agree() {
        let d = derive_constants(&p1()).unwrap();
        let a = m_integral_quadrature(&d, Orientation::Xi, 1e-12).unwrap();
        let b = m_integral_quadrature(&d, Orientation::Omega, 1e-12).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-11);
    }
}
