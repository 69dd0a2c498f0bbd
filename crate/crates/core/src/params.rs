//! Saddle coefficients and every exponent derived from them.
//!
//! The local field is
//!
//! ```text
//! x' =  x (a0 x^k + a2 y^k)
//! y' = -y (b0 x^k + b2 y^k)
//! ```
//!
//! with `k` even. Everything downstream is expressed through [`DerivedConstants`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute threshold below which `a2 b0 - a0 b2` is treated as zero.
pub const DEFAULT_DELTA_THRESHOLD: f64 = 1e-14;

const IDENTITY_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaddleParams {
    pub a0: f64,
    pub a2: f64,
    pub b0: f64,
    pub b2: f64,
    pub kappa: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    NonFinite(&'static str),
    NonPositiveCoefficient(&'static str),
    NegativeCoefficient(&'static str),
    OddKappa,
    KappaTooSmall,
    DegenerateDelta,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite(name) => write!(f, "NonFinite({name})"),
            Violation::NonPositiveCoefficient(name) => write!(f, "NonPositiveCoefficient({name})"),
            Violation::NegativeCoefficient(name) => write!(f, "NegativeCoefficient({name})"),
            Violation::OddKappa => f.write_str("OddKappa"),
            Violation::KappaTooSmall => f.write_str("KappaTooSmall"),
            Violation::DegenerateDelta => f.write_str("DegenerateDelta"),
        }
    }
}

/// Knobs for [`SaddleParams::validate_with`] and [`derive_constants_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub delta_threshold: f64,
    /// Accept zero coefficients (non-negative instead of positive). Only the
    /// flow itself is meaningful in that regime; exponents may be infinite.
    pub permissive: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { delta_threshold: DEFAULT_DELTA_THRESHOLD, permissive: false }
    }
}

impl SaddleParams {
    pub fn new(a0: f64, a2: f64, b0: f64, b2: f64, kappa: u32) -> Self {
        Self { a0, a2, b0, b2, kappa }
    }

    pub fn delta(&self) -> f64 {
        self.a2 * self.b0 - self.a0 * self.b2
    }

    pub fn kappa_f(&self) -> f64 {
        f64::from(self.kappa)
    }

    /// All violated invariants; empty iff the parameters are valid.
    pub fn validate(&self) -> Vec<Violation> {
        self.validate_with(&ValidationOptions::default())
    }

    pub fn validate_with(&self, opts: &ValidationOptions) -> Vec<Violation> {
        let mut out = Vec::new();
        for (name, value) in self.named() {
            if !value.is_finite() {
                out.push(Violation::NonFinite(name));
            } else if opts.permissive {
                if value < 0.0 {
                    out.push(Violation::NegativeCoefficient(name));
                }
            } else if value <= 0.0 {
                out.push(Violation::NonPositiveCoefficient(name));
            }
        }
        if self.kappa < 2 {
            out.push(Violation::KappaTooSmall);
        }
        if self.kappa % 2 != 0 {
            out.push(Violation::OddKappa);
        }
        let delta = self.delta();
        if !(delta.abs() >= opts.delta_threshold) && out.iter().all(|v| !matches!(v, Violation::NonFinite(_))) {
            out.push(Violation::DegenerateDelta);
        }
        out
    }

    /// Coordinate rescaling `x = r x', y = s y'`, which multiplies the
    /// x-homogeneous coefficients by `r^k` and the y-homogeneous ones by `s^k`.
    pub fn rescale(&self, r: f64, s: f64) -> Result<SaddleParams> {
        if !(r > 0.0 && s > 0.0 && r.is_finite() && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("rescale factors must be positive, got r={r}, s={s}")));
        }
        let k = self.kappa as i32;
        let rk = r.powi(k);
        let sk = s.powi(k);
        Ok(SaddleParams {
            a0: self.a0 * rk,
            a2: self.a2 * sk,
            b0: self.b0 * rk,
            b2: self.b2 * sk,
            kappa: self.kappa,
        })
    }

    fn named(&self) -> [(&'static str, f64); 4] {
        [("a0", self.a0), ("a2", self.a2), ("b0", self.b0), ("b2", self.b2)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureClass {
    FiniteSRB,
    InfiniteSRB,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub kappa: u32,
    pub delta: f64,
    pub u: f64,
    pub v: f64,
    pub beta0: f64,
    pub beta2: f64,
    pub c0: f64,
    pub c2: f64,
    pub beta_star: f64,
    pub measure_class: MeasureClass,
    pub divergence_free: bool,
}

impl DerivedConstants {
    pub fn kappa_f(&self) -> f64 {
        f64::from(self.kappa)
    }

    /// `1/(k beta0) + 1/(k beta2)`, the exponent of `(c0 + c2 M^k)` in the
    /// reduced equation for `M = y/x`.
    pub fn bracket_exponent(&self) -> f64 {
        let k = self.kappa_f();
        1.0 / (k * self.beta0) + 1.0 / (k * self.beta2)
    }

    /// `u + v + k`.
    pub fn total_degree(&self) -> f64 {
        self.u + self.v + self.kappa_f()
    }

    /// Largest relative gap between the ratio forms of `beta0`, `beta2` and
    /// their `(u + v + k)` forms.
    pub fn beta_identity_gap(&self) -> f64 {
        let k = self.kappa_f();
        let g0 = (self.beta0 - self.total_degree() / (k * self.v)).abs() / self.beta0;
        let g2 = (self.beta2 - self.total_degree() / (k * self.u)).abs() / self.beta2;
        g0.max(g2)
    }
}

pub fn derive_constants(p: &SaddleParams) -> Result<DerivedConstants> {
    derive_constants_with(p, &ValidationOptions::default())
}

pub fn derive_constants_with(p: &SaddleParams, opts: &ValidationOptions) -> Result<DerivedConstants> {
    let violations = p.validate_with(opts);
    let delta = p.delta();
    if violations == [Violation::DegenerateDelta] {
        return Err(Error::DegenerateDelta { delta, threshold: opts.delta_threshold });
    }
    if !violations.is_empty() {
        return Err(Error::InvalidParams(violations));
    }

    let k = p.kappa_f();
    let c0 = p.a0 + p.b0;
    let c2 = p.a2 + p.b2;
    let u = k * p.b2 * c0 / delta;
    let v = k * p.a0 * c2 / delta;

    let beta0 = c0 / (k * p.a0);
    let beta2 = c2 / (k * p.b2);
    let total = u + v + k;
    if beta0.is_finite() && beta2.is_finite() {
        let beta0_alt = total / (k * v);
        let beta2_alt = total / (k * u);
        check_identity("beta0", beta0, beta0_alt)?;
        check_identity("beta2", beta2, beta2_alt)?;
    }
    if !(u.signum() == delta.signum() && v.signum() == delta.signum()) && u != 0.0 && v != 0.0 {
        return Err(Error::Consistency(format!("u={u}, v={v} do not share the sign of delta={delta}")));
    }

    let mut ratio_min = 1.0_f64;
    if p.b2 > 0.0 {
        ratio_min = ratio_min.min(p.a2 / p.b2);
    }
    if p.a0 > 0.0 {
        ratio_min = ratio_min.min(p.b0 / p.a0);
    }
    let beta_star = ratio_min / k;

    let measure_class = if beta2 <= 1.0 { MeasureClass::InfiniteSRB } else { MeasureClass::FiniteSRB };
    let divergence_free = approx_eq((k + 1.0) * p.a0, p.b0) && approx_eq(p.a2, (k + 1.0) * p.b2);

    Ok(DerivedConstants {
        kappa: p.kappa,
        delta,
        u,
        v,
        beta0,
        beta2,
        c0,
        c2,
        beta_star,
        measure_class,
        divergence_free,
    })
}

fn check_identity(name: &str, a: f64, b: f64) -> Result<()> {
    if (a - b).abs() <= IDENTITY_RTOL * a.abs().max(b.abs()) {
        Ok(())
    } else {
        Err(Error::Consistency(format!("{name}: ratio form {a} disagrees with (u+v+k) form {b}")))
    }
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// The quadrant `Q = [0, zeta0] x [0, eta0]` together with the top of the
/// entry strip, `eta1`, the stable-axis preimage of `eta0` one time unit back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainRect {
    pub zeta0: f64,
    pub eta0: f64,
    pub eta1: f64,
}

impl DomainRect {
    pub fn new(p: &SaddleParams, zeta0: f64, eta0: f64) -> Result<Self> {
        if !(zeta0 > 0.0 && zeta0.is_finite()) {
            return Err(Error::InvalidDomain(format!("zeta0 must be positive, got {zeta0}")));
        }
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return Err(Error::InvalidDomain(format!("eta0 must be positive, got {eta0}")));
        }
        let k = p.kappa as i32;
        let base = eta0.powi(-k) - p.kappa_f() * p.b2;
        if !(base > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "eta0 = {eta0} too large: eta0^-k must exceed k*b2 = {}",
                p.kappa_f() * p.b2
            )));
        }
        let eta1 = base.powf(-1.0 / p.kappa_f());
        Ok(Self { zeta0, eta0, eta1 })
    }

    /// `zeta0 = eta0 = min{1, (2 k b2)^(-1/k), (2 k a0)^(-1/k)}`.
    pub fn default_for(p: &SaddleParams) -> Result<Self> {
        let side = default_side(p);
        Self::new(p, side, side)
    }

    /// Image of `zeta0` under the unstable-axis flow after one time unit,
    /// if the axis solution exists that long.
    pub fn zeta1(&self, p: &SaddleParams) -> Option<f64> {
        let base = self.zeta0.powi(-(p.kappa as i32)) - p.kappa_f() * p.a0;
        (base > 0.0).then(|| base.powf(-1.0 / p.kappa_f()))
    }
}

pub fn default_side(p: &SaddleParams) -> f64 {
    let k = p.kappa_f();
    let mut side = 1.0_f64;
    if p.b2 > 0.0 {
        side = side.min((2.0 * k * p.b2).powf(-1.0 / k));
    }
    if p.a0 > 0.0 {
        side = side.min((2.0 * k * p.a0).powf(-1.0 / k));
    }
    side
}
