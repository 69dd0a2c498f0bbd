use crate::error::Result;
use crate::params::{derive_constants, DerivedConstants, SaddleParams};

use super::PhaseState;

/// The conserved quantity of the unperturbed field.
///
/// For `delta > 0`: `L = x^u y^v (a0/v x^k + b2/u y^k)`; for `delta < 0` the
/// reciprocal of that expression, which is negative. Values are evaluated in
/// log space and carry an explicit sign, so comparisons must go through
/// ratios.
#[derive(Debug, Clone, Copy)]
pub struct FirstIntegral {
    u: f64,
    v: f64,
    kappa: f64,
    ln_x_coeff: f64,
    ln_y_coeff: f64,
    positive_delta: bool,
}

impl FirstIntegral {
    pub fn new(p: &SaddleParams) -> Result<Self> {
        let d = derive_constants(p)?;
        Ok(Self::from_constants(p, &d))
    }

    pub fn from_constants(p: &SaddleParams, d: &DerivedConstants) -> Self {
        Self {
            u: d.u,
            v: d.v,
            kappa: d.kappa_f(),
            ln_x_coeff: (p.a0 / d.v).abs().ln(),
            ln_y_coeff: (p.b2 / d.u).abs().ln(),
            positive_delta: d.delta > 0.0,
        }
    }

    /// Sign of `L` away from the axes.
    pub fn sign(&self) -> f64 {
        if self.positive_delta {
            1.0
        } else {
            -1.0
        }
    }

    /// `ln |L|` at `(e^ln_x, e^ln_y)`.
    pub fn ln_abs(&self, ln_x: f64, ln_y: f64) -> f64 {
        let p = self.ln_x_coeff + self.kappa * ln_x;
        let q = self.ln_y_coeff + self.kappa * ln_y;
        let (hi, lo) = if p > q { (p, q) } else { (q, p) };
        let bracket = hi + (lo - hi).exp().ln_1p();
        let base = self.u * ln_x + self.v * ln_y + bracket;
        if self.positive_delta {
            base
        } else {
            -base
        }
    }

    pub fn value(&self, z: PhaseState) -> f64 {
        if z.x == 0.0 || z.y == 0.0 {
            return 0.0;
        }
        self.sign() * self.ln_abs(z.x.ln(), z.y.ln()).exp()
    }

    /// `L(d, d)`.
    pub fn on_diagonal(&self, d: f64) -> f64 {
        self.value(PhaseState::new(d, d))
    }
}

pub fn first_integral(p: &SaddleParams, z: PhaseState) -> Result<f64> {
    Ok(FirstIntegral::new(p)?.value(z))
}
