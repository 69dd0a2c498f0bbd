//! Asymptotic constants of the exit time and of the return-time tail.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_flow::reduction::m_integral_quadrature;
use crate::local_flow::{ExitTimeSolver, FirstIntegral};
use crate::numeric::quad::gauss_vec_checked;
use crate::params::{DerivedConstants, SaddleParams};
use crate::return_stats::EntryDensity;

pub use crate::local_flow::reduction::Orientation;

const M_INTEGRAL_RTOL: f64 = 1e-12;
const FOOTNOTE_RTOL: f64 = 1e-9;
const STRIP_RTOL: f64 = 1e-11;
const STRIP_ORDER: usize = 10;
const STRIP_MAX_PANELS: usize = 512;

/// `∫_0^∞ M^(1/beta0 - 1) (c0 + c2 M^k)^(-p) dM` (xi orientation) or
/// `∫_0^∞ M^(1/beta2 - 1) (c0 M^k + c2)^(-p) dM` (omega orientation).
pub fn m_integral(d: &DerivedConstants, orientation: Orientation) -> Result<f64> {
    m_integral_quadrature(d, orientation, M_INTEGRAL_RTOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCoeffs {
    pub eta: f64,
    pub zeta0: f64,
    pub beta0: f64,
    pub beta2: f64,
    pub xi0: f64,
    pub xi1: f64,
    pub omega0: f64,
    pub omega1: f64,
    pub m_integral_xi: f64,
    pub m_integral_omega: f64,
    /// Relative gap between `omega0` and the limit of `omega T^beta0`
    /// obtained by substituting `xi0` into the level-set identity.
    pub omega0_gap: f64,
}

/// `xi0 = c2^(-1/u) eta^(-a2/b2) I^beta2`.
pub fn xi0_of(p: &SaddleParams, d: &DerivedConstants, eta: f64, m_xi: f64) -> f64 {
    ((-1.0 / d.u) * d.c2.ln() - (p.a2 / p.b2) * eta.ln() + d.beta2 * m_xi.ln()).exp()
}

/// `xi1 = (beta2/k) (1/(a0 zeta0^k) + 1/(b2 eta^k))`.
pub fn xi1_of(p: &SaddleParams, d: &DerivedConstants, eta: f64, zeta0: f64) -> f64 {
    let k = d.kappa_f();
    d.beta2 / k * (1.0 / (p.a0 * zeta0.powf(k)) + 1.0 / (p.b2 * eta.powf(k)))
}

pub fn coeffs(p: &SaddleParams, d: &DerivedConstants, eta: f64, zeta0: f64) -> Result<AsymptoticCoeffs> {
    if !(eta > 0.0 && zeta0 > 0.0 && eta.is_finite() && zeta0.is_finite()) {
        return Err(Error::InvalidArgument(format!("eta = {eta} and zeta0 = {zeta0} must be positive")));
    }
    let m_xi = m_integral(d, Orientation::Xi)?;
    let m_omega = m_integral(d, Orientation::Omega)?;
    coeffs_with_integrals(p, d, eta, zeta0, m_xi, m_omega)
}

fn coeffs_with_integrals(
    p: &SaddleParams,
    d: &DerivedConstants,
    eta: f64,
    zeta0: f64,
    m_xi: f64,
    m_omega: f64,
) -> Result<AsymptoticCoeffs> {
    let k = d.kappa_f();
    let xi0 = xi0_of(p, d, eta, m_xi);
    let xi1 = xi1_of(p, d, eta, zeta0);
    let omega0 = ((-1.0 / d.v) * d.c0.ln() - (p.b0 / p.a0) * zeta0.ln() + d.beta0 * m_omega.ln()).exp();
    let omega1 = d.beta0 / k * (1.0 / (p.a0 * zeta0.powf(k)) + 1.0 / (p.b2 * eta.powf(k)));
    let footnote = (d.beta0 / d.beta2 * xi0.ln() + (1.0 + k / d.v) * eta.ln() - (p.b0 / p.a0) * zeta0.ln()
        + (d.c2 / d.c0).ln() / d.v)
        .exp();
    let omega0_gap = (footnote - omega0).abs() / omega0;
    if omega0_gap > FOOTNOTE_RTOL {
        return Err(Error::Consistency(format!(
            "omega0 = {omega0} disagrees with the level-set limit {footnote} (relative gap {omega0_gap:e})"
        )));
    }
    Ok(AsymptoticCoeffs {
        eta,
        zeta0,
        beta0: d.beta0,
        beta2: d.beta2,
        xi0,
        xi1,
        omega0,
        omega1,
        m_integral_xi: m_xi,
        m_integral_omega: m_omega,
        omega0_gap,
    })
}

/// `xi0 T^-beta2 (1 - xi1 / T)`.
pub fn xi_expansion(c: &AsymptoticCoeffs, t: f64) -> f64 {
    c.xi0 * t.powf(-c.beta2) * (1.0 - c.xi1 / t)
}

/// `omega0 T^-beta0 (1 - omega1 / T)`.
pub fn omega_expansion(c: &AsymptoticCoeffs, t: f64) -> f64 {
    c.omega0 * t.powf(-c.beta0) * (1.0 - c.omega1 / t)
}

/// The entry abscissa `xi` whose exit time to `x = zeta0` is exactly `t`.
pub fn invert_exit_time(p: &SaddleParams, eta: f64, zeta0: f64, t: f64) -> Result<f64> {
    ExitTimeSolver::new(p, zeta0)?.invert(eta, t)
}

/// `delta0 = xi0^(1/(k beta2)) eta^(1 - 1/(k beta2)) (c2/(c0+c2))^(1/(u+v+k))`.
pub fn delta0(d: &DerivedConstants, c: &AsymptoticCoeffs) -> f64 {
    let e = 1.0 / (d.kappa_f() * d.beta2);
    (e * c.xi0.ln() + (1.0 - e) * c.eta.ln() + (d.c2 / (d.c0 + d.c2)).ln() / d.total_degree()).exp()
}

/// Diagonal point `(delta, delta)` on the level set through the entry point
/// with exit time `t`, to first order in `1/t`.
pub fn delta_of_t(d: &DerivedConstants, c: &AsymptoticCoeffs, t: f64) -> f64 {
    let k = d.kappa_f();
    delta0(d, c) * t.powf(-1.0 / k) * (1.0 + c.xi1 / (k * d.beta2) / t)
}

/// Relative gap `|L(delta, delta) / L(xi, eta) - 1|` between the diagonal
/// point predicted by [`delta_of_t`] and the exact entry point for `t`.
pub fn delta_level_gap(p: &SaddleParams, d: &DerivedConstants, c: &AsymptoticCoeffs, t: f64) -> Result<f64> {
    let fi = FirstIntegral::from_constants(p, d);
    let xi = ExitTimeSolver::with_constants(p, d, c.zeta0)?.invert(c.eta, t)?;
    let dl = delta_of_t(d, c, t);
    let ln_ratio = fi.ln_abs(dl.ln(), dl.ln()) - fi.ln_abs(xi.ln(), c.eta.ln());
    Ok(ln_ratio.exp_m1().abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCoeffs {
    pub c0: f64,
    /// `H_1 ... H_k`.
    pub h: Vec<f64>,
    /// `Ĥ_1 ... Ĥ_k`.
    pub hhat: Vec<f64>,
    pub beta: f64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `C0`, `H_j` and `Ĥ_j` as integrals over the entry strip against the
/// stable weight.
pub fn tail_coeffs(p: &SaddleParams, d: &DerivedConstants, density: &EntryDensity, zeta0: f64) -> Result<TailCoeffs> {
    density.validate(p.kappa)?;
    let m_xi = m_integral(d, Orientation::Xi)?;
    let kappa = p.kappa as usize;
    let [y0, y1] = density.eta_range;
    // components: C0, H_1..H_k, Ĥ_1..Ĥ_k
    let integrand = |y: f64| {
        let w = density.weight(y);
        let x0 = xi0_of(p, d, y, m_xi);
        let x1 = xi1_of(p, d, y, zeta0);
        let mut out = Vec::with_capacity(1 + 2 * kappa);
        out.push(w * x0 * density.h_jet(0, y));
        for j in 1..=kappa {
            out.push(w * density.h_jet(j - 1, y) * x0.powi(j as i32) / factorial(j));
        }
        for j in 1..=kappa {
            out.push(w * density.h_jet(j - 1, y) * x0.powi(j as i32) * x1 / factorial(j - 1));
        }
        out
    };
    let v = gauss_vec_checked(integrand, y0, y1, STRIP_ORDER, STRIP_RTOL, STRIP_MAX_PANELS)?;
    Ok(TailCoeffs { c0: v[0], h: v[1..=kappa].to_vec(), hhat: v[kappa + 1..].to_vec(), beta: d.beta2 })
}

/// `Σ H_j n^(-j beta) - Σ Ĥ_j n^(-(j beta + 1))`.
pub fn tail_expansion(tc: &TailCoeffs, n: f64) -> f64 {
    let mut sum = 0.0;
    for (j, (h, hh)) in tc.h.iter().zip(&tc.hhat).enumerate() {
        let e = (j + 1) as f64 * tc.beta;
        sum += h * n.powf(-e) - hh * n.powf(-(e + 1.0));
    }
    sum
}

/// The exponent `min((k+1) beta, 2 + beta)` of the remainder in
/// [`tail_expansion`].
pub fn tail_remainder_order(tc: &TailCoeffs) -> f64 {
    let k = tc.h.len() as f64;
    ((k + 1.0) * tc.beta).min(2.0 + tc.beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_constants, DomainRect};
    use approx::assert_relative_eq;

    fn p2() -> SaddleParams {
        SaddleParams::new(1.0, 1.0, 1.0, 2.0, 2)
    }

    #[test]
    fn p2_first_order_coefficients() {
        let p = p2();
        let d = derive_constants(&p).unwrap();
        let c = coeffs(&p, &d, 1.0, 1.0).unwrap();
        assert_relative_eq!(c.xi1, 0.5625, max_relative = 1e-15);
        assert_relative_eq!(c.omega1, 0.75, max_relative = 1e-15);
        assert_relative_eq!(c.m_integral_xi, c.m_integral_omega, max_relative = 1e-11);
        assert!(c.omega0_gap < 1e-12);
    }

    #[test]
    fn xi0_eta_scaling_is_exact() {
        let p = SaddleParams::new(1.0, 3.0, 2.0, 1.0, 2);
        let d = derive_constants(&p).unwrap();
        let a = coeffs(&p, &d, 0.3, 0.5).unwrap();
        let b = coeffs(&p, &d, 0.7, 0.5).unwrap();
        assert_relative_eq!(a.xi0 / b.xi0, (0.3f64 / 0.7).powf(-3.0), max_relative = 1e-13);
    }

    #[test]
    fn expansion_arithmetic() {
        let p = p2();
        let d = derive_constants(&p).unwrap();
        let c = coeffs(&p, &d, 1.0, 1.0).unwrap();
        assert_relative_eq!(xi_expansion(&c, 1e4), c.xi0 * 1e-3 * (1.0 - 0.5625e-4), max_relative = 1e-14);
    }

    #[test]
    fn delta_consistency_improves_with_t() {
        let p = p2();
        let d = derive_constants(&p).unwrap();
        let c = coeffs(&p, &d, 0.3, 0.35).unwrap();
        let g3 = delta_level_gap(&p, &d, &c, 1e3).unwrap();
        let g5 = delta_level_gap(&p, &d, &c, 1e5).unwrap();
        assert!(g5 < g3);
        assert!(g5 < 1e-3);
    }

    #[test]
    fn tail_coefficients_for_constant_density() {
        let p = p2();
        let d = derive_constants(&p).unwrap();
        let rect = DomainRect::default_for(&p).unwrap();
        let dens = EntryDensity::uniform(&rect, p.kappa);
        let tc = tail_coeffs(&p, &d, &dens, rect.zeta0).unwrap();
        assert_eq!(tc.h.len(), 2);
        assert_relative_eq!(tc.h[0], tc.c0, max_relative = 1e-15);
        assert_eq!(tc.h[1], 0.0);
        // Riemann oracle for H_1 = mean of xi0 over the strip
        let m = m_integral(&d, Orientation::Xi).unwrap();
        let n = 100_000;
        let (a, b) = (rect.eta0, rect.eta1);
        let mean = (0..n)
            .map(|i| xi0_of(&p, &d, a + (b - a) * (i as f64 + 0.5) / n as f64, m))
            .sum::<f64>()
            / n as f64;
        assert_relative_eq!(tc.c0, mean, max_relative = 1e-9);
    }

    #[test]
    fn tail_expansion_has_four_terms_for_kappa_two() {
        let tc = TailCoeffs { c0: 1.0, h: vec![1.0, 2.0], hhat: vec![3.0, 4.0], beta: 0.75 };
        let n: f64 = 16.0;
        let expected = n.powf(-0.75) + 2.0 * n.powf(-1.5) - 3.0 * n.powf(-1.75) - 4.0 * n.powf(-2.5);
        assert_relative_eq!(tail_expansion(&tc, n), expected, max_relative = 1e-15);
        assert_relative_eq!(tail_remainder_order(&tc), 2.25);
    }
}
