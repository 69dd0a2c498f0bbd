//! Scalar renewal sequence driven by the return-time distribution, and the
//! constants of its power-law decay.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::return_stats::{semi_analytic_tail_tol, EntryStrip, TailTable};

const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnDistribution {
    /// `p[n] = μ(φ = n)`; `p[0] = 0`.
    pub p: Vec<f64>,
    /// `μ(φ > N)` for the last grid point `N`.
    pub remainder: f64,
}

/// Differences a contiguous tail table starting at `n = 0`.
pub fn return_distribution(t: &TailTable) -> Result<ReturnDistribution> {
    if t.n_grid.first() != Some(&0) || !t.is_contiguous() {
        return Err(Error::InvalidArgument("return distribution needs a contiguous grid starting at 0".into()));
    }
    let mut p = vec![0.0; t.mass.len()];
    for n in 1..t.mass.len() {
        let d = t.mass[n - 1] - t.mass[n];
        if d < 0.0 {
            return Err(Error::NonMonotoneInput { index: n });
        }
        p[n] = d;
    }
    Ok(ReturnDistribution { p, remainder: *t.mass.last().unwrap_or(&0.0) })
}

/// Tail table on `0..=n_max` with `μ(φ > 0) = 1`: the strip carries the
/// exact tail for `n >= 1` and the rest of the unit mass returns at `n = 1`.
pub fn unit_mass_tail(strip: &EntryStrip, n_max: u64, rtol: f64) -> Result<TailTable> {
    let grid: Vec<u64> = (1..=n_max).collect();
    let strip_tail = semi_analytic_tail_tol(strip, &grid, rtol)?;
    let mut n_grid = vec![0];
    n_grid.extend(strip_tail.n_grid);
    let mut mass = vec![1.0];
    mass.extend(strip_tail.mass);
    let t = TailTable { n_grid, mass, stderr: None };
    t.validate()?;
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalSequence {
    pub p: Vec<f64>,
    pub u: Vec<f64>,
}

/// `u_0 = 1`, `u_n = Σ_{k=1}^n p_k u_{n-k}` for `n <= n_max`.
pub fn renewal_sequence(p: &[f64], n_max: usize) -> Result<RenewalSequence> {
    if p.len() <= n_max {
        return Err(Error::InvalidArgument(format!("p has {} entries, need {}", p.len(), n_max + 1)));
    }
    let mut u = vec![0.0; n_max + 1];
    u[0] = 1.0;
    for n in 1..=n_max {
        u[n] = (1..=n).map(|k| p[k] * u[n - k]).sum();
    }
    Ok(RenewalSequence { p: p[..=n_max].to_vec(), u })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingCoeffs {
    pub beta: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    pub d0: f64,
    pub q: usize,
    pub d_fit: Vec<f64>,
}

/// `q = max{j >= 0 : (j + 1) beta > j}`.
pub fn q_of_beta(beta: f64) -> usize {
    let mut j = 0usize;
    while ((j + 2) as f64) * beta > (j + 1) as f64 {
        j += 1;
    }
    j
}

/// `d0 = sin(pi beta) / (pi C0)` and `q`.
pub fn mixing_coeffs(c0: f64, beta: f64) -> Result<MixingCoeffs> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::BetaOutOfRange(beta));
    }
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::InvalidArgument(format!("C0 must be positive, got {c0}")));
    }
    Ok(MixingCoeffs { beta, c0, d0: (PI * beta).sin() / (PI * c0), q: q_of_beta(beta), d_fit: Vec::new() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HigherOrderFit {
    pub d: Vec<f64>,
    pub residual_rms: f64,
    pub condition: f64,
    pub points: usize,
}

/// Least squares of `u_n - d0 n^(beta-1)` on `n^((j+1)(beta-1))`,
/// `j = 1..terms`, over `n` in `fit_range`.
pub fn fit_higher_order_terms(u: &[f64], mc: &MixingCoeffs, fit_range: [usize; 2], terms: usize) -> Result<HigherOrderFit> {
    let [lo, hi] = fit_range;
    if hi >= u.len() || lo == 0 || lo > hi {
        return Err(Error::InvalidArgument(format!("fit range [{lo}, {hi}] not inside 1..{}", u.len())));
    }
    let rows = hi - lo + 1;
    let e = mc.beta - 1.0;
    let lead = |n: f64| mc.d0 * n.powf(e);
    if terms == 0 {
        let ss: f64 = (lo..=hi).map(|n| (u[n] - lead(n as f64)).powi(2)).sum();
        return Ok(HigherOrderFit { d: Vec::new(), residual_rms: (ss / rows as f64).sqrt(), condition: 1.0, points: rows });
    }
    if rows < terms + 1 {
        return Err(Error::InsufficientData(format!("{rows} points for {terms} coefficients")));
    }
    let mut a = DMatrix::zeros(rows, terms);
    let mut b = DVector::zeros(rows);
    for (r, n) in (lo..=hi).enumerate() {
        let nf = n as f64;
        for j in 1..=terms {
            a[(r, j - 1)] = nf.powf((j + 1) as f64 * e);
        }
        b[r] = u[n] - lead(nf);
    }
    // column scaling so the condition number reflects collinearity, not units
    let scales: Vec<f64> = (0..terms).map(|j| a.column(j).norm()).collect();
    for (j, s) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > CONDITION_LIMIT {
        return Err(Error::IllConditioned { condition });
    }
    let sol = svd.solve(&b, 0.0).map_err(|e| Error::InsufficientData(e.to_string()))?;
    let residual_rms = ((&a * &sol - &b).norm_squared() / rows as f64).sqrt();
    let d = sol.iter().zip(&scales).map(|(c, s)| c / s).collect();
    Ok(HigherOrderFit { d, residual_rms, condition, points: rows })
}

/// [`fit_higher_order_terms`] with `q` terms.
pub fn fit_higher_order(u: &[f64], mc: &MixingCoeffs, fit_range: [usize; 2]) -> Result<HigherOrderFit> {
    if mc.q == 0 {
        return Err(Error::BetaOutOfRange(mc.beta));
    }
    fit_higher_order_terms(u, mc, fit_range, mc.q)
}

/// `d0 n^(beta-1) + Σ_j d_j n^((j+1)(beta-1))`.
pub fn correlation_prediction(mc: &MixingCoeffs, n: f64) -> f64 {
    let e = mc.beta - 1.0;
    mc.d0 * n.powf(e) + mc.d_fit.iter().enumerate().map(|(j, d)| d * n.powf((j + 2) as f64 * e)).sum::<f64>()
}
