//! The return-time tail `mu(phi > n)` over the entry strip, computed by
//! quadrature and by Monte Carlo, and its power-law fit.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local_flow::{exit_time_flow_capped, ExitTimeSolver, IntegratorConfig, Perturbation, PhaseState};
use crate::numeric::quad::gauss_vec_checked;
use crate::numeric::roots::{newton_bracketed, RootTol};
use crate::params::{DomainRect, SaddleParams};

const WEIGHT_NORM_TOL: f64 = 1e-12;
const OUTER_RTOL: f64 = 1e-10;
const OUTER_ORDER: usize = 10;
const OUTER_MAX_PANELS: usize = 256;
const MC_CHUNK: usize = 1024;

fn horner(c: &[f64], y: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * y + a)
}

/// `∫_a^b` of the polynomial with ascending coefficients `c`.
fn poly_integral(c: &[f64], a: f64, b: f64) -> f64 {
    let prim = |y: f64| c.iter().enumerate().rev().fold(0.0, |acc, (i, &a)| acc * y + a / (i + 1) as f64) * y;
    prim(b) - prim(a)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Surrogate for the invariant density on the entry strip
/// `{eta0 <= y <= eta1, 0 < x <= x_max(y)}`: unstable-direction jets
/// `h_j(y)` at `x = 0` and a stable-direction weight `w(y)`, all polynomials
/// in `y` with ascending coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryDensity {
    pub eta_range: [f64; 2],
    pub h_coeffs: Vec<Vec<f64>>,
    pub stable_weight: Vec<f64>,
}

impl EntryDensity {
    /// Normalizes `stable_weight` to unit mass on `eta_range`.
    pub fn new(eta_range: [f64; 2], h_coeffs: Vec<Vec<f64>>, stable_weight: Vec<f64>) -> Result<Self> {
        let [a, b] = eta_range;
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(Error::InvalidArgument(format!("entry range [{a}, {b}] is not an interval of positive reals")));
        }
        let mass = poly_integral(&stable_weight, a, b);
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidArgument(format!("stable weight has non-positive mass {mass}")));
        }
        let stable_weight = stable_weight.iter().map(|c| c / mass).collect();
        Ok(Self { eta_range, h_coeffs, stable_weight })
    }

    /// `h = 1` and uniform stable weight on `[eta0, eta1]`.
    pub fn uniform(rect: &DomainRect, kappa: u32) -> Self {
        let mut h_coeffs = vec![vec![]; kappa as usize];
        h_coeffs[0] = vec![1.0];
        Self { eta_range: [rect.eta0, rect.eta1], h_coeffs, stable_weight: vec![1.0 / (rect.eta1 - rect.eta0)] }
    }

    pub fn validate(&self, kappa: u32) -> Result<()> {
        let [a, b] = self.eta_range;
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(Error::InvalidArgument(format!("entry range [{a}, {b}] is not an interval of positive reals")));
        }
        if self.h_coeffs.len() != kappa as usize {
            return Err(Error::InvalidArgument(format!(
                "expected {kappa} density jets h_0..h_{}, got {}",
                kappa - 1,
                self.h_coeffs.len()
            )));
        }
        let all = self.h_coeffs.iter().flatten().chain(&self.stable_weight);
        if all.clone().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("density coefficients must be finite".into()));
        }
        for i in 0..=1000 {
            let y = a + (b - a) * i as f64 / 1000.0;
            if !(self.h_jet(0, y) > 0.0) {
                return Err(Error::InvalidArgument(format!("h_0({y}) is not positive")));
            }
            if self.weight(y) < 0.0 {
                return Err(Error::InvalidArgument(format!("stable weight is negative at {y}")));
            }
        }
        let mass = poly_integral(&self.stable_weight, a, b);
        if (mass - 1.0).abs() > WEIGHT_NORM_TOL {
            return Err(Error::InvalidArgument(format!("stable weight integrates to {mass}, not 1")));
        }
        Ok(())
    }

    /// `h_j(y)`; zero beyond the supplied jets.
    pub fn h_jet(&self, j: usize, y: f64) -> f64 {
        self.h_coeffs.get(j).map_or(0.0, |c| horner(c, y))
    }

    /// `h(x, y) = Σ h_j(y) x^j / j!`.
    pub fn h(&self, x: f64, y: f64) -> f64 {
        (0..self.h_coeffs.len()).map(|j| self.h_jet(j, y) * x.powi(j as i32) / factorial(j)).sum()
    }

    /// `∫_0^xi h(x, y) dx`.
    pub fn unstable_mass(&self, y: f64, xi: f64) -> f64 {
        (0..self.h_coeffs.len()).map(|j| self.h_jet(j, y) * xi.powi(j as i32 + 1) / factorial(j + 1)).sum()
    }

    pub fn weight(&self, y: f64) -> f64 {
        horner(&self.stable_weight, y)
    }

    fn weight_cdf(&self, y: f64) -> f64 {
        poly_integral(&self.stable_weight, self.eta_range[0], y)
    }

    fn is_constant_h(&self) -> bool {
        self.h_coeffs.iter().skip(1).flatten().all(|&c| c == 0.0) && self.h_coeffs[0].iter().skip(1).all(|&c| c == 0.0)
    }

    fn is_constant_weight(&self) -> bool {
        self.stable_weight.iter().skip(1).all(|&c| c == 0.0)
    }

    /// Inverse of the stable-weight CDF.
    fn sample_y(&self, u: f64) -> Result<f64> {
        let [a, b] = self.eta_range;
        if self.is_constant_weight() {
            return Ok(a + u * (b - a));
        }
        newton_bracketed(|y| (self.weight_cdf(y) - u, self.weight(y)), a, b, None, RootTol::default())
    }

    /// Inverse of `x -> ∫_0^x h(., y) / ∫_0^x_max h(., y)`.
    fn sample_x(&self, y: f64, x_max: f64, u: f64) -> Result<f64> {
        if self.is_constant_h() {
            return Ok(u * x_max);
        }
        let target = u * self.unstable_mass(y, x_max);
        newton_bracketed(|x| (self.unstable_mass(y, x) - target, self.h(x, y)), 0.0, x_max, None, RootTol::default())
    }
}

/// Barycentric interpolation at Chebyshev points of the first kind.
#[derive(Debug, Clone)]
struct Chebyshev {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl Chebyshev {
    fn new<F: FnMut(f64) -> Result<f64>>(a: f64, b: f64, n: usize, mut f: F) -> Result<Self> {
        let mut nodes = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let th = std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
            let x = 0.5 * (a + b) + 0.5 * (b - a) * th.cos();
            nodes.push(x);
            values.push(f(x)?);
            weights.push(if i % 2 == 0 { th.sin() } else { -th.sin() });
        }
        Ok(Self { a, b, nodes, values, weights })
    }

    fn eval(&self, x: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for ((&xi, &fi), &wi) in self.nodes.iter().zip(&self.values).zip(&self.weights) {
            let d = x - xi;
            if d == 0.0 {
                return fi;
            }
            let t = wi / d;
            num += t * fi;
            den += t;
        }
        num / den
    }
}

/// The entry strip of one configuration with its exact exit-time solver.
#[derive(Debug, Clone)]
pub struct EntryStrip {
    solver: ExitTimeSolver,
    density: EntryDensity,
    ln_x_max: Chebyshev,
}

impl EntryStrip {
    pub fn new(p: &SaddleParams, rect: &DomainRect, density: EntryDensity) -> Result<Self> {
        density.validate(p.kappa)?;
        let solver = ExitTimeSolver::new(p, rect.zeta0)?;
        let [a, b] = density.eta_range;
        let ln_x_max = Chebyshev::new(a, b, 40, |y| Ok(solver.invert(y, 1.0)?.ln()))?;
        for i in 0..16 {
            let y = a + (b - a) * (i as f64 + 0.37) / 16.0;
            let exact = solver.invert(y, 1.0)?.ln();
            if (ln_x_max.eval(y) - exact).abs() > 1e-12 * exact.abs().max(1.0) {
                return Err(Error::Consistency(format!("x_max interpolation is inaccurate at y = {y}")));
            }
        }
        Ok(Self { solver, density, ln_x_max })
    }

    pub fn solver(&self) -> &ExitTimeSolver {
        &self.solver
    }

    pub fn density(&self) -> &EntryDensity {
        &self.density
    }

    /// Right edge of the strip, `x_max(y) = xi(y, 1)`.
    pub fn x_max(&self, y: f64) -> f64 {
        debug_assert!(y >= self.ln_x_max.a && y <= self.ln_x_max.b);
        self.ln_x_max.eval(y).exp()
    }

    /// `μ` of the whole strip.
    pub fn entry_mass(&self) -> Result<f64> {
        let [a, b] = self.density.eta_range;
        let d = &self.density;
        let v = gauss_vec_checked(|y| vec![d.weight(y) * d.unstable_mass(y, self.x_max(y))], a, b, OUTER_ORDER, OUTER_RTOL, OUTER_MAX_PANELS)?;
        Ok(v[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub n_grid: Vec<u64>,
    pub mass: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stderr: Option<Vec<f64>>,
}

impl TailTable {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.len() != self.mass.len() || self.stderr.as_ref().is_some_and(|s| s.len() != self.mass.len()) {
            return Err(Error::InvalidArgument("tail table columns have different lengths".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("tail table grid is not strictly increasing".into()));
        }
        if let Some(i) = self.mass.iter().position(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::InvalidArgument(format!("mass[{i}] = {} outside [0, 1]", self.mass[i])));
        }
        if let Some(i) = self.mass.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::NonMonotoneInput { index: i + 1 });
        }
        Ok(())
    }

    pub fn is_contiguous(&self) -> bool {
        self.n_grid.windows(2).all(|w| w[1] == w[0] + 1)
    }

    /// Mass at `n`, if `n` is on the grid.
    pub fn at(&self, n: u64) -> Option<f64> {
        self.n_grid.binary_search(&n).ok().map(|i| self.mass[i])
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n_grid: self.n_grid.clone(),
            mass: self.mass.iter().map(|m| m * factor).collect(),
            stderr: self.stderr.as_ref().map(|s| s.iter().map(|e| e * factor).collect()),
        }
    }
}

/// Geometric grid from `n_min` to `n_max` with `per_decade` points per
/// decade, rounded to integers and deduplicated.
pub fn geometric_grid(n_min: u64, n_max: u64, per_decade: usize) -> Vec<u64> {
    let n_min = n_min.max(1);
    let decades = (n_max as f64 / n_min as f64).log10();
    let steps = (decades * per_decade as f64).round().max(0.0) as usize;
    let mut out: Vec<u64> = (0..=steps)
        .map(|i| (n_min as f64 * 10f64.powf(i as f64 / per_decade as f64)).round() as u64)
        .collect();
    out.push(n_max);
    out.sort_unstable();
    out.dedup();
    out.retain(|&n| n >= n_min && n <= n_max);
    out
}

pub fn default_n_grid() -> Vec<u64> {
    geometric_grid(1, 100_000, 32)
}

/// `μ(φ > n) = ∫ w(y) ∫_0^{ξ(y, n)} h(x, y) dx dy`, with `ξ(y, n)` the exact
/// inverse exit time capped at the strip edge. The grid must be ascending.
pub fn semi_analytic_tail(strip: &EntryStrip, n_grid: &[u64]) -> Result<TailTable> {
    semi_analytic_tail_tol(strip, n_grid, OUTER_RTOL)
}

pub fn semi_analytic_tail_tol(strip: &EntryStrip, n_grid: &[u64], rtol: f64) -> Result<TailTable> {
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n grid must be strictly increasing".into()));
    }
    let [a, b] = strip.density.eta_range;
    let failure = std::sync::Mutex::new(None);
    let integrand = |y: f64| -> Vec<f64> {
        let x_max = strip.solver.invert(y, 1.0);
        let mut out = Vec::with_capacity(n_grid.len());
        let mut prev = match x_max {
            Ok(x) => x,
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                return vec![f64::NAN; n_grid.len()];
            }
        };
        let w = strip.density.weight(y);
        for &n in n_grid {
            let xi = if n <= 1 {
                prev
            } else {
                match strip.solver.invert_near(y, n as f64, Some(prev)) {
                    Ok(x) => x,
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                        f64::NAN
                    }
                }
            };
            if xi.is_finite() {
                prev = xi;
            }
            out.push(w * strip.density.unstable_mass(y, xi));
        }
        out
    };
    let result = gauss_vec_checked(integrand, a, b, OUTER_ORDER, rtol, OUTER_MAX_PANELS);
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let mass = result?;
    Ok(TailTable { n_grid: n_grid.to_vec(), mass, stderr: None })
}

#[derive(Debug, Clone)]
pub struct MonteCarloOptions {
    pub samples: usize,
    pub seed: Option<u64>,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    pub integrator: IntegratorConfig,
}

/// Fraction of entry points, drawn from the normalized entry density, whose
/// exit time exceeds `n`. The exact solver is used for the unperturbed
/// field, time stepping otherwise.
pub fn monte_carlo_tail(
    p: &SaddleParams,
    pert: &Perturbation,
    strip: &EntryStrip,
    n_grid: &[u64],
    opts: &MonteCarloOptions,
) -> Result<TailTable> {
    let seed = opts.seed.ok_or(Error::SeedRequired)?;
    if opts.samples < 1000 {
        return Err(Error::InvalidArgument(format!("need at least 1000 samples, got {}", opts.samples)));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n grid must be strictly increasing".into()));
    }
    pert.validate(p.kappa)?;
    let horizon = n_grid.last().map_or(0.0, |&n| n as f64) + 1.0;
    let zeta0 = strip.solver.zeta0();
    let chunks = opts.samples.div_ceil(MC_CHUNK);

    let run_chunk = |c: usize| -> Result<Vec<u64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let len = MC_CHUNK.min(opts.samples - c * MC_CHUNK);
        let mut times = Vec::with_capacity(len);
        for _ in 0..len {
            let y = strip.density.sample_y(rng.gen::<f64>())?;
            let x_max = strip.x_max(y);
            let x = strip.density.sample_x(y, x_max, rng.gen::<f64>())?;
            let t = if x <= 0.0 {
                f64::INFINITY
            } else if pert.is_empty() {
                strip.solver.exit_time(x, y)?
            } else {
                exit_time_flow_capped(p, pert, PhaseState::new(x, y), zeta0, horizon, &opts.integrator)?
                    .unwrap_or(f64::INFINITY)
            };
            times.push(t);
        }
        times.sort_by(f64::total_cmp);
        Ok(n_grid.iter().map(|&n| (times.len() - times.partition_point(|&t| t <= n as f64)) as u64).collect())
    };

    let per_chunk: Vec<Vec<u64>> = match opts.jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
            pool.install(|| (0..chunks).into_par_iter().map(run_chunk).collect::<Result<_>>())?
        }
        None => (0..chunks).into_par_iter().map(run_chunk).collect::<Result<_>>()?,
    };
    let mut counts = vec![0u64; n_grid.len()];
    for c in &per_chunk {
        for (acc, v) in counts.iter_mut().zip(c) {
            *acc += v;
        }
    }
    let total = opts.samples as f64;
    let mass: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
    let stderr = mass.iter().map(|m| (m * (1.0 - m) / total).sqrt()).collect();
    Ok(TailTable { n_grid: n_grid.to_vec(), mass, stderr: Some(stderr) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    PowerLaw,
    /// Adds a `1/n` term to `ln mass`.
    SecondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegVarFit {
    pub beta_hat: f64,
    #[serde(rename = "C0_hat")]
    pub c0_hat: f64,
    pub fit_range: [f64; 2],
    pub residual_rms: f64,
    pub points: usize,
    /// Coefficient `c` in `ln mass ≈ ln C0 - beta ln n - c / n`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub correction: Option<f64>,
}

/// Least squares of `ln mass` on `ln n` over grid points in `fit_range`.
///
/// Tables with a standard-error column are treated as Monte Carlo tables of
/// nested events `{T > n}` from one sample: `ln mass` then has covariance
/// `s_min(i, j)` with `s_i = (stderr_i / mass_i)^2`, and the fit is the
/// corresponding generalized least squares. Points repeating the previous
/// mass carry no information and are dropped. Tables without errors get an
/// ordinary fit.
pub fn fit_regvar(t: &TailTable, fit_range: [f64; 2], mode: FitMode) -> Result<RegVarFit> {
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (i, (&n, &m)) in t.n_grid.iter().zip(&t.mass).enumerate() {
        let nf = n as f64;
        if nf < fit_range[0] || nf > fit_range[1] || !(m > 0.0) {
            continue;
        }
        let s = t.stderr.as_ref().map_or(0.0, |se| (se[i] / m).powi(2));
        if t.stderr.is_some() && rows.last().is_some_and(|r| r.1 == m.ln()) {
            continue;
        }
        rows.push((nf, m.ln(), s));
    }
    if rows.len() < 8 {
        return Err(Error::InsufficientData(format!("{} positive grid points in range, need 8", rows.len())));
    }
    let k = rows.len();
    let cols = if mode == FitMode::SecondOrder { 3 } else { 2 };
    let mut a = DMatrix::zeros(k, cols);
    let mut rhs = DVector::zeros(k);
    for (r, &(n, lm, _)) in rows.iter().enumerate() {
        a[(r, 0)] = 1.0;
        a[(r, 1)] = -n.ln();
        if cols == 3 {
            a[(r, 2)] = -1.0 / n;
        }
        rhs[r] = lm;
    }
    let generalized = t.stderr.is_some() && rows.iter().all(|r| r.2 > 0.0);
    if generalized {
        let cov = DMatrix::from_fn(k, k, |i, j| rows[i.min(j)].2);
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::InsufficientData("tail covariance is not positive definite".into()))?;
        let l = chol.l();
        a = l.solve_lower_triangular(&a).expect("Cholesky factor is invertible");
        rhs = l.solve_lower_triangular(&rhs).expect("Cholesky factor is invertible");
    }
    let svd = a.clone().svd(true, true);
    let sol = svd.solve(&rhs, 1e-14).map_err(|e| Error::InsufficientData(e.to_string()))?;
    let residual_rms = ((&a * &sol - &rhs).norm_squared() / k as f64).sqrt();
    Ok(RegVarFit {
        beta_hat: sol[1],
        c0_hat: sol[0].exp(),
        fit_range,
        residual_rms,
        points: k,
        correction: (cols == 3).then(|| sol[2]),
    })
}

/// `μ(φ = n) = mass(n - 1) - mass(n)` along a contiguous grid.
pub fn small_tail(t: &TailTable) -> Result<Vec<f64>> {
    if !t.is_contiguous() {
        return Err(Error::InvalidArgument("small tails need a contiguous n grid".into()));
    }
    t.mass
        .windows(2)
        .enumerate()
        .map(|(i, w)| if w[1] > w[0] { Err(Error::NonMonotoneInput { index: i + 1 }) } else { Ok(w[0] - w[1]) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p2() -> SaddleParams {
        SaddleParams::new(1.0, 1.0, 1.0, 2.0, 2)
    }

    #[test]
    fn density_normalization_and_jets() {
        let d = EntryDensity::new([0.2, 0.4], vec![vec![1.0, 2.0], vec![0.5]], vec![3.0, 1.0]).unwrap();
        assert!(d.validate(2).is_ok());
        assert_relative_eq!(poly_integral(&d.stable_weight, 0.2, 0.4), 1.0, max_relative = 1e-14);
        assert_relative_eq!(d.h(0.1, 0.3), 1.6 + 0.05, max_relative = 1e-14);
        assert_relative_eq!(d.unstable_mass(0.3, 0.1), 0.16 + 0.5 * 0.01 / 2.0, max_relative = 1e-14);
        assert!(d.validate(4).is_err());
    }

    #[test]
    fn samplers_invert_their_cdfs() {
        let d = EntryDensity::new([0.2, 0.4], vec![vec![1.0], vec![3.0]], vec![1.0, 5.0]).unwrap();
        let y = d.sample_y(0.3).unwrap();
        assert_relative_eq!(d.weight_cdf(y), 0.3, max_relative = 1e-12);
        let x = d.sample_x(0.3, 0.05, 0.7).unwrap();
        assert_relative_eq!(d.unstable_mass(0.3, x) / d.unstable_mass(0.3, 0.05), 0.7, max_relative = 1e-12);
    }

    #[test]
    fn geometric_grid_shape() {
        let g = geometric_grid(1, 1000, 32);
        assert_eq!(g[0], 1);
        assert_eq!(*g.last().unwrap(), 1000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g.len() > 60 && g.len() <= 97);
    }

    #[test]
    fn exact_power_law_fit() {
        let n_grid: Vec<u64> = geometric_grid(10, 100_000, 8);
        let mass = n_grid.iter().map(|&n| 0.7 * (n as f64).powf(-0.75)).collect();
        let t = TailTable { n_grid, mass, stderr: None };
        let f = fit_regvar(&t, [10.0, 1e5], FitMode::PowerLaw).unwrap();
        assert!((f.beta_hat - 0.75).abs() < 1e-10);
        assert!((f.c0_hat - 0.7).abs() < 1e-10);
        let f2 = fit_regvar(&t, [10.0, 1e5], FitMode::SecondOrder).unwrap();
        assert!(f2.correction.unwrap().abs() < 1e-8);
        assert!(matches!(fit_regvar(&t, [10.0, 20.0], FitMode::PowerLaw), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn small_tail_examples() {
        let t = TailTable { n_grid: (5..10).collect(), mass: vec![0.5; 5], stderr: None };
        assert_eq!(small_tail(&t).unwrap(), vec![0.0; 4]);
        let mass: Vec<f64> = (5..10).map(|n| (n as f64).powf(-0.75)).collect();
        let t = TailTable { n_grid: (5..10).collect(), mass: mass.clone(), stderr: None };
        let s = small_tail(&t).unwrap();
        assert_relative_eq!(s.iter().sum::<f64>(), mass[0] - mass[4], max_relative = 1e-14);
        let bad = TailTable { n_grid: (5..8).collect(), mass: vec![0.5, 0.6, 0.4], stderr: None };
        assert!(matches!(small_tail(&bad), Err(Error::NonMonotoneInput { index: 1 })));
    }

    #[test]
    fn semi_analytic_small_n_is_whole_strip() {
        let p = p2();
        let rect = DomainRect::default_for(&p).unwrap();
        let strip = EntryStrip::new(&p, &rect, EntryDensity::uniform(&rect, p.kappa)).unwrap();
        let t = semi_analytic_tail(&strip, &[0, 1, 2, 10]).unwrap();
        let whole = strip.entry_mass().unwrap();
        assert_relative_eq!(t.mass[0], whole, max_relative = 1e-10);
        assert_relative_eq!(t.mass[1], whole, max_relative = 1e-10);
        assert!(t.mass[2] < t.mass[1] && t.mass[3] < t.mass[2]);
        t.validate().unwrap();
    }

    #[test]
    fn monte_carlo_requires_seed_and_is_reproducible() {
        let p = p2();
        let rect = DomainRect::default_for(&p).unwrap();
        let strip = EntryStrip::new(&p, &rect, EntryDensity::uniform(&rect, p.kappa)).unwrap();
        let none = Perturbation::none();
        let mut opts = MonteCarloOptions { samples: 3000, seed: None, jobs: Some(1), integrator: IntegratorConfig::default() };
        assert!(matches!(monte_carlo_tail(&p, &none, &strip, &[0, 10], &opts), Err(Error::SeedRequired)));
        opts.seed = Some(7);
        let a = monte_carlo_tail(&p, &none, &strip, &[0, 10, 100], &opts).unwrap();
        opts.jobs = Some(3);
        let b = monte_carlo_tail(&p, &none, &strip, &[0, 10, 100], &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mass[0], 1.0);
    }
}
