//! Adaptive Gauss-Kronrod and composite Gauss-Legendre quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadTol {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl QuadTol {
    pub fn rel(rel: f64) -> Self {
        Self { abs: 0.0, rel, max_intervals: 2000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// One 15-point Kronrod panel with its embedded 7-point Gauss estimate.
/// Returns `(integral, error estimate)`.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = kronrod.abs();
    let mut fv = [0.0; 14];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv[2 * j] - mean).abs() + (fv[2 * j + 1] - mean).abs());
    }
    let result = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod integration over `[a, b]`, starting from
/// `initial` equal panels and bisecting the worst panel until the summed
/// error estimate meets `max(abs, rel * |I|)`.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, initial: usize, tol: QuadTol) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let initial = initial.max(1);
    let mut heap = BinaryHeap::with_capacity(initial * 4);
    let width = (b - a) / initial as f64;
    let mut evaluations = 0;
    for i in 0..initial {
        let lo = a + width * i as f64;
        let hi = if i + 1 == initial { b } else { a + width * (i + 1) as f64 };
        let (value, error) = gk15(&mut f, lo, hi);
        evaluations += 15;
        heap.push(Panel { a: lo, b: hi, value, error });
    }
    loop {
        let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target {
            return Ok(QuadResult { value, error, evaluations });
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::QuadratureFailure { value, error });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // cannot split further in floating point
            return Err(Error::QuadratureFailure { value, error });
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evaluations += 30;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A composite Gauss-Legendre rule on `[a, b]`: `panels` equal panels of
/// `order` nodes each, flattened into `(node, weight)` pairs.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let width = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let lo = a + width * p as f64;
            let c = lo + 0.5 * width;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(c + 0.5 * width * xi);
                weights.push(0.5 * width * wi);
            }
        }
        Self { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Integrates a vector-valued `f` over `[a, b]` with composite Gauss rules
/// of `order` nodes, doubling the panel count until two successive results
/// agree to `rtol` in every component (relative to that component's size,
/// or to the largest component when a component is tiny).
pub fn gauss_vec_checked<F>(f: F, a: f64, b: f64, order: usize, rtol: f64, max_panels: usize) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Vec<f64>,
{
    let mut panels = 2;
    let mut prev = integrate_vec(&f, &CompositeRule::new(a, b, panels, order));
    loop {
        panels *= 2;
        let next = integrate_vec(&f, &CompositeRule::new(a, b, panels, order));
        let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let worst = prev
            .iter()
            .zip(&next)
            .map(|(p, n)| (p - n).abs() / n.abs().max(1e-300).max(1e-6 * scale))
            .fold(0.0f64, f64::max);
        if worst <= rtol {
            return Ok(next);
        }
        if panels >= max_panels {
            let i = (0..next.len()).max_by(|&i, &j| (next[i] - prev[i]).abs().total_cmp(&(next[j] - prev[j]).abs())).unwrap_or(0);
            return Err(Error::QuadratureFailure { value: next[i], error: (next[i] - prev[i]).abs() });
        }
        prev = next;
    }
}

fn integrate_vec<F: Fn(f64) -> Vec<f64>>(f: &F, rule: &CompositeRule) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let v = f(x);
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        for (a, vi) in acc.iter_mut().zip(&v) {
            *a += w * vi;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for n in [1, 2, 5, 8, 16, 33] {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let rule = CompositeRule::new(0.0, 2.0, 1, 6);
        // degree 11 is the highest exact degree for 6 nodes
        let got = rule.integrate(|x| x.powi(11));
        assert_relative_eq!(got, 2f64.powi(12) / 12.0, max_relative = 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_peak() {
        let r = adaptive(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1, QuadTol::rel(1e-12)).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert_relative_eq!(r.value, exact, max_relative = 1e-12);
    }

    #[test]
    fn vector_rule_converges_per_component() {
        let v = gauss_vec_checked(|x| vec![x.sqrt(), (3.0 * x).exp()], 0.5, 2.0, 8, 1e-13, 256).unwrap();
        assert_relative_eq!(v[0], (2f64.powf(1.5) - 0.5f64.powf(1.5)) / 1.5, max_relative = 1e-13);
        assert_relative_eq!(v[1], ((6f64).exp() - 1.5f64.exp()) / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn adaptive_exponential_tail() {
        let r = adaptive(|s: f64| (-s).exp(), 0.0, 60.0, 4, QuadTol::rel(1e-13)).unwrap();
        assert_relative_eq!(r.value, 1.0 - (-60f64).exp(), max_relative = 1e-13);
    }
}
