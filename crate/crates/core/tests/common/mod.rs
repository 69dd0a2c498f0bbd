#![allow(dead_code)]

use saddle_core::local_flow::{IntegratorConfig, Monomial, Perturbation};
use saddle_core::SaddleParams;

pub fn p1() -> SaddleParams {
    SaddleParams::new(1.0, 3.0, 2.0, 1.0, 2)
}

pub fn p2() -> SaddleParams {
    SaddleParams::new(1.0, 1.0, 1.0, 2.0, 2)
}

pub fn tight() -> IntegratorConfig {
    IntegratorConfig { rel_tol: 1e-12, ..IntegratorConfig::default() }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Degree-3 perturbation with coefficients of size 0.1.
pub fn small_cubic() -> Perturbation {
    let m = |i, j, coeff| Monomial { i, j, coeff };
    Perturbation::new(vec![m(3, 0, 0.1), m(1, 2, -0.1)], vec![m(2, 1, 0.1), m(0, 3, 0.1)], 2).unwrap()
}
