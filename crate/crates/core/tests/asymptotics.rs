mod common;

use common::{p2, rel};
use proptest::prelude::*;
use saddle_core::asymptotics::*;
use saddle_core::local_flow::ExitTimeSolver;
use saddle_core::{derive_constants, SaddleParams};
use statrs::function::beta::beta;

fn trapezoid_in_log(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let h = (hi - lo) / panels as f64;
    let g = |s: f64| {
        let m = s.exp();
        f(m) * m
    };
    let inner: f64 = (1..panels).map(|i| g(lo + h * i as f64)).sum();
    h * (inner + 0.5 * (g(lo) + g(hi)))
}

#[test]
fn m_integral_matches_brute_force_trapezoid() {
    let d = derive_constants(&p2()).unwrap();
    let brute = trapezoid_in_log(|m| (2.0 + 3.0 * m * m).powf(-7.0 / 6.0), -40.0, 40.0, 1_000_000);
    assert!(rel(m_integral(&d, Orientation::Xi).unwrap(), brute) <= 1e-10);
}

#[test]
fn m_integral_matches_beta_function() {
    for p in [p2(), SaddleParams::new(1.0, 3.0, 2.0, 1.0, 2), SaddleParams::new(0.7, 2.5, 1.3, 0.4, 4)] {
        let d = derive_constants(&p).unwrap();
        let k = d.kappa_f();
        let q = d.bracket_exponent();
        let closed = |alpha: f64, lead: f64, other: f64| {
            (1.0 / k) * lead.powf(-q) * (lead / other).powf(alpha / k) * beta(alpha / k, q - alpha / k)
        };
        let xi = closed(1.0 / d.beta0, d.c0, d.c2);
        let omega = closed(1.0 / d.beta2, d.c2, d.c0);
        assert!(rel(m_integral(&d, Orientation::Xi).unwrap(), xi) <= 1e-11);
        assert!(rel(m_integral(&d, Orientation::Omega).unwrap(), omega) <= 1e-11);
    }
}

#[test]
fn leading_and_second_order_for_p2() {
    let p = p2();
    let d = derive_constants(&p).unwrap();
    let c = coeffs(&p, &d, 1.0, 1.0).unwrap();
    assert!(rel(c.xi1, 0.5625) <= 1e-15);
    for t in [1e3, 1e4, 1e5] {
        let ratio = invert_exit_time(&p, 1.0, 1.0, t).unwrap() * t.powf(0.75) / c.xi0;
        assert!(ratio >= 1.0 - 2.0 * c.xi1 / t - 1e-3 && ratio <= 1.0 - c.xi1 / (2.0 * t) + 1e-3, "T={t}: {ratio}");
    }
    let t = 1e5;
    let second = (1.0 - invert_exit_time(&p, 1.0, 1.0, t).unwrap() * t.powf(0.75) / c.xi0) * t;
    assert!((second - 0.5625).abs() <= 0.02, "{second}");
}

#[test]
fn omega_side_second_order() {
    let p = p2();
    let d = derive_constants(&p).unwrap();
    let (eta, zeta0) = (0.8, 0.5);
    let c = coeffs(&p, &d, eta, zeta0).unwrap();
    let solver = ExitTimeSolver::new(&p, zeta0).unwrap();
    let t = 1e5;
    let xi = solver.invert(eta, t).unwrap();
    let omega = solver.omega(xi, eta).unwrap();
    let second = (1.0 - omega * t.powf(d.beta0) / c.omega0) * t;
    assert!(rel(second, c.omega1) <= 0.01, "{second} vs {}", c.omega1);
}

#[test]
fn inversion_round_trips() {
    let solver = ExitTimeSolver::new(&p2(), 0.5).unwrap();
    for eta in [0.1, 0.3, 0.5] {
        for t in [1.5, 10.0, 1e3, 1e6, 1e8] {
            let xi = solver.invert(eta, t).unwrap();
            assert!(rel(solver.exit_time(xi, eta).unwrap(), t) <= 1e-10);
        }
    }
}

#[test]
fn diagonal_point_tracks_the_level_set() {
    let p = p2();
    let d = derive_constants(&p).unwrap();
    let c = coeffs(&p, &d, 0.5, 0.5).unwrap();
    let gaps: Vec<f64> = [1e2, 1e3, 1e4, 1e5].iter().map(|&t| delta_level_gap(&p, &d, &c, t).unwrap()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[3] < 1e-3);
}

fn valid_params() -> impl Strategy<Value = SaddleParams> {
    (0.2f64..3.0, 0.2f64..3.0, 0.2f64..3.0, 0.2f64..3.0)
        .prop_map(|(a0, a2, b0, b2)| SaddleParams::new(a0, a2, b0, b2, 2))
        .prop_filter("delta away from zero", |p| p.delta().abs() > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn omega_coefficients_are_dual_xi_coefficients(p in valid_params(), eta in 0.2f64..1.0, zeta0 in 0.2f64..1.0) {
        let d = derive_constants(&p).unwrap();
        let c = coeffs(&p, &d, eta, zeta0).unwrap();
        let q = SaddleParams::new(p.b2, p.b0, p.a2, p.a0, p.kappa);
        let dq = derive_constants(&q).unwrap();
        let cq = coeffs(&q, &dq, zeta0, eta).unwrap();
        prop_assert!(rel(c.omega0, cq.xi0) <= 1e-9);
        prop_assert!(rel(c.omega1, cq.xi1) <= 1e-12);
        prop_assert!(rel(c.beta0, cq.beta2) <= 1e-14);
    }
}
