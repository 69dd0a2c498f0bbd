mod common;

use common::{p2, rel};
use saddle_core::asymptotics::{tail_coeffs, tail_expansion, tail_remainder_order};
use saddle_core::local_flow::{IntegratorConfig, Perturbation};
use saddle_core::return_stats::*;
use saddle_core::{derive_constants, DomainRect};

fn p2_strip() -> (DomainRect, EntryStrip) {
    let p = p2();
    let rect = DomainRect::default_for(&p).unwrap();
    let strip = EntryStrip::new(&p, &rect, EntryDensity::uniform(&rect, p.kappa)).unwrap();
    (rect, strip)
}

#[test]
fn constant_density_gives_h1_equal_c0() {
    let p = p2();
    let (rect, strip) = p2_strip();
    let tc = tail_coeffs(&p, &derive_constants(&p).unwrap(), strip.density(), rect.zeta0).unwrap();
    assert!(rel(tc.h[0], tc.c0) <= 1e-9);
    assert_eq!(tc.h[1], 0.0);
    assert_eq!(tc.hhat[1], 0.0);
}

#[test]
fn second_coefficient_is_linear_in_the_first_jet() {
    let p = p2();
    let d = derive_constants(&p).unwrap();
    let rect = DomainRect::default_for(&p).unwrap();
    let with = |s: f64| {
        let dens = EntryDensity::new([rect.eta0, rect.eta1], vec![vec![1.0], vec![s, 0.5 * s]], vec![1.0]).unwrap();
        tail_coeffs(&p, &d, &dens, rect.zeta0).unwrap()
    };
    let (a, b) = (with(1.0), with(3.0));
    assert!(rel(b.h[1], 3.0 * a.h[1]) <= 1e-12);
    assert!(rel(b.hhat[1], 3.0 * a.hhat[1]) <= 1e-12);
    assert!(rel(b.c0, a.c0) <= 1e-14 && rel(b.h[0], a.h[0]) <= 1e-14);
}

#[test]
fn expansion_remainder_stays_bounded() {
    let p = p2();
    let (rect, strip) = p2_strip();
    let tc = tail_coeffs(&p, &derive_constants(&p).unwrap(), strip.density(), rect.zeta0).unwrap();
    let order = tail_remainder_order(&tc);
    assert_eq!(order, 2.25);
    let grid = geometric_grid(1_000, 100_000, 16);
    let t = semi_analytic_tail(&strip, &grid).unwrap();
    let scaled: Vec<f64> =
        grid.iter().zip(&t.mass).map(|(&n, m)| (m - tail_expansion(&tc, n as f64)) * (n as f64).powf(order)).collect();
    let first = scaled[0].abs();
    assert!(scaled.iter().all(|s| s.abs() <= 2.0 * first), "{scaled:?}");
    let growing = scaled.windows(2).filter(|w| w[1].abs() > w[0].abs()).count();
    assert!(growing < scaled.len() / 2);
}

#[test]
fn semi_analytic_fits_tighten_on_later_ranges() {
    let (_, strip) = p2_strip();
    let t = semi_analytic_tail(&strip, &default_n_grid()).unwrap();
    let err = |lo: f64, hi: f64| (fit_regvar(&t, [lo, hi], FitMode::PowerLaw).unwrap().beta_hat - 0.75).abs();
    let (wide, mid, late) = (err(1e2, 1e4), err(1e3, 1e5), err(1e4, 1e5));
    assert!(late < mid && mid < wide);
    assert!(mid <= 0.015);
}

#[test]
fn monte_carlo_agrees_with_quadrature() {
    let p = p2();
    let (_, strip) = p2_strip();
    let grid = [0, 1, 3, 10, 30, 100, 300, 1000];
    let opts = MonteCarloOptions { samples: 100_000, seed: Some(20_261), jobs: None, integrator: IntegratorConfig::default() };
    let mc = monte_carlo_tail(&p, &Perturbation::none(), &strip, &grid, &opts).unwrap();
    let semi = semi_analytic_tail(&strip, &grid).unwrap().scaled(1.0 / strip.entry_mass().unwrap());
    let se = mc.stderr.as_ref().unwrap();
    for i in 0..grid.len() {
        let z = if se[i] > 0.0 { (mc.mass[i] - semi.mass[i]) / se[i] } else { 0.0 };
        assert!(z.abs() <= 3.0, "n={} mc={} semi={}", grid[i], mc.mass[i], semi.mass[i]);
    }
}
