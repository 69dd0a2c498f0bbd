mod common;

use common::{p1, p2, rel, small_cubic, tight};
use saddle_core::local_flow::*;

#[test]
fn axes_follow_closed_forms_up_to_t10() {
    let none = Perturbation::none();
    for p in [p1(), p2()] {
        // x0 = 0.2 stays below blow-up before t = 10 for a0 <= 1
        for i in 0..=20 {
            let t = 0.5 * i as f64;
            let x = flow(&p, &none, PhaseState::new(0.2, 0.0), t, &tight()).unwrap();
            assert_eq!(x.y, 0.0);
            assert!(rel(x.x, unstable_axis_solution(&p, 0.2, t).unwrap()) <= 1e-9);
            let y = flow(&p, &none, PhaseState::new(0.0, 0.4), t, &tight()).unwrap();
            assert_eq!(y.x, 0.0);
            assert!(rel(y.y, stable_axis_solution(&p, 0.4, t).unwrap()) <= 1e-9);
        }
    }
}

#[test]
fn first_integral_is_conserved_to_exit() {
    let p = p2();
    let none = Perturbation::none();
    let fi = FirstIntegral::new(&p).unwrap();
    for (x, y) in [(0.2, 0.5), (0.01, 0.4), (1e-4, 0.3)] {
        let z = PhaseState::new(x, y);
        let t = exit_time_flow(&p, &none, z, 0.5, &tight()).unwrap();
        let (_, traj) = flow_trajectory(&p, &none, z, t, &tight()).unwrap();
        let l0 = fi.value(z);
        let drift = traj.samples.iter().map(|(_, s)| rel(fi.value(*s), l0)).fold(0.0, f64::max);
        assert!(drift <= 1e-9, "drift {drift:e} from ({x}, {y})");
    }
}

#[test]
fn flow_is_reversible() {
    let none = Perturbation::none();
    for p in [p1(), p2()] {
        for (x, y) in [(0.05, 0.3), (0.2, 0.2), (0.01, 0.45)] {
            let z = PhaseState::new(x, y);
            let t = exit_time_flow(&p, &none, z, 0.5, &tight()).unwrap();
            let back = flow(&p, &none, flow(&p, &none, z, t, &tight()).unwrap(), -t, &tight()).unwrap();
            assert!(rel(back.x, x) <= 1e-10 && rel(back.y, y) <= 1e-10);
        }
    }
}

#[test]
fn time_one_iterates_compose() {
    let p = p2();
    let none = Perturbation::none();
    let z0 = PhaseState::new(0.02, 0.3);
    let mut z = z0;
    for _ in 0..100 {
        z = time_one_map(&p, &none, z, &tight()).unwrap();
    }
    let direct = flow(&p, &none, z0, 100.0, &tight()).unwrap();
    assert!(rel(z.x, direct.x) <= 1e-9 && rel(z.y, direct.y) <= 1e-9);
}

#[test]
fn quadrature_matches_time_stepping_on_a_grid() {
    let none = Perturbation::none();
    for p in [p1(), p2()] {
        let zeta0 = 0.5;
        let solver = ExitTimeSolver::new(&p, zeta0).unwrap();
        for xi in [1e-4, 1e-3, 1e-2, 0.1, 0.3] {
            for eta in [0.1, 0.25, 0.4, 0.5] {
                let tq = solver.exit_time(xi, eta).unwrap();
                let tf = exit_time_flow(&p, &none, PhaseState::new(xi, eta), zeta0, &tight()).unwrap();
                assert!(rel(tq, tf) <= 1e-6, "{p:?} xi={xi} eta={eta}: {tq} vs {tf}");
            }
        }
    }
}

#[test]
fn exit_point_lies_on_the_section() {
    let p = p2();
    let none = Perturbation::none();
    let z = PhaseState::new(0.05, 0.4);
    let t = exit_time_flow(&p, &none, z, 0.4, &tight()).unwrap();
    let end = flow(&p, &none, z, t, &tight()).unwrap();
    assert!((end.x - 0.4).abs() <= 1e-9);
    let omega = ExitTimeSolver::new(&p, 0.4).unwrap().omega(0.05, 0.4).unwrap();
    assert!(rel(end.y, omega) <= 1e-9);
}

#[test]
fn exit_time_is_monotone_in_both_coordinates() {
    let solver = ExitTimeSolver::new(&p2(), 0.5).unwrap();
    let xs: Vec<f64> = (1..40).map(|i| 0.5 * i as f64 / 40.0).collect();
    let ts: Vec<f64> = xs.iter().map(|&x| solver.exit_time(x, 0.3).unwrap()).collect();
    assert!(ts.windows(2).all(|w| w[1] < w[0]));
    // orbits cannot cross and x' grows with y, so a higher start exits sooner
    let ts: Vec<f64> = (1..40).map(|i| solver.exit_time(0.05, 0.5 * i as f64 / 40.0).unwrap()).collect();
    assert!(ts.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn unperturbed_diagonal_integral_is_the_first_integral() {
    let p = p2();
    let none = Perturbation::none();
    for i in 0..10 {
        for j in 0..10 {
            let z = PhaseState::new(0.05 + 0.25 * i as f64 / 9.0, 0.05 + 0.25 * j as f64 / 9.0);
            let lt = perturbed_first_integral(&p, &none, z, &tight()).unwrap();
            assert!(rel(lt, first_integral(&p, z).unwrap()) <= 1e-8);
        }
    }
}

#[test]
fn perturbed_integral_is_constant_on_orbits() {
    let p = p2();
    let pert = small_cubic();
    for (x, y) in [(0.05, 0.3), (0.1, 0.2), (0.25, 0.1)] {
        let z = PhaseState::new(x, y);
        let later = flow(&p, &pert, z, 0.7, &tight()).unwrap();
        let a = perturbed_first_integral(&p, &pert, z, &tight()).unwrap();
        let b = perturbed_first_integral(&p, &pert, later, &tight()).unwrap();
        assert!(rel(b, a) <= 1e-8);
    }
}
