mod common;

use common::{p2, rel};
use saddle_core::asymptotics::tail_coeffs;
use saddle_core::renewal::*;
use saddle_core::return_stats::{EntryDensity, EntryStrip};
use saddle_core::{derive_constants, DomainRect};
use std::f64::consts::PI;

#[test]
fn shadow_sequence_from_p2_tail() {
    let p = p2();
    let d = derive_constants(&p).unwrap();
    let rect = DomainRect::default_for(&p).unwrap();
    let strip = EntryStrip::new(&p, &rect, EntryDensity::uniform(&rect, p.kappa)).unwrap();
    let n = 4000;
    let tail = unit_mass_tail(&strip, n as u64, 1e-10).unwrap();
    let dist = return_distribution(&tail).unwrap();
    assert!((dist.p.iter().sum::<f64>() + dist.remainder - 1.0).abs() <= 1e-14);
    assert!(rel(dist.p[1], 1.0 - strip.entry_mass().unwrap()) <= 1e-9);

    let r = renewal_sequence(&dist.p, n).unwrap();
    assert!(r.u.iter().all(|&u| u > 0.0 && u <= 1.0));

    let c0 = tail_coeffs(&p, &d, strip.density(), rect.zeta0).unwrap().c0;
    let mc = mixing_coeffs(c0, d.beta2).unwrap();
    assert!(rel(mc.d0, (0.75 * PI).sin() / (PI * c0)) <= 1e-15);
    // n^(1/4) u_n drifts towards d0 from above
    let scaled = |k: usize| (k as f64).powf(0.25) * r.u[k];
    assert!(scaled(4000) < scaled(1000) && scaled(1000) < scaled(250));
    assert!(rel(scaled(4000), mc.d0) <= 0.2);
}

#[test]
fn higher_order_fit_on_a_planted_sequence() {
    let mc = MixingCoeffs { d_fit: vec![0.3, -0.1], ..mixing_coeffs(1.2, 0.8).unwrap() };
    assert_eq!(mc.q, 3);
    let u: Vec<f64> = (0..20_001).map(|n| if n == 0 { 1.0 } else { correlation_prediction(&mc, n as f64) }).collect();
    let fit = fit_higher_order(&u, &mc, [200, 20_000]).unwrap();
    assert!((fit.d[0] - 0.3).abs() <= 1e-6 && (fit.d[1] + 0.1).abs() <= 1e-6 && fit.d[2].abs() <= 1e-6);
}
