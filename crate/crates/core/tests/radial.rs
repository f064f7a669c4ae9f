use std::f64::consts::PI;

use fracstrich::quadrature::GaussLegendre;
use fracstrich::radial::*;
use fracstrich::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn gaussian_setup(n: usize) -> (HankelPlan, RadialProfile) {
    let (r, rho) = reference_grids(48.0, 10.0, 16).unwrap();
    let plan = HankelPlan::new(n, r.clone(), rho).unwrap();
    let f = RadialProfile::from_real_fn(n, &r, |x| (-0.5 * x * x).exp()).unwrap();
    (plan, f)
}

/// 1-D sine integral (4π/ρ) ∫_0^R f(r) sin(rρ) r dr by fine Gauss–Legendre panels.
fn sine_transform_oracle<F: Fn(f64) -> f64>(f: F, rho: f64, r_end: f64) -> f64 {
    let rule = GaussLegendre::new(24);
    let panels = (r_end * (1.0 + rho) * 2.0).ceil() as usize;
    let mut s = 0.0;
    for i in 0..panels {
        let a = r_end * i as f64 / panels as f64;
        let b = r_end * (i + 1) as f64 / panels as f64;
        s += rule.integrate(a, b, |x| f(x) * (x * rho).sin() * x);
    }
    4.0 * PI / rho * s
}

#[test]
fn zero_maps_to_zero() {
    let (plan, f) = gaussian_setup(3);
    let z = RadialProfile::zeros(3, f.grid()).unwrap();
    let g = plan.forward(&z).unwrap();
    assert!(g.values().iter().all(|v| v.norm() == 0.0));
    let back = plan.inverse(&g).unwrap();
    assert!(back.values().iter().all(|v| v.norm() == 0.0));
    assert_eq!(z.l2_norm(), 0.0);
}

#[test]
fn gaussian_is_self_dual_in_three_dimensions() {
    let (plan, f) = gaussian_setup(3);
    let g = plan.forward(&f).unwrap();
    let c3 = (2.0 * PI).powf(1.5);
    for (&p, v) in g.grid().nodes().iter().zip(g.values()) {
        let want = c3 * (-0.5 * p * p).exp();
        assert!((v.re - want).abs() < 1e-10 * c3, "rho={p}: {} vs {want}", v.re);
        assert!(v.im.abs() < 1e-14);
    }
}

#[test]
fn gaussian_l2_norm() {
    let (_, f) = gaussian_setup(3);
    assert!((f.l2_norm() / PI.powf(0.75) - 1.0).abs() < 1e-12);
}

#[test]
fn ball_indicator() {
    let r = RadialGrid::uniform(4.0, REFERENCE_PANEL_PHASE / 32.0, 0, &[1.0]).unwrap();
    let rho = RadialGrid::uniform(32.0, REFERENCE_PANEL_PHASE / 4.0, 0, &[]).unwrap();
    let f = RadialProfile::from_real_fn(3, &r, |x| if x < 1.0 { 1.0 } else { 0.0 }).unwrap();
    assert!((f.l2_norm() - (4.0 * PI / 3.0).sqrt()).abs() < 1e-12);
    let g = hankel_forward(&f, &rho).unwrap();
    for (&p, v) in g.grid().nodes().iter().zip(g.values()).step_by(7) {
        let closed = 4.0 * PI * (p.sin() - p * p.cos()) / p.powi(3);
        let oracle = sine_transform_oracle(|x| if x < 1.0 { 1.0 } else { 0.0 }, p, 1.0);
        assert!((oracle - closed).abs() < 1e-9, "oracle at {p}");
        assert!((v.re - closed).abs() < 1e-9, "rho={p}: {} vs {closed}", v.re);
    }
}

#[test]
fn three_dimensional_transform_matches_sine_transform() {
    let f = |x: f64| (1.0 + x * x) * (-0.5 * x * x).exp() * (1.5 * x).cos();
    let (r, rho) = reference_grids(24.0, 12.0, 0).unwrap();
    let prof = RadialProfile::from_real_fn(3, &r, f).unwrap();
    let g = hankel_forward(&prof, &rho).unwrap();
    let scale = g.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (&p, v) in g.grid().nodes().iter().zip(g.values()).step_by(5) {
        let want = sine_transform_oracle(f, p, 24.0);
        assert!((v.re - want).abs() < 1e-8 * scale, "rho={p}: {} vs {want}", v.re);
    }
}

fn smooth_suite() -> Vec<Box<dyn Fn(f64) -> f64>> {
    vec![
        Box::new(|x: f64| (-0.5 * x * x).exp()),
        Box::new(|x: f64| x * x * (-x * x).exp()),
        Box::new(|x: f64| (-(x - 3.0) * (x - 3.0)).exp()),
        Box::new(|x: f64| (1.0 - x * x / 4.0) * (-x * x / 3.0).exp()),
        Box::new(|x: f64| (-0.25 * x * x).exp() * (2.0 * x).cos()),
    ]
}

#[test]
fn plancherel_suite() {
    let (r, rho) = reference_grids(40.0, 14.0, 16).unwrap();
    for n in [2usize, 3, 4] {
        let plan = HankelPlan::new(n, r.clone(), rho.clone()).unwrap();
        for (i, f) in smooth_suite().iter().enumerate() {
            let prof = RadialProfile::from_real_fn(n, &r, f).unwrap();
            let g = plan.forward(&prof).unwrap();
            let rel = (g.l2_norm() - prof.l2_norm()).abs() / prof.l2_norm();
            assert!(rel < 1e-6, "n={n} case {i}: {rel}");
        }
    }
}

#[test]
fn sobolev_zero_is_l2_and_half_matches_quadrature() {
    let (plan, f) = gaussian_setup(3);
    let s0 = sobolev_norm(&f, 0.0, plan.rho_grid()).unwrap();
    assert!((s0 / f.l2_norm() - 1.0).abs() < 1e-6);
    // ‖f‖²_{Ḣ^{1/2}} = (2π)^{-3} 4π ∫ ρ (2π)^3 e^{-ρ²} ρ² dρ
    let rule = GaussLegendre::new(32);
    let oracle: f64 = (0..40)
        .map(|i| rule.integrate(0.25 * i as f64, 0.25 * (i + 1) as f64, |p| 4.0 * PI * p.powi(3) * (-p * p).exp()))
        .sum();
    let s = sobolev_norm(&f, 0.5, plan.rho_grid()).unwrap();
    assert!((s / oracle.sqrt() - 1.0).abs() < 1e-8, "{s} vs {}", oracle.sqrt());
    assert!(sobolev_norm(&f, -0.5, plan.rho_grid()).is_err());
    let z = RadialProfile::zeros(3, f.grid()).unwrap();
    assert_eq!(sobolev_norm(&z, 0.5, plan.rho_grid()).unwrap(), 0.0);
}

#[test]
fn gaussian_round_trip() {
    let (plan, f) = gaussian_setup(3);
    let back = plan.inverse(&plan.forward(&f).unwrap()).unwrap();
    let diff = back.combine(c(1.0), &f, c(-1.0)).unwrap();
    assert!(diff.l2_norm() / f.l2_norm() < 1e-6);
}

fn cutoff(t: f64) -> f64 {
    let psi = |s: f64| {
        if s > 0.5 && s < 2.0 {
            (-1.0 / (s - 0.5) - 1.0 / (2.0 - s)).exp()
        } else {
            0.0
        }
    };
    let total: f64 = (-2..=2).map(|k| psi(t * 2f64.powi(-k))).sum();
    if total > 0.0 {
        psi(t) / total
    } else {
        0.0
    }
}

#[test]
fn projected_noise_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (r, rho) = reference_grids(256.0, 4.0, 0).unwrap();
    let plan = HankelPlan::new(3, r.clone(), rho.clone()).unwrap();
    let vals: Vec<Complex64> = r
        .nodes()
        .iter()
        .map(|&x| {
            let v = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            if x < 8.0 {
                v
            } else {
                c(0.0)
            }
        })
        .collect();
    let noise = RadialProfile::new(3, r.clone(), vals).unwrap();
    let g = plan.forward(&noise).unwrap().map(|p, v| v * cutoff(p));
    let f = plan.inverse(&g).unwrap();
    let g2 = plan.forward(&f).unwrap();
    let diff = g2.combine(c(1.0), &g, c(-1.0)).unwrap();
    let rel = diff.l2_norm() / g.l2_norm();
    assert!(rel < 1e-6, "{rel}");
}

#[test]
fn csv_round_trip_and_mismatch() {
    let (_, f) = gaussian_setup(3);
    let f = f.map(|x, v| v * Complex64::new(1.0, -0.3 * x));
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    let back = RadialProfile::read_csv(buf.as_slice(), 3, f.grid()).unwrap();
    assert_eq!(back, f);
    let other = f.grid().scaled(2.0);
    assert!(RadialProfile::read_csv(buf.as_slice(), 3, &other).is_err());
}

#[test]
fn coarse_grids_are_rejected() {
    let r = RadialGrid::uniform(48.0, 4.0, 0, &[]).unwrap();
    let rho = RadialGrid::uniform(10.0, 0.1, 0, &[]).unwrap();
    assert!(matches!(
        HankelPlan::new(3, r, rho),
        Err(fracstrich::Error::Resolution(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn forward_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, w in 0.3f64..2.0) {
        let (r, rho) = reference_grids(24.0, 8.0, 0).unwrap();
        let plan = HankelPlan::new(3, r.clone(), rho).unwrap();
        let f = RadialProfile::from_real_fn(3, &r, |x| (-w * x * x).exp()).unwrap();
        let g = RadialProfile::from_real_fn(3, &r, |x| x * (-0.5 * x * x).exp()).unwrap();
        let lhs = plan.forward(&f.combine(c(a), &g, c(b)).unwrap()).unwrap();
        let rhs = plan.forward(&f).unwrap().combine(c(a), &plan.forward(&g).unwrap(), c(b)).unwrap();
        let scale = rhs.values().iter().map(|v| v.norm()).fold(1e-300, f64::max);
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).norm() <= 1e-13 * scale);
        }
    }
}
