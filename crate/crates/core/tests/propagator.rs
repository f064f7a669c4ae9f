use std::f64::consts::PI;

use fracstrich::propagator::*;
use fracstrich::radial::*;
use fracstrich::Complex64;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn rel_diff(a: &RadialProfile, b: &RadialProfile) -> f64 {
    a.combine(c(1.0), b, c(-1.0)).unwrap().l2_norm() / b.l2_norm()
}

/// A very flat bump supported in (lo, hi); steep edges keep its transform
/// small at moderate r.
fn bump(lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let peak = -10.0 / (mid - lo) - 10.0 / (hi - mid);
    move |p: f64| {
        if p > lo && p < hi {
            (-10.0 / (p - lo) - 10.0 / (hi - p) - peak).exp()
        } else {
            0.0
        }
    }
}

fn from_spectrum(plan: &HankelPlan, g: impl Fn(f64) -> f64) -> RadialProfile {
    let s = SpectralProfile::from_real_fn(plan.dim(), plan.rho_grid(), g).unwrap();
    plan.inverse(&s).unwrap()
}

#[test]
fn cutoff_is_a_partition_of_unity() {
    for i in 0..1000 {
        let t = 10f64.powf(-3.0 + 6.0 * i as f64 / 999.0);
        assert!((DyadicCutoff::partition_sum(t) - 1.0).abs() < 1e-10, "t={t}");
        let phi = DyadicCutoff::phi(t);
        assert!((0.0..=1.0).contains(&phi));
        if !(0.5..=2.0).contains(&t) {
            assert_eq!(phi, 0.0);
        }
    }
}

#[test]
fn disjoint_projections_vanish() {
    // identities of the multipliers themselves; physical-space round trips
    // are limited by truncating P_k f, which decays only sub-exponentially
    let (_, rho) = reference_grids(24.0, 64.0, 0).unwrap();
    let g = SpectralProfile::from_real_fn(3, &rho, bump(0.5, 2.0)).unwrap();
    assert!(g.l2_norm() > 0.0);
    assert!(project_spectral(&g, 5).values().iter().all(|v| v.norm() == 0.0));
    let noise = SpectralProfile::from_real_fn(3, &rho, |p| (3.0 * p).sin() + 1.0).unwrap();
    let p02 = project_spectral(&project_spectral(&noise, 0), 2);
    assert!(p02.values().iter().all(|v| v.norm() == 0.0));
    let p01 = project_spectral(&project_spectral(&noise, 0), 1);
    assert!(p01.l2_norm() > 0.0);
}

#[test]
fn projections_sum_to_identity() {
    let (r, rho) = reference_grids(64.0, 16.0, 0).unwrap();
    let plan = HankelPlan::new(3, r, rho).unwrap();
    let f = from_spectrum(&plan, bump(0.25, 4.0));
    let mut sum = RadialProfile::zeros(3, f.grid()).unwrap();
    for k in -3..=3 {
        sum = sum.combine(c(1.0), &project(&plan, &f, k).unwrap(), c(1.0)).unwrap();
    }
    let e = rel_diff(&sum, &f);
    assert!(e < 1e-8, "{e}");
}

#[test]
fn projection_needs_spectral_window() {
    let (r, rho) = reference_grids(24.0, 8.0, 0).unwrap();
    let plan = HankelPlan::new(3, r.clone(), rho).unwrap();
    let f = RadialProfile::from_real_fn(3, &r, |x| (-x * x).exp()).unwrap();
    assert!(project(&plan, &f, 2).is_ok());
    assert!(matches!(project(&plan, &f, 3), Err(fracstrich::Error::Resolution(_))));
}

#[test]
fn spectral_projection_is_exactly_localised() {
    let (_, rho) = reference_grids(24.0, 16.0, 0).unwrap();
    let g = SpectralProfile::from_real_fn(3, &rho, |p| (-0.1 * p * p).exp()).unwrap();
    for k in -2..=3 {
        let pk = project_spectral(&g, k);
        let lo = 2f64.powi(k - 1);
        let hi = 2f64.powi(k + 1);
        for (&p, v) in pk.grid().nodes().iter().zip(pk.values()) {
            if p <= lo || p >= hi {
                assert_eq!(v.norm(), 0.0);
            }
        }
    }
}

#[test]
fn evolution_at_time_zero_is_identity() {
    let (r, rho) = reference_grids(48.0, 10.0, 16).unwrap();
    let plan = HankelPlan::new(3, r.clone(), rho).unwrap();
    let f = RadialProfile::from_real_fn(3, &r, |x| (-0.5 * x * x).exp()).unwrap();
    let u = evolve(&plan, &f, 0.0, 1.7).unwrap();
    assert!(rel_diff(&u, &f) < 1e-8);
}

#[test]
fn unitarity() {
    for a in [1.5, 2.0, 3.0] {
        let (r, rho) = evolution_grids(64.0, 5.0, 4.0, a, 16).unwrap();
        for n in [2usize, 3] {
            let plan = HankelPlan::new(n, r.clone(), rho.clone()).unwrap();
            let f = RadialProfile::from_real_fn(n, &r, |x| (-x * x / 8.0).exp()).unwrap();
            for t in [0.1, 1.0, 4.0] {
                let u = evolve(&plan, &f, t, a).unwrap();
                let ratio = u.l2_norm() / f.l2_norm();
                assert!((ratio - 1.0).abs() < 1e-6, "a={a} n={n} t={t}: {ratio}");
            }
        }
    }
}

#[test]
fn evolution_beyond_grid_speed_is_rejected() {
    let (r, rho) = evolution_grids(32.0, 6.0, 1.0, 2.0, 0).unwrap();
    let plan = HankelPlan::new(3, r.clone(), rho).unwrap();
    let f = RadialProfile::from_real_fn(3, &r, |x| (-x * x).exp()).unwrap();
    assert!(evolve(&plan, &f, 1.0, 2.0).is_ok());
    assert!(matches!(evolve(&plan, &f, 50.0, 2.0), Err(fracstrich::Error::Resolution(_))));
    assert!(matches!(evolve(&plan, &f, 1.0, 1.0), Err(fracstrich::Error::Hypothesis(_))));
}

#[test]
fn schrodinger_gaussian_closed_form() {
    // e^{itρ²} e^{−ρ²/2} = e^{−zρ²/2} with z = 1 − 2it, whose inverse transform
    // in three dimensions is z^{−3/2} e^{−r²/(2z)}
    let t = 1.0;
    let (r, rho) = evolution_grids(48.0, 10.0, t, 2.0, 16).unwrap();
    let plan = HankelPlan::new(3, r.clone(), rho).unwrap();
    let f = RadialProfile::from_real_fn(3, &r, |x| (-0.5 * x * x).exp()).unwrap();
    let u = evolve(&plan, &f, t, 2.0).unwrap();
    let z = Complex64::new(1.0, -2.0 * t);
    let exact = RadialProfile::from_fn(3, &r, |x| z.powf(-1.5) * (-x * x / (2.0 * z)).exp()).unwrap();
    let e = rel_diff(&u, &exact);
    assert!(e < 1e-4, "{e}");
    assert!(e < 1e-8, "closed form agreement degraded: {e}");
}

#[test]
fn group_law() {
    let a = 1.6;
    let (r, rho) = evolution_grids(48.0, 8.0, 2.0, a, 16).unwrap();
    let plan = HankelPlan::new(3, r.clone(), rho).unwrap();
    let f = RadialProfile::from_real_fn(3, &r, |x| (1.0 + x * x) * (-0.5 * x * x).exp()).unwrap();
    let two = evolve(&plan, &evolve(&plan, &f, 0.7, a).unwrap(), 1.3, a).unwrap();
    let one = evolve(&plan, &f, 2.0, a).unwrap();
    assert!(rel_diff(&two, &one) < 2e-6);
}

#[test]
fn dyadic_scaling_covariance() {
    let (a, t, lambda) = (1.5, 0.6, 2.0f64);
    let big_t = lambda.powf(a) * t;
    let (r, rho) = evolution_grids(48.0, 8.0, big_t, a, 16).unwrap();
    let plan = HankelPlan::new(3, r.clone(), rho).unwrap();
    let fun = |x: f64| (-0.5 * x * x).exp() * (1.0 + 0.3 * x * x);
    let f = RadialProfile::from_real_fn(3, &r, fun).unwrap();
    let rhs = evolve(&plan, &f, big_t, a).unwrap();
    // f(λ·) on the grid r/λ, so that λ times each node is a node of `r`
    let small = plan.scaled(1.0 / lambda).unwrap();
    let f_l = RadialProfile::from_real_fn(3, small.r_grid(), |x| fun(lambda * x)).unwrap();
    let lhs = evolve(&small, &f_l, t, a).unwrap();
    let lhs_on_r = RadialProfile::new(3, r.clone(), lhs.values().to_vec()).unwrap();
    let e = rel_diff(&lhs_on_r, &rhs);
    assert!(e < 1e-6, "{e}");
}

#[test]
fn fractional_laplacian_of_order_two() {
    let (r, rho) = reference_grids(48.0, 12.0, 16).unwrap();
    let plan = HankelPlan::new(3, r.clone(), rho).unwrap();
    let f = RadialProfile::from_real_fn(3, &r, |x| (-0.5 * x * x).exp()).unwrap();
    let lap = fractional_laplacian(&plan, &f, 2.0).unwrap();
    // −Δ e^{−r²/2} = (3 − r²) e^{−r²/2} in three dimensions
    let exact = RadialProfile::from_real_fn(3, &r, |x| (3.0 - x * x) * (-0.5 * x * x).exp()).unwrap();
    let e = rel_diff(&lap, &exact);
    assert!(e < 1e-8, "{e}");
    let z = RadialProfile::zeros(3, &r).unwrap();
    assert_eq!(fractional_laplacian(&plan, &z, 1.5).unwrap().l2_norm(), 0.0);
    let g = plan.forward(&f).unwrap();
    let a = project_spectral(&fractional_laplacian_spectral(&g, 1.5), 1);
    let b = fractional_laplacian_spectral(&project_spectral(&g, 1), 1.5);
    let d = a.combine(c(1.0), &b, c(-1.0)).unwrap();
    assert!(d.l2_norm() <= 1e-10 * a.l2_norm());
}

#[test]
fn duhamel_without_forcing_is_free_evolution() {
    let a = 1.5;
    let (r, rho) = evolution_grids(32.0, 8.0, 2.0, a, 16).unwrap();
    let plan = HankelPlan::new(3, r.clone(), rho).unwrap();
    let tgrid = TimeGrid::for_frequency(2.0, 8f64.powf(a), 8).unwrap();
    let f = RadialProfile::from_real_fn(3, &r, |x| (-0.5 * x * x).exp()).unwrap();
    let zero = SpaceTimeField::zeros(3, &r, &tgrid).unwrap();
    let (u, rep) = duhamel(&plan, &f, &zero, a).unwrap();
    assert_eq!(rep.relative_error_estimate, 0.0);
    let free = evolve_field(&plan, &f, a, &tgrid).unwrap();
    for (x, y) in u.values().iter().zip(free.values()) {
        assert!((x - y).norm() < 1e-14);
    }
    // retarded structure: the output at t = 0 is the datum
    let origin = TimeGrid::from_breaks(vec![-1e-9, 0.0, 1e-9]).unwrap();
    let (u0, _) = duhamel_on(&plan, &f, &zero, a, &origin, 1e-6).unwrap();
    assert!(rel_diff(&u0.profile_at(0), &f) < 1e-8);
}

#[test]
fn manufactured_solution() {
    let a = 1.5;
    let rho_max = 8.0;
    let (r, rho) = evolution_grids(32.0, rho_max, 2.0, a, 16).unwrap();
    let plan = HankelPlan::new(3, r.clone(), rho).unwrap();
    let tgrid = TimeGrid::for_frequency(2.0, rho_max.powf(a) + 2.0, 4).unwrap();
    let g1 = RadialProfile::from_real_fn(3, &r, |x| (-0.5 * x * x).exp()).unwrap();
    let g2 = RadialProfile::from_real_fn(3, &r, |x| x * x * (-x * x).exp()).unwrap();
    let l1 = fractional_laplacian(&plan, &g1, a).unwrap();
    let l2 = fractional_laplacian(&plan, &g2, a).unwrap();
    let nr = r.len();
    let mut uv = Vec::new();
    let mut fv = Vec::new();
    let i = Complex64::new(0.0, 1.0);
    for &t in tgrid.nodes() {
        let (ct, st, c2, s2) = (t.cos(), t.sin(), (2.0 * t).cos(), (2.0 * t).sin());
        for k in 0..nr {
            let (a1, a2) = (g1.values()[k], g2.values()[k]);
            uv.push(ct * a1 + s2 * a2);
            fv.push(i * (-st * a1 + 2.0 * c2 * a2) + ct * l1.values()[k] + s2 * l2.values()[k]);
        }
    }
    let exact = SpaceTimeField::new(3, r.clone(), tgrid.clone(), uv).unwrap();
    let forcing = SpaceTimeField::new(3, r.clone(), tgrid.clone(), fv).unwrap();
    let (u, _) = duhamel(&plan, &g1, &forcing, a).unwrap();
    let diff = u.combine(c(1.0), &exact, c(-1.0)).unwrap();
    let e = diff.weighted_norm(|_, _| 1.0) / exact.weighted_norm(|_, _| 1.0);
    assert!(e < 1e-4, "{e}");
}

#[test]
fn narrow_time_bump_acts_like_an_impulse() {
    // F(r, s) = β(s) h(r), β a Gaussian of width σ centred at s0; for t past the
    // bump, u(t) = −i e^{itL} m(L) h with m(ρ) = ∫ β(s) e^{−isρ^a} ds
    //            = e^{−i s0 ρ^a} e^{−σ² ρ^{2a} / 2}.
    let (a, s0, sigma) = (2.0, 0.2, 0.025);
    let rho_max = 9.0;
    let (r, rho) = evolution_grids(32.0, rho_max, 1.0, a, 16).unwrap();
    let plan = HankelPlan::new(3, r.clone(), rho.clone()).unwrap();
    let tgrid = TimeGrid::forward(1.0, 0.02, 0).unwrap();
    let h = |x: f64| (-0.5 * x * x).exp();
    let beta = |s: f64| (-(s - s0) * (s - s0) / (2.0 * sigma * sigma)).exp() / ((2.0 * PI).sqrt() * sigma);
    let forcing = SpaceTimeField::from_fn(3, &r, &tgrid, |x, s| c(beta(s) * h(x))).unwrap();
    let out = TimeGrid::from_breaks(vec![0.4, 0.7, 1.0]).unwrap();
    let zero = RadialProfile::zeros(3, &r).unwrap();
    let (u, _) = duhamel_on(&plan, &zero, &forcing, a, &out, 1e-6).unwrap();
    let h_hat = plan.forward(&RadialProfile::from_real_fn(3, &r, h).unwrap()).unwrap();
    let m = h_hat.map(|p, v| {
        let pa = p.powf(a);
        v * Complex64::from_polar((-0.5 * sigma * sigma * pa * pa).exp(), -s0 * pa)
    });
    for (ti, &t) in out.nodes().iter().enumerate() {
        let want = plan
            .inverse(&evolve_spectral(&m, t, a).scale(Complex64::new(0.0, -1.0)))
            .unwrap();
        let e = rel_diff(&u.profile_at(ti), &want);
        assert!(e < 1e-3, "t={t}: {e}");
    }
}

#[test]
fn under_resolved_time_grid_is_reported() {
    let a = 2.0;
    let (r, rho) = evolution_grids(32.0, 9.0, 1.0, a, 0).unwrap();
    let plan = HankelPlan::new(3, r.clone(), rho).unwrap();
    let coarse = TimeGrid::forward(1.0, 0.5, 0).unwrap();
    let forcing = SpaceTimeField::from_fn(3, &r, &coarse, |x, s| {
        c((-(s - 0.2) * (s - 0.2) / (2.0 * 0.025f64.powi(2))).exp() * (-0.5 * x * x).exp())
    })
    .unwrap();
    let zero = RadialProfile::zeros(3, &r).unwrap();
    assert!(matches!(
        duhamel(&plan, &zero, &forcing, a),
        Err(fracstrich::Error::TimeResolution(_)) | Err(fracstrich::Error::Resolution(_))
    ));
}

#[test]
fn field_csv_round_trip() {
    let (r, _) = reference_grids(8.0, 4.0, 2).unwrap();
    let tgrid = TimeGrid::symmetric(1.0, 0.5, 2).unwrap();
    let f = SpaceTimeField::from_fn(2, &r, &tgrid, |x, t| Complex64::new(x * t, (-x).exp())).unwrap();
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    let back = SpaceTimeField::read_csv(buf.as_slice(), 2, &r, &tgrid).unwrap();
    assert_eq!(back, f);
}
