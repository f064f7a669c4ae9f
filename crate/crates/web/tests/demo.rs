use fracstrich_web::*;

#[test]
fn remainder_slope_is_minus_five_halves() {
    let r = bessel_remainder(1.0, 10.0, 1000.0, 32).unwrap();
    assert!((r.slope.unwrap() + 2.5).abs() < 0.1, "{:?}", r.slope);
    assert_eq!(r.r.len(), 32);
    let zero = bessel_remainder(1.5, 10.0, 1000.0, 32).unwrap();
    assert!(zero.identically_zero && zero.slope.is_none());
    assert!(bessel_remainder(1.0, 10.0, 1000.0, 100_000).is_err());
}

#[test]
fn evolution_keeps_the_norm() {
    let e = evolve_gaussian(3, 2.0, 1.0, 1.0).unwrap();
    assert!((e.norm_ratio - 1.0).abs() < 1e-6, "{}", e.norm_ratio);
    assert_eq!(e.r.len(), e.evolved.len());
    // a = 2: |u(0, t)| = (1 + 4t²)^{−n/4} for σ = 1.
    let centre = e.evolved[0];
    assert!((centre / 5f64.powf(-0.75) - 1.0).abs() < 1e-3, "{centre}");
    assert!(evolve_gaussian(3, 1.0, 1.0, 1.0).is_err());
}

#[test]
fn critical_power_weight_has_flat_profile() {
    let m = power_weight_norm(3, 2.0, 1.0, 1.5, 0.6, 0.2).unwrap();
    assert!(!m.growth);
    let lo = m.per_m.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!((m.value / lo - 1.0).abs() < 1e-9);
    let off = power_weight_norm(3, 2.0, 1.0, 1.5, 0.8, 0.2).unwrap();
    assert!(off.growth);
}
