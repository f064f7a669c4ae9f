use std::f64::consts::PI;

use fracstrich::specfun::*;
use proptest::prelude::*;

fn order(nu: f64) -> BesselOrder {
    BesselOrder::new(nu).unwrap()
}

/// J_1(1) = Σ (−1)^k / (k! (k+1)! 2^{2k+1}); alternating with decreasing terms,
/// so the first omitted term bounds the error.
fn j1_at_one_oracle() -> (f64, f64) {
    let mut sum = 0.0;
    let mut term = 0.5;
    let mut k = 0u32;
    loop {
        let next = -term / (4.0 * f64::from(k + 1) * f64::from(k + 2));
        sum += term;
        if next.abs() < 1e-30 {
            return (sum, next.abs());
        }
        term = next;
        k += 1;
    }
}

#[test]
fn j0_at_zero_is_one() {
    assert_eq!(bessel_j(order(0.0), 0.0).unwrap(), 1.0);
    assert_eq!(bessel_j(order(1.0), 0.0).unwrap(), 0.0);
}

#[test]
fn half_order_closed_form_at_half_pi() {
    let v = bessel_j(order(0.5), PI / 2.0).unwrap();
    assert!((v - 2.0 / PI).abs() < 1e-15, "{v}");
}

#[test]
fn j1_at_one_matches_series_oracle() {
    let (want, bound) = j1_at_one_oracle();
    let got = bessel_j(order(1.0), 1.0).unwrap();
    assert!((got - want).abs() <= 4.0 * f64::EPSILON + bound, "{got} vs {want}");
}

#[test]
#[allow(clippy::excessive_precision)]
fn reference_values() {
    // High-precision reference values.
    let cases = [
        (0.0, 100.0, 0.019_985_850_304_223_122),
        (2.0, 15.0, 0.041_571_677_975_250_475),
        (0.3, 7.5, 0.290_774_853_350_082_02),
        (2.5, 30.0, 0.141_202_858_799_280_12),
        (0.0, 12.5, 0.146_884_054_700_421_1),
        (1.0, 14.0, 0.133_375_154_698_793_25),
        (0.0, 1000.0, 0.024_786_686_152_420_175),
        (1.5, 2.0, 0.491_293_778_687_162_35),
        (4.0, 3.0, 0.132_034_183_924_612_21),
    ];
    for (nu, r, want) in cases {
        let got = bessel_j(order(nu), r).unwrap();
        assert!((got - want).abs() < 1e-13, "J_{nu}({r}) = {got}, want {want}");
    }
}

#[test]
fn half_order_closed_form_over_six_decades() {
    let n = 4000;
    for i in 0..n {
        let r = 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1) as f64);
        let got = bessel_j(order(0.5), r).unwrap();
        let want = (2.0 / (PI * r)).sqrt() * r.sin();
        // relative to the local amplitude, so zeros of sin do not blow up the ratio
        let scale = (2.0 / (PI * r)).sqrt() * r.min(1.0);
        assert!((got - want).abs() <= 1e-12 * scale, "r={r}: {got} vs {want}");
    }
}

#[test]
fn branches_agree_on_overlap_band() {
    for nu in [0.0, 0.5, 1.0, 1.5, 2.0, 2.5] {
        for i in 0..=64 {
            let r = 12.0 + 4.0 * i as f64 / 64.0;
            let s = bessel_j_series(nu, r);
            let a = bessel_j_asymptotic(nu, r);
            assert!((s - a).abs() < 1e-10, "nu={nu} r={r}: {s} vs {a}");
        }
    }
}

#[test]
fn leading_terms_at_half_order_have_no_correction() {
    let r = 10.0;
    let got = bessel_leading(order(0.5), r).unwrap();
    let want = (2.0 / (10.0 * PI)).sqrt() * (10.0 - PI / 2.0).cos();
    assert!((got - want).abs() < 1e-15);
    for r in [1.5, 3.0, 20.0, 400.0] {
        assert!(bessel_error(order(0.5), r).unwrap().abs() < 1e-14);
    }
}

#[test]
fn leading_terms_of_j0_at_hundred() {
    let lead = bessel_leading(order(0.0), 100.0).unwrap();
    let j = bessel_j(order(0.0), 100.0).unwrap();
    // next Hankel term: (9/128) r^{-2} √(2/πr)
    let c = 9.0 / 128.0 * (2.0 / PI).sqrt();
    assert!((j - lead).abs() <= 1.01 * c * 100f64.powf(-2.5));
}

#[test]
fn three_halves_at_two_is_finite_and_bounded_by_fitted_constant() {
    let v = bessel_leading(order(1.5), 2.0).unwrap();
    assert!(v.is_finite());
    let scan = remainder_slope_scan(order(1.5), 2.0, 1000.0, 64).unwrap();
    let e = bessel_error(order(1.5), 2.0).unwrap().abs();
    assert!(e <= scan.fitted_constant.max(noise_floor(2.0)) * 2f64.powf(-2.5) * 1.0001);
}

#[test]
fn j0_remainder_two_point_ratio() {
    let e10 = remainder_envelope(order(0.0), 10.0).unwrap();
    let e40 = remainder_envelope(order(0.0), 40.0).unwrap();
    let ratio = e40 / e10;
    assert!((ratio / (1.0 / 32.0) - 1.0).abs() < 0.25, "ratio {ratio}");
}

#[test]
fn j1_remainder_at_thousand_below_fitted_bound() {
    let scan = remainder_slope_scan(order(1.0), 10.0, 1000.0, 64).unwrap();
    let e = bessel_error(order(1.0), 1000.0).unwrap().abs();
    assert!(e <= 1e-7 * scan.fitted_constant * 1.0001 * 10f64.powf(-0.5), "{e}");
}

#[test]
fn remainder_slopes() {
    for nu in [0.0, 1.0, 2.0] {
        let scan = remainder_slope_scan(order(nu), 10.0, 1000.0, 64).unwrap();
        let fit = scan.fit.expect("nonzero remainder");
        assert!((fit.slope + 2.5).abs() <= 0.1, "nu={nu}: slope {}", fit.slope);
    }
}

#[test]
fn half_order_remainder_is_flagged_identically_zero() {
    let scan = remainder_slope_scan(order(0.5), 10.0, 1000.0, 64).unwrap();
    assert!(scan.identically_zero);
    assert!(scan.fit.is_none());
}

#[test]
fn remainder_derivative_decays() {
    for nu in [0.0, 1.0, 2.0] {
        let o = order(nu);
        let rs = [16.0, 32.0, 64.0, 128.0, 256.0];
        let c: Vec<f64> = rs
            .iter()
            .map(|&r| remainder_derivative_envelope(o, r).unwrap() / (r.powf(-2.5) + r.powf(-3.5)))
            .collect();
        let hi = c.iter().cloned().fold(0.0, f64::max);
        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo < 2.0, "nu={nu}: {c:?}");
    }
}

#[test]
fn envelope_constant_stable_under_doubling() {
    for n in 2..=5 {
        let c1 = envelope_constant(n, 1000.0, 4000).unwrap();
        let c2 = envelope_constant(n, 1000.0, 8000).unwrap();
        assert!(c1.is_finite() && c1 > 0.0);
        assert!((c2 / c1 - 1.0).abs() < 0.05, "n={n}: {c1} vs {c2}");
    }
}

#[test]
fn small_argument_law() {
    for nu in [0.0, 0.5, 1.0, 1.5] {
        let o = order(nu);
        let mut sup_j = 0.0f64;
        let mut sup_d = 0.0f64;
        for i in 1..=2000 {
            let r = i as f64 / 2001.0;
            sup_j = sup_j.max(bessel_j(o, r).unwrap().abs() / r.powf(nu));
            sup_d = sup_d.max(bessel_j_derivative(o, r).unwrap().abs() / r.powf(nu - 1.0));
        }
        let limit = 1.0 / (2f64.powf(nu) * gamma(nu + 1.0));
        assert!(sup_j <= limit * (1.0 + 1e-12), "nu={nu}: {sup_j}");
        assert!(sup_d.is_finite() && sup_d <= nu.max(1.0) * limit + 1.0, "nu={nu}: {sup_d}");
    }
}

#[test]
fn derivative_matches_finite_difference() {
    let o = order(1.5);
    for r in [0.3, 2.0, 9.0, 30.0] {
        let h = 1e-6;
        let fd = (bessel_j(o, r + h).unwrap() - bessel_j(o, r - h).unwrap()) / (2.0 * h);
        assert!((bessel_j_derivative(o, r).unwrap() - fd).abs() < 1e-8);
    }
}

proptest! {
    #[test]
    fn recurrence_holds(nu in 0.0f64..3.0, r in 0.5f64..200.0) {
        // J_{ν−1} + J_{ν+1} = (2ν/r) J_ν, shifted to stay at nonnegative order
        let j0 = bessel_j(order(nu), r).unwrap();
        let j1 = bessel_j(order(nu + 1.0), r).unwrap();
        let j2 = bessel_j(order(nu + 2.0), r).unwrap();
        let lhs = j0 + j2;
        let rhs = 2.0 * (nu + 1.0) / r * j1;
        prop_assert!((lhs - rhs).abs() < 1e-11 * (1.0 + rhs.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn envelope_bound_holds(n in 2usize..=5, r in 1e-4f64..1000.0) {
        let nu = (n as f64 - 2.0) / 2.0;
        let j = bessel_j(BesselOrder::from_dimension(n).unwrap(), r).unwrap();
        prop_assert!(j.abs() <= 1.0 * r.powf(nu).min(r.powf(-0.5)) + 1e-15);
    }
}

#[test]
fn fast_evaluator_agrees_with_reference() {
    for nu in [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0] {
        for i in 0..3000 {
            let r = 1e-3 + 300.0 * (i as f64 / 3000.0).powi(2);
            let a = bessel_j_fast(nu, r);
            let b = bessel_j(order(nu), r).unwrap();
            // the reference asymptotic branch is truncated optimally, ~1e-12 near r = 12
            assert!((a - b).abs() < 5e-12, "nu={nu} r={r}: {a} vs {b}");
        }
    }
}
