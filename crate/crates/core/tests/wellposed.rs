use std::time::Instant;

use fracstrich::estimates::{DataShape, ForcingShape, Grids, Resolution};
use fracstrich::propagator::SpaceTimeField;
use fracstrich::wellposed::*;
use fracstrich::weights::{CubeLattice, McParams};
use fracstrich::{Complex64, Error};

fn default_problem() -> PotentialProblem {
    ProblemSpec::default_small().build().unwrap()
}

#[test]
fn phi_vanishes_for_zero_potential_or_field() {
    let p = default_problem();
    let lin = p.linear_part().unwrap();
    let z = p.with_potential(Potential { epsilon: 0.0, ..p.potential }).unwrap();
    assert_eq!(phi_map(&lin, &z).unwrap().sup_l2(), 0.0);
    let zero = SpaceTimeField::zeros(3, p.grids.plan.r_grid(), &p.grids.tgrid).unwrap();
    assert_eq!(phi_map(&zero, &p).unwrap().sup_l2(), 0.0);
    assert_eq!(contraction_ratio(&z, 4, 1).unwrap().ratio, 0.0);
}

#[test]
fn phi_is_linear_and_starts_at_zero() {
    let p = default_problem();
    let lin = p.linear_part().unwrap();
    let other = lin.map(|r, t, v| v * Complex64::new((-r * r / 50.0).exp(), 0.3 * t));
    let c = Complex64::new(0.7, -1.3);
    let lhs = phi_map(&lin.combine(c, &other, Complex64::new(1.0, 0.0)).unwrap(), &p).unwrap();
    let rhs = phi_map(&lin, &p)
        .unwrap()
        .combine(c, &phi_map(&other, &p).unwrap(), Complex64::new(1.0, 0.0))
        .unwrap();
    let diff = lhs.combine(Complex64::new(1.0, 0.0), &rhs, Complex64::new(-1.0, 0.0)).unwrap();
    assert!(diff.sup_l2() < 1e-10 * lhs.sup_l2());
    // Nodes nearest t = 0 on either side carry almost nothing.
    let phi = phi_map(&lin, &p).unwrap();
    let l2 = phi.l2_in_space();
    let i0 = p.grids.tgrid.nodes().iter().position(|&t| t > 0.0).unwrap();
    assert!(l2[i0] < 1e-3 * phi.sup_l2(), "{} {}", l2[i0], phi.sup_l2());
}

#[test]
fn space_constant_potential_against_the_exact_phase() {
    // V = ε|t|^{−β}: Φ(e^{itL}f) = −i ε sgn(t)|t|^{1−β}/(1−β) e^{itL}f.
    let shape = DataShape::Gaussian { width: 2.0 };
    let a = 1.75;
    let res = Resolution {
        t_grading: POTENTIAL_T_GRADING,
        ..Resolution::for_shape(&shape, a, 4.0)
    };
    let grids = Grids::new(3, a, &res).unwrap();
    let f = shape.profile(3, grids.plan.r_grid()).unwrap();
    let zero = SpaceTimeField::zeros(3, grids.plan.r_grid(), &grids.tgrid).unwrap();
    let eps = 0.3;
    let beta = 0.4;
    // Not a critical potential (γx + aγt ≠ a), so Φ is assembled by hand.
    let v = Potential {
        epsilon: eps,
        gamma_x: 0.0,
        gamma_t: beta,
        phase: 0.0,
    };
    let lin = fracstrich::propagator::duhamel(&grids.plan, &f, &zero, a).unwrap().0;
    let vu = lin.map(|r, t, x| v.eval(r, t) * x);
    let f0 = fracstrich::radial::RadialProfile::zeros(3, grids.plan.r_grid()).unwrap();
    let phi = fracstrich::propagator::duhamel(&grids.plan, &f0, &vu, a).unwrap().0;
    let exact = lin.map(|_, t, x| Complex64::new(0.0, -eps * t.signum() * t.abs().powf(1.0 - beta) / (1.0 - beta)) * x);
    let err = phi.combine(Complex64::new(1.0, 0.0), &exact, Complex64::new(-1.0, 0.0)).unwrap();
    assert!(err.sup_l2() < 1e-4 * exact.sup_l2(), "{} {}", err.sup_l2(), exact.sup_l2());
}

#[test]
fn contraction_is_small_and_linear_in_epsilon() {
    let p = default_problem();
    let c = contraction_ratio(&p, DEFAULT_TRIALS, DEFAULT_SEED).unwrap();
    let half = contraction_ratio(&p.with_potential(p.potential.scaled(0.5)).unwrap(), DEFAULT_TRIALS, DEFAULT_SEED).unwrap();
    eprintln!("contraction {c:?} half {}", half.ratio);
    assert!(c.ratio < 0.5, "{}", c.ratio);
    assert!((half.ratio / c.ratio - 0.5).abs() < 0.05);
}

#[test]
fn picard_converges_geometrically() {
    let t = Instant::now();
    let p = default_problem();
    let sol = picard_solve(&p, 1e-8, 30).unwrap();
    eprintln!("history {:?} rates {:?} contraction {} in {:?}", sol.history, sol.rates(), sol.contraction.ratio, t.elapsed());
    assert!(sol.history.len() <= 30);
    assert!(sol.history.last().unwrap().residual < 1e-8);
    for r in sol.rates() {
        assert!(r <= sol.contraction.ratio + 0.05, "{r}");
    }
    let b = solution_bounds_check(&sol.solution, &p).unwrap();
    eprintln!("{b:?}");
    assert!(b.weighted_constant.is_finite() && b.energy_constant.is_finite());
}

#[test]
fn zero_potential_returns_the_linear_part() {
    let p = default_problem();
    let z = p.with_potential(Potential { epsilon: 0.0, ..p.potential }).unwrap();
    let sol = picard_solve(&z, 1e-8, 30).unwrap();
    assert_eq!(sol.history.len(), 1);
    assert_eq!(sol.solution.values(), z.linear_part().unwrap().values());
}

#[test]
fn unitarity_without_potential_or_forcing() {
    let spec = ProblemSpec {
        forcing: None,
        potential: Potential { epsilon: 0.0, gamma_x: 0.0, gamma_t: 0.0, phase: 0.0 },
        ..ProblemSpec::default_small()
    };
    let p = spec.build().unwrap();
    let sol = picard_solve(&p, 1e-8, 5).unwrap();
    let b = solution_bounds_check(&sol.solution, &p).unwrap();
    assert!((b.sup_l2 / b.u0_norm - 1.0).abs() < 1e-10, "{b:?}");
    assert!((b.energy_constant - 1.0).abs() < 1e-10);
}

#[test]
fn real_potential_nearly_conserves_mass() {
    // Without forcing, a real V conserves ‖u(t)‖₂; the Picard solution
    // deviates by no more than C·ε.
    let base = ProblemSpec {
        forcing: None,
        ..ProblemSpec::default_small()
    };
    let mut devs = Vec::new();
    for eps in [0.05, 0.025, 0.0125] {
        let p = ProblemSpec {
            potential: Potential::critical(3, 2.0, eps),
            ..base.clone()
        }
        .build()
        .unwrap();
        let sol = picard_solve(&p, 1e-10, 40).unwrap();
        let dev = (sol.solution.sup_l2() / p.u0.l2_norm() - 1.0).abs();
        devs.push(dev / eps);
    }
    eprintln!("deviation / eps {devs:?}");
    assert!(devs.iter().all(|d| *d < 1e-2));
}

#[test]
fn non_contractive_potentials_are_refused() {
    let p = default_problem();
    let big = p.with_potential(p.potential.scaled(400.0)).unwrap();
    assert!(matches!(picard_solve(&big, 1e-8, 30), Err(Error::NotContractive(_))));
    let off = Potential { gamma_x: 1.0, ..p.potential };
    assert!(matches!(p.with_potential(off), Err(Error::Hypothesis(_))));
}

#[test]
fn dual_estimate_is_refinement_stable() {
    let forcing = ForcingShape {
        space: DataShape::Gaussian { width: 2.0 },
        t_center: 1.0,
        t_width: 1.5,
    };
    let w = Potential::critical(3, 2.0, 1.0).modulus();
    let params = McParams::new(2.0, 2.25, 2.0, 3).unwrap();
    let mut ratios = Vec::new();
    for refine in [1.0, 2.0] {
        let res = Resolution {
            refine,
            ..Resolution::for_forcing(&forcing, 2.0, 4.0)
        };
        let grids = Grids::new(3, 2.0, &res).unwrap();
        let f = forcing.field(3, &grids).unwrap();
        ratios.push(dual_ratio(&f, &w, &params, &CubeLattice::default(), &grids, 2.0).unwrap());
    }
    assert!(ratios[0].is_finite() && ratios[0] > 0.0);
    assert!((ratios[1] / ratios[0] - 1.0).abs() < 0.1, "{ratios:?}");
}

#[test]
fn solution_bound_constants_are_refinement_stable() {
    let coarse = ProblemSpec::default_small();
    let fine = ProblemSpec { refine: 2.0, ..coarse.clone() };
    let mut out = Vec::new();
    for spec in [coarse, fine] {
        let p = spec.build().unwrap();
        let sol = picard_solve(&p, 1e-8, 30).unwrap();
        out.push(solution_bounds_check(&sol.solution, &p).unwrap());
    }
    let d1 = (out[1].weighted_constant / out[0].weighted_constant - 1.0).abs();
    let d2 = (out[1].energy_constant / out[0].energy_constant - 1.0).abs();
    assert!(d1 < 0.15 && d2 < 0.15, "{d1} {d2}");
}
