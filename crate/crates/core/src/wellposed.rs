//! The potential-perturbed problem
//!
//! ```text
//! u = e^{itL}u₀ − i∫_0^t e^{i(t−s)L}F(s) ds + Φ(u),   Φ(u) = −i∫_0^t e^{i(t−s)L}(Vu)(s) ds
//! ```
//!
//! solved by Picard iteration in L²(|V|), with the contraction of Φ measured
//! on trial fields and the implied constants of the two solution bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::estimates::{inverse_weighted_st_norm, weighted_st_norm, DataShape, ForcingShape, Grids, Resolution};
use crate::propagator::{backward_integral, duhamel, evolve_field_spectral, SpaceTimeField};
use crate::radial::RadialProfile;
use crate::weights::{mc_norm, CubeLattice, McParams, McReport, Weight};
use crate::{Complex64, Error, Result};

/// V(x, t) = ε e^{iθ} |x|^{−γx} |t|^{−γt}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Potential {
    pub epsilon: f64,
    pub gamma_x: f64,
    pub gamma_t: f64,
    #[serde(default)]
    pub phase: f64,
}

pub const DEFAULT_EPSILON: f64 = 0.05;

/// Geometric levels toward t = 0; the |t|^{−γt} factor of V·u makes the
/// innermost panel dominate the Duhamel quadrature error.
pub const POTENTIAL_T_GRADING: u32 = 40;

impl Potential {
    /// γx = an/(n+a), γt = a/(n+a): γx + aγt = a, and |V|^p is locally
    /// integrable for every p < (n+a)/a.
    pub fn critical(n: usize, a: f64, epsilon: f64) -> Self {
        let d = n as f64 + a;
        Self {
            epsilon,
            gamma_x: a * n as f64 / d,
            gamma_t: a / d,
            phase: 0.0,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            epsilon: self.epsilon * factor,
            ..*self
        }
    }

    /// |V| as a weight.
    pub fn modulus(&self) -> Weight {
        Weight::separable(
            self.epsilon.abs(),
            crate::weights::SpaceFactor::Power { gamma: self.gamma_x },
            crate::weights::TimeFactor::Power { gamma: self.gamma_t },
        )
    }

    pub fn eval(&self, r: f64, t: f64) -> Complex64 {
        Complex64::from_polar(self.epsilon * r.powf(-self.gamma_x) * t.abs().powf(-self.gamma_t), self.phase)
    }

    pub fn is_zero(&self) -> bool {
        self.epsilon == 0.0
    }
}

#[derive(Debug, Clone)]
pub struct PotentialProblem {
    pub n: usize,
    pub a: f64,
    pub p: f64,
    pub u0: RadialProfile,
    pub forcing: SpaceTimeField,
    pub potential: Potential,
    pub grids: Grids,
    pub lattice: CubeLattice,
    /// Morrey–Campanato norm of |V| with α = a (None when V = 0).
    pub mc: Option<McReport>,
}

/// Declarative description of a problem; [`ProblemSpec::build`] samples it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub n: usize,
    pub a: f64,
    pub p: f64,
    pub data: DataShape,
    pub forcing: Option<ForcingShape>,
    #[serde(default = "unit")]
    pub forcing_amplitude: f64,
    pub potential: Potential,
    pub t_max: f64,
    #[serde(default = "unit")]
    pub refine: f64,
    #[serde(default)]
    pub lattice: CubeLattice,
}

fn unit() -> f64 {
    1.0
}

impl ProblemSpec {
    /// n = 3, a = 2, p = 9/4, Gaussian data of width 2, a Gaussian forcing
    /// switched on over t ∈ [1, 4], and the critical potential with ε = 0.05.
    pub fn default_small() -> Self {
        let n = 3;
        let a = 2.0;
        Self {
            n,
            a,
            p: 2.25,
            data: DataShape::Gaussian { width: 2.0 },
            forcing: Some(ForcingShape {
                space: DataShape::Gaussian { width: 2.0 },
                t_center: 2.5,
                t_width: 1.5,
            }),
            forcing_amplitude: 0.1,
            potential: Potential::critical(n, a, DEFAULT_EPSILON),
            t_max: 4.0,
            refine: 1.0,
            lattice: CubeLattice::default(),
        }
    }

    pub fn build(&self) -> Result<PotentialProblem> {
        self.data.validate()?;
        let mut res = match &self.forcing {
            Some(f) => Resolution::for_forcing(f, self.a, self.t_max),
            None => Resolution::for_shape(&self.data, self.a, self.t_max),
        };
        if let Some(f) = &self.forcing {
            let d = Resolution::for_shape(&self.data, self.a, self.t_max);
            res.r_max = res.r_max.max(d.r_max).max(Resolution::for_shape(&f.space, self.a, self.t_max).r_max);
            res.rho_max = res.rho_max.max(d.rho_max);
        }
        res.refine = self.refine;
        res.t_grading = POTENTIAL_T_GRADING;
        let grids = Grids::new(self.n, self.a, &res)?;
        let u0 = self.data.profile(self.n, grids.plan.r_grid())?;
        let forcing = match &self.forcing {
            Some(f) => f.field(self.n, &grids)?.map(|_, _, v| v * self.forcing_amplitude),
            None => SpaceTimeField::zeros(self.n, grids.plan.r_grid(), &grids.tgrid)?,
        };
        PotentialProblem::new(self.n, self.a, self.p, u0, forcing, self.potential, grids, self.lattice)
    }
}

impl PotentialProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        a: f64,
        p: f64,
        u0: RadialProfile,
        forcing: SpaceTimeField,
        potential: Potential,
        grids: Grids,
        lattice: CubeLattice,
    ) -> Result<Self> {
        if !(a > 1.0) {
            return Err(Error::hypothesis(format!("well-posedness needs a > 1, got {a}")));
        }
        let nf = n as f64;
        if !(p > a / (a - 1.0) && p <= (nf + a) / a) {
            return Err(Error::hypothesis(format!(
                "p = {p} outside a/(a-1) < p <= (n+a)/a = ({}, {}]",
                a / (a - 1.0),
                (nf + a) / a
            )));
        }
        let v = &potential;
        if !v.is_zero() && (v.gamma_x + a * v.gamma_t - a).abs() > 1e-12 {
            return Err(Error::hypothesis(format!(
                "potential needs gamma_x + a gamma_t = a, got {}",
                v.gamma_x + a * v.gamma_t
            )));
        }
        let mc = if v.is_zero() {
            None
        } else {
            Some(mc_norm(&v.modulus(), &McParams::new(a, p, a, n)?, &lattice)?)
        };
        if let Some(m) = mc.as_ref().filter(|m| m.growth) {
            return Err(Error::hypothesis(format!(
                "|V| is not in the weight class: its Morrey-Campanato norm keeps growing across the lattice ({})",
                m.value
            )));
        }
        if !forcing.rgrid().same_nodes(grids.plan.r_grid(), 0.0) {
            return Err(Error::invalid("forcing is not on the problem's r grid"));
        }
        Ok(Self {
            n,
            a,
            p,
            u0,
            forcing,
            potential,
            grids,
            lattice,
            mc,
        })
    }

    pub fn with_potential(&self, potential: Potential) -> Result<Self> {
        Self::new(
            self.n,
            self.a,
            self.p,
            self.u0.clone(),
            self.forcing.clone(),
            potential,
            self.grids.clone(),
            self.lattice,
        )
    }

    /// e^{itL}u₀ − i∫_0^t e^{i(t−s)L}F(s) ds
    pub fn linear_part(&self) -> Result<SpaceTimeField> {
        Ok(duhamel(&self.grids.plan, &self.u0, &self.forcing, self.a)?.0)
    }

    pub fn mc_value(&self) -> f64 {
        self.mc.as_ref().map_or(0.0, |m| m.value)
    }

    /// ‖u‖_{L²(|V|)}
    pub fn v_norm(&self, u: &SpaceTimeField) -> Result<f64> {
        if self.potential.is_zero() {
            return Ok(0.0);
        }
        weighted_st_norm(u, &self.potential.modulus())
    }
}

/// −i∫_0^t e^{i(t−s)L}(Vu)(s) ds on the problem's grids.
pub fn phi_map(u: &SpaceTimeField, problem: &PotentialProblem) -> Result<SpaceTimeField> {
    if !u.rgrid().same_nodes(problem.grids.plan.r_grid(), 0.0) || u.tgrid().nodes() != problem.grids.tgrid.nodes() {
        return Err(Error::invalid("field is not on the problem's grids"));
    }
    let v = problem.potential;
    if v.is_zero() {
        return SpaceTimeField::zeros(problem.n, problem.grids.plan.r_grid(), &problem.grids.tgrid);
    }
    let vu = u.map(|r, t, x| v.eval(r, t) * x);
    if vu.values().iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularSampling("V u is not finite on the grid".into()));
    }
    let zero = RadialProfile::zeros(problem.n, problem.grids.plan.r_grid())?;
    Ok(duhamel(&problem.grids.plan, &zero, &vu, problem.a)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    /// max over trials of ‖Φ(u)‖_{L²(|V|)} / ‖u‖_{L²(|V|)}
    pub ratio: f64,
    pub per_trial: Vec<f64>,
}

/// Leading Krylov fields Φ^k(linear part) join the trials: they are the
/// differences the Picard iteration has to contract.
const KRYLOV_TRIALS: usize = 3;

fn trial_fields(problem: &PotentialProblem, count: usize, seed: u64) -> Result<Vec<SpaceTimeField>> {
    let mut out = Vec::with_capacity(count + KRYLOV_TRIALS);
    let mut k = problem.linear_part()?;
    for _ in 0..KRYLOV_TRIALS {
        if problem.v_norm(&k)? == 0.0 {
            break;
        }
        let next = phi_map(&k, problem)?;
        out.push(k);
        k = next;
    }
    let rho_max = problem.grids.plan.rho_grid().r_max();
    let w_min = 6.5 / rho_max;
    let r_top = problem.grids.plan.r_grid().r_max();
    let t_top = problem.grids.tgrid.max_abs_t();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..count {
        let width = w_min * (1.0 + rng.random::<f64>());
        if i % 2 == 0 {
            // free evolution of random modulated data
            let freq = rng.random::<f64>() * 0.25 * rho_max;
            let shape = DataShape::Combination {
                terms: vec![
                    (rng.random_range(-1.0..1.0), DataShape::Gaussian { width }),
                    (rng.random_range(-1.0..1.0), DataShape::Modulated { width, freq }),
                ],
            };
            let f = shape.profile(problem.n, problem.grids.plan.r_grid())?;
            let g = problem.grids.plan.forward(&f)?;
            out.push(evolve_field_spectral(&problem.grids.plan, &g, problem.a, &problem.grids.tgrid)?);
        } else {
            // separable bump: Gaussian shell in r times a Gaussian in t
            let r0 = rng.random::<f64>() * 0.25 * r_top;
            let t0 = rng.random_range(-0.5..0.5) * t_top;
            let tw = t_top * (0.1 + 0.4 * rng.random::<f64>());
            out.push(SpaceTimeField::from_fn(problem.n, problem.grids.plan.r_grid(), &problem.grids.tgrid, |r, t| {
                let e = (-0.5 * ((r - r0) / width).powi(2) - 0.5 * ((t - t0) / tw).powi(2)).exp();
                Complex64::new(e, 0.0)
            })?);
        }
    }
    Ok(out)
}

/// Largest measured ‖Φ(u)‖/‖u‖ in L²(|V|) over `trials` seeded fields and
/// the leading Krylov fields.
pub fn contraction_ratio(problem: &PotentialProblem, trials: usize, seed: u64) -> Result<ContractionReport> {
    if problem.potential.is_zero() {
        return Ok(ContractionReport {
            ratio: 0.0,
            per_trial: vec![0.0; trials],
        });
    }
    let fields = trial_fields(problem, trials, seed)?;
    let per_trial = crate::par::map(fields.len(), |i| -> Result<f64> {
        let u = &fields[i];
        let den = problem.v_norm(u)?;
        if den == 0.0 {
            return Ok(0.0);
        }
        Ok(problem.v_norm(&phi_map(u, problem)?)? / den)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(ContractionReport {
        ratio: per_trial.iter().copied().fold(0.0, f64::max),
        per_trial,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Iterate {
    pub iteration: usize,
    /// ‖u_{k+1} − u_k‖_{L²(|V|)} / ‖u_{k+1}‖_{L²(|V|)}
    pub residual: f64,
    /// sup_t ‖u_{k+1}(t)‖₂
    pub sup_l2: f64,
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    pub solution: SpaceTimeField,
    pub history: Vec<Iterate>,
    pub contraction: ContractionReport,
}

impl PicardSolution {
    /// residual_{k+1} / residual_k along the history.
    pub fn rates(&self) -> Vec<f64> {
        self.history
            .windows(2)
            .filter(|w| w[0].residual > 0.0)
            .map(|w| w[1].residual / w[0].residual)
            .collect()
    }
}

const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub const DEFAULT_TRIALS: usize = 8;
pub const DEFAULT_SEED: u64 = 0x5eed;

/// Picard iteration u ← linear part + Φ(u) from the linear part. Refuses
/// when the measured contraction ratio is not below 1.
pub fn picard_solve(problem: &PotentialProblem, tol: f64, max_iters: usize) -> Result<PicardSolution> {
    let contraction = contraction_ratio(problem, DEFAULT_TRIALS, DEFAULT_SEED)?;
    if contraction.ratio >= 1.0 {
        return Err(Error::NotContractive(format!(
            "measured ||Phi|| >= {:.3} in L2(|V|) (epsilon = {}, mc = {:.4}); reduce the potential",
            contraction.ratio, problem.potential.epsilon, problem.mc_value()
        )));
    }
    let lin = problem.linear_part()?;
    let mut u = lin.clone();
    let mut history = Vec::new();
    for it in 1..=max_iters {
        let next = lin.combine(ONE, &phi_map(&u, problem)?, ONE)?;
        let diff = next.combine(ONE, &u, -ONE)?;
        let scale = problem.v_norm(&next)?;
        let residual = if scale > 0.0 { problem.v_norm(&diff)? / scale } else { 0.0 };
        history.push(Iterate {
            iteration: it,
            residual,
            sup_l2: next.sup_l2(),
        });
        u = next;
        if residual < tol {
            return Ok(PicardSolution {
                solution: u,
                history,
                contraction,
            });
        }
    }
    Err(Error::Budget(format!(
        "Picard iteration stopped after {max_iters} steps at residual {:.3e}",
        history.last().map_or(f64::NAN, |h| h.residual)
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsReport {
    pub v_norm: f64,
    pub sup_l2: f64,
    pub u0_norm: f64,
    /// ‖F‖_{L²(|V|^{−1})}
    pub forcing_norm: f64,
    pub mc_value: f64,
    /// ‖u‖_{L²(|V|)} / (mc^{1/2}‖u₀‖₂ + mc‖F‖_{L²(|V|^{−1})})
    pub weighted_constant: f64,
    /// sup_t ‖u‖₂ / (‖u₀‖₂ + mc^{1/2}‖F‖_{L²(|V|^{−1})})
    pub energy_constant: f64,
}

pub fn solution_bounds_check(solution: &SpaceTimeField, problem: &PotentialProblem) -> Result<BoundsReport> {
    let mc = problem.mc_value();
    let u0_norm = problem.u0.l2_norm();
    let forcing_norm = if problem.potential.is_zero() || problem.forcing.sup_l2() == 0.0 {
        0.0
    } else {
        inverse_weighted_st_norm(&problem.forcing, &problem.potential.modulus())?
    };
    let v_norm = problem.v_norm(solution)?;
    let sup_l2 = solution.sup_l2();
    let rhs1 = mc.sqrt() * u0_norm + mc * forcing_norm;
    let rhs2 = u0_norm + mc.sqrt() * forcing_norm;
    if rhs2 == 0.0 {
        return Err(Error::DivisionGuard("zero data and forcing".into()));
    }
    Ok(BoundsReport {
        v_norm,
        sup_l2,
        u0_norm,
        forcing_norm,
        mc_value: mc,
        weighted_constant: if rhs1 > 0.0 { v_norm / rhs1 } else { 0.0 },
        energy_constant: sup_l2 / rhs2,
    })
}

/// ‖∫ e^{−isL}F(s) ds‖₂ / (‖w‖^{1/2}_{a,p} ‖F‖_{L²(w^{−1})}) over the time grid.
pub fn dual_ratio(
    forcing: &SpaceTimeField,
    w: &Weight,
    params: &McParams,
    lattice: &CubeLattice,
    grids: &Grids,
    a: f64,
) -> Result<f64> {
    let mc = mc_norm(w, params, lattice)?;
    let g = backward_integral(&grids.plan, forcing, a)?;
    let den = mc.value.sqrt() * inverse_weighted_st_norm(forcing, w)?;
    if den == 0.0 {
        return Err(Error::DivisionGuard("zero forcing".into()));
    }
    Ok(g.l2_norm() / den)
}
