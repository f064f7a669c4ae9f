use fracstrich::estimates::{DataShape, ForcingShape};
use fracstrich::propagator::SpaceTimeField;
use fracstrich::weights::CubeLattice;
use fracstrich::wellposed::*;
use fracstrich::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{row, Check, Context, Experiment, Outcome, Result, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WellposedConfig {
    pub n: usize,
    pub a: f64,
    pub p: f64,
    pub data: DataShape,
    pub forcing: Option<ForcingShape>,
    pub forcing_amplitude: f64,
    pub potential: Potential,
    pub t_max: f64,
    pub refine: f64,
    pub lattice: CubeLattice,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub trials: usize,
    pub seed: u64,
    /// Solve again at doubled resolution and compare the bound constants.
    pub refinement: bool,
}

impl Default for WellposedConfig {
    fn default() -> Self {
        let s = ProblemSpec::default_small();
        Self {
            n: s.n,
            a: s.a,
            p: s.p,
            data: s.data,
            forcing: s.forcing,
            forcing_amplitude: s.forcing_amplitude,
            potential: s.potential,
            t_max: s.t_max,
            refine: s.refine,
            lattice: s.lattice,
            tolerance: 1e-8,
            max_iterations: 30,
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            refinement: true,
        }
    }
}

impl WellposedConfig {
    fn spec(&self, refine: f64) -> ProblemSpec {
        ProblemSpec {
            n: self.n,
            a: self.a,
            p: self.p,
            data: self.data.clone(),
            forcing: self.forcing.clone(),
            forcing_amplitude: self.forcing_amplitude,
            potential: self.potential,
            t_max: self.t_max,
            refine,
            lattice: self.lattice,
        }
    }
}

/// Largest ‖u(t_{i+1}) − u(t_i)‖₂ between neighbouring time nodes, relative
/// to sup_t ‖u(t)‖₂: a sampled proxy for continuity in time.
fn continuity_proxy(u: &SpaceTimeField) -> f64 {
    let nt = u.tgrid().len();
    let sup = u.sup_l2();
    if nt < 2 || sup == 0.0 {
        return 0.0;
    }
    let one = Complex64::new(1.0, 0.0);
    (1..nt)
        .map(|i| {
            let d = u.profile_at(i).combine(one, &u.profile_at(i - 1), -one).map_or(f64::NAN, |p| p.l2_norm());
            d / sup
        })
        .fold(0.0, f64::max)
}

impl Experiment for WellposedConfig {
    fn smoke() -> Self {
        Self {
            forcing: None,
            t_max: 1.0,
            lattice: CubeLattice {
                m_min: -3,
                m_max: 3,
                space_offsets: 4,
                time_offsets: 2,
            },
            trials: 2,
            refinement: false,
            ..Self::default()
        }
    }

    fn run(&self, _: &Context) -> Result<Outcome> {
        let mut table = Table::new(&["section", "refine", "index", "value", "aux"]);
        let problem = self.spec(self.refine).build()?;
        let full = contraction_ratio(&problem, self.trials, self.seed)?;
        let half = contraction_ratio(&problem.with_potential(problem.potential.scaled(0.5))?, self.trials, self.seed)?;
        for (i, (f, h)) in full.per_trial.iter().zip(&half.per_trial).enumerate() {
            table.push(row!["contraction", self.refine, i, *f, *h]);
        }
        let sol = picard_solve(&problem, self.tolerance, self.max_iterations)?;
        let rates = sol.rates();
        for (i, it) in sol.history.iter().enumerate() {
            let rate = if i == 0 { None } else { rates.get(i - 1).copied() };
            table.push(row!["picard", self.refine, it.iteration, it.residual, rate]);
            table.push(row!["sup_l2", self.refine, it.iteration, it.sup_l2, None]);
        }
        let bounds = solution_bounds_check(&sol.solution, &problem)?;
        let continuity = continuity_proxy(&sol.solution);
        let mut all_bounds = vec![(self.refine, bounds)];
        if self.refinement {
            let fine = self.spec(2.0 * self.refine).build()?;
            let fsol = picard_solve(&fine, self.tolerance, self.max_iterations)?;
            all_bounds.push((2.0 * self.refine, solution_bounds_check(&fsol.solution, &fine)?));
        }
        for (refine, b) in &all_bounds {
            table.push(row!["bounds", *refine, "weighted_constant", b.weighted_constant, b.mc_value]);
            table.push(row!["bounds", *refine, "energy_constant", b.energy_constant, b.mc_value]);
        }

        let ratio = full.ratio;
        let halving = half.ratio / ratio;
        let last = sol.history.last().map_or(f64::NAN, |h| h.residual);
        let worst_rate = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut out = Outcome::new(table);
        out.set("contraction_ratio", ratio);
        out.set("half_epsilon_ratio", half.ratio);
        out.set("iterations", sol.history.len());
        out.set("final_residual", last);
        out.set("rates", &rates);
        out.set("bounds", all_bounds.iter().map(|(r, b)| json!({"refine": r, "report": b})).collect::<Vec<_>>());
        // Continuity in time is only sampled on the time nodes.
        out.set("continuity_proxy", continuity);
        out.checks = vec![
            Check::below(Some(11), "contraction ratio", ratio, 0.5),
            Check::within(Some(11), "ratio at ε/2 over ratio at ε", halving, 0.45, 0.55),
            Check::new(
                Some(11),
                "Picard residual",
                last,
                format!("< {} within {} iterations", self.tolerance, self.max_iterations),
                last < self.tolerance && sol.history.len() <= self.max_iterations,
            ),
            Check::new(
                Some(11),
                "worst step rate",
                worst_rate,
                format!("<= {}", ratio + 0.05),
                rates.iter().all(|&r| r <= ratio + 0.05),
            ),
        ];
        if let [(_, c), (_, f)] = all_bounds.as_slice() {
            let dw = (f.weighted_constant / c.weighted_constant - 1.0).abs();
            let de = (f.energy_constant / c.energy_constant - 1.0).abs();
            out.checks.push(Check::below(Some(11), "weighted bound constant under refinement", dw, 0.15));
            out.checks.push(Check::below(Some(11), "energy bound constant under refinement", de, 0.15));
        }
        Ok(out)
    }
}
