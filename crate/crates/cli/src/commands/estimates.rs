use fracstrich::estimates::*;
use fracstrich::weights::{CubeLattice, SpaceFactor, TimeFactor, Weight};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::worst_deviation;
use crate::{row, Check, Context, Experiment, Outcome, Result, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingCase {
    pub shape: DataShape,
    pub a: f64,
    pub s: f64,
    pub p: f64,
    pub log2_factors: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingScalingCase {
    pub forcing: ForcingShape,
    pub a: f64,
    pub p: f64,
    pub log2_factors: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrequencyBlock {
    pub shape: DataShape,
    pub a: f64,
    pub p: f64,
    pub s_values: Vec<f64>,
    pub k_min: i32,
    pub k_max: i32,
}

impl Default for FrequencyBlock {
    fn default() -> Self {
        Self {
            shape: DataShape::Gaussian { width: 0.125 },
            a: 2.0,
            p: 1.5,
            s_values: vec![0.0, 0.5],
            k_min: -7,
            k_max: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrichartzConfig {
    /// Replaces the built-in sweep as a whole when given.
    pub sweep: SweepConfig,
    /// Rerun the sweep at doubled resolution and on a grown domain.
    pub stability: bool,
    pub scaling: Vec<ScalingCase>,
    pub forcing_scaling: Vec<ForcingScalingCase>,
    pub frequency: FrequencyBlock,
}

impl Default for StrichartzConfig {
    fn default() -> Self {
        let g = DataShape::Gaussian { width: 2.0 };
        Self {
            sweep: SweepConfig::builtin(),
            stability: true,
            scaling: vec![
                ScalingCase {
                    shape: g.clone(),
                    a: 2.0,
                    s: 0.0,
                    p: 2.25,
                    log2_factors: vec![-1, 1],
                },
                ScalingCase {
                    shape: g.clone(),
                    a: 1.75,
                    s: 0.25,
                    p: 1.8,
                    log2_factors: vec![-1, 1],
                },
            ],
            forcing_scaling: vec![ForcingScalingCase {
                forcing: ForcingShape {
                    space: g,
                    t_center: 1.0,
                    t_width: 0.75,
                },
                a: 2.0,
                p: 2.25,
                log2_factors: vec![1],
            }],
            frequency: FrequencyBlock::default(),
        }
    }
}

impl Experiment for StrichartzConfig {
    fn smoke() -> Self {
        let base = Self::default();
        Self {
            sweep: SweepConfig {
                shapes: base.sweep.shapes[..1].to_vec(),
                families: base.sweep.families[..1].to_vec(),
                points: base.sweep.points[6..7].to_vec(),
                t_max: 4.0,
                lattice: CubeLattice {
                    m_min: -3,
                    m_max: 3,
                    space_offsets: 4,
                    time_offsets: 2,
                },
                ..base.sweep
            },
            stability: false,
            scaling: vec![ScalingCase {
                log2_factors: vec![1],
                ..base.scaling[0].clone()
            }],
            forcing_scaling: Vec::new(),
            frequency: FrequencyBlock {
                s_values: vec![0.0],
                ..base.frequency
            },
        }
    }

    fn run(&self, _: &Context) -> Result<Outcome> {
        let mut table = Table::new(&[
            "section", "case", "shape", "family", "a", "s", "p", "k", "lhs", "rhs", "ratio", "reference", "certified",
        ]);
        let cfg = &self.sweep;
        let (base, refine_delta, domain_delta, max_delta) = if self.stability {
            let st = sweep_stability(cfg)?;
            (st.base, Some(st.refine_delta), Some(st.domain_delta), Some(st.max_ratio_delta))
        } else {
            (sweep(cfg)?, None, None, None)
        };
        for (i, r) in base.rows.iter().enumerate() {
            table.push(row!["sweep", i, r.shape, r.family, r.a, r.s, r.p, None, r.lhs, r.rhs, r.ratio, r.mc_value, r.certified]);
        }

        let lattice = cfg.lattice;
        let mut scale_dev = Vec::new();
        for (i, c) in self.scaling.iter().enumerate() {
            let params = EstimateParams::new(cfg.n, c.a, c.s, c.p)?;
            let w = critical_power(cfg.n, c.a, params.alpha(), c.p);
            let res = Resolution::for_shape(&c.shape, c.a, cfg.t_max);
            for &j in &c.log2_factors {
                let (r0, r1) = homogeneous_scaling_pair(&c.shape, &w, &params, &lattice, &res, j)?;
                scale_dev.push(r1 / r0);
                table.push(row!["scaling", i, None, "critical_power", c.a, c.s, c.p, j, None, None, r1, r0, None]);
            }
        }
        for (i, c) in self.forcing_scaling.iter().enumerate() {
            let params = EstimateParams::new(cfg.n, c.a, 0.0, c.p)?;
            let w = critical_power(cfg.n, c.a, params.alpha(), c.p);
            let res = Resolution::for_forcing(&c.forcing, c.a, cfg.t_max);
            for &j in &c.log2_factors {
                let (r0, r1) = inhomogeneous_scaling_pair(&c.forcing, &w, &params, &lattice, &res, j)?;
                scale_dev.push(r1 / r0);
                table.push(row!["forcing_scaling", i, None, "critical_power", c.a, 0.0, c.p, j, None, None, r1, r0, None]);
            }
        }
        let scaling = worst_deviation(scale_dev);

        let fq = &self.frequency;
        let ks: Vec<i32> = (fq.k_min..=fq.k_max).collect();
        let bres = BandResolution::for_order(fq.a, cfg.t_max);
        let mut freq = Vec::new();
        let mut freq_checks = Vec::new();
        for &s in &fq.s_values {
            let params = EstimateParams::new(cfg.n, fq.a, s, fq.p)?;
            let alpha = params.alpha();
            let w = critical_power(cfg.n, fq.a, alpha, fq.p);
            let scan = frequency_scan(&fq.shape, &w, &params, alpha, &lattice, &ks, &bres)?;
            for r in &scan.rows {
                let fit = scan.fit.map(|f| f.intercept + f.slope * r.k as f64);
                table.push(row!["frequency", None, None, "critical_power", fq.a, s, fq.p, r.k, r.lhs, r.band_norm, r.ratio, fit, None]);
            }
            let slope = scan.fit.map_or(f64::NAN, |f| f.slope);
            let bound = (alpha - fq.a) / 2.0 + 0.15;
            freq.push(json!({"s": s, "alpha": alpha, "slope": slope, "bound": bound}));
            freq_checks.push(Check::at_most(Some(9), format!("band scan slope, s = {s}"), slope, bound));
        }

        let evaluations = base.rows.len();
        let mut out = Outcome::new(table);
        out.set("evaluations", evaluations);
        out.set("all_finite", base.all_finite);
        out.set("max_ratio", base.max_ratio);
        out.set("argmax", base.argmax);
        out.set("refine_delta", refine_delta);
        out.set("domain_delta", domain_delta);
        out.set("max_ratio_delta", max_delta);
        out.set("scaling_deviation", scaling);
        out.set("frequency", freq);
        out.checks = vec![
            Check::new(Some(9), "sweep evaluations", evaluations as f64, ">= 180", evaluations >= 180),
            Check::new(Some(9), "every sweep ratio finite", base.max_ratio, "finite", base.all_finite),
            Check::below(Some(9), "max ratio change under refinement and domain growth", max_delta.unwrap_or(f64::NAN), 0.2),
            Check::below(Some(9), "dyadic scaling invariance", scaling, 1e-3),
        ];
        out.checks.extend(freq_checks);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorawetzCase {
    pub b: f64,
    pub weight: MorawetzWeight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorawetzConfig {
    pub n: usize,
    pub a: f64,
    pub data: DataShape,
    pub t_max: f64,
    pub cases: Vec<MorawetzCase>,
    /// Rerun every case at doubled resolution.
    pub refinement: bool,
}

impl Default for MorawetzConfig {
    fn default() -> Self {
        Self {
            n: 3,
            a: 2.0,
            data: DataShape::Gaussian { width: 2.0 },
            t_max: DEFAULT_T_MAX,
            cases: vec![
                MorawetzCase {
                    b: 2.0,
                    weight: MorawetzWeight::Classical,
                },
                MorawetzCase {
                    b: 3.0,
                    weight: MorawetzWeight::Balanced,
                },
                MorawetzCase {
                    b: 4.5,
                    weight: MorawetzWeight::Balanced,
                },
            ],
            refinement: true,
        }
    }
}

impl Experiment for MorawetzConfig {
    fn smoke() -> Self {
        Self {
            t_max: 4.0,
            cases: Self::default().cases[..1].to_vec(),
            refinement: false,
            ..Self::default()
        }
    }

    fn run(&self, _: &Context) -> Result<Outcome> {
        let mut table = Table::new(&["b", "weight", "refine", "p_max", "lhs", "rhs", "ratio", "l2_norm", "tail_fraction"]);
        let res = Resolution::for_shape(&self.data, self.a, self.t_max);
        let levels: &[f64] = if self.refinement { &[1.0, 2.0] } else { &[1.0] };
        let mut per_level = Vec::new();
        for &refine in levels {
            let grids = Grids::new(self.n, self.a, &Resolution { refine, ..res })?;
            let f = self.data.profile(self.n, grids.plan.r_grid())?;
            let ev = Evolved::new(&f, &grids, self.a)?;
            let mut reps = Vec::new();
            for c in &self.cases {
                // The ratio does not involve p; any p in the window will do.
                let probe = EstimateParams::new(self.n, self.a, 0.0, 1.0)?;
                let (_, hi) = c.weight.window(&probe, c.b)?;
                let params = EstimateParams { p: hi, ..probe };
                let rep = morawetz_from(&ev, c.b, &params, c.weight, &grids)?;
                table.push(row![c.b, weight_name(&c.weight), refine, hi, rep.lhs, rep.rhs, rep.ratio, f.l2_norm(), rep.tail_fraction]);
                reps.push((rep, f.l2_norm()));
            }
            per_level.push(reps);
        }
        let base = &per_level[0];
        let finite = base.iter().all(|(r, _)| r.ratio.is_finite() && r.ratio > 0.0);
        let delta = if per_level.len() > 1 {
            worst_deviation(per_level[1].iter().zip(base).map(|(f, c)| f.0.ratio / c.0.ratio))
        } else {
            f64::NAN
        };
        let mut out = Outcome::new(table);
        let cases: Vec<_> = self
            .cases
            .iter()
            .zip(base)
            .map(|(c, (r, _))| json!({"b": c.b, "weight": weight_name(&c.weight), "ratio": r.ratio}))
            .collect();
        out.set("cases", cases);
        out.set("refinement_delta", delta);
        out.checks = vec![
            Check::new(Some(10), "all ratios finite and positive", base.iter().map(|r| r.0.ratio).fold(0.0, f64::max), "finite", finite),
            Check::below(Some(10), "refinement delta", delta, 0.2),
        ];
        for (c, (r, l2)) in self.cases.iter().zip(base) {
            if (c.b - self.a).abs() < 1e-12 {
                let dev = (r.rhs / l2 - 1.0).abs();
                out.checks.push(Check::below(Some(10), "b = a: rhs equals ‖f‖₂", dev, 1e-6));
            }
        }
        Ok(out)
    }
}

fn weight_name(w: &MorawetzWeight) -> String {
    match w {
        MorawetzWeight::Classical => "classical".into(),
        MorawetzWeight::Balanced => "balanced".into(),
        MorawetzWeight::Power { gamma_x, gamma_t } => format!("power({gamma_x}, {gamma_t})"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtremizeConfig {
    pub n: usize,
    pub a: f64,
    pub s: f64,
    pub p: f64,
    pub t_max: f64,
    pub weight: Weight,
    pub family: DataFamily,
    pub budget: SearchBudget,
    pub lattice: CubeLattice,
    /// Dense grid over a one-parameter family for comparison; 0 skips it.
    pub grid_points: usize,
}

impl Default for ExtremizeConfig {
    fn default() -> Self {
        Self {
            n: 3,
            a: 2.0,
            s: 0.0,
            p: 2.25,
            t_max: DEFAULT_T_MAX,
            weight: Weight::separable(1.0, SpaceFactor::Bump { width: 3.0 }, TimeFactor::Bump { width: 2.0 }),
            family: DataFamily::GaussianWidth { lo: 0.25, hi: 4.0 },
            budget: SearchBudget {
                restarts: 4,
                evaluations: 60,
                seed: 3,
            },
            lattice: CubeLattice::default(),
            grid_points: 400,
        }
    }
}

impl Experiment for ExtremizeConfig {
    fn smoke() -> Self {
        Self {
            budget: SearchBudget {
                restarts: 2,
                evaluations: 12,
                seed: 3,
            },
            lattice: CubeLattice {
                m_min: -3,
                m_max: 3,
                space_offsets: 4,
                time_offsets: 2,
            },
            grid_points: 16,
            ..Self::default()
        }
    }

    fn run(&self, _: &Context) -> Result<Outcome> {
        let params = EstimateParams::new(self.n, self.a, self.s, self.p)?;
        let obj = objective(&self.family, &self.weight, &params, &self.lattice, self.t_max)?;
        let best = maximize(&obj, &self.budget)?;
        let mut table = Table::new(&["section", "restart", "evaluation", "params", "ratio"]);
        let join = |x: &[f64]| x.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ");
        for e in &best.trace {
            table.push(row!["trace", e.restart, e.evaluation, join(&e.params), e.ratio]);
        }
        let mut out = Outcome::new(table);
        if obj.lower.len() == 1 && self.grid_points >= 2 {
            let (lo, hi) = (obj.lower[0], obj.upper[0]);
            let mut top = f64::NEG_INFINITY;
            for i in 0..self.grid_points {
                let x = lo + (hi - lo) * i as f64 / (self.grid_points - 1) as f64;
                let v = obj.eval(&[x]);
                top = top.max(v);
                out.table.push(row!["grid", None, i, join(&[x]), v]);
            }
            out.set("grid_max", top);
            out.checks.push(Check::new(
                None,
                "search maximum against the dense grid",
                best.ratio / top,
                ">= 0.99",
                best.ratio >= 0.99 * top,
            ));
        }
        out.set("ratio", best.ratio);
        out.set("params", &best.params);
        out.set("partial", best.partial);
        out.set("evaluations", best.trace.len());
        out.checks.push(Check::new(None, "extremal ratio finite", best.ratio, "finite", best.ratio.is_finite()));
        Ok(out)
    }
}
