use fracstrich::weights::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::worst_deviation;
use crate::{row, Check, Context, Experiment, Outcome, Result, Table};

fn lattice(m_min: i32, m_max: i32, space_offsets: u32, time_offsets: u32) -> CubeLattice {
    CubeLattice {
        m_min,
        m_max,
        space_offsets,
        time_offsets,
    }
}

/// Powers, bumps, truncated powers and a table.
fn weight_suite() -> Vec<Weight> {
    vec![
        Weight::power(0.6, 0.3),
        Weight::power(1.0, 0.0),
        Weight::separable(2.0, SpaceFactor::Bump { width: 1.5 }, TimeFactor::Bump { width: 0.7 }),
        Weight::separable(
            1.0,
            SpaceFactor::TruncatedPower { gamma: 0.5, cut: 1.0 },
            TimeFactor::TruncatedPower { gamma: 0.1, cut: 2.0 },
        ),
        Weight::Tabulated {
            table: GridTable::new(
                vec![0.5, 1.0, 2.0],
                vec![-1.0, 0.0, 1.0],
                vec![1.0, 0.5, 0.1, 2.0, 1.0, 0.2, 1.0, 0.5, 0.1],
            )
            .expect("valid table"),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DilationBlock {
    pub alpha: f64,
    pub p: f64,
    pub lattice: CubeLattice,
    /// Dilations by 2^j.
    pub log2_factors: Vec<i32>,
}

impl Default for DilationBlock {
    fn default() -> Self {
        Self {
            alpha: 1.2,
            p: 2.0,
            lattice: lattice(-3, 3, 4, 2),
            log2_factors: vec![1, -2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonotoneBlock {
    pub alpha: f64,
    pub q: f64,
    pub p: f64,
    pub lattice: CubeLattice,
}

impl Default for MonotoneBlock {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            q: 1.5,
            p: 2.5,
            lattice: lattice(-2, 2, 3, 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointBlock {
    /// p is the endpoint (n + a)/α.
    pub alpha: f64,
    pub lattice: CubeLattice,
    pub weights: Vec<Weight>,
}

impl Default for EndpointBlock {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            lattice: lattice(-6, 6, 8, 4),
            weights: vec![
                Weight::separable(1.5, SpaceFactor::Bump { width: 1.0 }, TimeFactor::Bump { width: 2.0 }),
                Weight::separable(
                    1.5,
                    SpaceFactor::TruncatedPower { gamma: 0.5, cut: 1.0 },
                    TimeFactor::TruncatedPower { gamma: 0.1, cut: 1.0 },
                ),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McnormConfig {
    pub n: usize,
    pub a: f64,
    pub weights: Vec<Weight>,
    pub dilation: DilationBlock,
    pub monotone: MonotoneBlock,
    pub endpoint: EndpointBlock,
}

impl Default for McnormConfig {
    fn default() -> Self {
        Self {
            n: 3,
            a: 2.0,
            weights: weight_suite(),
            dilation: DilationBlock::default(),
            monotone: MonotoneBlock::default(),
            endpoint: EndpointBlock::default(),
        }
    }
}

impl Experiment for McnormConfig {
    fn smoke() -> Self {
        let base = Self::default();
        Self {
            weights: base.weights[..2].to_vec(),
            dilation: DilationBlock {
                lattice: lattice(-2, 2, 2, 1),
                log2_factors: vec![1],
                ..base.dilation
            },
            monotone: MonotoneBlock {
                lattice: lattice(-1, 1, 2, 1),
                ..base.monotone
            },
            endpoint: EndpointBlock {
                lattice: lattice(-3, 3, 4, 2),
                weights: base.endpoint.weights[..1].to_vec(),
                ..base.endpoint
            },
            ..base
        }
    }

    fn run(&self, _: &Context) -> Result<Outcome> {
        let (n, a) = (self.n, self.a);
        let mut table = Table::new(&["section", "weight", "case", "value", "reference", "relative_error"]);
        let d = &self.dilation;
        let pd = McParams::new(d.alpha, d.p, a, n)?;
        let mut dil_err = 0.0f64;
        let mut norms = Vec::new();
        for (i, w) in self.weights.iter().enumerate() {
            let rep = mc_norm(w, &pd, &d.lattice)?;
            norms.push(json!({"weight": i, "value": rep.value, "growth": rep.growth}));
            for &j in &d.log2_factors {
                let lambda = 2f64.powi(j);
                // cube m for w is cube m − j for w(λ·, λ^a·)
                let vl = mc_norm(&w.dilate(lambda, lambda.powf(a)), &pd, &d.lattice.shifted(-j))?.value;
                let want = lambda.powf(-d.alpha) * rep.value;
                let e = (vl / want - 1.0).abs();
                dil_err = dil_err.max(e);
                table.push(row!["dilation", i, j, vl, want, e]);
            }
        }

        let m = &self.monotone;
        let pq = McParams::new(m.alpha, m.q, a, n)?;
        let pp = McParams::new(m.alpha, m.p, a, n)?;
        let mut mono = 0.0f64;
        let mut cubes = 0usize;
        for (i, w) in self.weights.iter().enumerate() {
            let vq = mc_cube_values(w, &pq, &m.lattice, &Cubature::default())?;
            let vp = mc_cube_values(w, &pp, &m.lattice, &Cubature::default())?;
            let mut worst = 0.0f64;
            for (x, y) in vq.iter().zip(&vp) {
                if y.value > 0.0 {
                    worst = worst.max(x.value / y.value);
                } else if x.value > 0.0 {
                    worst = f64::INFINITY;
                }
            }
            cubes += vq.len();
            mono = mono.max(worst);
            table.push(row!["monotone", i, vq.len(), worst, 1.0, (worst - 1.0).max(0.0)]);
        }

        let e = &self.endpoint;
        let pe = McParams::new(e.alpha, (n as f64 + a) / e.alpha, a, n)?;
        let mut end_err = Vec::new();
        for (i, w) in e.weights.iter().enumerate() {
            let v = mc_norm(w, &pe, &e.lattice)?.value;
            let g = global_lp_norm(w, n, pe.p)?;
            end_err.push(v / g);
            table.push(row!["endpoint", i, pe.p, v, g, (v / g - 1.0).abs()]);
        }
        let end = worst_deviation(end_err);

        let mut out = Outcome::new(table);
        out.set("norms", norms);
        out.set("dilation_error", dil_err);
        out.set("monotone_worst_ratio", mono);
        out.set("monotone_cubes", cubes);
        out.set("endpoint_error", end);
        out.checks = vec![
            Check::at_most(Some(7), "scaling identity under dyadic dilation", dil_err, 1e-12),
            Check::at_most(Some(7), "q < p monotonicity, worst cube ratio", mono, 1.0 + 1e-12),
            Check::below(Some(7), "endpoint norm against global L^p", end, 0.05),
        ];
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaximalLevel {
    pub lattice: CubeLattice,
    pub sides_per_octave: u32,
    /// Table nodes per octave for w_*.
    pub nodes_per_octave: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SliceBlock {
    pub weight: Weight,
    pub lattice: CubeLattice,
    pub times: Vec<f64>,
    pub nodes_per_octave: u32,
}

impl Default for SliceBlock {
    fn default() -> Self {
        Self {
            weight: Weight::Sum {
                terms: vec![
                    Weight::power(0.6, 0.3),
                    Weight::separable(1.0, SpaceFactor::Bump { width: 1.0 }, TimeFactor::Bump { width: 2.0 }),
                ],
            },
            lattice: lattice(-3, 3, 4, 0),
            times: vec![0.05, 0.3, 1.0, 1.9, 4.0],
            nodes_per_octave: 4,
        }
    }
}

impl Default for MaximalLevel {
    fn default() -> Self {
        Self {
            lattice: lattice(-4, 4, 8, 4),
            sides_per_octave: 4,
            nodes_per_octave: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaximalConfig {
    pub n: usize,
    pub a: f64,
    pub alpha: f64,
    pub p: f64,
    /// Exponent of the maximal function (avg w^ρ)^{1/ρ}.
    pub rho: f64,
    pub weights: Vec<Weight>,
    pub coarse: MaximalLevel,
    pub fine: MaximalLevel,
    /// Radii and times where w_* >= w is checked.
    pub dominance_radii: Vec<f64>,
    pub dominance_times: Vec<f64>,
    pub slices: SliceBlock,
}

impl Default for MaximalConfig {
    fn default() -> Self {
        Self {
            n: 3,
            a: 2.0,
            alpha: 1.2,
            p: 2.0,
            rho: 1.5,
            weights: vec![
                Weight::power(1.2, 0.0),
                Weight::power(0.6, 0.3),
                Weight::separable(1.0, SpaceFactor::Bump { width: 1.0 }, TimeFactor::Power { gamma: 0.3 }),
            ],
            coarse: MaximalLevel::default(),
            fine: MaximalLevel {
                lattice: lattice(-5, 5, 16, 8),
                sides_per_octave: 8,
                nodes_per_octave: 8,
            },
            dominance_radii: (0..13).map(|i| 2f64.powf(i as f64 / 2.0 - 3.0)).collect(),
            dominance_times: vec![0.1, 0.7, 2.0],
            slices: SliceBlock::default(),
        }
    }
}

impl Experiment for MaximalConfig {
    fn smoke() -> Self {
        let base = Self::default();
        Self {
            weights: base.weights[1..2].to_vec(),
            coarse: MaximalLevel {
                lattice: lattice(-2, 2, 2, 1),
                ..MaximalLevel::default()
            },
            fine: MaximalLevel {
                lattice: lattice(-2, 2, 4, 2),
                sides_per_octave: 8,
                nodes_per_octave: 8,
            },
            dominance_radii: vec![0.5, 1.0, 2.0],
            dominance_times: vec![0.7],
            slices: SliceBlock {
                lattice: lattice(-1, 1, 2, 0),
                times: vec![1.0],
                nodes_per_octave: 2,
                ..SliceBlock::default()
            },
            ..base
        }
    }

    fn run(&self, _: &Context) -> Result<Outcome> {
        let params = McParams::new(self.alpha, self.p, self.a, self.n)?;
        let mut table = Table::new(&["section", "weight", "level", "r", "t", "value", "reference"]);
        let opts = |level: &MaximalLevel| MaximalOptions {
            sides_per_octave: level.sides_per_octave,
            ..MaximalOptions::default()
        };
        let mut deltas = Vec::new();
        let mut ratios = Vec::new();
        let mut hypotheses = true;
        for (i, w) in self.weights.iter().enumerate() {
            let mut pair = Vec::new();
            for (name, level) in [("coarse", &self.coarse), ("fine", &self.fine)] {
                let m = mc_norm_of_maximal(w, &params, &level.lattice, self.rho, &opts(level), level.nodes_per_octave)?;
                hypotheses &= m.hypotheses;
                table.push(row!["norm_ratio", i, name, None, None, m.ratio, m.norm.value]);
                pair.push(m.ratio);
            }
            ratios.push(pair[0]);
            deltas.push(pair[1] / pair[0]);
        }
        let delta = worst_deviation(deltas);
        let bounded = ratios.iter().all(|r| r.is_finite() && *r >= 1.0 - 1e-3);

        let mut dominance = f64::INFINITY;
        let dopts = MaximalOptions::default();
        for (i, w) in self.weights.iter().enumerate() {
            for &t in &self.dominance_times {
                let v = maximal_function(w, self.n, self.rho, &self.dominance_radii, t, &dopts)?;
                for (&r, &m) in self.dominance_radii.iter().zip(&v) {
                    let base = w.eval(r, t);
                    if base > 0.0 {
                        dominance = dominance.min(m / base);
                    }
                    table.push(row!["dominance", i, None, r, t, m, base]);
                }
            }
        }

        let s = &self.slices;
        let nodes = maximal_table_nodes(&s.weight, &s.lattice, self.n, s.nodes_per_octave);
        let mut consts = Vec::new();
        for &t in &s.times {
            let slice = maximal_slice(&s.weight, self.n, self.rho, &nodes, t, &dopts)?;
            let c = a2_constant(&slice, self.n, &s.lattice)?.constant;
            table.push(row!["a2_slice", None, None, None, t, c, None]);
            consts.push(c);
        }
        let hi = consts.iter().cloned().fold(0.0, f64::max);
        let lo = consts.iter().cloned().fold(f64::INFINITY, f64::min);
        let spread = hi / lo;

        let mut out = Outcome::new(table);
        out.set("norm_ratios", &ratios);
        out.set("refinement_delta", delta);
        out.set("hypotheses", hypotheses);
        out.set("min_dominance", dominance);
        out.set("a2_constants", &consts);
        out.set("a2_spread", spread);
        out.checks = vec![
            Check::new(Some(8), "mc_norm(w_*)/mc_norm(w) finite and >= 1", ratios.iter().cloned().fold(0.0, f64::max), "finite", bounded && hypotheses),
            Check::below(Some(8), "norm ratio refinement delta", delta, 0.1),
            Check::new(Some(8), "w_* >= w, smallest w_*/w", dominance, ">= 1", dominance >= 1.0),
            Check::below(Some(8), "A2 constants of w_* slices, max/min over t", spread, 1.5),
        ];
        Ok(out)
    }
}
