use fracstrich::oscint::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{row, Check, Context, Experiment, Outcome, Result, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VdcConfig {
    pub orders: Vec<f64>,
    /// R = 2^m for m in [r_log2_min, r_log2_max].
    pub r_log2_min: i32,
    pub r_log2_max: i32,
    pub t_per_octave: usize,
}

impl Default for VdcConfig {
    fn default() -> Self {
        Self {
            orders: vec![1.5, 2.0, 3.0],
            r_log2_min: 4,
            r_log2_max: 12,
            t_per_octave: VDC_T_PER_OCTAVE,
        }
    }
}

impl Experiment for VdcConfig {
    fn smoke() -> Self {
        Self {
            orders: vec![2.0],
            r_log2_max: 11,
            t_per_octave: 8,
            ..Self::default()
        }
    }

    fn run(&self, _: &Context) -> Result<Outcome> {
        let rs: Vec<f64> = (self.r_log2_min..=self.r_log2_max).map(|m| 2f64.powi(m)).collect();
        let amp = Amplitude::phi_squared();
        let mut table = Table::new(&["a", "r", "sup", "t_argmax", "samples", "fit"]);
        let mut scans = Vec::new();
        let mut checks = Vec::new();
        let mut worst: Option<f64> = None;
        for &a in &self.orders {
            let scan = vdc_scan(&amp, a, &rs, self.t_per_octave)?;
            for row in &scan.rows {
                let fit = (scan.fit.intercept + scan.fit.slope * row.r.log2()).exp2();
                table.push(row![a, row.r, row.sup, row.t_argmax, row.samples, fit]);
            }
            let s = scan.fit.slope;
            if worst.is_none_or(|w| (s + 0.5).abs() > (w + 0.5).abs()) {
                worst = Some(s);
            }
            scans.push(json!({"a": a, "slope": s, "intercept": scan.fit.intercept, "max_residual": scan.fit.max_residual}));
            checks.push(Check::within(Some(2), format!("sup_t |I(R, t)| slope, a = {a}"), s, -0.55, -0.45));
        }
        let mut out = Outcome::new(table);
        // The slope farthest from −1/2.
        out.set("slope", worst);
        out.set("scans", scans);
        out.checks = checks;
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub points_per_octave: usize,
    pub t_per_octave: usize,
    pub t_min_log2: i32,
    pub t_extra: i32,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        let s = KernelSampling::default();
        Self {
            points_per_octave: s.points_per_octave,
            t_per_octave: s.t_per_octave,
            t_min_log2: s.t_min_log2,
            t_extra: s.t_extra,
        }
    }
}

impl From<SamplingConfig> for KernelSampling {
    fn from(s: SamplingConfig) -> Self {
        KernelSampling {
            points_per_octave: s.points_per_octave,
            t_per_octave: s.t_per_octave,
            t_min_log2: s.t_min_log2,
            t_extra: s.t_extra,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelRegime {
    Diagonal,
    OffDiagonal,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagonalBlock {
    pub j_min: u32,
    pub j_max: u32,
    /// Fewest diagonal samples accepted for the fit.
    pub min_fit: usize,
    pub sampling: SamplingConfig,
}

impl Default for DiagonalBlock {
    fn default() -> Self {
        Self {
            j_min: 1,
            j_max: 7,
            min_fit: 7,
            sampling: SamplingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffDiagonalBlock {
    /// Pairs j > k >= 0 with j − k in `gaps` and j + k <= max_sum.
    pub gaps: Vec<u32>,
    pub max_sum: u32,
    /// Base density; the constant is recomputed at twice this density.
    pub sampling: SamplingConfig,
}

impl Default for OffDiagonalBlock {
    fn default() -> Self {
        Self {
            gaps: vec![2, 3, 4, 5],
            max_sum: 10,
            sampling: SamplingConfig {
                points_per_octave: 32,
                t_per_octave: 12,
                ..SamplingConfig::default()
            },
        }
    }
}

impl OffDiagonalBlock {
    fn pairs(&self) -> Vec<DyadicAnnulusPair> {
        let mut out = Vec::new();
        for &g in &self.gaps {
            let mut k = 0;
            while 2 * k + g <= self.max_sum {
                out.push(DyadicAnnulusPair::new(k + g, k));
                k += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub a: f64,
    pub dims: Vec<usize>,
    pub regime: KernelRegime,
    pub diagonal: DiagonalBlock,
    pub off_diagonal: OffDiagonalBlock,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            a: 2.0,
            dims: vec![2, 3],
            regime: KernelRegime::Both,
            diagonal: DiagonalBlock::default(),
            off_diagonal: OffDiagonalBlock::default(),
        }
    }
}

impl Experiment for KernelConfig {
    fn smoke() -> Self {
        let coarse = SamplingConfig {
            points_per_octave: 8,
            t_per_octave: 6,
            ..SamplingConfig::default()
        };
        Self {
            dims: vec![2],
            diagonal: DiagonalBlock {
                j_max: 3,
                min_fit: 3,
                sampling: coarse,
                ..DiagonalBlock::default()
            },
            off_diagonal: OffDiagonalBlock {
                gaps: vec![2],
                max_sum: 4,
                sampling: coarse,
            },
            ..Self::default()
        }
    }

    fn run(&self, _: &Context) -> Result<Outcome> {
        let mut table = Table::new(&["regime", "n", "j", "k", "density", "sup", "predicted_exponent", "bound", "envelope_constant"]);
        let mut checks = Vec::new();
        let mut diag = Vec::new();
        let mut off = Vec::new();
        let do_diag = self.regime != KernelRegime::OffDiagonal;
        let do_off = self.regime != KernelRegime::Diagonal;
        for &n in &self.dims {
            if do_diag {
                let d = &self.diagonal;
                let pairs: Vec<_> = (d.j_min..=d.j_max).map(|j| DyadicAnnulusPair::new(j, j)).collect();
                let scan = kernel_decay_scan(self.a, n, &pairs, &d.sampling.into(), d.min_fit)?;
                let fit = scan.diagonal.ok_or_else(|| {
                    crate::CliError::Schema(format!("diagonal fit needs at least {} pairs", d.min_fit.max(2)))
                })?;
                for r in &scan.rows {
                    let x = (r.j + r.k) as f64;
                    table.push(row!["diagonal", n, r.j, r.k, "base", r.sup, r.predicted_exponent, (fit.intercept + fit.slope * x).exp2(), r.envelope_constant]);
                }
                let want = -(n as f64 - 1.0) / 2.0;
                checks.push(Check::within(
                    Some(3),
                    format!("log2 sup |K_jj| against 2j, n = {n}"),
                    fit.slope,
                    want - 0.15,
                    want + 0.15,
                ));
                diag.push(json!({"n": n, "slope": fit.slope, "predicted": want, "max_residual": fit.max_residual}));
            }
            if do_off {
                let o = &self.off_diagonal;
                let pairs = o.pairs();
                let base: KernelSampling = o.sampling.into();
                let mut cs = Vec::new();
                for (name, s) in [("base", base), ("doubled", base.doubled())] {
                    let scan = kernel_decay_scan(self.a, n, &pairs, &s, 0)?;
                    let c = scan
                        .off_diagonal_constant
                        .ok_or_else(|| crate::CliError::Schema("off-diagonal scan needs pairs with |j − k| > 1".into()))?;
                    for r in &scan.rows {
                        table.push(row!["off_diagonal", n, r.j, r.k, name, r.sup, r.predicted_exponent, c * r.predicted_exponent.exp2(), r.envelope_constant]);
                    }
                    cs.push(c);
                }
                let change = cs[1] / cs[0] - 1.0;
                checks.push(Check::new(
                    Some(4),
                    format!("off-diagonal constant under doubled density, n = {n}"),
                    change,
                    "|C'/C − 1| <= 0.15",
                    change.abs() <= 0.15,
                ));
                off.push(json!({"n": n, "pairs": pairs.len(), "constant": cs[0], "constant_doubled": cs[1], "relative_change": change}));
            }
        }
        let mut out = Outcome::new(table);
        out.set("a", self.a);
        out.set("diagonal", diag);
        out.set("off_diagonal", off);
        out.checks = checks;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialsConfig {
    pub trials: usize,
    pub refinements: usize,
    pub modes: usize,
    pub panels: usize,
    pub seed: u64,
}

impl Default for TrialsConfig {
    fn default() -> Self {
        let t = TkTrials::default();
        Self {
            trials: t.trials,
            refinements: t.refinements,
            modes: t.modes,
            panels: t.panels,
            seed: t.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TkConfig {
    pub dims: Vec<usize>,
    pub orders: Vec<f64>,
    pub k_min: u32,
    pub k_max: u32,
    pub trials: TrialsConfig,
}

impl Default for TkConfig {
    fn default() -> Self {
        Self {
            dims: vec![2, 3],
            orders: vec![1.5, 2.0],
            k_min: 0,
            k_max: 8,
            trials: TrialsConfig::default(),
        }
    }
}

impl Experiment for TkConfig {
    fn smoke() -> Self {
        Self {
            dims: vec![3],
            orders: vec![2.0],
            k_max: 7,
            trials: TrialsConfig {
                trials: 4,
                ..TrialsConfig::default()
            },
            ..Self::default()
        }
    }

    fn run(&self, _: &Context) -> Result<Outcome> {
        let ks: Vec<u32> = (self.k_min..=self.k_max).collect();
        let t = &self.trials;
        let trials = TkTrials {
            trials: t.trials,
            refinements: t.refinements,
            modes: t.modes,
            panels: t.panels,
            seed: t.seed,
        };
        let mut table = Table::new(&["n", "a", "k", "norm", "multiplier_sup", "fit"]);
        let mut scans = Vec::new();
        let mut checks = Vec::new();
        for &n in &self.dims {
            for &a in &self.orders {
                let scan = tk_norm_scan(a, n, &ks, &trials)?;
                for r in &scan.rows {
                    let fit = (scan.fit.intercept + scan.fit.slope * r.k as f64).exp2();
                    table.push(row![n, a, r.k, r.norm, r.multiplier_sup, fit]);
                }
                scans.push(json!({"n": n, "a": a, "slope": scan.fit.slope, "max_residual": scan.fit.max_residual}));
                checks.push(Check::within(Some(5), format!("log2 ‖T_k‖ against k, n = {n}, a = {a}"), scan.fit.slope, 0.4, 0.6));
            }
        }
        let mut out = Outcome::new(table);
        out.set("scans", scans);
        out.checks = checks;
        Ok(out)
    }
}
