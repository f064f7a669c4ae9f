//! Weighted space-time norms and the ratios
//!
//! ```text
//! ‖e^{itL} f‖_{L²(w)} / (‖w‖^{1/2}_{α,p} ‖f‖_{Ḣ^s}),          α = a + 2s
//! ‖∫_0^t e^{i(t−s)L} F(s) ds‖_{L²(w)} / (‖w‖_{a,p} ‖F‖_{L²(w^{−1})})
//! ‖|w|^{b/2} e^{itL} f‖_{L²} / ‖f‖_{Ḣ^{(b−a)/2}}
//! ```
//!
//! with `L = (−Δ)^{a/2}` and `‖w‖_{α,p}` the lattice Morrey–Campanato norm.
//! Every space-time norm lives on |t| ≤ T, r ≤ r_max; the share of the evolved
//! mass leaving r ≤ r_max is measured and must stay below [`TAIL_TOLERANCE`].

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fit::FitReport;
use crate::propagator::{duhamel, evolve_field_spectral, DyadicCutoff, SpaceTimeField, TimeGrid};
use crate::radial::{
    hankel_forward, HankelPlan, RadialGrid, RadialProfile, SpectralProfile, REFERENCE_PANEL_PHASE,
};
use crate::weights::{mc_norm, CubeLattice, McParams, McReport, SpaceFactor, TimeFactor, Weight};
use crate::{Complex64, Error, Result};

/// Largest share of ‖f‖² allowed outside r ≤ r_max at any sampled time.
pub const TAIL_TOLERANCE: f64 = 1e-8;

pub const DEFAULT_T_MAX: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateParams {
    pub n: usize,
    pub a: f64,
    pub s: f64,
    pub p: f64,
}

/// Which parameter windows hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Admissibility {
    /// a/(a−1) < p ≤ (n+a)/a; also the inhomogeneous window.
    pub homogeneous: bool,
    /// max{a/(a−1+2s), 1} < p ≤ (n+a)/(a+2s).
    pub sobolev: bool,
}

fn in_window(p: f64, lo: f64, hi: f64) -> bool {
    p > lo && p <= hi * (1.0 + 1e-12)
}

impl EstimateParams {
    pub fn new(n: usize, a: f64, s: f64, p: f64) -> Result<Self> {
        let e = Self { n, a, s, p };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!("dimension must be >= 2, got {}", self.n)));
        }
        if !(self.a > 1.0 && self.a.is_finite()) {
            return Err(Error::hypothesis(format!("estimates need a > 1, got {}", self.a)));
        }
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return Err(Error::invalid(format!("s must be >= 0, got {}", self.s)));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::invalid(format!("p must be >= 1, got {}", self.p)));
        }
        Ok(())
    }

    /// Exponent of the weight class: a + 2s.
    pub fn alpha(&self) -> f64 {
        self.a + 2.0 * self.s
    }

    pub fn homogeneous_window(&self) -> (f64, f64) {
        (self.a / (self.a - 1.0), (self.n as f64 + self.a) / self.a)
    }

    pub fn sobolev_window(&self) -> (f64, f64) {
        let lo = (self.a / (self.a - 1.0 + 2.0 * self.s)).max(1.0);
        (lo, (self.n as f64 + self.a) / self.alpha())
    }

    /// max{a/(b−1), 1} < p ≤ (n+a)/b, for b ∈ [a, n+a).
    pub fn morawetz_window(&self, b: f64) -> Result<(f64, f64)> {
        let nf = self.n as f64;
        if !(b >= self.a && b < nf + self.a) {
            return Err(Error::hypothesis(format!("b must lie in [a, n+a) = [{}, {}), got {b}", self.a, nf + self.a)));
        }
        Ok(((self.a / (b - 1.0)).max(1.0), (nf + self.a) / b))
    }

    pub fn admissibility(&self) -> Admissibility {
        let (lo, hi) = self.homogeneous_window();
        let (slo, shi) = self.sobolev_window();
        Admissibility {
            homogeneous: self.s == 0.0 && in_window(self.p, lo, hi),
            sobolev: in_window(self.p, slo, shi),
        }
    }

    pub fn mc_params(&self, alpha: f64) -> Result<McParams> {
        McParams::new(alpha, self.p, self.a, self.n)
    }
}

pub type RadialFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Radial data families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataShape {
    /// e^{−r²/(2σ²)}
    Gaussian { width: f64 },
    /// (n − r²/σ²) e^{−r²/(2σ²)}, i.e. −σ²Δ of the Gaussian; f̂ vanishes to
    /// second order at ρ = 0.
    Mexican { width: f64 },
    /// cos(κr) e^{−r²/(2σ²)}
    Modulated { width: f64, freq: f64 },
    /// Σ_m c_m cos(mκr) e^{−r²/(2σ²)} with c_m uniform in [−1, 1].
    Noise { width: f64, freq: f64, modes: usize, seed: u64 },
    /// Linear combination of other shapes.
    Combination { terms: Vec<(f64, DataShape)> },
}

impl DataShape {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            DataShape::Gaussian { width } | DataShape::Mexican { width } => *width > 0.0,
            DataShape::Modulated { width, freq } => *width > 0.0 && *freq >= 0.0,
            DataShape::Noise { width, freq, modes, .. } => *width > 0.0 && *freq >= 0.0 && *modes > 0,
            DataShape::Combination { terms } => {
                for (_, t) in terms {
                    t.validate()?;
                }
                !terms.is_empty()
            }
        };
        if !ok {
            return Err(Error::invalid(format!("invalid data shape {self:?}")));
        }
        Ok(())
    }

    fn noise_coefficients(modes: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..modes).map(|_| rng.random_range(-1.0..=1.0)).collect()
    }

    /// A closure evaluating the shape; noise coefficients are drawn once.
    pub fn evaluator(&self, n: usize) -> RadialFn {
        let nf = n as f64;
        match self.clone() {
            DataShape::Gaussian { width } => Box::new(move |r| (-0.5 * (r / width).powi(2)).exp()),
            DataShape::Mexican { width } => Box::new(move |r| {
                let u = (r / width).powi(2);
                (nf - u) * (-0.5 * u).exp()
            }),
            DataShape::Modulated { width, freq } => {
                Box::new(move |r| (freq * r).cos() * (-0.5 * (r / width).powi(2)).exp())
            }
            DataShape::Noise { width, freq, modes, seed } => {
                let c = Self::noise_coefficients(modes, seed);
                Box::new(move |r| {
                    let env = (-0.5 * (r / width).powi(2)).exp();
                    c.iter().enumerate().map(|(m, cm)| cm * (m as f64 * freq * r).cos()).sum::<f64>() * env
                })
            }
            DataShape::Combination { terms } => {
                let parts: Vec<(f64, RadialFn)> = terms.iter().map(|(c, s)| (*c, s.evaluator(n))).collect();
                Box::new(move |r| parts.iter().map(|(c, f)| c * f(r)).sum())
            }
        }
    }

    /// Radius beyond which |f| < e^{−18} of its scale.
    pub fn extent(&self) -> f64 {
        match self {
            DataShape::Gaussian { width }
            | DataShape::Mexican { width }
            | DataShape::Modulated { width, .. }
            | DataShape::Noise { width, .. } => 6.5 * width,
            DataShape::Combination { terms } => terms.iter().map(|(_, s)| s.extent()).fold(0.0, f64::max),
        }
    }

    /// (centre, spread) of the spectrum: ρ beyond centre + 6.5·spread carries
    /// no energy at double precision.
    pub fn spectral_band(&self) -> (f64, f64) {
        match self {
            DataShape::Gaussian { width } => (0.0, 1.0 / width),
            DataShape::Mexican { width } => (0.0, 1.1 / width),
            DataShape::Modulated { width, freq } => (*freq, 1.0 / width),
            DataShape::Noise { width, freq, modes, .. } => ((*modes as f64 - 1.0) * freq, 1.0 / width),
            DataShape::Combination { terms } => terms
                .iter()
                .map(|(_, s)| s.spectral_band())
                .fold((0.0, 0.0), |(c, w), (c2, w2)| (c.max(c2), w.max(w2))),
        }
    }

    pub fn profile(&self, n: usize, grid: &RadialGrid) -> Result<RadialProfile> {
        RadialProfile::from_real_fn(n, grid, self.evaluator(n))
    }
}

/// Domain and resolution of the space-time grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    pub r_max: f64,
    pub rho_max: f64,
    pub t_max: f64,
    /// 1 at reference resolution; 2 halves every panel.
    pub refine: f64,
    /// Geometric levels toward r = 0 and toward t = 0.
    pub r_grading: u32,
    pub t_grading: u32,
    /// Upper bound on the time panel, for forcings narrower than the
    /// oscillation scale.
    #[serde(default)]
    pub max_t_panel: Option<f64>,
}

impl Resolution {
    /// Sized for `shape`: ρ_max covers its spectrum and r_max covers its
    /// support plus the distance travelled by the spectrum up to ρ_v at
    /// group velocity aρ^{a−1}.
    pub fn for_shape(shape: &DataShape, a: f64, t_max: f64) -> Self {
        let (c, w) = shape.spectral_band();
        let rho_max = c + 6.5 * w;
        let rho_v = c + 5.0 * w;
        let r_max = shape.extent() + 1.05 * a * rho_v.powf(a - 1.0) * t_max;
        Self {
            r_max,
            rho_max,
            t_max,
            refine: 1.0,
            r_grading: 16,
            t_grading: 24,
            max_t_panel: None,
        }
    }

    /// Sized for a forcing: the time panels resolve its bump in t.
    pub fn for_forcing(forcing: &ForcingShape, a: f64, t_max: f64) -> Self {
        Self {
            max_t_panel: Some(forcing.t_width / 8.0),
            ..Self::for_shape(&forcing.space, a, t_max)
        }
    }

    /// Smallest resolution covering every shape.
    pub fn covering(shapes: &[DataShape], a: f64, t_max: f64) -> Self {
        let mut res = Self::for_shape(&shapes[0], a, t_max);
        for s in &shapes[1..] {
            let o = Self::for_shape(s, a, t_max);
            res.r_max = res.r_max.max(o.r_max);
            res.rho_max = res.rho_max.max(o.rho_max);
        }
        res
    }

    pub fn doubled(&self) -> Self {
        Self {
            refine: 2.0 * self.refine,
            ..*self
        }
    }

    pub fn grown(&self, factor: f64) -> Self {
        Self {
            r_max: self.r_max * factor,
            t_max: self.t_max * factor,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r_max", self.r_max), ("rho_max", self.rho_max), ("t_max", self.t_max), ("refine", self.refine)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Hankel plan and time grid of one computation.
/// Largest r × t field or r × ρ transform matrix [`Grids::new`] accepts.
pub const MAX_GRID_ENTRIES: usize = 1 << 24;

#[derive(Debug, Clone)]
pub struct Grids {
    pub plan: HankelPlan,
    pub tgrid: TimeGrid,
}

impl Grids {
    pub fn new(n: usize, a: f64, res: &Resolution) -> Result<Self> {
        res.validate()?;
        let phase = REFERENCE_PANEL_PHASE / res.refine;
        let r = RadialGrid::uniform(res.r_max, phase / res.rho_max, res.r_grading, &[])?;
        let (r_max, t_max) = (res.r_max, res.t_max);
        let rho = RadialGrid::for_phase_speed(res.rho_max, |p| r_max + t_max * a * p.powf(a - 1.0), phase, 0)?;
        let panel = (phase / res.rho_max.powf(a)).min(res.max_t_panel.map_or(f64::INFINITY, |p| p / res.refine));
        let tgrid = TimeGrid::symmetric(res.t_max, panel, res.t_grading)?;
        let (nr, nrho, nt) = (r.len(), rho.len(), tgrid.len());
        if nr * nrho.max(nt) > MAX_GRID_ENTRIES {
            return Err(Error::resolution(format!(
                "grids of {nr} r, {nrho} rho and {nt} t nodes exceed the budget of {MAX_GRID_ENTRIES} entries per field"
            )));
        }
        Ok(Self {
            plan: HankelPlan::new(n, r, rho)?,
            tgrid,
        })
    }

    /// Grids for (x, t) → (λx, λ^a t): r by 1/λ, ρ by λ, t by λ^{−a}.
    pub fn scaled(&self, lambda: f64, a: f64) -> Result<Self> {
        Ok(Self {
            plan: self.plan.scaled(1.0 / lambda)?,
            tgrid: self.tgrid.scaled(lambda.powf(-a)),
        })
    }
}

/// (ω_{n−1} ∫∫ |u|² w r^{n−1} dr dt)^{1/2} on the field's grids.
pub fn weighted_st_norm(u: &SpaceTimeField, w: &Weight) -> Result<f64> {
    weighted_st_norm_by(u, |r, t| w.eval(r, t), w.split().map(|s| (s, w.clone())))
}

/// Same with the reciprocal weight 1/w.
pub fn inverse_weighted_st_norm(u: &SpaceTimeField, w: &Weight) -> Result<f64> {
    let nr = u.rgrid().len();
    for (i, v) in u.values().iter().enumerate() {
        if v.norm_sqr() > 0.0 {
            let (r, t) = (u.rgrid().nodes()[i % nr], u.tgrid().nodes()[i / nr]);
            if w.eval(r, t) <= 0.0 {
                return Err(Error::DivisionGuard(format!(
                    "field is nonzero at (r, t) = ({r}, {t}) where the weight vanishes"
                )));
            }
        }
    }
    weighted_st_norm_by(u, |r, t| 1.0 / w.eval(r, t), None)
}

fn weighted_st_norm_by(
    u: &SpaceTimeField,
    w: impl Fn(f64, f64) -> f64,
    separable: Option<(crate::weights::Split, Weight)>,
) -> Result<f64> {
    let rn = u.rgrid().nodes();
    let tn = u.tgrid().nodes();
    let nr = rn.len();
    let check = |v: f64, r: f64, t: f64| -> Result<f64> {
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(Error::SingularSampling(format!("weight is {v} at (r, t) = ({r}, {t})")))
        }
    };
    let (space, time): (Option<Vec<f64>>, Option<Vec<f64>>) = match &separable {
        Some((s, _)) => (
            Some(rn.iter().map(|&r| s.space.eval(s.lx * r) * s.scale).collect()),
            Some(tn.iter().map(|&t| s.time.eval(s.lt * t)).collect()),
        ),
        None => (None, None),
    };
    let rfac: Vec<f64> = rn
        .iter()
        .zip(u.rgrid().weights())
        .map(|(&r, &wr)| r.powi(u.dim() as i32 - 1) * wr)
        .collect();
    let mut total = 0.0;
    for (ti, (&t, &wt)) in tn.iter().zip(u.tgrid().weights()).enumerate() {
        let row = &u.values()[ti * nr..(ti + 1) * nr];
        let mut s = 0.0;
        for (ri, v) in row.iter().enumerate() {
            let wv = match (&space, &time) {
                (Some(sp), Some(tm)) => sp[ri] * tm[ti],
                _ => w(rn[ri], t),
            };
            let wv = check(wv, rn[ri], t)?;
            if wv > 0.0 {
                s += v.norm_sqr() * wv * rfac[ri];
            }
        }
        total += s * wt;
    }
    Ok((crate::radial::sphere_area(u.dim()) * total).sqrt())
}

/// Free evolution of one datum with its mass accounting.
#[derive(Debug, Clone)]
pub struct Evolved {
    pub spectral: SpectralProfile,
    pub field: SpaceTimeField,
    /// max over sampled t of the share of ‖f‖² outside r ≤ r_max.
    pub tail_fraction: f64,
}

impl Evolved {
    pub fn new(f: &RadialProfile, grids: &Grids, a: f64) -> Result<Self> {
        let spectral = grids.plan.forward(f)?;
        Self::from_spectral(spectral, grids, a)
    }

    pub fn from_spectral(spectral: SpectralProfile, grids: &Grids, a: f64) -> Result<Self> {
        let field = evolve_field_spectral(&grids.plan, &spectral, a, &grids.tgrid)?;
        let total = spectral.l2_norm().powi(2);
        let tail_fraction = if total > 0.0 {
            field
                .l2_in_space()
                .iter()
                .map(|m| (1.0 - m * m / total).max(0.0))
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        if tail_fraction > TAIL_TOLERANCE {
            return Err(Error::resolution(format!(
                "{tail_fraction:.2e} of the mass leaves r <= {} within |t| <= {}; enlarge r_max",
                grids.plan.r_grid().r_max(),
                grids.tgrid.max_abs_t()
            )));
        }
        Ok(Self {
            spectral,
            field,
            tail_fraction,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Homogeneous,
    Inhomogeneous,
    FrequencyLocalized,
    Morawetz,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub kind: EstimateKind,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub params: EstimateParams,
    pub admissible: bool,
    /// Morrey–Campanato value entering the rhs (1 where none does).
    pub mc_value: f64,
    pub mc_growth: bool,
    /// Finite ratio with an admissible window and a bounded weight norm.
    pub certified: bool,
    pub r_max: f64,
    pub t_max: f64,
    pub tail_fraction: f64,
    /// |ratio(half resolution) / ratio − 1| when requested.
    pub refinement_delta: Option<f64>,
}

/// How a ratio treats parameters outside the estimate's window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisMode {
    #[default]
    Enforce,
    ReportOnly,
}

fn gate(admissible: bool, mode: HypothesisMode, what: &str, p: &EstimateParams) -> Result<()> {
    if !admissible && mode == HypothesisMode::Enforce {
        return Err(Error::hypothesis(format!("{what}: parameters outside the window: {p:?}")));
    }
    Ok(())
}

fn ratio_of(lhs: f64, rhs: f64) -> Result<f64> {
    if rhs == 0.0 || !rhs.is_finite() {
        return Err(Error::DivisionGuard(format!("right-hand side is {rhs}")));
    }
    Ok(lhs / rhs)
}

#[allow(clippy::too_many_arguments)]
fn report(
    kind: EstimateKind,
    lhs: f64,
    rhs: f64,
    params: &EstimateParams,
    admissible: bool,
    mc: Option<&McReport>,
    grids: &Grids,
    tail_fraction: f64,
) -> Result<EstimateReport> {
    let ratio = ratio_of(lhs, rhs)?;
    let (mc_value, mc_growth) = mc.map_or((1.0, false), |m| (m.value, m.growth));
    Ok(EstimateReport {
        kind,
        lhs,
        rhs,
        ratio,
        params: *params,
        admissible,
        mc_value,
        mc_growth,
        certified: admissible && !mc_growth && ratio.is_finite(),
        r_max: grids.plan.r_grid().r_max(),
        t_max: grids.tgrid.max_abs_t(),
        tail_fraction,
        refinement_delta: None,
    })
}

/// The homogeneous ratio on an already evolved datum, with the weight norm
/// supplied (so sweeps can reuse both).
pub fn homogeneous_from(
    ev: &Evolved,
    w: &Weight,
    params: &EstimateParams,
    mc: &McReport,
    grids: &Grids,
    mode: HypothesisMode,
) -> Result<EstimateReport> {
    params.validate()?;
    let admissible = params.admissibility().sobolev;
    gate(admissible, mode, "homogeneous estimate", params)?;
    let data = ev.spectral.homogeneous_norm(params.s)?;
    if data == 0.0 {
        return Err(Error::DivisionGuard("datum has zero Sobolev norm".into()));
    }
    let lhs = weighted_st_norm(&ev.field, w)?;
    report(
        EstimateKind::Homogeneous,
        lhs,
        mc.value.sqrt() * data,
        params,
        admissible,
        Some(mc),
        grids,
        ev.tail_fraction,
    )
}

/// ‖e^{itL} f‖_{L²(w)} / (‖w‖^{1/2}_{a+2s,p} ‖f‖_{Ḣ^s}); `f` must live on
/// the plan's r grid.
pub fn homogeneous_ratio(
    f: &RadialProfile,
    w: &Weight,
    params: &EstimateParams,
    lattice: &CubeLattice,
    grids: &Grids,
    mode: HypothesisMode,
) -> Result<EstimateReport> {
    params.validate()?;
    gate(params.admissibility().sobolev, mode, "homogeneous estimate", params)?;
    let mc = mc_norm(w, &params.mc_params(params.alpha())?, lattice)?;
    let ev = Evolved::new(f, grids, params.a)?;
    homogeneous_from(&ev, w, params, &mc, grids, mode)
}

/// Homogeneous ratio of a shape at `res`, with the refinement delta from a
/// rerun at doubled resolution.
pub fn homogeneous_with_refinement(
    shape: &DataShape,
    w: &Weight,
    params: &EstimateParams,
    lattice: &CubeLattice,
    res: &Resolution,
) -> Result<EstimateReport> {
    let run = |res: &Resolution| -> Result<EstimateReport> {
        let grids = Grids::new(params.n, params.a, res)?;
        let f = shape.profile(params.n, grids.plan.r_grid())?;
        homogeneous_ratio(&f, w, params, lattice, &grids, HypothesisMode::Enforce)
    };
    let mut rep = run(res)?;
    let fine = run(&res.doubled())?;
    rep.refinement_delta = Some((fine.ratio / rep.ratio - 1.0).abs());
    Ok(rep)
}

/// Smooth bump in time times a spatial shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingShape {
    pub space: DataShape,
    pub t_center: f64,
    pub t_width: f64,
}

impl ForcingShape {
    pub fn field(&self, n: usize, grids: &Grids) -> Result<SpaceTimeField> {
        self.space.validate()?;
        if !(self.t_width > 0.0) {
            return Err(Error::invalid("forcing time width must be positive"));
        }
        let f = self.space.evaluator(n);
        let (c, h) = (self.t_center, self.t_width);
        SpaceTimeField::from_fn(n, grids.plan.r_grid(), &grids.tgrid, |r, t| {
            let u = (t - c) / h;
            let b = if u.abs() < 1.0 { (1.0 - 1.0 / (1.0 - u * u)).exp() } else { 0.0 };
            Complex64::new(b * f(r), 0.0)
        })
    }
}

/// ‖Duhamel(F)‖_{L²(w)} / (‖w‖_{a,p} ‖F‖_{L²(w^{−1})}); F on the plan's r grid.
pub fn inhomogeneous_ratio(
    forcing: &SpaceTimeField,
    w: &Weight,
    params: &EstimateParams,
    lattice: &CubeLattice,
    grids: &Grids,
    mode: HypothesisMode,
) -> Result<EstimateReport> {
    params.validate()?;
    let admissible = params.admissibility().homogeneous;
    gate(admissible, mode, "inhomogeneous estimate", params)?;
    let mc = mc_norm(w, &params.mc_params(params.a)?, lattice)?;
    let zero = RadialProfile::zeros(params.n, grids.plan.r_grid())?;
    let (u, _) = duhamel(&grids.plan, &zero, forcing, params.a)?;
    let lhs = weighted_st_norm(&u, w)?;
    let fnorm = inverse_weighted_st_norm(forcing, w)?;
    if fnorm == 0.0 {
        return Ok(EstimateReport {
            ratio: 0.0,
            ..report(EstimateKind::Inhomogeneous, lhs, 1.0, params, admissible, Some(&mc), grids, 0.0)?
        });
    }
    let total = u.sup_l2();
    let tail = if total > 0.0 {
        // Mass of the retarded solution is not conserved while F acts; use
        // the final slice, after the forcing has switched off.
        let last = u.l2_in_space();
        let end = *last.last().expect("nonempty");
        let spec = grids.plan.forward(&u.profile_at(u.tgrid().len() - 1))?.l2_norm();
        if spec > 0.0 {
            (1.0 - (end / spec).powi(2)).max(0.0)
        } else {
            0.0
        }
    } else {
        0.0
    };
    report(
        EstimateKind::Inhomogeneous,
        lhs,
        mc.value * fnorm,
        params,
        admissible,
        Some(&mc),
        grids,
        tail,
    )
}

/// Balanced critical power weight (|x|^{−n}|t|^{−1})^{λ/p} with
/// λ = αp/(n+a): homogeneous of degree −α under (x, t) → (μx, μ^a t) and
/// in the Morrey–Campanato class for every p < (n+a)/α.
pub fn critical_power(n: usize, a: f64, alpha: f64, p: f64) -> Weight {
    let lambda = alpha * p / (n as f64 + a);
    Weight::power(lambda * n as f64 / p, lambda / p)
}

/// Built-in weight families for the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightFamily {
    CriticalPower,
    /// Critical power with smooth cutoffs at |x| ~ cut_x, |t| ~ cut_t.
    TruncatedPower { cut_x: f64, cut_t: f64 },
    Bump { width_x: f64, width_t: f64 },
}

impl WeightFamily {
    pub fn weight(&self, params: &EstimateParams, alpha: f64) -> Weight {
        let c = critical_power(params.n, params.a, alpha, params.p);
        let (gx, gt) = match c.split() {
            Some(s) => match (s.space, s.time) {
                (SpaceFactor::Power { gamma: gx }, TimeFactor::Power { gamma: gt }) => (gx, gt),
                _ => unreachable!("critical power is separable"),
            },
            None => unreachable!("critical power is separable"),
        };
        match *self {
            WeightFamily::CriticalPower => c,
            WeightFamily::TruncatedPower { cut_x, cut_t } => Weight::separable(
                1.0,
                SpaceFactor::TruncatedPower { gamma: gx, cut: cut_x },
                TimeFactor::TruncatedPower { gamma: gt, cut: cut_t },
            ),
            WeightFamily::Bump { width_x, width_t } => Weight::separable(
                1.0,
                SpaceFactor::Bump { width: width_x },
                TimeFactor::Bump { width: width_t },
            ),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightFamily::CriticalPower => "critical_power",
            WeightFamily::TruncatedPower { .. } => "truncated_power",
            WeightFamily::Bump { .. } => "bump",
        }
    }
}

/// ‖|w|^{b/2} e^{itL} f‖ / ‖f‖_{Ḣ^{(b−a)/2}}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "weight", rename_all = "snake_case", deny_unknown_fields)]
pub enum MorawetzWeight {
    /// |x|^{−1}, so |w|^b = |x|^{−b}; locally integrable only for b < n.
    Classical,
    /// |x|^{−γx}|t|^{−γt} with γx + aγt = 1.
    Power { gamma_x: f64, gamma_t: f64 },
    /// γx = n/(n+a), γt = 1/(n+a).
    Balanced,
}

impl MorawetzWeight {
    /// The weight w (not yet raised to b).
    pub fn exponents(&self, n: usize, a: f64) -> (f64, f64) {
        match *self {
            MorawetzWeight::Classical => (1.0, 0.0),
            MorawetzWeight::Power { gamma_x, gamma_t } => (gamma_x, gamma_t),
            MorawetzWeight::Balanced => (n as f64 / (n as f64 + a), 1.0 / (n as f64 + a)),
        }
    }

    /// The p window for w ∈ 𝔏^{1,pb}, intersected with the power weight's
    /// local integrability (γx pb < n, γt pb < 1). Hypothesis error if empty.
    pub fn window(&self, params: &EstimateParams, b: f64) -> Result<(f64, f64)> {
        let (lo, hi) = params.morawetz_window(b)?;
        let n = params.n as f64;
        let (gx, gt) = self.exponents(params.n, params.a);
        if (gx + params.a * gt - 1.0).abs() > 1e-12 {
            return Err(Error::hypothesis(format!(
                "Morawetz weight needs gamma_x + a gamma_t = 1, got {}",
                gx + params.a * gt
            )));
        }
        let mut cap = f64::INFINITY;
        if gx > 0.0 {
            cap = cap.min(n / (gx * b));
        }
        if gt > 0.0 {
            cap = cap.min(1.0 / (gt * b));
        }
        if let MorawetzWeight::Classical = self {
            if b >= n {
                return Err(Error::hypothesis(format!(
                    "|x|^-b is not locally integrable for b = {b} >= n; use a time-dependent weight"
                )));
            }
            return Ok((lo, hi));
        }
        if !(lo < hi.min(cap)) {
            return Err(Error::hypothesis(format!(
                "no p with max(a/(b-1),1) = {lo} < p <= {} and p < {cap}",
                hi
            )));
        }
        Ok((lo, hi.min(cap)))
    }
}

pub fn morawetz_from(
    ev: &Evolved,
    b: f64,
    params: &EstimateParams,
    weight: MorawetzWeight,
    grids: &Grids,
) -> Result<EstimateReport> {
    params.validate()?;
    weight.window(params, b)?;
    let (gx, gt) = weight.exponents(params.n, params.a);
    let wb = Weight::power(b * gx, b * gt);
    let lhs = weighted_st_norm(&ev.field, &wb)?;
    let data = ev.spectral.homogeneous_norm((b - params.a) / 2.0)?;
    if data == 0.0 {
        return Err(Error::DivisionGuard("datum has zero Sobolev norm".into()));
    }
    report(EstimateKind::Morawetz, lhs, data, params, true, None, grids, ev.tail_fraction)
}

/// Morawetz ratio for a profile on the plan's r grid.
pub fn morawetz_ratio(
    f: &RadialProfile,
    b: f64,
    params: &EstimateParams,
    weight: MorawetzWeight,
    grids: &Grids,
) -> Result<EstimateReport> {
    weight.window(params, b)?;
    let ev = Evolved::new(f, grids, params.a)?;
    morawetz_from(&ev, b, params, weight, grids)
}

/// Resolution of the unit band ρ ∈ [1/2, 2] for the frequency-localized
/// estimate; band k uses the same grids dilated by 2^k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandResolution {
    pub r_max: f64,
    pub t_max: f64,
    pub refine: f64,
    pub r_grading: u32,
    pub t_grading: u32,
}

impl BandResolution {
    pub fn for_order(a: f64, t_max: f64) -> Self {
        Self {
            r_max: 96.0 + 1.05 * a * 2f64.powf(a - 1.0) * t_max,
            t_max,
            refine: 1.0,
            r_grading: 16,
            t_grading: 24,
        }
    }

    fn grids(&self, n: usize, a: f64, k: i32) -> Result<Grids> {
        let phase = REFERENCE_PANEL_PHASE / self.refine;
        let r = RadialGrid::uniform(self.r_max, phase / 2.0, self.r_grading, &[])?;
        let (r_max, t_max) = (self.r_max, self.t_max);
        let speed = |p: f64| r_max + t_max * a * p.powf(a - 1.0);
        let count = (1.5 * speed(2.0) / phase).ceil().max(8.0) as usize;
        let rho = RadialGrid::from_breaks((0..=count).map(|i| 0.5 + 1.5 * i as f64 / count as f64).collect())?;
        let tgrid = TimeGrid::symmetric(self.t_max, phase / 2f64.powf(a), self.t_grading)?;
        let base = Grids {
            plan: HankelPlan::new(n, r, rho)?,
            tgrid,
        };
        base.scaled(2f64.powi(k), a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandRow {
    pub k: i32,
    pub lhs: f64,
    /// ‖P_k f‖₂
    pub band_norm: f64,
    /// log₂(lhs / (‖P_k f‖₂ mc^{1/2}))
    pub normalized_log2: f64,
    pub ratio: f64,
    pub tail_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyScan {
    pub alpha: f64,
    pub mc_value: f64,
    pub mc_growth: bool,
    pub rows: Vec<BandRow>,
    /// Slope of normalized_log2 against k; the estimate predicts (α−a)/2.
    pub fit: Option<FitReport>,
}

/// P_k f on the band grids of `k`, from the shape's transform.
/// Bands holding less than this share of ‖f‖₂ are quadrature noise and
/// treated as empty.
const BAND_FLOOR: f64 = 1e-12;

fn band_data(shape: &DataShape, n: usize, grids: &Grids, k: i32) -> Result<SpectralProfile> {
    let rho_top = grids.plan.rho_grid().r_max();
    let extent = shape.extent();
    let (c, w) = shape.spectral_band();
    let rho_need = rho_top.max(c + 6.5 * w);
    // Cut far enough out that the truncation jump stays below the band floor.
    let rgrid = RadialGrid::uniform(1.5 * extent, REFERENCE_PANEL_PHASE / rho_need, 24, &[])?;
    let f = shape.profile(n, &rgrid)?;
    let g = hankel_forward(&f, grids.plan.rho_grid())?;
    let s = 2f64.powi(-k);
    let g = g.map(|p, v| v * DyadicCutoff::phi(p * s));
    if g.l2_norm() <= BAND_FLOOR * f.l2_norm() {
        return Ok(g.map(|_, _| Complex64::new(0.0, 0.0)));
    }
    Ok(g)
}

/// ‖e^{itL} P_k f‖_{L²(w)} / (2^{k(α−a)/2} ‖w‖^{1/2}_{α,p} ‖P_k f‖₂) for
/// every k, on band grids dilated from band 0, with the fit of the
/// normalized log against k.
pub fn frequency_scan(
    shape: &DataShape,
    w: &Weight,
    params: &EstimateParams,
    alpha: f64,
    lattice: &CubeLattice,
    ks: &[i32],
    res: &BandResolution,
) -> Result<FrequencyScan> {
    params.validate()?;
    shape.validate()?;
    let mc = mc_norm(w, &params.mc_params(alpha)?, lattice)?;
    let half = mc.value.sqrt();
    let rows = ks
        .iter()
        .map(|&k| -> Result<BandRow> {
            let grids = res.grids(params.n, params.a, k)?;
            let g = band_data(shape, params.n, &grids, k)?;
            let band_norm = g.l2_norm();
            if band_norm == 0.0 {
                return Ok(BandRow {
                    k,
                    lhs: 0.0,
                    band_norm,
                    normalized_log2: f64::NEG_INFINITY,
                    ratio: 0.0,
                    tail_fraction: 0.0,
                });
            }
            let ev = Evolved::from_spectral(g, &grids, params.a)?;
            let lhs = weighted_st_norm(&ev.field, w)?;
            let factor = 2f64.powf(k as f64 * (alpha - params.a) / 2.0);
            Ok(BandRow {
                k,
                lhs,
                band_norm,
                normalized_log2: (lhs / (band_norm * half)).log2(),
                ratio: lhs / (factor * half * band_norm),
                tail_fraction: ev.tail_fraction,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.normalized_log2.is_finite())
        .map(|r| (r.k as f64, r.normalized_log2))
        .unzip();
    let fit = if x.len() >= crate::fit::MIN_FIT_SAMPLES {
        Some(FitReport::least_squares(&x, &y)?)
    } else {
        None
    };
    Ok(FrequencyScan {
        alpha,
        mc_value: mc.value,
        mc_growth: mc.growth,
        rows,
        fit,
    })
}

/// Single-band ratio ‖e^{itL} P_k f‖_{L²(w)} / (2^{k(α−a)/2} ‖w‖^{1/2}_{α,p} ‖P_k f‖₂)
/// with α = a + 2s; zero when f has nothing in the band.
pub fn frequency_localized_ratio(
    shape: &DataShape,
    w: &Weight,
    k: i32,
    params: &EstimateParams,
    lattice: &CubeLattice,
    res: &BandResolution,
) -> Result<EstimateReport> {
    let alpha = params.alpha();
    let scan = frequency_scan(shape, w, params, alpha, lattice, &[k], res)?;
    let row = scan.rows[0];
    let grids = res.grids(params.n, params.a, k)?;
    let rhs = 2f64.powf(k as f64 * (alpha - params.a) / 2.0) * scan.mc_value.sqrt() * row.band_norm;
    let admissible = params.admissibility().sobolev;
    Ok(EstimateReport {
        kind: EstimateKind::FrequencyLocalized,
        lhs: row.lhs,
        rhs,
        ratio: row.ratio,
        params: *params,
        admissible,
        mc_value: scan.mc_value,
        mc_growth: scan.mc_growth,
        certified: admissible && !scan.mc_growth && row.ratio.is_finite(),
        r_max: grids.plan.r_grid().r_max(),
        t_max: grids.tgrid.max_abs_t(),
        tail_fraction: row.tail_fraction,
        refinement_delta: None,
    })
}

/// One (a, s, p) point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub a: f64,
    pub s: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n: usize,
    pub shapes: Vec<DataShape>,
    pub families: Vec<WeightFamily>,
    pub points: Vec<SweepPoint>,
    pub t_max: f64,
    pub lattice: CubeLattice,
    pub refine: f64,
    pub domain_factor: f64,
}

impl SweepConfig {
    /// n = 3; five shapes, three weight families and a ∈ {7/4, 2} × s ∈
    /// {0, 1/4} × three p inside each window: 180 evaluations.
    pub fn builtin() -> Self {
        let shapes = vec![
            DataShape::Gaussian { width: 2.0 },
            DataShape::Gaussian { width: 1.5 },
            DataShape::Mexican { width: 2.0 },
            DataShape::Modulated { width: 2.0, freq: 1.0 },
            DataShape::Noise {
                width: 2.0,
                freq: 0.5,
                modes: 4,
                seed: 7,
            },
        ];
        let families = vec![
            WeightFamily::CriticalPower,
            WeightFamily::TruncatedPower { cut_x: 4.0, cut_t: 4.0 },
            WeightFamily::Bump {
                width_x: 4.0,
                width_t: 4.0,
            },
        ];
        let mut points = Vec::new();
        for a in [1.75, 2.0] {
            for s in [0.0, 0.25] {
                let probe = EstimateParams { n: 3, a, s, p: 1.0 };
                let (lo, hi) = probe.sobolev_window();
                for frac in [0.2, 0.5, 0.8] {
                    points.push(SweepPoint {
                        a,
                        s,
                        p: lo + frac * (hi - lo),
                    });
                }
            }
        }
        Self {
            n: 3,
            shapes,
            families,
            points,
            t_max: DEFAULT_T_MAX,
            lattice: CubeLattice::default(),
            refine: 1.0,
            domain_factor: 1.0,
        }
    }

    pub fn evaluations(&self) -> usize {
        self.shapes.len() * self.families.len() * self.points.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub shape: usize,
    pub family: &'static str,
    pub a: f64,
    pub s: f64,
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub mc_value: f64,
    pub mc_growth: bool,
    pub certified: bool,
    pub tail_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub max_ratio: f64,
    pub argmax: usize,
    pub all_finite: bool,
}

/// Homogeneous ratios over shapes × families × points. Each (shape, a)
/// is evolved once and each (family, point) weight norm computed once.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.shapes.is_empty() || cfg.families.is_empty() || cfg.points.is_empty() {
        return Err(Error::invalid("sweep needs shapes, families and points"));
    }
    let mut orders: Vec<f64> = cfg.points.iter().map(|p| p.a).collect();
    orders.sort_by(f64::total_cmp);
    orders.dedup();
    let mut mcs = Vec::with_capacity(cfg.points.len() * cfg.families.len());
    for pt in &cfg.points {
        let params = EstimateParams::new(cfg.n, pt.a, pt.s, pt.p)?;
        let mcp = params.mc_params(params.alpha())?;
        for fam in &cfg.families {
            mcs.push(mc_norm(&fam.weight(&params, params.alpha()), &mcp, &cfg.lattice)?);
        }
    }
    let mut rows = Vec::with_capacity(cfg.evaluations());
    for (si, shape) in cfg.shapes.iter().enumerate() {
        shape.validate()?;
        for &a in &orders {
            let res = Resolution {
                refine: cfg.refine,
                ..Resolution::for_shape(shape, a, cfg.t_max)
            }
            .grown(cfg.domain_factor);
            let grids = Grids::new(cfg.n, a, &res)?;
            let ev = Evolved::new(&shape.profile(cfg.n, grids.plan.r_grid())?, &grids, a)?;
            for (pi, pt) in cfg.points.iter().enumerate() {
                if pt.a != a {
                    continue;
                }
                let params = EstimateParams::new(cfg.n, pt.a, pt.s, pt.p)?;
                for (fi, fam) in cfg.families.iter().enumerate() {
                    let w = fam.weight(&params, params.alpha());
                    let mc = &mcs[pi * cfg.families.len() + fi];
                    let rep = homogeneous_from(&ev, &w, &params, mc, &grids, HypothesisMode::Enforce)?;
                    rows.push(SweepRow {
                        shape: si,
                        family: fam.name(),
                        a: pt.a,
                        s: pt.s,
                        p: pt.p,
                        lhs: rep.lhs,
                        rhs: rep.rhs,
                        ratio: rep.ratio,
                        mc_value: rep.mc_value,
                        mc_growth: rep.mc_growth,
                        certified: rep.certified,
                        tail_fraction: rep.tail_fraction,
                    });
                }
            }
        }
    }
    let all_finite = rows.iter().all(|r| r.ratio.is_finite());
    let (argmax, max_ratio) = rows
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, r)| if r.ratio > bv { (i, r.ratio) } else { (bi, bv) });
    Ok(SweepResult {
        rows,
        max_ratio,
        argmax,
        all_finite,
    })
}

/// A sweep rerun at doubled resolution and on a domain grown by half.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepStability {
    pub base: SweepResult,
    /// Largest |ratio′/ratio − 1| over rows, at doubled resolution.
    pub refine_delta: f64,
    /// Same with r_max and T grown by 50%.
    pub domain_delta: f64,
    /// Relative change of the max ratio, worst of the two reruns.
    pub max_ratio_delta: f64,
}

pub fn sweep_stability(cfg: &SweepConfig) -> Result<SweepStability> {
    let base = sweep(cfg)?;
    let fine = sweep(&SweepConfig {
        refine: 2.0 * cfg.refine,
        ..cfg.clone()
    })?;
    let grown = sweep(&SweepConfig {
        domain_factor: 1.5 * cfg.domain_factor,
        ..cfg.clone()
    })?;
    let delta = |o: &SweepResult| {
        base.rows
            .iter()
            .zip(&o.rows)
            .map(|(a, b)| (b.ratio / a.ratio - 1.0).abs())
            .fold(0.0, f64::max)
    };
    let max_delta = |o: &SweepResult| (o.max_ratio / base.max_ratio - 1.0).abs();
    Ok(SweepStability {
        refine_delta: delta(&fine),
        domain_delta: delta(&grown),
        max_ratio_delta: max_delta(&fine).max(max_delta(&grown)),
        base,
    })
}

/// Homogeneous ratio of (f, w) and of (f(λ·), w(λ·, λ^a·)) on dilated grids
/// and the shifted lattice; returns both ratios.
pub fn homogeneous_scaling_pair(
    shape: &DataShape,
    w: &Weight,
    params: &EstimateParams,
    lattice: &CubeLattice,
    res: &Resolution,
    log2_lambda: i32,
) -> Result<(f64, f64)> {
    let a = params.a;
    let lambda = 2f64.powi(log2_lambda);
    let grids = Grids::new(params.n, a, res)?;
    let f = shape.profile(params.n, grids.plan.r_grid())?;
    let base = homogeneous_ratio(&f, w, params, lattice, &grids, HypothesisMode::ReportOnly)?;
    let sg = grids.scaled(lambda, a)?;
    let eval = shape.evaluator(params.n);
    let fl = RadialProfile::from_real_fn(params.n, sg.plan.r_grid(), |r| eval(lambda * r))?;
    let wl = w.dilate(lambda, lambda.powf(a));
    let scaled = homogeneous_ratio(&fl, &wl, params, &lattice.shifted(-log2_lambda), &sg, HypothesisMode::ReportOnly)?;
    Ok((base.ratio, scaled.ratio))
}

/// Inhomogeneous ratio of (F, w) and of (F(λ·, λ^a·), w(λ·, λ^a·)).
pub fn inhomogeneous_scaling_pair(
    forcing: &ForcingShape,
    w: &Weight,
    params: &EstimateParams,
    lattice: &CubeLattice,
    res: &Resolution,
    log2_lambda: i32,
) -> Result<(f64, f64)> {
    let a = params.a;
    let lambda = 2f64.powi(log2_lambda);
    let grids = Grids::new(params.n, a, res)?;
    let f = forcing.field(params.n, &grids)?;
    let base = inhomogeneous_ratio(&f, w, params, lattice, &grids, HypothesisMode::ReportOnly)?;
    let sg = grids.scaled(lambda, a)?;
    let fl = SpaceTimeField::new(params.n, sg.plan.r_grid().clone(), sg.tgrid.clone(), f.values().to_vec())?;
    let wl = w.dilate(lambda, lambda.powf(a));
    let scaled = inhomogeneous_ratio(&fl, &wl, params, &lattice.shifted(-log2_lambda), &sg, HypothesisMode::ReportOnly)?;
    Ok((base.ratio, scaled.ratio))
}

/// Parametric data families for the extremizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataFamily {
    /// Gaussian e^{−r²/(2σ²)} with σ ∈ [lo, hi]. The window scales with the
    /// datum: r_max ∝ σ and T ∝ σ^a.
    GaussianWidth { lo: f64, hi: f64 },
    /// Real combinations Σ c_i f_i with c ∈ [−1, 1]^m.
    Span { basis: Vec<DataShape> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchBudget {
    pub restarts: usize,
    pub evaluations: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            restarts: 16,
            evaluations: 200,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub restart: usize,
    pub evaluation: usize,
    pub params: Vec<f64>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extremum {
    pub ratio: f64,
    pub params: Vec<f64>,
    pub trace: Vec<TraceEntry>,
    /// Some restart ran out of evaluations before its simplex collapsed.
    pub partial: bool,
}

type ObjectiveFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A ratio as a function of family parameters, cheap to evaluate.
pub struct Objective {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    eval: ObjectiveFn,
}

impl Objective {
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }
}

/// Σ_t Σ_r |u|² ω r^{n−1} wt_r wt_t as a t × r table, so that a separable
/// weight needs one matrix–vector product.
struct Energy {
    table: Vec<f64>,
    r: Vec<f64>,
    t: Vec<f64>,
    area: f64,
}

impl Energy {
    fn new(u: &SpaceTimeField) -> Self {
        let rn = u.rgrid().nodes();
        let nr = rn.len();
        let mut table = vec![0.0; u.values().len()];
        for (ti, wt) in u.tgrid().weights().iter().enumerate() {
            for ri in 0..nr {
                let rf = rn[ri].powi(u.dim() as i32 - 1) * u.rgrid().weights()[ri];
                table[ti * nr + ri] = u.values()[ti * nr + ri].norm_sqr() * rf * wt;
            }
        }
        Self {
            table,
            r: rn.to_vec(),
            t: u.tgrid().nodes().to_vec(),
            area: crate::radial::sphere_area(u.dim()),
        }
    }

    fn weighted(&self, w: &Weight) -> f64 {
        let nr = self.r.len();
        let total: f64 = match w.split() {
            Some(s) => {
                let sp: Vec<f64> = self.r.iter().map(|&r| s.scale * s.space.eval(s.lx * r)).collect();
                self.t
                    .iter()
                    .enumerate()
                    .map(|(ti, &t)| {
                        let tv = s.time.eval(s.lt * t);
                        if tv == 0.0 {
                            return 0.0;
                        }
                        tv * self.table[ti * nr..(ti + 1) * nr].iter().zip(&sp).map(|(e, w)| e * w).sum::<f64>()
                    })
                    .sum()
            }
            None => self
                .t
                .iter()
                .enumerate()
                .map(|(ti, &t)| {
                    self.table[ti * nr..(ti + 1) * nr]
                        .iter()
                        .zip(&self.r)
                        .map(|(e, &r)| e * w.eval(r, t))
                        .sum::<f64>()
                })
                .sum(),
        };
        self.area * total
    }
}

/// Builds the objective for a family: the homogeneous ratio at fixed w.
pub fn objective(
    family: &DataFamily,
    w: &Weight,
    params: &EstimateParams,
    lattice: &CubeLattice,
    t_max: f64,
) -> Result<Objective> {
    params.validate()?;
    let mc = mc_norm(w, &params.mc_params(params.alpha())?, lattice)?;
    let half = mc.value.sqrt();
    let (n, a, s) = (params.n, params.a, params.s);
    match family {
        DataFamily::GaussianWidth { lo, hi } => {
            if !(*lo > 0.0 && hi > lo) {
                return Err(Error::invalid("Gaussian width range must satisfy 0 < lo < hi"));
            }
            // Unit Gaussian evolved once; width σ follows by dilation:
            // lhs(σ)² = σ^{n+a} Σ |u₁|² w(σr, σ^a t), ‖f_σ‖²_{Ḣ^s} = σ^{n−2s} ‖f₁‖².
            let shape = DataShape::Gaussian { width: 1.0 };
            let grids = Grids::new(n, a, &Resolution::for_shape(&shape, a, t_max))?;
            let ev = Evolved::new(&shape.profile(n, grids.plan.r_grid())?, &grids, a)?;
            let energy = Energy::new(&ev.field);
            let data = ev.spectral.homogeneous_norm(s)?;
            let w = w.clone();
            Ok(Objective {
                lower: vec![*lo],
                upper: vec![*hi],
                eval: Box::new(move |x| {
                    let sigma = x[0];
                    let l2 = sigma.powf(n as f64 + a) * energy.weighted(&w.dilate(sigma, sigma.powf(a)));
                    let d = sigma.powf(n as f64 / 2.0 - s) * data;
                    l2.sqrt() / (half * d)
                }),
            })
        }
        DataFamily::Span { basis } => {
            if basis.is_empty() {
                return Err(Error::invalid("span family needs at least one basis shape"));
            }
            let res = Resolution::covering(basis, a, t_max);
            let grids = Grids::new(n, a, &res)?;
            let evs = basis
                .iter()
                .map(|b| Evolved::new(&b.profile(n, grids.plan.r_grid())?, &grids, a))
                .collect::<Result<Vec<_>>>()?;
            let m = evs.len();
            let mut gram = vec![0.0; m * m];
            let mut sob = vec![0.0; m * m];
            let area = crate::radial::sphere_area(n);
            let rn = grids.plan.r_grid().nodes();
            let wvals: Vec<f64> = grids
                .tgrid
                .nodes()
                .iter()
                .zip(grids.tgrid.weights())
                .flat_map(|(&t, &wt)| {
                    rn.iter()
                        .zip(grids.plan.r_grid().weights())
                        .map(move |(&r, &wr)| (r, t, wt * wr * r.powi(n as i32 - 1)))
                        .collect::<Vec<_>>()
                })
                .map(|(r, t, q)| w.eval(r, t) * q)
                .collect();
            if wvals.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularSampling("weight is not finite on the grid".into()));
            }
            let rho = grids.plan.rho_grid();
            let sw: Vec<f64> = rho
                .nodes()
                .iter()
                .zip(rho.weights())
                .map(|(&p, &wp)| p.powf(2.0 * s + n as f64 - 1.0) * wp * area * (2.0 * PI).powi(-(n as i32)))
                .collect();
            for i in 0..m {
                for j in i..m {
                    let (ui, uj) = (evs[i].field.values(), evs[j].field.values());
                    let g: f64 = (0..ui.len()).map(|q| (ui[q] * uj[q].conj()).re * wvals[q]).sum::<f64>() * area;
                    let (gi, gj) = (evs[i].spectral.values(), evs[j].spectral.values());
                    let h: f64 = (0..gi.len()).map(|q| (gi[q] * gj[q].conj()).re * sw[q]).sum();
                    gram[i * m + j] = g;
                    gram[j * m + i] = g;
                    sob[i * m + j] = h;
                    sob[j * m + i] = h;
                }
            }
            Ok(Objective {
                lower: vec![-1.0; m],
                upper: vec![1.0; m],
                eval: Box::new(move |c| {
                    let quad = |q: &[f64]| -> f64 {
                        (0..m).map(|i| (0..m).map(|j| c[i] * q[i * m + j] * c[j]).sum::<f64>()).sum()
                    };
                    let den = quad(&sob);
                    if den <= 0.0 {
                        return f64::NAN;
                    }
                    (quad(&gram).max(0.0) / den).sqrt() / half
                }),
            })
        }
    }
}

fn clamp_into(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

/// One restart: coordinate search from a random start, then Nelder–Mead.
/// Returns (best value, best point, trace, converged).
fn restart_search(obj: &Objective, budget: usize, rng: &mut ChaCha8Rng, restart: usize) -> (f64, Vec<f64>, Vec<TraceEntry>, bool) {
    let dim = obj.lower.len();
    let span: Vec<f64> = obj.lower.iter().zip(&obj.upper).map(|(l, h)| h - l).collect();
    let mut trace = Vec::new();
    let eval = |x: &[f64], trace: &mut Vec<TraceEntry>| -> Option<f64> {
        if trace.len() >= budget {
            return None;
        }
        let v = obj.eval(x);
        let v = if v.is_finite() { v } else { f64::NEG_INFINITY };
        trace.push(TraceEntry {
            restart,
            evaluation: trace.len(),
            params: x.to_vec(),
            ratio: v,
        });
        Some(v)
    };
    let mut x: Vec<f64> = (0..dim).map(|i| obj.lower[i] + span[i] * rng.random::<f64>()).collect();
    let Some(mut fx) = eval(&x, &mut trace) else {
        return (f64::NEG_INFINITY, x, trace, false);
    };
    // Coordinate search until the step falls below 1/64 of the box.
    let mut step = 0.25;
    'outer: while step > 1.0 / 64.0 {
        let mut improved = false;
        for i in 0..dim {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += dir * step * span[i];
                clamp_into(&mut y, &obj.lower, &obj.upper);
                if y == x {
                    continue;
                }
                let Some(fy) = eval(&y, &mut trace) else { break 'outer };
                if fy > fx {
                    x = y;
                    fx = fy;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    // Nelder–Mead (maximizing) around the coordinate-search point.
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x.clone(), fx)];
    for i in 0..dim {
        let mut y = x.clone();
        y[i] += if y[i] + step * span[i] <= obj.upper[i] { step * span[i] } else { -step * span[i] };
        clamp_into(&mut y, &obj.lower, &obj.upper);
        match eval(&y, &mut trace) {
            Some(fy) => simplex.push((y, fy)),
            None => {
                let best = simplex.iter().chain(std::iter::once(&(x.clone(), fx))).fold(
                    (f64::NEG_INFINITY, x.clone()),
                    |b, (p, v)| if *v > b.0 { (*v, p.clone()) } else { b },
                );
                return (best.0, best.1, trace, false);
            }
        }
    }
    let tol = 1e-6;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let size = simplex[1..]
            .iter()
            .map(|(p, _)| p.iter().zip(&simplex[0].0).zip(&span).map(|((a, b), s)| ((a - b) / s).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let spread = (simplex[0].1 - simplex[dim].1).abs();
        if size < tol || spread <= 1e-12 * simplex[0].1.abs() {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|i| simplex[..dim].iter().map(|(p, _)| p[i]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let along = |t: f64| {
            let mut y: Vec<f64> = (0..dim).map(|i| centroid[i] + t * (worst.0[i] - centroid[i])).collect();
            clamp_into(&mut y, &obj.lower, &obj.upper);
            y
        };
        let xr = along(-1.0);
        let Some(fr) = eval(&xr, &mut trace) else { break };
        if fr > simplex[0].1 {
            let xe = along(-2.0);
            let Some(fe) = eval(&xe, &mut trace) else { break };
            simplex[dim] = if fe > fr { (xe, fe) } else { (xr, fr) };
        } else if fr > simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let xc = along(0.5);
            let Some(fc) = eval(&xc, &mut trace) else { break };
            if fc > worst.1 {
                simplex[dim] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                let mut out = false;
                for v in simplex.iter_mut().skip(1) {
                    let y: Vec<f64> = (0..dim).map(|i| best[i] + 0.5 * (v.0[i] - best[i])).collect();
                    match eval(&y, &mut trace) {
                        Some(fy) => *v = (y, fy),
                        None => {
                            out = true;
                            break;
                        }
                    }
                }
                if out {
                    break;
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (bx, bf) = simplex.swap_remove(0);
    let (bx, bf) = if fx > bf { (x, fx) } else { (bx, bf) };
    (bf, bx, trace, converged)
}

/// Multi-start maximization of an objective; deterministic given the seed.
pub fn maximize(obj: &Objective, budget: &SearchBudget) -> Result<Extremum> {
    if budget.restarts == 0 || budget.evaluations == 0 {
        return Err(Error::Budget("the search budget is empty".into()));
    }
    let runs = crate::par::map(budget.restarts, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(budget.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64));
        restart_search(obj, budget.evaluations, &mut rng, i)
    });
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut trace = Vec::new();
    let mut partial = false;
    for (v, x, t, conv) in runs {
        if v > best.0 {
            best = (v, x);
        }
        trace.extend(t);
        partial |= !conv;
    }
    if !best.0.is_finite() {
        return Err(Error::DivisionGuard("no finite ratio in the search".into()));
    }
    Ok(Extremum {
        ratio: best.0,
        params: best.1,
        trace,
        partial,
    })
}

/// Builds the objective for `family` and maximizes it.
pub fn extremizer_search(
    family: &DataFamily,
    w: &Weight,
    params: &EstimateParams,
    lattice: &CubeLattice,
    t_max: f64,
    budget: &SearchBudget,
) -> Result<Extremum> {
    if budget.restarts == 0 || budget.evaluations == 0 {
        return Err(Error::Budget("the search budget is empty".into()));
    }
    let obj = objective(family, w, params, lattice, t_max)?;
    maximize(&obj, budget)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_match_their_definitions() {
        let p = EstimateParams::new(3, 2.0, 0.0, 2.25).unwrap();
        assert_eq!(p.homogeneous_window(), (2.0, 2.5));
        assert!(p.admissibility().homogeneous && p.admissibility().sobolev);
        let q = EstimateParams::new(3, 2.0, 0.25, 1.5).unwrap();
        let (lo, hi) = q.sobolev_window();
        assert!((lo - 4.0 / 3.0).abs() < 1e-15 && (hi - 2.0).abs() < 1e-15);
        assert!(!q.admissibility().homogeneous && q.admissibility().sobolev);
        assert!(EstimateParams::new(3, 1.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn critical_power_scales_with_alpha() {
        let w = critical_power(3, 2.0, 2.5, 1.7);
        let (x, t) = (0.7, 0.3);
        let l: f64 = 2.0;
        let ratio = w.eval(l * x, l * l * t) / w.eval(x, t);
        assert!((ratio - l.powf(-2.5)).abs() < 1e-14);
    }

    #[test]
    fn builtin_sweep_has_enough_points() {
        let c = SweepConfig::builtin();
        assert!(c.evaluations() >= 180);
        for pt in &c.points {
            let p = EstimateParams::new(c.n, pt.a, pt.s, pt.p).unwrap();
            assert!(p.admissibility().sobolev, "{pt:?}");
        }
    }

    #[test]
    fn nelder_mead_finds_a_smooth_maximum() {
        let obj = Objective {
            lower: vec![-2.0, -2.0],
            upper: vec![2.0, 2.0],
            eval: Box::new(|x| 3.0 - (x[0] - 0.3).powi(2) - 2.0 * (x[1] + 0.7).powi(2)),
        };
        let r = maximize(&obj, &SearchBudget { restarts: 3, evaluations: 300, seed: 4 }).unwrap();
        assert!((r.ratio - 3.0).abs() < 1e-9 && (r.params[0] - 0.3).abs() < 1e-4);
        assert!(!r.partial);
    }
}
