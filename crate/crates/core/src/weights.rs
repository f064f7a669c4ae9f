//! Space-time weights radial in x, the a-parabolic Morrey–Campanato norm
//!
//! ```text
//! ‖w‖ = sup_{x,t,r} r^α ( r^{−(n+a)} ∫_{Q(x,r)×I(t,r^a)} w^p )^{1/p}
//! ```
//!
//! over a dyadic cube lattice, the maximal function `w_*`, and Muckenhoupt
//! A₁/A₂ constants.
//!
//! Cube integrals are computed by direct cubature: each cube is split
//! recursively toward the origin (when the weight is singular there) and
//! wherever the weight declares a short smoothness length, with tensor
//! Gauss–Legendre rules on the leaves. Only the radius of each node enters,
//! so a cube reduces to a radial measure `{(ρ_i, ω_i)}`.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::quadrature::{graded_breaks, GaussLegendre};
use crate::{Error, Result};

/// Smooth cutoff: 1 on [0, 1], 0 on [2, ∞).
fn smooth_cut(u: f64) -> f64 {
    let f = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    if u <= 1.0 {
        1.0
    } else if u >= 2.0 {
        0.0
    } else {
        let (a, b) = (f(2.0 - u), f(u - 1.0));
        a / (a + b)
    }
}

/// exp(1 − 1/(1 − u²)) on |u| < 1, peak 1 at 0.
fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

/// Radial factor X(|x|).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceFactor {
    Constant,
    /// |x|^{−γ}
    Power { gamma: f64 },
    /// |x|^{−γ} χ(|x|/cut), χ smooth, 1 on [0,1], 0 beyond 2.
    TruncatedPower { gamma: f64, cut: f64 },
    /// exp(1 − 1/(1 − (|x|/width)²)) inside the ball of radius `width`.
    Bump { width: f64 },
    /// min(1, |x|^γ)
    Plateau { gamma: f64 },
    /// e^{rate |x|}
    Exponential { rate: f64 },
    Table(LogTable),
}

/// Time factor T(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeFactor {
    Constant,
    /// |t|^{−γ}
    Power { gamma: f64 },
    /// |t|^{−γ} χ(|t|/cut)
    TruncatedPower { gamma: f64, cut: f64 },
    Bump { width: f64 },
}

/// A radial table with power-law interpolation between positive nodes and
/// power-law extrapolation from the end pairs, optionally bounded below by a
/// time-independent weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogTable {
    pub r: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<Box<Weight>>,
}

impl LogTable {
    pub fn new(r: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if r.len() < 2 || r.len() != values.len() {
            return Err(Error::invalid("table needs at least two (r, w) pairs"));
        }
        if r[0] <= 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("table radii must be positive and increasing"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("table values must be finite and >= 0"));
        }
        Ok(Self { r, values, floor: None })
    }

    pub fn with_floor(mut self, floor: Weight) -> Self {
        self.floor = Some(Box::new(floor));
        self
    }

    fn segment(&self, i: usize, x: f64) -> f64 {
        let (r0, r1, v0, v1) = (self.r[i], self.r[i + 1], self.values[i], self.values[i + 1]);
        if v0 > 0.0 && v1 > 0.0 {
            let s = (v1 / v0).ln() / (r1 / r0).ln();
            v0 * (x / r0).powf(s)
        } else {
            let u = (x - r0) / (r1 - r0);
            v0 + u * (v1 - v0)
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.r.len();
        let i = if x <= self.r[0] {
            0
        } else if x >= self.r[n - 1] {
            n - 2
        } else {
            self.r.partition_point(|&v| v <= x) - 1
        };
        let v = self.segment(i, x).max(0.0);
        match &self.floor {
            Some(f) => v.max(f.eval(x, 0.0)),
            None => v,
        }
    }

    fn spacing(&self, lo: f64, hi: f64) -> f64 {
        let n = self.r.len();
        let i = self.r.partition_point(|&v| v < lo).clamp(1, n - 1);
        let j = self.r.partition_point(|&v| v <= hi).clamp(i + 1, n);
        let s = 4.0 * (i..j).map(|k| self.r[k] - self.r[k - 1]).fold(f64::INFINITY, f64::min);
        match &self.floor {
            Some(f) => s.min(f.space_scale(lo, hi)),
            None => s,
        }
    }
}

/// Weight values on a tensor (r, t) table, bilinear in (log r, t) with zero
/// outside the time range and beyond the last radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTable {
    pub r: Vec<f64>,
    pub t: Vec<f64>,
    /// `values[ti * r.len() + ri]`
    pub values: Vec<f64>,
}

impl GridTable {
    pub fn new(r: Vec<f64>, t: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if r.len() < 2 || t.len() < 2 || values.len() != r.len() * t.len() {
            return Err(Error::invalid("grid table needs at least 2 x 2 values"));
        }
        if r[0] <= 0.0 || r.windows(2).any(|w| w[1] <= w[0]) || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid table axes must be increasing (r > 0)"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("grid table values must be finite and >= 0"));
        }
        Ok(Self { r, t, values })
    }

    /// Reads `r, t, w` rows covering a full tensor grid in any order.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::Io(format!("row {i}: expected columns r, t, w")));
            }
            let mut v = [0.0; 3];
            for (k, x) in v.iter_mut().enumerate() {
                *x = rec[k]
                    .trim()
                    .parse()
                    .map_err(|e| Error::Io(format!("row {i}: {e}")))?;
            }
            rows.push(v);
        }
        let mut r: Vec<f64> = rows.iter().map(|v| v[0]).collect();
        let mut t: Vec<f64> = rows.iter().map(|v| v[1]).collect();
        r.sort_by(f64::total_cmp);
        r.dedup();
        t.sort_by(f64::total_cmp);
        t.dedup();
        if rows.len() != r.len() * t.len() {
            return Err(Error::invalid("tabulated weight is not a full (r, t) grid"));
        }
        let mut values = vec![f64::NAN; rows.len()];
        for v in rows {
            let ri = r.partition_point(|&x| x < v[0]);
            let ti = t.partition_point(|&x| x < v[1]);
            values[ti * r.len() + ri] = v[2];
        }
        Self::new(r, t, values)
    }

    fn row(&self, ti: usize) -> LogTable {
        let n = self.r.len();
        LogTable {
            r: self.r.clone(),
            values: self.values[ti * n..(ti + 1) * n].to_vec(),
            floor: None,
        }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let (nt, last) = (self.t.len(), self.r[self.r.len() - 1]);
        if t < self.t[0] || t > self.t[nt - 1] || x > last {
            return 0.0;
        }
        let i = (self.t.partition_point(|&v| v <= t).clamp(1, nt - 1)) - 1;
        let u = (t - self.t[i]) / (self.t[i + 1] - self.t[i]);
        (1.0 - u) * self.row(i).eval(x) + u * self.row(i + 1).eval(x)
    }
}

/// A nonnegative weight w(x, t), radial in x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Weight {
    /// scale · X(|x|) · T(t)
    Separable {
        scale: f64,
        space: SpaceFactor,
        time: TimeFactor,
    },
    Sum { terms: Vec<Weight> },
    Tabulated { table: GridTable },
    /// inner(λx, μt)
    Dilated { inner: Box<Weight>, x: f64, t: f64 },
}

/// A separable weight with its dilations folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub scale: f64,
    pub space: SpaceFactor,
    pub time: TimeFactor,
    pub lx: f64,
    pub lt: f64,
}

impl SpaceFactor {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            SpaceFactor::Constant => 1.0,
            SpaceFactor::Power { gamma } => r.powf(-gamma),
            SpaceFactor::TruncatedPower { gamma, cut } => {
                let c = smooth_cut(r / cut);
                if c == 0.0 {
                    0.0
                } else {
                    r.powf(-gamma) * c
                }
            }
            SpaceFactor::Bump { width } => bump(r / width),
            SpaceFactor::Plateau { gamma } => r.powf(*gamma).min(1.0),
            SpaceFactor::Exponential { rate } => (rate * r).exp(),
            SpaceFactor::Table(t) => t.eval(r),
        }
    }

    fn singular(&self) -> bool {
        match self {
            SpaceFactor::Constant | SpaceFactor::Bump { .. } => false,
            SpaceFactor::Power { gamma } | SpaceFactor::TruncatedPower { gamma, .. } => *gamma != 0.0,
            _ => true,
        }
    }

    fn scale(&self, lo: f64, hi: f64) -> f64 {
        match self {
            SpaceFactor::TruncatedPower { cut, .. } if hi >= *cut && lo <= 2.0 * cut => cut / 2.0,
            SpaceFactor::Bump { width } if lo < *width => width / 2.0,
            SpaceFactor::Plateau { .. } if lo <= 1.0 && hi >= 1.0 => 1.0 / 16.0,
            SpaceFactor::Exponential { rate } if *rate != 0.0 => 1.0 / rate.abs(),
            SpaceFactor::Table(t) => t.spacing(lo, hi),
            _ => f64::INFINITY,
        }
    }

    fn length(&self) -> Option<f64> {
        match self {
            SpaceFactor::TruncatedPower { cut, .. } => Some(2.0 * cut),
            SpaceFactor::Bump { width } => Some(*width),
            SpaceFactor::Plateau { .. } => Some(1.0),
            SpaceFactor::Exponential { rate } if *rate != 0.0 => Some(1.0 / rate.abs()),
            SpaceFactor::Table(t) => Some(t.r[t.r.len() - 1]),
            _ => None,
        }
    }

    fn compact(&self) -> bool {
        matches!(self, SpaceFactor::TruncatedPower { .. } | SpaceFactor::Bump { .. })
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            SpaceFactor::Constant => true,
            SpaceFactor::Power { gamma } | SpaceFactor::Plateau { gamma } => gamma.is_finite(),
            SpaceFactor::TruncatedPower { gamma, cut } => gamma.is_finite() && *cut > 0.0,
            SpaceFactor::Bump { width } => *width > 0.0 && width.is_finite(),
            SpaceFactor::Exponential { rate } => rate.is_finite(),
            SpaceFactor::Table(t) => {
                LogTable::new(t.r.clone(), t.values.clone()).is_ok()
                    && t.floor.as_ref().is_none_or(|f| f.validate().is_ok())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid space factor {self:?}")))
        }
    }
}

impl TimeFactor {
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        match self {
            TimeFactor::Constant => 1.0,
            TimeFactor::Power { gamma } => t.powf(-gamma),
            TimeFactor::TruncatedPower { gamma, cut } => {
                let c = smooth_cut(t / cut);
                if c == 0.0 {
                    0.0
                } else {
                    t.powf(-gamma) * c
                }
            }
            TimeFactor::Bump { width } => bump(t / width),
        }
    }

    fn singular(&self) -> bool {
        match self {
            TimeFactor::Power { gamma } | TimeFactor::TruncatedPower { gamma, .. } => *gamma != 0.0,
            _ => false,
        }
    }

    fn scale(&self, lo: f64, hi: f64) -> f64 {
        match self {
            TimeFactor::TruncatedPower { cut, .. } if hi >= *cut && lo <= 2.0 * cut => cut / 4.0,
            TimeFactor::Bump { width } if lo < *width => width / 4.0,
            _ => f64::INFINITY,
        }
    }

    fn compact(&self) -> bool {
        matches!(self, TimeFactor::TruncatedPower { .. } | TimeFactor::Bump { .. })
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            TimeFactor::Constant => true,
            TimeFactor::Power { gamma } => gamma.is_finite(),
            TimeFactor::TruncatedPower { gamma, cut } => gamma.is_finite() && *cut > 0.0,
            TimeFactor::Bump { width } => *width > 0.0 && width.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid time factor {self:?}")))
        }
    }
}

/// |t| range of an interval.
fn abs_range(lo: f64, hi: f64) -> (f64, f64) {
    if lo <= 0.0 && hi >= 0.0 {
        (0.0, lo.abs().max(hi.abs()))
    } else {
        (lo.abs().min(hi.abs()), lo.abs().max(hi.abs()))
    }
}

impl Weight {
    pub fn separable(scale: f64, space: SpaceFactor, time: TimeFactor) -> Self {
        Weight::Separable { scale, space, time }
    }

    /// |x|^{−γx} |t|^{−γt}
    pub fn power(gamma_x: f64, gamma_t: f64) -> Self {
        Self::separable(
            1.0,
            SpaceFactor::Power { gamma: gamma_x },
            TimeFactor::Power { gamma: gamma_t },
        )
    }

    pub fn constant(c: f64) -> Self {
        Self::separable(c, SpaceFactor::Constant, TimeFactor::Constant)
    }

    /// w(λx, μt)
    pub fn dilate(&self, lambda: f64, mu: f64) -> Self {
        Weight::Dilated {
            inner: Box::new(self.clone()),
            x: lambda,
            t: mu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Weight::Separable { scale, space, time } => {
                if !(scale.is_finite() && *scale >= 0.0) {
                    return Err(Error::invalid("weight scale must be finite and >= 0"));
                }
                space.validate()?;
                time.validate()
            }
            Weight::Sum { terms } => {
                if terms.is_empty() {
                    return Err(Error::invalid("sum weight needs terms"));
                }
                terms.iter().try_for_each(Weight::validate)
            }
            Weight::Tabulated { table } => {
                GridTable::new(table.r.clone(), table.t.clone(), table.values.clone()).map(|_| ())
            }
            Weight::Dilated { inner, x, t } => {
                if !(*x > 0.0 && *t > 0.0 && x.is_finite() && t.is_finite()) {
                    return Err(Error::invalid("dilations must be positive"));
                }
                inner.validate()
            }
        }
    }

    pub fn eval(&self, r: f64, t: f64) -> f64 {
        match self {
            Weight::Separable { scale, space, time } => scale * space.eval(r) * time.eval(t),
            Weight::Sum { terms } => terms.iter().map(|w| w.eval(r, t)).sum(),
            Weight::Tabulated { table } => table.eval(r, t),
            Weight::Dilated { inner, x, t: mu } => inner.eval(x * r, mu * t),
        }
    }

    pub fn split(&self) -> Option<Split> {
        match self {
            Weight::Separable { scale, space, time } => Some(Split {
                scale: *scale,
                space: space.clone(),
                time: time.clone(),
                lx: 1.0,
                lt: 1.0,
            }),
            Weight::Dilated { inner, x, t } => inner.split().map(|s| Split {
                lx: s.lx * x,
                lt: s.lt * t,
                ..s
            }),
            _ => None,
        }
    }

    pub fn space_singular(&self) -> bool {
        match self {
            Weight::Separable { space, .. } => space.singular(),
            Weight::Sum { terms } => terms.iter().any(Weight::space_singular),
            Weight::Tabulated { .. } => true,
            Weight::Dilated { inner, .. } => inner.space_singular(),
        }
    }

    pub fn time_singular(&self) -> bool {
        match self {
            Weight::Separable { time, .. } => time.singular(),
            Weight::Sum { terms } => terms.iter().any(Weight::time_singular),
            Weight::Tabulated { .. } => false,
            Weight::Dilated { inner, .. } => inner.time_singular(),
        }
    }

    /// Length over which the weight is smooth for |x| in [lo, hi].
    pub fn space_scale(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Weight::Separable { space, .. } => space.scale(lo, hi),
            Weight::Sum { terms } => terms.iter().map(|w| w.space_scale(lo, hi)).fold(f64::INFINITY, f64::min),
            Weight::Tabulated { table } if lo > table.r[table.r.len() - 1] => f64::INFINITY,
            Weight::Tabulated { table } => table.row(0).spacing(lo, hi),
            Weight::Dilated { inner, x, .. } => inner.space_scale(x * lo, x * hi) / x,
        }
    }

    /// Length over which the weight is smooth for t in [lo, hi].
    pub fn time_scale(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Weight::Separable { time, .. } => {
                let (a, b) = abs_range(lo, hi);
                time.scale(a, b)
            }
            Weight::Sum { terms } => terms.iter().map(|w| w.time_scale(lo, hi)).fold(f64::INFINITY, f64::min),
            Weight::Tabulated { table } if hi < table.t[0] || lo > table.t[table.t.len() - 1] => f64::INFINITY,
            Weight::Tabulated { table } => {
                let s = table.t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
                4.0 * s
            }
            Weight::Dilated { inner, t, .. } => inner.time_scale(t * lo, t * hi) / t,
        }
    }

    /// A characteristic spatial length, if the weight has one.
    pub fn space_length(&self) -> Option<f64> {
        match self {
            Weight::Separable { space, .. } => space.length(),
            Weight::Sum { terms } => terms.iter().filter_map(Weight::space_length).reduce(f64::max),
            Weight::Tabulated { table } => Some(table.r[table.r.len() - 1]),
            Weight::Dilated { inner, x, .. } => inner.space_length().map(|l| l / x),
        }
    }

    /// Compact support in both x and t.
    pub fn compactly_supported(&self) -> bool {
        match self {
            Weight::Separable { space, time, scale } => *scale == 0.0 || (space.compact() && time.compact()),
            Weight::Sum { terms } => terms.iter().all(Weight::compactly_supported),
            Weight::Tabulated { .. } => true,
            Weight::Dilated { inner, .. } => inner.compactly_supported(),
        }
    }

    /// The slice x ↦ w(x, t) as a time-independent weight.
    pub fn at_time(&self, t: f64) -> Weight {
        match self {
            Weight::Separable { scale, space, time } => Weight::Separable {
                scale: scale * time.eval(t),
                space: space.clone(),
                time: TimeFactor::Constant,
            },
            Weight::Sum { terms } => Weight::Sum {
                terms: terms.iter().map(|w| w.at_time(t)).collect(),
            },
            Weight::Tabulated { table } => {
                let n = table.r.len();
                let values = (0..n).map(|i| table.eval(table.r[i], t)).collect();
                Weight::separable(
                    1.0,
                    SpaceFactor::Table(LogTable {
                        r: table.r.clone(),
                        values,
                        floor: None,
                    }),
                    TimeFactor::Constant,
                )
            }
            Weight::Dilated { inner, x, t: mu } => Weight::Dilated {
                inner: Box::new(inner.at_time(mu * t)),
                x: *x,
                t: 1.0,
            },
        }
    }

    /// w^{-1}, only for time-independent slices used by A₂.
    fn space_only(&self) -> bool {
        match self {
            Weight::Separable { time, .. } => matches!(time, TimeFactor::Constant),
            Weight::Sum { terms } => terms.iter().all(Weight::space_only),
            Weight::Tabulated { .. } => false,
            Weight::Dilated { inner, .. } => inner.space_only(),
        }
    }
}

/// Parameters (α, p, a) in dimension n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McParams {
    pub alpha: f64,
    pub p: f64,
    pub a: f64,
    pub n: usize,
}

impl McParams {
    pub fn new(alpha: f64, p: f64, a: f64, n: usize) -> Result<Self> {
        let s = Self { alpha, p, a, n };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.p >= 1.0 && self.a >= 1.0 && self.n >= 1) {
            return Err(Error::hypothesis(format!(
                "need alpha > 0, p >= 1, a >= 1, n >= 1; got {self:?}"
            )));
        }
        if self.p > self.endpoint() * (1.0 + 1e-12) {
            return Err(Error::hypothesis(format!(
                "p = {} exceeds (n + a)/alpha = {}",
                self.p,
                self.endpoint()
            )));
        }
        Ok(())
    }

    /// (n + a)/α
    pub fn endpoint(&self) -> f64 {
        (self.n as f64 + self.a) / self.alpha
    }
}

/// Cubes Q(2^{m−2}k, 2^m) × I(2^{ma−2} j, 2^{ma}) with |k_i| ≤ K, |j| ≤ J and
/// m_min ≤ m ≤ m_max. Offsets are measured in quarter side lengths, so the
/// lattice is dilation-covariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeLattice {
    pub m_min: i32,
    pub m_max: i32,
    pub space_offsets: u32,
    pub time_offsets: u32,
}

impl Default for CubeLattice {
    fn default() -> Self {
        Self {
            m_min: -6,
            m_max: 6,
            space_offsets: 16,
            time_offsets: 8,
        }
    }
}

impl CubeLattice {
    pub fn validate(&self) -> Result<()> {
        if self.m_min >= self.m_max {
            return Err(Error::invalid("lattice needs m_min < m_max"));
        }
        if self.m_max - self.m_min > 60 {
            return Err(Error::invalid("lattice radius range too wide"));
        }
        Ok(())
    }

    pub fn shifted(&self, dm: i32) -> Self {
        Self {
            m_min: self.m_min + dm,
            m_max: self.m_max + dm,
            ..*self
        }
    }

    /// Offsets k with K ≥ k_1 ≥ ... ≥ k_n ≥ 0; for radial weights every other
    /// lattice cube is a reflection or permutation of one of these.
    pub fn chamber(&self, n: usize) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        let mut cur = vec![0i64; n];
        fn rec(d: usize, max: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
            if d == cur.len() {
                out.push(cur.clone());
                return;
            }
            for v in (0..=max).rev() {
                cur[d] = v;
                rec(d + 1, v, cur, out);
            }
        }
        rec(0, self.space_offsets as i64, &mut cur, &mut out);
        out
    }
}

/// One lattice cube.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cube {
    pub m: i32,
    pub k: Vec<i64>,
    pub j: i64,
}

impl Cube {
    pub fn side(&self) -> f64 {
        2f64.powi(self.m)
    }

    pub fn center(&self) -> Vec<f64> {
        let q = 2f64.powi(self.m - 2);
        self.k.iter().map(|&k| q * k as f64).collect()
    }

    pub fn time_center(&self, a: f64) -> f64 {
        0.25 * self.side().powf(a) * self.j as f64
    }
}

/// Refinement controls for cube and interval quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cubature {
    /// Geometric refinement levels toward a singular origin.
    pub origin_depth: u32,
    /// Refinement levels to reach the weight's smoothness length.
    pub scale_depth: u32,
    /// Leaf Gauss–Legendre order per axis; 0 picks 6 for n ≤ 2 and 4 otherwise.
    pub order: usize,
    /// Geometric refinement levels toward t = 0.
    pub time_depth: u32,
}

impl Default for Cubature {
    fn default() -> Self {
        Self {
            origin_depth: 16,
            scale_depth: 10,
            order: 0,
            time_depth: 12,
        }
    }
}

impl Cubature {
    fn leaf_order(&self, n: usize) -> usize {
        if self.order > 0 {
            self.order
        } else if n <= 2 {
            6
        } else {
            4
        }
    }
}

/// Radial nodes and weights of a cube: ∫_Q f(|y|) dy ≈ Σ ω_i f(ρ_i).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RadialMeasure {
    pub radii: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RadialMeasure {
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.radii.iter().zip(&self.weights).map(|(&r, &w)| w * f(r)).sum()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Two-point Gauss rule per radial bin, bins of width 2^{1/per_octave}
    /// anchored at powers of two (exact for cubics within each bin, and
    /// covariant under dilation by 2).
    pub fn compressed(&self, per_octave: u32) -> RadialMeasure {
        use std::collections::BTreeMap;
        let bin = |r: f64| -> i64 {
            let e = r.log2().floor();
            let mant = r / 2f64.powf(e);
            let e = if mant >= 2.0 { e + 1.0 } else if mant < 1.0 { e - 1.0 } else { e };
            let mant = r / 2f64.powf(e);
            e as i64 * per_octave as i64 + (mant.log2() * per_octave as f64).floor() as i64
        };
        let mut bins: BTreeMap<i64, [f64; 2]> = BTreeMap::new();
        for (&r, &w) in self.radii.iter().zip(&self.weights) {
            let e = bins.entry(bin(r)).or_insert([0.0; 2]);
            e[0] += w;
            e[1] += w * r;
        }
        let mut central: BTreeMap<i64, [f64; 2]> = BTreeMap::new();
        for (&r, &w) in self.radii.iter().zip(&self.weights) {
            let b = bin(r);
            let m = bins[&b];
            let x = r - m[1] / m[0];
            let e = central.entry(b).or_insert([0.0; 2]);
            e[0] += w * x * x;
            e[1] += w * x * x * x;
        }
        let mut out = RadialMeasure::default();
        for (b, m) in &bins {
            let (m0, mu) = (m[0], m[1] / m[0]);
            let c = central[b];
            let var = c[0] / m0;
            if !(var > 1e-24 * mu * mu) {
                out.radii.push(mu);
                out.weights.push(m0);
                continue;
            }
            let g = c[1] / m0 / var;
            let d = (g * g + 4.0 * var).sqrt();
            let (xp, xm) = (0.5 * (g + d), 0.5 * (g - d));
            out.radii.push(mu + xm);
            out.weights.push(m0 * xp / (xp - xm));
            out.radii.push(mu + xp);
            out.weights.push(-m0 * xm / (xp - xm));
        }
        out
    }
}

const MAX_DIM: usize = 8;

/// Radial measure of the axis-parallel cube with the given center and side.
pub fn cube_measure(w: &Weight, center: &[f64], side: f64, opts: &Cubature) -> RadialMeasure {
    let n = center.len();
    assert!((1..=MAX_DIM).contains(&n), "dimension out of range");
    let q = opts.leaf_order(n);
    let gl = GaussLegendre::cached(q);
    let singular = w.space_singular();
    let mut out = RadialMeasure::default();
    let mut lo0 = [0.0; MAX_DIM];
    for d in 0..n {
        lo0[d] = center[d] - 0.5 * side;
    }
    let mut stack = vec![(lo0, side, 0u32)];
    let mut coords = vec![0.0; n * q];
    while let Some((lo, h, depth)) = stack.pop() {
        let mut dmin2 = 0.0;
        let mut dmax2 = 0.0;
        for &a in &lo[..n] {
            let b = a + h;
            let near = if a > 0.0 {
                a
            } else if b < 0.0 {
                -b
            } else {
                0.0
            };
            dmin2 += near * near;
            dmax2 += a.abs().max(b.abs()).powi(2);
        }
        let (dmin, dmax) = (dmin2.sqrt(), dmax2.sqrt());
        let split = (singular && depth < opts.origin_depth && dmin < h)
            || (depth < opts.scale_depth && h > w.space_scale(dmin, dmax));
        if split {
            let half = 0.5 * h;
            for bits in 0..(1usize << n) {
                let mut c = lo;
                for (d, cd) in c.iter_mut().enumerate().take(n) {
                    if bits >> d & 1 == 1 {
                        *cd += half;
                    }
                }
                stack.push((c, half, depth + 1));
            }
            continue;
        }
        for d in 0..n {
            for i in 0..q {
                coords[d * q + i] = lo[d] + 0.5 * h * (gl.nodes()[i] + 1.0);
            }
        }
        let wscale = (0.5 * h).powi(n as i32);
        let mut idx = vec![0usize; n];
        loop {
            let mut r2 = 0.0;
            let mut wt = wscale;
            for d in 0..n {
                let x = coords[d * q + idx[d]];
                r2 += x * x;
                wt *= gl.weights()[idx[d]];
            }
            out.radii.push(r2.sqrt());
            out.weights.push(wt);
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < q {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == n {
                    break;
                }
            }
            if d == n {
                break;
            }
        }
    }
    out
}

/// Nodes and weights on [lo, hi] for the time integrals of `w`.
pub fn interval_measure(w: &Weight, lo: f64, hi: f64, opts: &Cubature) -> (Vec<f64>, Vec<f64>) {
    let gl = GaussLegendre::cached(16);
    let mut pieces: Vec<(f64, f64, bool)> = Vec::new(); // (start, end, grade toward start)
    let singular = w.time_singular();
    if singular && lo < 0.0 && hi > 0.0 {
        pieces.push((0.0, lo, true));
        pieces.push((0.0, hi, true));
    } else if singular {
        let len = hi - lo;
        if lo >= 0.0 {
            pieces.push((lo, hi, lo < len));
        } else {
            pieces.push((hi, lo, -hi < len));
        }
    } else {
        pieces.push((lo, hi, false));
    }
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (start, end, graded) in pieces {
        let len = end - start; // signed
        let breaks: Vec<f64> = if graded {
            let d = start.abs();
            let levels = if d == 0.0 {
                opts.time_depth
            } else {
                ((len.abs() / d).log2().ceil() as u32 + 1).min(opts.time_depth)
            };
            graded_breaks(0.0, 1.0, levels).into_iter().map(|u| start + u * len).collect()
        } else {
            vec![start, end]
        };
        for pair in breaks.windows(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            let scale = w.time_scale(a, b);
            let count = if scale.is_finite() {
                ((b - a) / scale).ceil().clamp(1.0, 4096.0) as usize
            } else {
                1
            };
            for c in 0..count {
                let pa = a + (b - a) * c as f64 / count as f64;
                let pb = a + (b - a) * (c + 1) as f64 / count as f64;
                for (x, wt) in gl.mapped(pa, pb) {
                    nodes.push(x);
                    weights.push(wt);
                }
            }
        }
    }
    (nodes, weights)
}

fn check_finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::SingularSampling(format!("{what} is not finite")))
    }
}

/// ∫_Q w(|y|, t)^p dy for a slice, time ignored; separable weights use the
/// space factor only.
fn space_integral(w: &Weight, m: &RadialMeasure, p: f64) -> Result<f64> {
    let v = m.integrate(|r| w.eval(r, 0.0).powf(p));
    check_finite(v, "cube integral")
}

/// Value of the Morrey–Campanato functional on one cube.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubeValue {
    pub cube: Cube,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub value: f64,
    pub argmax: Cube,
    /// Maximum over the cubes of each radius, index m − m_min.
    pub per_m: Vec<f64>,
    /// The maximum sits on the boundary of the radius range.
    pub growth: bool,
}

/// Relative excess over the interior maximum that sets the growth flag.
pub const GROWTH_TOLERANCE: f64 = 1e-6;

fn growth_flag(per_m: &[f64]) -> bool {
    let n = per_m.len();
    if n < 3 {
        return true;
    }
    let interior = per_m[1..n - 1].iter().cloned().fold(0.0, f64::max);
    let edge = per_m[0].max(per_m[n - 1]);
    edge > interior * (1.0 + GROWTH_TOLERANCE)
}

struct TimeTable {
    js: Vec<i64>,
    values: Vec<f64>,
}

/// Per-m data: time integrals (separable) or measures (general).
fn time_integrals(split: &Split, p: f64, m: i32, a: f64, lattice: &CubeLattice, opts: &Cubature) -> Result<TimeTable> {
    let len = 2f64.powi(m).powf(a);
    let tw = Weight::Dilated {
        inner: Box::new(Weight::separable(1.0, SpaceFactor::Constant, split.time.clone())),
        x: 1.0,
        t: split.lt,
    };
    let jmax = lattice.time_offsets as i64;
    let js: Vec<i64> = (-jmax..=jmax).collect();
    let mut values = Vec::with_capacity(js.len());
    for &j in &js {
        let c = 0.25 * len * j as f64;
        let (nodes, wts) = interval_measure(&tw, c - 0.5 * len, c + 0.5 * len, opts);
        let v: f64 = nodes.iter().zip(&wts).map(|(&t, &q)| q * tw.eval(0.0, t).powf(p)).sum();
        values.push(check_finite(v, "time integral")?);
    }
    Ok(TimeTable { js, values })
}

/// Radial bins per octave for non-separable weights, whose cube integrals
/// cost (space nodes) x (time nodes).
pub const COMPRESSION_BINS: u32 = 32;

/// Largest number of weight evaluations per radius for non-separable weights.
pub const NON_SEPARABLE_BUDGET: usize = 200_000_000;

/// Every cube value r^α (r^{−(n+a)} ∫∫ w^p)^{1/p} on the lattice (chamber
/// offsets only), in lattice order.
pub fn mc_cube_values(w: &Weight, params: &McParams, lattice: &CubeLattice, opts: &Cubature) -> Result<Vec<CubeValue>> {
    w.validate()?;
    params.validate()?;
    lattice.validate()?;
    let McParams { alpha, p, a, n } = *params;
    let chamber = lattice.chamber(n);
    let mut out = Vec::new();
    for m in lattice.m_min..=lattice.m_max {
        let s = 2f64.powi(m);
        let norm = s.powf(alpha);
        let vol = s.powf(n as f64 + a);
        let cube_of = |k: &Vec<i64>, j: i64| Cube { m, k: k.clone(), j };
        if let Some(split) = w.split() {
            let xw = Weight::Dilated {
                inner: Box::new(Weight::separable(1.0, split.space.clone(), TimeFactor::Constant)),
                x: split.lx,
                t: 1.0,
            };
            let tt = time_integrals(&split, p, m, a, lattice, opts)?;
            let xs = crate::par::try_map(chamber.len(), |i| {
                let c: Vec<f64> = chamber[i].iter().map(|&k| 0.25 * s * k as f64).collect();
                space_integral(&xw, &cube_measure(&xw, &c, s, opts), p)
            })?;
            let sp = split.scale.powf(p);
            for (k, xv) in chamber.iter().zip(&xs) {
                for (&j, tv) in tt.js.iter().zip(&tt.values) {
                    let v = norm * (sp * xv * tv / vol).powf(1.0 / p);
                    out.push(CubeValue {
                        cube: cube_of(k, j),
                        value: check_finite(v, "cube value")?,
                    });
                }
            }
        } else {
            let len = s.powf(a);
            let jmax = lattice.time_offsets as i64;
            let times: Vec<(Vec<f64>, Vec<f64>)> = (-jmax..=jmax)
                .map(|j| {
                    let c = 0.25 * len * j as f64;
                    interval_measure(w, c - 0.5 * len, c + 0.5 * len, opts)
                })
                .collect();
            let time_nodes: usize = times.iter().map(|t| t.0.len()).sum();
            // compressed cubes carry at most two nodes per bin between the
            // deepest origin cell and the far corner
            let reach = (lattice.space_offsets as f64 / 4.0 + 1.0) * (n as f64).sqrt();
            let octaves = reach.log2().ceil() + opts.origin_depth as f64 + 1.0;
            let bound = (2.0 * COMPRESSION_BINS as f64 * octaves) as usize;
            let evals = chamber.len().saturating_mul(bound).saturating_mul(time_nodes);
            if evals > NON_SEPARABLE_BUDGET {
                return Err(Error::Budget(format!(
                    "non-separable weight needs up to {evals} evaluations at m = {m} (limit {NON_SEPARABLE_BUDGET})"
                )));
            }
            let measures = crate::par::map(chamber.len(), |i| {
                let c: Vec<f64> = chamber[i].iter().map(|&k| 0.25 * s * k as f64).collect();
                cube_measure(w, &c, s, opts).compressed(COMPRESSION_BINS)
            });
            let rows = crate::par::try_map(chamber.len(), |i| {
                let meas = &measures[i];
                let mut vals = Vec::with_capacity(times.len());
                for (tn, tw) in &times {
                    let mut acc = 0.0;
                    for (&t, &q) in tn.iter().zip(tw) {
                        acc += q * meas.integrate(|r| w.eval(r, t).powf(p));
                    }
                    vals.push(check_finite(norm * (acc / vol).powf(1.0 / p), "cube value")?);
                }
                Ok::<_, Error>(vals)
            })?;
            for (k, vals) in chamber.iter().zip(rows) {
                for (jj, v) in vals.into_iter().enumerate() {
                    out.push(CubeValue {
                        cube: cube_of(k, jj as i64 - jmax),
                        value: v,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn report_from(values: &[CubeValue], lattice: &CubeLattice) -> McReport {
    let nm = (lattice.m_max - lattice.m_min + 1) as usize;
    let mut per_m = vec![0.0f64; nm];
    let mut best = 0usize;
    for (i, cv) in values.iter().enumerate() {
        let slot = (cv.cube.m - lattice.m_min) as usize;
        per_m[slot] = per_m[slot].max(cv.value);
        if cv.value > values[best].value {
            best = i;
        }
    }
    McReport {
        value: values[best].value,
        argmax: values[best].cube.clone(),
        growth: growth_flag(&per_m),
        per_m,
    }
}

/// The lattice maximum, its cube, per-radius maxima and the growth flag.
pub fn mc_norm(w: &Weight, params: &McParams, lattice: &CubeLattice) -> Result<McReport> {
    mc_norm_with(w, params, lattice, &Cubature::default())
}

pub fn mc_norm_with(w: &Weight, params: &McParams, lattice: &CubeLattice, opts: &Cubature) -> Result<McReport> {
    let values = mc_cube_values(w, params, lattice, opts)?;
    Ok(report_from(&values, lattice))
}

/// (ω_{n−1} ∫ X^p r^{n−1} dr · ∫ T^p dt)^{1/p} for a compactly supported
/// separable weight.
pub fn global_lp_norm(w: &Weight, n: usize, p: f64) -> Result<f64> {
    let split = w
        .split()
        .ok_or_else(|| Error::invalid("global L^p norm needs a separable weight"))?;
    if !w.compactly_supported() {
        return Err(Error::hypothesis("global L^p norm needs compact support"));
    }
    let space_r = match split.space {
        SpaceFactor::TruncatedPower { cut, .. } => 2.0 * cut,
        SpaceFactor::Bump { width } => width,
        _ => unreachable!("compact space factor"),
    } / split.lx;
    let time_r = match split.time {
        TimeFactor::TruncatedPower { cut, .. } => 2.0 * cut,
        TimeFactor::Bump { width } => width,
        _ => unreachable!("compact time factor"),
    } / split.lt;
    let gl = GaussLegendre::cached(16);
    let graded = |end: f64| {
        let mut b = graded_breaks(0.0, end / 64.0, 40);
        for i in 2..=64 {
            b.push(end * i as f64 / 64.0);
        }
        b
    };
    let mut xs = 0.0;
    for pair in graded(space_r).windows(2) {
        xs += gl.integrate(pair[0], pair[1], |r| {
            split.space.eval(split.lx * r).powf(p) * r.powi(n as i32 - 1)
        });
    }
    let mut ts = 0.0;
    for pair in graded(time_r).windows(2) {
        ts += 2.0 * gl.integrate(pair[0], pair[1], |t| split.time.eval(split.lt * t).powf(p));
    }
    Ok(split.scale * (crate::radial::sphere_area(n) * xs * ts).powf(1.0 / p))
}

/// Controls for the maximal function sup over cube sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaximalOptions {
    pub sides_per_octave: u32,
    /// Octaves below and above |x| (and the weight's own length) scanned.
    pub octaves_below: u32,
    pub octaves_above: u32,
    pub cubature: Cubature,
}

impl Default for MaximalOptions {
    fn default() -> Self {
        Self {
            sides_per_octave: 4,
            octaves_below: 4,
            octaves_above: 3,
            cubature: Cubature {
                origin_depth: 10,
                ..Cubature::default()
            },
        }
    }
}

/// w_*(r e₁, t) = sup over cubes Q' centred at r e₁ of (avg_{Q'} w^ρ)^{1/ρ},
/// the vanishing-side limit w(r, t) included.
pub fn maximal_function(w: &Weight, n: usize, rho: f64, r_nodes: &[f64], t: f64, opts: &MaximalOptions) -> Result<Vec<f64>> {
    if !(rho > 1.0 && rho.is_finite()) {
        return Err(Error::hypothesis(format!("maximal exponent rho must exceed 1, got {rho}")));
    }
    w.validate()?;
    let slice = w.at_time(t);
    let length = slice.space_length();
    let spo = opts.sides_per_octave.max(1) as i32;
    crate::par::try_map(r_nodes.len(), |i| {
        let r = r_nodes[i];
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid("maximal function nodes must be positive"));
        }
        let mut sides: Vec<f64> = (-(opts.octaves_below as i32) * spo..=(opts.octaves_above as i32) * spo)
            .map(|k| 2.0 * r * 2f64.powf(k as f64 / spo as f64))
            .collect();
        if let Some(l) = length {
            let base = 2.0 * (r + l);
            sides.extend((-(opts.octaves_below as i32) * spo..=(opts.octaves_above as i32 - 1) * spo).map(|k| base * 2f64.powf(k as f64 / spo as f64)));
        }
        let mut center = vec![0.0; n];
        center[0] = r;
        let mut best = check_finite(slice.eval(r, 0.0), "weight")?;
        for s in sides {
            let meas = cube_measure(&slice, &center, s, &opts.cubature);
            let avg = meas.integrate(|y| slice.eval(y, 0.0).powf(rho)) / s.powi(n as i32);
            best = best.max(check_finite(avg, "maximal average")?.powf(1.0 / rho));
        }
        Ok(best)
    })
}

/// One time slice of w_* as a time-independent tabulated weight, floored by
/// the slice of w.
pub fn maximal_slice(w: &Weight, n: usize, rho: f64, r_nodes: &[f64], t: f64, opts: &MaximalOptions) -> Result<Weight> {
    let vals = maximal_function(w, n, rho, r_nodes, t, opts)?;
    let table = LogTable::new(r_nodes.to_vec(), vals)?.with_floor(w.at_time(t));
    Ok(Weight::separable(1.0, SpaceFactor::Table(table), TimeFactor::Constant))
}

/// Log-spaced radii covering the lattice's cubes, clipped to
/// [L/16, 64 L] around the weight's own length L when it has one; the
/// table's power-law extrapolation covers the rest. The lower clip applies
/// only to weights singular at the origin, where w_* is homogeneous near 0.
pub fn maximal_table_nodes(w: &Weight, lattice: &CubeLattice, n: usize, per_octave: u32) -> Vec<f64> {
    let reach = (lattice.space_offsets as f64 / 4.0 + 1.0) * (n as f64).sqrt() * 2f64.powi(lattice.m_max);
    let mut lo = lattice.m_min - 6;
    let mut hi = reach.log2().ceil() as i32 + 1;
    if let Some(l) = w.space_length() {
        let ll = l.log2().floor() as i32;
        if w.space_singular() {
            lo = lo.max(ll - 4).min(hi - 2);
        }
        hi = hi.min(ll + 6).max(lo + 2);
    }
    let count = ((hi - lo) as u32 * per_octave) as usize;
    (0..=count)
        .map(|i| 2f64.powf(lo as f64 + i as f64 / per_octave as f64))
        .collect()
}

/// w_* as a weight: separable weights keep their time factor and get a
/// tabulated space factor; other weights are tabulated on `t_nodes`.
pub fn maximal_weight(w: &Weight, n: usize, rho: f64, r_nodes: &[f64], t_nodes: &[f64], opts: &MaximalOptions) -> Result<Weight> {
    if let Some(split) = w.split() {
        let xw = Weight::Dilated {
            inner: Box::new(Weight::separable(1.0, split.space.clone(), TimeFactor::Constant)),
            x: split.lx,
            t: 1.0,
        };
        let vals = match split.space {
            // M commutes with dilations, so a homogeneous factor needs one evaluation
            SpaceFactor::Power { gamma } => {
                let c = maximal_function(&xw, n, rho, &[1.0], 0.0, opts)?[0];
                r_nodes.iter().map(|r| c * r.powf(-gamma)).collect()
            }
            SpaceFactor::Constant => vec![1.0; r_nodes.len()],
            _ => maximal_function(&xw, n, rho, r_nodes, 0.0, opts)?,
        };
        // w_* ≥ w holds exactly; the floor keeps interpolation from undercutting it
        let table = LogTable::new(r_nodes.to_vec(), vals)?.with_floor(xw);
        let inner = Weight::separable(split.scale, SpaceFactor::Table(table), split.time);
        Ok(Weight::Dilated {
            inner: Box::new(inner),
            x: 1.0,
            t: split.lt,
        })
    } else {
        let mut values = Vec::with_capacity(r_nodes.len() * t_nodes.len());
        for &t in t_nodes {
            values.extend(maximal_function(w, n, rho, r_nodes, t, opts)?);
        }
        Ok(Weight::Tabulated {
            table: GridTable::new(r_nodes.to_vec(), t_nodes.to_vec(), values)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaximalRatio {
    pub ratio: f64,
    pub norm: McReport,
    pub maximal_norm: McReport,
    /// α > a/p and p > ρ.
    pub hypotheses: bool,
}

/// mc_norm(w_*)/mc_norm(w).
pub fn mc_norm_of_maximal(
    w: &Weight,
    params: &McParams,
    lattice: &CubeLattice,
    rho: f64,
    opts: &MaximalOptions,
    per_octave: u32,
) -> Result<MaximalRatio> {
    let base = mc_norm_with(w, params, lattice, &opts.cubature)?;
    let nodes = maximal_table_nodes(w, lattice, params.n, per_octave);
    let ws = maximal_weight(w, params.n, rho, &nodes, &[], opts)?;
    let maximal_norm = mc_norm_with(&ws, params, lattice, &opts.cubature)?;
    if base.value == 0.0 {
        return Err(Error::DivisionGuard("weight has zero norm".into()));
    }
    Ok(MaximalRatio {
        ratio: maximal_norm.value / base.value,
        norm: base,
        maximal_norm,
        hypotheses: params.alpha > params.a / params.p && params.p > rho,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuckenhouptReport {
    pub constant: f64,
    pub argmax: Vec<i64>,
    pub argmax_m: i32,
    pub per_m: Vec<f64>,
    /// Maximum on the largest or smallest cubes (domain-driven growth).
    pub growth: bool,
    /// Constant changes by more than 10% between origin depths 8 and 16.
    pub divergent: bool,
}

/// Spatial cubes of the lattice: (m, k, radial measure of Q(2^{m−2}k, 2^m)).
fn spatial_cubes(w: &Weight, n: usize, lattice: &CubeLattice, opts: &Cubature) -> Vec<(i32, Vec<i64>, RadialMeasure)> {
    let chamber = lattice.chamber(n);
    let mut out = Vec::new();
    for m in lattice.m_min..=lattice.m_max {
        let s = 2f64.powi(m);
        let ms = crate::par::map(chamber.len(), |i| {
            let c: Vec<f64> = chamber[i].iter().map(|&k| 0.25 * s * k as f64).collect();
            cube_measure(w, &c, s, opts)
        });
        for (k, meas) in chamber.iter().zip(ms) {
            out.push((m, k.clone(), meas));
        }
    }
    out
}

fn muckenhoupt<F>(w: &Weight, n: usize, lattice: &CubeLattice, depth: u32, per_cube: F) -> Result<(f64, i32, Vec<i64>, Vec<f64>)>
where
    F: Fn(&Weight, &RadialMeasure) -> Result<f64>,
{
    lattice.validate()?;
    if !w.space_only() {
        return Err(Error::invalid("Muckenhoupt constants take a time slice (use at_time)"));
    }
    let opts = Cubature {
        origin_depth: depth,
        ..Cubature::default()
    };
    let cubes = spatial_cubes(w, n, lattice, &opts);
    let nm = (lattice.m_max - lattice.m_min + 1) as usize;
    let mut per_m = vec![0.0f64; nm];
    let mut best = (0.0f64, lattice.m_min, vec![0i64; n]);
    for (m, k, meas) in &cubes {
        let v = per_cube(w, meas)?;
        let slot = (m - lattice.m_min) as usize;
        per_m[slot] = per_m[slot].max(v);
        if v > best.0 {
            best = (v, *m, k.clone());
        }
    }
    Ok((best.0, best.1, best.2, per_m))
}

fn a2_cube(w: &Weight, meas: &RadialMeasure) -> Result<f64> {
    let vol = meas.total();
    let mut sw = 0.0;
    let mut si = 0.0;
    for (&r, &q) in meas.radii.iter().zip(&meas.weights) {
        let v = w.eval(r, 0.0);
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::DivisionGuard(format!("weight is {v} at |x| = {r}")));
        }
        sw += q * v;
        si += q / v;
    }
    check_finite(sw / vol * (si / vol), "A2 product")
}

fn a1_cube(w: &Weight, meas: &RadialMeasure) -> Result<f64> {
    let vol = meas.total();
    let mut sw = 0.0;
    let mut min = f64::INFINITY;
    for (&r, &q) in meas.radii.iter().zip(&meas.weights) {
        let v = w.eval(r, 0.0);
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::DivisionGuard(format!("weight is {v} at |x| = {r}")));
        }
        sw += q * v;
        min = min.min(v);
    }
    check_finite(sw / vol / min, "A1 ratio")
}

/// sup over lattice cubes of (avg w)(avg w^{−1}) for a time slice.
pub fn a2_constant(w: &Weight, n: usize, lattice: &CubeLattice) -> Result<MuckenhouptReport> {
    let (c12, m, k, per_m) = muckenhoupt(w, n, lattice, Cubature::default().origin_depth, a2_cube)?;
    let (c8, ..) = muckenhoupt(w, n, lattice, 8, a2_cube)?;
    Ok(MuckenhouptReport {
        constant: c12,
        argmax: k,
        argmax_m: m,
        growth: growth_flag(&per_m),
        per_m,
        divergent: c12 > 1.1 * c8,
    })
}

/// sup over lattice cubes of avg_Q w / min_Q w, the A₁ constant for the
/// uncentred maximal function restricted to lattice cubes; the minimum runs
/// over the cube's quadrature nodes, so C_{A₂} ≤ C_{A₁} holds exactly on a
/// shared lattice.
pub fn a1_constant(w: &Weight, n: usize, lattice: &CubeLattice) -> Result<MuckenhouptReport> {
    let (c12, m, k, per_m) = muckenhoupt(w, n, lattice, Cubature::default().origin_depth, a1_cube)?;
    let (c8, ..) = muckenhoupt(w, n, lattice, 8, a1_cube)?;
    Ok(MuckenhouptReport {
        constant: c12,
        argmax: k,
        argmax_m: m,
        growth: growth_flag(&per_m),
        per_m,
        divergent: c12 > 1.1 * c8,
    })
}
