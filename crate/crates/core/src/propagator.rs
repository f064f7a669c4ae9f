//! Dyadic frequency projections, the evolution `e^{it(−Δ)^{a/2}}` and the
//! Duhamel integral for `i∂_t u + (−Δ)^{a/2} u = F`:
//!
//! ```text
//! u(t) = e^{itL} u0 − i ∫_0^t e^{i(t−s)L} F(s) ds,        L = (−Δ)^{a/2}
//! ```
//!
//! Time integrals are taken in the interaction picture `e^{−isρ^a} F̂(s, ρ)`,
//! which removes the free oscillation from the integrand, with a spectral
//! cumulative Gauss–Legendre rule on every time panel.

use std::io::{Read, Write};

use ndarray::Array2;
use num_complex::Complex64;

use crate::quadrature::{composite, graded_breaks, CumulativeRule, GaussLegendre};
use crate::radial::{
    fmt_f64, HankelPlan, RadialGrid, RadialProfile, SpectralProfile, MAX_PHASE_PER_NODE,
    REFERENCE_PANEL_PHASE,
};
use crate::{Error, Result};

/// The smooth dyadic cutoff φ.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DyadicCutoff;

impl DyadicCutoff {
    /// Recorded in run metadata (hashed) so results can be tied to the cutoff.
    pub const DEFINITION: &'static str =
        "psi(t) = exp(-1/(t-1/2) - 1/(2-t)) on (1/2, 2), 0 elsewhere; phi(t) = psi(t) / sum_k psi(2^-k t)";

    pub fn psi(t: f64) -> f64 {
        if t > 0.5 && t < 2.0 {
            (-1.0 / (t - 0.5) - 1.0 / (2.0 - t)).exp()
        } else {
            0.0
        }
    }

    /// φ(t); the normalising sum has at most two nonzero terms.
    pub fn phi(t: f64) -> f64 {
        let p = Self::psi(t);
        if p == 0.0 {
            return 0.0;
        }
        let k0 = t.log2().floor() as i32;
        let mut total = 0.0;
        for k in (k0 - 1)..=(k0 + 1) {
            total += Self::psi(t * 2f64.powi(-k));
        }
        p / total
    }

    /// Σ_k φ(2^{−k} t); equal to 1 for t > 0.
    pub fn partition_sum(t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let k0 = t.log2().floor() as i32;
        ((k0 - 2)..=(k0 + 2)).map(|k| Self::phi(t * 2f64.powi(-k))).sum()
    }
}

/// Composite Gauss–Legendre rule in time. Panels meeting at t = 0 are refined
/// geometrically toward 0, so `|t|^{−β}` weights are never sampled at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    breaks: Vec<f64>,
}

pub const TIME_NODES_PER_PANEL: usize = 16;

impl TimeGrid {
    pub fn from_breaks(breaks: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 || breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("time grid needs finite breakpoints"));
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("time breakpoints must be strictly increasing"));
        }
        let (nodes, weights) = composite(&breaks, GaussLegendre::cached(TIME_NODES_PER_PANEL));
        Ok(Self {
            nodes,
            weights,
            breaks,
        })
    }

    fn half_breaks(t_max: f64, panel: f64, grading: u32) -> Result<Vec<f64>> {
        if !(t_max > 0.0 && t_max.is_finite() && panel > 0.0 && panel.is_finite()) {
            return Err(Error::invalid("time grid needs positive t_max and panel"));
        }
        let count = (t_max / panel).ceil().max(1.0) as usize;
        let h = t_max / count as f64;
        let mut b = graded_breaks(0.0, h, grading);
        for i in 2..=count {
            b.push(if i == count { t_max } else { h * i as f64 });
        }
        Ok(b)
    }

    /// [−t_max, t_max] with panel length ≤ `panel`.
    pub fn symmetric(t_max: f64, panel: f64, grading: u32) -> Result<Self> {
        let half = Self::half_breaks(t_max, panel, grading)?;
        let mut breaks: Vec<f64> = half.iter().rev().map(|x| -x).collect();
        breaks.pop();
        breaks.extend_from_slice(&half);
        Self::from_breaks(breaks)
    }

    /// [0, t_max].
    pub fn forward(t_max: f64, panel: f64, grading: u32) -> Result<Self> {
        Self::from_breaks(Self::half_breaks(t_max, panel, grading)?)
    }

    /// Symmetric grid at reference resolution for oscillation frequency `omega`.
    pub fn for_frequency(t_max: f64, omega: f64, grading: u32) -> Result<Self> {
        Self::symmetric(t_max, REFERENCE_PANEL_PHASE / omega.max(1e-12), grading)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            nodes: self.nodes.iter().map(|x| x * factor).collect(),
            weights: self.weights.iter().map(|x| x * factor).collect(),
            breaks: self.breaks.iter().map(|x| x * factor).collect(),
        }
    }

    /// Same breakpoints with every panel split in two.
    pub fn refined(&self) -> Self {
        let mut b = Vec::with_capacity(2 * self.breaks.len());
        for w in self.breaks.windows(2) {
            b.push(w[0]);
            b.push(0.5 * (w[0] + w[1]));
        }
        b.push(self.breaks[self.breaks.len() - 1]);
        Self::from_breaks(b).expect("refinement keeps breakpoints valid")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn t_min(&self) -> f64 {
        self.breaks[0]
    }

    pub fn t_max(&self) -> f64 {
        self.breaks[self.breaks.len() - 1]
    }

    pub fn max_abs_t(&self) -> f64 {
        self.t_min().abs().max(self.t_max().abs())
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.breaks.len();
        (0..n).all(|i| self.breaks[i] == -self.breaks[n - 1 - i])
    }

    /// Resolution error when a node sweeps more than π/4 at frequency `omega`.
    pub fn check_frequency(&self, what: &str, omega: f64) -> Result<()> {
        let worst = self
            .breaks
            .windows(2)
            .map(|w| (w[1] - w[0]) * omega / TIME_NODES_PER_PANEL as f64)
            .fold(0.0, f64::max);
        if worst > MAX_PHASE_PER_NODE * (1.0 + 1e-12) {
            return Err(Error::resolution(format!(
                "{what}: time phase {worst:.3} rad per node exceeds pi/4"
            )));
        }
        Ok(())
    }

    fn zero_break(&self) -> Result<usize> {
        self.breaks
            .iter()
            .position(|&b| b == 0.0)
            .ok_or_else(|| Error::invalid("time grid must have t = 0 as a panel boundary"))
    }
}

/// Radial-in-space, time-dependent field; `values[ti * N_r + ri]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    dim: usize,
    rgrid: RadialGrid,
    tgrid: TimeGrid,
    values: Vec<Complex64>,
}

impl SpaceTimeField {
    pub fn new(dim: usize, rgrid: RadialGrid, tgrid: TimeGrid, values: Vec<Complex64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("dimension must be >= 2"));
        }
        if values.len() != rgrid.len() * tgrid.len() {
            return Err(Error::invalid("field size differs from grid sizes"));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::invalid("field values must be finite"));
        }
        Ok(Self {
            dim,
            rgrid,
            tgrid,
            values,
        })
    }

    pub fn zeros(dim: usize, rgrid: &RadialGrid, tgrid: &TimeGrid) -> Result<Self> {
        Self::new(
            dim,
            rgrid.clone(),
            tgrid.clone(),
            vec![Complex64::new(0.0, 0.0); rgrid.len() * tgrid.len()],
        )
    }

    pub fn from_fn<F: Fn(f64, f64) -> Complex64>(
        dim: usize,
        rgrid: &RadialGrid,
        tgrid: &TimeGrid,
        f: F,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(rgrid.len() * tgrid.len());
        for &t in tgrid.nodes() {
            for &r in rgrid.nodes() {
                values.push(f(r, t));
            }
        }
        Self::new(dim, rgrid.clone(), tgrid.clone(), values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rgrid(&self) -> &RadialGrid {
        &self.rgrid
    }

    pub fn tgrid(&self) -> &TimeGrid {
        &self.tgrid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, ti: usize, ri: usize) -> Complex64 {
        self.values[ti * self.rgrid.len() + ri]
    }

    pub fn slice(&self, ti: usize) -> &[Complex64] {
        let n = self.rgrid.len();
        &self.values[ti * n..(ti + 1) * n]
    }

    pub fn profile_at(&self, ti: usize) -> RadialProfile {
        RadialProfile::from_parts_unchecked(self.dim, self.rgrid.clone(), self.slice(ti).to_vec())
    }

    pub fn map<F: Fn(f64, f64, Complex64) -> Complex64>(&self, f: F) -> Self {
        let nr = self.rgrid.len();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(self.rgrid.nodes()[i % nr], self.tgrid.nodes()[i / nr], v))
            .collect();
        Self {
            dim: self.dim,
            rgrid: self.rgrid.clone(),
            tgrid: self.tgrid.clone(),
            values,
        }
    }

    pub fn combine(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Result<Self> {
        self.check_same_grids(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Self {
            dim: self.dim,
            rgrid: self.rgrid.clone(),
            tgrid: self.tgrid.clone(),
            values,
        })
    }

    pub fn check_same_grids(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim
            || !self.rgrid.same_nodes(&other.rgrid, 0.0)
            || self.tgrid.nodes() != other.tgrid.nodes()
        {
            return Err(Error::invalid("fields live on different grids"));
        }
        Ok(())
    }

    /// ‖u(t_i)‖_{L²_x} for every time node.
    pub fn l2_in_space(&self) -> Vec<f64> {
        (0..self.tgrid.len()).map(|ti| self.profile_at(ti).l2_norm()).collect()
    }

    /// max over time nodes of ‖u(t)‖_{L²_x}.
    pub fn sup_l2(&self) -> f64 {
        self.l2_in_space().into_iter().fold(0.0, f64::max)
    }

    /// (ω_{n−1} Σ_t Σ_r |u|² w(r,t) r^{n−1} wt_r wt_t)^{1/2}.
    pub fn weighted_norm<W: Fn(f64, f64) -> f64>(&self, w: W) -> f64 {
        let n = self.dim as f64;
        let nr = self.rgrid.len();
        let rfac: Vec<f64> = self
            .rgrid
            .nodes()
            .iter()
            .zip(self.rgrid.weights())
            .map(|(&r, &wr)| r.powf(n - 1.0) * wr)
            .collect();
        let mut total = 0.0;
        for (ti, (&t, &wt)) in self.tgrid.nodes().iter().zip(self.tgrid.weights()).enumerate() {
            let row = &self.values[ti * nr..(ti + 1) * nr];
            let mut s = 0.0;
            for (ri, v) in row.iter().enumerate() {
                let r = self.rgrid.nodes()[ri];
                s += v.norm_sqr() * w(r, t) * rfac[ri];
            }
            total += s * wt;
        }
        (crate::radial::sphere_area(self.dim) * total).sqrt()
    }

    /// CSV with columns r, t, Re, Im (time-major).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "t", "Re", "Im"])?;
        let nr = self.rgrid.len();
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([
                fmt_f64(self.rgrid.nodes()[i % nr]),
                fmt_f64(self.tgrid.nodes()[i / nr]),
                fmt_f64(v.re),
                fmt_f64(v.im),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`SpaceTimeField::write_csv`] on known grids.
    pub fn read_csv<R: Read>(input: R, dim: usize, rgrid: &RadialGrid, tgrid: &TimeGrid) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let nr = rgrid.len();
        let mut values = Vec::with_capacity(nr * tgrid.len());
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(Error::Io(format!("row {i}: expected 4 columns")));
            }
            let parse = |k: usize| -> Result<f64> {
                rec[k]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Io(format!("row {i}: {e}")))
            };
            let (ri, ti) = (i % nr, i / nr);
            if ti >= tgrid.len() {
                return Err(Error::invalid("more rows than grid nodes"));
            }
            let (r, t) = (parse(0)?, parse(1)?);
            let (rn, tn) = (rgrid.nodes()[ri], tgrid.nodes()[ti]);
            if (r - rn).abs() > 1e-12 * rn || (t - tn).abs() > 1e-12 * tn.abs().max(1e-300) {
                return Err(Error::invalid(format!("row {i}: node ({r}, {t}) does not match grid")));
            }
            values.push(Complex64::new(parse(2)?, parse(3)?));
        }
        Self::new(dim, rgrid.clone(), tgrid.clone(), values)
    }

    fn split(&self) -> (Array2<f64>, Array2<f64>) {
        let shape = (self.tgrid.len(), self.rgrid.len());
        let re = Array2::from_shape_vec(shape, self.values.iter().map(|v| v.re).collect()).expect("shape");
        let im = Array2::from_shape_vec(shape, self.values.iter().map(|v| v.im).collect()).expect("shape");
        (re, im)
    }
}

fn join(re: Array2<f64>, im: Array2<f64>) -> Vec<Complex64> {
    re.iter().zip(im.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect()
}

fn check_order(a: f64) -> Result<()> {
    if !(a > 1.0 && a.is_finite()) {
        return Err(Error::hypothesis(format!("dispersion order a must exceed 1, got {a}")));
    }
    Ok(())
}

/// Phase speed of the inverse transform integrand at time t: r_max + |t| a ρ^{a−1}.
fn check_inverse_phase(plan: &HankelPlan, t_abs: f64, a: f64) -> Result<()> {
    let r_max = plan.r_grid().r_max();
    plan.rho_grid()
        .check_phase("evolution (rho grid vs |t| a rho^(a-1))", |p| r_max + t_abs * a * p.powf(a - 1.0))
}

/// Grids for evolving data band-limited to `rho_max` and supported in
/// `r ≤ r_max` up to time `|t| ≤ t_max`: the ρ panels shrink with the phase
/// speed `r_max + t_max a ρ^{a−1}` of the inverse transform.
pub fn evolution_grids(
    r_max: f64,
    rho_max: f64,
    t_max: f64,
    a: f64,
    grading: u32,
) -> Result<(RadialGrid, RadialGrid)> {
    check_order(a)?;
    let r = RadialGrid::uniform(r_max, REFERENCE_PANEL_PHASE / rho_max, grading, &[])?;
    let t = t_max.abs();
    let rho = RadialGrid::for_phase_speed(
        rho_max,
        |p| r_max + t * a * p.powf(a - 1.0),
        REFERENCE_PANEL_PHASE,
        0,
    )?;
    Ok((r, rho))
}

/// φ(2^{−k}ρ) ĝ(ρ).
pub fn project_spectral(g: &SpectralProfile, k: i32) -> SpectralProfile {
    let s = 2f64.powi(-k);
    g.map(|p, v| v * DyadicCutoff::phi(p * s))
}

/// P_k f; the ρ-grid must cover [2^{k−1}, 2^{k+1}].
pub fn project(plan: &HankelPlan, f: &RadialProfile, k: i32) -> Result<RadialProfile> {
    let rho_max = plan.rho_grid().r_max();
    if rho_max < 2f64.powi(k + 1) {
        return Err(Error::resolution(format!(
            "spectral grid ends at {rho_max}, projection {k} needs {}",
            2f64.powi(k + 1)
        )));
    }
    plan.inverse(&project_spectral(&plan.forward(f)?, k))
}

/// e^{itρ^a} ĝ(ρ).
pub fn evolve_spectral(g: &SpectralProfile, t: f64, a: f64) -> SpectralProfile {
    g.map(|p, v| v * Complex64::from_polar(1.0, t * p.powf(a)))
}

/// e^{it(−Δ)^{a/2}} f.
pub fn evolve(plan: &HankelPlan, f: &RadialProfile, t: f64, a: f64) -> Result<RadialProfile> {
    check_order(a)?;
    crate::error::ensure_finite("t", t)?;
    check_inverse_phase(plan, t.abs(), a)?;
    plan.inverse(&evolve_spectral(&plan.forward(f)?, t, a))
}

/// ρ^a ĝ(ρ).
pub fn fractional_laplacian_spectral(g: &SpectralProfile, a: f64) -> SpectralProfile {
    g.map(|p, v| v * p.powf(a))
}

/// (−Δ)^{a/2} f.
pub fn fractional_laplacian(plan: &HankelPlan, f: &RadialProfile, a: f64) -> Result<RadialProfile> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("order must be >= 0, got {a}")));
    }
    plan.inverse(&fractional_laplacian_spectral(&plan.forward(f)?, a))
}

/// The free evolution of a spectral profile sampled on a time grid.
pub fn evolve_field_spectral(
    plan: &HankelPlan,
    g: &SpectralProfile,
    a: f64,
    tgrid: &TimeGrid,
) -> Result<SpaceTimeField> {
    check_order(a)?;
    check_inverse_phase(plan, tgrid.max_abs_t(), a)?;
    if !g.grid().same_nodes(plan.rho_grid(), 0.0) {
        return Err(Error::invalid("spectral profile is not on the plan's rho grid"));
    }
    let nt = tgrid.len();
    let nrho = plan.rho_grid().len();
    let mut re = Array2::<f64>::zeros((nt, nrho));
    let mut im = Array2::<f64>::zeros((nt, nrho));
    let pa: Vec<f64> = plan.rho_grid().nodes().iter().map(|p| p.powf(a)).collect();
    for (ti, &t) in tgrid.nodes().iter().enumerate() {
        for j in 0..nrho {
            let v = g.values()[j] * Complex64::from_polar(1.0, t * pa[j]);
            re[[ti, j]] = v.re;
            im[[ti, j]] = v.im;
        }
    }
    let (ur, ui) = plan.inverse_rows(&re, &im);
    SpaceTimeField::new(plan.dim(), plan.r_grid().clone(), tgrid.clone(), join(ur, ui))
}

/// u(t) = e^{itL} f on every node of `tgrid`.
pub fn evolve_field(plan: &HankelPlan, f: &RadialProfile, a: f64, tgrid: &TimeGrid) -> Result<SpaceTimeField> {
    evolve_field_spectral(plan, &plan.forward(f)?, a, tgrid)
}

/// Default relative tolerance of the Duhamel time-quadrature self-estimate.
pub const DUHAMEL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuhamelReport {
    /// Σ over panels and frequencies of the trailing Legendre coefficients,
    /// relative to the integrand's L¹ size.
    pub relative_error_estimate: f64,
}

/// Panel index and local coordinate in [-1, 1] of every output time.
fn locate(tgrid: &TimeGrid, out: &[f64]) -> Result<Vec<(usize, f64)>> {
    let b = tgrid.breaks();
    let tol = 1e-12 * tgrid.max_abs_t();
    out.iter()
        .map(|&t| {
            if t < b[0] - tol || t > b[b.len() - 1] + tol {
                return Err(Error::invalid(format!("output time {t} outside the forcing's time grid")));
            }
            let p = b.partition_point(|&x| x <= t).clamp(1, b.len() - 1) - 1;
            let x = (2.0 * (t - b[p]) / (b[p + 1] - b[p]) - 1.0).clamp(-1.0, 1.0);
            Ok((p, x))
        })
        .collect()
}

/// ∫_0^{t} F̂(s) e^{−isρ^a} ds at every output time (rows) and ρ (columns),
/// integrating the per-panel Legendre interpolant. Also returns the sum of
/// trailing Legendre coefficients relative to the integrand's L¹ size.
fn cumulative_interaction(
    fre: &Array2<f64>,
    fim: &Array2<f64>,
    pa: &[f64],
    tgrid: &TimeGrid,
    out: &[f64],
) -> Result<(Array2<f64>, Array2<f64>, f64)> {
    let zero = tgrid.zero_break()?;
    let gl = GaussLegendre::cached(TIME_NODES_PER_PANEL);
    let rule = CumulativeRule::new(gl);
    let q = TIME_NODES_PER_PANEL;
    let nrho = fre.dim().1;
    let breaks = tgrid.breaks();
    let npanels = breaks.len() - 1;
    let located = locate(tgrid, out)?;
    let rows: Vec<Vec<f64>> = located.iter().map(|&(_, x)| rule.row_at(x)).collect();
    let columns = crate::par::map(nrho, |j| {
        let mut g = vec![Complex64::new(0.0, 0.0); npanels * q];
        let mut totals = vec![Complex64::new(0.0, 0.0); npanels];
        let (mut err, mut size) = (0.0, 0.0);
        for p in 0..npanels {
            let h2 = 0.5 * (breaks[p + 1] - breaks[p]);
            let gp = &mut g[p * q..(p + 1) * q];
            for (i, gi) in gp.iter_mut().enumerate() {
                let ti = p * q + i;
                let t = tgrid.nodes()[ti];
                *gi = Complex64::new(fre[[ti, j]], fim[[ti, j]]) * Complex64::from_polar(1.0, -t * pa[j]);
            }
            let mut total = Complex64::new(0.0, 0.0);
            for (gi, &w) in gp.iter().zip(gl.weights()) {
                total += gi * w;
                size += gi.norm() * w * h2;
            }
            totals[p] = total * h2;
            let tail = rule.legendre_coefficient(q - 1, gp).norm() + rule.legendre_coefficient(q - 2, gp).norm();
            err += tail * 2.0 * h2;
        }
        // ∫_0^{b_p} for every break
        let mut at_break = vec![Complex64::new(0.0, 0.0); npanels + 1];
        for p in zero..npanels {
            at_break[p + 1] = at_break[p] + totals[p];
        }
        for p in (0..zero).rev() {
            at_break[p] = at_break[p + 1] - totals[p];
        }
        let col: Vec<Complex64> = located
            .iter()
            .zip(&rows)
            .map(|(&(p, _), row)| {
                let h2 = 0.5 * (breaks[p + 1] - breaks[p]);
                let gp = &g[p * q..(p + 1) * q];
                let s: Complex64 = gp.iter().zip(row).map(|(gk, &w)| gk * w).sum();
                at_break[p] + s * h2
            })
            .collect();
        (col, err, size)
    });
    let mut cre = Array2::<f64>::zeros((out.len(), nrho));
    let mut cim = Array2::<f64>::zeros((out.len(), nrho));
    let (mut err, mut size) = (0.0, 0.0);
    for (j, (col, e, s)) in columns.into_iter().enumerate() {
        err += e;
        size += s;
        for (ti, v) in col.into_iter().enumerate() {
            cre[[ti, j]] = v.re;
            cim[[ti, j]] = v.im;
        }
    }
    let rel = if size > 0.0 { err / size } else { 0.0 };
    Ok((cre, cim, rel))
}

/// Duhamel solution on `F`'s own time grid, tolerance [`DUHAMEL_TOLERANCE`].
pub fn duhamel(
    plan: &HankelPlan,
    u0: &RadialProfile,
    forcing: &SpaceTimeField,
    a: f64,
) -> Result<(SpaceTimeField, DuhamelReport)> {
    duhamel_on(plan, u0, forcing, a, forcing.tgrid(), DUHAMEL_TOLERANCE)
}

/// Duhamel solution at the nodes of `out`, which must lie in the span of
/// `F`'s time grid.
pub fn duhamel_on(
    plan: &HankelPlan,
    u0: &RadialProfile,
    forcing: &SpaceTimeField,
    a: f64,
    out: &TimeGrid,
    tolerance: f64,
) -> Result<(SpaceTimeField, DuhamelReport)> {
    check_order(a)?;
    check_inverse_phase(plan, out.max_abs_t(), a)?;
    forcing
        .tgrid()
        .check_frequency("duhamel (time grid vs rho_max^a)", plan.rho_grid().r_max().powf(a))?;
    if !forcing.rgrid().same_nodes(plan.r_grid(), 0.0) || forcing.dim() != plan.dim() {
        return Err(Error::invalid("forcing is not on the plan's r grid"));
    }
    let u0_hat = plan.forward(u0)?;
    let pa: Vec<f64> = plan.rho_grid().nodes().iter().map(|p| p.powf(a)).collect();
    let (fr, fi) = forcing.split();
    let (hr, hi) = plan.forward_rows(&fr, &fi);
    let (cre, cim, rel) = cumulative_interaction(&hr, &hi, &pa, forcing.tgrid(), out.nodes())?;
    if rel > tolerance {
        return Err(Error::TimeResolution(format!(
            "Duhamel time quadrature self-estimate {rel:.2e} exceeds {tolerance:.1e}"
        )));
    }
    let (nt, nrho) = cre.dim();
    let mut re = Array2::<f64>::zeros((nt, nrho));
    let mut im = Array2::<f64>::zeros((nt, nrho));
    let minus_i = Complex64::new(0.0, -1.0);
    for (ti, &t) in out.nodes().iter().enumerate() {
        for j in 0..nrho {
            let c = Complex64::new(cre[[ti, j]], cim[[ti, j]]);
            let v = Complex64::from_polar(1.0, t * pa[j]) * (u0_hat.values()[j] + minus_i * c);
            re[[ti, j]] = v.re;
            im[[ti, j]] = v.im;
        }
    }
    let (ur, ui) = plan.inverse_rows(&re, &im);
    let field = SpaceTimeField::new(plan.dim(), plan.r_grid().clone(), out.clone(), join(ur, ui))?;
    Ok((
        field,
        DuhamelReport {
            relative_error_estimate: rel,
        },
    ))
}

/// ∫ e^{−isL} F(s) ds over the whole time grid, as a spectral profile.
pub fn backward_integral(plan: &HankelPlan, forcing: &SpaceTimeField, a: f64) -> Result<SpectralProfile> {
    check_order(a)?;
    let (fr, fi) = forcing.split();
    let (hr, hi) = plan.forward_rows(&fr, &fi);
    let tgrid = forcing.tgrid();
    let nrho = plan.rho_grid().len();
    let mut out = vec![Complex64::new(0.0, 0.0); nrho];
    for (j, o) in out.iter_mut().enumerate() {
        let pa = plan.rho_grid().nodes()[j].powf(a);
        for (ti, (&t, &w)) in tgrid.nodes().iter().zip(tgrid.weights()).enumerate() {
            *o += Complex64::new(hr[[ti, j]], hi[[ti, j]]) * Complex64::from_polar(w, -t * pa);
        }
    }
    SpectralProfile::new(plan.dim(), plan.rho_grid().clone(), out)
}

/// Multiplies a field pointwise by a real function of (r, t).
pub fn multiply(field: &SpaceTimeField, v: impl Fn(f64, f64) -> Complex64) -> SpaceTimeField {
    field.map(|r, t, u| v(r, t) * u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_support() {
        assert_eq!(DyadicCutoff::psi(0.5), 0.0);
        assert_eq!(DyadicCutoff::psi(2.0), 0.0);
        assert!(DyadicCutoff::psi(1.0) > 0.0);
        assert_eq!(DyadicCutoff::phi(0.4), 0.0);
        assert_eq!(DyadicCutoff::phi(2.1), 0.0);
    }

    #[test]
    fn time_grid_symmetry() {
        let g = TimeGrid::symmetric(4.0, 0.5, 6).unwrap();
        assert!(g.is_symmetric());
        assert!(g.nodes().iter().all(|&t| t != 0.0));
        let s: f64 = g.weights().iter().sum();
        assert!((s - 8.0).abs() < 1e-12);
        assert!(g.breaks().contains(&0.0));
    }

    #[test]
    fn time_guard() {
        let g = TimeGrid::symmetric(4.0, 0.5, 0).unwrap();
        assert!(g.check_frequency("x", 10.0).is_ok());
        assert!(g.check_frequency("x", 100.0).is_err());
    }
}
