//! Radial grids and profiles, and the Fourier transform of radial functions
//! in Hankel form:
//!
//! ```text
//! f̂(ρ) = (2π)^{n/2} ρ^{−ν} ∫ J_ν(rρ) f(r) r^{n/2} dr,        ν = (n − 2)/2
//! f(r) = (2π)^{−n/2} r^{−ν} ∫ J_ν(rρ) f̂(ρ) ρ^{n/2} dρ
//! ```
//!
//! L² norms carry the unit-sphere area ω_{n−1} = 2π^{n/2}/Γ(n/2); norms in
//! frequency carry an extra (2π)^{−n}, so Plancherel reads ‖f̂‖ = ‖f‖.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::marker::PhantomData;

use ndarray::Array2;
use num_complex::Complex64;

use crate::quadrature::{composite, graded_breaks, GaussLegendre};
use crate::specfun::gamma;
use crate::{Error, Result};

pub const NODES_PER_PANEL: usize = 16;

/// Phase swept across one panel at reference resolution (3/4 of a period).
pub const REFERENCE_PANEL_PHASE: f64 = 1.5 * PI;

/// Largest phase change allowed per quadrature node.
pub const MAX_PHASE_PER_NODE: f64 = PI / 4.0;

/// Unit-sphere area ω_{n−1}.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0)
}

/// Composite quadrature on (0, r_max] with nodes off the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Panel boundaries; `breaks[0] >= 0`, `breaks.last() == r_max`.
    breaks: Vec<f64>,
    nodes_per_panel: usize,
}

impl RadialGrid {
    /// 16-point Gauss–Legendre panels over consecutive breakpoints.
    pub fn from_breaks(breaks: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::invalid("grid needs at least one panel"));
        }
        if breaks[0] < 0.0 || breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("grid breakpoints must be finite and >= 0"));
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid breakpoints must be strictly increasing"));
        }
        let (nodes, weights) = composite(&breaks, GaussLegendre::cached(NODES_PER_PANEL));
        Ok(Self {
            nodes,
            weights,
            breaks,
            nodes_per_panel: NODES_PER_PANEL,
        })
    }

    /// Panels of length ≤ `panel` on [0, r_max], split at `extra_breaks`, with
    /// the first panel refined geometrically toward r = 0 over `grading` levels.
    pub fn uniform(r_max: f64, panel: f64, grading: u32, extra_breaks: &[f64]) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) || !(panel > 0.0 && panel.is_finite()) {
            return Err(Error::invalid("grid needs positive r_max and panel length"));
        }
        let mut stops: Vec<f64> = extra_breaks
            .iter()
            .copied()
            .filter(|&b| b > 0.0 && b < r_max)
            .collect();
        stops.push(r_max);
        stops.sort_by(f64::total_cmp);
        stops.dedup();
        let mut breaks = vec![0.0];
        let mut lo = 0.0;
        for &hi in &stops {
            let count = ((hi - lo) / panel).ceil().max(1.0) as usize;
            for i in 1..=count {
                let b = if i == count {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / count as f64
                };
                breaks.push(b);
            }
            lo = hi;
        }
        let first = breaks[1];
        let mut graded = graded_breaks(0.0, first, grading);
        graded.extend_from_slice(&breaks[2..]);
        Self::from_breaks(graded)
    }

    /// Panels on [0, r_max] whose length adapts to a nondecreasing local phase
    /// speed, so that each panel sweeps `panel_phase` (the length solve
    /// overshoots by less than 0.1%). A remainder
    /// shorter than a quarter panel is merged into the last panel, which can
    /// then sweep up to 1.25 `panel_phase`.
    pub fn for_phase_speed<F: Fn(f64) -> f64>(
        r_max: f64,
        speed: F,
        panel_phase: f64,
        grading: u32,
    ) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) || !(panel_phase > 0.0) {
            return Err(Error::invalid("grid needs positive r_max and panel phase"));
        }
        let mut breaks = vec![0.0];
        let mut lo = 0.0f64;
        let mut guard = 0usize;
        while lo < r_max {
            let mut h = panel_phase / speed(lo).max(1e-300);
            for _ in 0..4 {
                let hi = (lo + h).min(r_max);
                h = panel_phase / speed(hi).max(1e-300);
            }
            let mut hi = (lo + h).min(r_max);
            if r_max - hi < 0.25 * h {
                hi = r_max;
            }
            breaks.push(hi);
            lo = hi;
            guard += 1;
            if guard > 1_000_000 {
                return Err(Error::resolution("phase speed requires more than 1e6 panels"));
            }
        }
        let first = breaks[1];
        let mut graded = graded_breaks(0.0, first, grading);
        graded.extend_from_slice(&breaks[2..]);
        Self::from_breaks(graded)
    }

    /// Arbitrary nodes and weights, e.g. from an imported file. The phase
    /// guard then applies to every node gap.
    pub fn from_nodes(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::invalid("nodes and weights must be nonempty and equal length"));
        }
        if nodes[0] <= 0.0 || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("nodes must be positive and strictly increasing"));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::invalid("weights must be positive"));
        }
        let r_max = nodes[nodes.len() - 1] + 0.5 * weights[weights.len() - 1];
        let mut breaks = vec![0.0];
        for w in nodes.windows(2) {
            breaks.push(0.5 * (w[0] + w[1]));
        }
        breaks.push(r_max);
        Ok(Self {
            nodes,
            weights,
            breaks,
            nodes_per_panel: 1,
        })
    }

    /// Grid dilated by `factor`; exact for powers of two.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            nodes: self.nodes.iter().map(|x| x * factor).collect(),
            weights: self.weights.iter().map(|x| x * factor).collect(),
            breaks: self.breaks.iter().map(|x| x * factor).collect(),
            nodes_per_panel: self.nodes_per_panel,
        }
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

    pub fn r_max(&self) -> f64 {
        self.breaks[self.breaks.len() - 1]
    }

    /// Largest phase per node for a nondecreasing phase speed.
    pub fn phase_per_node<F: Fn(f64) -> f64>(&self, speed: F) -> f64 {
        self.breaks
            .windows(2)
            .map(|w| (w[1] - w[0]) * speed(w[1]) / self.nodes_per_panel as f64)
            .fold(0.0, f64::max)
    }

    /// Resolution error when some node sweeps more than π/4 of phase.
    pub fn check_phase<F: Fn(f64) -> f64>(&self, what: &str, speed: F) -> Result<()> {
        let p = self.phase_per_node(speed);
        if p > MAX_PHASE_PER_NODE * (1.0 + 1e-12) {
            return Err(Error::resolution(format!(
                "{what}: phase {p:.3} rad per node exceeds pi/4"
            )));
        }
        Ok(())
    }

    /// Whether both grids carry the same nodes to within relative `tol`.
    pub fn same_nodes(&self, other: &RadialGrid, tol: f64) -> bool {
        self.len() == other.len()
            && self
                .nodes
                .iter()
                .zip(&other.nodes)
                .all(|(a, b)| (a - b).abs() <= tol * a.abs().max(b.abs()))
    }
}

/// Marker for profiles in the space variable r.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {}

/// Marker for profiles in the frequency variable ρ = |ξ|.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frequency {}

/// Values of a radial function at grid nodes; zero beyond the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile<D> {
    dim: usize,
    grid: RadialGrid,
    values: Vec<Complex64>,
    _domain: PhantomData<D>,
}

pub type RadialProfile = Profile<Space>;
pub type SpectralProfile = Profile<Frequency>;

impl<D> Profile<D> {
    pub fn new(dim: usize, grid: RadialGrid, values: Vec<Complex64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid(format!("dimension must be >= 2, got {dim}")));
        }
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::invalid("profile values must be finite"));
        }
        Ok(Self {
            dim,
            grid,
            values,
            _domain: PhantomData,
        })
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(dim: usize, grid: &RadialGrid, f: F) -> Result<Self> {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::new(dim, grid.clone(), values)
    }

    pub fn from_real_fn<F: Fn(f64) -> f64>(dim: usize, grid: &RadialGrid, f: F) -> Result<Self> {
        Self::from_fn(dim, grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn zeros(dim: usize, grid: &RadialGrid) -> Result<Self> {
        Self::new(dim, grid.clone(), vec![Complex64::new(0.0, 0.0); grid.len()])
    }

    pub(crate) fn from_parts_unchecked(dim: usize, grid: RadialGrid, values: Vec<Complex64>) -> Self {
        Self {
            dim,
            grid,
            values,
            _domain: PhantomData,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Pointwise map over (node, value).
    pub fn map<F: Fn(f64, Complex64) -> Complex64>(&self, f: F) -> Self {
        let values = self
            .grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(&x, &v)| f(x, v))
            .collect();
        Self::from_parts_unchecked(self.dim, self.grid.clone(), values)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|_, v| c * v)
    }

    /// αf + βg on a common grid.
    pub fn combine(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Result<Self> {
        if self.dim != other.dim || !self.grid.same_nodes(&other.grid, 0.0) {
            return Err(Error::invalid("profiles live on different grids"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Self::from_parts_unchecked(self.dim, self.grid.clone(), values))
    }

    /// ω_{n−1} Σ |v|² x^{n−1} w, the squared norm without frequency normalization.
    fn raw_norm_sqr(&self, power: f64) -> f64 {
        let n = self.dim as f64;
        let s: f64 = self
            .grid
            .nodes()
            .iter()
            .zip(self.grid.weights())
            .zip(&self.values)
            .map(|((&x, &w), v)| v.norm_sqr() * x.powf(n - 1.0 + power) * w)
            .sum();
        sphere_area(self.dim) * s
    }

    /// CSV with columns r, Re, Im.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "Re", "Im"])?;
        for (x, v) in self.grid.nodes().iter().zip(&self.values) {
            w.write_record([fmt_f64(*x), fmt_f64(v.re), fmt_f64(v.im)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`Profile::write_csv`]; nodes must match `grid`.
    pub fn read_csv<R: Read>(input: R, dim: usize, grid: &RadialGrid) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let mut values = Vec::with_capacity(grid.len());
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::Io(format!("row {i}: expected 3 columns")));
            }
            let parse = |k: usize| -> Result<f64> {
                rec[k]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Io(format!("row {i}: {e}")))
            };
            let x = parse(0)?;
            let node = *grid
                .nodes()
                .get(i)
                .ok_or_else(|| Error::invalid("more rows than grid nodes"))?;
            if (x - node).abs() > 1e-12 * node {
                return Err(Error::invalid(format!("row {i}: node {x} does not match grid node {node}")));
            }
            values.push(Complex64::new(parse(1)?, parse(2)?));
        }
        Self::new(dim, grid.clone(), values)
    }
}

/// Shortest round-trip formatting, stable across runs.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

impl RadialProfile {
    /// (ω_{n−1} Σ |f|² r^{n−1} w)^{1/2}.
    pub fn l2_norm(&self) -> f64 {
        self.raw_norm_sqr(0.0).sqrt()
    }
}

impl SpectralProfile {
    /// ((2π)^{−n} ω_{n−1} Σ ρ^{2s} |ĝ|² ρ^{n−1} w)^{1/2}.
    pub fn homogeneous_norm(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::invalid(format!("Sobolev index must be >= 0, got {s}")));
        }
        let c = (2.0 * PI).powi(-(self.dim as i32));
        Ok((c * self.raw_norm_sqr(2.0 * s)).sqrt())
    }

    pub fn l2_norm(&self) -> f64 {
        self.homogeneous_norm(0.0).unwrap_or(f64::NAN)
    }
}

pub fn l2_norm(f: &RadialProfile) -> f64 {
    f.l2_norm()
}

/// Precomputed transform between an r-grid and a ρ-grid.
#[derive(Debug, Clone)]
pub struct HankelPlan {
    dim: usize,
    r: RadialGrid,
    rho: RadialGrid,
    /// J_ν(r_i ρ_j), rows indexed by ρ.
    kernel: Array2<f64>,
    fwd_in: Vec<f64>,
    fwd_out: Vec<f64>,
    inv_in: Vec<f64>,
    inv_out: Vec<f64>,
}

impl HankelPlan {
    pub fn new(dim: usize, r: RadialGrid, rho: RadialGrid) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid(format!("dimension must be >= 2, got {dim}")));
        }
        let rho_max = rho.r_max();
        let r_max = r.r_max();
        r.check_phase("forward transform (r grid vs rho_max)", |_| rho_max)?;
        rho.check_phase("inverse transform (rho grid vs r_max)", |_| r_max)?;
        let nu = (dim as f64 - 2.0) / 2.0;
        let half_n = dim as f64 / 2.0;
        let rn = r.nodes().to_vec();
        let rows = crate::par::map(rho.len(), |j| {
            let p = rho.nodes()[j];
            rn.iter().map(|&x| crate::specfun::bessel_j_fast(nu, x * p)).collect::<Vec<f64>>()
        });
        let kernel = Array2::from_shape_vec((rho.len(), r.len()), rows.concat())
            .map_err(|e| Error::invalid(e.to_string()))?;
        let c = (2.0 * PI).powf(half_n);
        let fwd_in = r
            .nodes()
            .iter()
            .zip(r.weights())
            .map(|(&x, &w)| w * x.powf(half_n))
            .collect();
        let fwd_out = rho.nodes().iter().map(|&p| c * p.powf(-nu)).collect();
        let inv_in = rho
            .nodes()
            .iter()
            .zip(rho.weights())
            .map(|(&p, &w)| w * p.powf(half_n))
            .collect();
        let inv_out = r.nodes().iter().map(|&x| x.powf(-nu) / c).collect();
        Ok(Self {
            dim,
            r,
            rho,
            kernel,
            fwd_in,
            fwd_out,
            inv_in,
            inv_out,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r_grid(&self) -> &RadialGrid {
        &self.r
    }

    pub fn rho_grid(&self) -> &RadialGrid {
        &self.rho
    }

    /// Plan on grids dilated by `factor` in r (and 1/factor in ρ).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.dim, self.r.scaled(factor), self.rho.scaled(1.0 / factor))
    }

    fn check_input_grid<D>(&self, f: &Profile<D>, grid: &RadialGrid) -> Result<()> {
        if f.dim != self.dim {
            return Err(Error::invalid("profile dimension differs from plan"));
        }
        if !f.grid.same_nodes(grid, 0.0) {
            return Err(Error::invalid("profile grid differs from plan grid"));
        }
        Ok(())
    }

    pub fn forward(&self, f: &RadialProfile) -> Result<SpectralProfile> {
        self.check_input_grid(f, &self.r)?;
        let x: Vec<Complex64> = f.values.iter().zip(&self.fwd_in).map(|(v, s)| v * s).collect();
        let y = matvec(&self.kernel, &x, false);
        let values = y.iter().zip(&self.fwd_out).map(|(v, s)| v * s).collect();
        Ok(SpectralProfile::from_parts_unchecked(self.dim, self.rho.clone(), values))
    }

    pub fn inverse(&self, g: &SpectralProfile) -> Result<RadialProfile> {
        self.check_input_grid(g, &self.rho)?;
        let x: Vec<Complex64> = g.values.iter().zip(&self.inv_in).map(|(v, s)| v * s).collect();
        let y = matvec(&self.kernel, &x, true);
        let values = y.iter().zip(&self.inv_out).map(|(v, s)| v * s).collect();
        Ok(RadialProfile::from_parts_unchecked(self.dim, self.r.clone(), values))
    }

    /// Forward transform of many r-profiles at once. `columns` holds one
    /// profile per row (shape m × N_r); the result has shape m × N_ρ.
    pub(crate) fn forward_rows(&self, re: &Array2<f64>, im: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let scale_in = ndarray::Array1::from(self.fwd_in.clone());
        let scale_out = ndarray::Array1::from(self.fwd_out.clone());
        let a = re * &scale_in;
        let b = im * &scale_in;
        let kt = self.kernel.t();
        let mut yr = a.dot(&kt);
        let mut yi = b.dot(&kt);
        yr *= &scale_out;
        yi *= &scale_out;
        (yr, yi)
    }

    /// Inverse transform of many spectral profiles (rows, m × N_ρ) to m × N_r.
    pub(crate) fn inverse_rows(&self, re: &Array2<f64>, im: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let scale_in = ndarray::Array1::from(self.inv_in.clone());
        let scale_out = ndarray::Array1::from(self.inv_out.clone());
        let a = re * &scale_in;
        let b = im * &scale_in;
        let mut yr = a.dot(&self.kernel);
        let mut yi = b.dot(&self.kernel);
        yr *= &scale_out;
        yi *= &scale_out;
        (yr, yi)
    }
}

fn matvec(k: &Array2<f64>, x: &[Complex64], transpose: bool) -> Vec<Complex64> {
    let (rows, cols) = k.dim();
    if transpose {
        // y_i = Σ_j k[j][i] x_j
        let mut y = vec![Complex64::new(0.0, 0.0); cols];
        for (j, xj) in x.iter().enumerate() {
            let row = k.row(j);
            let row = row.as_slice().expect("kernel is row-major");
            for (yi, &kv) in y.iter_mut().zip(row) {
                *yi += xj * kv;
            }
        }
        y
    } else {
        crate::par::map(rows, |j| {
            let row = k.row(j);
            let row = row.as_slice().expect("kernel is row-major");
            let mut acc = Complex64::new(0.0, 0.0);
            for (kv, xi) in row.iter().zip(x) {
                acc += xi * kv;
            }
            acc
        })
    }
}

/// f̂ on `rho_grid`, building a one-off plan.
pub fn hankel_forward(f: &RadialProfile, rho_grid: &RadialGrid) -> Result<SpectralProfile> {
    HankelPlan::new(f.dim, f.grid.clone(), rho_grid.clone())?.forward(f)
}

/// Inverse transform onto `r_grid`, building a one-off plan.
pub fn hankel_inverse(g: &SpectralProfile, r_grid: &RadialGrid) -> Result<RadialProfile> {
    HankelPlan::new(g.dim, r_grid.clone(), g.grid.clone())?.inverse(g)
}

/// ‖f‖_{Ḣ^s} through the forward transform onto `rho_grid`.
pub fn sobolev_norm(f: &RadialProfile, s: f64, rho_grid: &RadialGrid) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("Sobolev index must be >= 0, got {s}")));
    }
    hankel_forward(f, rho_grid)?.homogeneous_norm(s)
}

/// ∫_{r_max}^{r_max + extent} g(r) r^{n−1} dr by 16-point panels of length ≤ 1/4;
/// used for the analytic tail of test families (`g = |f|²`).
pub fn tail_mass<F: Fn(f64) -> f64>(g: F, n: usize, r_max: f64, extent: f64) -> f64 {
    let panels = (extent / 0.25).ceil().max(1.0) as usize;
    let rule = GaussLegendre::cached(NODES_PER_PANEL);
    (0..panels)
        .map(|i| {
            let a = r_max + extent * i as f64 / panels as f64;
            let b = r_max + extent * (i + 1) as f64 / panels as f64;
            rule.integrate(a, b, |x| g(x) * x.powi(n as i32 - 1))
        })
        .sum()
}

/// Reference resolution grids for a profile band-limited to `rho_max` and
/// (numerically) supported in `r ≤ r_max`: r panels sweep the reference phase
/// at frequency `rho_max`, ρ panels at distance `r_max`.
pub fn reference_grids(r_max: f64, rho_max: f64, grading: u32) -> Result<(RadialGrid, RadialGrid)> {
    let r = RadialGrid::uniform(r_max, REFERENCE_PANEL_PHASE / rho_max, grading, &[])?;
    let rho = RadialGrid::uniform(rho_max, REFERENCE_PANEL_PHASE / r_max, 0, &[])?;
    Ok((r, rho))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn grid_weights_sum_to_length() {
        let g = RadialGrid::uniform(48.0, 0.7, 20, &[1.0]).unwrap();
        let s: f64 = g.weights().iter().sum();
        assert!((s / 48.0 - 1.0).abs() < 1e-12);
        assert!(g.nodes()[0] > 0.0);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        assert!(g.breaks().contains(&1.0));
    }

    #[test]
    fn bad_grids_rejected() {
        assert!(RadialGrid::from_breaks(vec![1.0]).is_err());
        assert!(RadialGrid::from_breaks(vec![0.0, 2.0, 1.0]).is_err());
        assert!(RadialGrid::from_nodes(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(RadialGrid::uniform(-1.0, 1.0, 0, &[]).is_err());
    }

    #[test]
    fn phase_guard() {
        let g = RadialGrid::uniform(10.0, 1.0, 0, &[]).unwrap();
        // 1 rad/unit over panels of length 1: 1/16 rad per node
        assert!(g.check_phase("t", |_| 1.0).is_ok());
        assert!(g.check_phase("t", |_| 20.0).is_err());
    }

    #[test]
    fn adaptive_panels_respect_speed() {
        let g = RadialGrid::for_phase_speed(6.0, |x| 10.0 + 8.0 * x, REFERENCE_PANEL_PHASE, 0).unwrap();
        let speed = |x: f64| 10.0 + 8.0 * x;
        let b = g.breaks();
        let sweep: Vec<f64> = b.windows(2).map(|w| (w[1] - w[0]) * speed(w[1])).collect();
        let (last, rest) = sweep.split_last().unwrap();
        assert!(rest.iter().all(|&p| p <= REFERENCE_PANEL_PHASE * 1.001), "{rest:?}");
        assert!(*last <= 1.25 * REFERENCE_PANEL_PHASE * 1.001, "{last}");
        assert!(g.phase_per_node(speed) <= 1.25 * REFERENCE_PANEL_PHASE / 16.0 * 1.001);
    }

    #[test]
    fn profile_validation() {
        let g = RadialGrid::uniform(1.0, 1.0, 0, &[]).unwrap();
        assert!(RadialProfile::new(1, g.clone(), vec![Complex64::new(0.0, 0.0); 16]).is_err());
        assert!(RadialProfile::new(3, g.clone(), vec![Complex64::new(0.0, 0.0); 3]).is_err());
        let mut v = vec![Complex64::new(0.0, 0.0); 16];
        v[2].re = f64::NAN;
        assert!(RadialProfile::new(3, g, v).is_err());
    }
}
