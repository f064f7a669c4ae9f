//! Oscillatory integrals over the unit dyadic band ρ ∈ [1/2, 2]:
//!
//! ```text
//! I(R, t)          = ∫ e^{±iRρ + itρ^a} Φ(ρ) dρ
//! K_jk(r, λ, t)    = χ_{I_k}(r) r^{−ν} χ_{I_j}(λ) λ^{−ν} ∫ e^{itρ^a} J_ν(rρ) J_ν(λρ) ρ φ(ρ)² dρ
//! T_k h(r, t)      = χ_{I_k}(r) r^{−ν} ∫ e^{itρ^a} J_ν(rρ) φ(ρ) h(ρ) dρ
//! ```
//!
//! with ν = (n − 2)/2, I_0 = (0, 1) and I_m = [2^{m−1}, 2^m).
//!
//! All integrals use uniform 16-point Gauss–Legendre panels over the band,
//! sized from the largest phase speed. Sup-norm scans evaluate many times at
//! once as matrix products and re-check the maximizer at doubled density.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::fit::FitReport;
use crate::propagator::{DyadicCutoff, SpaceTimeField, TimeGrid};
use crate::quadrature::{composite, GaussLegendre};
use crate::radial::{sphere_area, RadialGrid, REFERENCE_PANEL_PHASE};
use crate::specfun::bessel_j_fast;
use crate::{Error, Result};

pub const BAND: (f64, f64) = (0.5, 2.0);

/// Panels always used across the band; resolves the steep flanks of φ.
pub const MIN_PANELS: usize = 32;

pub const MAX_PANELS: usize = 1 << 20;

/// Relative change allowed when the panel density doubles.
pub const SELF_CONVERGENCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Real amplitude supported in the band.
#[derive(Clone)]
pub struct Amplitude {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Amplitude {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Amplitude({})", self.name)
    }
}

impl Amplitude {
    /// Fails unless Φ vanishes (to 1e-12 of its peak) at both band ends.
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let name = name.into();
        let peak = (0..=256)
            .map(|i| f(BAND.0 + (BAND.1 - BAND.0) * i as f64 / 256.0).abs())
            .fold(0.0, f64::max);
        if !peak.is_finite() {
            return Err(Error::invalid(format!("amplitude {name} is not finite on the band")));
        }
        let edge = f(BAND.0).abs().max(f(BAND.1).abs());
        if edge > 1e-12 * peak {
            return Err(Error::invalid(format!("amplitude {name} does not vanish at the band ends")));
        }
        Ok(Self { name, f: Arc::new(f) })
    }

    pub fn phi_squared() -> Self {
        Self {
            name: "phi^2".into(),
            f: Arc::new(|x| DyadicCutoff::phi(x).powi(2)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= BAND.0 || x >= BAND.1 {
            0.0
        } else {
            (self.f)(x)
        }
    }
}

#[derive(Debug, Clone)]
pub struct OscIntegrand {
    pub amplitude: Amplitude,
    pub r: f64,
    pub t: f64,
    pub a: f64,
    pub sign: Sign,
}

fn check_a(a: f64) -> Result<()> {
    if !(a > 1.0 && a.is_finite()) {
        return Err(Error::hypothesis(format!("oscillatory estimate needs a > 1, got {a}")));
    }
    Ok(())
}

/// Largest |d/dρ (ωρ + tρ^a)| over the band.
fn band_speed(omega: f64, t: f64, a: f64) -> f64 {
    omega.abs() + a * 2f64.powf(a - 1.0) * t.abs()
}

/// Uniform panels over the band, each sweeping at most the reference phase
/// at `speed`, times `density`.
fn band_nodes(speed: f64, density: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let len = BAND.1 - BAND.0;
    let base = (len * speed / REFERENCE_PANEL_PHASE).ceil().max(MIN_PANELS as f64);
    let panels = base * density;
    if !panels.is_finite() || panels > MAX_PANELS as f64 {
        return Err(Error::resolution(format!(
            "phase speed {speed:.3e} needs {panels:.3e} panels (budget {MAX_PANELS})"
        )));
    }
    let panels = panels.ceil() as usize;
    let breaks: Vec<f64> = (0..=panels).map(|i| BAND.0 + len * i as f64 / panels as f64).collect();
    Ok(composite(&breaks, GaussLegendre::cached(16)))
}

fn converged(coarse: Complex64, fine: Complex64, scale: f64) -> bool {
    (fine - coarse).norm() <= SELF_CONVERGENCE_TOLERANCE * fine.norm() + 1e-13 * scale
}

fn osc_sum(g: &OscIntegrand, density: f64) -> Result<(Complex64, f64)> {
    let (x, w) = band_nodes(band_speed(g.r, g.t, g.a), density)?;
    let s = g.sign.value();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut l1 = 0.0;
    for (&p, &wq) in x.iter().zip(&w) {
        let v = wq * g.amplitude.eval(p);
        let (sn, cs) = (s * g.r * p + g.t * p.powf(g.a)).sin_cos();
        acc += Complex64::new(v * cs, v * sn);
        l1 += v.abs();
    }
    Ok((acc, l1))
}

/// ∫ e^{±iRρ + itρ^a} Φ(ρ) dρ, checked against a rerun at doubled panel density.
pub fn osc_integral(g: &OscIntegrand) -> Result<Complex64> {
    check_a(g.a)?;
    if !(g.r.is_finite() && g.t.is_finite()) {
        return Err(Error::invalid("R and t must be finite"));
    }
    let (coarse, _) = osc_sum(g, 1.0)?;
    let (fine, l1) = osc_sum(g, 2.0)?;
    if !converged(coarse, fine, l1) {
        return Err(Error::resolution(format!(
            "oscillatory integral at R={}, t={} changed by {:.3e} under refinement",
            g.r,
            g.t,
            (fine - coarse).norm()
        )));
    }
    Ok(fine)
}

/// Log-spaced |t| samples, `per_octave` per octave over [lo, hi], both signs
/// optional, plus t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeSampler {
    pub per_octave: usize,
    pub lo: f64,
    pub hi: f64,
    pub both_signs: bool,
}

impl TimeSampler {
    /// The window R/8 < |t| < 8R where the phase can be stationary.
    pub fn around(r: f64, per_octave: usize) -> Self {
        Self {
            per_octave,
            lo: r / 8.0,
            hi: 8.0 * r,
            both_signs: true,
        }
    }

    /// Nonnegative samples grouped by octave, lowest first; t = 0 leads.
    fn octaves(&self) -> Vec<Vec<f64>> {
        let span = (self.hi / self.lo).log2();
        let count = (span * self.per_octave as f64).round().max(1.0) as usize;
        let mut blocks = vec![vec![0.0]];
        for i in 0..=count {
            let t = self.lo * 2f64.powf(span * i as f64 / count as f64);
            if i % self.per_octave == 0 && i > 0 {
                blocks.push(Vec::new());
            }
            blocks.last_mut().expect("nonempty").push(t);
        }
        blocks
    }

    pub fn samples(&self) -> Vec<f64> {
        let pos: Vec<f64> = self.octaves().concat();
        if !self.both_signs {
            return pos;
        }
        let mut all: Vec<f64> = pos.iter().rev().filter(|&&t| t > 0.0).map(|t| -t).collect();
        all.extend(pos);
        all
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VdcRow {
    pub r: f64,
    pub sup: f64,
    pub t_argmax: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VdcScan {
    pub a: f64,
    pub rows: Vec<VdcRow>,
    pub fit: FitReport,
}

/// Samples per octave of |t| used by [`vdc_scan`] by default.
pub const VDC_T_PER_OCTAVE: usize = 24;

/// For each R, the sup over sampled t of |I(R, t)| with sign +, then the
/// log–log fit of sup against R. Times are batched per octave so each batch
/// shares one node set; the maximizer is re-checked at doubled density.
pub fn vdc_scan(amplitude: &Amplitude, a: f64, r_list: &[f64], per_octave: usize) -> Result<VdcScan> {
    check_a(a)?;
    if per_octave == 0 {
        return Err(Error::invalid("need at least one t sample per octave"));
    }
    if r_list.iter().any(|&r| !(r > 1.0 && r.is_finite())) {
        return Err(Error::invalid("vdc scan needs R > 1"));
    }
    let mut rows = Vec::with_capacity(r_list.len());
    for &r in r_list {
        let sampler = TimeSampler::around(r, per_octave);
        let mut best = (0.0f64, 0.0f64);
        let mut samples = 0;
        for block in sampler.octaves() {
            let t_top = block.iter().fold(0.0f64, |m, t| m.max(t.abs()));
            let (x, w) = band_nodes(band_speed(r, t_top, a), 1.0)?;
            let amp: Vec<f64> = x.iter().zip(&w).map(|(&p, &wq)| wq * amplitude.eval(p)).collect();
            let pa: Vec<f64> = x.iter().map(|p| p.powf(a)).collect();
            let signed: Vec<f64> = block
                .iter()
                .flat_map(|&t| if t > 0.0 { vec![t, -t] } else { vec![t] })
                .collect();
            let vals = crate::par::map(signed.len(), |i| {
                let t = signed[i];
                let mut acc = Complex64::new(0.0, 0.0);
                for ((&p, &v), &q) in x.iter().zip(&amp).zip(&pa) {
                    let (sn, cs) = (r * p + t * q).sin_cos();
                    acc += Complex64::new(v * cs, v * sn);
                }
                acc.norm()
            });
            samples += signed.len();
            for (&t, &v) in signed.iter().zip(&vals) {
                if v > best.0 {
                    best = (v, t);
                }
            }
        }
        let checked = osc_integral(&OscIntegrand {
            amplitude: amplitude.clone(),
            r,
            t: best.1,
            a,
            sign: Sign::Plus,
        })?
        .norm();
        if (checked - best.0).abs() > SELF_CONVERGENCE_TOLERANCE * checked {
            return Err(Error::resolution(format!(
                "vdc sup at R={r} moved from {} to {checked} under refinement",
                best.0
            )));
        }
        rows.push(VdcRow {
            r,
            sup: checked,
            t_argmax: best.1,
            samples,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|row| row.r).collect();
    let ys: Vec<f64> = rows.iter().map(|row| row.sup).collect();
    let fit = FitReport::log2_log2(&xs, &ys)?;
    Ok(VdcScan { a, rows, fit })
}

/// Annuli I_j (for λ) and I_k (for r).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DyadicAnnulusPair {
    pub j: u32,
    pub k: u32,
}

impl DyadicAnnulusPair {
    pub fn new(j: u32, k: u32) -> Self {
        Self { j, k }
    }

    pub fn swapped(&self) -> Self {
        Self { j: self.k, k: self.j }
    }
}

/// Bounds of I_m: (0, 1) for m = 0, else [2^{m−1}, 2^m).
pub fn annulus(m: u32) -> (f64, f64) {
    if m == 0 {
        (0.0, 1.0)
    } else {
        (2f64.powi(m as i32 - 1), 2f64.powi(m as i32))
    }
}

pub fn in_annulus(m: u32, r: f64) -> bool {
    let (lo, hi) = annulus(m);
    if m == 0 {
        r > 0.0 && r < hi
    } else {
        r >= lo && r < hi
    }
}

/// Chebyshev points on (lo, hi): clustered at both ends, never on them.
pub fn clustered_samples(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| {
            let c = (PI * (i as f64 + 0.5) / count as f64).cos();
            lo + (hi - lo) * 0.5 * (1.0 - c)
        })
        .collect()
}

fn check_dim(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid(format!("dimension must be >= 2, got {n}")));
    }
    Ok((n as f64 - 2.0) / 2.0)
}

/// r^{−ν} J_ν(rρ), finite as r → 0.
fn scaled_bessel(nu: f64, r: f64, p: f64) -> f64 {
    bessel_j_fast(nu, r * p) * r.powf(-nu)
}

fn kernel_sum(nu: f64, r: f64, lambda: f64, t: f64, a: f64, density: f64) -> Result<(Complex64, f64)> {
    let (x, w) = band_nodes(band_speed(r + lambda, t, a), density)?;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut l1 = 0.0;
    for (&p, &wq) in x.iter().zip(&w) {
        let v = wq * p * DyadicCutoff::phi(p).powi(2) * scaled_bessel(nu, r, p) * scaled_bessel(nu, lambda, p);
        let (sn, cs) = (t * p.powf(a)).sin_cos();
        acc += Complex64::new(v * cs, v * sn);
        l1 += v.abs();
    }
    Ok((acc, l1))
}

/// K_jk(r, λ, t), checked against doubled panel density.
pub fn kernel_k(pair: DyadicAnnulusPair, r: f64, lambda: f64, t: f64, a: f64, n: usize) -> Result<Complex64> {
    check_a(a)?;
    let nu = check_dim(n)?;
    if !(r.is_finite() && lambda.is_finite() && t.is_finite()) {
        return Err(Error::invalid("kernel arguments must be finite"));
    }
    if !in_annulus(pair.k, r) || !in_annulus(pair.j, lambda) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (coarse, _) = kernel_sum(nu, r, lambda, t, a, 1.0)?;
    let (fine, l1) = kernel_sum(nu, r, lambda, t, a, 2.0)?;
    if !converged(coarse, fine, l1) {
        return Err(Error::resolution(format!(
            "kernel at r={r}, lambda={lambda}, t={t} changed by {:.3e} under refinement",
            (fine - coarse).norm()
        )));
    }
    Ok(fine)
}

/// Sampling density for kernel sup-norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSampling {
    /// Points per annulus octave in r and in λ.
    pub points_per_octave: usize,
    pub t_per_octave: usize,
    /// The t window is [2^{t_min_log2}, 2^{t_extra + max(j,k)}].
    pub t_min_log2: i32,
    pub t_extra: i32,
}

impl Default for KernelSampling {
    fn default() -> Self {
        Self {
            points_per_octave: 64,
            t_per_octave: 24,
            t_min_log2: -4,
            t_extra: 3,
        }
    }
}

impl KernelSampling {
    pub fn doubled(&self) -> Self {
        Self {
            points_per_octave: 2 * self.points_per_octave,
            t_per_octave: 2 * self.t_per_octave,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSup {
    pub j: u32,
    pub k: u32,
    pub value: f64,
    pub r: f64,
    pub lambda: f64,
    pub t: f64,
    /// max |K| / (min(1, r^{−(n−1)/2}) min(1, λ^{−(n−1)/2})) over the samples.
    pub envelope_constant: f64,
    pub samples: usize,
}

fn envelope(n: usize, r: f64) -> f64 {
    r.powf(-(n as f64 - 1.0) / 2.0).min(1.0)
}

/// max |K_jk| over r ∈ I_k, λ ∈ I_j and t ≥ 0 samples (|K| is even in t).
/// A lower bound for the true sup; the maximizer is re-checked with
/// [`kernel_k`] and must agree to the self-convergence tolerance.
pub fn kernel_supnorm(pair: DyadicAnnulusPair, a: f64, n: usize, sampling: &KernelSampling) -> Result<KernelSup> {
    check_a(a)?;
    let nu = check_dim(n)?;
    if sampling.points_per_octave == 0 || sampling.t_per_octave == 0 {
        return Err(Error::invalid("kernel sampling needs positive densities"));
    }
    let (klo, khi) = annulus(pair.k);
    let (jlo, jhi) = annulus(pair.j);
    let rs = clustered_samples(klo, khi, sampling.points_per_octave);
    let ls = clustered_samples(jlo, jhi, sampling.points_per_octave);
    let top = sampling.t_extra + pair.j.max(pair.k) as i32;
    let sampler = TimeSampler {
        per_octave: sampling.t_per_octave,
        lo: 2f64.powi(sampling.t_min_log2),
        hi: 2f64.powi(top),
        both_signs: false,
    };
    let mut best = KernelSup {
        j: pair.j,
        k: pair.k,
        value: 0.0,
        r: rs[0],
        lambda: ls[0],
        t: 0.0,
        envelope_constant: 0.0,
        samples: 0,
    };
    let env_r: Vec<f64> = rs.iter().map(|&r| envelope(n, r)).collect();
    let env_l: Vec<f64> = ls.iter().map(|&l| envelope(n, l)).collect();
    for block in sampler.octaves() {
        let t_top = block.iter().fold(0.0f64, |m, &t| m.max(t));
        let (x, w) = band_nodes(band_speed(khi + jhi, t_top, a), 1.0)?;
        let s: Vec<f64> = x
            .iter()
            .zip(&w)
            .map(|(&p, &wq)| (wq * p).sqrt() * DyadicCutoff::phi(p))
            .collect();
        let side = |pts: &[f64]| {
            let mut m = Array2::<f64>::zeros((pts.len(), x.len()));
            for (i, &r) in pts.iter().enumerate() {
                for (q, (&p, &sq)) in x.iter().zip(&s).enumerate() {
                    m[[i, q]] = scaled_bessel(nu, r, p) * sq;
                }
            }
            m
        };
        let ar = side(&rs);
        let bl = side(&ls);
        let blt = bl.t();
        let pa: Vec<f64> = x.iter().map(|p| p.powf(a)).collect();
        let maxima = crate::par::map(block.len(), |ti| {
            let t = block[ti];
            let (sn, cs): (Vec<f64>, Vec<f64>) = pa.iter().map(|&p| (t * p).sin_cos()).unzip();
            let re = (&ar * &Array1::from(cs)).dot(&blt);
            let im = (&ar * &Array1::from(sn)).dot(&blt);
            let mut m = (0.0f64, 0usize, 0usize, 0.0f64);
            for i in 0..rs.len() {
                for l in 0..ls.len() {
                    let v = re[[i, l]].hypot(im[[i, l]]);
                    if v > m.0 {
                        m = (v, i, l, m.3);
                    }
                    m.3 = m.3.max(v / (env_r[i] * env_l[l]));
                }
            }
            m
        });
        for (ti, &(v, i, l, env)) in maxima.iter().enumerate() {
            best.envelope_constant = best.envelope_constant.max(env);
            if v > best.value {
                best.value = v;
                best.r = rs[i];
                best.lambda = ls[l];
                best.t = block[ti];
            }
        }
        best.samples += block.len() * rs.len() * ls.len();
    }
    let checked = kernel_k(pair, best.r, best.lambda, best.t, a, n)?.norm();
    if (checked - best.value).abs() > SELF_CONVERGENCE_TOLERANCE * checked {
        return Err(Error::resolution(format!(
            "kernel sup for (j,k)=({},{}) moved from {} to {checked} under refinement",
            pair.j, pair.k, best.value
        )));
    }
    best.value = checked;
    Ok(best)
}

/// Exponent of the predicted bound: −(n−1)(j+k)/2 for |j−k| <= 1, else
/// −(2n−1)(j+k)/4 − |j−k|/4.
pub fn predicted_exponent(pair: DyadicAnnulusPair, n: usize) -> f64 {
    let (j, k) = (pair.j as f64, pair.k as f64);
    let nf = n as f64;
    if pair.j.abs_diff(pair.k) <= 1 {
        -(nf - 1.0) * (j + k) / 2.0
    } else {
        -(2.0 * nf - 1.0) * (j + k) / 4.0 - (j - k).abs() / 4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelRow {
    pub j: u32,
    pub k: u32,
    pub sup: f64,
    pub predicted_exponent: f64,
    /// log₂ sup − predicted − log₂ C of the regime; ≤ 0 by construction of C.
    pub residual: f64,
    pub envelope_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelScan {
    pub a: f64,
    pub n: usize,
    pub rows: Vec<KernelRow>,
    /// Slope of log₂ sup against j + k over the |j−k| <= 1 rows.
    pub diagonal: Option<FitReport>,
    /// Smallest C with sup <= C·2^{predicted} over the |j−k| > 1 rows.
    pub off_diagonal_constant: Option<f64>,
    pub diagonal_constant: Option<f64>,
}

/// Sup-norms for every pair, then a fit per regime. The diagonal fit needs
/// at least `min_fit` rows.
pub fn kernel_decay_scan(
    a: f64,
    n: usize,
    pairs: &[DyadicAnnulusPair],
    sampling: &KernelSampling,
    min_fit: usize,
) -> Result<KernelScan> {
    let sups = pairs
        .iter()
        .map(|&p| kernel_supnorm(p, a, n, sampling))
        .collect::<Result<Vec<_>>>()?;
    let regime_constant = |diag: bool| {
        sups.iter()
            .filter(|s| (s.j.abs_diff(s.k) <= 1) == diag)
            .map(|s| s.value.log2() - predicted_exponent(DyadicAnnulusPair::new(s.j, s.k), n))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    };
    let diag_c = regime_constant(true);
    let off_c = regime_constant(false);
    let rows = sups
        .iter()
        .map(|s| {
            let pair = DyadicAnnulusPair::new(s.j, s.k);
            let pred = predicted_exponent(pair, n);
            let c = if s.j.abs_diff(s.k) <= 1 { diag_c } else { off_c };
            KernelRow {
                j: s.j,
                k: s.k,
                sup: s.value,
                predicted_exponent: pred,
                residual: s.value.log2() - pred - c.unwrap_or(0.0),
                envelope_constant: s.envelope_constant,
            }
        })
        .collect::<Vec<_>>();
    let (dx, dy): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.j.abs_diff(r.k) <= 1)
        .map(|r| ((r.j + r.k) as f64, r.sup))
        .unzip();
    let diagonal = if dx.len() >= min_fit.max(2) {
        Some(FitReport::log2_linear(&dx, &dy, min_fit)?)
    } else {
        None
    };
    Ok(KernelScan {
        a,
        n,
        rows,
        diagonal,
        off_diagonal_constant: off_c.map(f64::exp2),
        diagonal_constant: diag_c.map(f64::exp2),
    })
}

/// A function on the band, stored at the nodes of a Gauss–Legendre grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BandFunction {
    grid: RadialGrid,
    values: Vec<Complex64>,
}

impl BandFunction {
    /// Uniform grid with `panels` 16-point panels.
    pub fn grid(panels: usize) -> Result<RadialGrid> {
        if panels == 0 {
            return Err(Error::invalid("band grid needs at least one panel"));
        }
        let len = BAND.1 - BAND.0;
        RadialGrid::from_breaks((0..=panels).map(|i| BAND.0 + len * i as f64 / panels as f64).collect())
    }

    /// Grid resolving phase speed `speed` at the reference panel phase.
    pub fn grid_for_speed(speed: f64) -> Result<RadialGrid> {
        let len = BAND.1 - BAND.0;
        let panels = (len * speed / REFERENCE_PANEL_PHASE).ceil().max(MIN_PANELS as f64);
        if panels > MAX_PANELS as f64 {
            return Err(Error::resolution("band grid exceeds the panel budget"));
        }
        Self::grid(panels as usize)
    }

    pub fn new(grid: RadialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("band values and grid differ in length"));
        }
        if grid.breaks()[0] < BAND.0 - 1e-12 || grid.r_max() > BAND.1 + 1e-12 {
            return Err(Error::invalid("band grid must lie in [1/2, 2]"));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::invalid("band values must be finite"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&p| f(p)).collect();
        Self::new(grid.clone(), values)
    }

    /// Σ_m c_m cos(mπ(ρ − 1/2)/(3/2)) + i d_m sin(…) for m < `modes`, with
    /// coefficients uniform in [−1, 1].
    pub fn band_limited_noise(grid: &RadialGrid, modes: usize, rng: &mut impl Rng) -> Result<Self> {
        let coef: Vec<(f64, f64)> = (0..modes)
            .map(|_| (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
            .collect();
        Self::from_fn(grid, |p| {
            let u = PI * (p - BAND.0) / (BAND.1 - BAND.0);
            coef.iter()
                .enumerate()
                .map(|(m, &(c, d))| {
                    let x = m as f64 * u;
                    Complex64::new(c * x.cos(), d * (x + 0.5).sin())
                })
                .sum()
        })
    }

    pub fn grid_ref(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// (∫ |h|² dρ)^{1/2}.
    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| v.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    }

    fn scaled_by(&self, m: &[f64]) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(m).map(|(v, s)| v * s).collect(),
        }
    }
}

const TK_TIME_CHUNK: usize = 256;

/// T_k h on the given grids; zero for r ∉ I_k.
pub fn tk_apply(h: &BandFunction, k: u32, a: f64, n: usize, rgrid: &RadialGrid, tgrid: &TimeGrid) -> Result<SpaceTimeField> {
    check_a(a)?;
    let nu = check_dim(n)?;
    let (_, khi) = annulus(k);
    let speed = band_speed(khi.min(rgrid.r_max()), tgrid.max_abs_t(), a);
    h.grid.check_phase("T_k band grid", |_| speed)?;
    let x = h.grid.nodes();
    let rows: Vec<usize> = (0..rgrid.len()).filter(|&i| in_annulus(k, rgrid.nodes()[i])).collect();
    let mut ar = Array2::<f64>::zeros((x.len(), rows.len()));
    for (c, &i) in rows.iter().enumerate() {
        let r = rgrid.nodes()[i];
        for (q, &p) in x.iter().enumerate() {
            ar[[q, c]] = scaled_bessel(nu, r, p);
        }
    }
    let g: Vec<Complex64> = x
        .iter()
        .zip(h.grid.weights())
        .zip(&h.values)
        .map(|((&p, &w), v)| v * (w * DyadicCutoff::phi(p)))
        .collect();
    let pa: Vec<f64> = x.iter().map(|p| p.powf(a)).collect();
    let nt = tgrid.len();
    let nr = rgrid.len();
    let chunks = nt.div_ceil(TK_TIME_CHUNK);
    let blocks = crate::par::map(chunks, |c| {
        let times = &tgrid.nodes()[c * TK_TIME_CHUNK..((c + 1) * TK_TIME_CHUNK).min(nt)];
        let mut er = Array2::<f64>::zeros((times.len(), x.len()));
        let mut ei = Array2::<f64>::zeros((times.len(), x.len()));
        for (ti, &t) in times.iter().enumerate() {
            for q in 0..x.len() {
                let (sn, cs) = (t * pa[q]).sin_cos();
                let v = g[q] * Complex64::new(cs, sn);
                er[[ti, q]] = v.re;
                ei[[ti, q]] = v.im;
            }
        }
        let re = er.dot(&ar);
        let im = ei.dot(&ar);
        let mut out = vec![Complex64::new(0.0, 0.0); times.len() * nr];
        for ti in 0..times.len() {
            for (c, &i) in rows.iter().enumerate() {
                out[ti * nr + i] = Complex64::new(re[[ti, c]], im[[ti, c]]);
            }
        }
        out
    });
    let values = blocks.concat();
    SpaceTimeField::new(n, rgrid.clone(), tgrid.clone(), values)
}

/// ∫_{I_k} r J_ν(rρ)² dr by Gauss–Legendre panels of at most one radian.
fn annulus_bessel_energy(nu: f64, k: u32, p: f64) -> f64 {
    let (lo, hi) = annulus(k);
    let panels = ((hi - lo) * 2.0 * p).ceil().max(4.0) as usize;
    let rule = GaussLegendre::cached(16);
    (0..panels)
        .map(|i| {
            let a = lo + (hi - lo) * i as f64 / panels as f64;
            let b = lo + (hi - lo) * (i + 1) as f64 / panels as f64;
            rule.integrate(a, b, |r| r * bessel_j_fast(nu, r * p).powi(2))
        })
        .sum()
}

/// The multiplier m with ‖T_k h‖²_{L²_{t,x}} = ∫ m |h|² dρ (Plancherel in t
/// after the substitution s = ρ^a).
pub fn tk_multiplier(k: u32, a: f64, n: usize, grid: &RadialGrid) -> Result<Vec<f64>> {
    check_a(a)?;
    let nu = check_dim(n)?;
    let c = 2.0 * PI * sphere_area(n);
    Ok(grid
        .nodes()
        .iter()
        .map(|&p| c * DyadicCutoff::phi(p).powi(2) / (a * p.powf(a - 1.0)) * annulus_bessel_energy(nu, k, p))
        .collect())
}

/// ‖T_k h‖_{L²_{t,x}} over all times, through the multiplier.
pub fn tk_norm_plancherel(h: &BandFunction, k: u32, a: f64, n: usize) -> Result<f64> {
    let m = tk_multiplier(k, a, n, &h.grid)?;
    Ok(h.scaled_by(&m.iter().map(|v| v.sqrt()).collect::<Vec<_>>()).l2_norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TkRow {
    pub k: u32,
    /// Best ‖T_k h‖/‖h‖ over the trials.
    pub norm: f64,
    /// sup m^{1/2} on the band grid, the exact operator norm there.
    pub multiplier_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TkScan {
    pub a: f64,
    pub n: usize,
    pub rows: Vec<TkRow>,
    pub fit: FitReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TkTrials {
    pub trials: usize,
    pub refinements: usize,
    pub modes: usize,
    pub panels: usize,
    pub seed: u64,
}

impl Default for TkTrials {
    fn default() -> Self {
        Self {
            trials: 32,
            refinements: 5,
            modes: 8,
            panels: 48,
            seed: 0x5eed,
        }
    }
}

/// Randomized power iteration on T_k* T_k for each k, then the fit of
/// log₂ norm against k. Each trial starts from band-limited noise and is
/// refined by normalized re-application.
pub fn tk_norm_scan(a: f64, n: usize, k_list: &[u32], trials: &TkTrials) -> Result<TkScan> {
    check_a(a)?;
    check_dim(n)?;
    if trials.trials == 0 {
        return Err(Error::invalid("tk scan needs at least one trial"));
    }
    let grid = BandFunction::grid(trials.panels)?;
    let mut rows = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let m = tk_multiplier(k, a, n, &grid)?;
        let mut rng = ChaCha8Rng::seed_from_u64(trials.seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut best = 0.0f64;
        for _ in 0..trials.trials {
            let mut h = BandFunction::band_limited_noise(&grid, trials.modes, &mut rng)?;
            for _ in 0..trials.refinements {
                let next = h.scaled_by(&m);
                let norm = next.l2_norm();
                if norm == 0.0 {
                    break;
                }
                h = next.scaled_by(&vec![1.0 / norm; m.len()]);
            }
            let hn = h.l2_norm();
            if hn > 0.0 {
                let th = h.scaled_by(&m.iter().map(|v| v.sqrt()).collect::<Vec<_>>()).l2_norm();
                best = best.max(th / hn);
            }
        }
        let sup = m.iter().fold(0.0f64, |s, &v| s.max(v)).sqrt();
        rows.push(TkRow {
            k,
            norm: best,
            multiplier_sup: sup,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.norm).collect();
    let fit = FitReport::log2_linear(&xs, &ys, crate::fit::MIN_FIT_SAMPLES)?;
    Ok(TkScan { a, n, rows, fit })
}
