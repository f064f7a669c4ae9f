//! Bessel functions of the first kind, their two-term large-argument
//! expansion and the remainder `E_ν(r) = J_ν(r) − (two leading terms)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ensure_finite;
use crate::{Error, FitReport, Result};

/// Arguments at or below `max(SERIES_CUTOFF, 2ν)` use the ascending series.
pub const SERIES_CUTOFF: f64 = 12.0;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselOrder {
    nu: f64,
}

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        ensure_finite("nu", nu)?;
        if nu < 0.0 {
            return Err(Error::invalid(format!("Bessel order must be >= 0, got {nu}")));
        }
        Ok(Self { nu })
    }

    /// ν = (n − 2)/2.
    pub fn from_dimension(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("dimension must be >= 2, got {n}")));
        }
        Ok(Self {
            nu: (n as f64 - 2.0) / 2.0,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Whether ν + 1/2 is an integer, in which case the Hankel expansion terminates.
    pub fn is_half_integer(&self) -> bool {
        let t = self.nu + 0.5;
        t == t.round()
    }
}

/// Γ(x) for real x, Lanczos (g = 7) with reflection; exact factorial paths
/// for positive integers and half-integers up to 170.
pub fn gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return f64::NAN;
    }
    if x > 0.0 && x <= 171.0 {
        if x == x.floor() {
            return factorial(x as u32 - 1);
        }
        if (x - 0.5) == (x - 0.5).floor() {
            return gamma_half_integer((x - 0.5) as u32);
        }
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

fn factorial(k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Γ(k + 1/2) = (2k)! √π / (4^k k!), accumulated as a product of (j − 1/2).
fn gamma_half_integer(k: u32) -> f64 {
    (1..=k).fold(PI.sqrt(), |acc, j| acc * (j as f64 - 0.5))
}

/// J_ν(r) by the ascending series. The alternating sum is accumulated in
/// double-double arithmetic: near the cutoff the largest term exceeds the
/// result by four orders of magnitude.
pub fn bessel_j_series(nu: f64, r: f64) -> f64 {
    if r == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * r;
    let lead = half.powf(nu) / gamma(nu + 1.0);
    let q = Dd::prod(half, half).neg();
    let mut term = Dd::from(1.0);
    let mut sum = Dd::from(1.0);
    for k in 1..500 {
        let kf = k as f64;
        let denom = Dd::sum(kf, nu).scale(kf);
        term = term.mul(q).div(denom);
        sum = sum.add(term);
        if term.hi.abs() < 1e-34 * sum.hi.abs().max(1e-300) && kf > half {
            break;
        }
    }
    lead * sum.hi
}

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }
}

impl Dd {
    fn quick(a: f64, b: f64) -> Self {
        let s = a + b;
        Dd { hi: s, lo: b - (s - a) }
    }

    fn sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Dd {
            hi: s,
            lo: (a - (s - bb)) + (b - bb),
        }
    }

    fn prod(a: f64, b: f64) -> Self {
        let p = a * b;
        Dd {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    fn neg(self) -> Self {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn add(self, o: Dd) -> Self {
        let s = Dd::sum(self.hi, o.hi);
        let t = Dd::sum(self.lo, o.lo);
        let s = Dd::quick(s.hi, s.lo + t.hi);
        Dd::quick(s.hi, s.lo + t.lo)
    }

    fn mul(self, o: Dd) -> Self {
        let p = Dd::prod(self.hi, o.hi);
        Dd::quick(p.hi, p.lo + self.hi * o.lo + self.lo * o.hi)
    }

    fn scale(self, k: f64) -> Self {
        let p = Dd::prod(self.hi, k);
        Dd::quick(p.hi, p.lo + self.lo * k)
    }

    fn div(self, o: Dd) -> Self {
        let q1 = self.hi / o.hi;
        let r = self.add(o.mul(Dd::from(q1)).neg());
        let q2 = r.hi / o.hi;
        let r = r.add(o.mul(Dd::from(q2)).neg());
        let q3 = r.hi / o.hi;
        Dd::quick(q1, q2).add(Dd::from(q3))
    }
}

/// J_ν(r) by the Hankel asymptotic expansion `√(2/πr)(P cos ω − Q sin ω)`,
/// summed until the terms stop decreasing or fall below 1e-17.
pub fn bessel_j_asymptotic(nu: f64, r: f64) -> f64 {
    let (p, q) = hankel_pq(nu, r);
    let w = r - 0.5 * nu * PI - 0.25 * PI;
    (2.0 / (PI * r)).sqrt() * (p * w.cos() - q * w.sin())
}

fn hankel_pq(nu: f64, r: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    let mut prev = f64::INFINITY;
    for k in 1..60u32 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) / (k as f64 * 8.0 * r);
        if next == 0.0 {
            break;
        }
        if next.abs() > prev && k > 6 {
            break;
        }
        prev = next.abs();
        term = next;
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    (p, q)
}

pub(crate) fn bessel_j_unchecked(nu: f64, r: f64) -> f64 {
    if r <= SERIES_CUTOFF.max(2.0 * nu) {
        bessel_j_series(nu, r)
    } else {
        bessel_j_asymptotic(nu, r)
    }
}

/// Fast J_ν for inner loops: `libm` for integer orders, the terminating
/// expansion (or the series near the origin) for half-integer orders, and
/// the reference evaluator otherwise.
pub fn bessel_j_fast(nu: f64, r: f64) -> f64 {
    if nu == nu.floor() && nu < 64.0 {
        return match nu as i32 {
            0 => libm::j0(r),
            1 => libm::j1(r),
            k => libm::jn(k, r),
        };
    }
    let t = nu + 0.5;
    if t == t.floor() {
        if nu == 0.5 {
            return if r == 0.0 { 0.0 } else { (2.0 / (PI * r)).sqrt() * r.sin() };
        }
        if r >= nu * nu + 2.0 {
            return bessel_j_asymptotic(nu, r);
        }
        return series_f64(nu, r);
    }
    bessel_j_unchecked(nu, r)
}

/// Plain ascending series, adequate where the terms do not cancel strongly.
fn series_f64(nu: f64, r: f64) -> f64 {
    if r == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * r;
    let q = -half * half;
    let mut term = half.powf(nu) / gamma(nu + 1.0);
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() && kf > half {
            break;
        }
    }
    sum
}

/// J_ν(r) for r ≥ 0.
pub fn bessel_j(order: BesselOrder, r: f64) -> Result<f64> {
    ensure_finite("r", r)?;
    if r < 0.0 {
        return Err(Error::invalid(format!("r must be >= 0, got {r}")));
    }
    Ok(bessel_j_unchecked(order.nu, r))
}

/// dJ_ν/dr = (ν/r) J_ν − J_{ν+1}.
pub fn bessel_j_derivative(order: BesselOrder, r: f64) -> Result<f64> {
    ensure_finite("r", r)?;
    if r < 0.0 {
        return Err(Error::invalid(format!("r must be >= 0, got {r}")));
    }
    let nu = order.nu;
    if r == 0.0 {
        return Ok(if nu == 1.0 {
            0.5
        } else if nu == 0.0 || nu > 1.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    Ok(nu / r * bessel_j_unchecked(nu, r) - bessel_j_unchecked(nu + 1.0, r))
}

fn check_expansion_range(r: f64) -> Result<()> {
    ensure_finite("r", r)?;
    if r <= 1.0 {
        return Err(Error::invalid(format!(
            "two-term expansion is defined for r > 1, got {r}"
        )));
    }
    Ok(())
}

/// Coefficient of `r^{-3/2} sin ω` in the expansion:
/// (ν − 1/2) Γ(ν + 3/2) / (√(2π) Γ(ν + 1/2)).
pub fn second_term_coefficient(order: BesselOrder) -> f64 {
    let nu = order.nu;
    if nu == 0.5 {
        return 0.0;
    }
    (nu - 0.5) * gamma(nu + 1.5) / ((2.0 * PI).sqrt() * gamma(nu + 0.5))
}

/// The two leading terms √(2/πr) cos ω − c_ν r^{-3/2} sin ω, ω = r − νπ/2 − π/4.
pub fn bessel_leading(order: BesselOrder, r: f64) -> Result<f64> {
    check_expansion_range(r)?;
    Ok(leading_unchecked(order, r))
}

fn leading_unchecked(order: BesselOrder, r: f64) -> f64 {
    let w = r - 0.5 * order.nu * PI - 0.25 * PI;
    (2.0 / (PI * r)).sqrt() * w.cos() - second_term_coefficient(order) * r.powf(-1.5) * w.sin()
}

/// E_ν(r) = J_ν(r) − bessel_leading(ν, r).
pub fn bessel_error(order: BesselOrder, r: f64) -> Result<f64> {
    check_expansion_range(r)?;
    Ok(error_unchecked(order, r))
}

fn error_unchecked(order: BesselOrder, r: f64) -> f64 {
    bessel_j_unchecked(order.nu, r) - leading_unchecked(order, r)
}

/// dE_ν/dr by a central difference with step r·1e-5.
pub fn bessel_error_derivative(order: BesselOrder, r: f64) -> Result<f64> {
    check_expansion_range(r)?;
    let h = r * 1e-5;
    if r - h <= 1.0 {
        return Err(Error::invalid("derivative stencil leaves r > 1"));
    }
    Ok((error_unchecked(order, r + h) - error_unchecked(order, r - h)) / (2.0 * h))
}

/// Level below which a remainder is indistinguishable from rounding in J_ν.
pub fn noise_floor(r: f64) -> f64 {
    64.0 * f64::EPSILON * (2.0 / (PI * r)).sqrt()
}

const ENVELOPE_SAMPLES: usize = 32;

/// sup of |f| over one period [r, r + 2π), sampled at 32 points.
fn period_sup(r: f64, f: impl Fn(f64) -> f64) -> f64 {
    (0..ENVELOPE_SAMPLES)
        .map(|i| f(r + 2.0 * PI * i as f64 / ENVELOPE_SAMPLES as f64).abs())
        .fold(0.0, f64::max)
}

/// Envelope of the remainder at r: sup |E_ν| over one oscillation period.
pub fn remainder_envelope(order: BesselOrder, r: f64) -> Result<f64> {
    check_expansion_range(r)?;
    Ok(period_sup(r, |x| error_unchecked(order, x)))
}

/// Envelope of the remainder derivative.
pub fn remainder_derivative_envelope(order: BesselOrder, r: f64) -> Result<f64> {
    check_expansion_range(r)?;
    let mut best = 0.0f64;
    for i in 0..ENVELOPE_SAMPLES {
        let x = r + 2.0 * PI * i as f64 / ENVELOPE_SAMPLES as f64;
        best = best.max(bessel_error_derivative(order, x)?.abs());
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderScan {
    pub nu: f64,
    pub r: Vec<f64>,
    pub envelope: Vec<f64>,
    /// log₂ envelope against log₂ r; `None` when the remainder vanishes.
    pub fit: Option<FitReport>,
    /// All remainders below the noise floor.
    pub identically_zero: bool,
    /// sup over samples of envelope · r^{5/2}.
    pub fitted_constant: f64,
}

/// Log-spaced scan of the remainder envelope over [r_min, r_max].
pub fn remainder_slope_scan(
    order: BesselOrder,
    r_min: f64,
    r_max: f64,
    samples: usize,
) -> Result<RemainderScan> {
    ensure_finite("r_min", r_min)?;
    ensure_finite("r_max", r_max)?;
    if !(r_min > 1.0 && r_max > r_min) {
        return Err(Error::invalid(format!(
            "scan range needs 1 < r_min < r_max, got [{r_min}, {r_max}]"
        )));
    }
    if samples < crate::fit::MIN_FIT_SAMPLES {
        return Err(Error::invalid(format!("scan needs >= 8 samples, got {samples}")));
    }
    let r = log_space(r_min, r_max, samples);
    let envelope = crate::par::try_map(samples, |i| remainder_envelope(order, r[i]))?;
    let identically_zero = r
        .iter()
        .zip(&envelope)
        .all(|(&ri, &e)| e <= noise_floor(ri));
    let fitted_constant = r
        .iter()
        .zip(&envelope)
        .map(|(&ri, &e)| e * ri.powf(2.5))
        .fold(0.0, f64::max);
    let fit = if identically_zero {
        None
    } else {
        let keep: Vec<usize> = (0..samples).filter(|&i| envelope[i] > noise_floor(r[i])).collect();
        let xs: Vec<f64> = keep.iter().map(|&i| r[i]).collect();
        let ys: Vec<f64> = keep.iter().map(|&i| envelope[i]).collect();
        Some(FitReport::log2_log2(&xs, &ys)?)
    };
    Ok(RemainderScan {
        nu: order.nu,
        r,
        envelope,
        fit,
        identically_zero,
        fitted_constant,
    })
}

/// sup over log-spaced r ∈ [1e-6, r_max] of |J_ν(r)| / min(r^ν, r^{-1/2}), ν = (n−2)/2.
pub fn envelope_constant(n: usize, r_max: f64, samples: usize) -> Result<f64> {
    let order = BesselOrder::from_dimension(n)?;
    let nu = order.nu;
    let r = log_space(1e-6, r_max, samples);
    let vals = crate::par::map(samples, |i| {
        let x = r[i];
        bessel_j_unchecked(nu, x).abs() / x.powf(nu).min(x.powf(-0.5))
    });
    Ok(vals.into_iter().fold(0.0, f64::max))
}

pub(crate) fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}
