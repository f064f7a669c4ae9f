//! Gauss–Legendre rules, composite panels and panel-local spectral integration.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// n-point rule on [-1, 1], nodes ascending.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared instance for order `n`; rules are built once per process.
    pub fn cached(n: usize) -> &'static GaussLegendre {
        static CACHE: OnceLock<Mutex<HashMap<usize, &'static GaussLegendre>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry(n)
            .or_insert_with(|| Box::leak(Box::new(GaussLegendre::new(n))))
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// P_0(x), ..., P_n(x).
pub fn legendre_table(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(x);
    }
    for k in 2..=n {
        let kf = k as f64;
        let v = ((2.0 * kf - 1.0) * x * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
        out.push(v);
    }
    out
}

/// Spectral cumulative integration on one panel: `S[i][j] = ∫_{-1}^{x_i} ℓ_j`,
/// with ℓ_j the Lagrange basis of the Gauss nodes.
#[derive(Debug, Clone)]
pub struct CumulativeRule {
    order: usize,
    matrix: Vec<f64>,
    /// `coef[k][j]`: Legendre coefficient k of the interpolant of e_j.
    coef: Vec<f64>,
}

impl CumulativeRule {
    pub fn new(rule: &GaussLegendre) -> Self {
        let n = rule.order();
        let tables: Vec<Vec<f64>> = rule.nodes().iter().map(|&x| legendre_table(n, x)).collect();
        let mut coef = vec![0.0; n * n];
        for k in 0..n {
            for j in 0..n {
                coef[k * n + j] = rule.weights()[j] * tables[j][k] * (2.0 * k as f64 + 1.0) / 2.0;
            }
        }
        let mut matrix = vec![0.0; n * n];
        for (i, &x) in rule.nodes().iter().enumerate() {
            let p = legendre_table(n, x);
            // ∫_{-1}^x P_0 = x + 1, ∫_{-1}^x P_k = (P_{k+1} - P_{k-1}) / (2k + 1)
            let mut int_p = vec![0.0; n];
            int_p[0] = x + 1.0;
            for k in 1..n {
                int_p[k] = (p[k + 1] - p[k - 1]) / (2.0 * k as f64 + 1.0);
            }
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += coef[k * n + j] * int_p[k];
                }
                matrix[i * n + j] = s;
            }
        }
        Self {
            order: n,
            matrix,
            coef,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `S[i][j]` on the reference panel [-1, 1].
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.order + j]
    }

    /// Row of weights for ∫_{-1}^{x} of the interpolant, any x in [-1, 1].
    pub fn row_at(&self, x: f64) -> Vec<f64> {
        let n = self.order;
        let p = legendre_table(n, x);
        let mut int_p = vec![0.0; n];
        int_p[0] = x + 1.0;
        for k in 1..n {
            int_p[k] = (p[k + 1] - p[k - 1]) / (2.0 * k as f64 + 1.0);
        }
        (0..n)
            .map(|j| (0..n).map(|k| self.coef[k * n + j] * int_p[k]).sum())
            .collect()
    }

    /// Legendre coefficient `k` of the interpolant of `values`.
    pub fn legendre_coefficient<T>(&self, k: usize, values: &[T]) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::iter::Sum<T>,
    {
        let n = self.order;
        values
            .iter()
            .enumerate()
            .map(|(j, &v)| v * self.coef[k * n + j])
            .sum()
    }
}

/// Breakpoints `0 < x_0 < ... ` refining geometrically toward `start`:
/// `[start, start + h 2^{-levels}], ..., [start + h/2, start + h]`.
pub fn graded_breaks(start: f64, h: f64, levels: u32) -> Vec<f64> {
    let mut out = vec![start];
    for l in (0..levels).rev() {
        out.push(start + h * 0.5f64.powi(l as i32 + 1));
    }
    out.push(start + h);
    out
}

/// Nodes and weights of a composite rule over consecutive breakpoints.
pub fn composite(breaks: &[f64], rule: &GaussLegendre) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(rule.order() * breaks.len());
    let mut weights = Vec::with_capacity(rule.order() * breaks.len());
    for pair in breaks.windows(2) {
        for (x, w) in rule.mapped(pair[0], pair[1]) {
            nodes.push(x);
            weights.push(w);
        }
    }
    (nodes, weights)
}

/// Largest spacing between consecutive nodes of one panel of `rule`, as a
/// fraction of the panel length (including the gaps to the panel ends).
pub fn max_node_gap_fraction(rule: &GaussLegendre) -> f64 {
    let x = rule.nodes();
    let mut gap = (x[0] + 1.0).max(1.0 - x[x.len() - 1]);
    for w in x.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    0.5 * gap
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 4, 8, 16, 32] {
            let rule = GaussLegendre::new(n);
            for deg in 0..(2 * n) {
                let got = rule.integrate(-1.0, 1.0, |x| x.powi(deg as i32));
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - want).abs() < 1e-14, "n={n} deg={deg} got={got}");
            }
        }
    }

    #[test]
    fn weights_sum_to_two_and_nodes_ascend() {
        let rule = GaussLegendre::new(16);
        let s: f64 = rule.weights().iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn cumulative_rule_matches_antiderivative() {
        let rule = GaussLegendre::new(16);
        let cum = CumulativeRule::new(&rule);
        let f: Vec<f64> = rule.nodes().iter().map(|&x| (2.0 * x).cos()).collect();
        for (i, &x) in rule.nodes().iter().enumerate() {
            let got: f64 = (0..16).map(|j| cum.entry(i, j) * f[j]).sum();
            let want = ((2.0 * x).sin() - (-2.0f64).sin()) / 2.0;
            assert!((got - want).abs() < 1e-13, "{got} vs {want}");
        }
    }

    #[test]
    fn graded_breaks_are_geometric() {
        let b = graded_breaks(0.0, 1.0, 3);
        assert_eq!(b, vec![0.0, 0.125, 0.25, 0.5, 1.0]);
    }
}
