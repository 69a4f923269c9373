//! Chebyshev extrema, divided differences, simplex integrals, cardinal
//! B-splines and empirical checks of the positive-derivative inequality in
//! continuous and discrete time.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::rng::{batch_layout, purpose, RngSpec};
use crate::stats::batch_means;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    ChebyshevExtrema,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    pub k: usize,
    pub nodes: Vec<f64>,
    pub kind: NodeKind,
}

impl NodeSet {
    /// Strictly increasing nodes in `[−1, 1]`.
    pub fn custom(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::invalid("need at least two nodes"));
        }
        if nodes.iter().any(|x| !(x.abs() <= 1.0)) {
            return Err(Error::invalid("nodes must lie in [-1, 1]"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("nodes must be strictly increasing"));
        }
        Ok(Self {
            k: nodes.len() - 1,
            nodes,
            kind: NodeKind::Custom,
        })
    }
}

/// `x_j = cos((k−j)π/k)`, `j = 0..=k`, the extrema of `T_k`.
pub fn extrema(k: usize) -> Result<NodeSet> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    // sin form: exact endpoints and exact antisymmetry
    let kf = k as f64;
    let nodes = (0..=k)
        .map(|j| {
            if 2 * j == k {
                0.0
            } else {
                ((2.0 * j as f64 - kf) * PI / (2.0 * kf)).sin()
            }
        })
        .collect();
    Ok(NodeSet {
        k,
        nodes,
        kind: NodeKind::ChebyshevExtrema,
    })
}

/// `T_k(x)` by the three-term recurrence.
pub fn chebyshev_value(k: usize, x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0) {
        return Err(Error::invalid(format!("Chebyshev argument {x} outside [-1, 1]")));
    }
    Ok(chebyshev_unchecked(k, x))
}

fn chebyshev_unchecked(k: usize, x: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for _ in 1..k {
                let next = 2.0 * x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Power-basis coefficients (ascending) of the monic `2^{1−k} T_k`.
pub fn monic_chebyshev_coeffs(k: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    let mut cur = vec![0.0, 1.0];
    if k == 0 {
        return prev;
    }
    for _ in 1..k {
        let mut next = vec![0.0; cur.len() + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += 2.0 * c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= c;
        }
        prev = cur;
        cur = next;
    }
    let scale = 2f64.powi(1 - k as i32);
    cur.iter().map(|c| c * scale).collect()
}

/// Horner evaluation of ascending coefficients.
pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DividedDiffTable {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    /// `table[j][i] = f[x_i, …, x_{i+j}]`
    pub table: Vec<Vec<f64>>,
    pub leading: f64,
}

/// Newton divided differences on distinct nodes in any order.
pub fn divided_difference_on(nodes: &[f64], values: &[f64]) -> Result<DividedDiffTable> {
    if nodes.is_empty() || nodes.len() != values.len() {
        return Err(Error::invalid(format!(
            "need one value per node: {} nodes, {} values",
            nodes.len(),
            values.len()
        )));
    }
    for i in 0..nodes.len() {
        for j in 0..i {
            if nodes[i] == nodes[j] {
                return Err(Error::invalid(format!("duplicate node {}", nodes[i])));
            }
        }
    }
    let n = nodes.len();
    let mut table = vec![values.to_vec()];
    for j in 1..n {
        let prev = &table[j - 1];
        let row: Vec<f64> = (0..n - j)
            .map(|i| (prev[i + 1] - prev[i]) / (nodes[i + j] - nodes[i]))
            .collect();
        table.push(row);
    }
    let leading = table[n - 1][0];
    Ok(DividedDiffTable {
        nodes: nodes.to_vec(),
        values: values.to_vec(),
        table,
        leading,
    })
}

pub fn divided_difference(nodes: &NodeSet, values: &[f64]) -> Result<DividedDiffTable> {
    divided_difference_on(&nodes.nodes, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinNormReport {
    pub k: usize,
    pub max_abs_at_extrema: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Sup norm on the Chebyshev extrema of a degree-`k` polynomial (ascending
/// coefficients, normalized to monic) against `2^{1−k}`.
pub fn min_norm_check(coeffs: &[f64]) -> Result<MinNormReport> {
    let k = coeffs.len().saturating_sub(1);
    let lead = *coeffs.last().unwrap_or(&0.0);
    if k == 0 || lead == 0.0 || !lead.is_finite() {
        return Err(Error::invalid("need a polynomial of degree >= 1 with nonzero leading coefficient"));
    }
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let nodes = extrema(k)?;
    let max_abs = nodes
        .nodes
        .iter()
        .map(|&x| poly_eval(&monic, x).abs())
        .fold(0.0, f64::max);
    let bound = 2f64.powi(1 - k as i32);
    Ok(MinNormReport {
        k,
        max_abs_at_extrema: max_abs,
        bound,
        pass: max_abs >= bound - 1e-12,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub se: f64,
    pub samples: u64,
}

/// Uniform point of the standard simplex from sorted-uniform spacings.
fn simplex_point<R: Rng>(rng: &mut R, u: &mut Vec<f64>, t: &mut [f64]) {
    let k = t.len() - 1;
    u.clear();
    u.extend((0..k).map(|_| rng.random::<f64>()));
    u.sort_by(f64::total_cmp);
    let mut prev = 0.0;
    for j in 0..k {
        t[j] = u[j] - prev;
        prev = u[j];
    }
    t[k] = 1.0 - prev;
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Monte Carlo value of `∫_{Σ_k} f^{(k)}(Σ t_j x_j) dσ` with `Vol(Σ_k) = 1/k!`.
pub fn hermite_genocchi_mc<F>(fk: F, nodes: &[f64], n_mc: usize, rng: &RngSpec) -> Result<McEstimate>
where
    F: Fn(f64) -> f64 + Sync,
{
    if nodes.len() < 2 {
        return Err(Error::invalid("need at least two nodes"));
    }
    let k = nodes.len() - 1;
    let (batches, per) = batch_layout(n_mc, rng);
    let means: Vec<f64> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut r = rng.stream(purpose::SIMPLEX, b as u64);
            let mut u = Vec::with_capacity(k);
            let mut t = vec![0.0; k + 1];
            let mut sum = 0.0;
            for _ in 0..per {
                simplex_point(&mut r, &mut u, &mut t);
                let s: f64 = t.iter().zip(nodes).map(|(a, x)| a * x).sum();
                sum += fk(s);
            }
            sum / per as f64
        })
        .collect();
    let (mean, se) = batch_means(&means);
    let vol = factorial(k);
    Ok(McEstimate {
        estimate: mean / vol,
        se: se / vol,
        samples: (batches * per) as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexDensityReport {
    pub k: usize,
    pub s_grid: Vec<f64>,
    /// `ĝ_k(s)`, the density of `Σ t_j x_j` scaled by `1/k!`.
    pub density: Vec<f64>,
    pub se: Vec<f64>,
    pub bandwidth: f64,
    pub min_density: f64,
    /// `min_s ĝ_k` with the bandwidth halved and with it increased by half.
    pub min_density_sensitivity: (f64, f64),
    /// `(k!·min_s ĝ_k)^{−1/k}`
    pub l_k: f64,
    pub positive: bool,
    pub within_budget: bool,
    pub samples: u64,
}

/// Budget for the empirical `L_k`.
pub const L_BUDGET: f64 = 20.0;

/// Gaussian kernel density at `s` with reflection at `±1`.
fn kde_reflected(sorted: &[f64], s: f64, h: f64) -> f64 {
    let lo = s - 8.0 * h;
    let hi = s + 8.0 * h;
    let kernel = |d: f64| (-0.5 * (d / h).powi(2)).exp();
    let window = |a: f64, b: f64| {
        let i = sorted.partition_point(|&v| v < a);
        let j = sorted.partition_point(|&v| v <= b);
        &sorted[i..j]
    };
    let mut sum: f64 = window(lo, hi).iter().map(|&v| kernel(s - v)).sum();
    // images of samples reflected through −1 and 1
    sum += window(-2.0 - hi, -2.0 - lo).iter().map(|&v| kernel(s - (-2.0 - v))).sum::<f64>();
    sum += window(2.0 - hi, 2.0 - lo).iter().map(|&v| kernel(s - (2.0 - v))).sum::<f64>();
    sum / (sorted.len() as f64 * h * (2.0 * PI).sqrt())
}

fn silverman(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((p * (n - 1.0)).round() as usize).min(sorted.len() - 1)];
    let iqr = q(0.75) - q(0.25);
    0.9 * sd.min(iqr / 1.34) * n.powf(-0.2)
}

/// Kernel estimate of `g_k` at the Chebyshev extrema of order `k`.
pub fn simplex_density_check(k: usize, s_grid: &[f64], n_mc: usize, rng: &RngSpec) -> Result<SimplexDensityReport> {
    if k == 0 || k > 8 {
        return Err(Error::invalid(format!("simplex density check needs 1 <= k <= 8, got {k}")));
    }
    if s_grid.is_empty() || s_grid.iter().any(|s| !(s.abs() <= 0.9)) {
        return Err(Error::invalid("grid points must lie in [-0.9, 0.9]"));
    }
    let nodes = extrema(k)?.nodes;
    let (batches, per) = batch_layout(n_mc, rng);
    let samples: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut r = rng.stream(purpose::SIMPLEX, b as u64);
            let mut u = Vec::with_capacity(k);
            let mut t = vec![0.0; k + 1];
            let mut out: Vec<f64> = (0..per)
                .map(|_| {
                    simplex_point(&mut r, &mut u, &mut t);
                    t.iter().zip(&nodes).map(|(a, x)| a * x).sum()
                })
                .collect();
            out.sort_by(f64::total_cmp);
            out
        })
        .collect();
    let all: Vec<f64> = samples.iter().flatten().copied().collect();
    let h = silverman(&all);
    let kf = factorial(k);
    let estimate = |h: f64| -> (Vec<f64>, Vec<f64>) {
        s_grid
            .iter()
            .map(|&s| {
                let per_batch: Vec<f64> = samples.iter().map(|b| kde_reflected(b, s, h) / kf).collect();
                batch_means(&per_batch)
            })
            .unzip()
    };
    let (density, se) = estimate(h);
    let min_of = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let min_density = min_of(&density);
    let sens = (min_of(&estimate(0.5 * h).0), min_of(&estimate(1.5 * h).0));
    let l_k = (kf * min_density).powf(-1.0 / k as f64);
    Ok(SimplexDensityReport {
        k,
        s_grid: s_grid.to_vec(),
        density,
        se,
        bandwidth: h,
        min_density,
        min_density_sensitivity: sens,
        l_k,
        positive: min_density > 0.0,
        within_budget: l_k < L_BUDGET,
        samples: all.len() as u64,
    })
}

/// Half-width of the integration window as a fraction of `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// `[−9N/20, 9N/20]`
    NineTwentieths,
    /// `[−9N/10, 9N/10]`
    NineTenths,
}

impl Window {
    pub fn fraction(self) -> f64 {
        match self {
            Window::NineTwentieths => 0.45,
            Window::NineTenths => 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousReport {
    pub k: usize,
    pub n: f64,
    pub window: Window,
    /// `(1/N) ∫_window f^{(k)}`
    pub lhs: f64,
    /// `sup_{[−N,N]} |f|`
    pub sup: f64,
    /// Bracket on how far `sup` may sit below the true supremum.
    pub sup_tolerance: f64,
    /// `(k/N)^k sup |f|`
    pub rhs_over_c0k: f64,
    /// Smallest `c₀` for which the inequality holds.
    pub implied_c0: f64,
    pub min_fk: f64,
}

impl ContinuousReport {
    pub fn holds_with(&self, c0: f64) -> bool {
        self.lhs <= c0.powi(self.k as i32) * self.rhs_over_c0k
    }
}

/// Positivity of `g` on `[a, b]` by sampling; returns the smallest value seen.
fn sampled_min<G: Fn(f64) -> f64>(g: G, a: f64, b: f64, points: usize) -> f64 {
    (0..points)
        .map(|i| g(a + (b - a) * i as f64 / (points - 1) as f64))
        .fold(f64::INFINITY, f64::min)
}

/// `sup_{[a,b]} |f|` from a dense scan refined by golden-section search
/// around the ten largest samples. Returns the value and the scan spacing.
pub fn sup_abs<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> (f64, f64) {
    const SCAN: usize = 10_000;
    let step = (b - a) / SCAN as f64;
    let g = |x: f64| f(x).abs();
    let vals: Vec<(f64, f64)> = (0..=SCAN).map(|i| a + step * i as f64).map(|x| (x, g(x))).collect();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[j].1.total_cmp(&vals[i].1));
    let mut best = vals[order[0]].1;
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for &i in order.iter().take(10) {
        let (mut lo, mut hi) = ((vals[i].0 - step).max(a), (vals[i].0 + step).min(b));
        let mut c = hi - phi * (hi - lo);
        let mut d = lo + phi * (hi - lo);
        let (mut gc, mut gd) = (g(c), g(d));
        for _ in 0..80 {
            if gc >= gd {
                hi = d;
                d = c;
                gd = gc;
                c = hi - phi * (hi - lo);
                gc = g(c);
            } else {
                lo = c;
                c = d;
                gc = gd;
                d = lo + phi * (hi - lo);
                gd = g(d);
            }
        }
        best = best.max(gc).max(gd);
    }
    (best, step)
}

pub fn verify_continuous<F, G>(f: F, fk: G, k: usize, n: f64) -> Result<ContinuousReport>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    verify_continuous_window(f, fk, k, n, Window::NineTwentieths)
}

/// Empirical check of `(1/N)∫_window f^{(k)} ≤ (c₀k/N)^k sup_{[−N,N]}|f|`.
pub fn verify_continuous_window<F, G>(f: F, fk: G, k: usize, n: f64, window: Window) -> Result<ContinuousReport>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if k == 0 || !(n >= k as f64) || !n.is_finite() {
        return Err(Error::invalid(format!("need 1 <= k <= N, got k = {k}, N = {n}")));
    }
    let min_fk = sampled_min(&fk, -n, n, 2001);
    if !(min_fk > 0.0) {
        return Err(Error::invalid(format!("k-th derivative not positive on [-N, N]: min sampled {min_fk}")));
    }
    let w = window.fraction() * n;
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-12,
        ..Default::default()
    };
    let lhs = integrate(&fk, -w, w, opts).value / n;
    let (sup, step) = sup_abs(&f, -n, n);
    let kf = k as f64;
    let rhs_over_c0k = (kf / n).powi(k as i32) * sup;
    let implied_c0 = (n / kf) * (lhs / sup).powf(1.0 / kf);
    Ok(ContinuousReport {
        k,
        n,
        window,
        lhs,
        sup,
        sup_tolerance: step,
        rhs_over_c0k,
        implied_c0,
        min_fk,
    })
}

/// Centered cardinal B-spline of degree `k`: the `(k+1)`-fold convolution of
/// the indicator of `[−1/2, 1/2)`, supported on `[−(k+1)/2, (k+1)/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BSpline {
    pub k: usize,
}

impl BSpline {
    pub fn new(k: usize) -> Result<Self> {
        if k > 20 {
            return Err(Error::invalid(format!("B-spline degree {k} exceeds 20")));
        }
        Ok(Self { k })
    }

    pub fn support(&self) -> (f64, f64) {
        let h = (self.k as f64 + 1.0) / 2.0;
        (-h, h)
    }

    pub fn value(&self, x: f64) -> f64 {
        bspline_unchecked(self.k, x)
    }

    /// `B_k'(x) = B_{k−1}(x + 1/2) − B_{k−1}(x − 1/2)` for `k ≥ 1`.
    pub fn derivative(&self, x: f64) -> f64 {
        if self.k == 0 {
            return 0.0;
        }
        bspline_unchecked(self.k - 1, x + 0.5) - bspline_unchecked(self.k - 1, x - 0.5)
    }
}

pub fn bspline_value(k: usize, x: f64) -> Result<f64> {
    Ok(BSpline::new(k)?.value(x))
}

/// Cox–de Boor recurrence on the integer knots `0, 1, …, k+1`.
fn bspline_unchecked(k: usize, x: f64) -> f64 {
    let u = x + (k as f64 + 1.0) / 2.0;
    if !(u >= 0.0 && u < k as f64 + 1.0) {
        return 0.0;
    }
    // n[j] holds N_m(u − j)
    let mut n: Vec<f64> = (0..=k)
        .map(|j| {
            let v = u - j as f64;
            if (0.0..1.0).contains(&v) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for m in 2..=k + 1 {
        let mf = m as f64;
        for j in 0..=k + 1 - m {
            let v = u - j as f64;
            n[j] = (v * n[j] + (mf - v) * n[j + 1]) / (mf - 1.0);
        }
    }
    n[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteReport {
    pub k: usize,
    pub n: usize,
    /// `(1/N) Σ_{I_N} Δ^k f` with `I_N = [−9N/10, 9N/10] ∩ ℤ`.
    pub lhs: f64,
    /// `sup_{[−2N,2N]} |f|`
    pub sup: f64,
    /// Smallest `c` with `sup ≥ c^{−k}` after scaling `f` so that
    /// `lhs = k!/N^k`.
    pub implied_c: f64,
    /// Whether `lhs ≥ k!/N^k` holds as given.
    pub hypothesis_holds: bool,
    pub min_diff: f64,
    /// Smallest sampled `F^{(k)}` of the B-spline smoothing.
    pub smoothing_min: f64,
    pub smoothing_positive: bool,
}

/// `Δ^k f`, one entry shorter per order.
pub fn forward_difference(values: &[f64], k: usize) -> Vec<f64> {
    let mut d = values.to_vec();
    for _ in 0..k {
        d = d.windows(2).map(|w| w[1] - w[0]).collect();
    }
    d
}

/// Smoothing `F(x) = Σ f(n) B_{k+1}(x − n)` of samples `f(start + i)` and its
/// `j`-th derivative from `F^{(j)}(x) = Σ Δ^j f(n) B_{k+1−j}(x − n − j/2)`.
pub fn smoothing_derivative(values: &[f64], start: i64, k: usize, j: usize, x: f64) -> f64 {
    let d = forward_difference(values, j);
    let deg = k + 1 - j;
    let shift = j as f64 / 2.0;
    let half = (deg as f64 + 1.0) / 2.0;
    let lo = (x - shift - half).floor() as i64;
    let hi = (x - shift + half).ceil() as i64;
    (lo..=hi)
        .filter_map(|n| {
            let i = n - start;
            (i >= 0 && (i as usize) < d.len()).then(|| d[i as usize] * bspline_unchecked(deg, x - n as f64 - shift))
        })
        .sum()
}

/// Discrete check on `f(n)`, `n = −2N..=2N`.
pub fn verify_discrete(f_values: &[f64], k: usize, n: usize) -> Result<DiscreteReport> {
    if k == 0 || n < k {
        return Err(Error::invalid(format!("need 1 <= k <= N, got k = {k}, N = {n}")));
    }
    if k > 19 {
        return Err(Error::invalid("k must be <= 19"));
    }
    if f_values.len() != 4 * n + 1 {
        return Err(Error::invalid(format!(
            "need f on [-2N, 2N]: expected {} values, got {}",
            4 * n + 1,
            f_values.len()
        )));
    }
    if f_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("f values must be finite"));
    }
    let start = -2 * n as i64;
    let diffs = forward_difference(f_values, k);
    let at = |m: i64| diffs[(m - start) as usize];
    let ni = n as i64;
    let min_diff = (-ni..=ni).map(at).fold(f64::INFINITY, f64::min);
    if !(min_diff > 0.0) {
        return Err(Error::invalid(format!("k-th difference not positive on [-N, N]: min {min_diff}")));
    }
    let edge = (0.9 * n as f64 + 1e-9).floor() as i64;
    let lhs = (-edge..=edge).map(at).sum::<f64>() / n as f64;
    let sup = f_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let target = factorial(k) / (n as f64).powi(k as i32);
    let implied_c = (lhs / (target * sup)).powf(1.0 / k as f64);
    let shift = k as f64 / 2.0;
    let (a, b) = (-(n as f64) + 1.0 + shift, n as f64 - 1.0 + shift);
    let smoothing_min = sampled_min(|x| smoothing_derivative(f_values, start, k, k, x), a, b, 4001);
    Ok(DiscreteReport {
        k,
        n,
        lhs,
        sup,
        implied_c,
        hypothesis_holds: lhs >= target,
        min_diff,
        smoothing_min,
        smoothing_positive: smoothing_min > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extrema_examples() {
        assert_eq!(extrema(1).unwrap().nodes, vec![-1.0, 1.0]);
        assert_eq!(extrema(2).unwrap().nodes, vec![-1.0, 0.0, 1.0]);
        let x4 = extrema(4).unwrap().nodes;
        let r = 0.5f64.sqrt();
        assert!((x4[1] + r).abs() < 1e-15 && (x4[3] - r).abs() < 1e-15);
        for k in 1..=30 {
            let nodes = extrema(k).unwrap().nodes;
            for (j, &x) in nodes.iter().enumerate() {
                let expect = ((k - j) as f64 * PI / k as f64).cos();
                assert!((x - expect).abs() < 1e-14);
                let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
                assert!((chebyshev_value(k, x).unwrap() - sign).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chebyshev_examples() {
        assert!((chebyshev_value(3, 0.5).unwrap() + 1.0).abs() < 1e-15);
        for k in 0..=50 {
            assert_eq!(chebyshev_value(k, 1.0).unwrap(), 1.0);
        }
        for i in 0..=20 {
            let x = -1.0 + 0.1 * i as f64;
            let x = x.clamp(-1.0, 1.0);
            assert!((chebyshev_value(2, x).unwrap() - (2.0 * x * x - 1.0)).abs() < 1e-15);
            for k in 0..12 {
                let direct = (k as f64 * x.acos()).cos();
                assert!((chebyshev_value(k, x).unwrap() - direct).abs() < 1e-12);
            }
        }
        assert!(chebyshev_value(2, 1.5).is_err());
    }

    #[test]
    fn divided_difference_examples() {
        let nodes = extrema(2).unwrap();
        let t = divided_difference(&nodes, &[1.0, 0.0, 1.0]).unwrap();
        assert!((t.leading - 1.0).abs() < 1e-15);
        assert_eq!(divided_difference(&nodes, &[3.0; 3]).unwrap().leading, 0.0);
        for k in 1..=12 {
            let nodes = extrema(k).unwrap();
            let c = monic_chebyshev_coeffs(k);
            let vals: Vec<f64> = nodes.nodes.iter().map(|&x| poly_eval(&c, x)).collect();
            let lead = divided_difference(&nodes, &vals).unwrap().leading;
            assert!((lead - 1.0).abs() < 1e-9, "k={k} lead={lead}");
        }
        assert!(divided_difference_on(&[0.0, 0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn monic_chebyshev_matches_recurrence() {
        for k in 1..=10 {
            let c = monic_chebyshev_coeffs(k);
            assert_eq!(*c.last().unwrap(), 1.0);
            for i in 0..=10 {
                let x = -1.0 + 0.2 * i as f64;
                let expect = 2f64.powi(1 - k as i32) * chebyshev_unchecked(k, x);
                assert!((poly_eval(&c, x) - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn min_norm_examples() {
        for k in 1..=10 {
            let r = min_norm_check(&monic_chebyshev_coeffs(k)).unwrap();
            assert!(r.pass);
            assert!((r.max_abs_at_extrema - r.bound).abs() < 1e-12);
            let mut xk = vec![0.0; k + 1];
            xk[k] = 1.0;
            let r = min_norm_check(&xk).unwrap();
            assert!(r.pass && (r.max_abs_at_extrema - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn hermite_genocchi_monomial() {
        let rng = RngSpec::new(3);
        for k in 1..=6 {
            let nodes = extrema(k).unwrap().nodes;
            let kf = factorial(k);
            let est = hermite_genocchi_mc(|_| kf, &nodes, 10_000, &rng).unwrap();
            assert!((est.estimate - 1.0).abs() < 1e-12);
            let zero = hermite_genocchi_mc(|_| 0.0, &nodes, 1000, &rng).unwrap();
            assert_eq!((zero.estimate, zero.se), (0.0, 0.0));
        }
    }

    #[test]
    fn simplex_density_k1_is_half() {
        let grid: Vec<f64> = (-9..=9).map(|i| i as f64 / 10.0).collect();
        let r = simplex_density_check(1, &grid, 100_000, &RngSpec::new(5)).unwrap();
        for (d, se) in r.density.iter().zip(&r.se) {
            assert!((d - 0.5).abs() <= 3.0 * se + 1e-3, "{d} {se}");
        }
        assert!(r.positive && r.within_budget);
    }

    #[test]
    fn bspline_examples() {
        assert_eq!(bspline_value(0, 0.0).unwrap(), 1.0);
        assert_eq!(bspline_value(0, 0.6).unwrap(), 0.0);
        assert!((bspline_value(1, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((bspline_value(2, 0.0).unwrap() - 0.75).abs() < 1e-15);
        assert!(bspline_value(21, 0.0).is_err());
        for k in 0..=20 {
            for i in 0..50 {
                let x = -3.0 + 0.123 * i as f64;
                let s: f64 = (-30..=30).map(|n| bspline_unchecked(k, x - n as f64)).sum();
                assert!((s - 1.0).abs() < 1e-12, "k={k} x={x} s={s}");
            }
        }
    }

    #[test]
    fn continuous_linear_is_exact() {
        let r = verify_continuous(|x| 2.0 * x, |_| 2.0, 1, 10.0).unwrap();
        assert!((r.lhs - 1.8).abs() < 1e-12);
        assert!((r.sup - 20.0).abs() < 1e-12);
        assert!((r.implied_c0 - 0.9).abs() < 1e-12);
        assert!(verify_continuous(|x| -x * x, |_| -2.0, 2, 10.0).is_err());
    }

    #[test]
    fn discrete_monomial_differences() {
        let n = 10usize;
        for k in 1..=5 {
            let vals: Vec<f64> = (-2 * n as i64..=2 * n as i64)
                .map(|m| (m as f64).powi(k as i32) / factorial(k))
                .collect();
            let d = forward_difference(&vals, k);
            assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-9));
            let r = verify_discrete(&vals, k, n).unwrap();
            assert!((r.lhs - 19.0 / 10.0).abs() < 1e-9);
            assert!(r.smoothing_positive);
        }
    }
}
