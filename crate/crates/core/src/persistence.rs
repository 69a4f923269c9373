//! Persistence probabilities `P(f > 0 on (0, N])` on integer and gridded
//! continuous time.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{correlation, min_eigenvalue, psd_factor, toeplitz, PSD_CLIP};
use crate::normal::{log_normal_cdf, log_normal_pdf, log_sum_exp, normal_ccdf, normal_quantile, normal_quantile_log};
use crate::quadrature::{integrate, QuadOptions};
use crate::rng::{batch_layout, purpose, RngSpec};
use crate::spectral::{Domain, SpectralMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactSmall,
    #[serde(rename = "orthant_mc")]
    OrthantMC,
    #[serde(rename = "path_mc")]
    PathMC,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ExactSmall => "exact_small",
            Method::OrthantMC => "orthant_mc",
            Method::PathMC => "path_mc",
        }
    }
}

/// Grid spacing of an estimate: the integers, or a continuous-time step.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GridStep {
    Step(f64),
    #[serde(deserialize_with = "integer_tag")]
    Integer,
}

fn integer_tag<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<(), D::Error> {
    let s = String::deserialize(d)?;
    if s == "integer" {
        Ok(())
    } else {
        Err(serde::de::Error::custom("expected \"integer\""))
    }
}

impl Serialize for GridStep {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GridStep::Integer => s.serialize_str("integer"),
            GridStep::Step(h) => s.serialize_f64(*h),
        }
    }
}

impl std::fmt::Display for GridStep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GridStep::Integer => write!(f, "integer"),
            GridStep::Step(h) => write!(f, "{h}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceEstimate {
    /// Natural log of the probability.
    pub log_p: f64,
    pub se_log: f64,
    pub method: Method,
    pub n_samples: u64,
    pub grid_step: GridStep,
    pub dim: usize,
    /// Set when `se_log > 1`, which includes weights collapsing onto one batch.
    pub low_confidence: bool,
}

impl PersistenceEstimate {
    pub fn p(&self) -> f64 {
        self.log_p.exp()
    }

    /// Standard error on the probability scale.
    pub fn se_p(&self) -> f64 {
        self.p() * self.se_log
    }
}

/// Orthant probability of a correlation matrix of size ≤ 7 as (value, error).
fn orthant_corr(r: &DMatrix<f64>, tol: f64) -> (f64, f64) {
    let d = r.nrows();
    match d {
        0 => (1.0, 0.0),
        1 => (0.5, 0.0),
        2 => (0.25 + r[(0, 1)].clamp(-1.0, 1.0).asin() / (2.0 * PI), 0.0),
        3 => {
            let s = r[(0, 1)].clamp(-1.0, 1.0).asin() + r[(0, 2)].clamp(-1.0, 1.0).asin() + r[(1, 2)].clamp(-1.0, 1.0).asin();
            (0.125 + s / (4.0 * PI), 0.0)
        }
        _ => plackett(r, tol),
    }
}

/// Plackett's reduction along `R(t) = (1−t)I + tR`:
/// `P(R) = 2^{−d} + ∫_0^1 Σ_{i<j} r_ij φ₂(0,0; t r_ij) P_{d−2}(R(t) | X_i = X_j = 0) dt`,
/// integrated in `t = 1 − s²` to absorb the endpoint singularity.
fn plackett(r: &DMatrix<f64>, tol: f64) -> (f64, f64) {
    let d = r.nrows();
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
        .filter(|&(i, j)| r[(i, j)] != 0.0)
        .collect();
    let inner_tol = tol / (4.0 * pairs.len().max(1) as f64);
    let err_acc = std::cell::Cell::new(0.0);
    let integrand = |s: f64| {
        let t = 1.0 - s * s;
        let mut total = 0.0;
        for &(i, j) in &pairs {
            let rij = r[(i, j)];
            let tr = t * rij;
            let root = ((1.0 - tr) * (1.0 + tr)).max(0.0).sqrt();
            if root == 0.0 {
                continue;
            }
            let (p, e) = conditional_orthant(r, t, i, j, inner_tol);
            err_acc.set(err_acc.get() + e);
            total += rij / (2.0 * PI * root) * p;
        }
        2.0 * s * total
    };
    let opts = QuadOptions {
        abs_tol: tol,
        rel_tol: 0.0,
        max_evals: 20_000,
    };
    let res = integrate(integrand, 0.0, 1.0, opts);
    let inner = err_acc.get() / res.evals.max(1) as f64;
    (0.5f64.powi(d as i32) + res.value, res.abs_err + inner)
}

fn conditional_orthant(r: &DMatrix<f64>, t: f64, i: usize, j: usize, tol: f64) -> (f64, f64) {
    let d = r.nrows();
    let rest: Vec<usize> = (0..d).filter(|&k| k != i && k != j).collect();
    let rt = |a: usize, b: usize| if a == b { 1.0 } else { t * r[(a, b)] };
    let c = rt(i, j);
    let det = 1.0 - c * c;
    let m = rest.len();
    let mut s = DMatrix::zeros(m, m);
    for (a, &ka) in rest.iter().enumerate() {
        for (b, &kb) in rest.iter().enumerate().skip(a) {
            let (ui, uj) = (rt(ka, i), rt(ka, j));
            let (vi, vj) = (rt(kb, i), rt(kb, j));
            let quad = (ui * vi - c * ui * vj - c * uj * vi + uj * vj) / det;
            let v = rt(ka, kb) - quad;
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    for a in 0..m {
        if !(s[(a, a)] > 1e-14) {
            return (0.0, 0.0);
        }
    }
    orthant_corr(&correlation(&s), tol)
}

fn check_sigma(sigma: &DMatrix<f64>) -> Result<()> {
    if sigma.nrows() != sigma.ncols() {
        return Err(Error::invalid("covariance matrix must be square"));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("covariance matrix has non-finite entries"));
    }
    Ok(())
}

fn finish(log_p: f64, se_log: f64, method: Method, n: u64, grid_step: GridStep, dim: usize) -> PersistenceEstimate {
    let log_p = log_p.min(0.0);
    PersistenceEstimate {
        log_p,
        se_log,
        method,
        n_samples: n,
        grid_step,
        dim,
        low_confidence: se_log > 1.0,
    }
}

/// Exact orthant probability for dimensions ≤ 7: arcsine formulas up to 3,
/// Plackett reduction with adaptive quadrature (absolute error 1e−8) above.
pub fn exact_orthant_small(sigma: &DMatrix<f64>) -> Result<PersistenceEstimate> {
    exact_orthant_small_on(sigma, GridStep::Integer)
}

fn exact_orthant_small_on(sigma: &DMatrix<f64>, grid_step: GridStep) -> Result<PersistenceEstimate> {
    check_sigma(sigma)?;
    let d = sigma.nrows();
    if d > 7 {
        return Err(Error::invalid(format!("exact orthant probabilities need dim <= 7, got {d}")));
    }
    let scale = (0..d).map(|i| sigma[(i, i)]).fold(0.0, f64::max).max(1.0);
    let min = min_eigenvalue(sigma);
    if min < -PSD_CLIP * scale {
        return Err(Error::CovarianceInvalid { min_eigenvalue: min });
    }
    if (0..d).any(|i| !(sigma[(i, i)] > 0.0)) {
        return Ok(finish(f64::NEG_INFINITY, 0.0, Method::ExactSmall, 0, grid_step, d));
    }
    let (p, err) = orthant_corr(&correlation(sigma), 1e-9);
    let p = p.clamp(0.0, 1.0);
    let se_log = if p > 0.0 { err / p } else { 0.0 };
    Ok(finish(p.ln(), se_log, Method::ExactSmall, 0, grid_step, d))
}

/// Sequential-conditioning plan: a pivoted Cholesky factor in Genz–Bretz
/// order, rows scaled to unit diagonal. The first `random` rows carry an
/// innovation; the rest are deterministic given them and act as constraints.
struct GenzPlan {
    /// Strictly lower part of the scaled factor (random rows) and the raw
    /// factor row (deterministic rows).
    l: DMatrix<f64>,
    random: usize,
    /// Exponential tilt of each random variable.
    mu: Vec<f64>,
}

fn genz_plan(sigma: &DMatrix<f64>) -> Result<GenzPlan> {
    let n = sigma.nrows();
    let scale = (0..n).map(|i| sigma[(i, i)]).fold(0.0, f64::max).max(1.0);
    let min = min_eigenvalue(sigma);
    if min < -PSD_CLIP * scale {
        return Err(Error::CovarianceInvalid { min_eigenvalue: min });
    }
    let mut a = sigma.clone();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut y = vec![0.0; n];
    let noise = 64.0 * n as f64 * f64::EPSILON;
    let mut random = n;
    for i in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for j in i..n {
            let mut v = a[(j, j)];
            let mut mean = 0.0;
            for k in 0..i {
                v -= l[(j, k)] * l[(j, k)];
                mean += l[(j, k)] * y[k];
            }
            if v > noise * a[(j, j)].max(1e-300) {
                let score = log_normal_cdf(-mean / v.sqrt());
                if best.is_none_or(|(_, s)| score < s) {
                    best = Some((j, score));
                }
            }
        }
        let Some((j, _)) = best else {
            random = i;
            break;
        };
        if j != i {
            a.swap_rows(i, j);
            a.swap_columns(i, j);
            l.swap_rows(i, j);
        }
        let mut v = a[(i, i)];
        for k in 0..i {
            v -= l[(i, k)] * l[(i, k)];
        }
        let d = v.sqrt();
        l[(i, i)] = d;
        for r in i + 1..n {
            let mut s = a[(r, i)];
            for k in 0..i {
                s -= l[(r, k)] * l[(i, k)];
            }
            l[(r, i)] = s / d;
        }
        let mut mean = 0.0;
        for k in 0..i {
            mean += l[(i, k)] * y[k];
        }
        let b = -mean / d;
        // E[Z | Z < b]
        y[i] = -(log_normal_pdf(b) - log_normal_cdf(b)).exp();
    }
    for i in 0..random {
        let d = l[(i, i)];
        for k in 0..i {
            l[(i, k)] /= d;
        }
        l[(i, i)] = 0.0;
    }
    let mu = tilt(&l.view((0, 0), (random, random)).into_owned(), &y[..random]).unwrap_or_else(|| vec![0.0; random]);
    Ok(GenzPlan { l, random, mu })
}

/// Gradient and Jacobian of the tilting objective
/// `ψ(x, μ) = Σ_k ½μ_k² − x_k μ_k + ln Φ(−μ_k − (Lx)_k)` in `(x, μ)`,
/// with the last coordinate of both pinned to 0.
fn tilt_system(lt: &DMatrix<f64>, y: &[f64], want_jac: bool) -> (DVector<f64>, Option<DMatrix<f64>>) {
    let m = lt.nrows();
    let q = m - 1;
    let mut x = DVector::zeros(m);
    let mut mu = DVector::zeros(m);
    for k in 0..q {
        x[k] = y[k];
        mu[k] = y[q + k];
    }
    let c = lt * &x;
    let ut: DVector<f64> = -&mu - c;
    let pu = ut.map(|u| (log_normal_pdf(u) - log_normal_cdf(u)).exp());
    let p = -&pu;
    let ltp = lt.transpose() * &p;
    let mut g = DVector::zeros(2 * q);
    for j in 0..q {
        g[j] = -mu[j] + ltp[j];
        g[q + j] = mu[j] - x[j] + p[j];
    }
    if !want_jac {
        return (g, None);
    }
    let dp = DVector::from_fn(m, |k, _| -p[k] * p[k] - ut[k] * pu[k]);
    let mut dl = lt.clone();
    for k in 0..m {
        for j in 0..m {
            dl[(k, j)] *= dp[k];
        }
    }
    let xx = lt.transpose() * &dl;
    let mut jac = DMatrix::zeros(2 * q, 2 * q);
    for r in 0..q {
        for cidx in 0..q {
            jac[(r, cidx)] = xx[(r, cidx)];
            let mx = dl[(r, cidx)] - if r == cidx { 1.0 } else { 0.0 };
            jac[(q + r, cidx)] = mx;
            jac[(cidx, q + r)] = mx;
        }
        jac[(q + r, q + r)] = 1.0 + dp[r];
    }
    (g, Some(jac))
}

/// Inverse Mills ratio of the lower tail, `φ(t)/Φ(t)`.
fn lower_mills(t: f64) -> f64 {
    (log_normal_pdf(t) - log_normal_cdf(t)).exp()
}

/// Minimizing tilt `μ` for a fixed `x`: the unique root of
/// `μ − x − φ(t)/Φ(t) = 0` with `t = −μ − c`. Requires `x + c < 0`.
fn inner_mu(x: f64, c: f64) -> f64 {
    let f = |mu: f64| mu - x - lower_mills(-mu - c);
    let (mut lo, mut hi) = (x, x + lower_mills(-x - c).max(1.0));
    while f(hi) < 0.0 {
        hi = x + 2.0 * (hi - x);
        if hi > 1e12 {
            return f64::NAN;
        }
    }
    let mut mu = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = f(mu);
        if v.abs() < 1e-14 * (1.0 + mu.abs()) {
            break;
        }
        if v < 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let t = -mu - c;
        let pu = lower_mills(t);
        let deriv = 1.0 - pu * (t + pu);
        let next = mu - v / deriv;
        mu = if deriv > 0.0 && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 * (1.0 + mu.abs()) {
            break;
        }
    }
    mu
}

/// Reduced objective `g(x) = min_μ ψ(x, μ)` with its optimal `μ`.
fn tilt_reduced(lt: &DMatrix<f64>, x: &DVector<f64>) -> Option<(f64, Vec<f64>)> {
    let m = lt.nrows();
    let c = lt * x;
    let mut mu = vec![0.0; m];
    let mut g = 0.0;
    for k in 0..m {
        if k + 1 < m {
            if x[k] + c[k] >= 0.0 {
                return None;
            }
            mu[k] = inner_mu(x[k], c[k]);
            if !mu[k].is_finite() {
                return None;
            }
        }
        g += 0.5 * mu[k] * mu[k] - x[k] * mu[k] + log_normal_cdf(-mu[k] - c[k]);
    }
    Some((g, mu))
}

/// Saddle point of the tilting objective. `μ` is eliminated exactly and the
/// concave reduced objective is maximized by damped Newton, from the
/// sequential conditional means and from the point with every slack at −1;
/// the better end point wins. `None` when neither start is usable; the
/// sampler then runs untilted.
fn tilt(lt: &DMatrix<f64>, means: &[f64]) -> Option<Vec<f64>> {
    let m = lt.nrows();
    if m < 2 {
        return Some(vec![0.0; m]);
    }
    let q = m - 1;
    let mut a = DVector::<f64>::zeros(m);
    let mut b = DVector::<f64>::zeros(m);
    for k in 0..q {
        a[k] = means[k];
        let mut c = 0.0;
        for j in 0..k {
            c += lt[(k, j)] * b[j];
        }
        b[k] = -1.0 - c;
    }
    [a, b]
        .into_iter()
        .filter_map(|x| tilt_from(lt, x))
        .max_by(|u, v| u.0.total_cmp(&v.0))
        .map(|(_, mu)| mu)
}

fn tilt_from(lt: &DMatrix<f64>, mut x: DVector<f64>) -> Option<(f64, Vec<f64>)> {
    let q = lt.nrows() - 1;
    let (mut g, mut mu) = tilt_reduced(lt, &x)?;
    let tol = 1e-9 * (1.0 + q as f64).sqrt();
    for _ in 0..500 {
        let mut y = x.as_slice()[..q].to_vec();
        y.extend_from_slice(&mu[..q]);
        let (full, jac) = tilt_system(lt, &y, true);
        let jac = jac?;
        let grad = full.rows(0, q).into_owned();
        if grad.norm() < tol {
            return Some((g, mu));
        }
        let xx = jac.view((0, 0), (q, q));
        let mx = jac.view((q, 0), (q, q));
        let mut h = -xx.into_owned();
        for r in 0..q {
            let dmu = jac[(q + r, q + r)];
            for i in 0..q {
                for j in 0..q {
                    h[(i, j)] += mx[(r, i)] * mx[(r, j)] / dmu;
                }
            }
        }
        let scale = (0..q).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut shift = 0.0;
        let step = loop {
            let mut hs = h.clone();
            for i in 0..q {
                hs[(i, i)] += shift;
            }
            if let Some(ch) = hs.cholesky() {
                break ch.solve(&grad);
            }
            shift = if shift == 0.0 { 1e-12 * scale } else { shift * 10.0 };
        };
        let slope = grad.dot(&step);
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha > 1e-12 {
            let mut trial = x.clone();
            for k in 0..q {
                trial[k] += alpha * step[k];
            }
            if let Some((gt, mt)) = tilt_reduced(lt, &trial) {
                if gt >= g + 1e-4 * alpha * slope {
                    if gt - g <= 1e-13 * g.abs().max(1.0) {
                        return Some((gt, mt));
                    }
                    x = trial;
                    g = gt;
                    mu = mt;
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            return Some((g, mu));
        }
    }
    Some((g, mu))
}

/// Draw from `N(0,1)` conditioned on `Z < b`.
fn truncated_below(b: f64, log_mass: f64, u: f64) -> f64 {
    if b <= 0.0 {
        normal_quantile_log(u.ln() + log_mass)
    } else {
        -normal_quantile(normal_ccdf(b) + log_mass.exp() * (1.0 - u))
    }
}

impl GenzPlan {
    /// Log-weight of one tilted sequential-conditioning draw for `P(X < 0)`.
    fn log_weight<R: Rng>(&self, rng: &mut R, z: &mut [f64]) -> f64 {
        let n = z.len();
        let m = self.random;
        let mut lw = 0.0;
        for i in 0..m {
            let mut s = 0.0;
            for k in 0..i {
                s += self.l[(i, k)] * z[k];
            }
            let mu = self.mu[i];
            let b = -s - mu;
            let le = log_normal_cdf(b);
            lw += le;
            if i + 1 == m && m == n {
                break;
            }
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let e = truncated_below(b, le, u);
            z[i] = mu + e;
            lw += 0.5 * mu * mu - mu * z[i];
        }
        for i in m..n {
            let mut s = 0.0;
            for k in 0..m {
                s += self.l[(i, k)] * z[k];
            }
            if s >= 0.0 {
                return f64::NEG_INFINITY;
            }
        }
        lw
    }
}

/// Relative rounding floor of a log-weight accumulated over `dim` factors.
fn rounding_floor(dim: usize, log_p: f64) -> f64 {
    4.0 * dim as f64 * f64::EPSILON * log_p.abs().max(1.0)
}

/// Combines per-batch log means into `(log p̂, se_log)`.
/// Pooled log-mean, relative standard error and effective number of batches.
fn combine_batches(batch_logs: &[f64]) -> (f64, f64, f64) {
    let b = batch_logs.len() as f64;
    let log_p = log_sum_exp(batch_logs) - b.ln();
    if log_p == f64::NEG_INFINITY {
        return (log_p, 0.0, 0.0);
    }
    let ratios: Vec<f64> = batch_logs.iter().map(|v| (v - log_p).exp()).collect();
    let (_, se) = crate::stats::batch_means(&ratios);
    let ess = b * b / ratios.iter().map(|r| r * r).sum::<f64>();
    (log_p, se, ess)
}

/// Genz sequential-conditioning estimate of `P(X > 0)` for `X ~ N(0, Σ)`,
/// carried in log space with batch-means standard errors.
pub fn genz_orthant(sigma: &DMatrix<f64>, n_samples: usize, rng: &RngSpec) -> Result<PersistenceEstimate> {
    genz_orthant_on(sigma, n_samples, rng, GridStep::Integer)
}

fn genz_orthant_on(sigma: &DMatrix<f64>, n_samples: usize, rng: &RngSpec, grid_step: GridStep) -> Result<PersistenceEstimate> {
    check_sigma(sigma)?;
    let d = sigma.nrows();
    if d == 0 {
        return Ok(finish(0.0, 0.0, Method::OrthantMC, 0, grid_step, 0));
    }
    // P(X > 0) = P(X < 0) by symmetry; the plan samples the lower orthant.
    let plan = genz_plan(sigma)?;
    let (batches, per) = batch_layout(n_samples, rng);
    let batch_logs: Vec<f64> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut r = rng.stream(purpose::ORTHANT, b as u64);
            let mut z = vec![0.0; d];
            let lws: Vec<f64> = (0..per).map(|_| plan.log_weight(&mut r, &mut z)).collect();
            log_sum_exp(&lws) - (per as f64).ln()
        })
        .collect();
    let (log_p, se, ess) = combine_batches(&batch_logs);
    let mut se_log = se.max(rounding_floor(d, log_p));
    if log_p.is_finite() && ess < 2.0 {
        // One batch carries the estimate; batch means say nothing about its error.
        se_log = f64::INFINITY;
    }
    let est = finish(log_p, se_log, Method::OrthantMC, (batches * per) as u64, grid_step, d);
    Ok(est)
}

/// Naive estimate: fraction of exactly sampled paths that stay positive.
pub fn path_mc(sigma: &DMatrix<f64>, n_samples: usize, rng: &RngSpec) -> Result<PersistenceEstimate> {
    path_mc_on(sigma, n_samples, rng, GridStep::Integer)
}

fn path_mc_on(sigma: &DMatrix<f64>, n_samples: usize, rng: &RngSpec, grid_step: GridStep) -> Result<PersistenceEstimate> {
    check_sigma(sigma)?;
    let d = sigma.nrows();
    let factor = psd_factor(sigma)?;
    let (batches, per) = batch_layout(n_samples, rng);
    let hits: u64 = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut r = rng.stream(purpose::PATHS, b as u64);
            let mut count = 0u64;
            for _ in 0..per {
                let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut r));
                if (&factor.l * z).iter().all(|&v| v > 0.0) {
                    count += 1;
                }
            }
            count
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let n = (batches * per) as u64;
    let p = hits as f64 / n as f64;
    let (log_p, se_log) = if hits == 0 {
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        (p.ln(), ((1.0 - p) / (p * n as f64)).sqrt())
    };
    Ok(finish(log_p, se_log, Method::PathMC, n, grid_step, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    /// Exact for dimensions ≤ 7, orthant Monte Carlo above.
    Auto,
    Exact,
    Orthant,
    Path,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub method: MethodChoice,
    pub n_samples: usize,
    /// Largest dimension handed to the orthant estimator.
    pub orthant_cap: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            method: MethodChoice::Auto,
            n_samples: 100_000,
            orthant_cap: 512,
        }
    }
}

impl EstimateOptions {
    pub fn with_samples(n_samples: usize) -> Self {
        EstimateOptions {
            n_samples,
            ..Default::default()
        }
    }
}

fn estimate_from_row(row: &[f64], opts: &EstimateOptions, rng: &RngSpec, grid_step: GridStep) -> Result<PersistenceEstimate> {
    let d = row.len();
    let sigma = toeplitz(row);
    match opts.method {
        MethodChoice::Auto if d <= 7 => exact_orthant_small_on(&sigma, grid_step),
        MethodChoice::Exact => exact_orthant_small_on(&sigma, grid_step),
        MethodChoice::Auto | MethodChoice::Orthant => {
            if d > opts.orthant_cap {
                return Err(Error::invalid(format!(
                    "dimension {d} exceeds the orthant cap {}",
                    opts.orthant_cap
                )));
            }
            genz_orthant_on(&sigma, opts.n_samples, rng, grid_step)
        }
        MethodChoice::Path => {
            if d > 2000 {
                return Err(Error::invalid("path Monte Carlo is limited to 2000 points"));
            }
            path_mc_on(&sigma, opts.n_samples, rng, grid_step)
        }
    }
}

/// Persistence on `{1, …, N}` over the integers.
pub fn persistence_integer(rho: &SpectralMeasure, n: usize, n_samples: usize, rng: &RngSpec) -> Result<PersistenceEstimate> {
    persistence_integer_with(rho, n, &EstimateOptions::with_samples(n_samples), rng)
}

pub fn persistence_integer_with(rho: &SpectralMeasure, n: usize, opts: &EstimateOptions, rng: &RngSpec) -> Result<PersistenceEstimate> {
    if rho.domain() != Domain::IntegerTime {
        return Err(Error::invalid("integer persistence needs an integer-time measure"));
    }
    if n == 0 {
        return Err(Error::invalid("N must be >= 1"));
    }
    estimate_from_row(&rho.covariance_row(1.0, n), opts, rng, GridStep::Integer)
}

/// Number of grid points `h, 2h, …` inside `(0, N]` (at least one).
pub fn grid_points(n: f64, h: f64) -> usize {
    ((n / h + 1e-9).floor() as usize).max(1)
}

/// Persistence of the grid restriction `{h, 2h, …} ∩ (0, N]`. Grid events are
/// necessary for continuous persistence, so this over-estimates it.
pub fn persistence_continuous(rho: &SpectralMeasure, n: f64, h: f64, n_samples: usize, rng: &RngSpec) -> Result<PersistenceEstimate> {
    persistence_continuous_with(rho, n, h, &EstimateOptions::with_samples(n_samples), rng)
}

pub fn persistence_continuous_with(rho: &SpectralMeasure, n: f64, h: f64, opts: &EstimateOptions, rng: &RngSpec) -> Result<PersistenceEstimate> {
    if rho.domain() != Domain::ContinuousTime {
        return Err(Error::invalid("continuous persistence needs a continuous-time measure"));
    }
    if !(n > 0.0 && h > 0.0 && n.is_finite() && h.is_finite()) {
        return Err(Error::invalid("N and h must be positive"));
    }
    let m = grid_points(n, h);
    estimate_from_row(&rho.covariance_row(h, m), opts, rng, GridStep::Step(h))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    #[serde(rename = "N")]
    pub n: f64,
    pub estimate: Option<PersistenceEstimate>,
    /// Why the point is missing, when it is.
    pub error: Option<String>,
}

/// One estimate per `N`. A failing point leaves a gap and the curve goes on.
/// Each point draws from a stream derived from its own `N`, so a point does
/// not depend on the rest of the list.
pub fn persistence_curve(
    rho: &SpectralMeasure,
    n_list: &[f64],
    h: Option<f64>,
    opts: &EstimateOptions,
    rng: &RngSpec,
) -> Result<Vec<CurvePoint>> {
    if n_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("N list must be strictly increasing"));
    }
    if rho.domain() == Domain::ContinuousTime && h.is_none() {
        return Err(Error::invalid("continuous-time curves need a grid step h"));
    }
    let (step, grid_step) = match rho.domain() {
        Domain::IntegerTime => (1.0, GridStep::Integer),
        Domain::ContinuousTime => (h.unwrap(), GridStep::Step(h.unwrap())),
    };
    let dims: Vec<usize> = n_list
        .iter()
        .map(|&n| match rho.domain() {
            Domain::IntegerTime => n.round().max(0.0) as usize,
            Domain::ContinuousTime => grid_points(n, step),
        })
        .collect();
    let max_dim = dims.iter().cloned().max().unwrap_or(0).min(opts.orthant_cap.max(2000));
    let row = rho.covariance_row(step, max_dim);
    Ok(n_list
        .iter()
        .zip(&dims)
        .map(|(&n, &d)| {
            let result = if rho.domain() == Domain::IntegerTime && (n.fract() != 0.0 || n < 1.0) {
                Err(Error::invalid(format!("N = {n} is not a positive integer")))
            } else if d > row.len() {
                Err(Error::invalid(format!("dimension {d} is out of range")))
            } else {
                estimate_from_row(&row[..d], opts, &rng.fork(n.to_bits()), grid_step)
            };
            match result {
                Ok(e) => CurvePoint {
                    n,
                    estimate: Some(e),
                    error: None,
                },
                Err(e) => CurvePoint {
                    n,
                    estimate: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// CSV with columns `N, log_p, se_log, method, grid_step, n_samples, seed`;
/// gaps leave the estimate columns empty.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], seed: u64, mut out: W) -> io::Result<()> {
    writeln!(out, "N,log_p,se_log,method,grid_step,n_samples,seed")?;
    for p in points {
        match &p.estimate {
            Some(e) => writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.n,
                e.log_p,
                e.se_log,
                e.method.as_str(),
                e.grid_step,
                e.n_samples,
                seed
            )?,
            None => writeln!(out, "{},,,gap,,,{}", p.n, seed)?,
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementTable {
    pub n: f64,
    /// `(h, estimate)` from the coarsest to the finest step.
    pub rows: Vec<(f64, PersistenceEstimate)>,
    /// Two-point Richardson extrapolation to `h = 0`, assuming error linear in `h`.
    pub extrapolated: Option<f64>,
    /// Least-squares slope of `log_p` against `h`.
    pub slope: Option<f64>,
}

pub fn grid_refinement_study(
    rho: &SpectralMeasure,
    n: f64,
    h_list: &[f64],
    opts: &EstimateOptions,
    rng: &RngSpec,
) -> Result<RefinementTable> {
    if h_list.is_empty() {
        return Err(Error::invalid("need at least one step"));
    }
    let mut hs = h_list.to_vec();
    hs.sort_by(|a, b| b.total_cmp(a));
    hs.dedup();
    let rows = hs
        .iter()
        .map(|&h| Ok((h, persistence_continuous_with(rho, n, h, opts, &rng.fork(h.to_bits()))?)))
        .collect::<Result<Vec<_>>>()?;
    let mut extrapolated = None;
    let mut slope = None;
    if rows.len() >= 2 {
        let (h1, e1) = &rows[rows.len() - 1];
        let (h2, e2) = &rows[rows.len() - 2];
        if e1.log_p.is_finite() && e2.log_p.is_finite() {
            extrapolated = Some(e1.log_p + (e1.log_p - e2.log_p) * h1 / (h2 - h1));
        }
        let finite: Vec<&(f64, PersistenceEstimate)> = rows.iter().filter(|(_, e)| e.log_p.is_finite()).collect();
        if finite.len() >= 2 {
            let x: Vec<f64> = finite.iter().map(|r| r.0).collect();
            let y: Vec<f64> = finite.iter().map(|r| r.1.log_p).collect();
            slope = Some(crate::stats::linear_fit(&x, &y).0);
        }
    }
    Ok(RefinementTable {
        n,
        rows,
        extrapolated,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::catalog;

    fn equi(d: usize, rho: f64) -> DMatrix<f64> {
        DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho })
    }

    #[test]
    fn small_closed_forms() {
        assert_eq!(exact_orthant_small(&equi(1, 0.0)).unwrap().p(), 0.5);
        assert!((exact_orthant_small(&equi(2, 0.0)).unwrap().p() - 0.25).abs() < 1e-16);
        assert!((exact_orthant_small(&equi(3, 0.5)).unwrap().p() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn plackett_matches_equicorrelated_oracle() {
        // X_i = √ρ W + √(1−ρ) Z_i gives P = ∫ φ(w) Φ(w √(ρ/(1−ρ)))^d dw
        for d in 4..=7 {
            for &rho in &[0.0, 0.3, 0.5, 0.8] {
                let a = (rho / (1.0 - rho) as f64).sqrt();
                let oracle = integrate(
                    |w: f64| crate::normal::normal_pdf(w) * crate::normal::normal_cdf(a * w).powi(d as i32),
                    -12.0,
                    12.0,
                    QuadOptions::default(),
                )
                .value;
                let got = exact_orthant_small(&equi(d, rho)).unwrap().p();
                assert!((got - oracle).abs() < 1e-8, "d={d} rho={rho}: {got} vs {oracle}");
            }
        }
    }

    #[test]
    fn alternating_process_never_persists() {
        let alt = catalog::atoms(&[(PI, 1.0)], Domain::IntegerTime).unwrap();
        let e = persistence_integer(&alt, 2, 1000, &RngSpec::new(1)).unwrap();
        assert!(e.p() < 1e-12);
    }

    #[test]
    fn genz_independence_is_exact() {
        let e = genz_orthant(&DMatrix::identity(10, 10), 1000, &RngSpec::new(5)).unwrap();
        assert!((e.log_p + 10.0 * 2f64.ln()).abs() <= 3.0 * e.se_log + 1e-13);
    }

    #[test]
    fn genz_handles_degenerate_rows() {
        // X_2 = −X_1: the orthant is empty
        let m = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let e = genz_orthant(&m, 1000, &RngSpec::new(1)).unwrap();
        assert_eq!(e.log_p, f64::NEG_INFINITY);
        // X_2 = X_1: reduces to the bivariate case
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.5, 1.0, 1.0, 0.5, 0.5, 0.5, 1.0]);
        let e = genz_orthant(&m, 20_000, &RngSpec::new(1)).unwrap();
        let exact = 0.25 + 0.5f64.asin() / (2.0 * PI);
        assert!((e.p() - exact).abs() <= 3.0 * e.se_p() + 1e-12, "{} {exact}", e.p());
    }

    #[test]
    fn grid_counts() {
        assert_eq!(grid_points(1.0, 0.5), 2);
        assert_eq!(grid_points(1.0, 2.0), 1);
        assert_eq!(grid_points(PI, PI / 10.0), 10);
    }

    #[test]
    fn grid_step_serializes_both_ways() {
        assert_eq!(serde_json::to_string(&GridStep::Integer).unwrap(), "\"integer\"");
        let back: GridStep = serde_json::from_str("\"integer\"").unwrap();
        assert_eq!(back, GridStep::Integer);
        let back: GridStep = serde_json::from_str("0.25").unwrap();
        assert_eq!(back, GridStep::Step(0.25));
    }
}
