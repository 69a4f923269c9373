//! Numerical checks of the Gaussian inequalities used by the bounds: tail and
//! ball estimates, Khatri–Sidak, Anderson, Borell–TIS, Dudley-type sup bounds,
//! the anti-derivative variance identity and two averaging arguments.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::normal::{log_normal_ccdf, log_normal_cdf, normal_cdf, normal_pdf, normal_quantile, normal_quantile_log, prob_abs_below};
use crate::quadrature::{integrate, integrate_power_at_zero, integrate_with_breaks, Integral, QuadOptions};
use crate::rng::{batch_layout, purpose, RngSpec};
use crate::sampler::{cov_matrix, sample_circulant_kernel, PathGrid};
use crate::spectral::{Domain, SpectralMeasure};
use crate::stats::{batch_means, linear_fit, Welford};

/// Slack for deterministic checks.
pub const EXACT_SLACK: f64 = 1e-12;
/// Standard errors of slack for stochastic checks.
pub const SE_SLACK: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub grid_or_samples: String,
    /// Worst-case slack; negative means the inequality was violated there.
    pub margin: f64,
    pub pass: bool,
    pub se: Option<f64>,
}

impl CheckReport {
    pub fn deterministic(name: &str, grid: impl Into<String>, margin: f64) -> Self {
        CheckReport {
            name: name.to_string(),
            grid_or_samples: grid.into(),
            margin,
            pass: margin >= -EXACT_SLACK,
            se: None,
        }
    }

    pub fn stochastic(name: &str, samples: impl Into<String>, margin: f64, se: f64) -> Self {
        CheckReport {
            name: name.to_string(),
            grid_or_samples: samples.into(),
            margin,
            pass: margin >= -SE_SLACK * se,
            se: Some(se),
        }
    }
}

fn check_finite_positive(x: f64, what: &str) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::invalid(format!("{what} must be positive and finite, got {x}")));
    }
    Ok(())
}

/// Tail and small-ball sandwiches for a standard normal `Z`:
/// `(1/x − 1/x³)φ(x) ≤ P(Z > x) ≤ φ(x)/x`, with `e^{−x²} ≤ P(Z > x) ≤ e^{−x²/2}`
/// for `x ≥ 2`, and `√(2/π)·x·e^{−x²/2} ≤ P(|Z| ≤ x) ≤ x`, with
/// `x/4 ≤ P(|Z| ≤ x)` for `x ≤ 1`. Tail margins are in log scale, ball
/// margins relative.
pub fn tail_bounds_check(x_grid: &[f64]) -> Result<CheckReport> {
    if x_grid.is_empty() {
        return Err(Error::invalid("empty grid"));
    }
    let mut margin = f64::INFINITY;
    for &x in x_grid {
        check_finite_positive(x, "grid point")?;
        let lt = log_normal_ccdf(x);
        let log_phi = -0.5 * x * x - 0.5 * (2.0 * PI).ln();
        margin = margin.min(log_phi - x.ln() - lt);
        if x > 1.0 {
            margin = margin.min(lt - (log_phi + (1.0 / x - 1.0 / (x * x * x)).ln()));
        }
        if x >= 2.0 {
            margin = margin.min(lt + x * x).min(-0.5 * x * x - lt);
        }
        let ball = prob_abs_below(x);
        margin = margin.min((x - ball) / x);
        margin = margin.min((ball - (2.0 / PI).sqrt() * x * (-0.5 * x * x).exp()) / ball);
        if x <= 1.0 {
            margin = margin.min((ball - 0.25 * x) / ball);
        }
    }
    let lo = x_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x_grid.iter().copied().fold(0.0, f64::max);
    Ok(CheckReport::deterministic(
        "tail_bounds",
        format!("{} points in [{lo}, {hi}]", x_grid.len()),
        margin,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    pub delta: f64,
    pub theta: f64,
    pub grid_points: usize,
    /// Smallest log-scale slack of `P(Z > x) ≥ P(|Z| > θx)` on a grid ten
    /// times finer than the one used to find `θ`.
    pub fine_margin: f64,
    pub verified: bool,
}

fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Smallest `θ` (to `1e−6`, rounded up) with `P(Z ≤ x) ≤ P(|Z| ≤ θx)` on a
/// log-spaced grid of `[δ, 50]`, then checked on a grid ten times finer.
pub fn tails_comp_theta(delta: f64) -> Result<ThetaReport> {
    check_finite_positive(delta, "delta")?;
    const UPPER: f64 = 50.0;
    const POINTS: usize = 2000;
    let hi = UPPER.max(delta);
    // θ*(x) solves 2 P(Z > θx) = P(Z > x)
    let theta_at = |x: f64| -normal_quantile_log(log_normal_ccdf(x) - LN_2) / x;
    let coarse = log_grid(delta, hi, POINTS);
    let exact = coarse.iter().map(|&x| theta_at(x)).fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut up = exact.max(1.0) * 2.0;
    let holds = |t: f64| coarse.iter().all(|&x| log_normal_ccdf(x) >= LN_2 + log_normal_ccdf(t * x));
    while up - lo > 1e-6 {
        let mid = 0.5 * (lo + up);
        if holds(mid) {
            up = mid;
        } else {
            lo = mid;
        }
    }
    let theta = (up * 1e6).ceil() / 1e6;
    let fine_margin = log_grid(delta, hi, 10 * POINTS)
        .iter()
        .map(|&x| log_normal_ccdf(x) - LN_2 - log_normal_ccdf(theta * x))
        .fold(f64::INFINITY, f64::min);
    Ok(ThetaReport {
        delta,
        theta,
        grid_points: POINTS,
        fine_margin,
        verified: fine_margin >= -EXACT_SLACK,
    })
}

/// Lower-triangular factor of a positive semidefinite matrix with zero
/// columns at vanishing pivots.
pub fn semidefinite_cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::invalid("covariance must be square"));
    }
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
    let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let d = m[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
        if d < -1e-8 * scale {
            return Err(Error::CovarianceInvalid { min_eigenvalue: d });
        }
        if d <= tol {
            continue;
        }
        let p = d.sqrt();
        l[(j, j)] = p;
        for i in j + 1..n {
            let s = m[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
            l[(i, j)] = s / p;
        }
    }
    Ok(l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxEstimate {
    pub p: f64,
    pub se: f64,
    pub samples: u64,
}

/// `P(|X_j| ≤ ℓ ∀j)` for `X ~ N(0, LLᵀ)` by separation of variables with
/// plain uniform draws.
fn genz_box(l: &DMatrix<f64>, ell: f64, n_samples: usize, rng: &RngSpec) -> BoxEstimate {
    let n = l.nrows();
    let (batches, per) = batch_layout(n_samples, rng);
    let means: Vec<f64> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut r = rng.stream(purpose::CHECK, b as u64);
            let mut y = vec![0.0; n];
            let mut sum = 0.0;
            for _ in 0..per {
                let mut w = 1.0;
                for i in 0..n {
                    let u: f64 = r.random();
                    let s: f64 = (0..i).map(|j| l[(i, j)] * y[j]).sum();
                    let p = l[(i, i)];
                    if p == 0.0 {
                        if s.abs() > ell {
                            w = 0.0;
                            break;
                        }
                        y[i] = 0.0;
                        continue;
                    }
                    let d = normal_cdf((-ell - s) / p);
                    let e = normal_cdf((ell - s) / p);
                    if e <= d {
                        w = 0.0;
                        break;
                    }
                    w *= e - d;
                    y[i] = normal_quantile(d + u * (e - d)).clamp(-40.0, 40.0);
                }
                sum += w;
            }
            sum / per as f64
        })
        .collect();
    let (p, se) = batch_means(&means);
    BoxEstimate {
        p,
        se,
        samples: (batches * per) as u64,
    }
}

const EXACT_QUAD: QuadOptions = QuadOptions {
    abs_tol: 1e-15,
    rel_tol: 1e-13,
    max_evals: 20_000,
};

/// `P(lo ≤ X ≤ hi)` for `X ~ N(mean, Σ)` of dimension at most 3 by nested
/// quadrature over the first coordinate.
fn box_exact(sigma: &DMatrix<f64>, mean: &DVector<f64>, lo: f64, hi: f64) -> f64 {
    let n = sigma.nrows();
    let s1 = sigma[(0, 0)].sqrt();
    if n == 1 {
        return normal_cdf((hi - mean[0]) / s1) - normal_cdf((lo - mean[0]) / s1);
    }
    let rest = sigma.view((1, 1), (n - 1, n - 1)).into_owned();
    let c: DVector<f64> = sigma.view((1, 0), (n - 1, 1)).column(0).into_owned();
    let cond = &rest - &c * c.transpose() / sigma[(0, 0)];
    let inner = |x: f64| {
        let m = mean.rows(1, n - 1).into_owned() + &c * ((x - mean[0]) / sigma[(0, 0)]);
        normal_pdf((x - mean[0]) / s1) / s1 * box_exact(&cond, &m, lo, hi)
    };
    integrate(inner, lo, hi, EXACT_QUAD).value
}

fn validate_cov(sigma: &DMatrix<f64>) -> Result<()> {
    if sigma.nrows() == 0 || sigma.nrows() != sigma.ncols() {
        return Err(Error::invalid("covariance must be square and nonempty"));
    }
    if sigma.iter().any(|v| !v.is_finite()) || (sigma - sigma.transpose()).abs().max() > 1e-12 * sigma.abs().max() {
        return Err(Error::invalid("covariance must be finite and symmetric"));
    }
    Ok(())
}

/// `P(|Z_j| ≤ ℓ ∀j) ≥ Π_j P(|Z_j| ≤ ℓ)`. The left side is exact by nested
/// quadrature up to dimension 3, Monte Carlo up to dimension 8.
pub fn khatri_sidak_check(sigma: &DMatrix<f64>, ell: f64, n_samples: usize, rng: &RngSpec) -> Result<CheckReport> {
    validate_cov(sigma)?;
    check_finite_positive(ell, "ell")?;
    let n = sigma.nrows();
    if n > 8 {
        return Err(Error::invalid(format!("dimension {n} exceeds 8")));
    }
    if sigma.clone().cholesky().is_none() {
        return Err(Error::CovarianceInvalid {
            min_eigenvalue: crate::linalg::min_eigenvalue(sigma),
        });
    }
    let rhs: f64 = (0..n).map(|i| prob_abs_below(ell / sigma[(i, i)].sqrt())).product();
    if n <= 3 {
        let lhs = box_exact(sigma, &DVector::zeros(n), -ell, ell);
        return Ok(CheckReport::deterministic(
            "khatri_sidak",
            format!("dim {n}, nested quadrature"),
            lhs - rhs,
        ));
    }
    let l = semidefinite_cholesky(sigma)?;
    let est = genz_box(&l, ell, n_samples, &rng.fork(purpose::CHECK));
    Ok(CheckReport::stochastic(
        "khatri_sidak",
        format!("dim {n}, {} samples", est.samples),
        est.p - rhs,
        est.se,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AndersonReport {
    pub report: CheckReport,
    /// `P(sup|X ⊕ Y| ≤ ℓ)`
    pub sum: BoxEstimate,
    /// `P(sup|X| ≤ ℓ)`
    pub single: BoxEstimate,
}

/// `P(sup|X ⊕ Y| ≤ ℓ) ≤ P(sup|X| ≤ ℓ)` on covariance matrices. Both sides use
/// the same uniform draws.
pub fn anderson_check_cov(sx: &DMatrix<f64>, sy: &DMatrix<f64>, ell: f64, n_samples: usize, rng: &RngSpec) -> Result<AndersonReport> {
    validate_cov(sx)?;
    validate_cov(sy)?;
    check_finite_positive(ell, "ell")?;
    if sx.shape() != sy.shape() {
        return Err(Error::invalid("covariances differ in size"));
    }
    if sx.nrows() > 64 {
        return Err(Error::invalid("grids are limited to 64 points"));
    }
    let spec = rng.fork(purpose::CHECK);
    let single = genz_box(&semidefinite_cholesky(sx)?, ell, n_samples, &spec);
    let sum = genz_box(&semidefinite_cholesky(&(sx + sy))?, ell, n_samples, &spec);
    let se = single.se.hypot(sum.se);
    Ok(AndersonReport {
        report: CheckReport::stochastic(
            "anderson",
            format!("dim {}, {} samples per side", sx.nrows(), single.samples),
            single.p - sum.p,
            se,
        ),
        sum,
        single,
    })
}

pub fn anderson_check(
    rho_x: &SpectralMeasure,
    rho_y: &SpectralMeasure,
    grid: &PathGrid,
    ell: f64,
    n_samples: usize,
    rng: &RngSpec,
) -> Result<AndersonReport> {
    anderson_check_cov(&cov_matrix(rho_x, grid)?, &cov_matrix(rho_y, grid)?, ell, n_samples, rng)
}

/// Grid on `[0, N]` for path functionals: the integers `0..=N` over ℤ and
/// `count` equispaced points over ℝ.
fn path_grid(rho: &SpectralMeasure, n: f64, count: usize) -> Result<PathGrid> {
    match rho.domain() {
        Domain::IntegerTime => {
            if n.fract() != 0.0 {
                return Err(Error::invalid("integer-time horizons must be whole numbers"));
            }
            Ok(PathGrid::integer(0, n as usize + 1))
        }
        Domain::ContinuousTime => PathGrid::continuous(0.0, n / (count - 1) as f64, count),
    }
}

fn sample_rows(rho: &SpectralMeasure, grid: &PathGrid, n_paths: usize, rng: &RngSpec) -> Result<Vec<Vec<f64>>> {
    let kernel = |t: f64| rho.covariance(t);
    Ok(sample_circulant_kernel(&kernel, grid, n_paths, &rng.fork(purpose::CHECK))?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorellRow {
    pub u: f64,
    pub frequency: f64,
    pub bound: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorellReport {
    pub report: CheckReport,
    pub mean_sup: f64,
    pub mean_sup_se: f64,
    pub sigma_i: f64,
    pub rows: Vec<BorellRow>,
}

/// `P(sup X − E sup X > u) ≤ exp(−u²/(2σ_I))` on the grid restriction of the
/// process to `[0, N]` (at most 256 points).
pub fn borell_tis_check(rho: &SpectralMeasure, n: f64, u_grid: &[f64], n_samples: usize, rng: &RngSpec) -> Result<BorellReport> {
    check_finite_positive(n, "N")?;
    if u_grid.is_empty() || u_grid.iter().any(|u| !(*u > 0.0)) {
        return Err(Error::invalid("u grid must be nonempty and positive"));
    }
    if n_samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let count = ((16.0 * n).ceil() as usize + 1).min(256);
    let grid = path_grid(rho, n, count)?;
    if grid.count > 256 {
        return Err(Error::invalid("grid restriction exceeds 256 points"));
    }
    let sups: Vec<f64> = sample_rows(rho, &grid, n_samples, rng)?
        .iter()
        .map(|p| p.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let w: Welford = sups.iter().copied().collect();
    let sigma_i = rho.covariance(0.0);
    let m = sups.len() as f64;
    let rows: Vec<BorellRow> = u_grid
        .iter()
        .map(|&u| {
            let freq = sups.iter().filter(|&&s| s - w.mean > u).count() as f64 / m;
            let bound = (-u * u / (2.0 * sigma_i)).exp().min(1.0);
            let p = freq.max(bound).min(1.0);
            BorellRow {
                u,
                frequency: freq,
                bound,
                se: (p * (1.0 - p) / m).sqrt().max(1.0 / m),
            }
        })
        .collect();
    let worst = rows
        .iter()
        .min_by(|a, b| ((a.bound - a.frequency) / a.se).total_cmp(&((b.bound - b.frequency) / b.se)))
        .expect("nonempty grid");
    Ok(BorellReport {
        report: CheckReport::stochastic(
            "borell_tis",
            format!("{} points, {} paths", grid.count, sups.len()),
            worst.bound - worst.frequency,
            worst.se,
        ),
        mean_sup: w.mean,
        mean_sup_se: w.std_err(),
        sigma_i,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DudleyReport {
    pub n: f64,
    pub empirical_e_sup: f64,
    pub se: f64,
    /// `√(m₀·max{log(aN), 1})` with `a = √(m₂/(4m₀))`
    pub bound_shape: f64,
    pub implied_k: f64,
    pub grid_step: f64,
}

/// Monte Carlo `E sup_{[0,N]} f` against the entropy bound shape.
pub fn dudley_sup_stationary(rho: &SpectralMeasure, n: f64, n_samples: usize, rng: &RngSpec) -> Result<DudleyReport> {
    check_finite_positive(n, "N")?;
    let m2 = rho
        .moment(2.0)
        .finite()
        .ok_or_else(|| Error::inapplicable("m_2 is infinite"))?;
    let m0 = rho.total_mass();
    let h = 0.25 * if m2 > 0.0 { 1f64.min(1.0 / m2.sqrt()) } else { 1.0 };
    let count = (n / h).ceil() as usize + 1;
    let grid = path_grid(rho, n, count)?;
    let sups: Vec<f64> = sample_rows(rho, &grid, n_samples, rng)?
        .iter()
        .map(|p| p.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let w: Welford = sups.iter().copied().collect();
    let a = (m2 / (4.0 * m0)).sqrt();
    let shape = (m0 * (a * n).ln().max(1.0)).sqrt();
    Ok(DudleyReport {
        n,
        empirical_e_sup: w.mean,
        se: w.std_err(),
        bound_shape: shape,
        implied_k: w.mean / shape,
        grid_step: grid.step,
    })
}

/// Smallest `b` with `ρ([0, λ]) ≤ b·λ^γ` on a log-dense grid of `(0, ∞)`.
pub fn ibp_constant(rho: &SpectralMeasure, gamma: f64) -> f64 {
    let mut pts = log_grid(1e-6, 1e6, 1201);
    for s in rho.segments() {
        pts.extend([s.a, s.b].iter().filter(|x| x.is_finite() && **x > 0.0));
    }
    pts.extend(rho.atoms().iter().map(|a| a.location).filter(|&x| x > 0.0));
    pts.iter()
        .map(|&l| rho.mass_below(l) / l.powf(gamma))
        .fold(0.0, f64::max)
}

fn check_ibp_declared(rho: &SpectralMeasure, b: f64, gamma: f64) -> Result<()> {
    if !(0.0..2.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma must lie in [0, 2), got {gamma}")));
    }
    check_finite_positive(b, "b")?;
    let need = ibp_constant(rho, gamma);
    if need > b * (1.0 + 1e-9) {
        return Err(Error::inapplicable(format!(
            "rho([0, l]) <= b l^gamma fails: need b >= {need}, declared {b}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntiderivativeSupReport {
    pub n: f64,
    pub empirical_e_sup: f64,
    pub se: f64,
    /// `√(b m₀) N^{1−γ/2}`
    pub bound_shape: f64,
    pub implied_c: f64,
    pub grid_step: f64,
}

/// Monte Carlo `E sup_{x ≤ N} ∫_0^x f` by cumulative trapezoid sums.
pub fn dudley_sup_antiderivative(
    rho: &SpectralMeasure,
    b: f64,
    gamma: f64,
    n: f64,
    n_samples: usize,
    rng: &RngSpec,
) -> Result<AntiderivativeSupReport> {
    if rho.domain() != Domain::ContinuousTime {
        return Err(Error::invalid("anti-derivatives need a continuous-time measure"));
    }
    check_finite_positive(n, "N")?;
    check_ibp_declared(rho, b, gamma)?;
    let count = ((8.0 * n).ceil() as usize + 1).max(9);
    let grid = path_grid(rho, n, count)?;
    let h = grid.step;
    let sups: Vec<f64> = sample_rows(rho, &grid, n_samples, rng)?
        .iter()
        .map(|p| {
            let mut acc = 0.0;
            let mut best: f64 = 0.0;
            for w in p.windows(2) {
                acc += 0.5 * h * (w[0] + w[1]);
                best = best.max(acc);
            }
            best
        })
        .collect();
    let w: Welford = sups.iter().copied().collect();
    let shape = (b * rho.total_mass()).sqrt() * n.powf(1.0 - 0.5 * gamma);
    Ok(AntiderivativeSupReport {
        n,
        empirical_e_sup: w.mean,
        se: w.std_err(),
        bound_shape: shape,
        implied_c: w.mean / shape,
        grid_step: h,
    })
}

/// Log-log slope of `E sup` against `N` over a sweep.
pub fn growth_exponent(ns: &[f64], values: &[f64]) -> f64 {
    let x: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    linear_fit(&x, &y).0
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `Var ∫_0^N f = N² ∫ sinc²(Nλ/2) dρ(λ)` by quadrature.
pub fn antideriv_variance(rho: &SpectralMeasure, n: f64) -> Result<Integral> {
    if rho.domain() != Domain::ContinuousTime {
        return Err(Error::invalid("anti-derivative variance needs a continuous-time measure"));
    }
    check_finite_positive(n, "N")?;
    let n2 = n * n;
    let kernel = |l: f64| n2 * sinc(0.5 * n * l).powi(2);
    let mut total: Integral = rho
        .atoms()
        .iter()
        .map(|a| Integral::exact(a.mass * kernel(a.location)))
        .sum();
    let opts = QuadOptions {
        abs_tol: 1e-13 * n2,
        rel_tol: 1e-11,
        ..Default::default()
    };
    let period = 2.0 * PI / n;
    let p2 = 2.0 * rho.weight_order() as f64;
    for s in rho.segments() {
        let mut a = s.a;
        let dens = |l: f64| rho.density_at(l) * kernel(l);
        let mut piece = Integral::ZERO;
        let e = s.form.exponent() + p2;
        if a == 0.0 && e < 0.0 && e > -1.0 {
            let cut = s.b.min(period);
            piece = piece + integrate_power_at_zero(e, |l| dens(l) * l.powf(-e), cut, opts);
            a = cut;
        }
        if a < s.b {
            let first = (a / period).floor() as i64 + 1;
            let mut breaks = vec![a];
            for j in first..first + 400 {
                let z = j as f64 * period;
                if z >= s.b {
                    break;
                }
                breaks.push(z);
            }
            breaks.push(s.b);
            piece = piece + integrate_with_breaks(dens, &breaks, opts);
        }
        if !piece.value.is_finite() {
            return Err(Error::Numerical(format!("quadrature failed on segment [{}, {}]", s.a, s.b)));
        }
        total = total + piece.scale(2.0);
    }
    Ok(total)
}

/// `16b/(2−γ)·N^{2−γ}`, valid when `ρ([0,λ]) ≤ bλ^γ`.
pub fn antideriv_variance_bound(b: f64, gamma: f64, n: f64) -> f64 {
    16.0 * b / (2.0 - gamma) * n.powf(2.0 - gamma)
}

/// Direction of the variance bound, with the precondition verified on a grid.
pub fn antideriv_variance_check(rho: &SpectralMeasure, b: f64, gamma: f64, n: f64) -> Result<CheckReport> {
    check_ibp_declared(rho, b, gamma)?;
    let var = antideriv_variance(rho, n)?;
    let bound = antideriv_variance_bound(b, gamma, n);
    Ok(CheckReport::deterministic(
        "antideriv_variance_bound",
        format!("N = {n}, gamma = {gamma}"),
        (bound - var.value) / bound,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub variance: f64,
    pub se: f64,
    pub grid_step: f64,
    pub paths: u64,
}

/// Monte Carlo variance of trapezoid integrals `∫_0^N f` over sampled paths.
pub fn antideriv_variance_mc(rho: &SpectralMeasure, n: f64, step: f64, n_paths: usize, rng: &RngSpec) -> Result<VarianceEstimate> {
    if rho.domain() != Domain::ContinuousTime {
        return Err(Error::invalid("anti-derivative variance needs a continuous-time measure"));
    }
    check_finite_positive(n, "N")?;
    check_finite_positive(step, "step")?;
    if n_paths < 2 {
        return Err(Error::invalid("need at least two paths"));
    }
    let count = (n / step).round().max(1.0) as usize + 1;
    let grid = path_grid(rho, n, count)?;
    let h = grid.step;
    let sq: Welford = sample_rows(rho, &grid, n_paths, rng)?
        .iter()
        .map(|p| {
            let s: f64 = p.iter().sum::<f64>() - 0.5 * (p[0] + p[p.len() - 1]);
            (h * s).powi(2)
        })
        .collect();
    Ok(VarianceEstimate {
        variance: sq.mean,
        se: sq.std_err(),
        grid_step: h,
        paths: sq.count,
    })
}

/// `Σ_j log Φ(b_j) ≤ N log Φ(q)` whenever `mean(b) ≤ q`, in log space.
pub fn iid_average_bound_check(b: &[f64], q: f64) -> Result<CheckReport> {
    if b.is_empty() || b.iter().any(|v| !v.is_finite()) || !q.is_finite() {
        return Err(Error::invalid("need a nonempty finite b vector and finite q"));
    }
    let n = b.len() as f64;
    let mean = b.iter().sum::<f64>() / n;
    if mean > q + 1e-12 * q.abs().max(1.0) {
        return Err(Error::inapplicable(format!("mean(b) = {mean} exceeds q = {q}")));
    }
    let lhs: f64 = b.iter().map(|&v| log_normal_cdf(v)).sum();
    let rhs = n * log_normal_cdf(q);
    Ok(CheckReport::deterministic(
        "iid_average_bound",
        format!("N = {}", b.len()),
        (rhs - lhs) / rhs.abs().max(1.0),
    ))
}

/// A shift `τ` with `mean_{n∈S} f(n+τ) ≤ L`, by exhaustive scan of `ℤ/Nℤ`.
pub fn cyclic_shift_witness(f: &[f64], s: &[usize], l: f64) -> Result<usize> {
    let n = f.len();
    if n == 0 || s.is_empty() || s.iter().any(|&i| i >= n) {
        return Err(Error::invalid("need nonempty f and a nonempty index set within 0..N"));
    }
    let mean = f.iter().sum::<f64>() / n as f64;
    if mean > l + 1e-12 * l.abs().max(1.0) {
        return Err(Error::inapplicable(format!("mean(f) = {mean} exceeds L = {l}")));
    }
    let g = |tau: usize| s.iter().map(|&i| f[(i + tau) % n]).sum::<f64>() / s.len() as f64;
    let vals: Vec<f64> = (0..n).map(g).collect();
    if let Some(tau) = vals.iter().position(|&v| v <= l) {
        return Ok(tau);
    }
    // rounding only: the minimum is within ulps of L
    Ok((0..n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeBallRow {
    pub ell: f64,
    pub lhs: f64,
    pub se: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeBallReport {
    pub report: CheckReport,
    pub c: f64,
    /// Smallest grid `ℓ` from which the inequality holds at every larger
    /// grid value.
    pub threshold: Option<f64>,
    pub rows: Vec<LargeBallRow>,
}

/// `P(|h| ≤ ℓ on [0,N]) ≥ P(c|h(0)| ≤ ℓ)^N` on a grid of step at most `1/16`.
pub fn large_ball_check(
    rho: &SpectralMeasure,
    c: f64,
    ell_grid: &[f64],
    n: f64,
    n_samples: usize,
    rng: &RngSpec,
) -> Result<LargeBallReport> {
    if rho.domain() != Domain::ContinuousTime {
        return Err(Error::invalid("large-ball check needs a continuous-time measure"));
    }
    if !(c >= 1.0 && c.is_finite()) {
        return Err(Error::invalid(format!("c must be >= 1, got {c}")));
    }
    check_finite_positive(n, "N")?;
    if !(rho.moment_sup() > 0.0) {
        return Err(Error::inapplicable("no finite moment m_delta with delta > 0"));
    }
    if ell_grid.is_empty() || ell_grid.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::invalid("ell grid must be nonempty and positive"));
    }
    if n_samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let mut ells = ell_grid.to_vec();
    ells.sort_by(f64::total_cmp);
    let count = (16.0 * n).ceil() as usize + 1;
    let grid = path_grid(rho, n, count)?;
    let sups: Vec<f64> = sample_rows(rho, &grid, n_samples, rng)?
        .iter()
        .map(|p| p.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    let m = sups.len() as f64;
    let s0 = rho.covariance(0.0).sqrt();
    let rows: Vec<LargeBallRow> = ells
        .iter()
        .map(|&ell| {
            let lhs = sups.iter().filter(|&&s| s <= ell).count() as f64 / m;
            let rhs = prob_abs_below(ell / (c * s0)).powf(n);
            let p = lhs.max(rhs);
            LargeBallRow {
                ell,
                lhs,
                se: (p * (1.0 - p) / m).sqrt().max(1.0 / m),
                rhs,
            }
        })
        .collect();
    let ok = |r: &LargeBallRow| r.lhs - r.rhs >= -SE_SLACK * r.se;
    let threshold = rows
        .iter()
        .rposition(|r| !ok(r))
        .map_or(Some(0), |i| (i + 1 < rows.len()).then_some(i + 1))
        .map(|i| rows[i].ell);
    let last = rows.last().expect("nonempty grid");
    let report = CheckReport::stochastic(
        "large_ball",
        format!("{} points, {} paths, c = {c}", grid.count, sups.len()),
        last.lhs - last.rhs,
        last.se,
    );
    Ok(LargeBallReport {
        report,
        c,
        threshold,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::catalog;

    #[test]
    fn tail_bound_examples() {
        assert!(tail_bounds_check(&[2.0]).unwrap().pass);
        assert!(tail_bounds_check(&[0.5]).unwrap().pass);
        let grid: Vec<f64> = (1..=1000).map(|i| i as f64 / 100.0).collect();
        assert!(tail_bounds_check(&grid).unwrap().pass);
        assert!(tail_bounds_check(&[0.0]).is_err());
    }

    #[test]
    fn theta_examples() {
        let t2 = tails_comp_theta(2.0).unwrap();
        assert!(t2.theta <= 2.0 && t2.verified);
        let t1 = tails_comp_theta(1.0).unwrap();
        let t05 = tails_comp_theta(0.5).unwrap();
        assert!(t05.theta >= t1.theta && t1.theta >= t2.theta);
    }

    #[test]
    fn khatri_sidak_examples() {
        let rng = RngSpec::new(1);
        let id = khatri_sidak_check(&DMatrix::identity(2, 2), 1.0, 0, &rng).unwrap();
        assert!(id.pass && id.margin.abs() < 1e-12);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.9, 0.9, 1.0]);
        let r = khatri_sidak_check(&s, 1.0, 0, &rng).unwrap();
        assert!(r.pass && r.margin > 0.05);
        let id5 = khatri_sidak_check(&DMatrix::identity(5, 5), 1.0, 20_000, &rng).unwrap();
        assert!(id5.pass && id5.margin.abs() <= 3.0 * id5.se.unwrap() + 1e-12);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(khatri_sidak_check(&bad, 1.0, 0, &rng).is_err());
    }

    #[test]
    fn box_exact_matches_bivariate_arcsine() {
        // P(X>0, Y>0) = 1/4 + asin(r)/(2π) through the box [0, 40]²
        let r = 0.6;
        let s = DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0]);
        let p = box_exact(&s, &DVector::zeros(2), 0.0, 40.0);
        assert!((p - (0.25 + r.asin() / (2.0 * PI))).abs() < 1e-12);
    }

    #[test]
    fn anderson_zero_y_is_equality() {
        let grid = PathGrid::integer(0, 8);
        let sx = cov_matrix(&catalog::iid(), &grid).unwrap();
        let r = anderson_check_cov(&sx, &DMatrix::zeros(8, 8), 1.0, 4000, &RngSpec::new(2)).unwrap();
        assert_eq!(r.report.margin, 0.0);
        let s = anderson_check_cov(&sx, &sx, 1.0, 20_000, &RngSpec::new(2)).unwrap();
        assert!(s.report.pass && s.report.margin > 3.0 * s.report.se.unwrap());
    }

    #[test]
    fn antideriv_variance_full_period_atom() {
        let n0 = 4.0;
        let rho = catalog::atoms(&[(2.0 * PI / n0, 1.0)], Domain::ContinuousTime).unwrap();
        assert!(antideriv_variance(&rho, n0).unwrap().value.abs() < 1e-12);
        assert!(antideriv_variance(&catalog::iid(), 4.0).is_err());
    }

    #[test]
    fn antideriv_variance_matches_double_integral() {
        // 2∫_0^N (N − u) r(u) du
        let rho = catalog::sinc();
        for &n in &[0.5, 2.0, 8.0] {
            let q = antideriv_variance(&rho, n).unwrap().value;
            let direct = 2.0 * integrate(|u| (n - u) * rho.covariance(u), 0.0, n, QuadOptions::abs(1e-12)).value;
            assert!((q - direct).abs() < 1e-8 * direct.max(1.0), "{n}: {q} {direct}");
        }
    }

    #[test]
    fn iid_average_examples() {
        let eq = iid_average_bound_check(&[0.3; 5], 0.3).unwrap();
        assert!(eq.pass && eq.margin.abs() < 1e-14);
        let strict = iid_average_bound_check(&[0.0, 2.0], 1.0).unwrap();
        assert!(strict.pass && strict.margin > 0.0);
        let deep = iid_average_bound_check(&[-30.0, -40.0, -50.0], -40.0).unwrap();
        assert!(deep.pass && deep.margin > 0.0);
        assert!(iid_average_bound_check(&[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn cyclic_shift_examples() {
        assert_eq!(cyclic_shift_witness(&[2.0; 6], &[1, 3], 2.0).unwrap(), 0);
        let mut spike = vec![0.0; 5];
        spike[0] = 5.0;
        let tau = cyclic_shift_witness(&spike, &[0], 1.0).unwrap();
        assert_ne!(tau, 0);
        assert!(cyclic_shift_witness(&[3.0, 3.0], &[0], 1.0).is_err());
    }

    #[test]
    fn large_ball_rejects_small_c() {
        let r = large_ball_check(&catalog::sinc(), 0.5, &[1.0], 2.0, 100, &RngSpec::new(0));
        assert!(matches!(r, Err(Error::Invalid(_))));
        let big = large_ball_check(&catalog::sinc(), 1.0, &[20.0], 2.0, 200, &RngSpec::new(0)).unwrap();
        assert!(big.report.pass && big.threshold == Some(20.0));
    }
}
