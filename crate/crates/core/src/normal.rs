//! Standard normal distribution functions, with log-scale variants that stay
//! accurate far into the tails.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

/// `ln(√(2π))`
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn log_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `P(Z ≤ x)`
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `P(Z > x)`
pub fn normal_ccdf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Mills ratio `P(Z > x) / φ(x)` by Lentz's continued fraction; x ≥ 3.
fn mills_ratio(x: f64) -> f64 {
    // R(x) = 1/(x+ 1/(x+ 2/(x+ 3/(x+ ...))))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// `ln P(Z > x)`, accurate for arbitrarily large `x`.
pub fn log_normal_ccdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x < 0.0 {
        return (-normal_ccdf(-x)).ln_1p();
    }
    if x < 5.0 {
        return normal_ccdf(x).ln();
    }
    log_normal_pdf(x) + mills_ratio(x).ln()
}

/// `ln P(Z ≤ x)`
pub fn log_normal_cdf(x: f64) -> f64 {
    log_normal_ccdf(-x)
}

/// `ln P(|Z| < x)`; `-inf` for `x ≤ 0`.
pub fn log_prob_abs_below(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x < 3.0 {
        libm::erf(x * FRAC_1_SQRT_2).ln()
    } else {
        (-2.0 * normal_ccdf(x)).ln_1p()
    }
}

/// `P(|Z| < x)`
pub fn prob_abs_below(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        libm::erf(x * FRAC_1_SQRT_2)
    }
}

/// Inverse of [`normal_cdf`].
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < 1e-300 {
        return normal_quantile_log(p.ln());
    }
    let x0 = -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    // one Halley step against the accurate cdf
    refine(x0, p)
}

fn refine(x: f64, p: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let (err, pdf) = if x > 0.0 {
        (-(normal_ccdf(x) - (1.0 - p)), normal_pdf(x))
    } else {
        (normal_cdf(x) - p, normal_pdf(x))
    };
    if pdf <= 0.0 {
        return x;
    }
    let u = err / pdf;
    x - u / (1.0 + 0.5 * x * u)
}

/// Inverse of [`log_normal_cdf`]: returns `x` with `ln Φ(x) = log_p`.
pub fn normal_quantile_log(log_p: f64) -> f64 {
    if log_p >= 0.0 {
        return f64::INFINITY;
    }
    if log_p == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if log_p > -700.0 {
        let p = log_p.exp();
        if p > 1e-300 {
            return normal_quantile(p);
        }
    }
    // deep lower tail: asymptotic start, then Newton on ln Φ
    let l = -2.0 * log_p;
    let mut x = -(l - l.ln() - (2.0 * PI).ln()).max(1.0).sqrt();
    for _ in 0..50 {
        let lc = log_normal_cdf(x);
        let slope = (log_normal_pdf(x) - lc).exp();
        let step = (lc - log_p) / slope;
        x -= step;
        if step.abs() < 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// `ln(Σ exp(v))`, tolerant of `-inf` entries.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_at_zero() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert_eq!(normal_ccdf(0.0), 0.5);
    }

    #[test]
    fn cdf_plus_ccdf_is_one() {
        for i in -80..=80 {
            let x = i as f64 * 0.1;
            assert!((normal_cdf(x) + normal_ccdf(x) - 1.0).abs() <= 1e-15 * 1.5);
        }
    }

    #[test]
    fn known_values() {
        // high-precision references
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        let c3 = 1.349_898_031_630_094_5e-3;
        assert!((normal_ccdf(3.0) / c3 - 1.0).abs() < 1e-14);
        let c8 = 6.220_960_574_271_785e-16;
        assert!((normal_ccdf(8.0) / c8 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn log_ccdf_matches_asymptotic_series() {
        // ln Φ̄(x) = -x²/2 - ln(x√(2π)) + ln(1 - 1/x² + 3/x⁴ - 15/x⁶ + 105/x⁸ ...)
        for &x in &[10.0, 20.0, 40.0, 100.0] {
            let x2 = x * x;
            // summed to its smallest term
            let mut series = 1.0;
            let mut term: f64 = 1.0;
            for n in 1..200 {
                let next = -term * (2 * n - 1) as f64 / x2;
                if next.abs() >= term.abs() {
                    break;
                }
                series += next;
                term = next;
            }
            let expect = -x2 / 2.0 - (x * (2.0 * PI).sqrt()).ln() + series.ln();
            let got = log_normal_ccdf(x);
            assert!((got - expect).abs() < 1e-12 * expect.abs().max(1.0), "{x}: {got} {expect}");
        }
    }

    #[test]
    fn log_ccdf_is_continuous_at_switch() {
        let a = normal_ccdf(5.0).ln();
        let b = log_normal_pdf(5.0) + mills_ratio(5.0).ln();
        assert!((a - b).abs() < 1e-13);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.999] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) / p - 1.0).abs() < 1e-13, "{p}");
        }
        for &lp in &[-800.0, -5000.0, -50.0] {
            let x = normal_quantile_log(lp);
            assert!((log_normal_cdf(x) - lp).abs() < 1e-9 * lp.abs(), "{lp}");
        }
    }

    #[test]
    fn abs_below() {
        assert!((log_prob_abs_below(1.0) - 0.682_689_492_137_085_9f64.ln()).abs() < 1e-14);
        assert!(log_prob_abs_below(0.0).is_infinite());
        assert!((log_prob_abs_below(5.0) - (1.0 - 2.0 * normal_ccdf(5.0)).ln()).abs() < 1e-15);
    }
}
