//! Segment integrals `∫ λ^δ M(λ) w(λ) dλ` and `∫ cos(λt) M(λ) w(λ) dλ`, where
//! `w` is a parametric density and `M` the derivative/anti-derivative weight.

use std::f64::consts::PI;

use super::DensityForm;
use crate::quadrature::{integrate, integrate_power_at_zero, integrate_with_breaks, Integral, QuadOptions};

/// Multiplier `λ^{2p}` (continuous time) or `(2 − 2cos λ)^p` (integer time).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Weight {
    pub p: i32,
    pub discrete: bool,
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

impl Weight {
    pub fn multiplier(&self, l: f64) -> f64 {
        if self.p == 0 {
            return 1.0;
        }
        if self.discrete {
            (2.0 * (0.5 * l).sin()).powi(2 * self.p)
        } else {
            l.powi(2 * self.p)
        }
    }

    /// The factor left after pulling `λ^{2p}` out of the multiplier.
    fn residual(&self, l: f64) -> f64 {
        if self.p == 0 || !self.discrete {
            1.0
        } else {
            sinc(0.5 * l).powi(2 * self.p)
        }
    }

    fn is_pure_power(&self) -> bool {
        self.p == 0 || !self.discrete
    }
}

/// `c λ^E h(λ) g(λ)` for one segment, with `E` the total power exponent.
#[derive(Debug, Clone, Copy)]
struct Piece {
    form: DensityForm,
    e: f64,
    w: Weight,
}

impl Piece {
    fn new(form: DensityForm, delta: f64, w: Weight) -> Self {
        Piece {
            form,
            e: form.exponent() + delta + 2.0 * w.p as f64,
            w,
        }
    }

    /// Everything except `λ^E`.
    fn smooth(&self, l: f64) -> f64 {
        let g = self.w.residual(l);
        match self.form {
            DensityForm::ExpWell { c, a, scale } => {
                if l <= 0.0 {
                    0.0
                } else {
                    c * (-(scale * l).powf(-a)).exp() * g
                }
            }
            DensityForm::LogTail { c, scale } => {
                let lg = (scale * l).ln();
                c * g / (lg * lg)
            }
            _ => self.form.coefficient() * g,
        }
    }

    fn eval(&self, l: f64) -> f64 {
        match self.form {
            DensityForm::ExpWell { c, a, scale } => {
                if l <= 0.0 {
                    return 0.0;
                }
                let log_v = self.e * l.ln() - (scale * l).powf(-a);
                c * log_v.exp() * self.w.residual(l)
            }
            _ => {
                let pw = if self.e == 0.0 { 1.0 } else { l.powf(self.e) };
                pw * self.smooth(l)
            }
        }
    }

    fn closed_form_power(&self) -> bool {
        self.w.is_pure_power()
            && matches!(
                self.form,
                DensityForm::Constant { .. } | DensityForm::Power { .. } | DensityForm::PowerTail { .. }
            )
    }
}

/// `∫_lo^hi λ^e dλ`.
fn power_integral(e: f64, lo: f64, hi: f64) -> f64 {
    if e == -1.0 {
        return (hi / lo).ln();
    }
    let p = e + 1.0;
    let upper = if hi.is_infinite() { 0.0 } else { hi.powf(p) };
    let lower = if lo == 0.0 { 0.0 } else { lo.powf(p) };
    (upper - lower) / p
}

fn moment_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-13,
        max_evals: 200_000,
    }
}

fn cos_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-13,
        max_evals: 2_000_000,
    }
}

/// Geometric breakpoints between 0 and `hi` so that sharply localized
/// integrands (deep wells, high negative moments) are resolved.
fn geometric_breaks(hi: f64) -> Vec<f64> {
    let reference = if hi.is_finite() { hi } else { 1.0 };
    let mut breaks = vec![0.0];
    breaks.extend((0..=48).rev().map(|j| reference * 0.5f64.powi(j)));
    if hi.is_infinite() {
        breaks.extend((1..=30).map(|j| 2f64.powi(j)));
        breaks.push(f64::INFINITY);
    }
    breaks
}

/// `∫_lo^hi λ^δ M(λ) w(λ) dλ` for a segment known to be integrable there.
pub(crate) fn moment_piece(form: DensityForm, lo: f64, hi: f64, delta: f64, w: Weight) -> Integral {
    if !(hi > lo) {
        return Integral::ZERO;
    }
    let piece = Piece::new(form, delta, w);
    if piece.closed_form_power() {
        return Integral::exact(form.coefficient() * power_integral(piece.e, lo, hi));
    }
    if let DensityForm::LogTail { c, scale } = form {
        // λ = e^u / scale turns c/(λ log²(scale λ)) dλ into c λ^F / u² du.
        let f_exp = delta + 2.0 * w.p as f64;
        let u_lo = (scale * lo).ln();
        let u_hi = (scale * hi).ln();
        if f_exp == 0.0 && w.is_pure_power() {
            let tail = if u_hi.is_infinite() { 0.0 } else { 1.0 / u_hi };
            return Integral::exact(c * (1.0 / u_lo - tail));
        }
        let integrand = |u: f64| {
            let l = u.exp() / scale;
            let pw = if f_exp == 0.0 { 1.0 } else { l.powf(f_exp) };
            c * pw * w.residual(l) / (u * u)
        };
        return integrate(integrand, u_lo, u_hi, moment_opts());
    }
    if lo == 0.0 {
        if let DensityForm::ExpWell { .. } = form {
            return integrate_with_breaks(|l| piece.eval(l), &geometric_breaks(hi), moment_opts());
        }
        let mid = if hi.is_finite() { hi.min(1.0) } else { 1.0 };
        let near = integrate_power_at_zero(piece.e, |l| piece.smooth(l), mid, moment_opts());
        if mid >= hi {
            return near;
        }
        return near + integrate(|l| piece.eval(l), mid, hi, moment_opts());
    }
    if hi.is_infinite() {
        let mut breaks = vec![lo];
        let mut x = lo.max(1.0) * 2.0;
        for _ in 0..20 {
            breaks.push(x);
            x *= 4.0;
        }
        breaks.push(f64::INFINITY);
        return integrate_with_breaks(|l| piece.eval(l), &breaks, moment_opts());
    }
    integrate(|l| piece.eval(l), lo, hi, moment_opts())
}

/// Most panels one oscillatory integral may use before the tail is cut off.
const MAX_PANELS: f64 = 100_000.0;

/// `∫_lo^hi cos(λt) M(λ) w(λ) dλ`. For infinite `hi` the tail beyond a cutoff
/// `X` is replaced by its leading integration-by-parts term and the remainder
/// bound `2|A'(X)|/t²` is added to the reported error.
pub(crate) fn cos_piece(form: DensityForm, lo: f64, hi: f64, t: f64, w: Weight) -> Integral {
    if !(hi > lo) {
        return Integral::ZERO;
    }
    if t == 0.0 {
        return moment_piece(form, lo, hi, 0.0, w);
    }
    let piece = Piece::new(form, 0.0, w);
    let at = t.abs();
    if let (DensityForm::Constant { c }, true) = (form, w.p == 0) {
        if hi.is_finite() {
            return Integral::exact(c * ((hi * at).sin() - (lo * at).sin()) / at);
        }
    }
    let period = PI / at;
    let mut tail = Integral::ZERO;
    let upper = if hi.is_finite() {
        hi
    } else {
        let deriv = |x: f64| {
            let h = 1e-4 * x;
            (piece.eval(x + h) - piece.eval(x - h)) / (2.0 * h)
        };
        let mut j = 4;
        let mut x = lo + period * 16.0;
        loop {
            let bound = 2.0 * deriv(x).abs() / (at * at);
            if bound < 1e-14 || (x - lo) / period > MAX_PANELS {
                let head = -(x * at).sin() * piece.eval(x) / at;
                tail = Integral {
                    value: head,
                    abs_err: bound,
                    evals: 3,
                };
                break x;
            }
            j += 1;
            x = lo + period * 2f64.powi(j);
        }
    };
    let singular_start = lo == 0.0 && !matches!(form, DensityForm::ExpWell { .. }) && piece.e != 0.0;
    let mut total = Integral::ZERO;
    let mut start = lo;
    if singular_start {
        let first = period.min(upper);
        total = total
            + integrate_power_at_zero(piece.e, |l| piece.smooth(l) * (l * t).cos(), first, cos_opts());
        start = first;
    }
    if upper > start {
        let mut breaks = vec![start];
        let mut k = (start / period).floor() + 1.0;
        while k * period < upper {
            breaks.push(k * period);
            k += 1.0;
        }
        breaks.push(upper);
        total = total + integrate_with_breaks(|l| piece.eval(l) * (l * t).cos(), &breaks, cos_opts());
    }
    total + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    const W0: Weight = Weight { p: 0, discrete: false };

    #[test]
    fn power_closed_form() {
        let f = DensityForm::Power { c: 2.0, alpha: 0.5 };
        let r = moment_piece(f, 0.0, 4.0, 0.0, W0);
        assert!((r.value - 2.0 * 8.0 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn discrete_weight_by_quadrature_matches_expansion() {
        // ∫_0^π (2 − 2cos λ) dλ = 2π
        let f = DensityForm::Constant { c: 1.0 };
        let w = Weight { p: 1, discrete: true };
        let r = moment_piece(f, 0.0, PI, 0.0, w);
        assert!((r.value - 2.0 * PI).abs() < 1e-11, "{r:?}");
    }

    #[test]
    fn log_tail_mass() {
        let f = DensityForm::LogTail { c: 1.0, scale: 1.0 };
        let r = moment_piece(f, 3.0, f64::INFINITY, 0.0, W0);
        assert!((r.value - 1.0 / 3f64.ln()).abs() < 1e-14);
        let r = moment_piece(f, 3.0, f64::INFINITY, -1.0, W0);
        // ∫_{ln 3}^∞ e^{-u}/u² du = E_2(ln 3)/ln 3 evaluated numerically
        let check = integrate(|u: f64| (-u).exp() / (u * u), 3f64.ln(), f64::INFINITY, QuadOptions::default());
        assert!((r.value - check.value).abs() < 1e-10);
    }

    #[test]
    fn power_tail_cosine_transform() {
        // ∫_1^∞ cos(λ)/λ² dλ = cos 1 − (π/2 − Si(1))
        let f = DensityForm::PowerTail { c: 1.0, alpha: 2.0 };
        let r = cos_piece(f, 1.0, f64::INFINITY, 1.0, W0);
        let si1 = 0.946_083_070_367_183_1;
        let exact = 1f64.cos() - (PI / 2.0 - si1);
        assert!((r.value - exact).abs() < 1e-9, "{} vs {exact}", r.value);
    }

    #[test]
    fn singular_cosine_transform() {
        // ∫_0^π λ^{-1/2} cos(λ t) dλ against a fine plain quadrature after v = √λ
        let f = DensityForm::Power { c: 1.0, alpha: -0.5 };
        let t = 7.0;
        let r = cos_piece(f, 0.0, PI, t, W0);
        let check = integrate(|v: f64| 2.0 * (v * v * t).cos(), 0.0, PI.sqrt(), QuadOptions::default());
        assert!((r.value - check.value).abs() < 1e-10);
    }

    #[test]
    fn exp_well_moments_are_finite_at_high_negative_order() {
        let f = DensityForm::ExpWell { c: 1.0, a: 1.0, scale: 1.0 };
        // ∫_0^1 λ^{-4} e^{-1/λ} dλ = ∫_1^∞ u² e^{-u} du = 5/e
        let r = moment_piece(f, 0.0, 1.0, -4.0, W0);
        assert!((r.value - 5.0 / std::f64::consts::E).abs() < 1e-11, "{r:?}");
    }
}
