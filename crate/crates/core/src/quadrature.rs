//! Adaptive Gauss–Kronrod (7/15) quadrature with a global error budget.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Hard cap on integrand evaluations for one integral.
pub const MAX_EVALS: usize = 1_000_000;

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_evals: MAX_EVALS,
        }
    }
}

impl QuadOptions {
    pub fn abs(abs_tol: f64) -> Self {
        QuadOptions {
            abs_tol,
            ..Default::default()
        }
    }
}

/// Value of an integral together with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
}

impl Integral {
    pub const ZERO: Integral = Integral {
        value: 0.0,
        abs_err: 0.0,
        evals: 0,
    };

    pub fn exact(value: f64) -> Self {
        Integral {
            value,
            abs_err: 0.0,
            evals: 0,
        }
    }

    pub fn scale(self, factor: f64) -> Self {
        Integral {
            value: self.value * factor,
            abs_err: self.abs_err * factor.abs(),
            evals: self.evals,
        }
    }
}

impl std::ops::Add for Integral {
    type Output = Integral;
    fn add(self, rhs: Integral) -> Integral {
        Integral {
            value: self.value + rhs.value,
            abs_err: self.abs_err + rhs.abs_err,
            evals: self.evals + rhs.evals,
        }
    }
}

impl std::iter::Sum for Integral {
    fn sum<I: Iterator<Item = Integral>>(iter: I) -> Integral {
        iter.fold(Integral::ZERO, |a, b| a + b)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive integration over `[a, b]` starting from the given interior
/// breakpoints. `b` may be `+inf`.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    opts: QuadOptions,
) -> Integral {
    debug_assert!(breaks.len() >= 2);
    let a = breaks[0];
    let b = *breaks.last().unwrap();
    if a == b {
        return Integral::ZERO;
    }
    if b.is_infinite() {
        // x = a + s / (1 - s)
        let g = |s: f64| {
            if s >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - s;
            let x = a + s / one_minus;
            let v = f(x) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let mapped: Vec<f64> = breaks[..breaks.len() - 1]
            .iter()
            .map(|&x| {
                let d = x - a;
                d / (1.0 + d)
            })
            .chain(std::iter::once(1.0))
            .collect();
        return adapt(&g, &mapped, opts);
    }
    adapt(&f, breaks, opts)
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Integral {
    integrate_with_breaks(f, &[a, b], opts)
}

fn adapt<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], opts: QuadOptions) -> Integral {
    let mut heap = BinaryHeap::new();
    let mut evals = 0usize;
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (v, e) = gk15(f, w[0], w[1]);
        evals += 15;
        total += v;
        total_err += e;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            err: e,
        });
    }
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) && evals < opts.max_evals {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(f, worst.a, mid);
        let (v2, e2) = gk15(f, mid, worst.b);
        evals += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
    }
    // resum to shed accumulated cancellation in the running totals
    let (value, abs_err) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.err));
    Integral {
        value,
        abs_err,
        evals,
    }
}

/// `∫_0^h λ^β s(λ) dλ` for `β > -1`, via `v = λ^{β+1}` which removes the
/// endpoint singularity.
pub fn integrate_power_at_zero<F: Fn(f64) -> f64>(
    beta: f64,
    smooth: F,
    h: f64,
    opts: QuadOptions,
) -> Integral {
    debug_assert!(beta > -1.0);
    let p = beta + 1.0;
    let upper = h.powf(p);
    let inv = 1.0 / p;
    integrate(|v: f64| smooth(v.powf(inv)), 0.0, upper, opts).scale(inv)
}
