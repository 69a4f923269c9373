use gsp_core::chebyshev::*;
use gsp_core::quadrature::{integrate, QuadOptions};
use gsp_core::RngSpec;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Coefficients of the `k`-th derivative of an ascending-coefficient polynomial.
fn derivative(coeffs: &[f64], k: usize) -> Vec<f64> {
    (k..coeffs.len())
        .map(|j| coeffs[j] * (j - k + 1..=j).map(|i| i as f64).product::<f64>())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn leading_coefficient_is_permutation_invariant(
        raw in prop::collection::vec(-1.0..1.0f64, 2..10),
        seed in any::<u64>(),
    ) {
        let mut nodes = raw.clone();
        nodes.sort_by(f64::total_cmp);
        nodes.dedup_by(|a, b| (*a - *b).abs() < 0.05);
        prop_assume!(nodes.len() >= 2);
        let values: Vec<f64> = nodes.iter().map(|x| (3.0 * x).sin() + x * x).collect();
        let base = divided_difference_on(&nodes, &values).unwrap().leading;
        let mut idx: Vec<usize> = (0..nodes.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let pn: Vec<f64> = idx.iter().map(|&i| nodes[i]).collect();
        let pv: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        let perm = divided_difference_on(&pn, &pv).unwrap().leading;
        prop_assert!((perm - base).abs() <= 1e-10 * base.abs().max(1.0), "{} vs {}", perm, base);
    }

    #[test]
    fn divided_difference_exact_on_polynomials(k in 1usize..10, coeffs in prop::collection::vec(-2.0..2.0f64, 10)) {
        let c = &coeffs[..=k];
        let nodes = extrema(k).unwrap();
        let vals: Vec<f64> = nodes.nodes.iter().map(|&x| poly_eval(c, x)).collect();
        let lead = divided_difference(&nodes, &vals).unwrap().leading;
        prop_assert!((lead - c[k]).abs() < 1e-9 * (1.0 + c.iter().map(|v| v.abs()).sum::<f64>()));
    }

    #[test]
    fn random_monic_never_beats_chebyshev(k in 1usize..=10, coeffs in prop::collection::vec(-3.0..3.0f64, 10)) {
        let mut c = coeffs[..k].to_vec();
        c.push(1.0);
        let r = min_norm_check(&c).unwrap();
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn bspline_partition_of_unity(k in 0usize..=20, x in -10.0..10.0f64) {
        let s: f64 = (-40..=40).map(|n| bspline_value(k, x - n as f64).unwrap()).sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        let b = BSpline::new(k).unwrap();
        let (lo, hi) = b.support();
        prop_assert!(b.value(x) >= 0.0);
        if x < lo || x > hi {
            prop_assert_eq!(b.value(x), 0.0);
        }
    }
}

#[test]
fn extrema_invariants() {
    for k in 1..=40 {
        let n = extrema(k).unwrap();
        assert_eq!(n.nodes.len(), k + 1);
        assert_eq!(n.nodes[0], -1.0);
        assert_eq!(n.nodes[k], 1.0);
        assert!(n.nodes.windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn hermite_genocchi_matches_divided_differences() {
    let rng = RngSpec::new(11);
    let mut gen = ChaCha8Rng::seed_from_u64(5);
    for k in 1..=6 {
        let nodes = extrema(k).unwrap();
        for _ in 0..20 {
            let coeffs: Vec<f64> = (0..=k + 2).map(|_| gen.random_range(-1.0..1.0)).collect();
            let dk = derivative(&coeffs, k);
            let vals: Vec<f64> = nodes.nodes.iter().map(|&x| poly_eval(&coeffs, x)).collect();
            let lead = divided_difference(&nodes, &vals).unwrap().leading;
            let mc = hermite_genocchi_mc(|x| poly_eval(&dk, x), &nodes.nodes, 40_000, &rng).unwrap();
            assert!(
                (mc.estimate - lead).abs() <= 4.0 * mc.se + 1e-12,
                "k={k}: {} vs {lead} (se {})",
                mc.estimate,
                mc.se
            );
        }
    }
}

#[test]
fn next_monomial_at_extrema() {
    // f = x^{k+1}: f[x_0..x_k] is the sum of the nodes, zero by symmetry
    let rng = RngSpec::new(4);
    for k in 1..=6 {
        let nodes = extrema(k).unwrap();
        let vals: Vec<f64> = nodes.nodes.iter().map(|x| x.powi(k as i32 + 1)).collect();
        let lead = divided_difference(&nodes, &vals).unwrap().leading;
        assert!(lead.abs() < 1e-12);
        let kf = factorial(k + 1);
        let mc = hermite_genocchi_mc(|x| kf * x, &nodes.nodes, 40_000, &rng).unwrap();
        assert!((mc.estimate - lead).abs() <= 3.0 * mc.se);
    }
}

#[test]
fn simplex_density_is_symmetric_and_positive() {
    let grid: Vec<f64> = (-9..=9).map(|i| i as f64 / 10.0).collect();
    let mut worst_l: f64 = 0.0;
    for k in 1..=8 {
        let r = simplex_density_check(k, &grid, 200_000, &RngSpec::new(k as u64)).unwrap();
        assert!(r.positive, "k={k}");
        let n = grid.len();
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let se = r.se[i].hypot(r.se[j]);
            assert!((r.density[i] - r.density[j]).abs() <= 4.0 * se + 1e-12, "k={k} s={}", grid[i]);
        }
        assert!(r.density[n - 1] > 0.0);
        worst_l = worst_l.max(r.l_k);
    }
    assert!(worst_l < L_BUDGET, "L = {worst_l}");
}

#[test]
fn bspline_integrates_to_one() {
    let mut gen = ChaCha8Rng::seed_from_u64(9);
    for k in 0..=5 {
        let b = BSpline::new(k).unwrap();
        let (lo, hi) = b.support();
        let breaks: Vec<f64> = (0..=k + 1).map(|i| lo + i as f64).collect();
        let exact: f64 = breaks
            .windows(2)
            .map(|w| integrate(|x| b.value(x), w[0], w[1], QuadOptions::abs(1e-14)).value)
            .sum();
        assert!((exact - 1.0).abs() < 1e-10, "k={k}: {exact}");
        let n = 200_000;
        let width = hi - lo;
        let mc: f64 = (0..n).map(|_| b.value(lo + width * gen.random::<f64>())).sum::<f64>() * width / n as f64;
        assert!((mc - 1.0).abs() < 0.01, "k={k}: {mc}");
    }
}

#[test]
fn smoothing_derivative_identity() {
    // F' of F = Σ f(n) B_{k+1}(· − n) against Σ Δf(n) B_k(· − n − 1/2)
    let mut gen = ChaCha8Rng::seed_from_u64(3);
    for k in 1..=5 {
        let values: Vec<f64> = (0..40).map(|_| gen.random_range(-1.0..1.0)).collect();
        let start = -20i64;
        let b = BSpline::new(k + 1).unwrap();
        let f_of = |x: f64| -> f64 {
            values
                .iter()
                .enumerate()
                .map(|(i, v)| v * b.value(x - (start + i as i64) as f64))
                .sum()
        };
        let mut worst: f64 = 0.0;
        for i in 0..200 {
            let x = -10.0 + 0.1 * i as f64 + 0.0123;
            let h = 1e-5;
            let numeric = (f_of(x + h) - f_of(x - h)) / (2.0 * h);
            let analytic: f64 = values
                .iter()
                .enumerate()
                .map(|(i, v)| v * b.derivative(x - (start + i as i64) as f64))
                .sum();
            let identity = smoothing_derivative(&values, start, k, 1, x);
            assert!((numeric - analytic).abs() < 1e-6);
            worst = worst.max((analytic - identity).abs());
        }
        assert!(worst <= 1e-8, "k={k}: {worst}");
    }
}

#[test]
fn scaled_chebyshev_implied_constant() {
    for &n in &[10.0, 100.0] {
        for k in 2..=10usize {
            if k as f64 > n {
                continue;
            }
            let c = monic_chebyshev_coeffs(k);
            let fk = factorial(k) / (n as f64).powi(k as i32);
            let f = |x: f64| poly_eval(&c, x / n);
            let r = verify_continuous(f, |_| fk, k, n).unwrap();
            let kf = k as f64;
            let closed = (0.9 * factorial(k) * 2f64.powi(k as i32 - 1)).powf(1.0 / kf) / kf;
            assert!((r.sup - 2f64.powi(1 - k as i32)).abs() < 1e-12 * r.sup.max(1e-300) + 1e-15);
            assert!((r.implied_c0 - closed).abs() < 1e-9, "k={k}: {} vs {closed}", r.implied_c0);
            assert!((0.6..=1.1).contains(&r.implied_c0));
        }
    }
}

#[test]
fn exponential_has_finite_constant() {
    for k in 1..=8 {
        let r = verify_continuous(f64::exp, f64::exp, k, 10.0).unwrap();
        assert!(r.implied_c0.is_finite() && r.implied_c0 > 0.0);
        assert!(r.holds_with(r.implied_c0 * (1.0 + 1e-12)));
    }
    let wide = verify_continuous_window(|x| x, |_| 1.0, 1, 10.0, Window::NineTenths).unwrap();
    assert!((wide.lhs - 1.8).abs() < 1e-12);
}

#[test]
fn discrete_chebyshev_constant_is_bounded() {
    let n = 40usize;
    let mut worst: f64 = 0.0;
    for k in 1..=8 {
        let c = monic_chebyshev_coeffs(k);
        // positive k-th difference on [−N, N]: T_k(x/(2N)) has constant k-th derivative
        let vals: Vec<f64> = (-2 * n as i64..=2 * n as i64)
            .map(|m| poly_eval(&c, m as f64 / (2.0 * n as f64)))
            .collect();
        let r = verify_discrete(&vals, k, n).unwrap();
        assert!(r.smoothing_positive, "k={k}");
        worst = worst.max(r.implied_c);
    }
    assert!(worst.is_finite() && worst < 10.0, "{worst}");
}

#[test]
fn linear_discrete_is_exact() {
    let n = 10usize;
    let vals: Vec<f64> = (-20..=20).map(|m| 3.0 * m as f64).collect();
    let r = verify_discrete(&vals, 1, n).unwrap();
    assert!((r.lhs - 3.0 * 19.0 / 10.0).abs() < 1e-12);
    assert!((r.sup - 60.0).abs() < 1e-12);
    assert!((r.implied_c - r.lhs * 10.0 / 60.0).abs() < 1e-12);
    let bad: Vec<f64> = vals.iter().map(|v| -v).collect();
    assert!(verify_discrete(&bad, 1, n).is_err());
}
