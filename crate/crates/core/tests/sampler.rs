use gsp_core::sampler::*;
use gsp_core::stats::{ks_critical, ks_statistic};
use gsp_core::{catalog, Domain, RngSpec, SpectralMeasure};

/// Empirical lag covariances against `cov`, each within `z` standard errors.
fn check_covariance(rows: &[Vec<f64>], cov: impl Fn(usize, usize) -> f64, z: f64) {
    let n = rows.len() as f64;
    let d = rows[0].len();
    for i in 0..d {
        let mean: f64 = rows.iter().map(|r| r[i]).sum::<f64>() / n;
        let se_mean = (cov(i, i) / n).sqrt();
        assert!(mean.abs() <= z * se_mean, "mean at {i}: {mean}");
        for j in i..d {
            let emp: f64 = rows.iter().map(|r| r[i] * r[j]).sum::<f64>() / n;
            let se = ((cov(i, i) * cov(j, j) + cov(i, j).powi(2)) / n).sqrt();
            assert!((emp - cov(i, j)).abs() <= z * se, "({i},{j}): {emp} vs {}", cov(i, j));
        }
    }
}

fn values(paths: &[SamplePath]) -> Vec<Vec<f64>> {
    paths.iter().map(|p| p.values.clone()).collect()
}

fn measures() -> Vec<(SpectralMeasure, PathGrid)> {
    vec![
        (catalog::gap(Domain::IntegerTime), PathGrid::integer(0, 8)),
        (catalog::power(-0.5, Domain::IntegerTime).unwrap(), PathGrid::integer(-3, 7)),
        (catalog::sinc(), PathGrid::continuous(0.0, 0.4, 8).unwrap()),
        (catalog::exp_well(1.0, Domain::ContinuousTime).unwrap(), PathGrid::continuous(0.0, 0.5, 6).unwrap()),
    ]
}

#[test]
fn exact_and_circulant_reproduce_covariance() {
    for (k, (rho, grid)) in measures().into_iter().enumerate() {
        let times = grid.times();
        let cov = |i: usize, j: usize| rho.covariance(times[j] - times[i]);
        let exact = sample_exact(&rho, &grid, 40_000, &RngSpec::new(k as u64)).unwrap();
        check_covariance(&values(&exact), cov, 4.5);
        let circ = sample_circulant(&rho, &grid, 40_000, &RngSpec::new(100 + k as u64)).unwrap();
        check_covariance(&values(&circ), cov, 4.5);
    }
}

#[test]
fn spectral_sum_matches_mode_covariance() {
    let rho = catalog::mixed(Domain::ContinuousTime);
    let grid = PathGrid::continuous(0.0, 0.3, 6).unwrap();
    let s = sample_spectral(&rho, &grid, 64, 40_000, &RngSpec::new(8)).unwrap();
    let times = grid.times();
    let modes = s.modes.clone();
    check_covariance(&values(&s.paths), |i, j| modes_covariance(&modes, times[j] - times[i]), 4.5);
    for &t in &times {
        let err = (modes_covariance(&s.modes, t) - rho.covariance(t)).abs();
        assert!(err <= t * s.partition_modulus * rho.total_mass() + 1e-9, "t={t}: {err}");
    }
}

#[test]
fn exact_and_circulant_agree_in_distribution() {
    let rho = catalog::gap(Domain::IntegerTime);
    let grid = PathGrid::integer(0, 16);
    let n = 10_000;
    let a = sample_exact(&rho, &grid, n, &RngSpec::new(1)).unwrap();
    let b = sample_circulant(&rho, &grid, n, &RngSpec::new(2)).unwrap();
    let crit = ks_critical(0.001, n, n);
    let max = |p: &SamplePath| p.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let stats = [
        (a.iter().map(|p| p.values[5]).collect::<Vec<_>>(), b.iter().map(|p| p.values[5]).collect::<Vec<_>>()),
        (a.iter().map(max).collect(), b.iter().map(max).collect()),
    ];
    for (x, y) in stats {
        let d = ks_statistic(&x, &y);
        assert!(d < crit, "{d} >= {crit}");
    }
}

#[test]
fn difference_variance_matches_derivative_measure() {
    for rho in [
        catalog::gap(Domain::IntegerTime),
        catalog::uniform(Domain::IntegerTime),
        catalog::atoms(&[(1.0, 0.5), (2.5, 0.5)], Domain::IntegerTime).unwrap(),
    ] {
        let d = rho.derivative_measure().unwrap();
        let lag0 = 2.0 * (rho.covariance(0.0) - rho.covariance(1.0));
        let lag1 = 2.0 * rho.covariance(1.0) - rho.covariance(0.0) - rho.covariance(2.0);
        assert!((d.covariance(0.0) - lag0).abs() < 1e-9);
        assert!((d.covariance(1.0) - lag1).abs() < 1e-9);

        let paths = sample_exact(&rho, &PathGrid::integer(0, 6), 40_000, &RngSpec::new(3)).unwrap();
        let diffs: Vec<SamplePath> = paths.iter().map(|p| discrete_diff(p, 1).unwrap()).collect();
        check_covariance(&values(&diffs), |i, j| d.covariance(j as f64 - i as f64), 4.5);
    }
}

#[test]
fn output_is_independent_of_thread_count() {
    let rho = catalog::gap(Domain::IntegerTime);
    let grid = PathGrid::integer(0, 64);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let spec = RngSpec::new(42);
                let exact = sample_exact(&rho, &grid, 300, &spec).unwrap();
                let circ = sample_circulant(&rho, &grid, 300, &spec).unwrap();
                (values(&exact), values(&circ))
            })
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn binary_round_trip() {
    let rho = catalog::sinc();
    let grid = PathGrid::continuous(0.5, 0.25, 9).unwrap();
    let paths = sample_circulant(&rho, &grid, 5, &RngSpec::new(6)).unwrap();
    let mut buf = Vec::new();
    write_binary(&paths, &mut buf).unwrap();
    let (g, rows) = read_binary(buf.as_slice()).unwrap();
    assert_eq!(g, grid);
    assert_eq!(rows, values(&paths));
}
