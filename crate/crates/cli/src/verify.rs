//! The inequality suite behind `gsp verify`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use gsp_core::chebyshev;
use gsp_core::gauss_tools::{self as gt, CheckReport};
use gsp_core::sampler::PathGrid;
use gsp_core::{catalog, Domain, RngSpec};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{write_target, CliError, Context, VerifyArgs, EXIT_CHECKS_FAILED, EXIT_OK};

/// Stream purpose for the suite's own case generators.
const CASES: u64 = 0x7665_7269;

#[derive(Debug, Clone)]
pub struct Row {
    pub case: String,
    pub report: CheckReport,
}

fn row(case: impl Into<String>, report: CheckReport) -> Row {
    Row {
        case: case.into(),
        report,
    }
}

fn random_cov(d: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d + 1, |_, _| r.sample::<f64, _>(StandardNormal));
    &a * a.transpose() / d as f64
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

pub struct Suite {
    pub n_samples: usize,
    pub quick: bool,
}

impl Suite {
    fn count(&self, full: usize, quick: usize) -> usize {
        if self.quick {
            quick
        } else {
            full
        }
    }

    pub fn run(&self, rng: &RngSpec) -> Result<Vec<Row>, CliError> {
        let mut rows = Vec::new();
        let gen = |i: u64| rng.stream(CASES, i);

        let grid: Vec<f64> = (0..1000).map(|i| 1e-3 * 4e4f64.powf(i as f64 / 999.0)).collect();
        rows.push(row("1000 points", gt::tail_bounds_check(&grid)?));

        for delta in [0.1, 0.5, 1.0, 2.0] {
            let t = gt::tails_comp_theta(delta)?;
            let mut r = CheckReport::deterministic("tails_comp_theta", format!("{} points", t.grid_points), t.fine_margin);
            r.pass &= t.verified;
            rows.push(row(format!("delta={delta} theta={}", t.theta), r));
        }

        let mut g = gen(1);
        for i in 0..self.count(500, 40) {
            let d = 2 + i % 4;
            let s = random_cov(d, &mut g);
            let ell = 0.2 + 2.0 * g.random::<f64>();
            rows.push(row(format!("matrix {i} dim {d}"), gt::khatri_sidak_check(&s, ell, self.n_samples, &rng.fork(i as u64))?));
        }

        let mut g = gen(2);
        for i in 0..self.count(1000, 100) {
            let n = 1 + (g.random::<f64>() * 40.0) as usize;
            let b: Vec<f64> = (0..n).map(|_| -6.0 + 12.0 * g.random::<f64>()).collect();
            let q = b.iter().sum::<f64>() / n as f64 + 2.0 * g.random::<f64>();
            rows.push(row(format!("pair {i}"), gt::iid_average_bound_check(&b, q)?));
        }

        let mut g = gen(3);
        for i in 0..self.count(200, 20) {
            let n = 1 + (g.random::<f64>() * 60.0) as usize;
            let f: Vec<f64> = (0..n).map(|_| -3.0 + 6.0 * g.random::<f64>()).collect();
            let s: Vec<usize> = (0..n).filter(|_| g.random::<bool>()).collect();
            let s = if s.is_empty() { vec![0] } else { s };
            let l = f.iter().sum::<f64>() / n as f64;
            let tau = gt::cyclic_shift_witness(&f, &s, l)?;
            let avg = s.iter().map(|&j| f[(j + tau) % n]).sum::<f64>() / s.len() as f64;
            rows.push(row(
                format!("vector {i}"),
                CheckReport::deterministic("cyclic_shift", format!("N = {n}"), l - avg),
            ));
        }

        let mut g = gen(4);
        for i in 0..self.count(20, 4) {
            let d = 2 + i % 7;
            let (sx, sy) = (random_cov(d, &mut g), random_cov(d, &mut g) * 0.3);
            let a = gt::anderson_check_cov(&sx, &sy, 1.0, self.n_samples, &rng.fork(1000 + i as u64))?;
            rows.push(row(format!("pair {i} dim {d}"), a.report));
        }
        let a = gt::anderson_check(
            &catalog::gap(Domain::IntegerTime),
            &catalog::iid(),
            &PathGrid::integer(0, 12),
            1.5,
            self.n_samples,
            &rng.fork(2000),
        )?;
        rows.push(row("gap + iid on 0..12", a.report));

        let u: Vec<f64> = (1..=12).map(|i| 0.25 * i as f64).collect();
        for (name, rho, n) in [
            ("sinc", catalog::sinc(), 8.0),
            ("gap:continuous", catalog::gap(Domain::ContinuousTime), 6.0),
            ("iid", catalog::iid(), 16.0),
        ] {
            let r = gt::borell_tis_check(&rho, n, &u, 5 * self.n_samples, &rng.fork(3000))?;
            rows.push(row(format!("{name} N={n}"), r.report));
        }

        let suite = [
            ("sinc", catalog::sinc(), 1.0),
            ("gap:continuous", catalog::gap(Domain::ContinuousTime), 1.0),
            ("power:0.5:continuous", catalog::power(0.5, Domain::ContinuousTime)?, 1.5),
        ];
        let ns: &[f64] = if self.quick { &[2.0, 8.0] } else { &[2.0, 8.0, 32.0] };
        for (name, rho, gamma) in &suite {
            let b = gt::ibp_constant(rho, *gamma);
            for (j, &n) in ns.iter().enumerate() {
                let quad = gt::antideriv_variance(rho, n)?;
                let mc = gt::antideriv_variance_mc(rho, n, 1.0 / 16.0, 2 * self.n_samples, &rng.fork(4000 + j as u64))?;
                rows.push(row(
                    format!("{name} N={n}"),
                    CheckReport::stochastic(
                        "antideriv_variance_mc",
                        format!("{} paths, step {}", mc.paths, mc.grid_step),
                        -(quad.value - mc.variance).abs(),
                        mc.se,
                    ),
                ));
                rows.push(row(format!("{name} N={n} b={b} gamma={gamma}"), gt::antideriv_variance_check(rho, b, *gamma, n)?));
            }
        }

        let ells: Vec<f64> = (1..=24).map(|i| 0.25 * i as f64).collect();
        let lb = gt::large_ball_check(&catalog::sinc(), 4.0, &ells, 8.0, 2 * self.n_samples, &rng.fork(5000))?;
        rows.push(row(format!("sinc c=4 N=8 threshold={:?}", lb.threshold), lb.report));

        let ks: Vec<f64> = [4.0, 16.0, 64.0]
            .iter()
            .map(|&n| gt::dudley_sup_stationary(&catalog::sinc(), n, self.n_samples, &rng.fork(6000)).map(|r| r.implied_k))
            .collect::<Result<_, _>>()?;
        let (lo, hi) = ks.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &k| (a.min(k), b.max(k)));
        rows.push(row(
            format!("sinc implied K {ks:?}"),
            CheckReport::deterministic("dudley_band", "N in {4, 16, 64}", 3.0 - hi / lo),
        ));

        let mut g = gen(7);
        for k in 1..=10 {
            let mut worst = f64::INFINITY;
            let reps = self.count(1000, 100);
            for _ in 0..reps {
                let mut c: Vec<f64> = (0..k).map(|_| -3.0 + 6.0 * g.random::<f64>()).collect();
                c.push(1.0);
                let r = chebyshev::min_norm_check(&c)?;
                worst = worst.min(r.max_abs_at_extrema - r.bound);
            }
            rows.push(row(format!("k={k}"), CheckReport::deterministic("min_norm", format!("{reps} monic polynomials"), worst)));
        }

        let mut g = gen(8);
        for k in 1..=6 {
            let nodes = chebyshev::extrema(k)?;
            for rep in 0..self.count(5, 2) {
                let c: Vec<f64> = (0..=k + 2).map(|_| -1.0 + 2.0 * g.random::<f64>()).collect();
                let dk: Vec<f64> = (k..c.len())
                    .map(|j| c[j] * (j - k + 1..=j).map(|i| i as f64).product::<f64>())
                    .collect();
                let vals: Vec<f64> = nodes.nodes.iter().map(|&x| chebyshev::poly_eval(&c, x)).collect();
                let dd = chebyshev::divided_difference(&nodes, &vals)?.leading;
                let mc = chebyshev::hermite_genocchi_mc(
                    |x| chebyshev::poly_eval(&dk, x),
                    &nodes.nodes,
                    10 * self.n_samples,
                    &rng.fork(7000 + 10 * k as u64 + rep as u64),
                )?;
                rows.push(row(
                    format!("k={k} polynomial {rep}"),
                    CheckReport::stochastic("hermite_genocchi", format!("{} samples", mc.samples), -(mc.estimate - dd).abs(), mc.se),
                ));
            }
        }

        let s_grid: Vec<f64> = (-9..=9).map(|i| i as f64 / 10.0).collect();
        for k in 1..=8 {
            let r = chebyshev::simplex_density_check(k, &s_grid, 25 * self.n_samples, &rng.fork(8000 + k as u64))?;
            let mut rep = CheckReport::deterministic("simplex_density", format!("{} samples", r.samples), r.min_density * factorial(k));
            rep.pass &= r.positive && r.within_budget;
            rows.push(row(format!("k={k} L={}", r.l_k), rep));
        }

        let n: f64 = 20.0;
        for k in 2..=10 {
            let c = chebyshev::monic_chebyshev_coeffs(k);
            let fk = factorial(k) / n.powi(k as i32);
            let r = chebyshev::verify_continuous(|x| chebyshev::poly_eval(&c, x / n), |_| fk, k, n)?;
            rows.push(row(
                format!("k={k} implied_c0={}", r.implied_c0),
                CheckReport::deterministic("chebyshev_c0", format!("N = {n}"), (1.1 - r.implied_c0).min(r.implied_c0 - 0.6)),
            ));
        }
        Ok(rows)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One test case per check family; a family fails when any of its rows does.
pub fn junit(rows: &[Row]) -> String {
    let mut families: BTreeMap<&str, Vec<&Row>> = BTreeMap::new();
    for r in rows {
        families.entry(r.report.name.as_str()).or_default().push(r);
    }
    let failures = families.values().filter(|rs| rs.iter().any(|r| !r.report.pass)).count();
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<testsuites tests=\"{}\" failures=\"{failures}\">\n  <testsuite name=\"gsp-verify\" tests=\"{}\" failures=\"{failures}\">",
        families.len(),
        families.len()
    );
    for (name, rs) in &families {
        let worst = rs
            .iter()
            .min_by(|a, b| a.report.margin.total_cmp(&b.report.margin))
            .expect("family is nonempty");
        let _ = write!(
            out,
            "    <testcase classname=\"gsp.verify\" name=\"{}\" cases=\"{}\" worst_margin=\"{}\"",
            escape(name),
            rs.len(),
            worst.report.margin
        );
        let failed: Vec<&&Row> = rs.iter().filter(|r| !r.report.pass).collect();
        if failed.is_empty() {
            out.push_str("/>\n");
        } else {
            let first = failed[0];
            let _ = writeln!(
                out,
                ">\n      <failure message=\"{} of {} cases failed; first: {} (margin {})\"/>\n    </testcase>",
                failed.len(),
                rs.len(),
                escape(&first.case),
                first.report.margin
            );
        }
    }
    out.push_str("  </testsuite>\n</testsuites>\n");
    out
}

pub fn margins_csv(rows: &[Row]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::config(format!("csv: {e}"));
    w.write_record(["name", "case", "grid_or_samples", "margin", "se", "pass"]).map_err(err)?;
    for r in rows {
        w.write_record([
            r.report.name.clone(),
            r.case.clone(),
            r.report.grid_or_samples.clone(),
            r.report.margin.to_string(),
            r.report.se.map(|s| s.to_string()).unwrap_or_default(),
            r.report.pass.to_string(),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::config(format!("csv: {e}")))
}

pub fn run(ctx: &Context, args: &VerifyArgs) -> Result<i32, CliError> {
    let p = &ctx.config.verify;
    let suite = Suite {
        n_samples: args.n_samples.unwrap_or(p.n_samples),
        quick: args.quick || p.quick,
    };
    let rows = suite.run(&ctx.rng())?;
    ctx.emit(junit(&rows).as_bytes())?;
    let margins = args.margins.clone().or_else(|| p.margins.clone()).or_else(|| ctx.sibling(".margins.csv"));
    if let Some(path) = margins {
        write_target(Some(&path), &margins_csv(&rows)?)?;
    }
    Ok(if rows.iter().all(|r| r.report.pass) {
        EXIT_OK
    } else {
        EXIT_CHECKS_FAILED
    })
}
