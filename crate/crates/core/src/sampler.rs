//! Exact and approximate Gaussian path samplers on uniform grids.

use std::f64::consts::PI;
use std::io::{self, Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{psd_factor, toeplitz, FactorKind, PSD_CLIP};
use crate::rng::{purpose, RngSpec};
use crate::spectral::{Domain, SpectralMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    pub domain: Domain,
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl PathGrid {
    pub fn integer(start: i64, count: usize) -> Self {
        PathGrid {
            domain: Domain::IntegerTime,
            start: start as f64,
            step: 1.0,
            count,
        }
    }

    pub fn continuous(start: f64, step: f64, count: usize) -> Result<Self> {
        let g = PathGrid {
            domain: Domain::ContinuousTime,
            start,
            step,
            count,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("grid count must be >= 1"));
        }
        if !(self.step > 0.0 && self.step.is_finite() && self.start.is_finite()) {
            return Err(Error::invalid("grid step must be positive and finite"));
        }
        if self.domain == Domain::IntegerTime && (self.step != 1.0 || self.start.fract() != 0.0) {
            return Err(Error::invalid("integer-time grids have step 1 and an integer start"));
        }
        Ok(())
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.time(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub seed: u64,
    pub measure_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub grid: PathGrid,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

fn check_grid(rho: &SpectralMeasure, grid: &PathGrid) -> Result<()> {
    grid.validate()?;
    if rho.domain() != grid.domain {
        return Err(Error::invalid("grid domain differs from the measure domain"));
    }
    Ok(())
}

/// `Σ_ij = r((i − j)·step)`.
pub fn cov_matrix(rho: &SpectralMeasure, grid: &PathGrid) -> Result<DMatrix<f64>> {
    check_grid(rho, grid)?;
    if grid.count > 4000 {
        return Err(Error::invalid("covariance matrices are limited to 4000 points"));
    }
    Ok(toeplitz(&rho.covariance_row(grid.step, grid.count)))
}

fn normals(rng: &mut impl rand::Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn package(grid: &PathGrid, rows: Vec<Vec<f64>>, method: &str, rng: &RngSpec, digest: &str) -> Vec<SamplePath> {
    rows.into_iter()
        .map(|values| SamplePath {
            grid: *grid,
            values,
            provenance: Provenance {
                method: method.to_string(),
                seed: rng.seed,
                measure_digest: digest.to_string(),
            },
        })
        .collect()
}

fn exact_rows(row: &[f64], n_paths: usize, rng: &RngSpec) -> Result<(Vec<Vec<f64>>, FactorKind)> {
    let factor = psd_factor(&toeplitz(row))?;
    let n = row.len();
    let rows = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.stream(purpose::PATHS, i as u64);
            let z = DVector::from_vec(normals(&mut r, n));
            (&factor.l * z).iter().cloned().collect()
        })
        .collect();
    Ok((rows, factor.kind))
}

fn exact_tag(kind: FactorKind) -> &'static str {
    match kind {
        FactorKind::Cholesky => "exact-cholesky",
        FactorKind::ClippedEigen => "exact-eigen",
    }
}

/// Paths with exactly the Toeplitz covariance, through a Cholesky factor
/// (or a clipped eigen-factor for rank-deficient covariances).
pub fn sample_exact(rho: &SpectralMeasure, grid: &PathGrid, n_paths: usize, rng: &RngSpec) -> Result<Vec<SamplePath>> {
    check_grid(rho, grid)?;
    if grid.count > 2000 {
        return Err(Error::invalid("exact sampling is limited to 2000 points"));
    }
    if n_paths == 0 {
        return Ok(Vec::new());
    }
    let row = rho.covariance_row(grid.step, grid.count);
    let (rows, kind) = exact_rows(&row, n_paths, rng)?;
    Ok(package(grid, rows, exact_tag(kind), rng, &rho.digest()))
}

/// Eigenvalues of the circulant embedding of `r(0), r(step), …` with size
/// the power of two at least `2·count`.
pub fn circulant_spectrum(kernel: &(dyn Fn(f64) -> f64 + Sync), step: f64, count: usize) -> Vec<f64> {
    let m = (2 * count).next_power_of_two();
    let half: Vec<f64> = (0..=m / 2).into_par_iter().map(|k| kernel(k as f64 * step)).collect();
    let mut buf: Vec<Complex64> = (0..m).map(|k| Complex64::new(half[k.min(m - k)], 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    buf.iter().map(|z| z.re).collect()
}

/// Circulant-embedding sampler for an arbitrary stationary kernel. When the
/// embedding has an eigenvalue below `−1e−10` the exact sampler is used and
/// the method tag records the fallback.
pub fn sample_circulant_kernel(
    kernel: &(dyn Fn(f64) -> f64 + Sync),
    grid: &PathGrid,
    n_paths: usize,
    rng: &RngSpec,
) -> Result<(Vec<Vec<f64>>, String)> {
    grid.validate()?;
    let count = grid.count;
    let spectrum = circulant_spectrum(kernel, grid.step, count);
    let min = spectrum.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -PSD_CLIP {
        if count > 2000 {
            return Err(Error::CovarianceInvalid { min_eigenvalue: min });
        }
        let row: Vec<f64> = (0..count).map(|k| kernel(k as f64 * grid.step)).collect();
        let (rows, kind) = exact_rows(&row, n_paths, rng)?;
        return Ok((rows, format!("circulant-fallback-{}", exact_tag(kind))));
    }
    let m = spectrum.len();
    let scale: Vec<f64> = spectrum.iter().map(|&l| (l.max(0.0) / m as f64).sqrt()).collect();
    let fft = FftPlanner::new().plan_fft_forward(m);
    let pairs = n_paths.div_ceil(2);
    let mut rows: Vec<Vec<f64>> = (0..pairs)
        .into_par_iter()
        .flat_map_iter(|j| {
            let mut r = rng.stream(purpose::PATHS, j as u64);
            let z = normals(&mut r, 2 * m);
            let mut buf: Vec<Complex64> = (0..m).map(|k| Complex64::new(z[2 * k], z[2 * k + 1]) * scale[k]).collect();
            fft.process(&mut buf);
            let re = buf[..count].iter().map(|c| c.re).collect::<Vec<_>>();
            let im = buf[..count].iter().map(|c| c.im).collect::<Vec<_>>();
            [re, im]
        })
        .collect();
    rows.truncate(n_paths);
    Ok((rows, "circulant".to_string()))
}

pub fn sample_circulant(
    rho: &SpectralMeasure,
    grid: &PathGrid,
    n_paths: usize,
    rng: &RngSpec,
) -> Result<Vec<SamplePath>> {
    check_grid(rho, grid)?;
    if n_paths == 0 {
        return Ok(Vec::new());
    }
    let kernel = |t: f64| rho.covariance(t);
    let (rows, tag) = sample_circulant_kernel(&kernel, grid, n_paths, rng)?;
    Ok(package(grid, rows, &tag, rng, &rho.digest()))
}

/// One mode of a spectral sum: frequency and the symmetric-pair mass it carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub frequency: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSample {
    pub paths: Vec<SamplePath>,
    pub modes: Vec<Mode>,
    /// Widest cell of the partition of the continuous part (`+∞` when a cell
    /// is unbounded, 0 without a continuous part). The covariance error at lag
    /// `t` is at most `|t|·modulus·m₀`.
    pub partition_modulus: f64,
}

/// Inverse of the continuous part's distribution function on `[0, ∞)`.
fn density_quantile(rho: &SpectralMeasure, target: f64) -> f64 {
    let dens = |x: f64| rho.density_mass_below(x);
    let mut hi = rho.support_sup();
    if hi.is_infinite() {
        hi = rho.segments().iter().map(|s| s.a).fold(1.0, f64::max) * 2.0;
        while dens(hi) < target {
            hi *= 2.0;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        if dens(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Equal-mass cells of the continuous part with frequencies at the cell
/// mass medians; atoms become their own modes.
pub fn spectral_modes(rho: &SpectralMeasure, n_modes: usize) -> Result<(Vec<Mode>, f64)> {
    if n_modes == 0 {
        return Err(Error::invalid("n_modes must be >= 1"));
    }
    let mut modes: Vec<Mode> = rho
        .atoms()
        .iter()
        .filter(|a| a.mass > 0.0)
        .map(|a| Mode {
            frequency: a.location,
            mass: a.mass,
        })
        .collect();
    let half = rho.density_mass_below(f64::INFINITY);
    let mut modulus: f64 = 0.0;
    if half > 0.0 {
        let cell = half / n_modes as f64;
        let mut edges = vec![rho.segments()[0].a];
        for j in 1..n_modes {
            edges.push(density_quantile(rho, j as f64 * cell));
        }
        edges.push(rho.support_sup());
        for j in 0..n_modes {
            modulus = modulus.max(edges[j + 1] - edges[j]);
            modes.push(Mode {
                frequency: density_quantile(rho, (j as f64 + 0.5) * cell),
                mass: 2.0 * cell,
            });
        }
    }
    Ok((modes, modulus))
}

/// `f(t) = Σ_j √m_j (ξ_j cos λ_j t + η_j sin λ_j t)` over a finite partition.
pub fn sample_spectral(rho: &SpectralMeasure, grid: &PathGrid, n_modes: usize, n_paths: usize, rng: &RngSpec) -> Result<SpectralSample> {
    check_grid(rho, grid)?;
    let (modes, partition_modulus) = spectral_modes(rho, n_modes)?;
    let times = grid.times();
    let rows = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.stream(purpose::SPECTRAL, i as u64);
            let z = normals(&mut r, 2 * modes.len());
            times
                .iter()
                .map(|&t| {
                    modes
                        .iter()
                        .enumerate()
                        .map(|(j, m)| m.mass.sqrt() * (z[2 * j] * (m.frequency * t).cos() + z[2 * j + 1] * (m.frequency * t).sin()))
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(SpectralSample {
        paths: package(grid, rows, &format!("spectral-{n_modes}"), rng, &rho.digest()),
        modes,
        partition_modulus,
    })
}

/// Covariance of the spectral-sum process, `Σ_j m_j cos(λ_j t)`.
pub fn modes_covariance(modes: &[Mode], t: f64) -> f64 {
    modes.iter().map(|m| m.mass * (m.frequency * t).cos()).sum()
}

/// k-fold forward difference.
pub fn discrete_diff(path: &SamplePath, k: usize) -> Result<SamplePath> {
    if path.grid.domain != Domain::IntegerTime {
        return Err(Error::invalid("differences apply to integer-time paths"));
    }
    if path.grid.count <= k {
        return Err(Error::invalid(format!("path of length {} is too short for order {k}", path.grid.count)));
    }
    let mut v = path.values.clone();
    for _ in 0..k {
        v = v.windows(2).map(|w| w[1] - w[0]).collect();
    }
    let mut out = path.clone();
    out.grid.count = v.len();
    out.values = v;
    out.provenance.method = format!("{}+diff{k}", path.provenance.method);
    Ok(out)
}

pub fn derivative_measure(rho: &SpectralMeasure) -> Result<SpectralMeasure> {
    rho.derivative_measure()
}

pub fn antiderivative_measure(rho: &SpectralMeasure) -> Result<SpectralMeasure> {
    rho.antiderivative_measure()
}

pub fn write_csv<W: Write>(paths: &[SamplePath], mut out: W) -> io::Result<()> {
    writeln!(out, "t,value,path_id")?;
    for (id, p) in paths.iter().enumerate() {
        for (i, v) in p.values.iter().enumerate() {
            writeln!(out, "{},{},{}", p.grid.time(i), v, id)?;
        }
    }
    Ok(())
}

pub const BINARY_MAGIC: &[u8; 4] = b"GSPP";
pub const BINARY_VERSION: u32 = 1;

/// Binary dump, little endian: magic `GSPP`, `u32` version, `u8` domain
/// (0 integer, 1 continuous), `f64` start, `f64` step, `u64` count,
/// `u64` number of paths, then the values path by path as `f64`.
pub fn write_binary<W: Write>(paths: &[SamplePath], mut out: W) -> Result<()> {
    let grid = paths.first().map(|p| p.grid).unwrap_or(PathGrid::integer(0, 0));
    if paths.iter().any(|p| p.grid != grid) {
        return Err(Error::invalid("all paths in a dump must share one grid"));
    }
    let io = |e: io::Error| Error::Numerical(e.to_string());
    out.write_all(BINARY_MAGIC).map_err(io)?;
    out.write_all(&BINARY_VERSION.to_le_bytes()).map_err(io)?;
    let dom = match grid.domain {
        Domain::IntegerTime => 0u8,
        Domain::ContinuousTime => 1u8,
    };
    out.write_all(&[dom]).map_err(io)?;
    out.write_all(&grid.start.to_le_bytes()).map_err(io)?;
    out.write_all(&grid.step.to_le_bytes()).map_err(io)?;
    out.write_all(&(grid.count as u64).to_le_bytes()).map_err(io)?;
    out.write_all(&(paths.len() as u64).to_le_bytes()).map_err(io)?;
    for p in paths {
        for v in &p.values {
            out.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

/// Reads a dump back as a grid and one value vector per path.
pub fn read_binary<R: Read>(mut input: R) -> Result<(PathGrid, Vec<Vec<f64>>)> {
    let io = |e: io::Error| Error::invalid(format!("truncated dump: {e}"));
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b4).map_err(io)?;
    if &b4 != BINARY_MAGIC {
        return Err(Error::invalid("not a GSPP dump"));
    }
    input.read_exact(&mut b4).map_err(io)?;
    if u32::from_le_bytes(b4) != BINARY_VERSION {
        return Err(Error::invalid("unsupported dump version"));
    }
    let mut b1 = [0u8; 1];
    input.read_exact(&mut b1).map_err(io)?;
    let domain = match b1[0] {
        0 => Domain::IntegerTime,
        1 => Domain::ContinuousTime,
        d => return Err(Error::invalid(format!("unknown domain byte {d}"))),
    };
    let mut f64_read = |input: &mut R| -> Result<[u8; 8]> {
        input.read_exact(&mut b8).map_err(io)?;
        Ok(b8)
    };
    let start = f64::from_le_bytes(f64_read(&mut input)?);
    let step = f64::from_le_bytes(f64_read(&mut input)?);
    let count = u64::from_le_bytes(f64_read(&mut input)?) as usize;
    let n = u64::from_le_bytes(f64_read(&mut input)?) as usize;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(count);
        for _ in 0..count {
            row.push(f64::from_le_bytes(f64_read(&mut input)?));
        }
        rows.push(row);
    }
    Ok((
        PathGrid {
            domain,
            start,
            step,
            count,
        },
        rows,
    ))
}

/// Grid of `count` points covering `[0, 2π)`.
pub fn period_grid(count: usize) -> Result<PathGrid> {
    PathGrid::continuous(0.0, 2.0 * PI / count as f64, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::catalog;

    #[test]
    fn covariance_matrix_examples() {
        let id = cov_matrix(&catalog::iid(), &PathGrid::integer(0, 3)).unwrap();
        assert!((id - DMatrix::identity(3, 3)).abs().max() < 1e-14);
        let a = catalog::atoms(&[(1.0, 1.0)], Domain::IntegerTime).unwrap();
        let m = cov_matrix(&a, &PathGrid::integer(0, 3)).unwrap();
        assert!((m[(0, 2)] - 2f64.cos()).abs() < 1e-15 && (m[(2, 1)] - 1f64.cos()).abs() < 1e-15);
        let s = cov_matrix(&catalog::sinc(), &PathGrid::continuous(0.0, 0.5, 3).unwrap()).unwrap();
        assert!((s[(0, 1)] - 2.0 / PI).abs() < 1e-13 && s[(0, 2)].abs() < 1e-13);
    }

    #[test]
    fn rank_two_paths_are_trigonometric() {
        let a = catalog::atoms(&[(1.0, 1.0)], Domain::IntegerTime).unwrap();
        let grid = PathGrid::integer(0, 12);
        for p in sample_exact(&a, &grid, 20, &RngSpec::new(3)).unwrap() {
            // fit A cos t + B sin t from the first two points, check the rest
            let (a0, a1) = (p.values[0], p.values[1]);
            let b = (a1 - a0 * 1f64.cos()) / 1f64.sin();
            for (i, v) in p.values.iter().enumerate() {
                let t = i as f64;
                assert!((v - (a0 * t.cos() + b * t.sin())).abs() < 1e-8);
            }
        }
        assert!(sample_exact(&a, &grid, 0, &RngSpec::new(3)).unwrap().is_empty());
    }

    #[test]
    fn iid_circulant_spectrum_is_flat() {
        let rho = catalog::iid();
        let spec = circulant_spectrum(&|t| rho.covariance(t), 1.0, 1024);
        assert!(spec.iter().all(|&l| (l - 1.0).abs() < 1e-10));
        let paths = sample_circulant(&rho, &PathGrid::integer(0, 1024), 3, &RngSpec::new(1)).unwrap();
        assert_eq!(paths[0].provenance.method, "circulant");
        assert_eq!(paths.len(), 3);
    }

    #[test]
    fn rank_two_circulant_falls_back() {
        let a = catalog::atoms(&[(1.0, 1.0)], Domain::IntegerTime).unwrap();
        let spec = circulant_spectrum(&|t| a.covariance(t), 1.0, 16);
        assert!(spec.iter().cloned().fold(f64::INFINITY, f64::min) < -1e-10);
        let paths = sample_circulant(&a, &PathGrid::integer(0, 16), 4, &RngSpec::new(1)).unwrap();
        assert!(paths[0].provenance.method.starts_with("circulant-fallback"));
    }

    #[test]
    fn differences() {
        let grid = PathGrid::integer(0, 8);
        let mk = |f: &dyn Fn(f64) -> f64| SamplePath {
            grid,
            values: grid.times().iter().map(|&t| f(t)).collect(),
            provenance: Provenance {
                method: "test".into(),
                seed: 0,
                measure_digest: String::new(),
            },
        };
        assert!(discrete_diff(&mk(&|_| 3.0), 1).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(discrete_diff(&mk(&|t| t * t), 2).unwrap().values.iter().all(|&v| v == 2.0));
        let d3 = discrete_diff(&mk(&|t| t * t * t), 3).unwrap();
        assert!(d3.values.iter().all(|&v| v == 6.0) && d3.grid.count == 5);
        assert!(discrete_diff(&mk(&|t| t), 8).is_err());
    }

    #[test]
    fn spectral_modes_of_atoms_are_exact() {
        let a = catalog::atoms(&[(0.5, 0.3), (2.0, 0.7)], Domain::IntegerTime).unwrap();
        let (modes, modulus) = spectral_modes(&a, 5).unwrap();
        assert_eq!(modes.len(), 2);
        assert_eq!(modulus, 0.0);
        for t in 0..10 {
            assert!((modes_covariance(&modes, t as f64) - a.covariance(t as f64)).abs() < 1e-14);
        }
        let (one, _) = spectral_modes(&catalog::iid(), 1).unwrap();
        assert!((one[0].frequency - PI / 2.0).abs() < 1e-12 && (one[0].mass - 1.0).abs() < 1e-14);
    }

    #[test]
    fn binary_round_trip() {
        let rho = catalog::sinc();
        let grid = PathGrid::continuous(0.0, 0.25, 7).unwrap();
        let paths = sample_exact(&rho, &grid, 3, &RngSpec::new(9)).unwrap();
        let mut buf = Vec::new();
        write_binary(&paths, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"GSPP");
        let (g, rows) = read_binary(&buf[..]).unwrap();
        assert_eq!(g, grid);
        for (p, r) in paths.iter().zip(rows) {
            assert_eq!(p.values, r);
        }
        let mut csv = Vec::new();
        write_csv(&paths, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 21);
    }
}
