//! Dense symmetric helpers built on nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues in `[-PSD_CLIP, 0)` are treated as rounding noise.
pub const PSD_CLIP: f64 = 1e-10;

pub fn toeplitz(row: &[f64]) -> DMatrix<f64> {
    let n = row.len();
    DMatrix::from_fn(n, n, |i, j| row[i.abs_diff(j)])
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    Cholesky,
    /// Eigen-decomposition with tiny negative eigenvalues clipped to zero.
    ClippedEigen,
}

/// A square root `L` with `L Lᵀ = m`.
#[derive(Debug, Clone)]
pub struct Factor {
    pub l: DMatrix<f64>,
    pub kind: FactorKind,
}

pub fn psd_factor(m: &DMatrix<f64>) -> Result<Factor> {
    if let Some(ch) = m.clone().cholesky() {
        return Ok(Factor {
            l: ch.l(),
            kind: FactorKind::Cholesky,
        });
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min >= -PSD_CLIP) {
        return Err(Error::CovarianceInvalid {
            min_eigenvalue: min,
        });
    }
    let n = m.nrows();
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let floor = 64.0 * n as f64 * f64::EPSILON * max;
    let mut l = eig.eigenvectors;
    for j in 0..n {
        let v = eig.eigenvalues[j];
        let s = if v > floor { v.sqrt() } else { 0.0 };
        for i in 0..n {
            l[(i, j)] *= s;
        }
    }
    Ok(Factor {
        l,
        kind: FactorKind::ClippedEigen,
    })
}

/// Rescale a covariance to unit diagonal.
pub fn correlation(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let d: Vec<f64> = (0..n).map(|i| m[(i, i)].sqrt()).collect();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            m[(i, j)] / (d[i] * d[j])
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reproduces_matrix() {
        let m = toeplitz(&[2.0, 0.5, 0.1]);
        let f = psd_factor(&m).unwrap();
        assert_eq!(f.kind, FactorKind::Cholesky);
        assert!((&f.l * f.l.transpose() - &m).abs().max() < 1e-14);
    }

    #[test]
    fn rank_deficient_falls_back() {
        // r(n) = cos(n): rank two
        let row: Vec<f64> = (0..5).map(|k| (k as f64).cos()).collect();
        let m = toeplitz(&row);
        let f = psd_factor(&m).unwrap();
        assert!((&f.l * f.l.transpose() - &m).abs().max() < 1e-9);
    }

    #[test]
    fn indefinite_is_rejected() {
        let m = toeplitz(&[1.0, 2.0]);
        assert!(matches!(psd_factor(&m), Err(Error::CovarianceInvalid { .. })));
    }
}
