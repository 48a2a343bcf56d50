//! Within-subject covariance and its projection orthogonal to the period
//! constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::{Field, Real};

/// Smallest eigenvalue must exceed this fraction of the largest.
pub const PD_RELATIVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceSpec<T> {
    Identity,
    /// Unit diagonal with `rho` on the first off-diagonals.
    Tridiagonal { rho: T },
    Custom(Mat<T>),
}

impl<T: Field> CovarianceSpec<T> {
    /// The `p x p` matrix, without definiteness checks.
    pub fn sigma(&self, p: usize) -> Result<Mat<T>> {
        match self {
            CovarianceSpec::Identity => Ok(Mat::identity(p)),
            CovarianceSpec::Tridiagonal { rho } => Ok(Mat::from_fn(p, p, |i, j| {
                if i == j {
                    T::one()
                } else if i + 1 == j || j + 1 == i {
                    *rho
                } else {
                    T::zero()
                }
            })),
            CovarianceSpec::Custom(m) => {
                if m.rows() != p || m.cols() != p {
                    return Err(Error::Dimension(format!(
                        "custom covariance is {}x{}, expected {p}x{p}",
                        m.rows(),
                        m.cols()
                    )));
                }
                Ok(m.clone())
            }
        }
    }
}

impl<T: Real> CovarianceSpec<T> {
    /// Builds the matrix and checks symmetry and positive definiteness.
    pub fn validated_sigma(&self, p: usize) -> Result<Mat<T>> {
        if let CovarianceSpec::Tridiagonal { rho } = self {
            // eigenvalues are 1 + 2 rho cos(k pi / (p + 1)), k = 1..p
            let bound = T::one()
                / (T::from_int(2) * (T::from_f64(std::f64::consts::PI) / T::from_int(p as i64 + 1)).cos());
            if !(rho.abs() < bound) {
                let c = (std::f64::consts::PI / (p as f64 + 1.0)).cos();
                let r = rho.as_f64();
                return Err(Error::NotPositiveDefinite {
                    min_eig: 1.0 - 2.0 * r.abs() * c,
                    max_eig: 1.0 + 2.0 * r.abs() * c,
                });
            }
        }
        let sigma = self.sigma(p)?;
        let scale = sigma.max_abs().max(T::one());
        if sigma.max_asymmetry() > T::from_f64(1e-12) * scale {
            return Err(Error::NotSymmetric);
        }
        let eig = sigma.symmetric_eigen();
        let min = eig.values[0];
        let max = eig.values[p - 1];
        if !(max > T::zero()) || !(min > T::from_f64(PD_RELATIVE_TOLERANCE) * max) {
            return Err(Error::NotPositiveDefinite {
                min_eig: min.as_f64(),
                max_eig: max.as_f64(),
            });
        }
        Ok(sigma)
    }
}

/// `B~ = S^-1 - S^-1 J S^-1 / (1' S^-1 1)`: symmetric, rows sum to zero,
/// rank `p - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedCovariance<T> {
    btilde: Mat<T>,
}

impl<T: Field> ProjectedCovariance<T> {
    /// Projection of an invertible `sigma`; no definiteness check, so this
    /// also serves exact rational arithmetic.
    pub fn from_sigma(sigma: &Mat<T>) -> Result<Self> {
        let inv = sigma.inverse()?;
        let v = inv.row_sums();
        let total = v.iter().fold(T::zero(), |acc, &x| acc + x);
        if total == T::zero() {
            return Err(Error::Singular);
        }
        let p = sigma.rows();
        let btilde = Mat::from_fn(p, p, |i, j| inv[(i, j)] - v[i] * v[j] / total);
        Ok(ProjectedCovariance { btilde })
    }

    pub fn exact(spec: &CovarianceSpec<T>, p: usize) -> Result<Self> {
        Self::from_sigma(&spec.sigma(p)?)
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.btilde
    }

    pub fn p(&self) -> usize {
        self.btilde.rows()
    }
}

/// Validated projection used by the floating point pipeline.
pub fn btilde<T: Real>(spec: &CovarianceSpec<T>, p: usize) -> Result<ProjectedCovariance<T>> {
    ProjectedCovariance::from_sigma(&spec.validated_sigma(p)?)
}

/// Serialized covariance description shared by design files and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSpecJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl SigmaSpecJson {
    pub fn into_spec(self) -> Result<CovarianceSpec<f64>> {
        match self.kind.as_str() {
            "identity" => Ok(CovarianceSpec::Identity),
            "tridiagonal" => {
                let rho = self
                    .rho
                    .ok_or_else(|| Error::Parse("tridiagonal sigma needs \"rho\"".into()))?;
                Ok(CovarianceSpec::Tridiagonal { rho })
            }
            "custom" => {
                let rows = self
                    .matrix
                    .ok_or_else(|| Error::Parse("custom sigma needs \"matrix\"".into()))?;
                Ok(CovarianceSpec::Custom(Mat::from_rows(&rows)?))
            }
            other => Err(Error::Parse(format!("unknown sigma kind {other:?}"))),
        }
    }

    pub fn from_spec(spec: &CovarianceSpec<f64>) -> Self {
        match spec {
            CovarianceSpec::Identity => SigmaSpecJson {
                kind: "identity".into(),
                rho: None,
                matrix: None,
            },
            CovarianceSpec::Tridiagonal { rho } => SigmaSpecJson {
                kind: "tridiagonal".into(),
                rho: Some(*rho),
                matrix: None,
            },
            CovarianceSpec::Custom(m) => SigmaSpecJson {
                kind: "custom".into(),
                rho: None,
                matrix: Some(m.to_rows()),
            },
        }
    }
}
