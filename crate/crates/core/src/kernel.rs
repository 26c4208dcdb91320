//! The normalized 2-D Gaussian basis function and dense kernel matrices.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::DenseMatrix;

/// Gaussian radial basis function `norm * exp(-r^2 / (2 sigma^2))`.
///
/// With normalization enabled (the default) `norm = 1 / (2 pi sigma^2)`, which
/// makes the kernel a unit-mass probability density in the plane. The
/// derived constants are computed once at construction and never exposed
/// for mutation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub struct GaussianKernel {
    sigma: f64,
    normalized: bool,
    norm: f64,
    inv_two_sigma2: f64,
}

#[derive(Serialize, Deserialize)]
struct KernelSpec {
    sigma: f64,
    normalized: bool,
}

impl TryFrom<KernelSpec> for GaussianKernel {
    type Error = Error;

    fn try_from(spec: KernelSpec) -> Result<Self> {
        Self::with_normalization(spec.sigma, spec.normalized)
    }
}

impl From<GaussianKernel> for KernelSpec {
    fn from(k: GaussianKernel) -> Self {
        KernelSpec {
            sigma: k.sigma,
            normalized: k.normalized,
        }
    }
}

impl GaussianKernel {
    /// Normalized kernel of standard deviation `sigma`.
    pub fn new(sigma: f64) -> Result<Self> {
        Self::with_normalization(sigma, true)
    }

    /// Kernel with or without the `1 / (2 pi sigma^2)` prefactor.
    pub fn with_normalization(sigma: f64, normalized: bool) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        let norm = if normalized {
            1.0 / (2.0 * PI * sigma * sigma)
        } else {
            1.0
        };
        Ok(Self {
            sigma,
            normalized,
            norm,
            inv_two_sigma2: 1.0 / (2.0 * sigma * sigma),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Peak value of the kernel, attained at zero distance.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Kernel value for a squared distance, validating the argument.
    pub fn evaluate(&self, r_squared: f64) -> Result<f64> {
        if !r_squared.is_finite() || r_squared < 0.0 {
            return Err(Error::InvalidInput(format!(
                "squared distance must be finite and nonnegative, got {r_squared}"
            )));
        }
        Ok(self.value(r_squared))
    }

    /// Unchecked kernel value; the hot path of every matrix-vector product.
    #[inline(always)]
    pub fn value(&self, r_squared: f64) -> f64 {
        self.norm * (-r_squared * self.inv_two_sigma2).exp()
    }

    /// Kernel value between two points.
    #[inline(always)]
    pub fn between(&self, a: Point, b: Point) -> f64 {
        self.value(a.dist2(b))
    }

    /// Distance at which the kernel has decayed to `rel_tol` of its peak.
    pub fn cutoff_radius(&self, rel_tol: f64) -> Result<f64> {
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(Error::InvalidInput(format!(
                "relative tolerance must lie in (0, 1), got {rel_tol}"
            )));
        }
        Ok(self.sigma * (-2.0 * rel_tol.ln()).sqrt())
    }

    /// Kernel matrix with entry `(i, j) = phi(|targets[i] - sources[j]|)`.
    pub fn assemble_dense(&self, targets: &[Point], sources: &[Point]) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(targets.len(), sources.len());
        for (i, &t) in targets.iter().enumerate() {
            let row = m.row_mut(i);
            for (entry, &s) in row.iter_mut().zip(sources) {
                *entry = self.between(t, s);
            }
        }
        m
    }

    /// Symmetric kernel (Gram) matrix of a point set. Only the lower triangle
    /// is evaluated; the upper triangle is a mirror, so the result is exactly
    /// symmetric.
    pub fn assemble_gram(&self, points: &[Point]) -> DenseMatrix {
        let n = points.len();
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.between(points[i], points[j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }
}
