//! Restricted and classical additive Schwarz preconditioners.
//!
//! Each nonempty cell contributes a subdomain: the dense kernel matrix on its
//! overlap set, factorized once at setup. Applying the preconditioner gathers
//! the residual on every overlap set, solves locally, and scatters back either
//! the entries the cell owns (restricted variant, `sum R~_i^T A_i^-1 R_i`) or
//! the whole local solution (classical variant, `sum R_i^T A_i^-1 R_i`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{split_by_offsets, Decomposition};
use crate::error::{Error, Result};
use crate::geometry::{Point, PointSet};
use crate::kernel::GaussianKernel;
use crate::linalg::{factorize, DenseMatrix, Factorization, LinearOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchwarzVariant {
    /// Restricted additive Schwarz: each subdomain updates only the points it owns.
    Rasm,
    /// Additive Schwarz: overlapping updates are summed.
    Asm,
}

#[derive(Debug, Clone)]
struct Subdomain {
    cell: usize,
    overlap: Vec<usize>,
    /// Position of each owned point inside `overlap`.
    inner_pos: Vec<usize>,
    factor: Factorization,
}

#[derive(Debug, Clone)]
pub struct SchwarzPreconditioner {
    variant: SchwarzVariant,
    n_points: usize,
    subdomains: Vec<Subdomain>,
    inner_order: Vec<usize>,
    inner_offsets: Vec<usize>,
}

/// Untruncated kernel matrix restricted to `indices`.
pub(crate) fn local_matrix(kernel: &GaussianKernel, coords: &[Point], indices: &[usize]) -> DenseMatrix {
    let local: Vec<Point> = indices.iter().map(|&j| coords[j]).collect();
    kernel.assemble_gram(&local)
}

impl SchwarzPreconditioner {
    /// Assembles and factorizes the subdomain matrices of every nonempty cell.
    pub fn setup(
        points: &PointSet,
        kernel: &GaussianKernel,
        decomp: &Decomposition,
        variant: SchwarzVariant,
    ) -> Result<Self> {
        if decomp.n_points() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: decomp.n_points(),
            });
        }
        let coords = points.coords();
        let subdomains: Vec<Subdomain> = decomp
            .cells()
            .par_iter()
            .enumerate()
            .filter(|(_, c)| !c.inner.is_empty())
            .map(|(idx, cell)| {
                let factor = factorize(&local_matrix(kernel, coords, &cell.overlap)).map_err(|e| Error::Subdomain {
                    ix: cell.ix,
                    iy: cell.iy,
                    source: Box::new(e),
                })?;
                let inner_pos = cell
                    .inner
                    .iter()
                    .map(|i| {
                        cell.overlap
                            .binary_search(i)
                            .expect("inner set is nested in overlap set")
                    })
                    .collect();
                Ok(Subdomain {
                    cell: idx,
                    overlap: cell.overlap.clone(),
                    inner_pos,
                    factor,
                })
            })
            .collect::<Result<_>>()?;

        let mut inner_order = Vec::with_capacity(points.len());
        let mut inner_offsets = vec![0];
        for s in &subdomains {
            inner_order.extend(s.inner_pos.iter().map(|&p| s.overlap[p]));
            inner_offsets.push(inner_order.len());
        }
        Ok(Self {
            variant,
            n_points: points.len(),
            subdomains,
            inner_order,
            inner_offsets,
        })
    }

    pub fn variant(&self) -> SchwarzVariant {
        self.variant
    }

    pub fn subdomain_count(&self) -> usize {
        self.subdomains.len()
    }

    /// Indices (into the decomposition's cell list) of the cells holding a subdomain.
    pub fn subdomain_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.subdomains.iter().map(|s| s.cell)
    }

    /// Reals and indices held: factors, overlap lists and ownership lists.
    pub fn stored_reals(&self) -> usize {
        let per_subdomain: usize = self
            .subdomains
            .iter()
            .map(|s| s.factor.stored_reals() + s.overlap.len() + s.inner_pos.len())
            .sum();
        per_subdomain + self.inner_order.len() + self.inner_offsets.len()
    }

    /// `z = M^{-1} r`.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n_points {
            return Err(Error::DimensionMismatch {
                expected: self.n_points,
                found: r.len(),
            });
        }
        let mut z = vec![0.0; r.len()];
        self.apply_into(r, &mut z);
        Ok(z)
    }

    fn local_solve(s: &Subdomain, r: &[f64]) -> Vec<f64> {
        let mut local: Vec<f64> = s.overlap.iter().map(|&j| r[j]).collect();
        s.factor
            .solve_in_place(&mut local)
            .expect("local dimensions match by construction");
        local
    }

    fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        match self.variant {
            SchwarzVariant::Rasm => {
                // Owned sets partition the points, so every entry of z is
                // written exactly once.
                let mut staged = vec![0.0; self.inner_order.len()];
                split_by_offsets(&mut staged, &self.inner_offsets)
                    .into_par_iter()
                    .zip(self.subdomains.par_iter())
                    .for_each(|(out, s)| {
                        let local = Self::local_solve(s, r);
                        for (o, &p) in out.iter_mut().zip(&s.inner_pos) {
                            *o = local[p];
                        }
                    });
                for (&i, v) in self.inner_order.iter().zip(staged) {
                    z[i] = v;
                }
            }
            SchwarzVariant::Asm => {
                let locals: Vec<Vec<f64>> = self.subdomains.par_iter().map(|s| Self::local_solve(s, r)).collect();
                z.fill(0.0);
                for (s, local) in self.subdomains.iter().zip(locals) {
                    for (&j, v) in s.overlap.iter().zip(local) {
                        z[j] += v;
                    }
                }
            }
        }
    }
}

impl LinearOperator for SchwarzPreconditioner {
    fn dim(&self) -> usize {
        self.n_points
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_into(x, y);
    }
}
