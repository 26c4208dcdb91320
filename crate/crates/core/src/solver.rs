//! End-to-end interpolation: decomposition, preconditioner setup, and
//! preconditioned GMRES on the truncated kernel operator.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{BoxWidths, Decomposition};
use crate::error::{Error, Result};
use crate::geometry::{Point, PointSet};
use crate::kernel::GaussianKernel;
use crate::linalg::{gmres, GmresParams};
use crate::operator::{SummationMode, TruncatedOperator};
use crate::schwarz::{SchwarzPreconditioner, SchwarzVariant};

/// Solver configuration. Box widths are absolute lengths; the constructors
/// express them in units of `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub sigma: f64,
    pub widths: BoxWidths,
    pub variant: SchwarzVariant,
    pub gmres: GmresParams,
    /// Worker threads for setup, operator and preconditioner.
    pub threads: usize,
    /// Include the `1 / (2 pi sigma^2)` kernel prefactor.
    pub normalized: bool,
}

impl SolveConfig {
    /// `B = 5 sigma`, `D = 1.9 B`, `T = B + 4 sigma`: tuned for lattice data.
    pub fn lattice_defaults(sigma: f64) -> Self {
        Self::from_ratios(sigma, 5.0, 1.9, 4.0)
    }

    /// `B = 6 sigma`, `D = 1.9 B`, `T = B + 6 sigma`: tuned for quasi-scattered data.
    pub fn scattered_defaults(sigma: f64) -> Self {
        Self::from_ratios(sigma, 6.0, 1.9, 6.0)
    }

    /// `B = b_over_sigma * sigma`, `D = d_over_b * B`, `T = B + t_margin * sigma`.
    pub fn from_ratios(sigma: f64, b_over_sigma: f64, d_over_b: f64, t_margin: f64) -> Self {
        let cell = b_over_sigma * sigma;
        Self {
            sigma,
            widths: BoxWidths::new(cell, d_over_b * cell, cell + t_margin * sigma),
            variant: SchwarzVariant::Rasm,
            gmres: GmresParams::default(),
            threads: 1,
            normalized: true,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_variant(mut self, variant: SchwarzVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_gmres(mut self, gmres: GmresParams) -> Self {
        self.gmres = gmres;
        self
    }

    pub fn with_widths(mut self, widths: BoxWidths) -> Self {
        self.widths = widths;
        self
    }

    pub fn validate(&self) -> Result<()> {
        GaussianKernel::new(self.sigma)?;
        self.widths.validate()?;
        self.gmres.validate()?;
        if self.threads == 0 {
            return Err(Error::InvalidParameter("threads must be >= 1".into()));
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<GaussianKernel> {
        GaussianKernel::with_normalization(self.sigma, self.normalized)
    }
}

/// `s(x) = sum_j weights[j] * phi(|x - centers[j]|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    kernel: GaussianKernel,
    centers: Vec<Point>,
    weights: Vec<f64>,
}

impl Interpolant {
    pub fn new(kernel: GaussianKernel, centers: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if centers.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: centers.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be finite".into()));
        }
        Ok(Self {
            kernel,
            centers,
            weights,
        })
    }

    pub fn kernel(&self) -> &GaussianKernel {
        &self.kernel
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Evaluates the interpolant. With a decomposition of the centers, each
    /// query only sums centers in the truncation box of the cell containing
    /// it (queries outside the bounding box use the nearest cell).
    pub fn evaluate(&self, queries: &[Point], decomp: Option<&Decomposition>) -> Result<Vec<f64>> {
        if let Some(i) = queries.iter().position(|q| !q.is_finite()) {
            return Err(Error::InvalidInput(format!("query {i} is not finite")));
        }
        if let Some(d) = decomp {
            if d.n_points() != self.centers.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.centers.len(),
                    found: d.n_points(),
                });
            }
        }
        let k = self.kernel;
        let (c, w) = (&self.centers, &self.weights);
        Ok(queries
            .par_iter()
            .map(|&q| match decomp {
                Some(d) => d.cells()[d.locate(q)]
                    .trunc
                    .iter()
                    .fold(0.0, |acc, &j| acc + w[j] * k.between(q, c[j])),
                None => c.iter().zip(w).fold(0.0, |acc, (&p, wj)| acc + wj * k.between(q, p)),
            })
            .collect())
    }
}

/// Seconds per phase. `setup` covers decomposition and factorization;
/// `matvec`, `subdomain_solve` and `orthogonalization` are spent inside GMRES.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseTimes {
    pub setup: f64,
    pub matvec: f64,
    pub subdomain_solve: f64,
    pub orthogonalization: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveReport {
    pub n_points: usize,
    pub subdomain_count: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Preconditioned residual norm, initial value first, then one per iteration.
    pub residual_history: Vec<f64>,
    pub preconditioned_residual: f64,
    /// `|b - A x|_2` with the truncated operator.
    pub true_residual: f64,
    pub wall_times: PhaseTimes,
    /// Analytic count of stored reals and indices.
    pub storage_estimate: usize,
}

/// Solves for the interpolation weights of `points` (which must carry values).
///
/// Runs inside a dedicated pool of `config.threads` workers. Failing to reach
/// the tolerance within `max_iters` is reported through `converged`, not as
/// an error.
pub fn solve(points: &PointSet, config: &SolveConfig) -> Result<(Interpolant, SolveReport)> {
    config.validate()?;
    let values = points
        .values()
        .ok_or_else(|| Error::InvalidInput("point set has no sample values".into()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;

    pool.install(|| {
        let start = Instant::now();
        let kernel = config.kernel()?;
        let decomp = Decomposition::build(points, config.widths)?;
        let pc = SchwarzPreconditioner::setup(points, &kernel, &decomp, config.variant)?;
        let setup = start.elapsed().as_secs_f64();

        let op = TruncatedOperator::new(kernel, points, &decomp, SummationMode::Truncated)?;
        let n = points.len();
        let out = gmres(&op, &pc, values, &vec![0.0; n], &config.gmres)?;
        let total = start.elapsed().as_secs_f64();

        let restart = config.gmres.restart;
        let gmres_storage = (restart + 1) * n + 4 * n + restart * (restart + 1) + 3 * restart;
        let storage_estimate = 3 * n + decomp.index_count() + pc.stored_reals() + gmres_storage + out.history.len();

        let report = SolveReport {
            n_points: n,
            subdomain_count: pc.subdomain_count(),
            iterations: out.iterations,
            converged: out.converged,
            preconditioned_residual: out.residual(),
            residual_history: out.history,
            true_residual: out.true_residual,
            wall_times: PhaseTimes {
                setup,
                matvec: out.timings.matvec,
                subdomain_solve: out.timings.precond,
                orthogonalization: out.timings.orthogonalization,
                total,
            },
            storage_estimate,
        };
        let interp = Interpolant::new(kernel, points.coords().to_vec(), out.x)?;
        Ok((interp, report))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub b_over_sigma: f64,
    pub d_over_b: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub converged: bool,
    /// Set when the solve failed outright (e.g. a singular subdomain).
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    /// Sorted by wall time, fastest first.
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Fastest converged row.
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.converged)
    }

    /// 0-based wall-time rank of the row at the given ratios.
    pub fn rank_of(&self, b_over_sigma: f64, d_over_b: f64) -> Option<usize> {
        self.rows
            .iter()
            .position(|r| (r.b_over_sigma - b_over_sigma).abs() < 1e-9 && (r.d_over_b - d_over_b).abs() < 1e-9)
    }
}

/// One solve per `(B / sigma, D / B)` pair on the same inputs. The truncation
/// margin `T - B` of `base` is kept fixed across the grid.
pub fn sweep(points: &PointSet, base: &SolveConfig, b_over_sigma: &[f64], d_over_b: &[f64]) -> Result<SweepTable> {
    if b_over_sigma.is_empty() || d_over_b.is_empty() {
        return Err(Error::InvalidParameter("sweep ranges must be nonempty".into()));
    }
    let margin = base.widths.trunc - base.widths.cell;
    let mut rows = Vec::with_capacity(b_over_sigma.len() * d_over_b.len());
    for &b in b_over_sigma {
        for &d in d_over_b {
            let cell = b * base.sigma;
            let config = base.with_widths(BoxWidths::new(cell, d * cell, cell + margin));
            let row = match solve(points, &config) {
                Ok((_, report)) => SweepRow {
                    b_over_sigma: b,
                    d_over_b: d,
                    iterations: report.iterations,
                    seconds: report.wall_times.total,
                    converged: report.converged,
                    error: None,
                },
                Err(e @ Error::InvalidParameter(_)) => return Err(e),
                Err(e) => SweepRow {
                    b_over_sigma: b,
                    d_over_b: d,
                    iterations: 0,
                    seconds: f64::INFINITY,
                    converged: false,
                    error: Some(e.to_string()),
                },
            };
            rows.push(row);
        }
    }
    rows.sort_by(|a, b| a.seconds.total_cmp(&b.seconds));
    Ok(SweepTable { rows })
}
