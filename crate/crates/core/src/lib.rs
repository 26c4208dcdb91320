//! Linear-time Gaussian radial basis function interpolation.
//!
//! The interpolation system `A lambda = f`, with `A_ij` the normalized
//! Gaussian between data sites `i` and `j`, is solved by restarted GMRES
//! preconditioned with a restricted additive Schwarz method over a box
//! decomposition of the plane. Matrix-vector products only sum sources inside
//! a truncation box around each target cell, so both time and storage grow
//! linearly with the number of points when `sigma` shrinks with the spacing.
//!
//! ```
//! use gaussrbf::{franke, lattice_points, sample_values, solve, LatticeSpec, SolveConfig};
//!
//! let spec = LatticeSpec::unit_square(0.05).unwrap();
//! let points = sample_values(lattice_points(&spec), |p| franke(p.x, p.y)).unwrap();
//! let (interp, report) = solve(&points, &SolveConfig::lattice_defaults(0.05)).unwrap();
//! assert!(report.converged);
//! assert_eq!(interp.weights().len(), points.len());
//! ```

pub mod decomposition;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod linalg;
pub mod operator;
pub mod problems;
pub mod scaling;
pub mod schwarz;
pub mod solver;

pub use decomposition::{BoxWidths, Cell, Decomposition};
pub use error::{Error, Result};
pub use geometry::{BoundingBox, Point, PointSet};
pub use kernel::GaussianKernel;
pub use linalg::{factorize, gmres, DenseMatrix, FactorKind, Factorization, GmresOutcome, GmresParams, LinearOperator};
pub use operator::{SummationMode, TruncatedOperator};
pub use problems::{franke, lattice_points, sample_values, scatter_points, LatticeSpec, TestFunction, RNG_ALGORITHM};
pub use scaling::{loglog_slope, thread_scaling, ThreadScaling};
pub use schwarz::{SchwarzPreconditioner, SchwarzVariant};
pub use solver::{solve, sweep, Interpolant, PhaseTimes, SolveConfig, SolveReport, SweepRow, SweepTable};
