//! Dense factorizations for subdomain solves and restarted GMRES.

use std::ops::{Index, IndexMut};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            data.extend((0..cols).map(|j| f(i, j)));
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Symmetric up to `rel_tol` times the largest entry magnitude.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let tol = rel_tol * self.max_abs();
        (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot_serial(self.row(i), x)).collect())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorKind {
    Cholesky,
    LuWithPivoting,
}

/// A reusable factorization of a square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    kind: FactorKind,
    n: usize,
    /// Cholesky: `L` in the lower triangle. LU: unit-lower `L` and `U` packed together.
    factors: Vec<f64>,
    /// LU only: row `i` of the factored matrix is row `pivots[i]` of the input.
    pivots: Vec<usize>,
}

/// Cholesky when `a` is symmetric to 1e-12 relative, LU with partial
/// pivoting otherwise or when Cholesky breaks down.
pub fn factorize(a: &DenseMatrix) -> Result<Factorization> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: a.cols(),
        });
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    if a.is_symmetric(1e-12) {
        if let Some(l) = cholesky(a) {
            return Ok(Factorization {
                kind: FactorKind::Cholesky,
                n: a.rows(),
                factors: l,
                pivots: Vec::new(),
            });
        }
    }
    lu(a)
}

fn cholesky(a: &DenseMatrix) -> Option<Vec<f64>> {
    let n = a.rows();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let (row_i, row_j) = if i == j {
                let r = &l[i * n..i * n + j];
                (r, r)
            } else {
                let (head, tail) = l.split_at(i * n);
                (&tail[..j], &head[j * n..j * n + j])
            };
            let s = a[(i, j)] - dot_serial(row_i, row_j);
            if i == j {
                if !s.is_finite() || s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn lu(a: &DenseMatrix) -> Result<Factorization> {
    let n = a.rows();
    let mut m = a.as_slice().to_vec();
    let mut pivots: Vec<usize> = (0..n).collect();
    let tol = n as f64 * f64::EPSILON * a.max_abs();
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, m[i * n + k].abs()))
            .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        if pmax.is_nan() || pmax <= tol {
            return Err(Error::Singular { pivot: k });
        }
        if p != k {
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
            }
            pivots.swap(k, p);
        }
        let (upper, lower) = m.split_at_mut((k + 1) * n);
        let pivot_row = &upper[k * n..];
        let diag = pivot_row[k];
        for row in lower.chunks_exact_mut(n) {
            let factor = row[k] / diag;
            row[k] = factor;
            if factor != 0.0 {
                for j in k + 1..n {
                    row[j] -= factor * pivot_row[j];
                }
            }
        }
    }
    Ok(Factorization {
        kind: FactorKind::LuWithPivoting,
        n,
        factors: m,
        pivots,
    })
}

impl Factorization {
    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of reals held by the factors.
    pub fn stored_reals(&self) -> usize {
        self.factors.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Overwrites `b` with the solution of `A x = b`.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let f = &self.factors;
        match self.kind {
            FactorKind::Cholesky => {
                for i in 0..n {
                    let row = &f[i * n..i * n + i];
                    b[i] = (b[i] - dot_serial(row, &b[..i])) / f[i * n + i];
                }
                for i in (0..n).rev() {
                    b[i] /= f[i * n + i];
                    let xi = b[i];
                    for (bk, lik) in b[..i].iter_mut().zip(&f[i * n..i * n + i]) {
                        *bk -= lik * xi;
                    }
                }
            }
            FactorKind::LuWithPivoting => {
                let permuted: Vec<f64> = self.pivots.iter().map(|&p| b[p]).collect();
                b.copy_from_slice(&permuted);
                for i in 0..n {
                    b[i] -= dot_serial(&f[i * n..i * n + i], &b[..i]);
                }
                for i in (0..n).rev() {
                    let s = dot_serial(&f[i * n + i + 1..(i + 1) * n], &b[i + 1..]);
                    b[i] = (b[i] - s) / f[i * n + i];
                }
            }
        }
        Ok(())
    }
}

/// A square linear map acting on vectors of length [`Self::dim`].
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// Writes the image of `x` into `y`. Both slices have length `dim()`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// The identity map.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut()
            .enumerate()
            .for_each(|(i, yi)| *yi = dot_serial(self.row(i), x));
    }
}

/// Applies a factorization as the operator `A^{-1}`.
impl LinearOperator for Factorization {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        self.solve_in_place(y).expect("dimensions checked by caller");
    }
}

#[inline]
pub(crate) fn dot_serial(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fixed chunk length for reductions; independent of the thread count so
/// that results are bitwise reproducible across pools of any size.
const REDUCE_CHUNK: usize = 4096;

/// Dot product with a thread-count independent summation order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= REDUCE_CHUNK {
        return dot_serial(a, b);
    }
    let partial: Vec<f64> = a
        .par_chunks(REDUCE_CHUNK)
        .zip(b.par_chunks(REDUCE_CHUNK))
        .map(|(x, y)| dot_serial(x, y))
        .collect();
    partial.iter().sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`.
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_chunks_mut(REDUCE_CHUNK)
        .zip(x.par_chunks(REDUCE_CHUNK))
        .for_each(|(yc, xc)| yc.iter_mut().zip(xc).for_each(|(yi, xi)| *yi += alpha * xi));
}

fn scale(alpha: f64, x: &mut [f64]) {
    x.par_chunks_mut(REDUCE_CHUNK)
        .for_each(|c| c.iter_mut().for_each(|v| *v *= alpha));
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmresParams {
    /// Krylov subspace dimension before restart.
    pub restart: usize,
    pub rtol: f64,
    pub atol: f64,
    pub max_iters: usize,
}

impl Default for GmresParams {
    fn default() -> Self {
        Self {
            restart: 30,
            rtol: 1e-13,
            atol: 1e-15,
            max_iters: 1000,
        }
    }
}

impl GmresParams {
    pub fn validate(&self) -> Result<()> {
        if self.restart == 0 {
            return Err(Error::InvalidParameter("restart must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        for (name, v) in [("rtol", self.rtol), ("atol", self.atol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Seconds spent in each part of a GMRES run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GmresTimings {
    pub matvec: f64,
    pub precond: f64,
    pub orthogonalization: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    /// Preconditioned residual norm: entry 0 is the initial residual, entry
    /// `k` the estimate after inner iteration `k`.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `|b - A x|_2` at termination.
    pub true_residual: f64,
    pub timings: GmresTimings,
}

impl GmresOutcome {
    /// Last preconditioned residual norm.
    pub fn residual(&self) -> f64 {
        *self.history.last().expect("history always holds the initial residual")
    }
}

/// Left-preconditioned restarted GMRES with modified Gram-Schmidt.
///
/// Iterates on `M A x = M b` and stops once the preconditioned residual
/// satisfies `|r| <= max(rtol * |M b|, atol)` or `max_iters` inner
/// iterations have run. Hitting the iteration limit is not an error: the
/// current iterate is returned with `converged == false`.
pub fn gmres<A, M>(a: &A, m: &M, b: &[f64], x0: &[f64], params: &GmresParams) -> Result<GmresOutcome>
where
    A: LinearOperator + ?Sized,
    M: LinearOperator + ?Sized,
{
    gmres_observed(a, m, b, x0, params, &mut |_| {})
}

/// [`gmres`] with a hook receiving the orthonormal basis at the end of every cycle.
fn gmres_observed<A, M>(
    a: &A,
    m: &M,
    b: &[f64],
    x0: &[f64],
    params: &GmresParams,
    on_cycle: &mut dyn FnMut(&[Vec<f64>]),
) -> Result<GmresOutcome>
where
    A: LinearOperator + ?Sized,
    M: LinearOperator + ?Sized,
{
    params.validate()?;
    let n = b.len();
    for found in [a.dim(), m.dim(), x0.len()] {
        if found != n {
            return Err(Error::DimensionMismatch { expected: n, found });
        }
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("right-hand side is not finite".into()));
    }

    let mut timings = GmresTimings::default();
    let mut work = vec![0.0; n];
    let apply_a = |x: &[f64], y: &mut [f64], t: &mut GmresTimings| {
        let start = Instant::now();
        a.apply(x, y);
        t.matvec += start.elapsed().as_secs_f64();
    };
    let apply_m = |x: &[f64], y: &mut [f64], t: &mut GmresTimings| {
        let start = Instant::now();
        m.apply(x, y);
        t.precond += start.elapsed().as_secs_f64();
    };
    let check_finite = |v: &[f64], what: &str| -> Result<()> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numerical(format!("{what} produced a non-finite value")))
        }
    };

    let mut r = vec![0.0; n];
    apply_m(b, &mut r, &mut timings);
    check_finite(&r, "preconditioner")?;
    let target = (params.rtol * norm2(&r)).max(params.atol);

    let mut x = x0.to_vec();
    let x_is_zero = x.iter().all(|&v| v == 0.0);
    let residual = |x: &[f64], r: &mut [f64], work: &mut [f64], t: &mut GmresTimings| -> Result<f64> {
        apply_a(x, work, t);
        check_finite(work, "operator")?;
        work.iter_mut().zip(b).for_each(|(w, bi)| *w = bi - *w);
        apply_m(work, r, t);
        check_finite(r, "preconditioner")?;
        Ok(norm2(r))
    };

    let mut beta = if x_is_zero {
        norm2(&r)
    } else {
        residual(&x, &mut r, &mut work, &mut timings)?
    };
    let mut history = vec![beta];
    let mut iterations = 0;
    let mut converged = beta <= target;

    let restart = params.restart;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
    while !converged && iterations < params.max_iters {
        basis.clear();
        let mut v0 = r.clone();
        scale(1.0 / beta, &mut v0);
        basis.push(v0);

        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut cs: Vec<f64> = Vec::with_capacity(restart);
        let mut sn: Vec<f64> = Vec::with_capacity(restart);
        let mut hess: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut broke_down = false;

        while hess.len() < restart && iterations < params.max_iters {
            let k = hess.len();
            let mut w = vec![0.0; n];
            apply_a(&basis[k], &mut work, &mut timings);
            check_finite(&work, "operator")?;
            apply_m(&work, &mut w, &mut timings);
            check_finite(&w, "preconditioner")?;
            iterations += 1;

            let start = Instant::now();
            let w_norm0 = norm2(&w);
            let mut h = vec![0.0; k + 2];
            for (i, v) in basis.iter().enumerate() {
                h[i] = dot(&w, v);
                axpy(-h[i], v, &mut w);
            }
            let h_next = norm2(&w);
            h[k + 1] = h_next;
            for i in 0..k {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let rho = h[k].hypot(h[k + 1]);
            if rho == 0.0 {
                // Singular Hessenberg: the new direction cannot reduce the residual.
                return Err(Error::Breakdown {
                    iteration: iterations,
                    residual: g[k].abs(),
                });
            }
            let (c, s) = (h[k] / rho, h[k + 1] / rho);
            h[k] = rho;
            h[k + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g[k + 1] = -s * g[k];
            g[k] *= c;
            hess.push(h);
            timings.orthogonalization += start.elapsed().as_secs_f64();

            let estimate = g[k + 1].abs();
            history.push(estimate);
            if estimate <= target {
                converged = true;
                break;
            }
            if h_next <= f64::EPSILON * w_norm0 {
                broke_down = true;
                break;
            }
            scale(1.0 / h_next, &mut w);
            basis.push(w);
        }

        // Minimize over the cycle's Krylov space: back-substitute H y = g.
        let start = Instant::now();
        let k = hess.len();
        let mut y = g[..k].to_vec();
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| hess[j][i] * y[j]).sum();
            y[i] = (y[i] - s) / hess[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, &mut x);
        }
        timings.orthogonalization += start.elapsed().as_secs_f64();
        on_cycle(&basis[..k.min(basis.len())]);
        check_finite(&x, "GMRES update")?;

        if converged {
            break;
        }
        if broke_down {
            let estimate = *history.last().unwrap();
            if estimate <= params.atol {
                converged = true;
                break;
            }
            return Err(Error::Breakdown {
                iteration: iterations,
                residual: estimate,
            });
        }
        if iterations >= params.max_iters {
            break;
        }
        beta = residual(&x, &mut r, &mut work, &mut timings)?;
        if beta <= target {
            converged = true;
        }
    }

    apply_a(&x, &mut work, &mut timings);
    work.iter_mut().zip(b).for_each(|(w, bi)| *w = bi - *w);
    let true_residual = norm2(&work);

    Ok(GmresOutcome {
        x,
        history,
        iterations,
        converged,
        true_residual,
        timings,
    })
}
