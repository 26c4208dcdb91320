//! Matrix-free kernel matrix-vector product with box truncation.
//!
//! For a target owned by cell `c`, only sources inside the truncation box of
//! `c` contribute. The effective matrix is therefore slightly nonsymmetric:
//! two points near a cell boundary may see each other from one side only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{split_by_offsets, Decomposition};
use crate::error::{Error, Result};
use crate::geometry::{Point, PointSet};
use crate::kernel::GaussianKernel;
use crate::linalg::LinearOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummationMode {
    /// Sum over the owning cell's truncation box.
    Truncated,
    /// Sum over every source; ignores `T`. Reference only, O(N^2).
    DenseReference,
}

#[derive(Debug, Clone, Copy)]
pub struct TruncatedOperator<'a> {
    kernel: GaussianKernel,
    coords: &'a [Point],
    decomp: &'a Decomposition,
    mode: SummationMode,
}

impl<'a> TruncatedOperator<'a> {
    pub fn new(
        kernel: GaussianKernel,
        points: &'a PointSet,
        decomp: &'a Decomposition,
        mode: SummationMode,
    ) -> Result<Self> {
        if decomp.n_points() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: decomp.n_points(),
            });
        }
        Ok(Self {
            kernel,
            coords: points.coords(),
            decomp,
            mode,
        })
    }

    pub fn mode(&self) -> SummationMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// `y = A x`, allocating the output.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: x.len(),
            });
        }
        let mut y = vec![0.0; x.len()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        let coords = self.coords;
        let kernel = self.kernel;
        let mut staged = vec![0.0; n];
        let parts = split_by_offsets(&mut staged, self.decomp.inner_offsets());
        parts
            .into_par_iter()
            .zip(self.decomp.cells().par_iter())
            .for_each(|(out, cell)| {
                for (o, &i) in out.iter_mut().zip(&cell.inner) {
                    let p = coords[i];
                    *o = match self.mode {
                        SummationMode::Truncated => cell
                            .trunc
                            .iter()
                            .fold(0.0, |acc, &j| acc + kernel.between(p, coords[j]) * x[j]),
                        SummationMode::DenseReference => {
                            (0..n).fold(0.0, |acc, j| acc + kernel.between(p, coords[j]) * x[j])
                        }
                    };
                }
            });
        for (&i, v) in self.decomp.inner_order().iter().zip(staged) {
            y[i] = v;
        }
    }

    /// Kernel mass of row `i` dropped by truncation: the sum of
    /// `phi(|x_i - x_j|)` over sources outside the owning cell's T-box.
    /// Brute force, O(N); meant for diagnostics.
    pub fn neglected_row_mass(&self, i: usize) -> Result<f64> {
        if i >= self.len() {
            return Err(Error::InvalidInput(format!(
                "row {i} out of range for {} points",
                self.len()
            )));
        }
        if self.mode == SummationMode::DenseReference {
            return Ok(0.0);
        }
        let kept = &self.decomp.cells()[self.decomp.owner(i)].trunc;
        let p = self.coords[i];
        let mut next = kept.iter().peekable();
        let mut mass = 0.0;
        for (j, &q) in self.coords.iter().enumerate() {
            if next.peek() == Some(&&j) {
                next.next();
                continue;
            }
            mass += self.kernel.between(p, q);
        }
        Ok(mass)
    }

    /// Kernel evaluations performed by one application.
    pub fn kernel_evaluations(&self) -> usize {
        match self.mode {
            SummationMode::Truncated => self.decomp.cells().iter().map(|c| c.inner.len() * c.trunc.len()).sum(),
            SummationMode::DenseReference => self.len() * self.len(),
        }
    }
}

impl LinearOperator for TruncatedOperator<'_> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_into(x, y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::BoxWidths;
    use crate::problems::{lattice_points, LatticeSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(h: f64, sigma: f64, cell: f64, trunc: f64) -> (GaussianKernel, PointSet, Decomposition) {
        let pts = lattice_points(&LatticeSpec::unit_square(h).unwrap());
        let d = Decomposition::build(&pts, BoxWidths::new(cell, 1.9 * cell, trunc)).unwrap();
        (GaussianKernel::new(sigma).unwrap(), pts, d)
    }

    fn random_x(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn full_truncation_box_matches_dense_bitwise() {
        let (k, pts, d) = setup(0.05, 0.1, 0.2, 3.0);
        let x = random_x(pts.len(), 1);
        let t = TruncatedOperator::new(k, &pts, &d, SummationMode::Truncated).unwrap();
        let r = TruncatedOperator::new(k, &pts, &d, SummationMode::DenseReference).unwrap();
        let (yt, yr) = (t.apply(&x).unwrap(), r.apply(&x).unwrap());
        assert!(yt.iter().zip(&yr).all(|(a, b)| a.to_bits() == b.to_bits()));
        for i in 0..pts.len() {
            assert_eq!(t.neglected_row_mass(i).unwrap(), 0.0);
        }
    }

    #[test]
    fn unit_vector_picks_out_kernel_column() {
        let (k, pts, d) = setup(0.02, 0.02, 0.1, 0.18);
        let op = TruncatedOperator::new(k, &pts, &d, SummationMode::Truncated).unwrap();
        let j = pts.len() / 2 + 7;
        let mut e = vec![0.0; pts.len()];
        e[j] = 1.0;
        let y = op.apply(&e).unwrap();
        let mut hits = 0;
        for (i, &yi) in y.iter().enumerate() {
            let box_has_j = d.cells()[d.owner(i)].trunc.contains(&j);
            if box_has_j {
                hits += 1;
                assert_eq!(yi, k.between(pts.coords()[i], pts.coords()[j]));
            } else {
                assert_eq!(yi, 0.0);
            }
        }
        assert!(hits > 1 && hits < pts.len());
    }

    #[test]
    fn zero_in_zero_out() {
        let (k, pts, d) = setup(0.05, 0.05, 0.25, 0.45);
        let op = TruncatedOperator::new(k, &pts, &d, SummationMode::Truncated).unwrap();
        assert!(op.apply(&vec![0.0; pts.len()]).unwrap().iter().all(|&v| v == 0.0));
        assert!(op.apply(&[1.0]).is_err());
        assert!(op.neglected_row_mass(pts.len()).is_err());
    }

    #[test]
    fn neglected_mass_matches_double_loop() {
        let sigma = 0.01;
        let (cell, trunc) = (5.0 * sigma, 9.0 * sigma);
        let (k, pts, d) = setup(sigma, sigma, cell, trunc);
        let op = TruncatedOperator::new(k, &pts, &d, SummationMode::Truncated).unwrap();
        let center = pts.coords().iter().position(|p| *p == Point::new(0.5, 0.5)).unwrap();

        // Owning cell of (0.5, 0.5) is [10 B, 11 B)^2; its T-box grows by (T - B) / 2 = 2 sigma.
        let margin = 0.5 * (trunc - cell);
        let (lo, hi) = (10.0 * cell - margin, 11.0 * cell + margin);
        let inside = |v: f64| v >= lo && v < hi;
        let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
        let mut expected = 0.0;
        for q in pts.coords() {
            if !(inside(q.x) && inside(q.y)) {
                let r2 = (q.x - 0.5).powi(2) + (q.y - 0.5).powi(2);
                expected += norm * (-r2 / (2.0 * sigma * sigma)).exp();
            }
        }
        let got = op.neglected_row_mass(center).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected, "{got} vs {expected}");
        assert!(expected > 0.0);
    }

    #[test]
    fn neglected_mass_shrinks_with_larger_box() {
        let sigma = 0.02;
        let pts = lattice_points(&LatticeSpec::unit_square(sigma).unwrap());
        let k = GaussianKernel::new(sigma).unwrap();
        let cell = 5.0 * sigma;
        let widths = [cell, cell + 2.0 * sigma, cell + 4.0 * sigma, cell + 6.0 * sigma];
        let decomps: Vec<_> = widths
            .iter()
            .map(|&t| Decomposition::build(&pts, BoxWidths::new(cell, cell, t)).unwrap())
            .collect();
        for i in (0..pts.len()).step_by(37) {
            let masses: Vec<f64> = decomps
                .iter()
                .map(|d| {
                    TruncatedOperator::new(k, &pts, d, SummationMode::Truncated)
                        .unwrap()
                        .neglected_row_mass(i)
                        .unwrap()
                })
                .collect();
            assert!(masses.windows(2).all(|w| w[1] <= w[0]), "{masses:?}");
        }
    }

    #[test]
    fn evaluations_per_target_independent_of_size() {
        let per_target = |side: usize| {
            let h = 1.0 / (side - 1) as f64;
            let sigma = h;
            let (k, pts, d) = setup(h, sigma, 5.0 * sigma, 9.0 * sigma);
            let op = TruncatedOperator::new(k, &pts, &d, SummationMode::Truncated).unwrap();
            op.kernel_evaluations() as f64 / pts.len() as f64
        };
        let (small, large) = (per_target(101), per_target(401));
        // a 9-sigma box holds at most 10 x 10 lattice points
        assert!(small <= 100.0 && large <= 100.0);
        assert!((small - large).abs() / large < 0.1, "{small} vs {large}");
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let (k, pts, d) = setup(0.01, 0.01, 0.05, 0.09);
        let op = TruncatedOperator::new(k, &pts, &d, SummationMode::Truncated).unwrap();
        let x = random_x(pts.len(), 3);
        let run = |t: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .unwrap()
                .install(|| op.apply(&x).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn truncation_error_bounded_by_neglected_mass(
            seed in any::<u64>(),
            margin in 0.0..6.0f64,
        ) {
            let sigma = 0.04;
            let (k, pts, d) = setup(sigma, sigma, 4.0 * sigma, (4.0 + margin) * sigma);
            let t = TruncatedOperator::new(k, &pts, &d, SummationMode::Truncated).unwrap();
            let r = TruncatedOperator::new(k, &pts, &d, SummationMode::DenseReference).unwrap();
            let x = random_x(pts.len(), seed);
            let (yt, yr) = (t.apply(&x).unwrap(), r.apply(&x).unwrap());
            let err = yt.iter().zip(&yr).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let mass = (0..pts.len()).map(|i| t.neglected_row_mass(i).unwrap()).fold(0.0, f64::max);
            let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(err <= mass * xmax * (1.0 + 1e-12) + 1e-12, "{} > {}", err, mass * xmax);
        }

        #[test]
        fn linear(seed in any::<u64>(), alpha in -3.0..3.0f64, beta in -3.0..3.0f64) {
            let (k, pts, d) = setup(0.05, 0.05, 0.25, 0.45);
            let op = TruncatedOperator::new(k, &pts, &d, SummationMode::Truncated).unwrap();
            let x = random_x(pts.len(), seed);
            let z = random_x(pts.len(), seed.wrapping_add(99));
            let combo: Vec<f64> = x.iter().zip(&z).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = op.apply(&combo).unwrap();
            let (yx, yz) = (op.apply(&x).unwrap(), op.apply(&z).unwrap());
            let scale = lhs.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
            for i in 0..lhs.len() {
                let rhs = alpha * yx[i] + beta * yz[i];
                prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * scale.max(rhs.abs()));
            }
        }
    }
}
