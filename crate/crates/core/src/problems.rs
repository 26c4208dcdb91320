//! Test inputs: Franke's function, square lattices and quasi-scattered clouds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Point, PointSet};

/// Name of the generator behind [`scatter_points`], recorded in run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng";

/// Franke's bivariate test function.
pub fn franke(x: f64, y: f64) -> f64 {
    let (a, b) = (9.0 * x, 9.0 * y);
    0.75 * (-0.25 * ((a - 2.0).powi(2) + (b - 2.0).powi(2))).exp()
        + 0.75 * (-(a + 1.0).powi(2) / 49.0 - (b + 1.0).powi(2) / 10.0).exp()
        + 0.5 * (-0.25 * ((a - 7.0).powi(2) + (b - 3.0).powi(2))).exp()
        - 0.2 * (-(a - 4.0).powi(2) - (b - 7.0).powi(2)).exp()
}

/// Named scalar fields used to synthesize sample values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFunction {
    Franke,
    Zero,
    /// `f(x, y) = x + y`.
    Plane,
}

impl TestFunction {
    pub fn eval(self, p: Point) -> f64 {
        match self {
            TestFunction::Franke => franke(p.x, p.y),
            TestFunction::Zero => 0.0,
            TestFunction::Plane => p.x + p.y,
        }
    }
}

/// Square lattice of spacing `h` anchored at the domain's minimum corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub spacing: f64,
    pub domain: BoundingBox,
}

impl LatticeSpec {
    pub fn new(spacing: f64, domain: BoundingBox) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lattice spacing must be positive, got {spacing}"
            )));
        }
        Ok(Self { spacing, domain })
    }

    pub fn unit_square(spacing: f64) -> Result<Self> {
        Self::new(spacing, BoundingBox::unit_square())
    }

    /// Lattice with `side` points per axis on the unit square (`h = 1 / (side - 1)`).
    pub fn unit_square_with_side(side: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 points per side, got {side}"
            )));
        }
        Self::unit_square(1.0 / (side - 1) as f64)
    }

    /// Points per axis, `floor(extent / h) + 1`.
    pub fn counts(&self) -> (usize, usize) {
        let per_axis = |extent: f64| ((extent / self.spacing) * (1.0 + 1e-12)).floor() as usize + 1;
        (per_axis(self.domain.width()), per_axis(self.domain.height()))
    }
}

/// Lattice coordinates computed as `min + i * h` (no accumulation), clamped
/// to the domain maximum. Row-major with `x` varying fastest.
pub fn lattice_points(spec: &LatticeSpec) -> PointSet {
    let (nx, ny) = spec.counts();
    let d = spec.domain;
    let mut coords = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = (d.min.y + j as f64 * spec.spacing).min(d.max.y);
        for i in 0..nx {
            let x = (d.min.x + i as f64 * spec.spacing).min(d.max.x);
            coords.push(Point::new(x, y));
        }
    }
    PointSet::new(coords).expect("lattice has at least one finite point")
}

/// Shifts every coordinate by an independent uniform draw from `[0, h/2)`.
/// Values are carried over; points are not clipped to the original domain.
pub fn scatter_points(base: &PointSet, h: f64, seed: u64) -> Result<PointSet> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scatter spacing must be positive, got {h}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 * h;
    let coords = base
        .coords()
        .iter()
        .map(|p| {
            let dx = rng.gen_range(0.0..half);
            let dy = rng.gen_range(0.0..half);
            Point::new(p.x + dx, p.y + dy)
        })
        .collect();
    let moved = PointSet::new(coords)?;
    match base.values() {
        Some(v) => moved.set_values(v.to_vec()),
        None => Ok(moved),
    }
}

/// Samples `f` at every site, replacing any existing values.
pub fn sample_values(points: PointSet, f: impl Fn(Point) -> f64) -> Result<PointSet> {
    let values = points.coords().iter().map(|&p| f(p)).collect();
    points.set_values(values)
}
