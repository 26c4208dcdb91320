//! Box decomposition of the point cloud.
//!
//! The bounding box is tiled by square cells of width `B` starting at its
//! minimum corner (the last row/column may be narrower). Each cell owns the
//! points inside it (`inner`), and carries two enlarged boxes centered on it:
//! the overlapping subdomain of width `D` (`overlap`) and the truncation
//! region of width `T` (`trunc`). Both are clipped to the bounding box.
//!
//! Box membership uses closed-open intervals on each axis. A box whose upper
//! edge reaches the bounding box maximum is closed there, so points on the
//! global upper boundary belong to the last cell. Coordinates within
//! `EDGE_TOL * B` below an edge count as lying on it: lattice points that sit
//! on box edges in exact arithmetic are then classified the same way
//! regardless of round-off in `i * h` or `k * B`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Point, PointSet};

/// Widths of the three box families, in domain length units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxWidths {
    /// `B`: non-overlapping cell width.
    pub cell: f64,
    /// `D`: overlapping subdomain width.
    pub overlap: f64,
    /// `T`: truncation region width for the matrix-vector product.
    pub trunc: f64,
}

impl BoxWidths {
    pub fn new(cell: f64, overlap: f64, trunc: f64) -> Self {
        Self { cell, overlap, trunc }
    }

    pub fn validate(&self) -> Result<()> {
        let Self { cell, overlap, trunc } = *self;
        if !(cell.is_finite() && cell > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cell width B must be positive, got {cell}"
            )));
        }
        if !(overlap.is_finite() && overlap >= cell) {
            return Err(Error::InvalidParameter(format!(
                "overlap width D must be finite and >= B ({cell}), got {overlap}"
            )));
        }
        if !(trunc.is_finite() && trunc >= cell) {
            return Err(Error::InvalidParameter(format!(
                "truncation width T must be finite and >= B ({cell}), got {trunc}"
            )));
        }
        Ok(())
    }
}

/// Relative (to `B`) snapping distance for box edges.
pub const EDGE_TOL: f64 = 1e-9;

/// One axis of the cell grid.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Axis {
    min: f64,
    max: f64,
    step: f64,
    tol: f64,
    n: usize,
}

/// Half-open interval `[lo, hi)`, or `[lo, hi]` when `closed`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Interval {
    lo: f64,
    hi: f64,
    closed: bool,
}

impl Interval {
    #[inline]
    fn contains(&self, v: f64) -> bool {
        v >= self.lo && (v < self.hi || (self.closed && v <= self.hi))
    }
}

impl Axis {
    fn new(min: f64, max: f64, step: f64) -> Self {
        let extent = max - min;
        let n = if extent > 0.0 {
            // Absorb round-off in extent/step so that B dividing the domain
            // does not produce a sliver cell.
            ((extent / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize
        } else {
            1
        };
        Self {
            min,
            max,
            step,
            tol: EDGE_TOL * step,
            n,
        }
    }

    fn lo(&self, i: usize) -> f64 {
        if i == 0 {
            self.min
        } else {
            self.min + i as f64 * self.step
        }
    }

    fn hi(&self, i: usize) -> f64 {
        if i + 1 >= self.n {
            self.max
        } else {
            self.lo(i + 1)
        }
    }

    /// Cell containing `v`; coordinates outside the axis clamp to the end cells.
    fn locate(&self, v: f64) -> usize {
        if v.is_nan() || v <= self.min {
            return 0;
        }
        if v >= self.max {
            return self.n - 1;
        }
        let mut k = (((v - self.min + self.tol) / self.step).floor() as usize).min(self.n - 1);
        while k > 0 && v < self.lo(k) - self.tol {
            k -= 1;
        }
        while k + 1 < self.n && v >= self.lo(k + 1) - self.tol {
            k += 1;
        }
        k
    }

    /// Cell `i` grown by `margin` on both sides and clipped to the axis.
    fn grown(&self, i: usize, margin: f64) -> Interval {
        let hi = self.hi(i) + margin;
        let closed = hi >= self.max - self.tol;
        let lo = if i == 0 && margin == 0.0 {
            self.min
        } else {
            self.lo(i) - margin - self.tol
        };
        Interval {
            lo: lo.max(self.min),
            hi: if closed { self.max } else { hi - self.tol },
            closed,
        }
    }
}

/// A grid cell with its three index sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub ix: usize,
    pub iy: usize,
    /// Points owned by the cell (non-overlapping subdomain).
    pub inner: Vec<usize>,
    /// Points in the overlapping subdomain of width `D`.
    pub overlap: Vec<usize>,
    /// Points in the truncation region of width `T`.
    pub trunc: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    bbox: BoundingBox,
    widths: BoxWidths,
    x_axis: Axis,
    y_axis: Axis,
    cells: Vec<Cell>,
    owner: Vec<usize>,
    inner_order: Vec<usize>,
    inner_offsets: Vec<usize>,
}

impl Decomposition {
    /// Bins `points` into cells of width `widths.cell` and collects the
    /// overlap and truncation index sets of every cell.
    pub fn build(points: &PointSet, widths: BoxWidths) -> Result<Self> {
        widths.validate()?;
        if points.is_empty() {
            return Err(Error::InvalidInput("cannot decompose an empty point set".into()));
        }
        let coords = points.coords();
        let bbox = points.bounding_box();
        let x_axis = Axis::new(bbox.min.x, bbox.max.x, widths.cell);
        let y_axis = Axis::new(bbox.min.y, bbox.max.y, widths.cell);
        let (nx, ny) = (x_axis.n, y_axis.n);

        let mut owner = Vec::with_capacity(coords.len());
        let mut inner: Vec<Vec<usize>> = vec![Vec::new(); nx * ny];
        for (i, p) in coords.iter().enumerate() {
            let c = y_axis.locate(p.y) * nx + x_axis.locate(p.x);
            owner.push(c);
            inner[c].push(i);
        }

        let overlap_margin = 0.5 * (widths.overlap - widths.cell);
        let trunc_margin = 0.5 * (widths.trunc - widths.cell);
        let gather = |ix: usize, iy: usize, margin: f64| -> Vec<usize> {
            let bx = x_axis.grown(ix, margin);
            let by = y_axis.grown(iy, margin);
            let (x0, x1) = (x_axis.locate(bx.lo), x_axis.locate(bx.hi));
            let (y0, y1) = (y_axis.locate(by.lo), y_axis.locate(by.hi));
            let mut found = Vec::new();
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    found.extend(inner[cy * nx + cx].iter().copied().filter(|&j| {
                        let p = coords[j];
                        bx.contains(p.x) && by.contains(p.y)
                    }));
                }
            }
            found.sort_unstable();
            found
        };

        let cells: Vec<Cell> = (0..nx * ny)
            .into_par_iter()
            .map(|c| {
                let (ix, iy) = (c % nx, c / nx);
                Cell {
                    ix,
                    iy,
                    inner: inner[c].clone(),
                    overlap: gather(ix, iy, overlap_margin),
                    trunc: gather(ix, iy, trunc_margin),
                }
            })
            .collect();

        let mut inner_order = Vec::with_capacity(coords.len());
        let mut inner_offsets = Vec::with_capacity(cells.len() + 1);
        inner_offsets.push(0);
        for cell in &cells {
            inner_order.extend_from_slice(&cell.inner);
            inner_offsets.push(inner_order.len());
        }

        Ok(Self {
            bbox,
            widths,
            x_axis,
            y_axis,
            cells,
            owner,
            inner_order,
            inner_offsets,
        })
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn widths(&self) -> BoxWidths {
        self.widths
    }

    /// Grid dimensions `(nx, ny)`.
    pub fn grid(&self) -> (usize, usize) {
        (self.x_axis.n, self.y_axis.n)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, ix: usize, iy: usize) -> &Cell {
        &self.cells[iy * self.x_axis.n + ix]
    }

    pub fn n_points(&self) -> usize {
        self.owner.len()
    }

    /// Index (into [`Self::cells`]) of the cell owning point `i`.
    pub fn owner(&self, i: usize) -> usize {
        self.owner[i]
    }

    /// Index of the cell whose closed-open box contains `p`. Points outside
    /// the bounding box map to the nearest boundary cell.
    pub fn locate(&self, p: Point) -> usize {
        self.y_axis.locate(p.y) * self.x_axis.n + self.x_axis.locate(p.x)
    }

    /// Number of subdomains, i.e. cells owning at least one point.
    pub fn subdomain_count(&self) -> usize {
        self.cells.iter().filter(|c| !c.inner.is_empty()).count()
    }

    /// All point indices, grouped by owning cell in cell order.
    pub fn inner_order(&self) -> &[usize] {
        &self.inner_order
    }

    /// `inner_order[inner_offsets[c]..inner_offsets[c + 1]]` is `cells[c].inner`.
    pub fn inner_offsets(&self) -> &[usize] {
        &self.inner_offsets
    }

    /// Number of stored indices across all index lists.
    pub fn index_count(&self) -> usize {
        let lists: usize = self
            .cells
            .iter()
            .map(|c| c.inner.len() + c.overlap.len() + c.trunc.len())
            .sum();
        lists + self.owner.len() + self.inner_order.len() + self.inner_offsets.len()
    }
}

/// Splits `buf` into consecutive mutable chunks delimited by `offsets`
/// (which must start at 0 and end at `buf.len()`).
pub(crate) fn split_by_offsets<'a, T>(mut buf: &'a mut [T], offsets: &[usize]) -> Vec<&'a mut [T]> {
    let mut parts = Vec::with_capacity(offsets.len().saturating_sub(1));
    for w in offsets.windows(2) {
        let (head, tail) = buf.split_at_mut(w[1] - w[0]);
        parts.push(head);
        buf = tail;
    }
    parts
}
