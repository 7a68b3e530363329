//! Uniform rectangular lattices in one or two dimensions.
//!
//! Points are stored row-major: the flat index of `(i, j)` on a 2D grid is
//! `i * points[1] + j`, so axis 1 is contiguous. Both end points of every
//! axis are lattice points.

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 8;
pub const DEFAULT_MAX_POINTS: usize = 1 << 22;

/// Two-component coordinate; the second entry is zero on 1D grids.
pub type Point = [f64; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    /// Length of one period when the axis is treated as periodic.
    pub fn period(&self) -> f64 {
        self.points as f64 * self.spacing()
    }

    pub fn coord(&self, i: usize) -> f64 {
        // exact at both ends
        if i + 1 == self.points {
            self.max
        } else {
            self.min + i as f64 * self.spacing()
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    /// Trapezoid weights along this axis.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.points];
        w[0] = 0.5 * h;
        w[self.points - 1] = 0.5 * h;
        w
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        Self::with_cap(axes, DEFAULT_MAX_POINTS)
    }

    pub fn with_cap(axes: Vec<Axis>, max_points: usize) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidGrid(format!(
                "dims must be 1 or 2, got {}",
                axes.len()
            )));
        }
        for (k, a) in axes.iter().enumerate() {
            if !(a.min.is_finite() && a.max.is_finite()) || a.max <= a.min {
                return Err(Error::InvalidGrid(format!(
                    "axis {k}: extent [{}, {}] has non-positive span",
                    a.min, a.max
                )));
            }
            if a.points < MIN_POINTS {
                return Err(Error::TooFewPoints {
                    axis: k,
                    points: a.points,
                    min: MIN_POINTS,
                });
            }
        }
        let total = axes
            .iter()
            .try_fold(1usize, |acc, a| acc.checked_mul(a.points))
            .unwrap_or(usize::MAX);
        if total > max_points {
            return Err(Error::InvalidGrid(format!(
                "{total} points exceeds the cap of {max_points}"
            )));
        }
        Ok(Self { axes })
    }

    pub fn uniform_1d(min: f64, max: f64, points: usize) -> Result<Self> {
        Self::new(vec![Axis { min, max, points }])
    }

    pub fn uniform_2d(x: (f64, f64), y: (f64, f64), points: (usize, usize)) -> Result<Self> {
        Self::new(vec![
            Axis {
                min: x.0,
                max: x.1,
                points: points.0,
            },
            Axis {
                min: y.0,
                max: y.1,
                points: points.1,
            },
        ])
    }

    /// 1D grid whose periodic length (points × spacing) equals `period`.
    pub fn periodic_1d(min: f64, period: f64, points: usize) -> Result<Self> {
        let max = min + period * (points as f64 - 1.0) / points as f64;
        Self::uniform_1d(min, max, points)
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> [usize; 2] {
        match self.axes.as_slice() {
            [a] => [a.points, 1],
            [a, b] => [a.points, b.points],
            _ => unreachable!(),
        }
    }

    pub fn spacing(&self, k: usize) -> f64 {
        self.axes[k].spacing()
    }

    pub fn min_spacing(&self) -> f64 {
        self.axes
            .iter()
            .map(Axis::spacing)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    /// Measure of the grid box (span product).
    pub fn volume(&self) -> f64 {
        self.axes.iter().map(Axis::span).product()
    }

    pub fn ravel(&self, idx: [usize; 2]) -> usize {
        idx[0] * self.shape()[1] + idx[1]
    }

    pub fn unravel(&self, flat: usize) -> [usize; 2] {
        let n1 = self.shape()[1];
        [flat / n1, flat % n1]
    }

    pub fn point(&self, flat: usize) -> Point {
        let [i, j] = self.unravel(flat);
        match self.axes.as_slice() {
            [a] => [a.coord(i), 0.0],
            [a, b] => [a.coord(i), b.coord(j)],
            _ => unreachable!(),
        }
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |k| self.point(k))
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.axes.iter().zip(p).all(|(a, &x)| a.contains(x))
    }

    /// Flat index of the lattice point nearest to `p`.
    pub fn nearest(&self, p: &[f64]) -> Option<usize> {
        if p.len() < self.dims() || !self.contains(p) {
            return None;
        }
        let mut idx = [0usize; 2];
        for (k, a) in self.axes.iter().enumerate() {
            let f = ((p[k] - a.min) / a.spacing()).round();
            idx[k] = (f as usize).min(a.points - 1);
        }
        Some(self.ravel(idx))
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        let idx = self.unravel(flat);
        self.axes
            .iter()
            .enumerate()
            .any(|(k, a)| idx[k] == 0 || idx[k] + 1 == a.points)
    }

    /// Tensor-product trapezoid weights, one per point.
    pub fn weights(&self) -> Vec<f64> {
        match self.axes.as_slice() {
            [a] => a.weights(),
            [a, b] => {
                let (wa, wb) = (a.weights(), b.weights());
                wa.iter()
                    .flat_map(|x| wb.iter().map(move |y| x * y))
                    .collect()
            }
            _ => unreachable!(),
        }
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights().iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Build a grid from per-axis extents and point counts.
pub fn make_grid(dims: usize, extents: &[(f64, f64)], points: &[usize]) -> Result<Grid> {
    if extents.len() != dims || points.len() != dims {
        return Err(Error::InvalidGrid(format!(
            "expected {dims} extents and point counts, got {} and {}",
            extents.len(),
            points.len()
        )));
    }
    Grid::new(
        extents
            .iter()
            .zip(points)
            .map(|(&(min, max), &points)| Axis { min, max, points })
            .collect(),
    )
}
