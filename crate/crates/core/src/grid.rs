//! Uniform truncated lattices in one or two dimensions and functions sampled on them.

use std::fmt::Debug;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::symbols::Point;

pub const MIN_POINTS_PER_AXIS: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec<const D: usize> {
    lo: [f64; D],
    hi: [f64; D],
    points: [usize; D],
}

impl<const D: usize> GridSpec<D> {
    pub fn new(lo: [f64; D], hi: [f64; D], points: [usize; D]) -> Result<Self> {
        if !(1..=2).contains(&D) {
            return Err(Error::Grid(format!("dimension {D} unsupported (1 or 2)")));
        }
        for k in 0..D {
            if !(lo[k].is_finite() && hi[k].is_finite() && hi[k] > lo[k]) {
                return Err(Error::Grid(format!(
                    "axis {k}: bounds [{}, {}] must be finite with min < max",
                    lo[k], hi[k]
                )));
            }
            if points[k] < MIN_POINTS_PER_AXIS {
                return Err(Error::Grid(format!(
                    "axis {k}: {} points, at least {MIN_POINTS_PER_AXIS} required",
                    points[k]
                )));
            }
        }
        Ok(Self { lo, hi, points })
    }

    /// Same bounds and resolution on every axis.
    pub fn uniform(lo: f64, hi: f64, points: usize) -> Result<Self> {
        Self::new([lo; D], [hi; D], [points; D])
    }

    pub fn lo(&self) -> [f64; D] {
        self.lo
    }
    pub fn hi(&self) -> [f64; D] {
        self.hi
    }
    pub fn points(&self) -> [usize; D] {
        self.points
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.points[axis] - 1) as f64
    }

    /// `h^d`
    pub fn cell_volume(&self) -> f64 {
        (0..D).map(|k| self.spacing(k)).product()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major: axis 0 varies slowest.
    pub fn multi_index(&self, mut flat: usize) -> [usize; D] {
        let mut idx = [0; D];
        for k in (0..D).rev() {
            idx[k] = flat % self.points[k];
            flat /= self.points[k];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize; D]) -> usize {
        idx.iter()
            .zip(self.points.iter())
            .fold(0, |acc, (&i, &m)| acc * m + i)
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + i as f64 * self.spacing(axis)
    }

    pub fn node_at(&self, idx: &[usize; D]) -> Point<D> {
        Point::<D>::from_fn(|k, _| self.coordinate(k, idx[k]))
    }

    pub fn node(&self, flat: usize) -> Point<D> {
        self.node_at(&self.multi_index(flat))
    }

    pub fn nodes(&self) -> Vec<Point<D>> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Trapezoid weight (product of per-axis weights, 1/2 at the ends).
    pub fn trapezoid_weight(&self, flat: usize) -> f64 {
        self.multi_index(flat)
            .iter()
            .zip(self.points.iter())
            .map(|(&i, &m)| if i == 0 || i + 1 == m { 0.5 } else { 1.0 })
            .product()
    }

    /// Index of the node coinciding with `x`, if any.
    pub fn node_index(&self, x: &Point<D>) -> Option<usize> {
        let mut idx = [0; D];
        for k in 0..D {
            let h = self.spacing(k);
            let r = (x[k] - self.lo[k]) / h;
            let i = r.round();
            if (r - i).abs() > 1e-9 || i < 0.0 || i >= self.points[k] as f64 {
                return None;
            }
            idx[k] = i as usize;
        }
        Some(self.flat_index(&idx))
    }

    pub fn contains(&self, x: &Point<D>) -> bool {
        (0..D).all(|k| x[k] >= self.lo[k] && x[k] <= self.hi[k])
    }
}

/// Scalars a grid function can hold.
pub trait GridScalar:
    Copy
    + Send
    + Sync
    + Default
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
{
    fn modulus(&self) -> f64;
}

impl GridScalar for f64 {
    fn modulus(&self) -> f64 {
        self.abs()
    }
}

impl GridScalar for Complex64 {
    fn modulus(&self) -> f64 {
        self.norm()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<const D: usize, T = f64> {
    spec: GridSpec<D>,
    values: Vec<T>,
}

impl<const D: usize, T: GridScalar> GridFunction<D, T> {
    pub fn new(spec: GridSpec<D>, values: Vec<T>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Grid(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                spec.len()
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec<D>) -> Self {
        let values = vec![T::default(); spec.len()];
        Self { spec, values }
    }

    pub fn sample(spec: &GridSpec<D>, f: impl Fn(&Point<D>) -> T) -> Self {
        let values = (0..spec.len()).map(|i| f(&spec.node(i))).collect();
        Self {
            spec: spec.clone(),
            values,
        }
    }

    pub fn spec(&self) -> &GridSpec<D> {
        &self.spec
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// `h^d Σ |v_i|`
    pub fn l1_norm(&self) -> f64 {
        self.spec.cell_volume() * self.values.iter().map(|v| v.modulus()).sum::<f64>()
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.spec, other.spec);
        self.spec.cell_volume()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (*a - *b).modulus())
                .sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    pub fn max_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b).modulus())
            .fold(0.0, f64::max)
    }

    /// Trapezoid-rule integral.
    pub fn integral(&self) -> T {
        let mut acc = T::default();
        for (i, v) in self.values.iter().enumerate() {
            acc = acc + *v * self.spec.trapezoid_weight(i);
        }
        acc * self.spec.cell_volume()
    }

    pub fn map<U: GridScalar>(&self, f: impl Fn(T) -> U) -> GridFunction<D, U> {
        GridFunction {
            spec: self.spec.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.spec, other.spec);
        Self {
            spec: self.spec.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// Value at the grid node coinciding with `x`.
    pub fn value_at(&self, x: &Point<D>) -> Option<T> {
        self.spec.node_index(x).map(|i| self.values[i])
    }
}
