//! Uniform truncated grids on the real line and the sampled fields that live on them.
//!
//! A [`GridFunction`] stands for an element of C₀(ℝ): it is known at the grid nodes and
//! is implicitly zero outside `[x_min, x_max]`.

use std::fmt::Debug;
use std::io::Write;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Field values a grid function can carry: real for semigroup work, complex for resolvents
/// at complex `lambda`.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + Mul<f64, Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn modulus(self) -> f64;
    fn is_finite(self) -> bool;
    fn to_complex(self) -> Complex64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Default for Grid1D {
    /// `[-20, 20]` with 801 nodes, spacing 0.05.
    fn default() -> Self {
        Self {
            x_min: -20.0,
            x_max: 20.0,
            n_points: 801,
        }
    }
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid("bounds must be finite".into()));
        }
        if x_min >= x_max {
            return Err(Error::InvalidGrid(format!(
                "x_min ({x_min}) must be smaller than x_max ({x_max})"
            )));
        }
        if n_points < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes, got {n_points}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_points,
        })
    }

    /// Symmetric grid `[-half_width, half_width]` with the given spacing (rounded to fit).
    pub fn symmetric(half_width: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::InvalidGrid("spacing must be positive".into()));
        }
        let cells = (2.0 * half_width / spacing).round() as usize;
        Self::new(-half_width, half_width, cells + 1)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.spacing()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        let h = self.spacing();
        (0..self.n_points).map(move |k| self.x_min + k as f64 * h)
    }

    /// Indices of nodes at distance at least `margin` from both ends, and never the
    /// outermost node on either side.
    pub fn interior(&self, margin: f64) -> std::ops::Range<usize> {
        let skip = ((margin / self.spacing()).ceil() as usize).max(1);
        let end = self.n_points.saturating_sub(skip);
        if skip >= end {
            return 0..0;
        }
        skip..end
    }

    /// Index of the node closest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let k = ((x - self.x_min) / self.spacing()).round();
        k.clamp(0.0, (self.n_points - 1) as f64) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T = f64> {
    grid: Grid1D,
    values: Vec<T>,
}

impl<T: Scalar> GridFunction<T> {
    pub fn from_values(grid: Grid1D, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.n_points(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index,
                x: grid.x(index),
                value: format!("{:?}", values[index]),
            });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_values_unchecked(grid: Grid1D, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.n_points());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.n_points()],
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Value at the node closest to `x`.
    pub fn at(&self, x: f64) -> T {
        self.values[self.grid.nearest(x)]
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(self)
    }

    /// Sup norm restricted to a range of node indices.
    pub fn sup_norm_on(&self, range: std::ops::Range<usize>) -> f64 {
        self.values[range]
            .iter()
            .fold(0.0, |acc, v| acc.max(v.modulus()))
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> GridFunction<U> {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|v| v * alpha)
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&u, &v)| u * alpha + v * beta)
            .collect();
        Ok(Self {
            grid: self.grid,
            values,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }

    /// `sup |self - other|` over all nodes.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.sup_norm())
    }

    pub fn to_complex(&self) -> GridFunction<Complex64> {
        self.map(Scalar::to_complex)
    }
}

impl GridFunction<Complex64> {
    pub fn re(&self) -> GridFunction<f64> {
        self.map(|v| v.re)
    }

    pub fn im(&self) -> GridFunction<f64> {
        self.map(|v| v.im)
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }
}

/// Evaluates `func` at every node of `grid`.
pub fn sample(func: impl Fn(f64) -> f64, grid: &Grid1D) -> Result<GridFunction<f64>> {
    let values: Vec<f64> = grid.nodes().map(func).collect();
    GridFunction::from_values(*grid, values)
}

pub fn sup_norm<T: Scalar>(f: &GridFunction<T>) -> f64 {
    f.values.iter().fold(0.0, |acc, v| acc.max(v.modulus()))
}

/// Finite-difference first and second derivatives of a grid function.
#[derive(Debug, Clone)]
pub struct Derivatives<T = f64> {
    pub first: GridFunction<T>,
    pub second: GridFunction<T>,
}

impl<T> Derivatives<T> {
    /// Nodes whose stencils are one-sided; residual norms skip them.
    pub const BOUNDARY_NODES: usize = 1;
}

/// Second-order central differences inside, second-order one-sided stencils at the two
/// boundary nodes.
pub fn fd_derivatives<T: Scalar>(f: &GridFunction<T>) -> Result<Derivatives<T>> {
    let n = f.grid.n_points();
    if n < 5 {
        return Err(Error::InvalidGrid(format!(
            "finite differences need at least 5 nodes, got {n}"
        )));
    }
    let h = f.grid.spacing();
    let v = &f.values;
    let mut d1 = vec![T::zero(); n];
    let mut d2 = vec![T::zero(); n];
    let inv_2h = 0.5 / h;
    let inv_h2 = 1.0 / (h * h);
    for k in 1..n - 1 {
        d1[k] = (v[k + 1] - v[k - 1]) * inv_2h;
        d2[k] = (v[k + 1] - v[k] * 2.0 + v[k - 1]) * inv_h2;
    }
    d1[0] = (v[0] * -3.0 + v[1] * 4.0 - v[2]) * inv_2h;
    d2[0] = (v[0] * 2.0 - v[1] * 5.0 + v[2] * 4.0 - v[3]) * inv_h2;
    let m = n - 1;
    d1[m] = (v[m] * 3.0 - v[m - 1] * 4.0 + v[m - 2]) * inv_2h;
    d2[m] = (v[m] * 2.0 - v[m - 1] * 5.0 + v[m - 2] * 4.0 - v[m - 3]) * inv_h2;
    Ok(Derivatives {
        first: GridFunction::from_values_unchecked(f.grid, d1),
        second: GridFunction::from_values_unchecked(f.grid, d2),
    })
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `x,value` rows with 17 significant digits.
pub fn write_csv_real<W: Write>(f: &GridFunction<f64>, mut out: W) -> Result<()> {
    writeln!(out, "x,value")?;
    for (x, v) in f.grid.nodes().zip(&f.values) {
        writeln!(out, "{},{}", fmt_f64(x), fmt_f64(*v))?;
    }
    Ok(())
}

/// Writes `x,re,im` rows with 17 significant digits.
pub fn write_csv_complex<W: Write>(f: &GridFunction<Complex64>, mut out: W) -> Result<()> {
    writeln!(out, "x,re,im")?;
    for (x, v) in f.grid.nodes().zip(&f.values) {
        writeln!(out, "{},{},{}", fmt_f64(x), fmt_f64(v.re), fmt_f64(v.im))?;
    }
    Ok(())
}

/// Writes a two-column table with the given header, full precision.
pub fn write_csv_pairs<W: Write>(
    header: (&str, &str),
    rows: &[(f64, f64)],
    mut out: W,
) -> Result<()> {
    writeln!(out, "{},{}", header.0, header.1)?;
    for (a, b) in rows {
        writeln!(out, "{},{}", fmt_f64(*a), fmt_f64(*b))?;
    }
    Ok(())
}
