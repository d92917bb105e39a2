//! Uniform grid on `[-L, L]` with spacing `h = 1/m`, so that integer
//! shifts move exactly `m` grid indices, and the discrete Sobolev calculus
//! used throughout.

use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    /// `L · m`; the half-width in grid cells.
    half_cells: usize,
    /// Subdivisions per unit length, `m = 1/h`.
    m: usize,
}

impl Grid {
    /// Grid with half-width `L` and `m` subdivisions per unit; `L · m` must
    /// be a positive integer.
    pub fn new(half_width: f64, m: usize) -> Result<Self> {
        if m == 0 || !(half_width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid needs L > 0 and m >= 1, got L = {half_width}, m = {m}"
            )));
        }
        let cells = half_width * m as f64;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "L * m must be an integer, got {half_width} * {m}"
            )));
        }
        Ok(Self { half_cells: rounded as usize, m })
    }

    pub fn subdivisions(&self) -> usize {
        self.m
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn half_width(&self) -> f64 {
        self.half_cells as f64 / self.m as f64
    }

    pub fn half_cells(&self) -> usize {
        self.half_cells
    }

    /// `N = 2 L m + 1`.
    pub fn len(&self) -> usize {
        2 * self.half_cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `z = 0`.
    pub fn center(&self) -> usize {
        self.half_cells
    }

    pub fn point(&self, i: usize) -> f64 {
        (i as f64 - self.half_cells as f64) / self.m as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Index of the mirror point `-z_i`.
    pub fn mirror(&self, i: usize) -> usize {
        self.len() - 1 - i
    }

    /// Trapezoid weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i + 1 == self.len() {
            0.5 * h
        } else {
            h
        }
    }
}

/// Sampled function on a [`Grid`], extended beyond `[-L, L]` by its
/// far-field limits.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub left_limit: f64,
    pub right_limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1,
    H2,
    Linf,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, left_limit: f64, right_limit: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values, left_limit, right_limit })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()], left_limit: 0.0, right_limit: 0.0 }
    }

    /// Samples `f` with the given limits.
    pub fn sample(grid: Grid, f: impl Fn(f64) -> f64, left_limit: f64, right_limit: f64) -> Self {
        let values = grid.points().map(f).collect();
        Self { grid, values, left_limit, right_limit }
    }

    /// A decaying function (both limits 0) from raw values.
    pub fn fluctuation(grid: Grid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values, 0.0, 0.0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at signed index `i`, using the far-field limits outside the grid.
    #[inline]
    pub fn extended(&self, i: isize) -> f64 {
        if i < 0 {
            self.left_limit
        } else if i as usize >= self.values.len() {
            self.right_limit
        } else {
            self.values[i as usize]
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            left_limit: f(self.left_limit),
            right_limit: f(self.right_limit),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| a * v).collect(),
            left_limit: a * self.left_limit,
            right_limit: a * self.right_limit,
        }
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &GridFunction, b: f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            left_limit: a * self.left_limit + b * other.left_limit,
            right_limit: a * self.right_limit + b * other.right_limit,
        }
    }

    pub fn zero_boundary(&mut self) {
        let n = self.values.len();
        self.values[0] = 0.0;
        self.values[n - 1] = 0.0;
    }

    /// Odd part about `z = 0`: `(u(z) − u(−z)) / 2`.
    pub fn odd_part(&self) -> Self {
        let g = self.grid;
        let values = (0..g.len())
            .map(|i| 0.5 * (self.values[i] - self.values[g.mirror(i)]))
            .collect();
        let lim = 0.5 * (self.right_limit - self.left_limit);
        Self { grid: g, values, left_limit: -lim, right_limit: lim }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Two-column CSV `z,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z,value\n");
        for (z, v) in self.grid.points().zip(&self.values) {
            writeln!(out, "{z},{v}").unwrap();
        }
        out
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: &GridFunction) -> GridFunction {
        self.axpby(1.0, rhs, 1.0)
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: &GridFunction) -> GridFunction {
        self.axpby(1.0, rhs, -1.0)
    }
}

impl Mul<&GridFunction> for f64 {
    type Output = GridFunction;
    fn mul(self, rhs: &GridFunction) -> GridFunction {
        rhs.scale(self)
    }
}

fn check_same_grid(u: &GridFunction, v: &GridFunction) -> Result<()> {
    if u.grid != v.grid {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", u.grid, v.grid)));
    }
    Ok(())
}

/// Trapezoid approximation of `∫_{-L}^{L} u v dz`.
pub fn inner_product(u: &GridFunction, v: &GridFunction) -> Result<f64> {
    check_same_grid(u, v)?;
    Ok(dot_weighted(&u.grid, &u.values, &v.values))
}

pub(crate) fn dot_weighted(grid: &Grid, u: &[f64], v: &[f64]) -> f64 {
    let n = u.len();
    let interior: f64 = u[1..n - 1].iter().zip(&v[1..n - 1]).map(|(a, b)| a * b).sum();
    grid.spacing() * (interior + 0.5 * (u[0] * v[0] + u[n - 1] * v[n - 1]))
}

/// Central first difference; ghost values come from the far-field limits.
/// The result decays (limits 0).
pub fn d1(u: &GridFunction) -> GridFunction {
    let inv = 0.5 * u.grid.subdivisions() as f64;
    let values = (0..u.len() as isize)
        .map(|i| (u.extended(i + 1) - u.extended(i - 1)) * inv)
        .collect();
    GridFunction { grid: u.grid, values, left_limit: 0.0, right_limit: 0.0 }
}

/// Central second difference with far-field ghost values.
pub fn d2(u: &GridFunction) -> GridFunction {
    let m = u.grid.subdivisions() as f64;
    let inv = m * m;
    let values = (0..u.len() as isize)
        .map(|i| (u.extended(i + 1) - 2.0 * u.extended(i) + u.extended(i - 1)) * inv)
        .collect();
    GridFunction { grid: u.grid, values, left_limit: 0.0, right_limit: 0.0 }
}

pub fn norm(u: &GridFunction, kind: NormKind) -> f64 {
    let l2_sq = |v: &GridFunction| dot_weighted(&v.grid, &v.values, &v.values);
    match kind {
        NormKind::Linf => u.max_abs(),
        NormKind::L2 => l2_sq(u).sqrt(),
        NormKind::H1 => (l2_sq(u) + l2_sq(&d1(u))).sqrt(),
        NormKind::H2 => (l2_sq(u) + l2_sq(&d1(u)) + l2_sq(&d2(u))).sqrt(),
    }
}
