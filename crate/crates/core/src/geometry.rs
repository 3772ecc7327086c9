//! Discrete unit-square domain, boundary walk, accessible arc and quadrature.
//!
//! Nodes are `(i h, j h)` for `0 <= i, j <= n` and are stored row-major with
//! flat index `j (n + 1) + i`. Boundary nodes are walked counterclockwise
//! starting at the origin; walk index `k` sits at arclength `s = k h` with
//! `s` in `[0, 4)`:
//!
//! | walk index `k`   | node                 | side   |
//! |------------------|----------------------|--------|
//! | `0 .. n`         | `(k, 0)`             | bottom |
//! | `n .. 2n`        | `(n, k - n)`         | right  |
//! | `2n .. 3n`       | `(3n - k, n)`        | top    |
//! | `3n .. 4n`       | `(0, 4n - k)`        | left   |
//!
//! A corner belongs to the side that precedes it in the walk, so side `q`
//! owns the nodes with `s` in `(q, q + 1]` and the origin belongs to the left
//! side. The corner convention only affects outward normals.

use crate::error::{Error, Result};

/// Perimeter of the unit square in arclength units.
pub const PERIMETER: f64 = 4.0;

/// A side of the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    /// Outward unit normal `(nx, ny)`.
    pub fn normal(self) -> (i64, i64) {
        match self {
            Side::Bottom => (0, -1),
            Side::Right => (1, 0),
            Side::Top => (0, 1),
            Side::Left => (-1, 0),
        }
    }
}

/// Uniform tensor grid on the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    n: usize,
    h: f64,
}

impl Grid2D {
    /// Builds a grid with `n_cells_per_side` cells along each axis.
    pub fn new(n_cells_per_side: usize) -> Result<Self> {
        if n_cells_per_side < 4 {
            return Err(Error::GridTooCoarse(n_cells_per_side));
        }
        Ok(Self {
            n: n_cells_per_side,
            h: 1.0 / n_cells_per_side as f64,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of nodes per axis, `n + 1`.
    pub fn side_nodes(&self) -> usize {
        self.n + 1
    }

    pub fn node_count(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn boundary_count(&self) -> usize {
        4 * self.n
    }

    /// Number of interior unknowns, `(n - 1)^2`.
    pub fn interior_count(&self) -> usize {
        (self.n - 1) * (self.n - 1)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    #[inline]
    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node % (self.n + 1), node / (self.n + 1))
    }

    #[inline]
    pub fn coords(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.ij(node);
        (self.coord(i), self.coord(j))
    }

    #[inline]
    fn coord(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn is_boundary_ij(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n || j == self.n
    }

    /// Flat index of interior node `(i, j)` among interior unknowns, `1 <= i, j <= n - 1`.
    #[inline]
    pub fn interior_index(&self, i: usize, j: usize) -> usize {
        (j - 1) * (self.n - 1) + (i - 1)
    }

    /// Grid node of the `p`-th interior unknown.
    #[inline]
    pub fn interior_node(&self, p: usize) -> usize {
        let m = self.n - 1;
        self.index(p % m + 1, p / m + 1)
    }

    /// `(i, j)` of boundary walk index `k`.
    pub fn boundary_ij(&self, k: usize) -> (usize, usize) {
        let n = self.n;
        assert!(k < 4 * n, "boundary index {k} out of range");
        match k / n {
            0 => (k, 0),
            1 => (n, k - n),
            2 => (3 * n - k, n),
            _ => (0, 4 * n - k),
        }
    }

    pub fn boundary_node(&self, k: usize) -> usize {
        let (i, j) = self.boundary_ij(k);
        self.index(i, j)
    }

    /// Arclength parameter of boundary walk index `k`.
    pub fn boundary_s(&self, k: usize) -> f64 {
        k as f64 / self.n as f64
    }

    /// Side owning boundary walk index `k` under the corner convention.
    pub fn boundary_side(&self, k: usize) -> Side {
        let n = self.n;
        if k == 0 {
            return Side::Left;
        }
        match (k - 1) / n {
            0 => Side::Bottom,
            1 => Side::Right,
            2 => Side::Top,
            _ => Side::Left,
        }
    }

    /// Coordinates of the point at arclength `s` (taken modulo the perimeter).
    pub fn point_at(&self, s: f64) -> (f64, f64) {
        let s = s.rem_euclid(PERIMETER);
        match s as usize {
            0 => (s, 0.0),
            1 => (1.0, s - 1.0),
            2 => (3.0 - s, 1.0),
            _ => (0.0, 4.0 - s),
        }
    }
}

/// Accessible boundary arc: the half-open arclength interval `[s0, s1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaMask {
    s0: f64,
    s1: f64,
    flags: Vec<bool>,
}

impl GammaMask {
    /// Arc `[s0, s1)` with `0 < s1 - s0 <= 4`. `s0` is taken modulo the
    /// perimeter, so arcs may wrap through the origin.
    pub fn new(s0: f64, s1: f64, grid: &Grid2D) -> Result<Self> {
        let invalid = |reason: &str| Error::InvalidArc {
            s0,
            s1,
            reason: reason.to_string(),
        };
        if !s0.is_finite() || !s1.is_finite() {
            return Err(invalid("endpoints must be finite"));
        }
        let len = s1 - s0;
        if len <= 0.0 || len > PERIMETER {
            return Err(invalid("length must lie in (0, 4]"));
        }
        let flags: Vec<bool> = (0..grid.boundary_count())
            .map(|k| (grid.boundary_s(k) - s0).rem_euclid(PERIMETER) < len)
            .collect();
        if flags.iter().filter(|&&f| f).count() < 2 {
            return Err(invalid("fewer than 2 boundary nodes on the arc"));
        }
        Ok(Self { s0, s1, flags })
    }

    /// The whole boundary, `[0, 4)`.
    pub fn full(grid: &Grid2D) -> Self {
        Self {
            s0: 0.0,
            s1: PERIMETER,
            flags: vec![true; grid.boundary_count()],
        }
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn s1(&self) -> f64 {
        self.s1
    }

    pub fn length(&self) -> f64 {
        self.s1 - self.s0
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn contains(&self, k: usize) -> bool {
        self.flags[k]
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn is_full(&self) -> bool {
        self.flags.iter().all(|&f| f)
    }

    /// Distance along the arc from `s0` to `s`, in `[0, 4)`.
    pub fn arc_offset(&self, s: f64) -> f64 {
        (s - self.s0).rem_euclid(PERIMETER)
    }

    /// Flags of the complementary arc.
    pub fn complement_flags(&self) -> Vec<bool> {
        self.flags.iter().map(|f| !f).collect()
    }
}

/// Nodal values on every grid node, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid2D) -> Self {
        Self {
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn constant(grid: &Grid2D, value: f64) -> Self {
        Self {
            values: vec![value; grid.node_count()],
        }
    }

    pub fn from_fn(grid: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            values: (0..grid.node_count())
                .map(|p| {
                    let (x, y) = grid.coords(p);
                    f(x, y)
                })
                .collect(),
        }
    }

    /// Wraps raw values, checking length and finiteness.
    pub fn from_values(grid: &Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::LengthMismatch {
                what: "scalar field",
                expected: grid.node_count(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar field"));
        }
        Ok(Self { values })
    }

    pub fn check_grid(&self, grid: &Grid2D) -> Result<()> {
        if self.values.len() != grid.node_count() {
            return Err(Error::LengthMismatch {
                what: "scalar field",
                expected: grid.node_count(),
                actual: self.values.len(),
            });
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    pub fn scale(&self, a: f64) -> ScalarField {
        Self {
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Boundary values in walk order.
    pub fn trace(&self, grid: &Grid2D) -> BoundaryTrace {
        BoundaryTrace {
            values: (0..grid.boundary_count())
                .map(|k| self.values[grid.boundary_node(k)])
                .collect(),
        }
    }
}

/// Values on boundary nodes in walk order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    values: Vec<f64>,
}

impl BoundaryTrace {
    pub fn zeros(grid: &Grid2D) -> Self {
        Self {
            values: vec![0.0; grid.boundary_count()],
        }
    }

    pub fn constant(grid: &Grid2D, value: f64) -> Self {
        Self {
            values: vec![value; grid.boundary_count()],
        }
    }

    /// Samples `f(s)` at every boundary node.
    pub fn from_arclength(grid: &Grid2D, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: (0..grid.boundary_count())
                .map(|k| f(grid.boundary_s(k)))
                .collect(),
        }
    }

    /// Samples `f(x, y)` at every boundary node.
    pub fn from_xy(grid: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            values: (0..grid.boundary_count())
                .map(|k| {
                    let (x, y) = grid.coords(grid.boundary_node(k));
                    f(x, y)
                })
                .collect(),
        }
    }

    pub fn from_values(grid: &Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.boundary_count() {
            return Err(Error::LengthMismatch {
                what: "boundary trace",
                expected: grid.boundary_count(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("boundary trace"));
        }
        Ok(Self { values })
    }

    pub fn check_grid(&self, grid: &Grid2D) -> Result<()> {
        if self.values.len() != grid.boundary_count() {
            return Err(Error::LengthMismatch {
                what: "boundary trace",
                expected: grid.boundary_count(),
                actual: self.values.len(),
            });
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Zeroes every entry outside the arc.
    pub fn masked(&self, mask: &GammaMask) -> BoundaryTrace {
        BoundaryTrace {
            values: self
                .values
                .iter()
                .zip(mask.flags())
                .map(|(&v, &inside)| if inside { v } else { 0.0 })
                .collect(),
        }
    }

    /// Largest magnitude outside the arc.
    pub fn off_arc_max(&self, mask: &GammaMask) -> f64 {
        self.values
            .iter()
            .zip(mask.flags())
            .filter(|(_, &inside)| !inside)
            .fold(0.0, |m, (v, _)| m.max(v.abs()))
    }

    pub fn mul(&self, other: &BoundaryTrace) -> BoundaryTrace {
        BoundaryTrace {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    pub fn scale(&self, a: f64) -> BoundaryTrace {
        BoundaryTrace {
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &BoundaryTrace) {
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn sub(&self, other: &BoundaryTrace) -> BoundaryTrace {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

/// Trapezoidal approximation of the integral of `g` over the arc.
///
/// The boundary is a closed polygon with uniform node spacing, so every node
/// carries weight `h` (corners collect `h/2` from each adjacent side).
pub fn boundary_integral(g: &BoundaryTrace, mask: &GammaMask, grid: &Grid2D) -> Result<f64> {
    g.check_grid(grid)?;
    boundary_integral_flags(g, mask.flags(), grid)
}

/// As [`boundary_integral`] but with an explicit per-node flag vector.
pub fn boundary_integral_flags(g: &BoundaryTrace, flags: &[bool], grid: &Grid2D) -> Result<f64> {
    g.check_grid(grid)?;
    if flags.len() != grid.boundary_count() {
        return Err(Error::LengthMismatch {
            what: "boundary flags",
            expected: grid.boundary_count(),
            actual: flags.len(),
        });
    }
    let sum: f64 = g
        .values()
        .iter()
        .zip(flags)
        .filter(|(_, &f)| f)
        .map(|(v, _)| v)
        .sum();
    Ok(grid.h() * sum)
}

/// Tensor trapezoidal rule over the unit square.
pub fn interior_integral(a: &ScalarField, grid: &Grid2D) -> Result<f64> {
    a.check_grid(grid)?;
    let n = grid.n();
    let values = a.values();
    let weight = |i: usize| if i == 0 || i == n { 0.5 } else { 1.0 };
    let mut total = 0.0;
    for j in 0..=n {
        let row = &values[j * (n + 1)..(j + 1) * (n + 1)];
        let row_sum: f64 = row.iter().enumerate().map(|(i, v)| weight(i) * v).sum();
        total += weight(j) * row_sum;
    }
    Ok(total * grid.h() * grid.h())
}

/// Discrete L2 norm via [`interior_integral`] of the square.
pub fn l2_norm(a: &ScalarField, grid: &Grid2D) -> Result<f64> {
    Ok(interior_integral(&a.mul(a), grid)?.sqrt())
}
