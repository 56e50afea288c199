//! Discrete fields on uniform tensor grids and the mesh-weighted inner product.
//!
//! A [`GridFunction`] stores interior node values only; homogeneous Dirichlet
//! boundary values are implicit. Layout is row-major with the x index
//! contiguous: value at (i, j) lives at `j * nx + i`.

use crate::error::{Error, Result};

/// Uniform grid on the unit square, interior nodes only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize) -> Self {
        assert!(nx >= 1 && ny >= 1, "grid needs at least one interior node");
        Self { nx, ny }
    }

    /// Square grid with `n` subdivisions per direction (n-1 interior nodes, h = 1/n).
    pub fn unit_square(n_divisions: usize) -> Self {
        assert!(n_divisions >= 2);
        Self::new(n_divisions - 1, n_divisions - 1)
    }

    pub fn hx(&self) -> f64 {
        1.0 / (self.nx as f64 + 1.0)
    }

    pub fn hy(&self) -> f64 {
        1.0 / (self.ny as f64 + 1.0)
    }

    /// x coordinate of interior node i (0-based).
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        (j as f64 + 1.0) * self.hy()
    }
}

/// Real-valued field over the interior nodes of a uniform tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
    dims: [usize; 2],
    spacing: [f64; 2],
}

impl GridFunction {
    pub fn new(values: Vec<f64>, dims: [usize; 2], spacing: [f64; 2]) -> Self {
        assert_eq!(values.len(), dims[0] * dims[1]);
        assert!(spacing.iter().all(|h| *h > 0.0));
        Self {
            values,
            dims,
            spacing,
        }
    }

    pub fn zeros(dims: [usize; 2], spacing: [f64; 2]) -> Self {
        Self::new(vec![0.0; dims[0] * dims[1]], dims, spacing)
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self::zeros(other.dims, other.spacing)
    }

    /// Field on a unit-square grid, sampled from `f(x, y)`.
    pub fn sample(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.nx * grid.ny);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self::new(values, [grid.nx, grid.ny], [grid.hx(), grid.hy()])
    }

    /// 1D field with n interior nodes and spacing h (stored as an n-by-1 grid
    /// with unit weight in the dummy direction).
    pub fn from_1d(values: Vec<f64>, h: f64) -> Self {
        let n = values.len();
        Self::new(values, [n, 1], [h, 1.0])
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.dims[0] + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * self.dims[0] + i] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims || self.spacing != other.spacing {
            return Err(Error::GridMismatch {
                lhs_dims: self.dims,
                rhs_dims: other.dims,
                lhs_spacing: self.spacing,
                rhs_spacing: other.spacing,
            });
        }
        Ok(())
    }

    /// Mesh-weighted discrete L2 inner product: hx*hy * sum(u_i * v_i).
    pub fn inner_product(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        let w = self.spacing[0] * self.spacing[1];
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(w * dot)
    }

    /// Norm induced by [`Self::inner_product`].
    pub fn norm(&self) -> f64 {
        let w = self.spacing[0] * self.spacing[1];
        (w * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// self += c * other
    pub fn axpy(&mut self, c: f64, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// a*u + b*v as a new field.
    pub fn lin_comb(a: f64, u: &Self, b: f64, v: &Self) -> Result<Self> {
        u.check_compatible(v)?;
        let values = u
            .values
            .iter()
            .zip(&v.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self::new(values, u.dims, u.spacing))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::lin_comb(1.0, self, -1.0, other)
    }

    /// Apply a scalar map to every value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(
            self.values.iter().map(|v| f(*v)).collect(),
            self.dims,
            self.spacing,
        )
    }
}
