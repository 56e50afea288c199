//! 5-point Laplacian backend on the unit square with homogeneous Dirichlet
//! data, split directionally: A1 = -d2/dx2, A2 = -d2/dy2. Shifted solves
//! decompose into independent tridiagonal systems per grid line.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::Result;
use crate::grid::{Grid2D, GridFunction};
use crate::splitting::SubOperator;
use crate::tridiag::ThomasFactors;

/// Smallest eigenvalue of the 1D second-difference matrix on n interior
/// nodes with spacing h = 1/(n+1): (4/h^2) sin^2(pi h / 2).
pub fn spectral_lower_bound(h: f64) -> f64 {
    let s = (std::f64::consts::PI * h / 2.0).sin();
    4.0 / (h * h) * s * s
}

fn assert_matches(u: &GridFunction, grid: Grid2D) {
    assert_eq!(u.dims(), [grid.nx, grid.ny], "field does not match grid");
}

/// (A1 u)_{i,j} = (-u_{i-1,j} + 2 u_{i,j} - u_{i+1,j}) / hx^2, zero ghosts.
pub fn apply_dxx(grid: Grid2D, u: &GridFunction) -> GridFunction {
    assert_matches(u, grid);
    let (nx, ny) = (grid.nx, grid.ny);
    let inv_h2 = 1.0 / (grid.hx() * grid.hx());
    let mut out = GridFunction::zeros_like(u);
    let src = u.values();
    for j in 0..ny {
        let row = &src[j * nx..(j + 1) * nx];
        let dst = &mut out.values_mut()[j * nx..(j + 1) * nx];
        for i in 0..nx {
            let left = if i > 0 { row[i - 1] } else { 0.0 };
            let right = if i + 1 < nx { row[i + 1] } else { 0.0 };
            dst[i] = (2.0 * row[i] - left - right) * inv_h2;
        }
    }
    out
}

/// y-direction twin of [`apply_dxx`].
pub fn apply_dyy(grid: Grid2D, u: &GridFunction) -> GridFunction {
    assert_matches(u, grid);
    let (nx, ny) = (grid.nx, grid.ny);
    let inv_h2 = 1.0 / (grid.hy() * grid.hy());
    let mut out = GridFunction::zeros_like(u);
    let src = u.values();
    for j in 0..ny {
        for i in 0..nx {
            let down = if j > 0 { src[(j - 1) * nx + i] } else { 0.0 };
            let up = if j + 1 < ny { src[(j + 1) * nx + i] } else { 0.0 };
            out.values_mut()[j * nx + i] = (2.0 * src[j * nx + i] - down - up) * inv_h2;
        }
    }
    out
}

fn transpose(values: &[f64], nx: usize, ny: usize) -> Vec<f64> {
    let mut t = vec![0.0; values.len()];
    for j in 0..ny {
        for i in 0..nx {
            t[i * ny + j] = values[j * nx + i];
        }
    }
    t
}

/// Factors are constant per shift; cache them so a fixed-step run factors
/// once and back-substitutes per step.
struct FactorCache {
    n: usize,
    h: f64,
    cache: RwLock<HashMap<u64, Arc<ThomasFactors>>>,
}

impl FactorCache {
    fn new(n: usize, h: f64) -> Self {
        Self {
            n,
            h,
            cache: RwLock::new(HashMap::new()),
        }
    }

    fn get(&self, sigma: f64) -> Arc<ThomasFactors> {
        let key = sigma.to_bits();
        if let Some(f) = self.cache.read().unwrap().get(&key) {
            return Arc::clone(f);
        }
        let f = Arc::new(ThomasFactors::new(self.n, sigma, self.h));
        self.cache
            .write()
            .unwrap()
            .entry(key)
            .or_insert(f)
            .clone()
    }
}

/// Directional operator -d2/dx2 (x lines are contiguous; per-line solves
/// run in parallel).
pub struct DxxOperator {
    grid: Grid2D,
    factors: FactorCache,
}

impl DxxOperator {
    pub fn new(grid: Grid2D) -> Self {
        let h = grid.hx();
        Self {
            grid,
            factors: FactorCache::new(grid.nx, h),
        }
    }
}

impl SubOperator for DxxOperator {
    fn apply(&self, u: &GridFunction) -> GridFunction {
        apply_dxx(self.grid, u)
    }

    fn solve_shifted(&self, shift: f64, rhs: &GridFunction) -> Result<GridFunction> {
        assert_matches(rhs, self.grid);
        let f = self.factors.get(shift);
        let mut out = rhs.clone();
        out.values_mut()
            .par_chunks_mut(self.grid.nx)
            .for_each(|line| f.solve_line(line));
        Ok(out)
    }

    fn alpha(&self) -> f64 {
        spectral_lower_bound(self.grid.hx())
    }
}

/// Directional operator -d2/dy2. Solves operate on a transposed copy so the
/// memory streams stay contiguous; cost is one transpose pair per solve.
pub struct DyyOperator {
    grid: Grid2D,
    factors: FactorCache,
}

impl DyyOperator {
    pub fn new(grid: Grid2D) -> Self {
        let h = grid.hy();
        Self {
            grid,
            factors: FactorCache::new(grid.ny, h),
        }
    }
}

impl SubOperator for DyyOperator {
    fn apply(&self, u: &GridFunction) -> GridFunction {
        apply_dyy(self.grid, u)
    }

    fn solve_shifted(&self, shift: f64, rhs: &GridFunction) -> Result<GridFunction> {
        assert_matches(rhs, self.grid);
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let f = self.factors.get(shift);
        let mut t = transpose(rhs.values(), nx, ny);
        t.par_chunks_mut(ny).for_each(|line| f.solve_line(line));
        let back = transpose(&t, ny, nx);
        Ok(GridFunction::new(back, rhs.dims(), rhs.spacing()))
    }

    fn alpha(&self) -> f64 {
        spectral_lower_bound(self.grid.hy())
    }
}

/// The unsplit 5-point operator -Laplace, used by the baseline scheme.
/// Shifted solves go through the tensor sine eigenbasis (exact to roundoff).
pub struct LaplacianOperator {
    grid: Grid2D,
    qx: DMatrix<f64>,
    qy: DMatrix<f64>,
    lambda_x: Vec<f64>,
    lambda_y: Vec<f64>,
}

fn sine_basis(n: usize) -> (DMatrix<f64>, Vec<f64>) {
    let h = 1.0 / (n as f64 + 1.0);
    let norm = (2.0 * h).sqrt(); // sqrt(2/(n+1))
    let q = DMatrix::from_fn(n, n, |i, p| {
        norm * (std::f64::consts::PI * (p as f64 + 1.0) * (i as f64 + 1.0) * h).sin()
    });
    let lambda = (0..n)
        .map(|p| {
            let s = (std::f64::consts::PI * (p as f64 + 1.0) * h / 2.0).sin();
            4.0 / (h * h) * s * s
        })
        .collect();
    (q, lambda)
}

impl LaplacianOperator {
    pub fn new(grid: Grid2D) -> Self {
        let (qx, lambda_x) = sine_basis(grid.nx);
        let (qy, lambda_y) = sine_basis(grid.ny);
        Self {
            grid,
            qx,
            qy,
            lambda_x,
            lambda_y,
        }
    }
}

impl SubOperator for LaplacianOperator {
    fn apply(&self, u: &GridFunction) -> GridFunction {
        let mut out = apply_dxx(self.grid, u);
        out.axpy(1.0, &apply_dyy(self.grid, u)).unwrap();
        out
    }

    fn solve_shifted(&self, shift: f64, rhs: &GridFunction) -> Result<GridFunction> {
        assert_matches(rhs, self.grid);
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        // field as an ny-by-nx matrix (row-major storage, x contiguous)
        let v = DMatrix::from_fn(ny, nx, |j, i| rhs.values()[j * nx + i]);
        // sine basis matrices are symmetric and orthogonal
        let mut c = &self.qy * v * &self.qx;
        for p in 0..nx {
            for q in 0..ny {
                c[(q, p)] /= 1.0 + shift * (self.lambda_x[p] + self.lambda_y[q]);
            }
        }
        let w = &self.qy * c * &self.qx;
        let mut out = GridFunction::zeros_like(rhs);
        for j in 0..ny {
            for i in 0..nx {
                out.values_mut()[j * nx + i] = w[(j, i)];
            }
        }
        Ok(out)
    }

    fn alpha(&self) -> f64 {
        spectral_lower_bound(self.grid.hx()) + spectral_lower_bound(self.grid.hy())
    }
}
