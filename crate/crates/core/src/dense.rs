//! Dense symmetric positive definite backend, used for scalar/matrix test
//! problems and by the verification oracle's time-stepping checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::splitting::SubOperator;

const SYMMETRY_TOL: f64 = 1e-12;

/// A dense symmetric positive definite matrix acting on fields stored as
/// n-by-1 grids with unit mesh weight (plain Euclidean inner product).
pub struct DenseOperator {
    mat: DMatrix<f64>,
    alpha: f64,
}

impl DenseOperator {
    /// Validates symmetry and positive definiteness; alpha is the smallest
    /// eigenvalue.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::OracleInput("matrix must be square".into()));
        }
        let scale = mat.norm().max(1.0);
        for i in 0..mat.nrows() {
            for j in (i + 1)..mat.ncols() {
                if (mat[(i, j)] - mat[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::OracleInput(format!(
                        "matrix not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let eig = mat.clone().symmetric_eigen();
        let alpha = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if alpha <= 0.0 {
            return Err(Error::OracleInput(format!(
                "matrix not positive definite (min eigenvalue {alpha})"
            )));
        }
        Ok(Self { mat, alpha })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// Wraps a plain vector as the unit-weight field this backend acts on.
    pub fn field(values: Vec<f64>) -> GridFunction {
        GridFunction::from_1d(values, 1.0)
    }
}

impl SubOperator for DenseOperator {
    fn apply(&self, u: &GridFunction) -> GridFunction {
        assert_eq!(u.len(), self.dim(), "field/matrix size mismatch");
        let v = DVector::from_column_slice(u.values());
        let out = &self.mat * v;
        GridFunction::new(out.as_slice().to_vec(), u.dims(), u.spacing())
    }

    fn solve_shifted(&self, shift: f64, rhs: &GridFunction) -> Result<GridFunction> {
        assert_eq!(rhs.len(), self.dim(), "field/matrix size mismatch");
        let n = self.dim();
        let shifted = DMatrix::identity(n, n) + shift * &self.mat;
        let chol = shifted.cholesky().ok_or_else(|| Error::Solve {
            part: 0,
            step: 0,
            reason: format!("shifted dense system not SPD at shift {shift}"),
        })?;
        let sol = chol.solve(&DVector::from_column_slice(rhs.values()));
        Ok(GridFunction::new(
            sol.as_slice().to_vec(),
            rhs.dims(),
            rhs.spacing(),
        ))
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }
}
