//! Dense symmetric positive-definite linear algebra for small dimensions.
//!
//! Every design matrix in the crate is `λI`-regularized, so a Cholesky
//! factorization (from `nalgebra`) is all that is needed. A failed factorization is reported as
//! an error and never patched up with extra regularization.

use nalgebra::{DMatrix, DVector, Dyn};

use crate::error::{check_dim, Error, Result};

/// Relative tolerance used when validating symmetry of user-supplied matrices.
const SYMMETRY_TOL: f64 = 1e-12;

/// A symmetric `dim × dim` matrix.
///
/// Positive definiteness is checked lazily by [`SpdMatrix::cholesky`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    inner: DMatrix<f64>,
}

impl SpdMatrix {
    /// `scale · I`.
    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        Self {
            inner: DMatrix::from_diagonal_element(dim, dim, scale),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    /// Builds a matrix from row-major entries, rejecting non-symmetric input.
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        check_dim(dim * dim, entries.len())?;
        let inner = DMatrix::from_row_slice(dim, dim, &entries);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (inner[(i, j)], inner[(j, i)]);
                let diff = (a - b).abs();
                if diff > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::NotSymmetric { row: i, col: j, diff });
                }
            }
        }
        Ok(Self { inner })
    }

    /// Builds `diag(values)`.
    pub fn diagonal(values: &[f64]) -> Self {
        Self {
            inner: DMatrix::from_diagonal(&DVector::from_column_slice(values)),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    /// All entries; the layout is irrelevant because the matrix is symmetric.
    pub fn entries(&self) -> &[f64] {
        self.inner.as_slice()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    /// `self += weight · x xᵀ`.
    pub fn add_outer(&mut self, x: &[f64], weight: f64) {
        let v = DVector::from_column_slice(x);
        self.inner.ger(weight, &v, &v, 1.0);
    }

    /// `self *= factor`.
    pub fn scale(&mut self, factor: f64) {
        self.inner *= factor;
    }

    /// `self += value · I`.
    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.dim() {
            self.inner[(i, i)] += value;
        }
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (&self.inner * DVector::from_column_slice(x)).data.into()
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    /// Lower-triangular Cholesky factor.
    pub fn cholesky(&self) -> Result<Cholesky> {
        if self.inner.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        self.inner
            .clone()
            .cholesky()
            .map(|factor| Cholesky { factor })
            .ok_or(Error::NotPositiveDefinite)
    }
}

/// Cholesky factor `A = L Lᵀ` of an [`SpdMatrix`].
#[derive(Debug, Clone)]
pub struct Cholesky {
    factor: nalgebra::Cholesky<f64, Dyn>,
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.factor.l_dirty().nrows()
    }

    /// `L⁻¹b`.
    fn forward(&self, b: &[f64]) -> DVector<f64> {
        let mut y = DVector::from_column_slice(b);
        self.factor.l_dirty().solve_lower_triangular_mut(&mut y);
        y
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), b.len())?;
        Ok(self.factor.solve(&DVector::from_column_slice(b)).data.into())
    }

    /// `‖x‖_{A⁻¹} = ‖L⁻¹x‖₂`.
    pub fn inv_norm(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.forward(x).norm())
    }

    /// `xᵀA⁻¹x`.
    pub fn inv_quad(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.forward(x).norm_squared())
    }

    pub fn logdet(&self) -> f64 {
        self.factor.ln_determinant()
    }
}

/// Solves `A x = b` for positive-definite `A`.
pub fn spd_solve(a: &SpdMatrix, b: &[f64]) -> Result<Vec<f64>> {
    check_dim(a.dim(), b.len())?;
    a.cholesky()?.solve(b)
}

/// `‖x‖_{A⁻¹} = √(xᵀA⁻¹x)`.
pub fn quad_norm(a: &SpdMatrix, x: &[f64]) -> Result<f64> {
    check_dim(a.dim(), x.len())?;
    a.cholesky()?.inv_norm(x)
}

/// `log det A` from the Cholesky diagonal.
pub fn logdet(a: &SpdMatrix) -> Result<f64> {
    Ok(a.cholesky()?.logdet())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha · x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scaled(x: &[f64], factor: f64) -> Vec<f64> {
    x.iter().map(|v| v * factor).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Euclidean projection onto the ball `{θ : ‖θ‖₂ ≤ radius}`.
pub fn project_ball(theta: &[f64], radius: f64) -> Vec<f64> {
    let n = norm2(theta);
    if n <= radius {
        theta.to_vec()
    } else {
        scaled(theta, radius / n)
    }
}
