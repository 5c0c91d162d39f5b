//! Dense complex linear-algebra kernels shared by every detector.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Dense complex matrix, column-major storage.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative floor on the smallest eigenvalue for a matrix to count as positive definite.
pub const PD_RELATIVE_FLOOR: f64 = 1e-12;

/// A Hermitian matrix. Construction symmetrizes the input as `(A + A^H) / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(a: ComplexMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "hermitian matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if !is_finite(&a) {
            return Err(Error::NonFinite);
        }
        let adj = a.adjoint();
        Ok(Self((a + adj).scale(0.5)))
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self(ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(d[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    /// `Z Z^H`.
    pub fn gram(z: &ComplexMatrix) -> Self {
        let g = z * z.adjoint();
        let adj = g.adjoint();
        Self((g + adj).scale(0.5))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }
}

/// Eigenvalues ascending, eigenvectors as the matching orthonormal columns.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigenSystem {
    /// Eigenvalues in descending order.
    pub fn values_desc(&self) -> Vec<f64> {
        self.values.iter().rev().copied().collect()
    }

    /// `V f(Λ) V^H` for a real spectral function `f`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        HermitianMatrix::gram_pair(&scaled, &self.vectors)
    }
}

impl HermitianMatrix {
    fn gram_pair(a: &ComplexMatrix, b: &ComplexMatrix) -> Self {
        let m = a * b.adjoint();
        let adj = m.adjoint();
        Self((m + adj).scale(0.5))
    }
}

pub fn is_finite(a: &ComplexMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermitian_eig(a: &HermitianMatrix) -> Result<EigenSystem> {
    let n = a.dim();
    if n == 0 {
        return Ok(EigenSystem {
            values: Vec::new(),
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let eig = a
        .as_matrix()
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| Error::EigenNoConvergence {
            dim: n,
            condition: diagonal_condition(a),
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(EigenSystem { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(a: &HermitianMatrix) -> Result<Vec<f64>> {
    hermitian_eig(a).map(|e| e.values)
}

fn diagonal_condition(a: &HermitianMatrix) -> f64 {
    let d: Vec<f64> = a.as_matrix().diagonal().iter().map(|z| z.re.abs()).collect();
    let max = d.iter().cloned().fold(0.0, f64::max);
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// `A^{-1/2}` for Hermitian positive definite `A`.
pub fn inv_sqrt(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let eig = hermitian_eig(a)?;
    check_positive_definite(&eig.values)?;
    Ok(eig.spectral_map(|l| 1.0 / l.sqrt()))
}

fn check_positive_definite(values: &[f64]) -> Result<()> {
    let (Some(&smallest), Some(&largest)) = (values.first(), values.last()) else {
        return Ok(());
    };
    if largest <= 0.0 || smallest <= PD_RELATIVE_FLOOR * largest {
        return Err(Error::NotPositiveDefinite { smallest, largest });
    }
    Ok(())
}

/// Lower-triangular `L` with positive real diagonal and `L L^H = A`.
pub fn cholesky(a: &HermitianMatrix) -> Result<ComplexMatrix> {
    let n = a.dim();
    let m = a.as_matrix();
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::CholeskyPivot { index: j, value: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// `log det A` for Hermitian positive definite `A`, via Cholesky.
pub fn log_det_hpd(a: &HermitianMatrix) -> Result<f64> {
    let l = cholesky(a)?;
    Ok(l.diagonal().iter().map(|z| 2.0 * z.re.ln()).sum())
}

/// Solve `L X = B` for lower-triangular `L`.
pub fn solve_lower(l: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..x.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Orthonormal basis of the column space of a full-column-rank `G`, computed
/// as `G L^{-H}` with `L L^H = G^H G`. Returns the basis and `L`.
pub fn orthonormal_basis(g: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let gram = HermitianMatrix::gram(&g.adjoint());
    let l = cholesky(&gram)?;
    // Q^H = L^{-1} G^H
    let qh = solve_lower(&l, &g.adjoint());
    Ok((qh.adjoint(), l))
}

/// `L W` where `W` has i.i.d. unit-variance circular complex normal entries,
/// drawn column by column.
pub fn sample_colored_gaussian(
    chol_factor: &ComplexMatrix,
    cols: usize,
    rng: &mut RngStream,
) -> ComplexMatrix {
    let n = chol_factor.ncols();
    let mut w = ComplexMatrix::zeros(n, cols);
    for c in 0..cols {
        for r in 0..n {
            w[(r, c)] = rng.complex_normal();
        }
    }
    chol_factor * w
}

/// Squared Frobenius norm.
pub fn frob_sq(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}
