//! Dense complex matrices, Kronecker products, Hermitian eigensystems and
//! the unitary propagator `exp(-i H t)`.
//!
//! All matrices are small (the largest physically interesting system is a
//! few hundred states), so everything is dense and backed by `nalgebra`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative Hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance for unitarity and eigen-reconstruction residuals.
pub const UNITARY_TOL: f64 = 1e-10;

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A dense complex square matrix with a Hermitian flag.
///
/// The flag is only ever set after the matrix has been checked, or when it
/// was produced by an operation that preserves Hermiticity (sums, real
/// scaling, Kronecker products of Hermitian factors, unitary conjugation).
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    data: DMatrix<Complex64>,
    hermitian: bool,
}

impl OperatorMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            data: DMatrix::zeros(dim, dim),
            hermitian: true,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            data: DMatrix::identity(dim, dim),
            hermitian: true,
        }
    }

    /// Wraps a square matrix without any Hermiticity claim.
    pub fn new(data: DMatrix<Complex64>) -> Self {
        assert!(data.is_square(), "operator matrices must be square");
        Self {
            data,
            hermitian: false,
        }
    }

    /// Wraps a square matrix, verifying Hermiticity.
    pub fn hermitian(data: DMatrix<Complex64>) -> Result<Self> {
        let mut m = Self::new(data);
        m.check_hermitian()?;
        m.hermitian = true;
        Ok(m)
    }

    pub fn from_real(data: DMatrix<f64>) -> Self {
        Self::new(data.map(|x| c(x, 0.0)))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            data[(i, i)] = c(d, 0.0);
        }
        Self {
            data,
            hermitian: true,
        }
    }

    /// `|v⟩⟨v|`, Hermitian by construction.
    pub fn outer(v: &DVector<Complex64>) -> Self {
        Self {
            data: v * v.adjoint(),
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.data
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[(row, col)]
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Worst `|H[i][j] - conj(H[j][i])|` and its location.
    pub fn hermiticity_violation(&self) -> (usize, usize, f64) {
        let n = self.dim();
        let mut worst = (0, 0, 0.0);
        for i in 0..n {
            for j in i..n {
                let v = (self.data[(i, j)] - self.data[(j, i)].conj()).norm();
                if v > worst.2 {
                    worst = (i, j, v);
                }
            }
        }
        worst
    }

    /// Verifies Hermiticity relative to the largest entry and sets the flag.
    pub fn check_hermitian(&mut self) -> Result<()> {
        let (row, col, violation) = self.hermiticity_violation();
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        if violation > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian {
                row,
                col,
                violation,
            });
        }
        self.hermitian = true;
        Ok(())
    }

    pub fn adjoint(&self) -> Self {
        Self {
            data: self.data.adjoint(),
            hermitian: self.hermitian,
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.data.trace()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            data: &self.data * c(factor, 0.0),
            hermitian: self.hermitian,
        }
    }

    pub fn scale_complex(&self, factor: Complex64) -> Self {
        Self {
            data: &self.data * factor,
            hermitian: self.hermitian && factor.im == 0.0,
        }
    }

    /// `A B - B A`.
    pub fn commutator(&self, other: &Self) -> Self {
        Self::new(&self.data * &other.data - &other.data * &self.data)
    }

    /// `U A U†`; Hermiticity of `A` is preserved.
    pub fn conjugate_by(&self, u: &DMatrix<Complex64>) -> Self {
        Self {
            data: u * &self.data * u.adjoint(),
            hermitian: self.hermitian,
        }
    }

    /// `⟨v| A |v⟩`.
    pub fn expectation(&self, v: &DVector<Complex64>) -> Complex64 {
        (v.adjoint() * &self.data * v)[(0, 0)]
    }

    /// Principal submatrix on the given ordered index list.
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        let n = indices.len();
        let data = DMatrix::from_fn(n, n, |i, j| self.data[(indices[i], indices[j])]);
        Self {
            data,
            hermitian: self.hermitian,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.data - &other.data)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Max elementwise deviation of `A†A` from the identity.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.dim();
        let prod = self.data.adjoint() * &self.data;
        (prod - DMatrix::<Complex64>::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Equality compares entries only; the Hermitian flag is bookkeeping.
impl PartialEq for OperatorMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.data == other.data
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: Self) -> OperatorMatrix {
        OperatorMatrix {
            data: &self.data + &rhs.data,
            hermitian: self.hermitian && rhs.hermitian,
        }
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: Self) -> OperatorMatrix {
        OperatorMatrix {
            data: &self.data - &rhs.data,
            hermitian: self.hermitian && rhs.hermitian,
        }
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: Self) -> OperatorMatrix {
        OperatorMatrix::new(&self.data * &rhs.data)
    }
}

impl Neg for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn neg(self) -> OperatorMatrix {
        self.scale(-1.0)
    }
}

/// Kronecker product with the row-major convention `index(i, j) = i·dim(B) + j`.
pub fn kron(a: &OperatorMatrix, b: &OperatorMatrix) -> OperatorMatrix {
    OperatorMatrix {
        data: a.data.kronecker(&b.data),
        hermitian: a.hermitian && b.hermitian,
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub eigenvalues: DVector<f64>,
    /// Column `k` is the eigenvector for `eigenvalues[k]`.
    pub eigenvectors: DMatrix<Complex64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(λ) V†`.
    pub fn reconstruct(&self) -> OperatorMatrix {
        let diag = DMatrix::from_diagonal(&self.eigenvalues.map(|l| c(l, 0.0)));
        OperatorMatrix {
            data: &self.eigenvectors * diag * self.eigenvectors.adjoint(),
            hermitian: true,
        }
    }

    /// `V diag(exp(-i λ t)) V†` for eigenvalues in angular-frequency units.
    pub fn propagator(&self, t: f64) -> OperatorMatrix {
        let phases = self.eigenvalues.map(|l| Complex64::from_polar(1.0, -l * t));
        let mut scaled = self.eigenvectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[k];
        }
        OperatorMatrix::new(scaled * self.eigenvectors.adjoint())
    }

    pub fn unitarity_residual(&self) -> f64 {
        OperatorMatrix::new(self.eigenvectors.clone()).unitarity_residual()
    }
}

/// Diagonalises a Hermitian matrix. Non-Hermitian input is rejected with the
/// worst-violating entry.
pub fn hermitian_eig(h: &OperatorMatrix) -> Result<EigenSystem> {
    let mut checked = h.clone();
    checked.check_hermitian()?;
    let n = h.dim();
    if n == 0 {
        return Ok(EigenSystem {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
        });
    }
    // Symmetrise exactly so the solver sees a perfectly Hermitian input.
    let sym = (checked.matrix() + checked.matrix().adjoint()) * c(0.5, 0.0);
    let eig = nalgebra::linalg::SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

/// `U(t) = exp(-i H t)` with `H` in rad/ps and `t` in ps.
pub fn propagator(h: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    Ok(hermitian_eig(h)?.propagator(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn sigma_x() -> OperatorMatrix {
        OperatorMatrix::hermitian(DMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        ))
        .unwrap()
    }

    #[test]
    fn kron_identities() {
        let k = kron(&OperatorMatrix::identity(2), &OperatorMatrix::identity(3));
        assert_eq!(k, OperatorMatrix::identity(6));

        let d = OperatorMatrix::from_real_diagonal(&[2.0, -5.0]);
        let k = kron(&d, &OperatorMatrix::identity(2));
        assert_eq!(k, OperatorMatrix::from_real_diagonal(&[2.0, 2.0, -5.0, -5.0]));
    }

    #[test]
    fn kron_index_convention() {
        let a = OperatorMatrix::new(DMatrix::from_fn(2, 2, |i, j| c((i * 2 + j) as f64, 0.0)));
        let b = OperatorMatrix::new(DMatrix::from_fn(3, 3, |i, j| c(1.0 + (i * 3 + j) as f64, 0.0)));
        let k = kron(&a, &b);
        for i1 in 0..2 {
            for j1 in 0..2 {
                for i2 in 0..3 {
                    for j2 in 0..3 {
                        assert_eq!(k.get(i1 * 3 + i2, j1 * 3 + j2), a.get(i1, j1) * b.get(i2, j2));
                    }
                }
            }
        }
    }

    #[test]
    fn kron_sigma_x_involution() {
        let xx = kron(&sigma_x(), &sigma_x());
        assert_eq!(&xx * &xx, OperatorMatrix::identity(4));
    }

    #[test]
    fn eig_of_diagonal_and_pauli_x() {
        let e = hermitian_eig(&OperatorMatrix::from_real_diagonal(&[2.0, -1.0])).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[-1.0, 2.0]);

        let e = hermitian_eig(&sigma_x()).unwrap();
        assert!(close(e.eigenvalues[0], -1.0, 1e-14));
        assert!(close(e.eigenvalues[1], 1.0, 1e-14));
        // (1, -1)/√2 for -1 and (1, 1)/√2 for +1, up to a global phase.
        let v0 = e.eigenvectors.column(0);
        let v1 = e.eigenvectors.column(1);
        assert!(close((v0[0] + v0[1]).norm(), 0.0, 1e-14));
        assert!(close((v1[0] - v1[1]).norm(), 0.0, 1e-14));
        assert!(close(v0[0].norm(), std::f64::consts::FRAC_1_SQRT_2, 1e-14));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = OperatorMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)],
        ));
        match hermitian_eig(&m) {
            Err(Error::NotHermitian { row, col, violation }) => {
                assert_eq!((row, col), (0, 1));
                assert!(close(violation, 0.5, 1e-15));
            }
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn propagator_at_zero_is_identity() {
        let u = propagator(&sigma_x(), 0.0).unwrap();
        assert!(u.max_abs_diff(&OperatorMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn propagator_of_diagonal_is_phases() {
        let h = OperatorMatrix::from_real_diagonal(&[0.3, -1.2, 2.0]);
        let t = 1.7;
        let u = propagator(&h, t).unwrap();
        for (k, l) in [0.3, -1.2, 2.0].iter().enumerate() {
            assert!((u.get(k, k) - Complex64::from_polar(1.0, -l * t)).norm() < 1e-14);
        }
        assert!(u.get(0, 1).norm() < 1e-15);
    }
}
