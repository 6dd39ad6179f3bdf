//! Small dense complex linear algebra used throughout the crate.
//!
//! Everything here works on `nalgebra::DMatrix<Complex64>`. Dimensions are
//! tiny (d ≤ 8 in practice), so clarity wins over blocking or SIMD.

use nalgebra::{Complex, DMatrix, DVector};

pub type Complex64 = Complex<f64>;

/// Dense complex matrix holding states, effects and Kraus operators.
pub type ComplexMatrix = DMatrix<Complex64>;
/// Dense complex column vector.
pub type ComplexVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

pub fn zeros(d: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(d, d)
}

/// Computational basis vector |k⟩ of dimension `d`.
pub fn ket(d: usize, k: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(d);
    v[k] = ONE;
    v
}

/// Rank-one operator |v⟩⟨v|.
pub fn projector(v: &ComplexVector) -> ComplexMatrix {
    v * v.adjoint()
}

/// |k⟩⟨k| in dimension `d`.
pub fn basis_projector(d: usize, k: usize) -> ComplexMatrix {
    let mut m = zeros(d);
    m[(k, k)] = ONE;
    m
}

pub fn diag_real(entries: &[f64]) -> ComplexMatrix {
    let d = entries.len();
    let mut m = zeros(d);
    for (k, &x) in entries.iter().enumerate() {
        m[(k, k)] = c(x, 0.0);
    }
    m
}

pub fn real_trace(a: &ComplexMatrix) -> f64 {
    a.trace().re
}

/// Re Tr(A B) without forming the product.
pub fn real_trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            let x = a[(i, k)];
            let y = b[(k, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

/// (A + A†)/2.
pub fn hermitian_part(a: &ComplexMatrix) -> ComplexMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Largest entrywise modulus of A − A†.
pub fn hermiticity_residual(a: &ComplexMatrix) -> f64 {
    (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues (ascending) and matching eigenvectors of the Hermitian part
/// of `a`.
pub fn hermitian_eigen(a: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = hermitian_part(a).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn min_eigenvalue(a: &ComplexMatrix) -> f64 {
    hermitian_eigen(a).0[0]
}

/// Largest eigenvalue of the Hermitian part of `a` with a unit eigenvector.
pub fn max_eigenpair(a: &ComplexMatrix) -> (f64, ComplexVector) {
    let (values, vectors) = hermitian_eigen(a);
    let last = values.len() - 1;
    (values[last], vectors.column(last).into_owned())
}

/// How far `a` is from being positive semidefinite: max(0, −λ_min).
pub fn psd_residual(a: &ComplexMatrix) -> f64 {
    (-min_eigenvalue(a)).max(0.0)
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &ComplexMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = a.adjoint() * a;
    max_eigenpair(&gram).0.max(0.0).sqrt()
}

/// Principal square root of a PSD matrix; negative eigenvalues from
/// round-off are clipped to zero.
pub fn psd_sqrt(a: &ComplexMatrix) -> ComplexMatrix {
    let (values, vectors) = hermitian_eigen(a);
    let roots: Vec<f64> = values.iter().map(|&x| x.max(0.0).sqrt()).collect();
    &vectors * diag_real(&roots) * vectors.adjoint()
}

/// Inverse square root of a positive definite matrix.
pub fn inverse_sqrt(a: &ComplexMatrix) -> ComplexMatrix {
    let (values, vectors) = hermitian_eigen(a);
    let inv: Vec<f64> = values.iter().map(|&x| 1.0 / x.sqrt()).collect();
    &vectors * diag_real(&inv) * vectors.adjoint()
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Max entrywise modulus of the difference.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(a: &ComplexMatrix, tol: f64) -> bool {
    hermiticity_residual(a) <= tol
}

pub fn is_psd(a: &ComplexMatrix, tol: f64) -> bool {
    min_eigenvalue(a) >= -tol
}

pub fn has_unit_trace(a: &ComplexMatrix, tol: f64) -> bool {
    (a.trace() - ONE).norm() <= tol
}
