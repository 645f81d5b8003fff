//! Dense Hermitian helpers on top of nalgebra.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Frobenius norm.
pub fn fro(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Equal eigenvalues keep the order nalgebra returned them in, which is
/// deterministic for identical input.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let sym = hermitian_part(m);
    let (vals, vecs): (Vec<f64>, CMatrix) = if is_real(&sym) {
        let re = sym.map(|z| z.re);
        let eig = SymmetricEigen::new(re);
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(c),
        )
    } else {
        let eig = SymmetricEigen::new(sym);
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let mut sorted_vecs = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut col = vecs.column(i).into_owned();
        fix_phase(&mut col);
        sorted_vecs.set_column(k, &col);
    }
    (sorted_vals, sorted_vecs)
}

/// `(M + M*) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

/// Rotates a vector so its largest-magnitude entry (first on ties) is real positive.
pub fn fix_phase(v: &mut CVector) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        let a = z.norm();
        if a > best_abs * (1.0 + 1e-10) {
            best = i;
            best_abs = a;
        }
    }
    if best_abs > 0.0 {
        let phase = v[best] / best_abs;
        let rot = phase.conj();
        for z in v.iter_mut() {
            *z *= rot;
        }
    }
}

/// Largest nonnegative eigenvalue of a Hermitian matrix, 0 if it is negative semidefinite.
pub fn positive_part_norm(m: &CMatrix) -> f64 {
    let (vals, _) = hermitian_eigen(m);
    vals.last().copied().unwrap_or(0.0).max(0.0)
}

/// Orthonormal basis (columns) of the kernel of an orthogonal projection:
/// eigenvectors with eigenvalue below one half, ordered by eigenvalue then index.
pub fn projection_kernel(p: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(p);
    let cols: Vec<CVector> = vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| v < 0.5)
        .map(|(i, _)| vecs.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        CMatrix::zeros(p.nrows(), 0)
    } else {
        CMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis of the null space of `m` (rows x cols), singular values
/// below `threshold`. Returns the basis and all singular values ascending.
pub fn null_space(m: &CMatrix, threshold: f64) -> (CMatrix, Vec<f64>) {
    let n = m.ncols();
    // pad to square so the SVD yields a full right basis
    let rows = m.nrows().max(n);
    let mut sq = CMatrix::zeros(rows, n);
    sq.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| {
        svd.singular_values[a]
            .total_cmp(&svd.singular_values[b])
            .then(a.cmp(&b))
    });
    let sv: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let cols: Vec<CVector> = idx
        .iter()
        .filter(|&&i| svd.singular_values[i] < threshold)
        .map(|&i| vt.row(i).adjoint().into_owned())
        .collect();
    let basis = if cols.is_empty() {
        CMatrix::zeros(n, 0)
    } else {
        CMatrix::from_columns(&cols)
    };
    (basis, sv)
}

/// Singular values ascending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(f64::total_cmp);
    sv
}

/// Lowest `k` eigenpairs of the pencil `(a, b)` with `b` Hermitian positive definite.
/// Eigenvectors are `b`-orthonormal.
pub fn generalized_eigen(a: &CMatrix, b: &CMatrix, k: usize) -> Result<(Vec<f64>, CMatrix)> {
    let n = a.nrows();
    if k > n {
        return Err(Error::InvalidInput(format!(
            "requested {k} eigenpairs of a {n}-dimensional problem"
        )));
    }
    let a = hermitian_part(a);
    let b = hermitian_part(b);
    if is_real(&a) && is_real(&b) {
        let (vals, vecs) = generalized_eigen_field(&a.map(|z| z.re), &b.map(|z| z.re), k)?;
        Ok((vals, vecs.map(c)))
    } else {
        generalized_eigen_field(&a, &b, k)
    }
}

fn generalized_eigen_field<T>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    k: usize,
) -> Result<(Vec<f64>, DMatrix<T>)>
where
    T: ComplexField<RealField = f64>,
{
    let n = a.nrows();
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::LinearAlgebra("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // C = L^{-1} A L^{-*}
    let mut tmp = a.clone();
    if !l.solve_lower_triangular_mut(&mut tmp) {
        return Err(Error::LinearAlgebra("singular Cholesky factor".into()));
    }
    let mut cm = tmp.adjoint();
    if !l.solve_lower_triangular_mut(&mut cm) {
        return Err(Error::LinearAlgebra("singular Cholesky factor".into()));
    }
    let cm = (&cm + cm.adjoint()) * T::from_real(0.5);
    let eig = SymmetricEigen::new(cm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        eig.eigenvalues[x]
            .total_cmp(&eig.eigenvalues[y])
            .then(x.cmp(&y))
    });
    let vals: Vec<f64> = order.iter().take(k).map(|&i| eig.eigenvalues[i]).collect();
    let mut y = DMatrix::<T>::zeros(n, k);
    for (col, &i) in order.iter().take(k).enumerate() {
        y.set_column(col, &eig.eigenvectors.column(i));
    }
    // x = L^{-*} y
    let lt = l.adjoint();
    if !lt.solve_upper_triangular_mut(&mut y) {
        return Err(Error::LinearAlgebra("singular Cholesky factor".into()));
    }
    Ok((vals, y))
}

/// `x* m x` (real part; `m` Hermitian).
pub fn quad(m: &CMatrix, x: &CVector) -> f64 {
    x.dotc(&(m * x)).re
}
