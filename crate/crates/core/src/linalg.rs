//! Dense Hermitian helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result, Scalar};

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITERS: usize = 10_000;

/// Largest `|X_ij - conj(X_ji)|`.
pub fn asymmetry<T: Scalar>(x: &DMatrix<T>) -> f64 {
    let n = x.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((x[(i, j)] - x[(j, i)].conjugate()).modulus());
        }
    }
    worst
}

/// Rejects non-square or non-Hermitian input. The tolerance is relative to
/// the largest entry.
pub fn check_hermitian<T: Scalar>(x: &DMatrix<T>) -> Result<()> {
    if x.nrows() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: x.ncols(),
        });
    }
    let scale = x.iter().fold(0.0f64, |a, z| a.max(z.modulus()));
    let asym = asymmetry(x);
    if asym > 1e-10 * scale.max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

pub fn hermitian_part<T: Scalar>(x: &DMatrix<T>) -> DMatrix<T> {
    (x + x.adjoint()).unscale(2.0)
}

/// Real part of the Frobenius inner product `tr(A^* B)`.
pub fn frob_inner<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conjugate() * *y).real()).sum()
}

pub fn trace_re<T: Scalar>(x: &DMatrix<T>) -> f64 {
    (0..x.nrows()).map(|i| x[(i, i)].real()).sum()
}

/// Hermitian eigendecomposition (eigenvalues unsorted).
///
/// nalgebra's QR iteration can produce NaN on matrices with exactly-zero
/// rows and columns (which projections onto sparse sets create), so those
/// coordinates are split off as zero eigenpairs and the remaining block is
/// decomposed on its own, retrying once with a diagonal shift.
pub fn eigh<T: Scalar>(x: &DMatrix<T>) -> Result<SymmetricEigen<T, nalgebra::Dyn>> {
    let n = x.nrows();
    let active: Vec<usize> = (0..n)
        .filter(|&i| x.row(i).iter().any(|z| *z != T::zero()))
        .collect();
    if active.len() == n {
        return eigh_dense(x);
    }
    let mut eigenvalues = DVector::zeros(n);
    let mut eigenvectors = DMatrix::zeros(n, n);
    if !active.is_empty() {
        let block = eigh_dense(&x.select_rows(&active).select_columns(&active))?;
        for k in 0..active.len() {
            eigenvalues[k] = block.eigenvalues[k];
            for (r, &i) in active.iter().enumerate() {
                eigenvectors[(i, k)] = block.eigenvectors[(r, k)];
            }
        }
    }
    for (k, i) in (0..n).filter(|i| !active.contains(i)).enumerate() {
        eigenvectors[(i, active.len() + k)] = T::one();
    }
    Ok(SymmetricEigen {
        eigenvectors,
        eigenvalues,
    })
}

fn eigh_dense<T: Scalar>(x: &DMatrix<T>) -> Result<SymmetricEigen<T, nalgebra::Dyn>> {
    let finite = |e: &SymmetricEigen<T, nalgebra::Dyn>| {
        e.eigenvalues.iter().all(|v| v.is_finite()) && e.eigenvectors.iter().all(|z| z.modulus().is_finite())
    };
    if let Some(e) = SymmetricEigen::try_new(x.clone(), EIGEN_EPS, EIGEN_MAX_ITERS).filter(finite) {
        return Ok(e);
    }
    let shift = x.norm().max(1.0);
    let n = x.nrows();
    let shifted = x + DMatrix::<T>::identity(n, n).scale(shift);
    let mut e = SymmetricEigen::try_new(shifted, EIGEN_EPS, EIGEN_MAX_ITERS)
        .filter(finite)
        .ok_or(Error::EigenFailure)?;
    e.eigenvalues.add_scalar_mut(-shift);
    Ok(e)
}

/// Best rank-`r` Hermitian approximation: keeps the `r` eigenpairs of
/// largest magnitude (ties to the lower index).
pub fn truncate_rank<T: Scalar>(x: &DMatrix<T>, r: usize) -> Result<DMatrix<T>> {
    let n = x.nrows();
    if r >= n {
        return Ok(hermitian_part(x));
    }
    let eig = eigh(&hermitian_part(x))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
    let mut out = DMatrix::zeros(n, n);
    for &k in order.iter().take(r) {
        let v = eig.eigenvectors.column(k);
        out += (&v * v.adjoint()).scale(eig.eigenvalues[k]);
    }
    Ok(out)
}

/// Unit eigenvector for the largest (algebraic) eigenvalue.
pub fn top_eigenvector<T: Scalar>(x: &DMatrix<T>) -> Result<(f64, DVector<T>)> {
    let eig = eigh(x)?;
    let k = eig.eigenvalues.imax();
    Ok((eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned()))
}

pub fn outer<T: Scalar>(u: &DVector<T>, v: &DVector<T>) -> DMatrix<T> {
    u * v.adjoint()
}

#[cfg(test)]
mod tests {
    #[test]
    fn eigh_block_sparse_is_finite() {
        use crate::rng::stream;
        use rand::Rng;
        for seed in 0..100 {
            let mut rng = stream(seed, 0);
            let n = 64;
            let idx = [3usize, 17, 40, 63];
            let mut x = DMatrix::<f64>::zeros(n, n);
            for &i in &idx {
                for &j in &idx {
                    if i <= j {
                        let v: f64 = rng.random_range(-1.0..1.0);
                        x[(i, j)] = v;
                        x[(j, i)] = v;
                    }
                }
            }
            let e = eigh(&x).unwrap();
            let back = &e.eigenvectors * DMatrix::from_diagonal(&e.eigenvalues) * e.eigenvectors.transpose();
            assert!((back - &x).norm() < 1e-10);
        }
    }

    use super::*;
    use num_complex::Complex64;

    #[test]
    fn truncation_keeps_dominant_magnitudes() {
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -5.0, 3.0]));
        let t = truncate_rank(&x, 2).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -5.0, 3.0]));
        assert!((t - want).norm() < 1e-12);
    }

    #[test]
    fn hermitian_check() {
        let mut x = DMatrix::<Complex64>::identity(2, 2);
        x[(0, 1)] = Complex64::new(1.0, 2.0);
        x[(1, 0)] = Complex64::new(1.0, -2.0);
        assert!(check_hermitian(&x).is_ok());
        x[(1, 0)] = Complex64::new(1.0, 2.0);
        assert!(matches!(check_hermitian(&x), Err(Error::NotSymmetric(_))));
        let rect = DMatrix::<f64>::zeros(2, 3);
        assert!(check_hermitian(&rect).is_err());
    }
}
