//! Dense helpers shared by the assembly and time-stepping code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Largest dense problem the generalized eigensolver accepts.
pub(crate) const MAX_DENSE_DIM: usize = 5000;

/// Relative size below which a coefficient does not count when locating the
/// first significant entry of an eigenvector.
const SIGNIFICANT: f64 = 1e-8;

pub(crate) fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| Error::Numerical(format!("{what}: matrix is not positive definite")))
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn first_significant(v: &DVector<f64>) -> usize {
    let scale = v.amax();
    v.iter().position(|x| x.abs() > SIGNIFICANT * scale).unwrap_or(0)
}

/// Solves `A x = λ M x` for symmetric `A` and symmetric positive definite `M`.
///
/// Returns eigenvalues in ascending order and `M`-orthonormal eigenvectors as
/// columns. Near-equal eigenvalues (relative gap below 1e-10) are ordered by
/// the index of the first significant eigenvector entry, and every column is
/// signed so that this entry is positive.
pub(crate) fn generalized_eigen(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n > MAX_DENSE_DIM {
        return Err(Error::Resource(format!(
            "dense eigensolve of dimension {n} exceeds the limit of {MAX_DENSE_DIM}"
        )));
    }
    let chol = cholesky(m, "mass matrix")?;
    let l = chol.l();
    // C = L⁻¹ A L⁻ᵀ
    let la = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let mut c = l
        .solve_lower_triangular(&la.transpose())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    symmetrize(&mut c);
    if c.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite entries in reduced eigenproblem".into()));
    }
    let eig = SymmetricEigen::new(c);
    let vecs = l
        .transpose()
        .solve_upper_triangular(&eig.eigenvectors)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;

    let mut cols: Vec<(f64, usize, DVector<f64>)> = (0..n)
        .map(|j| {
            let mut v: DVector<f64> = vecs.column(j).into_owned();
            let lead = first_significant(&v);
            if v[lead] < 0.0 {
                v.neg_mut();
            }
            (eig.eigenvalues[j], lead, v)
        })
        .collect();
    cols.sort_by(|x, y| x.0.total_cmp(&y.0));
    // Within clusters of (numerically) equal eigenvalues, order by lead index.
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n {
            let scale = cols[start].0.abs().max(cols[end].0.abs()).max(1e-300);
            if (cols[end].0 - cols[start].0).abs() > 1e-10 * scale {
                break;
            }
            end += 1;
        }
        cols[start..end].sort_by_key(|x| x.1);
        start = end;
    }

    let values = DVector::from_iterator(n, cols.iter().map(|c| c.0));
    let mut vectors = DMatrix::zeros(n, n);
    for (j, c) in cols.iter().enumerate() {
        vectors.set_column(j, &c.2);
    }
    Ok((values, vectors))
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// definite sparse matrix.
pub(crate) fn pcg(a: &CsrMatrix, b: &DVector<f64>, rel_tol: f64, max_iter: usize) -> Result<DVector<f64>> {
    let n = b.len();
    let diag = a.diagonal();
    if diag.iter().any(|d| *d <= 0.0) {
        return Err(Error::Numerical("non-positive diagonal in PCG system".into()));
    }
    let inv_diag = diag.map(|d| 1.0 / d);
    let b_norm = b.norm();
    let mut x = DVector::zeros(n);
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.clone();
    let mut z = r.component_mul(&inv_diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for _ in 0..max_iter {
        let ap = a.mul_vec(&p);
        let pap = p.dot(&ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::Numerical("PCG breakdown: operator not positive definite".into()));
        }
        let step = rz / pap;
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &ap, 1.0);
        if r.norm() <= rel_tol * b_norm {
            return Ok(x);
        }
        z = r.component_mul(&inv_diag);
        let rz_new = r.dot(&z);
        p = &z + (rz_new / rz) * &p;
        rz = rz_new;
    }
    Err(Error::Numerical(format!(
        "PCG did not reach relative residual {rel_tol:e} in {max_iter} iterations"
    )))
}

/// Least-squares slope of `y` against `x`.
pub(crate) fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub(crate) fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generalized_eigen_diagonal_pencil() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![6.0, 2.0, 3.0]));
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 1.0]));
        let (vals, vecs) = generalized_eigen(&a, &m).unwrap();
        assert!((vals[0] - 2.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
        assert!((vals[2] - 3.0).abs() < 1e-14);
        // tie between λ=3 modes resolved by lead index: e0/√2 before e2
        assert!(vecs[(0, 1)] > 0.7);
        assert!(vecs[(2, 2)] > 0.99);
        let gram = vecs.transpose() * &m * &vecs;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-14);
    }

    #[test]
    fn pcg_solves_tridiagonal() {
        let n = 20;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let x_true = DVector::from_fn(n, |i, _| (i as f64).sin());
        let b = a.mul_vec(&x_true);
        let x = pcg(&a, &b, 1e-14, 200).unwrap();
        assert!((x - x_true).amax() < 1e-11);
    }

    #[test]
    fn slope_of_line() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, 3.0, 5.0];
        assert!((ls_slope(&x, &y) - 2.0).abs() < 1e-15);
    }
}
