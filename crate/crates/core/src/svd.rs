//! Leading singular triplets and eigenpairs of sparse square matrices.
//!
//! Small matrices go through a dense decomposition; large ones use block
//! subspace iteration with Rayleigh–Ritz extraction, which only needs
//! sparse matrix–block products.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{domain, ChipError, Result};
use crate::matrix::Csr;
use crate::rng;

/// Dense decomposition is used up to this dimension under [`SvdMethod::Auto`].
pub const DENSE_LIMIT: usize = 2000;
/// Relative residual `‖A v − σ u‖ / σ₁` accepted by the iterative solver.
pub const RESIDUAL_TOL: f64 = 1e-8;
const MAX_ITERATIONS: usize = 3000;
const INIT_SEED: u64 = 0x5EED_0F_5EC7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SvdMethod {
    #[default]
    Auto,
    Dense,
    Iterative,
}

impl SvdMethod {
    fn use_dense(self, n: usize) -> bool {
        match self {
            SvdMethod::Auto => n <= DENSE_LIMIT,
            SvdMethod::Dense => true,
            SvdMethod::Iterative => false,
        }
    }
}

/// Top-k singular triplets, singular values in descending order.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// n×k left singular vectors.
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// n×k right singular vectors.
    pub v: DMatrix<f64>,
}

/// Top-k eigenpairs by eigenvalue magnitude.
#[derive(Debug, Clone)]
pub struct TruncatedEigen {
    pub values: Vec<f64>,
    /// n×k eigenvectors.
    pub vectors: DMatrix<f64>,
}

pub fn truncated_svd(m: &Csr, k: usize, method: SvdMethod) -> Result<TruncatedSvd> {
    let n = m.n();
    if k == 0 || k > n {
        return domain(format!("need 1 <= k <= n, got k = {k}, n = {n}"));
    }
    if method.use_dense(n) {
        dense_svd(m, k)
    } else {
        iterative_svd(m, k)
    }
}

pub fn top_eigen_symmetric(m: &Csr, k: usize, method: SvdMethod) -> Result<TruncatedEigen> {
    let n = m.n();
    if k == 0 || k > n {
        return domain(format!("need 1 <= k <= n, got k = {k}, n = {n}"));
    }
    if method.use_dense(n) {
        dense_eigen(m, k)
    } else {
        iterative_eigen(m, k)
    }
}

fn dense_svd(m: &Csr, k: usize) -> Result<TruncatedSvd> {
    let dense = m.to_dense();
    let svd = dense
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| ChipError::Numerical(format!("dense SVD of a {0}x{0} matrix did not converge", m.n())))?;
    let u = svd.u.expect("requested u");
    let v_t = svd.v_t.expect("requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let top = &order[..k];
    Ok(TruncatedSvd {
        u: DMatrix::from_fn(m.n(), k, |i, c| u[(i, top[c])]),
        singular_values: top.iter().map(|&i| svd.singular_values[i]).collect(),
        v: DMatrix::from_fn(m.n(), k, |i, c| v_t[(top[c], i)]),
    })
}

fn dense_eigen(m: &Csr, k: usize) -> Result<TruncatedEigen> {
    let dense = m.to_dense();
    let eig = SymmetricEigen::try_new(dense, f64::EPSILON, 10_000)
        .ok_or_else(|| ChipError::Numerical(format!("dense eigendecomposition of a {0}x{0} matrix did not converge", m.n())))?;
    let order = magnitude_order(eig.eigenvalues.as_slice());
    let top = &order[..k];
    Ok(TruncatedEigen {
        values: top.iter().map(|&i| eig.eigenvalues[i]).collect(),
        vectors: DMatrix::from_fn(m.n(), k, |i, c| eig.eigenvectors[(i, top[c])]),
    })
}

fn magnitude_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    order
}

fn block_size(n: usize, k: usize) -> usize {
    (k + k.max(10)).min(n)
}

fn random_block(n: usize, p: usize) -> DMatrix<f64> {
    let mut r = rng::seeded(INIT_SEED);
    DMatrix::from_fn(n, p, |_, _| r.random::<f64>() * 2.0 - 1.0)
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

fn iterative_svd(m: &Csr, k: usize) -> Result<TruncatedSvd> {
    let n = m.n();
    let p = block_size(n, k);
    let mut q = orthonormalize(m.mul_dense(&random_block(n, p)));
    let mut last_residual = f64::INFINITY;
    for iteration in 0..MAX_ITERATIONS {
        let z = orthonormalize(m.tr_mul_dense(&q));
        q = orthonormalize(m.mul_dense(&z));
        if iteration % 5 != 4 {
            continue;
        }
        // Rayleigh–Ritz on B = Qᵀ A, a p×n matrix.
        let b = m.tr_mul_dense(&q).transpose();
        let svd = b.svd(true, true);
        let order = {
            let mut o: Vec<usize> = (0..svd.singular_values.len()).collect();
            o.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]).then(x.cmp(&y)));
            o
        };
        let ub = svd.u.as_ref().unwrap();
        let vt = svd.v_t.as_ref().unwrap();
        let top = &order[..k];
        let u = &q * DMatrix::from_fn(p, k, |i, c| ub[(i, top[c])]);
        let v = DMatrix::from_fn(n, k, |i, c| vt[(top[c], i)]);
        let sigma: Vec<f64> = top.iter().map(|&i| svd.singular_values[i]).collect();
        let av = m.mul_dense(&v);
        let scale = sigma[0].max(f64::MIN_POSITIVE);
        let residual = (0..k)
            .map(|c| (av.column(c) - u.column(c) * sigma[c]).norm() / scale)
            .fold(0.0, f64::max);
        last_residual = residual;
        if residual <= RESIDUAL_TOL || sigma[0] == 0.0 {
            return Ok(TruncatedSvd { u, singular_values: sigma, v });
        }
    }
    Err(ChipError::Numerical(format!(
        "subspace SVD did not converge: n = {n}, k = {k}, block = {p}, residual {last_residual:.3e} after {MAX_ITERATIONS} iterations"
    )))
}

fn iterative_eigen(m: &Csr, k: usize) -> Result<TruncatedEigen> {
    let n = m.n();
    let p = block_size(n, k);
    let mut q = orthonormalize(random_block(n, p));
    let mut last_residual = f64::INFINITY;
    for iteration in 0..MAX_ITERATIONS {
        q = orthonormalize(m.mul_dense(&q));
        if iteration % 5 != 4 {
            continue;
        }
        let aq = m.mul_dense(&q);
        let h = q.transpose() * &aq;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let order = magnitude_order(eig.eigenvalues.as_slice());
        let top = &order[..k];
        let vectors = &q * DMatrix::from_fn(p, k, |i, c| eig.eigenvectors[(i, top[c])]);
        let values: Vec<f64> = top.iter().map(|&i| eig.eigenvalues[i]).collect();
        let av = m.mul_dense(&vectors);
        let scale = values[0].abs().max(f64::MIN_POSITIVE);
        let residual = (0..k)
            .map(|c| (av.column(c) - vectors.column(c) * values[c]).norm() / scale)
            .fold(0.0, f64::max);
        last_residual = residual;
        if residual <= RESIDUAL_TOL || values[0] == 0.0 {
            return Ok(TruncatedEigen { values, vectors });
        }
    }
    Err(ChipError::Numerical(format!(
        "subspace eigensolver did not converge: n = {n}, k = {k}, residual {last_residual:.3e} after {MAX_ITERATIONS} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted(n: usize, seed: u64) -> Csr {
        let mut r = rng::seeded(seed);
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .filter_map(|j| {
                        let p = if i % 3 == j % 3 { 0.4 } else { 0.05 };
                        (r.random::<f64>() < p).then(|| (j, (1 + r.random_range(0..4)) as f64))
                    })
                    .collect()
            })
            .collect();
        Csr::from_rows(n, rows)
    }

    #[test]
    fn iterative_matches_dense_singular_values() {
        let m = planted(150, 3);
        let dense = truncated_svd(&m, 4, SvdMethod::Dense).unwrap();
        let iter = truncated_svd(&m, 4, SvdMethod::Iterative).unwrap();
        for (a, b) in dense.singular_values.iter().zip(&iter.singular_values) {
            assert!((a - b).abs() <= 1e-7 * dense.singular_values[0], "{a} vs {b}");
        }
        // same subspaces: |uᵀu'| close to identity up to sign for separated values
        let overlap = dense.u.columns(0, 3).transpose() * iter.u.columns(0, 3);
        for c in 0..3 {
            assert!((overlap[(c, c)].abs() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn iterative_matches_dense_eigenvalues() {
        let m = planted(120, 4);
        let sym = Csr::from_dense(&(m.to_dense() + m.to_dense().transpose())).unwrap();
        let dense = top_eigen_symmetric(&sym, 3, SvdMethod::Dense).unwrap();
        let iter = top_eigen_symmetric(&sym, 3, SvdMethod::Iterative).unwrap();
        for (a, b) in dense.values.iter().zip(&iter.values) {
            assert!((a - b).abs() <= 1e-7 * dense.values[0].abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn singular_values_descend() {
        let m = planted(60, 1);
        let s = truncated_svd(&m, 5, SvdMethod::Auto).unwrap().singular_values;
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_bad_k() {
        let m = planted(5, 1);
        assert!(truncated_svd(&m, 0, SvdMethod::Auto).is_err());
        assert!(truncated_svd(&m, 6, SvdMethod::Auto).is_err());
    }

    #[test]
    fn zero_matrix_is_handled() {
        let m = Csr::from_rows(30, vec![Vec::new(); 30]);
        let s = truncated_svd(&m, 2, SvdMethod::Iterative).unwrap();
        assert_eq!(s.singular_values, vec![0.0, 0.0]);
    }
}
