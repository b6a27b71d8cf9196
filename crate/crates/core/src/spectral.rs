//! Spectral community detection.
//!
//! Directed matrices are embedded with their leading left and right singular
//! vectors side by side, rows scaled to unit length; symmetric matrices use
//! their leading eigenvectors directly. k-means on the embedding gives the
//! blocks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::community::CommunityAssignment;
use crate::error::{domain, Result};
use crate::kmeans::{kmeans, KMeansConfig};
use crate::matrix::{CountMatrix, Csr, MatrixKind, Mode};
use crate::svd::{top_eigen_symmetric, truncated_svd, SvdMethod};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpectralConfig {
    pub kmeans: KMeansConfig,
    pub svd: SvdMethod,
}

/// Clusters a directed matrix from its top-k singular vectors.
pub fn spectral_cluster_directed(m: &Csr, k: usize, seed: u64, config: &SpectralConfig) -> Result<CommunityAssignment> {
    let n = m.n();
    if k == 0 || k > n {
        return domain(format!("need 1 <= k <= n, got k = {k}, n = {n}"));
    }
    if k == 1 {
        return CommunityAssignment::new(vec![0; n], 1);
    }
    let svd = truncated_svd(m, k, config.svd)?;
    let mut z = DMatrix::zeros(n, 2 * k);
    z.columns_mut(0, k).copy_from(&svd.u);
    z.columns_mut(k, k).copy_from(&svd.v);
    normalize_rows(&mut z);
    let res = kmeans(&z, k, seed, &config.kmeans)?;
    CommunityAssignment::new(res.labels, k)
}

/// Clusters a symmetric matrix from eigenvectors of its k largest-magnitude
/// eigenvalues.
pub fn spectral_cluster_undirected(m: &Csr, k: usize, seed: u64, config: &SpectralConfig) -> Result<CommunityAssignment> {
    let n = m.n();
    if k == 0 || k > n {
        return domain(format!("need 1 <= k <= n, got k = {k}, n = {n}"));
    }
    if !m.is_symmetric() {
        return domain("undirected spectral clustering needs a symmetric matrix");
    }
    if k == 1 {
        return CommunityAssignment::new(vec![0; n], 1);
    }
    let eig = top_eigen_symmetric(m, k, config.svd)?;
    let res = kmeans(&eig.vectors, k, seed, &config.kmeans)?;
    CommunityAssignment::new(res.labels, k)
}

/// Scales each nonzero row to unit Euclidean norm; zero rows stay zero.
fn normalize_rows(z: &mut DMatrix<f64>) {
    for mut row in z.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
}

/// Runs the variant matching `mode` on `N` or `A`.
pub fn cluster_counts(
    counts: &CountMatrix,
    kind: MatrixKind,
    k: usize,
    seed: u64,
    config: &SpectralConfig,
) -> Result<CommunityAssignment> {
    let m = counts.for_kind(kind);
    match counts.mode() {
        Mode::Directed => spectral_cluster_directed(&m, k, seed, config),
        Mode::Undirected => spectral_cluster_undirected(&m, k, seed, config),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigengapSelection {
    pub k: usize,
    /// Top singular values, descending.
    pub singular_values: Vec<f64>,
}

/// Picks `k` at the largest drop `σ_k − σ_{k+1}` among the top `k_max`
/// singular values.
pub fn eigengap_select_k(m: &Csr, k_max: usize, method: SvdMethod) -> Result<EigengapSelection> {
    let n = m.n();
    if k_max == 0 || k_max > n {
        return domain(format!("need 1 <= k_max <= n, got k_max = {k_max}, n = {n}"));
    }
    let singular_values = truncated_svd(m, k_max, method)?.singular_values;
    Ok(EigengapSelection { k: select_from_values(&singular_values), singular_values })
}

/// Largest-gap rule on a descending list; the earliest gap wins ties.
pub fn select_from_values(values: &[f64]) -> usize {
    let mut best = (1usize, f64::NEG_INFINITY);
    for (i, w) in values.windows(2).enumerate() {
        let gap = w[0] - w[1];
        if gap > best.1 {
            best = (i + 1, gap);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ari::adjusted_rand;
    use crate::rng;
    use rand::Rng;

    fn cliques(sizes: &[usize]) -> (Csr, Vec<usize>) {
        let n: usize = sizes.iter().sum();
        let mut truth = Vec::new();
        for (b, &s) in sizes.iter().enumerate() {
            truth.extend(std::iter::repeat_n(b, s));
        }
        let rows = (0..n)
            .map(|i| (0..n).filter(|&j| j != i && truth[i] == truth[j]).map(|j| (j, 1.0)).collect())
            .collect();
        (Csr::from_rows(n, rows), truth)
    }

    #[test]
    fn disconnected_cliques_directed() {
        let (m, truth) = cliques(&[6, 9]);
        let c = spectral_cluster_directed(&m, 2, 1, &SpectralConfig::default()).unwrap();
        assert_eq!(adjusted_rand(&truth, c.labels()).unwrap(), 1.0);
    }

    #[test]
    fn disconnected_cliques_undirected() {
        let (m, truth) = cliques(&[7, 5]);
        let c = spectral_cluster_undirected(&m, 2, 1, &SpectralConfig::default()).unwrap();
        assert_eq!(adjusted_rand(&truth, c.labels()).unwrap(), 1.0);
    }

    #[test]
    fn single_block() {
        let (m, _) = cliques(&[4, 4]);
        let c = spectral_cluster_directed(&m, 1, 1, &SpectralConfig::default()).unwrap();
        assert!(c.labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn k_equal_n_gives_singletons() {
        let mut r = rng::seeded(2);
        let d = DMatrix::from_fn(6, 6, |i, j| if i == j { 0.0 } else { r.random::<f64>() });
        let sym = Csr::from_dense(&(&d + d.transpose())).unwrap();
        let c = spectral_cluster_undirected(&sym, 6, 3, &SpectralConfig::default()).unwrap();
        let mut l = c.labels().to_vec();
        l.sort();
        assert_eq!(l, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn errors() {
        let (m, _) = cliques(&[2, 2]);
        assert!(spectral_cluster_directed(&m, 5, 0, &SpectralConfig::default()).is_err());
        let asym = Csr::from_rows(2, vec![vec![(1, 1.0)], vec![]]);
        assert!(spectral_cluster_undirected(&asym, 1, 0, &SpectralConfig::default()).is_err());
    }

    #[test]
    fn zero_rows_are_left_alone() {
        let mut z = DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.0, 0.0]);
        normalize_rows(&mut z);
        assert_eq!(z, DMatrix::from_row_slice(2, 2, &[0.6, 0.8, 0.0, 0.0]));
    }

    #[test]
    fn eigengap_rule() {
        assert_eq!(select_from_values(&[10.0, 9.0, 2.0, 1.9, 1.0]), 2);
        let (cl, _) = cliques(&[15, 15]);
        let mut r = rng::seeded(8);
        let noise = DMatrix::from_fn(30, 30, |_, _| 1e-6 * r.random::<f64>());
        let m = Csr::from_dense(&(cl.to_dense() + noise)).unwrap();
        let sel = eigengap_select_k(&m, 6, SvdMethod::Auto).unwrap();
        assert_eq!(sel.k, 2);
        assert_eq!(sel.singular_values.len(), 6);
    }
}
