//! Block assignments and k×k block-pair matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Block label per node. Labels are 0-based internally and 1-based in
/// every external format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl CommunityAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return domain("block count k must be at least 1");
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return domain(format!("node {i} has label {l} outside 0..{k}"));
        }
        Ok(Self { labels, k })
    }

    /// Round-robin assignment giving blocks of size ⌈n/k⌉ or ⌊n/k⌋.
    pub fn balanced(n: usize, k: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i % k).collect(), k)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Index of the most populated block; ties go to the lowest index.
    pub fn largest_block(&self) -> usize {
        let sizes = self.block_sizes();
        let max = sizes.iter().copied().max().unwrap_or(0);
        sizes.iter().position(|&s| s == max).unwrap_or(0)
    }

    /// n×k binary membership matrix with unit row sums.
    pub fn membership_matrix(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.n(), self.k);
        for (i, &l) in self.labels.iter().enumerate() {
            c[(i, l)] = 1.0;
        }
        c
    }

    /// Number of ordered node pairs `(i, j)`, `i ≠ j`, falling in each block
    /// pair: `|a||b|` off the diagonal and `|a|(|a| − 1)` on it.
    pub fn pair_counts(&self) -> BlockMatrix<usize> {
        let sizes = self.block_sizes();
        BlockMatrix::from_fn(self.k, |a, b| {
            if a == b {
                sizes[a] * sizes[a].saturating_sub(1)
            } else {
                sizes[a] * sizes[b]
            }
        })
    }

    /// Labels as 1-based integers for export.
    pub fn one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }
}

/// Dense k×k matrix indexed by block pair, stored row-major and serialised
/// as nested arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix<T> {
    k: usize,
    data: Vec<T>,
}

impl<T: Clone> BlockMatrix<T> {
    pub fn filled(k: usize, value: T) -> Self {
        Self { k, data: vec![value; k * k] }
    }

    pub fn from_fn(k: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(k * k);
        for a in 0..k {
            for b in 0..k {
                data.push(f(a, b));
            }
        }
        Self { k, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return domain("block matrix must be square");
        }
        Ok(Self { k, data: rows.into_iter().flatten().collect() })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, a: usize, b: usize) -> &T {
        &self.data[a * self.k + b]
    }

    pub fn set(&mut self, a: usize, b: usize, value: T) {
        self.data[a * self.k + b] = value;
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.k.max(1)).map(|c| c.to_vec()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }

    pub fn map<U: Clone>(&self, mut f: impl FnMut(&T) -> U) -> BlockMatrix<U> {
        BlockMatrix { k: self.k, data: self.data.iter().map(&mut f).collect() }
    }

    /// Reorders blocks: entry `(a, b)` of the result is entry
    /// `(perm[a], perm[b])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::from_fn(self.k, |a, b| self.get(perm[a], perm[b]).clone())
    }
}

impl<T: Clone + Serialize> Serialize for BlockMatrix<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de, T: Clone + Deserialize<'de>> Deserialize<'de> for BlockMatrix<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<T>>::deserialize(d)?;
        BlockMatrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// Permutation `perm` maximising `Σ_a |{i : truth_i = a, est_i = perm[a]}|`,
/// i.e. the estimated block matched to each true block. Exhaustive for
/// k ≤ 8, greedy beyond.
pub fn align_blocks(truth: &CommunityAssignment, estimate: &CommunityAssignment) -> Result<Vec<usize>> {
    if truth.n() != estimate.n() || truth.k() != estimate.k() {
        return domain("assignments must share n and k to be aligned");
    }
    let k = truth.k();
    let mut overlap = vec![vec![0usize; k]; k];
    for (&t, &e) in truth.labels().iter().zip(estimate.labels()) {
        overlap[t][e] += 1;
    }
    if k <= 8 {
        let mut best = (0usize, (0..k).collect::<Vec<_>>());
        let mut perm: Vec<usize> = (0..k).collect();
        permute_search(&overlap, &mut perm, 0, &mut best);
        Ok(best.1)
    } else {
        let mut perm = vec![usize::MAX; k];
        let mut used = vec![false; k];
        let mut cells: Vec<(usize, usize, usize)> = (0..k)
            .flat_map(|a| (0..k).map(move |b| (a, b)))
            .map(|(a, b)| (overlap[a][b], a, b))
            .collect();
        cells.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        for (_, a, b) in cells {
            if perm[a] == usize::MAX && !used[b] {
                perm[a] = b;
                used[b] = true;
            }
        }
        Ok(perm)
    }
}

fn permute_search(overlap: &[Vec<usize>], perm: &mut Vec<usize>, depth: usize, best: &mut (usize, Vec<usize>)) {
    let k = perm.len();
    if depth == k {
        let score: usize = (0..k).map(|a| overlap[a][perm[a]]).sum();
        if score > best.0 {
            *best = (score, perm.clone());
        }
        return;
    }
    for i in depth..k {
        perm.swap(depth, i);
        permute_search(overlap, perm, depth + 1, best);
        perm.swap(depth, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_counts_exclude_self_pairs() {
        let c = CommunityAssignment::new(vec![0, 0, 0, 1, 1], 2).unwrap();
        let pc = c.pair_counts();
        assert_eq!(pc.rows(), vec![vec![6, 6], vec![6, 2]]);
        assert_eq!(c.largest_block(), 0);
    }

    #[test]
    fn membership_rows_sum_to_one() {
        let c = CommunityAssignment::balanced(7, 3).unwrap();
        let m = c.membership_matrix();
        for i in 0..7 {
            assert_eq!(m.row(i).sum(), 1.0);
        }
        assert_eq!(c.block_sizes(), vec![3, 2, 2]);
    }

    #[test]
    fn rejects_out_of_range_labels() {
        assert!(CommunityAssignment::new(vec![0, 2], 2).is_err());
        assert!(CommunityAssignment::new(vec![], 0).is_err());
    }

    #[test]
    fn alignment_recovers_relabeling() {
        let truth = CommunityAssignment::new(vec![0, 0, 1, 1, 2, 2], 3).unwrap();
        let est = CommunityAssignment::new(vec![2, 2, 0, 0, 1, 1], 3).unwrap();
        assert_eq!(align_blocks(&truth, &est).unwrap(), vec![2, 0, 1]);
    }

    #[test]
    fn block_matrix_serialises_as_nested_rows() {
        let m = BlockMatrix::from_fn(2, |a, b| (a * 2 + b) as f64);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, "[[0.0,1.0],[2.0,3.0]]");
        let back: BlockMatrix<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.permuted(&[1, 0]).rows(), vec![vec![3.0, 2.0], vec![1.0, 0.0]]);
    }
}
