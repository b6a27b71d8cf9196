//! Sparse count and adjacency matrices built from event data.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::network::{EventLog, EventNetwork};

/// Whether pair direction is kept (`N`) or folded (`N + Nᵀ`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Directed,
    Undirected,
}

/// Which matrix spectral clustering runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    /// Count matrix `N`.
    #[default]
    Weighted,
    /// Indicator matrix `A = 1{N > 0}`.
    Binary,
}

/// Square compressed-sparse-row matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Builds from rows of `(column, value)` already sorted by column.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        row_ptr.resize(n + 1, col_idx.len());
        Self { n, row_ptr, col_idx, values }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return domain("matrix must be square");
        }
        let n = m.nrows();
        let rows = (0..n)
            .map(|i| (0..n).filter(|&j| m[(i, j)] != 0.0).map(|j| (j, m[(i, j)])).collect())
            .collect();
        Ok(Self::from_rows(n, rows))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                rows[j].push((i, v));
            }
        }
        Self::from_rows(self.n, rows)
    }

    pub fn is_symmetric(&self) -> bool {
        self.transpose() == *self
    }

    /// `self · x` for a dense block of column vectors.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            let col = x.column(c);
            for i in 0..self.n {
                let mut acc = 0.0;
                for (j, v) in self.row(i) {
                    acc += v * col[j];
                }
                out[(i, c)] = acc;
            }
        }
        out
    }

    /// `selfᵀ · x` without materialising the transpose.
    pub fn tr_mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            for i in 0..self.n {
                let xi = x[(i, c)];
                if xi == 0.0 {
                    continue;
                }
                for (j, v) in self.row(i) {
                    out[(j, c)] += v * xi;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n, (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()))
    }
}

/// Per-pair event counts `N_ij`, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    n: usize,
    mode: Mode,
    rows: Vec<Vec<(usize, u32)>>,
}

impl CountMatrix {
    pub(crate) fn from_sorted_rows(n: usize, mode: Mode, rows: Vec<Vec<(usize, u32)>>) -> Self {
        Self { n, mode, rows }
    }

    pub fn from_network(net: &EventNetwork, mode: Mode) -> Self {
        let n = net.n();
        let mut rows: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n];
        for p in net.pairs() {
            rows[p.sender].push((p.receiver, p.times.len() as u32));
        }
        let directed = Self { n, mode: Mode::Directed, rows };
        match mode {
            Mode::Directed => directed,
            Mode::Undirected => directed.symmetrised(),
        }
    }

    pub fn from_log(log: &EventLog, mode: Mode) -> Self {
        let n = log.n();
        let mut rows: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n];
        let mut pairs: Vec<(usize, usize)> = log.events().iter().map(|e| (e.sender, e.receiver)).collect();
        pairs.sort_unstable();
        for (i, j) in pairs {
            match rows[i].last_mut() {
                Some((c, v)) if *c == j => *v += 1,
                _ => rows[i].push((j, 1)),
            }
        }
        let directed = Self { n, mode: Mode::Directed, rows };
        match mode {
            Mode::Directed => directed,
            Mode::Undirected => directed.symmetrised(),
        }
    }

    /// `N + Nᵀ`, tagged undirected.
    pub fn symmetrised(&self) -> Self {
        let mut rows: Vec<Vec<(usize, u32)>> = self.rows.clone();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                rows[j].push((i, v));
            }
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, u32)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match merged.last_mut() {
                    Some((lc, lv)) if *lc == c => *lv += v,
                    _ => merged.push((c, v)),
                }
            }
            *row = merged;
        }
        Self { n: self.n, mode: Mode::Undirected, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        match self.rows[i].binary_search_by_key(&j, |&(c, _)| c) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => 0,
        }
    }

    /// Nonzero entries of row `i` as `(column, count)`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, u32)] {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().flatten().map(|&(_, v)| v as u64).sum()
    }

    /// Fraction of off-diagonal entries that are nonzero.
    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.nnz() as f64 / (self.n * (self.n - 1)) as f64
    }

    pub fn binary(&self) -> BinaryAdjacency {
        BinaryAdjacency { csr: self.csr_with(|_| 1.0) }
    }

    pub fn csr(&self) -> Csr {
        self.csr_with(|v| v as f64)
    }

    fn csr_with(&self, f: impl Fn(u32) -> f64) -> Csr {
        let rows = self.rows.iter().map(|r| r.iter().map(|&(c, v)| (c, f(v))).collect()).collect();
        Csr::from_rows(self.n, rows)
    }

    /// The matrix spectral clustering should see for `kind`.
    pub fn for_kind(&self, kind: MatrixKind) -> Csr {
        match kind {
            MatrixKind::Weighted => self.csr(),
            MatrixKind::Binary => self.binary().csr,
        }
    }

    /// Restricts to `nodes`, reindexed in the given order.
    pub fn submatrix(&self, nodes: &[usize]) -> Self {
        let mut index = vec![usize::MAX; self.n];
        for (new, &old) in nodes.iter().enumerate() {
            index[old] = new;
        }
        let rows = nodes
            .iter()
            .map(|&old| {
                let mut r: Vec<(usize, u32)> = self.rows[old]
                    .iter()
                    .filter(|&&(c, _)| index[c] != usize::MAX)
                    .map(|&(c, v)| (index[c], v))
                    .collect();
                r.sort_unstable_by_key(|&(c, _)| c);
                r
            })
            .collect();
        Self { n: nodes.len(), mode: self.mode, rows }
    }
}

/// `A_ij = 1{N_ij > 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryAdjacency {
    csr: Csr,
}

impl BinaryAdjacency {
    pub fn csr(&self) -> &Csr {
        &self.csr
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        (self.csr.get(i, j) != 0.0) as u8
    }
}

/// Count matrix and its indicator companion for a log.
pub fn build_matrices(log: &EventLog, mode: Mode) -> (CountMatrix, BinaryAdjacency) {
    let counts = CountMatrix::from_log(log, mode);
    let binary = counts.binary();
    (counts, binary)
}
