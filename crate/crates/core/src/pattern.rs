//! Global sparsity pattern of an assembled finite element matrix.

use thiserror::Error;

use crate::mesh::DofMap;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("row pointer array must have n_rows + 1 entries starting at 0")]
    BadRowPointers,
    #[error("row pointers end at {end} but {cols} column indices were given")]
    LengthMismatch { end: usize, cols: usize },
    #[error("columns of row {row} are not strictly ascending")]
    UnsortedRow { row: usize },
}

/// Row pointers and sorted column indices shared by every storage format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
}

impl SparsityPattern {
    /// Checks the CSR invariants on raw arrays.
    pub fn from_parts(row_ptr: Vec<usize>, cols: Vec<usize>) -> Result<Self, PatternError> {
        if row_ptr.first() != Some(&0) || row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(PatternError::BadRowPointers);
        }
        let end = *row_ptr.last().unwrap();
        if end != cols.len() {
            return Err(PatternError::LengthMismatch {
                end,
                cols: cols.len(),
            });
        }
        for (row, w) in row_ptr.windows(2).enumerate() {
            if cols[w[0]..w[1]].windows(2).any(|c| c[0] >= c[1]) {
                return Err(PatternError::UnsortedRow { row });
            }
        }
        Ok(Self { row_ptr, cols })
    }

    /// Builds the pattern from per-row column lists, sorting and deduplicating each row.
    pub fn from_rows<I, R>(rows: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = usize>,
    {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        for row in rows {
            let start = cols.len();
            cols.extend(row);
            cols[start..].sort_unstable();
            let mut w = start;
            for r in start..cols.len() {
                if w == start || cols[r] != cols[w - 1] {
                    cols[w] = cols[r];
                    w += 1;
                }
            }
            cols.truncate(w);
            row_ptr.push(cols.len());
        }
        Self { row_ptr, cols }
    }

    /// The pattern coupling every pair of DOFs that share an element.
    ///
    /// Adjacency is accumulated per node and then widened to `d` contiguous
    /// DOFs per node, which gives the same rows as accumulating DOF pairs
    /// directly because each node's DOFs are consecutive.
    pub fn build(map: &DofMap) -> Self {
        match Self::try_build(map) {
            Ok(pattern) => pattern,
            Err(nnz) => panic!("cannot allocate a pattern with {nnz} entries"),
        }
    }

    /// Like [`build`](Self::build), but returns the entry count instead of
    /// aborting when the column array cannot be allocated.
    pub fn try_build(map: &DofMap) -> Result<Self, usize> {
        let n_nodes = map.node_count();
        let d = map.dofs_per_node();
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
        for e in 0..map.n_elements() {
            let nodes = map.element_nodes(e);
            debug_assert!(
                {
                    let mut s = nodes.to_vec();
                    s.sort_unstable();
                    s.windows(2).all(|w| w[0] != w[1])
                },
                "element {e} repeats a node"
            );
            for &v in nodes {
                adjacency[v].extend_from_slice(nodes);
            }
        }
        for row in adjacency.iter_mut() {
            row.sort_unstable();
            row.dedup();
        }

        let nnz: usize = adjacency.iter().map(|r| r.len()).sum::<usize>() * d * d;
        let mut row_ptr = Vec::with_capacity(n_nodes * d + 1);
        let mut cols = Vec::new();
        cols.try_reserve_exact(nnz).map_err(|_| nnz)?;
        row_ptr.push(0);
        for neighbours in &adjacency {
            for _ in 0..d {
                cols.extend(neighbours.iter().flat_map(|&w| w * d..w * d + d));
                row_ptr.push(cols.len());
            }
        }
        Ok(Self { row_ptr, cols })
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.row(r).binary_search(&c).is_ok()
    }

    /// Megabytes occupied by an `f64` values array of this pattern.
    pub fn values_size_mb(&self) -> f64 {
        values_size_mb(self.nnz())
    }
}

/// `s = 8·n / 10⁶` megabytes for `n` double-precision entries.
pub fn values_size_mb(nnz: usize) -> f64 {
    8.0 * nnz as f64 / 1.0e6
}
