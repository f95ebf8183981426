use super::rows::{PlainRows, RowPointers};
use super::{Format, Layout};
use crate::pattern::SparsityPattern;

/// Rows with at most this many entries are searched linearly, longer rows
/// by bisection.
pub const LINEAR_SEARCH_MAX: usize = 30;

/// Compressed sparse row index: row pointers plus one column index per entry.
#[derive(Debug)]
pub struct Csr<R = PlainRows> {
    rows: R,
    cols: Vec<usize>,
    linear_search_max: usize,
}

impl<R: RowPointers> Csr<R> {
    pub fn with_linear_search_max(mut self, max: usize) -> Self {
        self.linear_search_max = max;
        self
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    fn row_bounds(&self, r: usize) -> (usize, usize) {
        (self.rows.offset(r), self.rows.offset(r + 1))
    }

    pub fn locate_linear(&self, r: usize, c: usize) -> Option<usize> {
        let (start, end) = self.row_bounds(r);
        self.cols[start..end]
            .iter()
            .position(|&col| col == c)
            .map(|k| start + k)
    }

    pub fn locate_binary(&self, r: usize, c: usize) -> Option<usize> {
        let (start, end) = self.row_bounds(r);
        self.cols[start..end]
            .binary_search(&c)
            .ok()
            .map(|k| start + k)
    }
}

impl<R: RowPointers> Layout for Csr<R> {
    type Rows = R;

    fn from_pattern(pattern: &SparsityPattern) -> Self {
        Self {
            rows: R::from_offsets(pattern.row_ptr().to_vec()),
            cols: pattern.cols().to_vec(),
            linear_search_max: LINEAR_SEARCH_MAX,
        }
    }

    fn format(&self) -> Format {
        Format::Csr
    }

    fn rows(&self) -> &R {
        &self.rows
    }

    fn nnz(&self) -> usize {
        self.cols.len()
    }

    fn index_len(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    fn locate(&self, r: usize, c: usize) -> Option<usize> {
        let (start, end) = self.row_bounds(r);
        let row = &self.cols[start..end];
        if row.len() <= self.linear_search_max {
            row.iter().position(|&col| col == c).map(|k| start + k)
        } else {
            row.binary_search(&c).ok().map(|k| start + k)
        }
    }

    #[inline]
    fn locate_run(&self, r: usize, c: usize, len: usize) -> Option<usize> {
        let pos = self.locate(r, c)?;
        let last = pos + len - 1;
        // strictly ascending columns: matching endpoints imply every column in between
        (last < self.rows.offset(r + 1) && self.cols[last] == c + len - 1).then_some(pos)
    }

    fn row_entries(&self, r: usize) -> Vec<(usize, usize)> {
        let (start, end) = self.row_bounds(r);
        (start..end).map(|p| (self.cols[p], p)).collect()
    }
}
