use super::rows::{PlainRows, RowPointers};
use super::{Format, Layout};
use crate::pattern::SparsityPattern;

/// Compressed row aligned columns index.
///
/// Each row is stored as a list of `(column_start, values_position)` pairs,
/// one per maximal run of consecutive columns. A final pair closes the array
/// with `values_position = nnz`, so the length of any run is the difference
/// between its own and the following pair's values position. Row pointers
/// are offsets into `col_align` in entry units (two entries per pair).
#[derive(Debug)]
pub struct Crac<R = PlainRows> {
    rows: R,
    col_align: Vec<usize>,
}

impl<R: RowPointers> Crac<R> {
    pub fn col_align(&self) -> &[usize] {
        &self.col_align
    }

    /// Number of column runs, excluding the closing pair.
    pub fn n_runs(&self) -> usize {
        self.col_align.len() / 2 - 1
    }

    /// Block search over the row's pairs.
    ///
    /// Returns `(column_start, column_end, values_start)` of the only run that
    /// may contain `c`, where `column_end` is exclusive.
    #[inline]
    fn candidate_run(&self, r: usize, c: usize) -> Option<(usize, usize, usize)> {
        let start = self.rows.offset(r);
        let end = self.rows.offset(r + 1);
        if start == end {
            return None;
        }
        let ca = &self.col_align;
        let last = end - 2;
        let mut i = start;
        while i < last {
            if ca[i + 2] > c {
                break;
            }
            i += 2;
        }
        let column_start = ca[i];
        let values_start = ca[i + 1];
        let values_end = ca[i + 3];
        Some((
            column_start,
            column_start + (values_end - values_start),
            values_start,
        ))
    }
}

impl<R: RowPointers> Layout for Crac<R> {
    type Rows = R;

    fn from_pattern(pattern: &SparsityPattern) -> Self {
        let mut offsets = Vec::with_capacity(pattern.n_rows() + 1);
        let mut col_align = Vec::new();
        let mut position = 0usize;
        for r in 0..pattern.n_rows() {
            offsets.push(col_align.len());
            let row = pattern.row(r);
            for (k, &c) in row.iter().enumerate() {
                if k == 0 || row[k - 1] + 1 != c {
                    col_align.push(c);
                    col_align.push(position + k);
                }
            }
            position += row.len();
        }
        offsets.push(col_align.len());
        // closing pair: one past the largest column, then the values-array end
        let n_cols = pattern.cols().iter().max().map_or(0, |&c| c + 1);
        col_align.push(n_cols.max(pattern.n_rows()));
        col_align.push(position);
        Self {
            rows: R::from_offsets(offsets),
            col_align,
        }
    }

    fn format(&self) -> Format {
        Format::Crac
    }

    fn rows(&self) -> &R {
        &self.rows
    }

    fn nnz(&self) -> usize {
        self.col_align[self.col_align.len() - 1]
    }

    fn index_len(&self) -> usize {
        self.col_align.len()
    }

    #[inline]
    fn locate(&self, r: usize, c: usize) -> Option<usize> {
        let (column_start, column_end, values_start) = self.candidate_run(r, c)?;
        (c >= column_start && c < column_end).then(|| values_start + (c - column_start))
    }

    #[inline]
    fn locate_run(&self, r: usize, c: usize, len: usize) -> Option<usize> {
        let (column_start, column_end, values_start) = self.candidate_run(r, c)?;
        (c >= column_start && c + len <= column_end).then(|| values_start + (c - column_start))
    }

    fn row_entries(&self, r: usize) -> Vec<(usize, usize)> {
        let (start, end) = (self.rows.offset(r), self.rows.offset(r + 1));
        let ca = &self.col_align;
        (start..end)
            .step_by(2)
            .flat_map(|i| {
                let (col, pos, next) = (ca[i], ca[i + 1], ca[i + 3]);
                (0..next - pos).map(move |k| (col + k, pos + k))
            })
            .collect()
    }
}
