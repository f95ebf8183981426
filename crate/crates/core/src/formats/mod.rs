//! Sparse matrix storage: the CSR and CRAC index layouts, combined with plain,
//! atomic, or lock-carrying storage for parallel assembly.
//!
//! A matrix is an index [`Layout`] (which owns the row pointers) plus a values
//! array. Both layouts store values in the same row-major, column-sorted
//! order, so a CSR and a CRAC matrix built from one pattern have
//! interchangeable values arrays.
//!
//! | alias                  | row pointers      | values           |
//! |------------------------|-------------------|------------------|
//! | [`CsrMatrix`]          | [`PlainRows`]     | `Vec<f64>`       |
//! | [`LockableCsrMatrix`]  | [`LockableRows`]  | `Vec<f64>`       |
//! | [`AtomicCsrMatrix`]    | [`PlainRows`]     | [`AtomicValues`] |
//!
//! and likewise for CRAC.

mod crac;
mod csr;
mod rows;
mod values;

use std::fmt;
use std::io;
use std::str::FromStr;

pub use crac::Crac;
pub use csr::{Csr, LINEAR_SEARCH_MAX};
pub use rows::{LockableRows, PlainRows, RowGuard, RowPointers};
pub(crate) use values::SharedValues;
pub use values::{add_slice, AtomicValues};

use crate::pattern::SparsityPattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Format {
    Csr,
    Crac,
}

impl Format {
    pub const ALL: [Format; 2] = [Format::Csr, Format::Crac];

    pub fn name(self) -> &'static str {
        match self {
            Format::Csr => "csr",
            Format::Crac => "crac",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csr" => Ok(Format::Csr),
            "crac" => Ok(Format::Crac),
            other => Err(format!("unknown format '{other}' (valid: csr, crac)")),
        }
    }
}

/// Coefficient lookup shared by the CSR and CRAC index layouts.
pub trait Layout: Send + Sync + Sized {
    type Rows: RowPointers;

    fn from_pattern(pattern: &SparsityPattern) -> Self;

    fn format(&self) -> Format;

    fn rows(&self) -> &Self::Rows;

    fn nnz(&self) -> usize;

    /// Length of the column index array (`cols` for CSR, `col_align` for CRAC).
    fn index_len(&self) -> usize;

    fn n_rows(&self) -> usize {
        self.rows().len() - 1
    }

    /// Position of `(r, c)` in the values array, `None` when not stored.
    fn locate(&self, r: usize, c: usize) -> Option<usize>;

    /// Position of column `c` in row `r` provided columns `c .. c + len` are
    /// all stored there (and therefore contiguous in the values array).
    fn locate_run(&self, r: usize, c: usize, len: usize) -> Option<usize>;

    /// `(column, position)` for every stored entry of row `r`.
    fn row_entries(&self, r: usize) -> Vec<(usize, usize)>;
}

/// A sparse matrix with an ordinary `f64` values array.
#[derive(Debug)]
pub struct SparseMatrix<L> {
    layout: L,
    values: Vec<f64>,
}

pub type CsrMatrix = SparseMatrix<Csr>;
pub type CracMatrix = SparseMatrix<Crac>;
pub type LockableCsrMatrix = SparseMatrix<Csr<LockableRows>>;
pub type LockableCracMatrix = SparseMatrix<Crac<LockableRows>>;
pub type AtomicCsrMatrix = AtomicMatrix<Csr>;
pub type AtomicCracMatrix = AtomicMatrix<Crac>;

impl<L: Layout> SparseMatrix<L> {
    /// Zero-valued matrix with the given pattern.
    pub fn from_pattern(pattern: &SparsityPattern) -> Self {
        Self::from_layout(L::from_pattern(pattern))
    }

    pub fn from_layout(layout: L) -> Self {
        let values = vec![0.0; layout.nnz()];
        Self { layout, values }
    }

    pub fn layout(&self) -> &L {
        &self.layout
    }

    pub fn rows(&self) -> &L::Rows {
        self.layout.rows()
    }

    pub fn n_rows(&self) -> usize {
        self.layout.n_rows()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn locate(&self, r: usize, c: usize) -> Option<usize> {
        self.layout.locate(r, c)
    }

    /// Coefficient `(r, c)`, reading absent entries as zero.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.locate(r, c).map_or(0.0, |p| self.values[p])
    }

    /// Adds `x` to `(r, c)`; returns `false` if the entry is not stored.
    pub fn add(&mut self, r: usize, c: usize, x: f64) -> bool {
        match self.layout.locate(r, c) {
            Some(p) => {
                self.values[p] += x;
                true
            }
            None => false,
        }
    }

    /// Adds `src` onto columns `col_start .. col_start + src.len()` of row `r`.
    ///
    /// The run is located once and added as one contiguous slice. Returns the
    /// values position of `col_start`, or `None` (adding nothing) when the
    /// columns are not all stored in the row.
    pub fn row_slice_add(&mut self, r: usize, col_start: usize, src: &[f64]) -> Option<usize> {
        if src.is_empty() {
            return self.layout.locate(r, col_start);
        }
        let pos = self.layout.locate_run(r, col_start, src.len());
        debug_assert!(
            pos.is_some(),
            "columns {col_start}..+{} not contiguous in row {r}",
            src.len()
        );
        let pos = pos?;
        add_slice(&mut self.values[pos..pos + src.len()], src);
        Some(pos)
    }

    pub fn reset_values(&mut self) {
        self.values.fill(0.0);
    }

    /// `(row, column, value)` for every stored entry, row-major.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        entries(&self.layout, |p| self.values[p])
    }

    pub fn write_matrix_market<W: io::Write>(&self, out: W) -> io::Result<()> {
        write_matrix_market(out, &self.entries(), self.n_rows())
    }

    pub(crate) fn parts_mut(&mut self) -> (&L, &mut [f64]) {
        (&self.layout, &mut self.values)
    }

    pub(crate) fn split_shared(&mut self) -> (&L, SharedValues<'_>) {
        (&self.layout, SharedValues::new(&mut self.values))
    }
}

/// A sparse matrix whose values accept concurrent atomic additions.
#[derive(Debug)]
pub struct AtomicMatrix<L> {
    layout: L,
    values: AtomicValues,
}

impl<L: Layout> AtomicMatrix<L> {
    pub fn from_pattern(pattern: &SparsityPattern) -> Self {
        let layout = L::from_pattern(pattern);
        let values = AtomicValues::zeroed(layout.nnz());
        Self { layout, values }
    }

    pub fn layout(&self) -> &L {
        &self.layout
    }

    pub fn n_rows(&self) -> usize {
        self.layout.n_rows()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn atomic_values(&self) -> &AtomicValues {
        &self.values
    }

    pub fn locate(&self, r: usize, c: usize) -> Option<usize> {
        self.layout.locate(r, c)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.locate(r, c).map_or(0.0, |p| self.values.load(p))
    }

    #[inline]
    pub fn atomic_add(&self, pos: usize, x: f64) {
        self.values.add(pos, x);
    }

    pub fn reset_values(&mut self) {
        self.values.reset();
    }

    pub fn values(&self) -> Vec<f64> {
        self.values.to_vec()
    }

    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        entries(&self.layout, |p| self.values.load(p))
    }

    pub fn write_matrix_market<W: io::Write>(&self, out: W) -> io::Result<()> {
        write_matrix_market(out, &self.entries(), self.n_rows())
    }
}

fn entries<L: Layout>(layout: &L, value: impl Fn(usize) -> f64) -> Vec<(usize, usize, f64)> {
    (0..layout.n_rows())
        .flat_map(|r| {
            layout
                .row_entries(r)
                .into_iter()
                .map(move |(c, p)| (r, c, p))
        })
        .map(|(r, c, p)| (r, c, value(p)))
        .collect()
}

/// Writes 1-based Matrix Market coordinate output.
fn write_matrix_market<W: io::Write>(
    mut out: W,
    entries: &[(usize, usize, f64)],
    n_rows: usize,
) -> io::Result<()> {
    let n_cols = entries
        .iter()
        .map(|e| e.1 + 1)
        .max()
        .unwrap_or(0)
        .max(n_rows);
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", n_rows, n_cols, entries.len())?;
    for &(r, c, v) in entries {
        writeln!(out, "{} {} {:e}", r + 1, c + 1, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// The 6×6 example matrix, 0-based.
    pub(crate) fn example_pattern() -> SparsityPattern {
        SparsityPattern::from_rows(vec![
            vec![0, 1],
            vec![0, 1],
            vec![1, 2, 4, 5],
            vec![2, 3, 4],
            vec![3, 4, 5],
            vec![1, 2, 3, 4],
        ])
    }

    const EXAMPLE_VALUES: [f64; 18] = [
        1.21, 83.2, 47.1, 5.12, 6.29, 2.37, 8.34, 3.33, 9.24, 10.2, 1.17, 19.2, 13.1, 1.19, 16.4,
        15.8, 7.36, 12.2,
    ];

    fn filled<L: Layout>() -> SparseMatrix<L> {
        let mut m = SparseMatrix::<L>::from_pattern(&example_pattern());
        m.values_mut().copy_from_slice(&EXAMPLE_VALUES);
        m
    }

    fn one_based(v: &[usize]) -> Vec<usize> {
        v.iter().map(|x| x + 1).collect()
    }

    #[test]
    fn example_csr_arrays() {
        let m: CsrMatrix = filled();
        assert_eq!(one_based(m.rows().as_slice()), vec![1, 3, 5, 9, 12, 15, 19]);
        assert_eq!(
            one_based(m.layout().cols()),
            vec![1, 2, 1, 2, 2, 3, 5, 6, 3, 4, 5, 4, 5, 6, 2, 3, 4, 5]
        );
        assert_eq!(m.locate(2, 5), Some(7));
        assert_eq!(m.get(2, 5), 3.33);
        assert_eq!(m.get(0, 0), 1.21);
        assert_eq!(m.locate(0, 5), None);
        assert_eq!(m.get(0, 5), 0.0);
    }

    #[test]
    fn example_crac_arrays() {
        let m: CracMatrix = filled();
        assert_eq!(one_based(m.rows().as_slice()), vec![1, 3, 5, 9, 11, 13, 15]);
        let ca = m.layout().col_align();
        assert_eq!(ca.len(), 16);
        let pairs: Vec<(usize, usize)> = ca[..14].chunks(2).map(|p| (p[0] + 1, p[1] + 1)).collect();
        assert_eq!(
            pairs,
            vec![(1, 1), (1, 3), (2, 5), (5, 7), (3, 9), (4, 12), (2, 15)]
        );
        assert_eq!(ca[15] + 1, 19);
        assert_eq!(m.layout().n_runs(), 7);
        assert_eq!(m.locate(2, 5), Some(7));
        assert_eq!(m.get(2, 5), 3.33);
        assert_eq!(m.locate(5, 1), Some(14));
        assert_eq!(m.get(5, 1), 16.4);
        // below the first run and inside a gap between runs
        assert_eq!(m.locate(3, 1), None);
        assert_eq!(m.locate(2, 3), None);
        assert_eq!(m.locate(2, 0), None);
    }

    #[test]
    fn empty_pattern() {
        let p = SparsityPattern::from_rows(Vec::<Vec<usize>>::new());
        let csr = CsrMatrix::from_pattern(&p);
        let crac = CracMatrix::from_pattern(&p);
        assert_eq!(csr.rows().as_slice(), &[0]);
        assert_eq!(crac.rows().as_slice(), &[0]);
        assert_eq!(crac.layout().col_align().len(), 2);
        assert_eq!(crac.layout().col_align()[1], 0);
        assert_eq!(crac.nnz(), 0);
    }

    #[test]
    fn lockable_offsets_match_plain() {
        let p = example_pattern();
        let plain = CsrMatrix::from_pattern(&p);
        let lockable = LockableCsrMatrix::from_pattern(&p);
        for r in 0..=p.n_rows() {
            assert_eq!(lockable.rows().read_offset(r), plain.rows().as_slice()[r]);
        }
        let crac = LockableCracMatrix::from_pattern(&p);
        assert_eq!(crac.rows().to_offsets(), vec![0, 2, 4, 8, 10, 12, 14]);
        crac.rows().lock_row(2);
        assert_eq!(crac.locate(2, 5), Some(7));
        crac.rows().unlock_row(2);
        assert!(crac.rows().all_unlocked());
    }

    #[test]
    fn row_slice_add_example() {
        let mut m = CsrMatrix::from_pattern(&example_pattern());
        assert_eq!(m.row_slice_add(5, 1, &[1.0; 4]), Some(14));
        let touched: Vec<usize> = (0..18).filter(|&p| m.values()[p] != 0.0).collect();
        assert_eq!(one_based(&touched), vec![15, 16, 17, 18]);
        assert_eq!(m.row_slice_add(3, 4, &[2.0]), Some(10));
        assert_eq!(m.get(3, 4), 2.0);

        let mut c = CracMatrix::from_pattern(&example_pattern());
        assert_eq!(c.row_slice_add(5, 1, &[1.0; 4]), Some(14));
        assert_eq!(
            c.values(),
            m.values()
                .iter()
                .map(|&v| if v == 2.0 { 0.0 } else { v })
                .collect::<Vec<_>>()
        );
    }

    #[test]
    #[cfg(debug_assertions)]
    #[should_panic(expected = "not contiguous")]
    fn row_slice_add_rejects_gaps() {
        let mut m = CsrMatrix::from_pattern(&example_pattern());
        m.row_slice_add(2, 1, &[1.0; 3]);
    }

    #[test]
    fn reset_clears_values_only() {
        let mut m: CracMatrix = filled();
        let before = m.layout().col_align().to_vec();
        m.reset_values();
        assert!(m.values().iter().all(|&v| v == 0.0));
        assert_eq!(m.layout().col_align(), before.as_slice());
    }

    #[test]
    fn matrix_market_dump() {
        let m: CsrMatrix = filled();
        let mut out = Vec::new();
        m.write_matrix_market(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("%%MatrixMarket matrix coordinate real general")
        );
        assert_eq!(lines.next(), Some("6 6 18"));
        let parsed: Vec<(usize, usize, f64)> = lines
            .map(|l| {
                let f: Vec<&str> = l.split_whitespace().collect();
                (
                    f[0].parse().unwrap(),
                    f[1].parse().unwrap(),
                    f[2].parse().unwrap(),
                )
            })
            .collect();
        assert_eq!(parsed[7], (3, 6, 3.33));
        assert_eq!(parsed.len(), 18);
    }

    fn random_pattern(rng: &mut ChaCha8Rng, n: usize, density: f64) -> SparsityPattern {
        SparsityPattern::from_rows(
            (0..n)
                .map(|_| (0..n).filter(|_| rng.gen_bool(density)).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn lookups_agree_with_dense_mirror() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..40 {
            let n = rng.gen_range(1..=32);
            let density = [0.1, 0.3, 0.7, 1.0][trial % 4];
            let p = random_pattern(&mut rng, n, density);
            let mut dense = vec![vec![None::<f64>; n]; n];
            let mut csr = CsrMatrix::from_pattern(&p);
            let mut crac = CracMatrix::from_pattern(&p);
            for r in 0..n {
                for &c in p.row(r) {
                    dense[r][c] = Some(0.0);
                }
            }
            for _ in 0..200 {
                let (r, c) = (rng.gen_range(0..n), rng.gen_range(0..n));
                let x = rng.gen_range(0..10) as f64;
                if let Some(v) = dense[r][c].as_mut() {
                    *v += x;
                    assert!(csr.add(r, c, x));
                    assert!(crac.add(r, c, x));
                } else {
                    assert!(!csr.add(r, c, x));
                    assert!(!crac.add(r, c, x));
                }
            }
            for r in 0..n {
                for c in 0..n {
                    let expect = dense[r][c].unwrap_or(0.0);
                    assert_eq!(csr.get(r, c), expect);
                    assert_eq!(crac.get(r, c), expect);
                    assert_eq!(csr.locate(r, c), crac.locate(r, c));
                    assert_eq!(
                        csr.layout().locate_linear(r, c),
                        csr.layout().locate_binary(r, c)
                    );
                }
            }
            assert_eq!(csr.values(), crac.values());
        }
    }

    #[test]
    fn run_identity_and_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = random_pattern(&mut rng, 64, 0.6);
            let crac = CracMatrix::from_pattern(&p);
            let ca = crac.layout().col_align();
            assert_eq!(ca.len(), 2 * crac.layout().n_runs() + 2);
            assert_eq!(ca[ca.len() - 1], p.nnz());
            let total: usize = ca
                .chunks(2)
                .collect::<Vec<_>>()
                .windows(2)
                .map(|w| w[1][1] - w[0][1])
                .sum();
            assert_eq!(total, p.nnz());
            let binary_only = Csr::<PlainRows>::from_pattern(&p).with_linear_search_max(0);
            let linear_only = Csr::<PlainRows>::from_pattern(&p).with_linear_search_max(usize::MAX);
            for r in 0..64 {
                for c in 0..64 {
                    assert_eq!(binary_only.locate(r, c), linear_only.locate(r, c));
                }
            }
        }
    }

    #[test]
    fn slice_add_matches_scalar_adds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_pattern(&mut rng, 24, 0.8);
        let mut sliced = CracMatrix::from_pattern(&p);
        let mut scalar = CsrMatrix::from_pattern(&p);
        for r in 0..24 {
            for (start, len) in crate::mesh::encode_runs(p.row(r)) {
                let take = rng.gen_range(1..=len);
                let offset = rng.gen_range(0..=len - take);
                let src: Vec<f64> = (0..take).map(|_| rng.gen_range(0..5) as f64).collect();
                assert!(sliced.row_slice_add(r, start + offset, &src).is_some());
                for (k, &x) in src.iter().enumerate() {
                    assert!(scalar.add(r, start + offset + k, x));
                }
            }
        }
        assert_eq!(sliced.values(), scalar.values());
    }

    #[test]
    fn atomic_matrix_reads_like_plain() {
        let p = example_pattern();
        let m = AtomicCracMatrix::from_pattern(&p);
        let pos = m.locate(2, 5).unwrap();
        m.atomic_add(pos, 3.33);
        assert_eq!(m.get(2, 5), 3.33);
        assert_eq!(m.entries().len(), 18);
    }
}
