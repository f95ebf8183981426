use std::hint;
use std::sync::atomic::{AtomicIsize, Ordering};
use std::thread;

/// Storage for the row pointer array of a sparse matrix.
pub trait RowPointers: Send + Sync + Sized {
    fn from_offsets(offsets: Vec<usize>) -> Self;

    /// Number of stored offsets, `n_rows + 1`.
    fn len(&self) -> usize;

    fn offset(&self, r: usize) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn to_offsets(&self) -> Vec<usize> {
        (0..self.len()).map(|r| self.offset(r)).collect()
    }
}

/// Ordinary row pointers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainRows(Vec<usize>);

impl PlainRows {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl RowPointers for PlainRows {
    fn from_offsets(offsets: Vec<usize>) -> Self {
        Self(offsets)
    }

    fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    fn offset(&self, r: usize) -> usize {
        self.0[r]
    }
}

/// Row pointers that double as per-row spin locks.
///
/// Entry `r` holds `offset + 1` so that every offset, including 0, has a
/// negative counterpart. A negative entry means row `r` is locked. Reading an
/// offset takes the absolute value and never waits.
#[derive(Debug)]
pub struct LockableRows(Vec<AtomicIsize>);

/// Failed lock attempts before a spinning thread yields its time slice.
const SPINS_BEFORE_YIELD: u32 = 64;

impl LockableRows {
    /// Spins until row `r` is owned by the caller.
    #[inline]
    pub fn lock_row(&self, r: usize) {
        let entry = &self.0[r];
        let mut spins = 0u32;
        loop {
            let v = entry.load(Ordering::Relaxed).abs();
            if entry
                .compare_exchange_weak(v, -v, Ordering::Acquire, Ordering::Relaxed)
                .is_ok()
            {
                return;
            }
            spins += 1;
            if spins < SPINS_BEFORE_YIELD {
                hint::spin_loop();
            } else {
                spins = 0;
                thread::yield_now();
            }
        }
    }

    /// Releases row `r`. Must only be called by the thread holding the lock.
    #[inline]
    pub fn unlock_row(&self, r: usize) {
        let entry = &self.0[r];
        let v = entry.load(Ordering::Relaxed).abs();
        entry.swap(v, Ordering::Release);
    }

    /// Locks row `r` and unlocks it again when the guard drops.
    pub fn guard(&self, r: usize) -> RowGuard<'_> {
        self.lock_row(r);
        RowGuard { rows: self, row: r }
    }

    #[inline]
    pub fn read_offset(&self, r: usize) -> usize {
        self.0[r].load(Ordering::Relaxed).unsigned_abs() - 1
    }

    pub fn is_locked(&self, r: usize) -> bool {
        self.0[r].load(Ordering::Relaxed) < 0
    }

    /// Raw signed entry, `±(offset + 1)`.
    pub fn raw(&self, r: usize) -> isize {
        self.0[r].load(Ordering::Relaxed)
    }

    pub fn all_unlocked(&self) -> bool {
        self.0.iter().all(|e| e.load(Ordering::Acquire) > 0)
    }
}

impl RowPointers for LockableRows {
    fn from_offsets(offsets: Vec<usize>) -> Self {
        Self(
            offsets
                .into_iter()
                .map(|o| {
                    let v = isize::try_from(o + 1).expect("row offset exceeds isize range");
                    AtomicIsize::new(v)
                })
                .collect(),
        )
    }

    fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    fn offset(&self, r: usize) -> usize {
        self.read_offset(r)
    }
}

/// Holds a row lock of a [`LockableRows`] array.
pub struct RowGuard<'a> {
    rows: &'a LockableRows,
    row: usize,
}

impl Drop for RowGuard<'_> {
    fn drop(&mut self) {
        self.rows.unlock_row(self.row);
    }
}
