use std::marker::PhantomData;
use std::sync::atomic::{AtomicU64, Ordering};

/// Adds `src` element-wise onto `dst`.
///
/// Kept as a plain zipped loop over two slices so the compiler can emit
/// packed SIMD adds for it.
#[inline]
pub fn add_slice(dst: &mut [f64], src: &[f64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

/// Values array whose slots accept concurrent atomic additions.
#[derive(Debug)]
pub struct AtomicValues(Vec<AtomicU64>);

impl AtomicValues {
    pub fn zeroed(len: usize) -> Self {
        Self((0..len).map(|_| AtomicU64::new(0f64.to_bits())).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Atomically adds `x` to slot `pos`.
    ///
    /// Only the read-modify-write itself is atomic; no ordering with other
    /// slots is implied.
    #[inline]
    pub fn add(&self, pos: usize, x: f64) {
        let slot = &self.0[pos];
        let mut current = slot.load(Ordering::Relaxed);
        loop {
            let next = (f64::from_bits(current) + x).to_bits();
            match slot.compare_exchange_weak(current, next, Ordering::Relaxed, Ordering::Relaxed) {
                Ok(_) => return,
                Err(actual) => current = actual,
            }
        }
    }

    pub fn load(&self, pos: usize) -> f64 {
        f64::from_bits(self.0[pos].load(Ordering::Relaxed))
    }

    pub fn reset(&mut self) {
        for slot in self.0.iter_mut() {
            *slot.get_mut() = 0f64.to_bits();
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.load(i)).collect()
    }
}

/// Unsynchronized shared view of a plain values array.
///
/// Writers must guarantee that no two threads touch the same slot at the same
/// time, either by holding the owning row lock or by working on disjoint
/// element colours.
pub(crate) struct SharedValues<'a> {
    ptr: *mut f64,
    len: usize,
    _borrow: PhantomData<&'a mut [f64]>,
}

unsafe impl Send for SharedValues<'_> {}
unsafe impl Sync for SharedValues<'_> {}

impl<'a> SharedValues<'a> {
    pub(crate) fn new(values: &'a mut [f64]) -> Self {
        Self {
            ptr: values.as_mut_ptr(),
            len: values.len(),
            _borrow: PhantomData,
        }
    }

    /// # Safety
    /// No other thread may access `pos` concurrently.
    #[inline]
    pub(crate) unsafe fn add(&self, pos: usize, x: f64) {
        assert!(pos < self.len);
        *self.ptr.add(pos) += x;
    }

    /// # Safety
    /// No other thread may access `pos..pos + src.len()` concurrently.
    #[inline]
    pub(crate) unsafe fn add_slice(&self, pos: usize, src: &[f64]) {
        assert!(pos + src.len() <= self.len);
        let dst = std::slice::from_raw_parts_mut(self.ptr.add(pos), src.len());
        add_slice(dst, src);
    }
}
