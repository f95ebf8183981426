//! Assembly of element matrices into a global sparse matrix.
//!
//! Five strategies are provided, differing in how concurrent writers to the
//! same global row are kept apart:
//!
//! | [`Method`]            | target                | synchronisation             |
//! |-----------------------|-----------------------|-----------------------------|
//! | `seq`                 | plain                 | none, single thread         |
//! | `atomic`              | atomic values         | per-coefficient atomic add  |
//! | `spin`                | lockable rows         | row lock, scalar adds       |
//! | `spin-vec`            | lockable rows         | row lock, slice adds        |
//! | `colour-vec`          | plain                 | colour classes, slice adds  |
//!
//! Every method re-materializes each element matrix through its
//! [`ElementSource`] on every call.

mod kernels;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use kernels::{
    assemble_atomic, assemble_coloured_vectorized, assemble_sequential, assemble_spin,
    assemble_spin_vectorized,
};

use crate::colouring::Colouring;
use crate::formats::{
    AtomicCracMatrix, AtomicCsrMatrix, CracMatrix, CsrMatrix, Format, Layout, LockableCracMatrix,
    LockableCsrMatrix, RowPointers,
};
use crate::mesh::{DofMap, ElementDofs, ElementMatrix};
use crate::pattern::SparsityPattern;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AssemblyError {
    #[error("element {element}: entry ({row}, {col}) is not in the sparsity pattern")]
    MissingEntry {
        element: usize,
        row: usize,
        col: usize,
    },
    #[error("element {element}: columns {col_start}..{} are not contiguous in row {row}", col_start + len)]
    RunNotContiguous {
        element: usize,
        row: usize,
        col_start: usize,
        len: usize,
    },
    #[error("element {element}: DOF {dof} is outside the {n_rows}-row matrix")]
    DofOutOfRange {
        element: usize,
        dof: usize,
        n_rows: usize,
    },
    #[error("element {element}: {dofs} DOFs but a {order}×{order} element matrix")]
    ElementSizeMismatch {
        element: usize,
        dofs: usize,
        order: usize,
    },
    #[error("colour {colour}: elements {first} and {second} both touch DOF {dof}")]
    ColouringConflict {
        colour: usize,
        first: usize,
        second: usize,
        dof: usize,
    },
    #[error("colouring covers {colouring} elements, the job has {elements}")]
    ColouringSize { colouring: usize, elements: usize },
    #[error("method {method} needs a colouring")]
    MissingColouring { method: Method },
    #[error("method {method} cannot assemble into a {target} matrix")]
    WrongTarget {
        method: Method,
        target: &'static str,
    },
    #[error("could not start worker threads: {0}")]
    Workers(String),
}

/// Supplies element DOF arrays and element matrices to the assembly kernels.
///
/// Implementations must return the same DOFs for an element on every call.
pub trait ElementSource: Sync {
    fn n_elements(&self) -> usize;

    fn dofs(&self, element: usize) -> &ElementDofs;

    /// The element matrix, produced afresh or borrowed.
    fn stiffness(&self, element: usize) -> Cow<'_, ElementMatrix>;
}

/// Elements of a [`DofMap`] paired with the all-ones dummy matrix, which is
/// allocated anew each time it is requested.
#[derive(Debug, Clone)]
pub struct OnesElements {
    dofs: Vec<ElementDofs>,
    order: usize,
}

impl OnesElements {
    pub fn new(map: &DofMap) -> Self {
        Self {
            dofs: map.all_element_dofs(),
            order: map.element_dof_count(),
        }
    }

    /// Sum of all element matrix entries, i.e. the expected sum of the
    /// assembled values array.
    pub fn total_weight(&self) -> f64 {
        (self.dofs.len() * self.order * self.order) as f64
    }
}

impl ElementSource for OnesElements {
    fn n_elements(&self) -> usize {
        self.dofs.len()
    }

    fn dofs(&self, element: usize) -> &ElementDofs {
        &self.dofs[element]
    }

    fn stiffness(&self, _element: usize) -> Cow<'_, ElementMatrix> {
        Cow::Owned(ElementMatrix::ones(self.order))
    }
}

/// Explicitly stored element matrices.
#[derive(Debug, Clone)]
pub struct ExplicitElements {
    dofs: Vec<ElementDofs>,
    matrices: Vec<ElementMatrix>,
}

impl ExplicitElements {
    pub fn new(
        dofs: Vec<ElementDofs>,
        matrices: Vec<ElementMatrix>,
    ) -> Result<Self, AssemblyError> {
        assert_eq!(dofs.len(), matrices.len(), "one matrix per element");
        for (e, (d, k)) in dofs.iter().zip(&matrices).enumerate() {
            if d.len() != k.order() {
                return Err(AssemblyError::ElementSizeMismatch {
                    element: e,
                    dofs: d.len(),
                    order: k.order(),
                });
            }
        }
        Ok(Self { dofs, matrices })
    }

    pub fn total_weight(&self) -> f64 {
        self.matrices.iter().map(ElementMatrix::sum).sum()
    }
}

impl ElementSource for ExplicitElements {
    fn n_elements(&self) -> usize {
        self.dofs.len()
    }

    fn dofs(&self, element: usize) -> &ElementDofs {
        &self.dofs[element]
    }

    fn stiffness(&self, element: usize) -> Cow<'_, ElementMatrix> {
        Cow::Borrowed(&self.matrices[element])
    }
}

/// A fixed-size pool of worker threads for the parallel element loops.
pub struct Workers {
    pool: rayon::ThreadPool,
}

impl Workers {
    pub fn new(threads: usize) -> Result<Self, AssemblyError> {
        if threads == 0 {
            return Err(AssemblyError::Workers(
                "thread count must be positive".into(),
            ));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .thread_name(|i| format!("assembly-{i}"))
            .build()
            .map_err(|e| AssemblyError::Workers(e.to_string()))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub(crate) fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

impl fmt::Debug for Workers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Workers")
            .field("threads", &self.threads())
            .finish()
    }
}

/// An element source together with a colouring verified against its DOFs:
/// no two elements of one colour touch the same DOF.
#[derive(Debug)]
pub struct Coloured<'a, S> {
    elements: &'a S,
    colouring: &'a Colouring,
}

impl<'a, S: ElementSource> Coloured<'a, S> {
    pub fn new(elements: &'a S, colouring: &'a Colouring) -> Result<Self, AssemblyError> {
        if colouring.n_elements() != elements.n_elements() {
            return Err(AssemblyError::ColouringSize {
                colouring: colouring.n_elements(),
                elements: elements.n_elements(),
            });
        }
        let n_dofs = (0..elements.n_elements())
            .flat_map(|e| elements.dofs(e).flat().iter().copied())
            .max()
            .map_or(0, |d| d + 1);
        // owner[dof] = (colour + 1, element) of the last writer seen
        let mut owner = vec![(0usize, 0usize); n_dofs];
        for (colour, class) in colouring.classes().iter().enumerate() {
            for &e in class {
                for &dof in elements.dofs(e).flat() {
                    let (c, first) = owner[dof];
                    if c == colour + 1 && first != e {
                        return Err(AssemblyError::ColouringConflict {
                            colour,
                            first,
                            second: e,
                            dof,
                        });
                    }
                    owner[dof] = (colour + 1, e);
                }
            }
        }
        Ok(Self {
            elements,
            colouring,
        })
    }

    pub fn elements(&self) -> &'a S {
        self.elements
    }

    pub fn colouring(&self) -> &'a Colouring {
        self.colouring
    }
}

/// The five assembly strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Sequential,
    Atomic,
    Spin,
    SpinVectorized,
    ColouredVectorized,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Sequential,
        Method::Atomic,
        Method::Spin,
        Method::SpinVectorized,
        Method::ColouredVectorized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sequential => "seq",
            Method::Atomic => "atomic",
            Method::Spin => "spin",
            Method::SpinVectorized => "spin-vec",
            Method::ColouredVectorized => "colour-vec",
        }
    }

    /// Short label used in plots and tables (`Atc`, `Sp`, `Sp_vec`, `Col_vec`).
    pub fn abbreviation(self) -> &'static str {
        match self {
            Method::Sequential => "Seq",
            Method::Atomic => "Atc",
            Method::Spin => "Sp",
            Method::SpinVectorized => "Sp_vec",
            Method::ColouredVectorized => "Col_vec",
        }
    }

    pub fn is_parallel(self) -> bool {
        self != Method::Sequential
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                format!("unknown method '{s}' (valid: {})", valid.join(", "))
            })
    }
}

/// A global matrix in the storage variant a method writes to.
#[derive(Debug)]
pub enum Target {
    Csr(CsrMatrix),
    Crac(CracMatrix),
    AtomicCsr(AtomicCsrMatrix),
    AtomicCrac(AtomicCracMatrix),
    LockableCsr(LockableCsrMatrix),
    LockableCrac(LockableCracMatrix),
}

impl Target {
    /// Zeroed matrix of `format` in the variant `method` requires.
    pub fn for_method(method: Method, format: Format, pattern: &SparsityPattern) -> Self {
        match (method, format) {
            (Method::Sequential | Method::ColouredVectorized, Format::Csr) => {
                Target::Csr(CsrMatrix::from_pattern(pattern))
            }
            (Method::Sequential | Method::ColouredVectorized, Format::Crac) => {
                Target::Crac(CracMatrix::from_pattern(pattern))
            }
            (Method::Atomic, Format::Csr) => {
                Target::AtomicCsr(AtomicCsrMatrix::from_pattern(pattern))
            }
            (Method::Atomic, Format::Crac) => {
                Target::AtomicCrac(AtomicCracMatrix::from_pattern(pattern))
            }
            (Method::Spin | Method::SpinVectorized, Format::Csr) => {
                Target::LockableCsr(LockableCsrMatrix::from_pattern(pattern))
            }
            (Method::Spin | Method::SpinVectorized, Format::Crac) => {
                Target::LockableCrac(LockableCracMatrix::from_pattern(pattern))
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Target::Csr(_) => "csr",
            Target::Crac(_) => "crac",
            Target::AtomicCsr(_) => "atomic csr",
            Target::AtomicCrac(_) => "atomic crac",
            Target::LockableCsr(_) => "lockable csr",
            Target::LockableCrac(_) => "lockable crac",
        }
    }

    pub fn format(&self) -> Format {
        match self {
            Target::Csr(_) | Target::AtomicCsr(_) | Target::LockableCsr(_) => Format::Csr,
            Target::Crac(_) | Target::AtomicCrac(_) | Target::LockableCrac(_) => Format::Crac,
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            Target::Csr(m) => m.nnz(),
            Target::Crac(m) => m.nnz(),
            Target::AtomicCsr(m) => m.nnz(),
            Target::AtomicCrac(m) => m.nnz(),
            Target::LockableCsr(m) => m.nnz(),
            Target::LockableCrac(m) => m.nnz(),
        }
    }

    /// Length of the column index array of the underlying layout.
    pub fn index_len(&self) -> usize {
        match self {
            Target::Csr(m) => m.layout().index_len(),
            Target::Crac(m) => m.layout().index_len(),
            Target::AtomicCsr(m) => m.layout().index_len(),
            Target::AtomicCrac(m) => m.layout().index_len(),
            Target::LockableCsr(m) => m.layout().index_len(),
            Target::LockableCrac(m) => m.layout().index_len(),
        }
    }

    /// Snapshot of the values array.
    pub fn values(&self) -> Vec<f64> {
        match self {
            Target::Csr(m) => m.values().to_vec(),
            Target::Crac(m) => m.values().to_vec(),
            Target::AtomicCsr(m) => m.values(),
            Target::AtomicCrac(m) => m.values(),
            Target::LockableCsr(m) => m.values().to_vec(),
            Target::LockableCrac(m) => m.values().to_vec(),
        }
    }

    /// Row offsets as plain integers (absolute values for lockable rows).
    pub fn row_offsets(&self) -> Vec<usize> {
        match self {
            Target::Csr(m) => m.rows().to_offsets(),
            Target::Crac(m) => m.rows().to_offsets(),
            Target::AtomicCsr(m) => m.layout().rows().to_offsets(),
            Target::AtomicCrac(m) => m.layout().rows().to_offsets(),
            Target::LockableCsr(m) => m.rows().to_offsets(),
            Target::LockableCrac(m) => m.rows().to_offsets(),
        }
    }

    /// `(row, column, value)` triplets, row-major.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        match self {
            Target::Csr(m) => m.entries(),
            Target::Crac(m) => m.entries(),
            Target::AtomicCsr(m) => m.entries(),
            Target::AtomicCrac(m) => m.entries(),
            Target::LockableCsr(m) => m.entries(),
            Target::LockableCrac(m) => m.entries(),
        }
    }

    pub fn write_matrix_market<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        match self {
            Target::Csr(m) => m.write_matrix_market(out),
            Target::Crac(m) => m.write_matrix_market(out),
            Target::AtomicCsr(m) => m.write_matrix_market(out),
            Target::AtomicCrac(m) => m.write_matrix_market(out),
            Target::LockableCsr(m) => m.write_matrix_market(out),
            Target::LockableCrac(m) => m.write_matrix_market(out),
        }
    }

    pub fn reset_values(&mut self) {
        match self {
            Target::Csr(m) => m.reset_values(),
            Target::Crac(m) => m.reset_values(),
            Target::AtomicCsr(m) => m.reset_values(),
            Target::AtomicCrac(m) => m.reset_values(),
            Target::LockableCsr(m) => m.reset_values(),
            Target::LockableCrac(m) => m.reset_values(),
        }
    }

    /// `false` only if some lockable row entry is still negative.
    pub fn all_rows_unlocked(&self) -> bool {
        match self {
            Target::LockableCsr(m) => m.rows().all_unlocked(),
            Target::LockableCrac(m) => m.rows().all_unlocked(),
            _ => true,
        }
    }

    /// Mutable access to a plain values array (for fault injection in tests
    /// and tools).
    pub fn plain_values_mut(&mut self) -> Option<&mut [f64]> {
        match self {
            Target::Csr(m) => Some(m.values_mut()),
            Target::Crac(m) => Some(m.values_mut()),
            Target::LockableCsr(m) => Some(m.values_mut()),
            Target::LockableCrac(m) => Some(m.values_mut()),
            _ => None,
        }
    }
}

/// Everything a method needs besides the target matrix.
#[derive(Debug)]
pub struct AssemblyJob<'a, S> {
    elements: &'a S,
    workers: &'a Workers,
    coloured: Option<Coloured<'a, S>>,
}

impl<'a, S: ElementSource> AssemblyJob<'a, S> {
    pub fn new(elements: &'a S, workers: &'a Workers) -> Self {
        Self {
            elements,
            workers,
            coloured: None,
        }
    }

    /// Attaches a colouring, checking it against the element DOFs once.
    pub fn with_colouring(mut self, colouring: &'a Colouring) -> Result<Self, AssemblyError> {
        self.coloured = Some(Coloured::new(self.elements, colouring)?);
        Ok(self)
    }

    pub fn elements(&self) -> &'a S {
        self.elements
    }

    pub fn workers(&self) -> &'a Workers {
        self.workers
    }

    /// Runs `method` into `target`, which must be the variant
    /// [`Target::for_method`] would build for it.
    pub fn run(&self, method: Method, target: &mut Target) -> Result<(), AssemblyError> {
        let wrong = |t: &Target| AssemblyError::WrongTarget {
            method,
            target: t.kind(),
        };
        match method {
            Method::Sequential => match target {
                Target::Csr(m) => assemble_sequential(m, self.elements),
                Target::Crac(m) => assemble_sequential(m, self.elements),
                t => Err(wrong(t)),
            },
            Method::Atomic => match target {
                Target::AtomicCsr(m) => assemble_atomic(m, self.elements, self.workers),
                Target::AtomicCrac(m) => assemble_atomic(m, self.elements, self.workers),
                t => Err(wrong(t)),
            },
            Method::Spin => match target {
                Target::LockableCsr(m) => assemble_spin(m, self.elements, self.workers),
                Target::LockableCrac(m) => assemble_spin(m, self.elements, self.workers),
                t => Err(wrong(t)),
            },
            Method::SpinVectorized => match target {
                Target::LockableCsr(m) => assemble_spin_vectorized(m, self.elements, self.workers),
                Target::LockableCrac(m) => assemble_spin_vectorized(m, self.elements, self.workers),
                t => Err(wrong(t)),
            },
            Method::ColouredVectorized => {
                let coloured = self
                    .coloured
                    .as_ref()
                    .ok_or(AssemblyError::MissingColouring { method })?;
                match target {
                    Target::Csr(m) => assemble_coloured_vectorized(m, coloured, self.workers),
                    Target::Crac(m) => assemble_coloured_vectorized(m, coloured, self.workers),
                    t => Err(wrong(t)),
                }
            }
        }
    }
}
