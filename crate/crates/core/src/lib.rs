//! Parallel assembly of finite element matrices into CSR and CRAC sparse
//! matrices, with the benchmark harness used to compare the strategies.
//!
//! The pipeline is:
//!
//! 1. a [`mesh::Mesh`] (generated or imported) and a [`mesh::DofMap`] for a
//!    polynomial order `p` and `d` DOFs per node;
//! 2. a [`pattern::SparsityPattern`] built once from the DOF map;
//! 3. a storage target from [`formats`] in the variant a method needs;
//! 4. one of the [`assembly`] methods, optionally with a
//!    [`colouring::Colouring`];
//! 5. timing and storage statistics from [`bench`].

pub mod assembly;
pub mod bench;
pub mod colouring;
pub mod formats;
pub mod mesh;
pub mod pattern;
pub mod verify;

pub use assembly::{
    AssemblyError, AssemblyJob, ElementSource, Method, OnesElements, Target, Workers,
};
pub use colouring::Colouring;
pub use formats::{CracMatrix, CsrMatrix, Format};
pub use mesh::{DofMap, ElementDofs, ElementMatrix, Mesh};
pub use pattern::SparsityPattern;
