use rayon::prelude::*;

use super::{AssemblyError, Coloured, ElementSource, Workers};
use crate::formats::{AtomicMatrix, Layout, LockableRows, SharedValues, SparseMatrix};
use crate::mesh::ElementMatrix;

#[inline]
fn check_element(
    element: usize,
    dofs: &[usize],
    k: &ElementMatrix,
    n_rows: usize,
) -> Result<(), AssemblyError> {
    if dofs.len() != k.order() {
        return Err(AssemblyError::ElementSizeMismatch {
            element,
            dofs: dofs.len(),
            order: k.order(),
        });
    }
    match dofs.iter().find(|&&d| d >= n_rows) {
        Some(&dof) => Err(AssemblyError::DofOutOfRange {
            element,
            dof,
            n_rows,
        }),
        None => Ok(()),
    }
}

/// `G(D(r), D(c)) += K(r, c)` element by element on a single thread.
pub fn assemble_sequential<L, S>(
    target: &mut SparseMatrix<L>,
    elements: &S,
) -> Result<(), AssemblyError>
where
    L: Layout,
    S: ElementSource,
{
    let (layout, values) = target.parts_mut();
    let n_rows = layout.n_rows();
    for e in 0..elements.n_elements() {
        let k = elements.stiffness(e);
        let dofs = elements.dofs(e).flat();
        check_element(e, dofs, &k, n_rows)?;
        for (lr, &row) in dofs.iter().enumerate() {
            let k_row = k.row(lr);
            for (lc, &col) in dofs.iter().enumerate() {
                let pos = layout.locate(row, col).ok_or(AssemblyError::MissingEntry {
                    element: e,
                    row,
                    col,
                })?;
                values[pos] += k_row[lc];
            }
        }
    }
    Ok(())
}

/// Parallel element loop; every coefficient goes through an atomic add.
pub fn assemble_atomic<L, S>(
    target: &AtomicMatrix<L>,
    elements: &S,
    workers: &Workers,
) -> Result<(), AssemblyError>
where
    L: Layout,
    S: ElementSource,
{
    let layout = target.layout();
    let n_rows = layout.n_rows();
    workers.install(|| {
        (0..elements.n_elements())
            .into_par_iter()
            .try_for_each(|e| {
                let k = elements.stiffness(e);
                let dofs = elements.dofs(e).flat();
                check_element(e, dofs, &k, n_rows)?;
                for (lr, &row) in dofs.iter().enumerate() {
                    let k_row = k.row(lr);
                    for (lc, &col) in dofs.iter().enumerate() {
                        let pos = layout.locate(row, col).ok_or(AssemblyError::MissingEntry {
                            element: e,
                            row,
                            col,
                        })?;
                        target.atomic_add(pos, k_row[lc]);
                    }
                }
                Ok(())
            })
    })
}

/// Parallel element loop; each local row is added under the global row's
/// spin lock, one coefficient at a time.
pub fn assemble_spin<L, S>(
    target: &mut SparseMatrix<L>,
    elements: &S,
    workers: &Workers,
) -> Result<(), AssemblyError>
where
    L: Layout<Rows = LockableRows>,
    S: ElementSource,
{
    let (layout, values) = target.split_shared();
    let rows = layout.rows();
    let n_rows = layout.n_rows();
    workers.install(|| {
        (0..elements.n_elements())
            .into_par_iter()
            .try_for_each(|e| {
                let k = elements.stiffness(e);
                let dofs = elements.dofs(e).flat();
                check_element(e, dofs, &k, n_rows)?;
                for (lr, &row) in dofs.iter().enumerate() {
                    let k_row = k.row(lr);
                    let _lock = rows.guard(row);
                    for (lc, &col) in dofs.iter().enumerate() {
                        let pos = layout.locate(row, col).ok_or(AssemblyError::MissingEntry {
                            element: e,
                            row,
                            col,
                        })?;
                        // SAFETY: pos lies in `row`, whose lock this thread holds.
                        unsafe { values.add(pos, k_row[lc]) };
                    }
                }
                Ok(())
            })
    })
}

/// Like [`assemble_spin`], but each locked row is written as one slice add
/// per run of consecutive element DOFs.
pub fn assemble_spin_vectorized<L, S>(
    target: &mut SparseMatrix<L>,
    elements: &S,
    workers: &Workers,
) -> Result<(), AssemblyError>
where
    L: Layout<Rows = LockableRows>,
    S: ElementSource,
{
    let (layout, values) = target.split_shared();
    let rows = layout.rows();
    let n_rows = layout.n_rows();
    workers.install(|| {
        (0..elements.n_elements())
            .into_par_iter()
            .try_for_each(|e| {
                let k = elements.stiffness(e);
                let dofs = elements.dofs(e);
                check_element(e, dofs.flat(), &k, n_rows)?;
                for (lr, &row) in dofs.flat().iter().enumerate() {
                    let k_row = k.row(lr);
                    let _lock = rows.guard(row);
                    // SAFETY: every slice lies in `row`, whose lock this thread holds.
                    unsafe { add_row_runs(layout, &values, e, row, dofs.runs(), k_row)? };
                }
                Ok(())
            })
    })
}

/// Colour by colour, the elements of one colour in parallel without locks,
/// each row written as slice adds. Returning from one colour's parallel
/// loop is the barrier before the next colour starts.
pub fn assemble_coloured_vectorized<L, S>(
    target: &mut SparseMatrix<L>,
    coloured: &Coloured<'_, S>,
    workers: &Workers,
) -> Result<(), AssemblyError>
where
    L: Layout,
    S: ElementSource,
{
    let elements = coloured.elements();
    let (layout, values) = target.split_shared();
    let n_rows = layout.n_rows();
    for class in coloured.colouring().classes() {
        workers.install(|| {
            class.par_iter().try_for_each(|&e| {
                let k = elements.stiffness(e);
                let dofs = elements.dofs(e);
                check_element(e, dofs.flat(), &k, n_rows)?;
                for (lr, &row) in dofs.flat().iter().enumerate() {
                    // SAFETY: `Coloured::new` verified that no other element of
                    // this colour touches `row`.
                    unsafe { add_row_runs(layout, &values, e, row, dofs.runs(), k.row(lr))? };
                }
                Ok(())
            })
        })?;
    }
    Ok(())
}

/// # Safety
/// The caller must have exclusive access to row `row` of `values`.
#[inline]
unsafe fn add_row_runs<L: Layout>(
    layout: &L,
    values: &SharedValues<'_>,
    element: usize,
    row: usize,
    runs: &[(usize, usize)],
    k_row: &[f64],
) -> Result<(), AssemblyError> {
    let mut c = 0;
    for &(col_start, len) in runs {
        let pos =
            layout
                .locate_run(row, col_start, len)
                .ok_or(AssemblyError::RunNotContiguous {
                    element,
                    row,
                    col_start,
                    len,
                })?;
        values.add_slice(pos, &k_row[c..c + len]);
        c += len;
    }
    Ok(())
}
