//! Cross-checks every assembly method and format against the sequential CSR
//! result.

use std::fmt;

use crate::assembly::{AssemblyError, AssemblyJob, ElementSource, Method, Target, Workers};
use crate::colouring::Colouring;
use crate::formats::Format;
use crate::mesh::DofMap;
use crate::pattern::SparsityPattern;

/// Deliberate corruption of one assembled value, to exercise the checker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fault {
    pub method: Method,
    pub format: Format,
    pub position: usize,
    pub delta: f64,
}

/// One assembled value that differs from the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discrepancy {
    pub row: usize,
    pub col: usize,
    pub expected: f64,
    pub actual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub method: Method,
    pub format: Format,
    pub threads: usize,
    pub discrepancies: Vec<Discrepancy>,
    /// Sum of the values array.
    pub total: f64,
    pub expected_total: f64,
    pub rows_unlocked: bool,
    /// Row offsets and nnz match the reference layout.
    pub structure_intact: bool,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.discrepancies.is_empty()
            && self.total == self.expected_total
            && self.rows_unlocked
            && self.structure_intact
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passed() { "ok" } else { "MISMATCH" };
            writeln!(
                f,
                "{:<10} {:<5} threads={:<3} {status}",
                c.method.name(),
                c.format.name(),
                c.threads
            )?;
            for d in c.discrepancies.iter().take(10) {
                writeln!(
                    f,
                    "    ({}, {}): expected {} got {}",
                    d.row, d.col, d.expected, d.actual
                )?;
            }
            if c.discrepancies.len() > 10 {
                writeln!(f, "    ... {} more", c.discrepancies.len() - 10)?;
            }
            if c.total != c.expected_total {
                writeln!(f, "    sum {} != {}", c.total, c.expected_total)?;
            }
            if !c.rows_unlocked {
                writeln!(f, "    row pointers left locked")?;
            }
            if !c.structure_intact {
                writeln!(f, "    layout changed during assembly")?;
            }
        }
        Ok(())
    }
}

/// Assembles `elements` with every method, format and thread count and
/// compares each result bit for bit with sequential CSR assembly.
/// `expected_total` is the conservation target for the sum of all values.
pub fn verify_methods<S: ElementSource>(
    map: &DofMap,
    elements: &S,
    expected_total: f64,
    thread_counts: &[usize],
    fault: Option<Fault>,
) -> Result<VerifyReport, AssemblyError> {
    let pattern = SparsityPattern::build(map);
    let colouring = Colouring::greedy(map);
    let reference = reference_entries(&pattern, elements)?;

    let mut report = VerifyReport::default();
    for &threads in thread_counts {
        let workers = Workers::new(threads)?;
        let job = AssemblyJob::new(elements, &workers).with_colouring(&colouring)?;
        for method in Method::ALL {
            for format in Format::ALL {
                let fault = fault.filter(|f| f.method == method && f.format == format);
                let (_, check) = run_and_check(
                    &job,
                    &pattern,
                    &reference,
                    expected_total,
                    method,
                    format,
                    fault,
                )?;
                report.checks.push(check);
            }
        }
    }
    Ok(report)
}

/// A single assembly with `method` into `format`, checked against sequential
/// CSR assembly. Returns the assembled matrix along with the check.
pub fn assemble_checked<S: ElementSource>(
    map: &DofMap,
    elements: &S,
    expected_total: f64,
    method: Method,
    format: Format,
    workers: &Workers,
) -> Result<(Target, Check), AssemblyError> {
    let pattern = SparsityPattern::build(map);
    let reference = reference_entries(&pattern, elements)?;
    let mut job = AssemblyJob::new(elements, workers);
    let colouring;
    if method == Method::ColouredVectorized {
        colouring = Colouring::greedy(map);
        job = job.with_colouring(&colouring)?;
    }
    run_and_check(
        &job,
        &pattern,
        &reference,
        expected_total,
        method,
        format,
        None,
    )
}

fn reference_entries<S: ElementSource>(
    pattern: &SparsityPattern,
    elements: &S,
) -> Result<Vec<(usize, usize, f64)>, AssemblyError> {
    let workers = Workers::new(1)?;
    let job = AssemblyJob::new(elements, &workers);
    let mut target = Target::for_method(Method::Sequential, Format::Csr, pattern);
    job.run(Method::Sequential, &mut target)?;
    Ok(target.entries())
}

fn run_and_check<S: ElementSource>(
    job: &AssemblyJob<'_, S>,
    pattern: &SparsityPattern,
    reference: &[(usize, usize, f64)],
    expected_total: f64,
    method: Method,
    format: Format,
    fault: Option<Fault>,
) -> Result<(Target, Check), AssemblyError> {
    let mut target = Target::for_method(method, format, pattern);
    let offsets = target.row_offsets();
    job.run(method, &mut target)?;
    let mut entries = target.entries();
    if let Some(f) = fault {
        if let Some(entry) = entries.get_mut(f.position) {
            entry.2 += f.delta;
        }
    }
    let check = Check {
        method,
        format,
        threads: if method.is_parallel() {
            job.workers().threads()
        } else {
            1
        },
        discrepancies: compare(reference, &entries),
        total: entries.iter().map(|e| e.2).sum(),
        expected_total,
        rows_unlocked: target.all_rows_unlocked(),
        structure_intact: target.row_offsets() == offsets && target.nnz() == pattern.nnz(),
    };
    Ok((target, check))
}

fn compare(reference: &[(usize, usize, f64)], actual: &[(usize, usize, f64)]) -> Vec<Discrepancy> {
    let mut out: Vec<Discrepancy> = reference
        .iter()
        .zip(actual)
        .filter(|(r, a)| r.0 != a.0 || r.1 != a.1 || r.2.to_bits() != a.2.to_bits())
        .map(|(r, a)| Discrepancy {
            row: r.0,
            col: r.1,
            expected: r.2,
            actual: if (r.0, r.1) == (a.0, a.1) {
                a.2
            } else {
                f64::NAN
            },
        })
        .collect();
    for r in reference.iter().skip(actual.len()) {
        out.push(Discrepancy {
            row: r.0,
            col: r.1,
            expected: r.2,
            actual: f64::NAN,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::OnesElements;
    use crate::mesh::Mesh;

    fn setup(n: usize, p: usize, d: usize) -> (DofMap, OnesElements) {
        let map = DofMap::build(&Mesh::structured(n), p, d);
        let elements = OnesElements::new(&map);
        (map, elements)
    }

    #[test]
    fn all_methods_agree() {
        let (map, elements) = setup(6, 2, 2);
        let report =
            verify_methods(&map, &elements, elements.total_weight(), &[1, 3], None).unwrap();
        assert_eq!(report.checks.len(), 2 * 5 * 2);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn injected_fault_is_reported() {
        let (map, elements) = setup(4, 1, 1);
        let fault = Fault {
            method: Method::SpinVectorized,
            format: Format::Crac,
            position: 7,
            delta: 1.0,
        };
        let report =
            verify_methods(&map, &elements, elements.total_weight(), &[2], Some(fault)).unwrap();
        let failed: Vec<_> = report.failures().collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(
            (failed[0].method, failed[0].format),
            (Method::SpinVectorized, Format::Crac)
        );
        assert_eq!(failed[0].discrepancies.len(), 1);
        assert_eq!(failed[0].total, elements.total_weight() + 1.0);
        assert!(report.to_string().contains("MISMATCH"));
    }

    #[test]
    fn single_checked_assembly() {
        let (map, elements) = setup(3, 3, 2);
        let workers = Workers::new(2).unwrap();
        for method in Method::ALL {
            let (target, check) = assemble_checked(
                &map,
                &elements,
                elements.total_weight(),
                method,
                Format::Crac,
                &workers,
            )
            .unwrap();
            assert!(check.passed());
            assert_eq!(target.format(), Format::Crac);
        }
    }
}
