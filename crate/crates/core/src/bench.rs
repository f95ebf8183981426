//! Benchmark harness: repeated timed assemblies, aggregate timings, the speed
//! factor `c = t_avg(seq) / t_avg(method)` and the storage factor
//! `γ = len(col_align) / len(cols)`, over the h-, p- and d-refinement suites.

use std::fmt::{self, Write as _};
use std::io;
use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::assembly::{
    AssemblyError, AssemblyJob, ElementSource, Method, OnesElements, Target, Workers,
};
use crate::colouring::Colouring;
use crate::formats::{Crac, Csr, Format, Layout, RowPointers};
use crate::mesh::msh::{import_msh, MshError};
use crate::mesh::{DofMap, Mesh};
use crate::pattern::{values_size_mb, SparsityPattern};

/// Structured mesh sizes (elements per side) of the h-suite.
pub const H_SIZES: [usize; 8] = [6, 12, 24, 48, 96, 192, 384, 768];
/// Mesh of the p-suite: the 4th h-suite mesh.
pub const P_SUITE_MESH: usize = 48;
/// Mesh of the d-suite: the 6th h-suite mesh.
pub const D_SUITE_MESH: usize = 192;
pub const DEFAULT_RUNS: usize = 30;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("speed factor needs positive times, got seq {seq} and method {method}")]
    NonPositiveTime { seq: f64, method: f64 },
    #[error("storage factor of an empty pattern is undefined")]
    EmptyPattern,
    #[error("at least one timed run is required")]
    NoRuns,
    #[error("invalid benchmark configuration: {0}")]
    Config(String),
    #[error("could not read mesh {path}: {source}")]
    MeshIo { path: PathBuf, source: io::Error },
    #[error("could not parse mesh {path}: {source}")]
    MeshParse { path: PathBuf, source: MshError },
    #[error("out of memory while building a {nnz}-entry pattern")]
    OutOfMemory { nnz: usize },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Timing options for [`time_assembly`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timing {
    pub runs: usize,
    /// One untimed assembly before the timed runs.
    pub warmup: bool,
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            runs: DEFAULT_RUNS,
            warmup: true,
        }
    }
}

/// Assembles `timing.runs` times and returns each run's duration in
/// microseconds. Values are reset before every run outside the timed region.
pub fn time_assembly<S: ElementSource>(
    job: &AssemblyJob<'_, S>,
    method: Method,
    target: &mut Target,
    timing: Timing,
) -> Result<Vec<f64>, BenchError> {
    if timing.runs == 0 {
        return Err(BenchError::NoRuns);
    }
    if timing.warmup {
        target.reset_values();
        job.run(method, target)?;
    }
    let mut times = Vec::with_capacity(timing.runs);
    for _ in 0..timing.runs {
        target.reset_values();
        let start = Instant::now();
        job.run(method, target)?;
        let elapsed = start.elapsed();
        times.push(elapsed.as_nanos() as f64 / 1e3);
    }
    Ok(times)
}

pub fn t_avg(times: &[f64]) -> f64 {
    times.iter().sum::<f64>() / times.len() as f64
}

pub fn t_min(times: &[f64]) -> f64 {
    times.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `c = t_avg_seq / t_avg_method`.
pub fn speed_factor(t_avg_seq: f64, t_avg_method: f64) -> Result<f64, BenchError> {
    if !(t_avg_seq > 0.0 && t_avg_method > 0.0) {
        return Err(BenchError::NonPositiveTime {
            seq: t_avg_seq,
            method: t_avg_method,
        });
    }
    Ok(t_avg_seq / t_avg_method)
}

/// `γ = len(col_align) / len(cols)` for two layouts of the same pattern.
pub fn storage_factor<R1: RowPointers, R2: RowPointers>(
    crac: &Crac<R1>,
    csr: &Csr<R2>,
) -> Result<f64, BenchError> {
    debug_assert_eq!(crac.nnz(), csr.nnz(), "layouts of different patterns");
    if csr.index_len() == 0 {
        return Err(BenchError::EmptyPattern);
    }
    Ok(crac.index_len() as f64 / csr.index_len() as f64)
}

/// Column index array lengths `(n_ci, n_ca)` of the CSR and CRAC layouts.
pub fn index_lengths(pattern: &SparsityPattern) -> (usize, usize) {
    let crac: Crac = Crac::from_pattern(pattern);
    (pattern.nnz(), crac.index_len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    H,
    P,
    D,
    Single,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::H => "h",
            Suite::P => "p",
            Suite::D => "d",
            Suite::Single => "single",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "h" => Ok(Suite::H),
            "p" => Ok(Suite::P),
            "d" => Ok(Suite::D),
            "single" => Ok(Suite::Single),
            other => Err(format!("unknown suite '{other}' (valid: h, p, d, single)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    /// Unit square with `n × n` elements.
    Structured(usize),
    File(PathBuf),
}

impl MeshSource {
    pub fn label(&self) -> String {
        match self {
            MeshSource::Structured(n) => format!("gen:{n}"),
            MeshSource::File(path) => path.display().to_string(),
        }
    }

    pub fn load(&self) -> Result<Mesh, BenchError> {
        match self {
            MeshSource::Structured(n) => Ok(Mesh::structured(*n)),
            MeshSource::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| BenchError::MeshIo {
                    path: path.clone(),
                    source,
                })?;
                import_msh(&text)
                    .map(|imp| imp.mesh)
                    .map_err(|source| BenchError::MeshParse {
                        path: path.clone(),
                        source,
                    })
            }
        }
    }
}

impl FromStr for MeshSource {
    type Err = String;

    /// `gen:N` for a structured mesh, anything else is a file path.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix("gen:") {
            Some(n) => match n.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(MeshSource::Structured(n)),
                _ => Err(format!("invalid structured mesh size in '{s}'")),
            },
            None => Ok(MeshSource::File(PathBuf::from(s))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub suite: Suite,
    /// Meshes of the h-suite; one mesh for the other suites.
    pub meshes: Vec<MeshSource>,
    /// Order used by the h-, d- and single suites.
    pub p: usize,
    /// DOFs per node used by the h-, p- and single suites.
    pub d: usize,
    pub p_range: RangeInclusive<usize>,
    pub d_range: RangeInclusive<usize>,
    pub methods: Vec<Method>,
    pub formats: Vec<Format>,
    pub timing: Timing,
    pub threads: usize,
}

impl BenchConfig {
    /// Defaults of `suite`: its mesh set, p = d = 1, ranges 1..=8, all methods
    /// and formats.
    pub fn new(suite: Suite) -> Self {
        let meshes = match suite {
            Suite::H => H_SIZES.iter().map(|&n| MeshSource::Structured(n)).collect(),
            Suite::P | Suite::Single => vec![MeshSource::Structured(P_SUITE_MESH)],
            Suite::D => vec![MeshSource::Structured(D_SUITE_MESH)],
        };
        Self {
            suite,
            meshes,
            p: 1,
            d: 1,
            p_range: 1..=8,
            d_range: 1..=8,
            methods: Method::ALL.to_vec(),
            formats: Format::ALL.to_vec(),
            timing: Timing::default(),
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.timing.runs == 0 {
            return fail("runs must be at least 1");
        }
        if self.threads == 0 {
            return fail("threads must be at least 1");
        }
        if self.p == 0 || self.d == 0 || *self.p_range.start() == 0 || *self.d_range.start() == 0 {
            return fail("p and d must be at least 1");
        }
        if self.p_range.is_empty() || self.d_range.is_empty() {
            return fail("empty p or d range");
        }
        if self.methods.is_empty() || self.formats.is_empty() {
            return fail("at least one method and one format are required");
        }
        if self.meshes.is_empty() {
            return fail("no mesh given");
        }
        if self.suite != Suite::H && self.meshes.len() != 1 {
            return fail("only the h-suite takes several meshes");
        }
        Ok(())
    }

    /// Methods in measurement order: sequential first, then the configured
    /// ones without duplicates.
    pub fn measured_methods(&self) -> Vec<Method> {
        let mut methods = vec![Method::Sequential];
        for &m in &self.methods {
            if !methods.contains(&m) {
                methods.push(m);
            }
        }
        methods
    }

    /// `(mesh, p, d)` of every case, in run order.
    pub fn cases(&self) -> Vec<(MeshSource, usize, usize)> {
        match self.suite {
            Suite::H => self
                .meshes
                .iter()
                .map(|m| (m.clone(), self.p, self.d))
                .collect(),
            Suite::P => self
                .p_range
                .clone()
                .map(|p| (self.meshes[0].clone(), p, self.d))
                .collect(),
            Suite::D => self
                .d_range
                .clone()
                .map(|d| (self.meshes[0].clone(), self.p, d))
                .collect(),
            Suite::Single => vec![(self.meshes[0].clone(), self.p, self.d)],
        }
    }
}

/// Timings of one (case, method, format) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub suite: Suite,
    pub mesh: String,
    pub elements: usize,
    pub p: usize,
    pub d: usize,
    pub dofs: usize,
    pub nnz: usize,
    pub method: Method,
    pub format: Format,
    pub threads: usize,
    pub times: Vec<f64>,
    pub t_avg: f64,
    pub t_min: f64,
    /// Speed factor against the sequential run of the same case and format.
    pub c: f64,
    pub gamma: f64,
    pub values_mb: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    /// Cases that could not be run, with the reason.
    pub failures: Vec<(String, String)>,
}

/// Structural description of one benchmark case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseShape {
    pub elements: usize,
    pub dofs: usize,
    pub nnz: usize,
    pub n_ci: usize,
    pub n_ca: usize,
    pub gamma: f64,
    pub values_mb: f64,
}

/// Builds the DOF map and pattern of a case and reports its sizes.
pub fn case_shape(mesh: &Mesh, p: usize, d: usize) -> Result<CaseShape, BenchError> {
    let map = DofMap::build(mesh, p, d);
    let pattern =
        SparsityPattern::try_build(&map).map_err(|nnz| BenchError::OutOfMemory { nnz })?;
    Ok(shape_of(mesh, &map, &pattern))
}

fn shape_of(mesh: &Mesh, map: &DofMap, pattern: &SparsityPattern) -> CaseShape {
    let (n_ci, n_ca) = index_lengths(pattern);
    CaseShape {
        elements: mesh.n_elements(),
        dofs: map.global_dof_count(),
        nnz: pattern.nnz(),
        n_ci,
        n_ca,
        gamma: if n_ci == 0 {
            f64::NAN
        } else {
            n_ca as f64 / n_ci as f64
        },
        values_mb: values_size_mb(pattern.nnz()),
    }
}

/// Runs every case of `config`. A case that fails is recorded in
/// [`BenchReport::failures`] and the remaining cases still run.
pub fn run_suite(config: &BenchConfig) -> Result<BenchReport, BenchError> {
    config.validate()?;
    let workers = Workers::new(config.threads)?;
    let methods = config.measured_methods();
    let mut report = BenchReport::default();
    for (source, p, d) in config.cases() {
        let label = format!("{} p={p} d={d}", source.label());
        match run_case(config, &workers, &methods, &source, p, d) {
            Ok(records) => report.records.extend(records),
            Err(e) => report.failures.push((label, e.to_string())),
        }
    }
    Ok(report)
}

fn run_case(
    config: &BenchConfig,
    workers: &Workers,
    methods: &[Method],
    source: &MeshSource,
    p: usize,
    d: usize,
) -> Result<Vec<BenchRecord>, BenchError> {
    let mesh = source.load()?;
    let map = DofMap::build(&mesh, p, d);
    let pattern =
        SparsityPattern::try_build(&map).map_err(|nnz| BenchError::OutOfMemory { nnz })?;
    let shape = shape_of(&mesh, &map, &pattern);
    let elements = OnesElements::new(&map);
    let colouring = Colouring::greedy(&map);
    let job = AssemblyJob::new(&elements, workers).with_colouring(&colouring)?;

    let mut records = Vec::new();
    for &format in &config.formats {
        let mut seq_avg = None;
        for &method in methods {
            let mut target = Target::for_method(method, format, &pattern);
            let times = time_assembly(&job, method, &mut target, config.timing)?;
            drop(target);
            let avg = t_avg(&times);
            let seq = *seq_avg.get_or_insert(avg);
            records.push(BenchRecord {
                suite: config.suite,
                mesh: source.label(),
                elements: shape.elements,
                p,
                d,
                dofs: shape.dofs,
                nnz: shape.nnz,
                method,
                format,
                threads: if method.is_parallel() {
                    workers.threads()
                } else {
                    1
                },
                t_min: t_min(&times),
                t_avg: avg,
                c: speed_factor(seq, avg).unwrap_or(f64::NAN),
                gamma: shape.gamma,
                values_mb: shape.values_mb,
                times,
            });
        }
    }
    Ok(records)
}

pub const RAW_HEADER: [&str; 12] = [
    "suite", "mesh", "n", "p", "d", "dofs", "nnz", "method", "format", "threads", "run", "micros",
];

pub const SUMMARY_HEADER: [&str; 15] = [
    "suite",
    "mesh",
    "n",
    "p",
    "d",
    "dofs",
    "nnz",
    "method",
    "format",
    "threads",
    "t_avg",
    "t_min",
    "c",
    "gamma",
    "values_mb",
];

impl BenchRecord {
    fn key_fields(&self) -> [String; 10] {
        [
            self.suite.to_string(),
            self.mesh.clone(),
            self.elements.to_string(),
            self.p.to_string(),
            self.d.to_string(),
            self.dofs.to_string(),
            self.nnz.to_string(),
            self.method.to_string(),
            self.format.to_string(),
            self.threads.to_string(),
        ]
    }
}

impl BenchReport {
    /// One row per timed run.
    pub fn write_raw_csv<W: io::Write>(&self, out: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RAW_HEADER)?;
        for rec in &self.records {
            for (i, t) in rec.times.iter().enumerate() {
                let mut row = rec.key_fields().to_vec();
                row.push((i + 1).to_string());
                row.push(format!("{t:.3}"));
                w.write_record(&row)?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// One row per (case, method, format).
    pub fn write_summary_csv<W: io::Write>(&self, out: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SUMMARY_HEADER)?;
        for rec in &self.records {
            let mut row = rec.key_fields().to_vec();
            row.push(format!("{:.3}", rec.t_avg));
            row.push(format!("{:.3}", rec.t_min));
            row.push(format!("{:.4}", rec.c));
            row.push(format!("{:.6}", rec.gamma));
            row.push(format!("{:.6}", rec.values_mb));
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Fixed-width summary for terminals.
    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<6} {:<12} {:>2} {:>2} {:>9} {:>10} {:<10} {:<5} {:>3} {:>12} {:>12} {:>7} {:>7}",
            "suite",
            "mesh",
            "p",
            "d",
            "dofs",
            "nnz",
            "method",
            "fmt",
            "thr",
            "t_avg[us]",
            "t_min[us]",
            "c",
            "gamma"
        );
        for r in &self.records {
            let _ = writeln!(
                s,
                "{:<6} {:<12} {:>2} {:>2} {:>9} {:>10} {:<10} {:<5} {:>3} {:>12.1} {:>12.1} {:>7.3} {:>7.4}",
                r.suite.name(),
                r.mesh,
                r.p,
                r.d,
                r.dofs,
                r.nnz,
                r.method.name(),
                r.format.name(),
                r.threads,
                r.t_avg,
                r.t_min,
                r.c,
                r.gamma
            );
        }
        for (case, reason) in &self.failures {
            let _ = writeln!(s, "FAILED {case}: {reason}");
        }
        s
    }
}
