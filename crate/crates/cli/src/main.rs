use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

use crac::bench::{self, BenchConfig, MeshSource, Suite, Timing};
use crac::verify::{self, Fault};
use crac::{Colouring, DofMap, Format, Mesh, Method, OnesElements, Workers};

const METHOD_HELP: &str = "Assembly methods: seq (sequential), atomic (Atc), spin (Sp), \
spin-vec (Sp_vec), colour-vec (Col_vec)";

#[derive(Debug, Parser)]
#[command(
    name = "crac",
    version,
    about = "Parallel finite element matrix assembly into CSR and CRAC storage"
)]
#[command(after_help = METHOD_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a structured n×n quadrilateral mesh of the unit square
    GenMesh {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy element colouring and its colour distribution
    Colour {
        #[command(flatten)]
        case: CaseArgs,
        /// CSV file receiving element_id,colour rows
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble once with one method and check the result against sequential CSR
    #[command(after_help = METHOD_HELP)]
    Assemble {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value = "seq")]
        method: Method,
        #[arg(long, default_value = "crac")]
        format: Format,
        #[command(flatten)]
        threads: ThreadArgs,
        /// Matrix Market file receiving the assembled matrix
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark suite and write raw and summary CSV files
    #[command(after_help = METHOD_HELP)]
    Bench(BenchArgs),
    /// Assemble with every method and format and require identical results
    Verify {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        threads: ThreadArgs,
        /// Corrupt one assembled value before comparison: METHOD,FORMAT,POSITION
        #[arg(long, hide = true)]
        corrupt: Option<String>,
    },
}

#[derive(Debug, Args)]
struct CaseArgs {
    /// Mesh file (MSH 2.2) or gen:N for a structured mesh
    #[arg(long, default_value = "gen:6")]
    mesh: MeshSource,
    /// Polynomial order
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    p: u64,
    /// DOFs per node
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    d: u64,
}

#[derive(Debug, Args)]
struct ThreadArgs {
    /// Worker threads [default: all available]
    #[arg(long, env = "CRAC_THREADS", value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
}

impl ThreadArgs {
    fn count(&self) -> usize {
        self.threads
            .map(|t| t as usize)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// h: mesh refinement, p: order 1..8, d: DOFs per node 1..8, single: one case
    #[arg(long, default_value = "single")]
    suite: Suite,
    /// Mesh file or gen:N; repeat for several h-suite meshes
    #[arg(long)]
    mesh: Vec<MeshSource>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    p: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    d: Option<u64>,
    /// Comma-separated methods; seq is always measured as the baseline
    #[arg(long, value_delimiter = ',')]
    methods: Vec<Method>,
    /// Comma-separated formats (csr, crac)
    #[arg(long, value_delimiter = ',')]
    formats: Vec<Format>,
    #[arg(long, default_value_t = bench::DEFAULT_RUNS as u64, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    /// Skip the untimed warm-up assembly
    #[arg(long)]
    no_warmup: bool,
    #[command(flatten)]
    threads: ThreadArgs,
    /// Directory receiving bench_<suite>_raw.csv and bench_<suite>_summary.csv
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

enum Failure {
    Usage(clap::Error),
    Verification(String),
    Runtime(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => return usage_exit(e),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => usage_exit(e),
        Err(Failure::Verification(report)) => {
            eprint!("{report}");
            eprintln!("verification failed");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn usage_exit(e: clap::Error) -> ExitCode {
    let _ = e.print();
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
        _ => ExitCode::from(1),
    }
}

fn usage(message: impl std::fmt::Display) -> Failure {
    Failure::Usage(Cli::command().error(ErrorKind::ArgumentConflict, message))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::GenMesh { n, out } => {
            let mesh = Mesh::structured(n as usize);
            fs::write(&out, crac::mesh::msh::write_msh(&mesh))
                .map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
            println!(
                "wrote {} nodes, {} quads to {}",
                mesh.n_vertices(),
                mesh.n_elements(),
                out.display()
            );
            Ok(())
        }
        Command::Colour { case, out } => {
            let map = case.dof_map()?;
            let colouring = Colouring::greedy(&map);
            println!(
                "{} elements, {} colours",
                colouring.n_elements(),
                colouring.n_colours()
            );
            for (colour, share) in colouring.distribution() {
                println!("colour {colour}: {:.2}%", share * 100.0);
            }
            if let Some(path) = out {
                colouring.write_csv(create(&path)?)?;
            }
            Ok(())
        }
        Command::Assemble {
            case,
            method,
            format,
            threads,
            out,
        } => {
            let map = case.dof_map()?;
            let elements = OnesElements::new(&map);
            let workers = Workers::new(threads.count())?;
            let (target, check) = verify::assemble_checked(
                &map,
                &elements,
                elements.total_weight(),
                method,
                format,
                &workers,
            )?;
            println!(
                "{} into {}: {} rows, nnz {}, threads {}",
                method,
                format,
                map.global_dof_count(),
                target.nnz(),
                check.threads
            );
            if let Some(path) = out {
                let mut w = create(&path)?;
                target.write_matrix_market(&mut w)?;
                w.flush()?;
            }
            if check.passed() {
                println!("matches sequential csr");
                Ok(())
            } else {
                let report = verify::VerifyReport {
                    checks: vec![check],
                };
                Err(Failure::Verification(report.to_string()))
            }
        }
        Command::Bench(args) => run_bench(args),
        Command::Verify {
            case,
            threads,
            corrupt,
        } => {
            let fault = corrupt.as_deref().map(parse_fault).transpose()?;
            let map = case.dof_map()?;
            let elements = OnesElements::new(&map);
            let mut counts = vec![1, threads.count()];
            counts.dedup();
            let report =
                verify::verify_methods(&map, &elements, elements.total_weight(), &counts, fault)?;
            if report.passed() {
                print!("{report}");
                println!("all methods agree");
                Ok(())
            } else {
                Err(Failure::Verification(report.to_string()))
            }
        }
    }
}

impl CaseArgs {
    fn dof_map(&self) -> Result<DofMap, Failure> {
        let mesh = self.mesh.load()?;
        Ok(DofMap::build(&mesh, self.p as usize, self.d as usize))
    }
}

fn parse_fault(arg: &str) -> Result<Fault, Failure> {
    let parts: Vec<&str> = arg.split(',').collect();
    let [method, format, position] = parts[..] else {
        return Err(usage("--corrupt expects METHOD,FORMAT,POSITION"));
    };
    Ok(Fault {
        method: method.parse().map_err(usage)?,
        format: format.parse().map_err(usage)?,
        position: position.parse().map_err(usage)?,
        delta: 1.0,
    })
}

fn run_bench(args: BenchArgs) -> Result<(), Failure> {
    match (args.suite, args.p, args.d) {
        (Suite::P, Some(_), _) => return Err(usage("--p cannot be combined with --suite p")),
        (Suite::D, _, Some(_)) => return Err(usage("--d cannot be combined with --suite d")),
        _ => {}
    }
    if args.suite != Suite::H && args.mesh.len() > 1 {
        return Err(usage("only --suite h accepts several --mesh values"));
    }
    let mut config = BenchConfig::new(args.suite);
    if !args.mesh.is_empty() {
        config.meshes = args.mesh;
    }
    if let Some(p) = args.p {
        config.p = p as usize;
    }
    if let Some(d) = args.d {
        config.d = d as usize;
    }
    if !args.methods.is_empty() {
        config.methods = args.methods;
    }
    if !args.formats.is_empty() {
        config.formats = args.formats;
    }
    config.timing = Timing {
        runs: args.runs as usize,
        warmup: !args.no_warmup,
    };
    config.threads = args.threads.count();
    config.validate().map_err(usage)?;

    let report = bench::run_suite(&config)?;
    print!("{}", report.summary_table());

    fs::create_dir_all(&args.out)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", args.out.display())))?;
    let raw = args.out.join(format!("bench_{}_raw.csv", config.suite));
    let summary = args.out.join(format!("bench_{}_summary.csv", config.suite));
    report.write_raw_csv(create(&raw)?)?;
    report.write_summary_csv(create(&summary)?)?;
    println!("wrote {} and {}", raw.display(), summary.display());
    if report.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!(
            "{} case(s) failed",
            report.failures.len()
        )))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}
