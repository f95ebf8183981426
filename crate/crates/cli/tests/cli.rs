use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use crac::mesh::msh::import_msh;
use crac::Mesh;

fn crac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crac"))
        .args(args)
        .env_remove("CRAC_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn gen_mesh_writes_structured_counts_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.msh");
    let out = crac(&["gen-mesh", "--n", "6", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let imported = import_msh(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(imported.mesh.n_vertices(), 49);
    assert_eq!(imported.mesh.n_elements(), 36);
    assert!(imported.warnings.is_empty());
    assert_eq!(imported.mesh, Mesh::structured(6));
}

#[test]
fn gen_mesh_rejects_zero() {
    let out = crac(&["gen-mesh", "--n", "0", "--out", "unused.msh"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_mesh_unwritable_path_is_runtime_error() {
    let out = crac(&["gen-mesh", "--n", "2", "--out", "/nonexistent/dir/m.msh"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_method_lists_valid_names() {
    let out = crac(&["bench", "--methods", "seq,fast"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    for name in ["seq", "atomic", "spin", "spin-vec", "colour-vec"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn conflicting_suite_flags_are_usage_errors() {
    assert_eq!(
        crac(&["bench", "--suite", "p", "--p", "2"]).status.code(),
        Some(1)
    );
    assert_eq!(
        crac(&["bench", "--suite", "d", "--d", "2"]).status.code(),
        Some(1)
    );
    let two_meshes = [
        "bench", "--suite", "p", "--mesh", "gen:2", "--mesh", "gen:3",
    ];
    assert_eq!(crac(&two_meshes).status.code(), Some(1));
}

#[test]
fn help_mentions_method_abbreviations() {
    let out = crac(&["bench", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    let help = stdout(&out);
    for abbr in ["Atc", "Sp", "Sp_vec", "Col_vec"] {
        assert!(help.contains(abbr), "{help}");
    }
}

#[test]
fn h_suite_has_one_row_per_mesh_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = crac(&[
        "bench",
        "--suite",
        "h",
        "--d",
        "1",
        "--methods",
        "seq,spin",
        "--formats",
        "csr",
        "--runs",
        "5",
        "--threads",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = csv_rows(&dir.path().join("bench_h_summary.csv"));
    assert_eq!(summary.len(), 8 * 2);
    let sizes: Vec<&str> = summary.iter().step_by(2).map(|r| r[2].as_str()).collect();
    let expected: Vec<String> = [6, 12, 24, 48, 96, 192, 384, 768]
        .iter()
        .map(|n| (n * n).to_string())
        .collect();
    assert_eq!(sizes, expected);
    assert_eq!(summary.last().unwrap()[6], "5313025");
    let raw = csv_rows(&dir.path().join("bench_h_raw.csv"));
    assert_eq!(raw.len(), 8 * 2 * 5);
}

#[test]
fn d_suite_iterates_d() {
    let dir = tempfile::tempdir().unwrap();
    let out = crac(&[
        "bench",
        "--suite",
        "d",
        "--mesh",
        "gen:192",
        "--methods",
        "seq",
        "--formats",
        "crac",
        "--runs",
        "1",
        "--no-warmup",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = csv_rows(&dir.path().join("bench_d_summary.csv"));
    let ds: Vec<&str> = summary.iter().map(|r| r[4].as_str()).collect();
    assert_eq!(ds, ["1", "2", "3", "4", "5", "6", "7", "8"]);
    assert_eq!(summary[7][6], "21307456");
}

#[test]
fn bench_csv_is_deterministic_apart_from_timings() {
    let strip = |path: &Path| -> Vec<Vec<String>> {
        csv_rows(path)
            .into_iter()
            .map(|mut r| {
                // t_avg, t_min, c
                r.drain(10..13);
                r
            })
            .collect()
    };
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let out = crac(&[
            "bench",
            "--suite",
            "p",
            "--mesh",
            "gen:4",
            "--runs",
            "2",
            "--threads",
            "2",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        runs.push(strip(&dir.path().join("bench_p_summary.csv")));
    }
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0].len(), 8 * 5 * 2);
}

#[test]
fn verify_structured_d4_with_8_threads() {
    let out = crac(&["verify", "--mesh", "gen:16", "--d", "4", "--threads", "8"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn verify_single_element() {
    let out = crac(&["verify", "--mesh", "gen:1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn verify_reports_corrupted_slot() {
    let out = crac(&[
        "verify",
        "--mesh",
        "gen:3",
        "--threads",
        "2",
        "--corrupt",
        "atomic,csr,0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(
        err.contains("atomic     csr   threads=2   MISMATCH"),
        "{err}"
    );
    assert!(err.contains("(0, 0): expected 1 got 2"), "{err}");
}

#[test]
fn thread_count_from_environment_unless_flag_given() {
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_crac"));
        cmd.args(["assemble", "--mesh", "gen:3", "--method", "spin"]);
        if let Some(t) = flag {
            cmd.args(["--threads", t]);
        }
        match env {
            Some(v) => cmd.env("CRAC_THREADS", v),
            None => cmd.env_remove("CRAC_THREADS"),
        };
        stdout(&cmd.output().unwrap())
    };
    assert!(run(Some("3"), None).contains("threads 3"));
    assert!(run(Some("3"), Some("2")).contains("threads 2"));
}

#[test]
fn assemble_writes_matrix_market() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.mtx");
    let out = crac(&[
        "assemble",
        "--mesh",
        "gen:2",
        "--method",
        "colour-vec",
        "--format",
        "crac",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("%%MatrixMarket matrix coordinate real general")
    );
    assert_eq!(lines.next(), Some("9 9 49"));
    // centre vertex touches all four elements
    assert!(text.lines().any(|l| l == "5 5 4e0"));
}

#[test]
fn colour_reports_even_split() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let out = crac(&["colour", "--mesh", "gen:6", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("36 elements, 4 colours"));
    assert_eq!(text.matches("25.00%").count(), 4);
    assert_eq!(csv_rows(&path).len(), 36);
}

#[test]
fn missing_mesh_file_is_runtime_error() {
    let out = crac(&["verify", "--mesh", "/nonexistent.msh"]);
    assert_eq!(out.status.code(), Some(3));
}
