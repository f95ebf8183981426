//! Reader and writer for the ASCII Gmsh MSH 2.2 subset used by the benchmarks.
//!
//! Only `$MeshFormat`, `$Nodes` and `$Elements` are interpreted; other sections
//! are skipped. Four-node quads (type 3) become mesh elements, points and lines
//! are ignored silently, triangles are dropped with a warning and anything else
//! is rejected.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{Mesh, MeshError};

const QUAD4: u32 = 3;
const TRIANGLE3: u32 = 2;
const LINE2: u32 = 1;
const POINT: u32 = 15;

#[derive(Debug, Error, PartialEq)]
pub enum MshError {
    #[error("missing or malformed $MeshFormat header: {0}")]
    MalformedHeader(String),
    #[error("unsupported MSH version {0} (expected 2.2 ASCII)")]
    UnsupportedVersion(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("section {0} ended early or is missing its end marker")]
    Truncated(&'static str),
    #[error("missing ${0} section")]
    MissingSection(&'static str),
    #[error("element {element} has unsupported type {kind}; only quads (3) are accepted")]
    UnsupportedElement { element: u64, kind: u32 },
    #[error("element {element} references undefined node {node}")]
    DanglingNode { element: u64, node: u64 },
    #[error("duplicate node tag {0}")]
    DuplicateNode(u64),
    #[error("the file contains no quadrilateral elements")]
    NoQuads,
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// A mesh read from an MSH file together with any non-fatal diagnostics.
#[derive(Debug, Clone)]
pub struct MshImport {
    pub mesh: Mesh,
    pub warnings: Vec<String>,
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_nonempty(&mut self) -> Option<(usize, &'a str)> {
        self.inner
            .by_ref()
            .map(|(i, l)| (i + 1, l.trim()))
            .find(|(_, l)| !l.is_empty())
    }
}

fn syntax(line: usize, message: impl Into<String>) -> MshError {
    MshError::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(
    tok: Option<&str>,
    line: usize,
    what: &str,
) -> Result<T, MshError> {
    let tok = tok.ok_or_else(|| syntax(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| syntax(line, format!("invalid {what} '{tok}'")))
}

/// Parses MSH 2.2 ASCII text into a quad mesh.
///
/// Node tags are remapped to dense 0-based indices in file order. Quads with
/// clockwise vertex order are flipped (and reported in the warnings).
pub fn import_msh(text: &str) -> Result<MshImport, MshError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let mut warnings = Vec::new();

    match lines.next_nonempty() {
        Some((_, "$MeshFormat")) => {}
        Some((_, other)) => return Err(MshError::MalformedHeader(other.to_string())),
        None => return Err(MshError::MalformedHeader("empty input".into())),
    }
    let (_, header) = lines
        .next_nonempty()
        .ok_or_else(|| MshError::MalformedHeader("missing version line".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(MshError::MalformedHeader(header.to_string()));
    }
    if !fields[0].starts_with("2.2") || fields[1] != "0" {
        return Err(MshError::UnsupportedVersion(header.to_string()));
    }
    match lines.next_nonempty() {
        Some((_, "$EndMeshFormat")) => {}
        _ => return Err(MshError::MalformedHeader("missing $EndMeshFormat".into())),
    }

    let mut nodes: Option<NodeTable> = None;
    let mut quads: Option<Vec<(u64, [u64; 4])>> = None;

    while let Some((line, tok)) = lines.next_nonempty() {
        match tok {
            "$Nodes" => nodes = Some(read_nodes(&mut lines)?),
            "$Elements" => quads = Some(read_elements(&mut lines, &mut warnings)?),
            s if s.starts_with('$') && !s.starts_with("$End") => {
                let end = format!("$End{}", &s[1..]);
                loop {
                    match lines.next_nonempty() {
                        Some((_, l)) if l == end => break,
                        Some(_) => {}
                        None => return Err(syntax(line, format!("unterminated section {s}"))),
                    }
                }
            }
            other => return Err(syntax(line, format!("unexpected content '{other}'"))),
        }
    }

    let (coords, tag_index) = nodes.ok_or(MshError::MissingSection("Nodes"))?;
    let quads = quads.ok_or(MshError::MissingSection("Elements"))?;
    if quads.is_empty() {
        return Err(MshError::NoQuads);
    }

    let mut elements = Vec::with_capacity(quads.len());
    for (tag, vertex_tags) in quads {
        let mut quad = [0usize; 4];
        for (slot, node) in quad.iter_mut().zip(vertex_tags) {
            *slot = *tag_index
                .get(&node)
                .ok_or(MshError::DanglingNode { element: tag, node })?;
        }
        if signed_area(&coords, &quad) < 0.0 {
            quad.reverse();
            warnings.push(format!(
                "element {tag} was clockwise; vertex order reversed"
            ));
        }
        elements.push(quad);
    }

    Ok(MshImport {
        mesh: Mesh::new(coords, elements)?,
        warnings,
    })
}

/// Coordinates in file order and the file tag to index map.
type NodeTable = (Vec<[f64; 2]>, HashMap<u64, usize>);

fn read_nodes(lines: &mut Lines<'_>) -> Result<NodeTable, MshError> {
    let (line, count) = lines.next_nonempty().ok_or(MshError::Truncated("$Nodes"))?;
    let count: usize = parse_num(Some(count), line, "node count")?;
    let mut coords = Vec::with_capacity(count);
    let mut tags = HashMap::with_capacity(count);
    for _ in 0..count {
        let (line, text) = lines.next_nonempty().ok_or(MshError::Truncated("$Nodes"))?;
        if text == "$EndNodes" {
            return Err(MshError::Truncated("$Nodes"));
        }
        let mut it = text.split_whitespace();
        let tag: u64 = parse_num(it.next(), line, "node tag")?;
        let x: f64 = parse_num(it.next(), line, "x coordinate")?;
        let y: f64 = parse_num(it.next(), line, "y coordinate")?;
        let _z: f64 = parse_num(it.next(), line, "z coordinate")?;
        if tags.insert(tag, coords.len()).is_some() {
            return Err(MshError::DuplicateNode(tag));
        }
        coords.push([x, y]);
    }
    match lines.next_nonempty() {
        Some((_, "$EndNodes")) => Ok((coords, tags)),
        _ => Err(MshError::Truncated("$Nodes")),
    }
}

fn read_elements(
    lines: &mut Lines<'_>,
    warnings: &mut Vec<String>,
) -> Result<Vec<(u64, [u64; 4])>, MshError> {
    let (line, count) = lines
        .next_nonempty()
        .ok_or(MshError::Truncated("$Elements"))?;
    let count: usize = parse_num(Some(count), line, "element count")?;
    let mut quads = Vec::with_capacity(count);
    let mut skipped_triangles = 0usize;
    for _ in 0..count {
        let (line, text) = lines
            .next_nonempty()
            .ok_or(MshError::Truncated("$Elements"))?;
        if text == "$EndElements" {
            return Err(MshError::Truncated("$Elements"));
        }
        let mut it = text.split_whitespace();
        let tag: u64 = parse_num(it.next(), line, "element tag")?;
        let kind: u32 = parse_num(it.next(), line, "element type")?;
        let n_tags: usize = parse_num(it.next(), line, "tag count")?;
        for _ in 0..n_tags {
            let _: i64 = parse_num(it.next(), line, "element tag value")?;
        }
        match kind {
            QUAD4 => {
                let mut q = [0u64; 4];
                for v in q.iter_mut() {
                    *v = parse_num(it.next(), line, "quad node")?;
                }
                quads.push((tag, q));
            }
            TRIANGLE3 => skipped_triangles += 1,
            LINE2 | POINT => {}
            other => {
                return Err(MshError::UnsupportedElement {
                    element: tag,
                    kind: other,
                })
            }
        }
    }
    match lines.next_nonempty() {
        Some((_, "$EndElements")) => {}
        _ => return Err(MshError::Truncated("$Elements")),
    }
    if skipped_triangles > 0 {
        warnings.push(format!("skipped {skipped_triangles} triangle element(s)"));
    }
    Ok(quads)
}

fn signed_area(coords: &[[f64; 2]], quad: &[usize; 4]) -> f64 {
    (0..4)
        .map(|k| {
            let a = coords[quad[k]];
            let b = coords[quad[(k + 1) % 4]];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Serializes a mesh as MSH 2.2 ASCII with 1-based node and element tags.
pub fn write_msh(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(out, "{}", mesh.n_vertices());
    for (i, [x, y]) in mesh.nodes().iter().enumerate() {
        let _ = writeln!(out, "{} {x:?} {y:?} 0", i + 1);
    }
    out.push_str("$EndNodes\n$Elements\n");
    let _ = writeln!(out, "{}", mesh.n_elements());
    for (e, q) in mesh.elements().iter().enumerate() {
        let _ = writeln!(
            out,
            "{} {QUAD4} 2 0 1 {} {} {} {}",
            e + 1,
            q[0] + 1,
            q[1] + 1,
            q[2] + 1,
            q[3] + 1
        );
    }
    out.push_str("$EndElements\n");
    out
}
