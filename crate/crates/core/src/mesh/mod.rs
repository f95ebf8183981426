//! Quadrilateral meshes and the element-to-global DOF maps built on them.
//!
//! A [`Mesh`] is either generated on the unit square ([`Mesh::structured`]) or
//! read from a Gmsh MSH 2.2 file ([`msh::import_msh`]). Higher polynomial
//! orders and several DOFs per node are layered on top by [`DofMap`].

mod dofs;
pub mod msh;

pub use dofs::{decode_runs, encode_runs, DofMap, ElementDofs, ElementMatrix};

use thiserror::Error;

/// Errors raised while constructing a mesh from raw parts.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MeshError {
    #[error("element {element} references vertex {vertex}, but the mesh has only {n_nodes} nodes")]
    VertexOutOfRange {
        element: usize,
        vertex: usize,
        n_nodes: usize,
    },
    #[error("element {element} repeats vertex {vertex}")]
    DegenerateElement { element: usize, vertex: usize },
}

/// A 2D mesh of four-node quadrilaterals.
///
/// Elements list their vertices counter-clockwise. Edges are stored once each
/// as `[min, max]` vertex pairs, sorted lexicographically; that order is the
/// global edge numbering used by [`DofMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 4]>,
    edges: Vec<[usize; 2]>,
}

impl Mesh {
    pub fn new(nodes: Vec<[f64; 2]>, elements: Vec<[usize; 4]>) -> Result<Self, MeshError> {
        let n_nodes = nodes.len();
        for (e, quad) in elements.iter().enumerate() {
            for (i, &v) in quad.iter().enumerate() {
                if v >= n_nodes {
                    return Err(MeshError::VertexOutOfRange {
                        element: e,
                        vertex: v,
                        n_nodes,
                    });
                }
                if quad[..i].contains(&v) {
                    return Err(MeshError::DegenerateElement {
                        element: e,
                        vertex: v,
                    });
                }
            }
        }
        let edges = collect_edges(&elements);
        Ok(Self {
            nodes,
            elements,
            edges,
        })
    }

    /// Unit square split into `n × n` axis-aligned quads.
    ///
    /// Vertex `(i, j)` (column `i`, row `j`) gets index `j·(n+1) + i` and
    /// element `(i, j)` gets index `j·n + i`.
    pub fn structured(n: usize) -> Self {
        assert!(
            n >= 1,
            "a structured mesh needs at least one element per side"
        );
        let side = n + 1;
        let h = n as f64;
        let mut nodes = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                nodes.push([i as f64 / h, j as f64 / h]);
            }
        }
        let mut elements = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let v = j * side + i;
                elements.push([v, v + 1, v + side + 1, v + side]);
            }
        }
        let edges = collect_edges(&elements);
        Self {
            nodes,
            elements,
            edges,
        }
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn n_vertices(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Global index of the edge joining `a` and `b`, in either direction.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = [a.min(b), a.max(b)];
        self.edges.binary_search(&key).ok()
    }
}

fn collect_edges(elements: &[[usize; 4]]) -> Vec<[usize; 2]> {
    let mut edges: Vec<[usize; 2]> = elements
        .iter()
        .flat_map(|q| (0..4).map(move |k| (q[k], q[(k + 1) % 4])))
        .map(|(a, b)| [a.min(b), a.max(b)])
        .collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}
