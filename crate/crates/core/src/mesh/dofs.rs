use super::Mesh;

/// Global node and DOF numbering for a mesh at polynomial order `p` with `d`
/// DOFs per node.
///
/// Nodes are numbered vertices first, then the `p − 1` nodes of every edge
/// (consecutive per edge, edges in global edge order), then the `(p − 1)²`
/// interior nodes of every element. Node `v` owns the DOFs `v·d .. v·d + d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    order: usize,
    dofs_per_node: usize,
    n_vertices: usize,
    n_edges: usize,
    n_elements: usize,
    nodes_per_element: usize,
    element_nodes: Vec<usize>,
}

impl DofMap {
    /// Numbers the nodes of `mesh` for order `p` and `d` DOFs per node.
    ///
    /// Each element lists its nodes as: the 4 vertices, then the edge nodes of
    /// its local edges `(v0,v1), (v1,v2), (v2,v3), (v3,v0)` running from the
    /// lower to the higher global vertex, then its interior nodes row-major.
    pub fn build(mesh: &Mesh, p: usize, d: usize) -> Self {
        assert!(p >= 1, "polynomial order must be at least 1");
        assert!(d >= 1, "at least one DOF per node is required");
        let n_vertices = mesh.n_vertices();
        let n_edges = mesh.n_edges();
        let n_elements = mesh.n_elements();
        let inner = p - 1;
        let nodes_per_element = (p + 1) * (p + 1);
        let edge_base = n_vertices;
        let interior_base = n_vertices + n_edges * inner;

        let mut element_nodes = Vec::with_capacity(n_elements * nodes_per_element);
        for (e, quad) in mesh.elements().iter().enumerate() {
            element_nodes.extend_from_slice(quad);
            for k in 0..4 {
                let edge = mesh
                    .edge_index(quad[k], quad[(k + 1) % 4])
                    .expect("element edge missing from edge table");
                let first = edge_base + edge * inner;
                element_nodes.extend(first..first + inner);
            }
            let first = interior_base + e * inner * inner;
            element_nodes.extend(first..first + inner * inner);
        }

        Self {
            order: p,
            dofs_per_node: d,
            n_vertices,
            n_edges,
            n_elements,
            nodes_per_element,
            element_nodes,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dofs_per_node(&self) -> usize {
        self.dofs_per_node
    }

    pub fn nodes_per_element(&self) -> usize {
        self.nodes_per_element
    }

    /// DOFs per element, `d·(p+1)²`.
    pub fn element_dof_count(&self) -> usize {
        self.dofs_per_node * self.nodes_per_element
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn node_count(&self) -> usize {
        let inner = self.order - 1;
        self.n_vertices + self.n_edges * inner + self.n_elements * inner * inner
    }

    pub fn global_dof_count(&self) -> usize {
        self.dofs_per_node * self.node_count()
    }

    pub fn element_nodes(&self, element: usize) -> &[usize] {
        let start = element * self.nodes_per_element;
        &self.element_nodes[start..start + self.nodes_per_element]
    }

    pub fn dof(&self, node: usize, component: usize) -> usize {
        debug_assert!(component < self.dofs_per_node);
        node * self.dofs_per_node + component
    }

    pub fn element_dofs(&self, element: usize) -> ElementDofs {
        let d = self.dofs_per_node;
        let flat = self
            .element_nodes(element)
            .iter()
            .flat_map(|&v| v * d..v * d + d)
            .collect();
        ElementDofs::from_flat(flat)
    }

    pub fn all_element_dofs(&self) -> Vec<ElementDofs> {
        (0..self.n_elements).map(|e| self.element_dofs(e)).collect()
    }

    /// The dummy element stiffness matrix: all ones, sized to the element DOFs.
    pub fn ones_element_matrix(&self) -> ElementMatrix {
        ElementMatrix::ones(self.element_dof_count())
    }
}

/// The global DOF indices of one element, kept both flat and as maximal runs
/// of consecutive indices `(start, length)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementDofs {
    flat: Vec<usize>,
    runs: Vec<(usize, usize)>,
}

impl ElementDofs {
    pub fn from_flat(flat: Vec<usize>) -> Self {
        let runs = encode_runs(&flat);
        Self { flat, runs }
    }

    pub fn flat(&self) -> &[usize] {
        &self.flat
    }

    pub fn runs(&self) -> &[(usize, usize)] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }
}

/// Run-length encodes a DOF array into maximal `(start, length)` runs.
pub fn encode_runs(flat: &[usize]) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for &dof in flat {
        match runs.last_mut() {
            Some((start, len)) if *start + *len == dof => *len += 1,
            _ => runs.push((dof, 1)),
        }
    }
    runs
}

pub fn decode_runs(runs: &[(usize, usize)]) -> Vec<usize> {
    runs.iter().flat_map(|&(s, l)| s..s + l).collect()
}

/// Dense square element matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMatrix {
    order: usize,
    values: Vec<f64>,
}

impl ElementMatrix {
    pub fn ones(order: usize) -> Self {
        Self {
            order,
            values: vec![1.0; order * order],
        }
    }

    /// Returns `None` when `values.len() != order²`.
    pub fn from_row_major(order: usize, values: Vec<f64>) -> Option<Self> {
        (values.len() == order * order).then_some(Self { order, values })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.order..(r + 1) * self.order]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.order + c]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}
