//! Cartesian spectral-cell grid: per-cell classification, a global C⁰ DOF
//! numbering over shared GLL node lattices, and field evaluation at arbitrary
//! physical points.
//!
//! Cells are axis-aligned boxes of uniform spacing per axis. Each cell carries
//! a tensor-product Lagrange basis of degree p on GLL nodes; neighboring cells
//! share the nodes on their common face, which makes the discrete field
//! continuous by construction. Nodes supported exclusively by discarded
//! (empty) cells are dropped, and the remaining lattice nodes are numbered
//! lexicographically (x fastest), which keeps assembled matrices banded.

use crate::cutcell::{classify_cell, CellClass, CellKind};
use crate::error::WaveError;
use crate::geometry::{AxisBox, ImplicitDomain, Point};
use crate::quadrature::ShapeSet;

/// Cartesian grid of spectral cells over an embedding box.
#[derive(Debug)]
pub struct SpectralMesh {
    pub extent: AxisBox,
    /// The immersed geometry the grid was classified against (kept for
    /// α-weighted quadrature during assembly).
    pub domain: ImplicitDomain,
    pub dim: usize,
    pub p: usize,
    pub tree_depth: u32,
    pub eps: f64,
    /// Cells per axis (trailing axes 1 below `dim`).
    pub cells_per_axis: [usize; 3],
    /// Cell spacing per axis.
    pub h: [f64; 3],
    /// Classification per cell, lexicographic cell order (x fastest).
    pub classes: Vec<CellClass>,
    /// Lattice nodes per axis (`cells · p + 1`).
    pub nodes_per_axis: [usize; 3],
    /// Lattice node → retained DOF index (None for dropped nodes).
    pub dof_of_node: Vec<Option<usize>>,
    /// Total retained DOFs.
    pub n_dof: usize,
    shape: ShapeSet,
    /// 1D GLL reference nodes (cached from the shape set).
    ref_nodes: Vec<f64>,
}

/// Split of the retained DOFs into explicit (diagonal-mass) and implicit
/// (cut-coupled) index sets.
#[derive(Debug, Clone)]
pub struct DofPartition {
    /// DOFs supported by uncut cells only (sorted ascending).
    pub i_d: Vec<usize>,
    /// DOFs supported by at least one cut cell (sorted ascending).
    pub i_c: Vec<usize>,
    /// Global DOF → position within `i_c` (None for I_d members).
    pub c_pos: Vec<Option<usize>>,
}

impl DofPartition {
    pub fn n_total(&self) -> usize {
        self.i_d.len() + self.i_c.len()
    }

    pub fn is_cut_dof(&self, dof: usize) -> bool {
        self.c_pos[dof].is_some()
    }
}

/// Cached evaluation of the basis at one fixed physical point: the containing
/// cell's retained DOFs and the shape values there. Receivers are evaluated
/// every time step, so the lookup work is done once.
#[derive(Debug, Clone)]
pub struct FieldProbe {
    pub cell: usize,
    /// (global DOF, shape value) pairs; dropped nodes are skipped (their
    /// coefficients are treated as zero).
    pub terms: Vec<(usize, f64)>,
}

impl FieldProbe {
    pub fn eval(&self, u: &[f64]) -> f64 {
        self.terms.iter().map(|&(dof, n)| n * u[dof]).sum()
    }
}

/// Build the mesh: classify every cell against the domain and number the
/// retained DOFs deterministically (lexicographic by node coordinate).
pub fn build_mesh(
    extent: AxisBox,
    cells_per_axis: [usize; 3],
    dim: usize,
    p: usize,
    domain: &ImplicitDomain,
    tree_depth: u32,
    eps: f64,
) -> Result<SpectralMesh, WaveError> {
    assert!((1..=3).contains(&dim));
    assert!(p >= 1, "polynomial degree must be >= 1");
    let mut cells = [1usize; 3];
    let mut h = [0.0f64; 3];
    for a in 0..dim {
        if cells_per_axis[a] < 1 {
            return Err(WaveError::config("cells_per_axis must be >= 1"));
        }
        cells[a] = cells_per_axis[a];
        let len = extent.max[a] - extent.min[a];
        if len <= 0.0 {
            return Err(WaveError::config(
                "mesh extent has zero or negative measure",
            ));
        }
        h[a] = len / cells[a] as f64;
    }
    for a in dim..3 {
        if extent.max[a] != extent.min[a] {
            return Err(WaveError::config(
                "extent must be flat along unused trailing axes",
            ));
        }
    }

    let n_cells = cells[0] * cells[1] * cells[2];
    let mut classes = Vec::with_capacity(n_cells);
    for cz in 0..cells[2] {
        for cy in 0..cells[1] {
            for cx in 0..cells[0] {
                let idx = [cx, cy, cz];
                let mut lo = extent.min;
                let mut hi = extent.min;
                for a in 0..dim {
                    lo[a] = extent.min[a] + idx[a] as f64 * h[a];
                    hi[a] = extent.min[a] + (idx[a] + 1) as f64 * h[a];
                }
                for a in dim..3 {
                    hi[a] = extent.max[a];
                }
                let cell = AxisBox::new(lo, hi);
                classes.push(classify_cell(domain, &cell, dim, tree_depth, eps));
            }
        }
    }

    let mut nodes_per_axis = [1usize; 3];
    for a in 0..dim {
        nodes_per_axis[a] = cells[a] * p + 1;
    }
    let n_nodes = nodes_per_axis[0] * nodes_per_axis[1] * nodes_per_axis[2];

    // Mark lattice nodes supported by at least one retained (non-empty) cell.
    let mut keep = vec![false; n_nodes];
    let shape = ShapeSet::new(p, dim);
    let mut mesh = SpectralMesh {
        extent,
        domain: domain.clone(),
        dim,
        p,
        tree_depth,
        eps,
        cells_per_axis: cells,
        h,
        classes,
        nodes_per_axis,
        dof_of_node: Vec::new(),
        n_dof: 0,
        ref_nodes: shape.nodes.clone(),
        shape,
    };
    for cell in 0..n_cells {
        if mesh.classes[cell].kind == CellKind::Empty {
            continue;
        }
        for node in mesh.cell_nodes(cell) {
            keep[node] = true;
        }
    }
    let mut dof_of_node = vec![None; n_nodes];
    let mut next = 0usize;
    for (node, keep_it) in keep.iter().enumerate() {
        if *keep_it {
            dof_of_node[node] = Some(next);
            next += 1;
        }
    }
    if next == 0 {
        return Err(WaveError::config(
            "domain leaves no retained cells in the grid",
        ));
    }
    mesh.dof_of_node = dof_of_node;
    mesh.n_dof = next;
    Ok(mesh)
}

impl SpectralMesh {
    pub fn n_cells(&self) -> usize {
        self.cells_per_axis[0] * self.cells_per_axis[1] * self.cells_per_axis[2]
    }

    pub fn shape(&self) -> &ShapeSet {
        &self.shape
    }

    /// Cell index from per-axis coordinates.
    pub fn cell_index(&self, c: [usize; 3]) -> usize {
        c[0] + self.cells_per_axis[0] * (c[1] + self.cells_per_axis[1] * c[2])
    }

    /// Per-axis coordinates of a cell index.
    pub fn cell_coords(&self, cell: usize) -> [usize; 3] {
        let cx = cell % self.cells_per_axis[0];
        let rest = cell / self.cells_per_axis[0];
        let cy = rest % self.cells_per_axis[1];
        let cz = rest / self.cells_per_axis[1];
        [cx, cy, cz]
    }

    /// Bounding box of a cell.
    pub fn cell_box(&self, cell: usize) -> AxisBox {
        let c = self.cell_coords(cell);
        let mut lo = self.extent.min;
        let mut hi = self.extent.min;
        for a in 0..self.dim {
            lo[a] = self.extent.min[a] + c[a] as f64 * self.h[a];
            hi[a] = self.extent.min[a] + (c[a] + 1) as f64 * self.h[a];
        }
        for a in self.dim..3 {
            hi[a] = self.extent.max[a];
        }
        AxisBox::new(lo, hi)
    }

    /// Global lattice node indices of a cell, local lexicographic order
    /// (x fastest) matching the tensor basis ordering.
    pub fn cell_nodes(&self, cell: usize) -> Vec<usize> {
        let c = self.cell_coords(cell);
        let p = self.p;
        let counts = [
            p + 1,
            if self.dim >= 2 { p + 1 } else { 1 },
            if self.dim >= 3 { p + 1 } else { 1 },
        ];
        let mut out = Vec::with_capacity(counts[0] * counts[1] * counts[2]);
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    let g = [c[0] * p + i, c[1] * p + j, c[2] * p + k];
                    out.push(
                        g[0] + self.nodes_per_axis[0] * (g[1] + self.nodes_per_axis[1] * g[2]),
                    );
                }
            }
        }
        out
    }

    /// Global DOF indices of a cell (all retained for non-empty cells).
    pub fn cell_dofs(&self, cell: usize) -> Vec<usize> {
        self.cell_nodes(cell)
            .into_iter()
            .map(|n| {
                self.dof_of_node[n]
                    .expect("non-empty cell references a dropped node (internal fault)")
            })
            .collect()
    }

    /// Physical coordinate of a lattice node.
    pub fn node_coord(&self, node: usize) -> Point {
        let gx = node % self.nodes_per_axis[0];
        let rest = node / self.nodes_per_axis[0];
        let gy = rest % self.nodes_per_axis[1];
        let gz = rest / self.nodes_per_axis[1];
        let g = [gx, gy, gz];
        let mut x = self.extent.min;
        for a in 0..self.dim {
            let p = self.p;
            let cell = (g[a] / p).min(self.cells_per_axis[a] - 1);
            let local = g[a] - cell * p;
            x[a] = self.extent.min[a]
                + cell as f64 * self.h[a]
                + 0.5 * (self.ref_nodes[local] + 1.0) * self.h[a];
        }
        x
    }

    /// Coordinates of every retained DOF, in DOF order.
    pub fn dof_coords(&self) -> Vec<Point> {
        let mut out = vec![[0.0; 3]; self.n_dof];
        for (node, dof) in self.dof_of_node.iter().enumerate() {
            if let Some(d) = dof {
                out[*d] = self.node_coord(node);
            }
        }
        out
    }

    /// Cell containing a point; points on shared faces go to the lower-index
    /// cell, which keeps the choice deterministic (the field is single-valued
    /// across faces anyway).
    pub fn locate_cell(&self, x: Point) -> Result<usize, WaveError> {
        let mut c = [0usize; 3];
        for a in 0..self.dim {
            let rel = (x[a] - self.extent.min[a]) / self.h[a];
            if rel < 0.0 || x[a] > self.extent.max[a] {
                return Err(WaveError::config(format!(
                    "point ({}, {}, {}) lies outside the mesh extent",
                    x[0], x[1], x[2]
                )));
            }
            let mut k = rel.floor() as usize;
            if k as f64 == rel && k > 0 {
                k -= 1; // exact face hit: attribute to the lower cell
            }
            c[a] = k.min(self.cells_per_axis[a] - 1);
        }
        Ok(self.cell_index(c))
    }

    /// Precompute the evaluation of the basis at `x`.
    pub fn probe(&self, x: Point) -> Result<FieldProbe, WaveError> {
        let cell = self.locate_cell(x)?;
        let b = self.cell_box(cell);
        let mut xi = [0.0f64; 3];
        for a in 0..self.dim {
            xi[a] = 2.0 * (x[a] - b.min[a]) / (b.max[a] - b.min[a]) - 1.0;
        }
        let (values, _) = self.shape.tensor_eval(xi);
        let nodes = self.cell_nodes(cell);
        let terms = nodes
            .into_iter()
            .zip(values)
            .filter_map(|(node, v)| self.dof_of_node[node].map(|dof| (dof, v)))
            .collect();
        Ok(FieldProbe { cell, terms })
    }

    /// Evaluate the discrete field at a point. Coefficients of dropped nodes
    /// (support entirely in discarded cells) are treated as zero.
    pub fn evaluate_field(&self, coefficients: &[f64], x: Point) -> Result<f64, WaveError> {
        assert_eq!(
            coefficients.len(),
            self.n_dof,
            "coefficient length mismatch"
        );
        Ok(self.probe(x)?.eval(coefficients))
    }
}

/// Partition the retained DOFs: a DOF joins I_c iff at least one of its
/// supporting cells is cut.
pub fn partition_dofs(mesh: &SpectralMesh) -> DofPartition {
    let mut cut = vec![false; mesh.n_dof];
    for cell in 0..mesh.n_cells() {
        if mesh.classes[cell].kind == CellKind::Cut {
            for dof in mesh.cell_dofs(cell) {
                cut[dof] = true;
            }
        }
    }
    let mut i_d = Vec::new();
    let mut i_c = Vec::new();
    let mut c_pos = vec![None; mesh.n_dof];
    for (dof, is_cut) in cut.iter().enumerate() {
        if *is_cut {
            c_pos[dof] = Some(i_c.len());
            i_c.push(dof);
        } else {
            i_d.push(dof);
        }
    }
    DofPartition { i_d, i_c, c_pos }
}
