//! Global mass/stiffness/force assembly over a classified spectral mesh.
//!
//! The weak form of ρü = ∇·(ρc²∇u) + f on the embedding box, with the
//! fictitious-domain indicator folded into the density (ρ* = αρ), yields
//!
//!   M_ij = ∫ αρ N_i N_j,   K_ij = ∫ αρc² ∇N_i·∇N_j,   f_i = ∫ α f N_i.
//!
//! Quadrature follows the cell classification: uncut cells integrate the
//! mass with the GLL nodal rule (which makes the element mass exactly
//! diagonal) and the stiffness with a Gauss-Legendre rule that is exact for
//! the polynomial integrand; cut cells use the adaptive composite rule for
//! everything, so the immersed boundary enters only through α at quadrature
//! points.
//!
//! The assembled mass is block diagonal by construction: DOFs carried only
//! by uncut cells (set I_d) get purely diagonal rows, and every coupling
//! entry lives in the consistent block over the cut-supported DOFs (set
//! I_c). Explicit time stepping then inverts the diagonal part entry by
//! entry and the small cut block by one factorization.

use std::io;

use crate::cutcell::{composite_rule, CellKind, QuadPoint};
use crate::error::WaveError;
use crate::geometry::{AxisBox, ImplicitDomain, IndicatorConfig, Point};
use crate::linalg::{factorize, Factorization, SparseSym};
use crate::mesh::{partition_dofs, DofPartition, SpectralMesh};
use crate::quadrature::{gauss_legendre_rule, ShapeSet};

/// Homogeneous material: the only spatial heterogeneity comes from α.
#[derive(Debug, Clone, Copy)]
pub struct Material {
    pub rho: f64,
    pub c: f64,
}

impl Material {
    pub fn new(rho: f64, c: f64) -> Self {
        assert!(rho > 0.0 && c > 0.0, "material constants must be positive");
        Material { rho, c }
    }
}

/// Mass treatment for cut cells. Uncut cells are nodally diagonal either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lumping {
    /// Keep the consistent (coupled) mass block on cut-supported DOFs.
    Consistent,
    /// Diagonally lump cut elements, preserving their total mass.
    Hrz,
}

/// Assembled system in partitioned form: `M_dd` holds the diagonal mass
/// entries of the explicit DOFs (ordered as `partition.i_d`), `m_cc` the
/// mass block over the implicit DOFs, and `k` the full stiffness.
#[derive(Debug)]
pub struct PartitionedSystem {
    pub n: usize,
    pub k: SparseSym,
    pub m_dd: Vec<f64>,
    pub m_cc: SparseSym,
    /// Spatial force vector (zero until a source is attached).
    pub f_x: Vec<f64>,
    pub partition: DofPartition,
}

impl PartitionedSystem {
    /// Stiffness block over the implicit DOFs.
    pub fn k_cc(&self) -> SparseSym {
        self.k
            .principal_submatrix(&self.partition.i_c, &self.partition.c_pos)
    }

    /// Reconstruct the global mass matrix (diagonal part plus cut block).
    pub fn mass_sparse(&self) -> SparseSym {
        let mut trips: Vec<(usize, usize, f64)> = Vec::new();
        for (pos, &i) in self.partition.i_d.iter().enumerate() {
            trips.push((i, i, self.m_dd[pos]));
        }
        let i_c = &self.partition.i_c;
        for (r, c, v) in self.m_cc.triplets() {
            trips.push((i_c[r], i_c[c], v));
        }
        SparseSym::from_triplets(self.n, trips)
    }

    /// Total mass, Σ_ij M_ij (off-diagonal coupling included).
    pub fn total_mass(&self) -> f64 {
        let diag: f64 = self.m_dd.iter().sum();
        let block: f64 = self.m_cc.triplets().iter().map(|&(_, _, v)| v).sum();
        diag + block
    }
}

/// Blockwise solver for the assembled mass: diagonal division on I_d and a
/// factorization of the cut block on I_c. Factored once, applied every step.
#[derive(Debug)]
pub struct MassSolver {
    m_dd: Vec<f64>,
    i_d: Vec<usize>,
    i_c: Vec<usize>,
    chol_cc: Option<Factorization>,
}

impl MassSolver {
    pub fn new(sys: &PartitionedSystem) -> Result<Self, WaveError> {
        let chol_cc = if sys.m_cc.dim() > 0 {
            Some(factorize(&sys.m_cc)?)
        } else {
            None
        };
        Ok(MassSolver {
            m_dd: sys.m_dd.clone(),
            i_d: sys.partition.i_d.clone(),
            i_c: sys.partition.i_c.clone(),
            chol_cc,
        })
    }

    /// Solve M a = r for the full-length residual `r`.
    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let mut a = vec![0.0; r.len()];
        for (pos, &i) in self.i_d.iter().enumerate() {
            a[i] = r[i] / self.m_dd[pos];
        }
        if let Some(chol) = &self.chol_cc {
            let rc: Vec<f64> = self.i_c.iter().map(|&i| r[i]).collect();
            let ac = chol.solve(&rc);
            for (pos, &i) in self.i_c.iter().enumerate() {
                a[i] = ac[pos];
            }
        }
        a
    }
}

fn xi_in_cell(cell: &AxisBox, dim: usize, x: Point) -> [f64; 3] {
    let mut xi = [0.0f64; 3];
    for a in 0..dim {
        xi[a] = 2.0 * (x[a] - cell.min[a]) / (cell.max[a] - cell.min[a]) - 1.0;
    }
    xi
}

/// Tensor Gauss-Legendre points over a whole cell, physical weights, α = 1.
fn gauss_points(cell: &AxisBox, dim: usize, n: usize) -> Vec<QuadPoint> {
    let rule = gauss_legendre_rule(n);
    let counts = [
        n,
        if dim >= 2 { n } else { 1 },
        if dim >= 3 { n } else { 1 },
    ];
    let mid = cell.center();
    let half = [
        0.5 * (cell.max[0] - cell.min[0]),
        0.5 * (cell.max[1] - cell.min[1]),
        0.5 * (cell.max[2] - cell.min[2]),
    ];
    let mut pts = Vec::with_capacity(counts[0] * counts[1] * counts[2]);
    for k in 0..counts[2] {
        for j in 0..counts[1] {
            for i in 0..counts[0] {
                let idx = [i, j, k];
                let mut x = mid;
                let mut w = 1.0;
                for a in 0..dim {
                    x[a] = mid[a] + half[a] * rule.points[idx[a]];
                    w *= rule.weights[idx[a]] * half[a];
                }
                pts.push(QuadPoint {
                    x,
                    weight: w,
                    alpha: 1.0,
                });
            }
        }
    }
    pts
}

/// Diagonal mass of an uncut cell from the GLL nodal rule: the Lagrange
/// basis is a Kronecker delta at the quadrature points, so only the
/// diagonal survives and equals ρ · detJ · (tensor GLL weight).
fn uncut_mass_diag(shape: &ShapeSet, cell: &AxisBox, dim: usize, rho: f64) -> Vec<f64> {
    let rule = crate::quadrature::gll_rule(shape.p);
    let mut det_j = 1.0;
    for a in 0..dim {
        det_j *= 0.5 * (cell.max[a] - cell.min[a]);
    }
    let n1 = shape.p + 1;
    let counts = [
        n1,
        if dim >= 2 { n1 } else { 1 },
        if dim >= 3 { n1 } else { 1 },
    ];
    let mut diag = Vec::with_capacity(shape.len());
    for k in 0..counts[2] {
        for j in 0..counts[1] {
            for i in 0..counts[0] {
                let mut w = rule.weights[i];
                if dim >= 2 {
                    w *= rule.weights[j];
                }
                if dim >= 3 {
                    w *= rule.weights[k];
                }
                diag.push(rho * det_j * w);
            }
        }
    }
    diag
}

/// Dense consistent mass from an arbitrary α-tagged point set.
fn mass_from_points(
    shape: &ShapeSet,
    cell: &AxisBox,
    dim: usize,
    pts: &[QuadPoint],
    rho: f64,
) -> Vec<f64> {
    let nb = shape.len();
    let mut m = vec![0.0; nb * nb];
    for pt in pts {
        let (vals, _) = shape.tensor_eval(xi_in_cell(cell, dim, pt.x));
        let w = pt.weight * pt.alpha * rho;
        for i in 0..nb {
            let wni = w * vals[i];
            for j in 0..=i {
                m[i * nb + j] += wni * vals[j];
            }
        }
    }
    for i in 0..nb {
        for j in 0..i {
            m[j * nb + i] = m[i * nb + j];
        }
    }
    m
}

/// Dense stiffness from an arbitrary α-tagged point set.
fn stiffness_from_points(
    shape: &ShapeSet,
    cell: &AxisBox,
    dim: usize,
    pts: &[QuadPoint],
    rho_c2: f64,
) -> Vec<f64> {
    let nb = shape.len();
    // Gradients come back in reference coordinates; rescale per axis.
    let mut gscale = [0.0f64; 3];
    for a in 0..dim {
        gscale[a] = 2.0 / (cell.max[a] - cell.min[a]);
    }
    let mut k = vec![0.0; nb * nb];
    for pt in pts {
        let (_, grads) = shape.tensor_eval(xi_in_cell(cell, dim, pt.x));
        let w = pt.weight * pt.alpha * rho_c2;
        for i in 0..nb {
            for j in 0..=i {
                let mut dot = 0.0;
                for a in 0..dim {
                    dot += grads[i][a] * grads[j][a] * gscale[a] * gscale[a];
                }
                k[i * nb + j] += w * dot;
            }
        }
    }
    for i in 0..nb {
        for j in 0..i {
            k[j * nb + i] = k[i * nb + j];
        }
    }
    k
}

fn force_from_points(
    shape: &ShapeSet,
    cell: &AxisBox,
    dim: usize,
    pts: &[QuadPoint],
    source: &dyn Fn(Point) -> f64,
) -> Vec<f64> {
    let nb = shape.len();
    let mut f = vec![0.0; nb];
    for pt in pts {
        let (vals, _) = shape.tensor_eval(xi_in_cell(cell, dim, pt.x));
        let w = pt.weight * pt.alpha * source(pt.x);
        for i in 0..nb {
            f[i] += w * vals[i];
        }
    }
    f
}

/// Element pair for an uncut cell: diagonal mass and exact stiffness.
pub fn uncut_element(
    shape: &ShapeSet,
    cell: &AxisBox,
    dim: usize,
    material: Material,
) -> (Vec<f64>, Vec<f64>) {
    let m_diag = uncut_mass_diag(shape, cell, dim, material.rho);
    let pts = gauss_points(cell, dim, shape.p + 1);
    let k = stiffness_from_points(
        shape,
        cell,
        dim,
        &pts,
        material.rho * material.c * material.c,
    );
    (m_diag, k)
}

/// Element pair for a cut cell: consistent mass and stiffness over the
/// composite spacetree rule.
pub fn cut_element(
    shape: &ShapeSet,
    domain: &ImplicitDomain,
    cfg: &IndicatorConfig,
    cell: &AxisBox,
    dim: usize,
    tree_depth: u32,
    material: Material,
) -> (Vec<f64>, Vec<f64>) {
    let rule = composite_rule(domain, cfg, cell, dim, tree_depth, shape.p + 1);
    let m = mass_from_points(shape, cell, dim, &rule.points, material.rho);
    let k = stiffness_from_points(
        shape,
        cell,
        dim,
        &rule.points,
        material.rho * material.c * material.c,
    );
    (m, k)
}

/// Dense element matrices for a retained cell, dispatched on its
/// classification. Uncut cells return the diagonal mass expanded to dense
/// form (exact zeros off the diagonal).
pub fn element_matrices(
    mesh: &SpectralMesh,
    cell: usize,
    material: Material,
    cfg: &IndicatorConfig,
) -> (Vec<f64>, Vec<f64>) {
    let class = &mesh.classes[cell];
    assert!(
        class.kind != CellKind::Empty,
        "empty cells carry no element matrices"
    );
    let b = mesh.cell_box(cell);
    let shape = mesh.shape();
    match class.kind {
        CellKind::Uncut => {
            let (diag, k) = uncut_element(shape, &b, mesh.dim, material);
            let nb = shape.len();
            let mut m = vec![0.0; nb * nb];
            for (i, d) in diag.iter().enumerate() {
                m[i * nb + i] = *d;
            }
            (m, k)
        }
        CellKind::Cut => cut_element(
            shape,
            &mesh.domain,
            cfg,
            &b,
            mesh.dim,
            mesh.tree_depth,
            material,
        ),
        CellKind::Empty => unreachable!(),
    }
}

/// Diagonally lump a consistent element mass, scaling the diagonal so the
/// total element mass Σ_ij M_ij is preserved.
pub fn hrz_lump(m_e: &[f64], nb: usize) -> Vec<f64> {
    assert_eq!(m_e.len(), nb * nb);
    let total: f64 = m_e.iter().sum();
    let trace: f64 = (0..nb).map(|i| m_e[i * nb + i]).sum();
    assert!(trace > 0.0, "element mass has non-positive trace");
    let scale = total / trace;
    (0..nb).map(|i| scale * m_e[i * nb + i]).collect()
}

/// Assemble the partitioned system by scatter-adding element contributions.
/// Uncut cells share one precomputed element pair (the grid is uniform), so
/// the per-cell cost is dominated by the cut cells.
pub fn assemble(
    mesh: &SpectralMesh,
    material: Material,
    cfg: &IndicatorConfig,
    lumping: Lumping,
) -> Result<PartitionedSystem, WaveError> {
    if mesh.n_dof == 0 {
        return Err(WaveError::config("no retained DOFs to assemble"));
    }
    let partition = partition_dofs(mesh);
    let shape = mesh.shape();
    let nb = shape.len();

    let mut k_trips: Vec<(usize, usize, f64)> = Vec::new();
    let mut m_diag_full = vec![0.0f64; mesh.n_dof];
    let mut m_cc_trips: Vec<(usize, usize, f64)> = Vec::new();
    let mut uncut_pair: Option<(Vec<f64>, Vec<f64>)> = None;

    // Scatter one diagonal mass contribution to where the DOF's row lives.
    fn add_mass_diag(
        dof: usize,
        v: f64,
        part: &DofPartition,
        m_diag_full: &mut [f64],
        m_cc_trips: &mut Vec<(usize, usize, f64)>,
    ) {
        match part.c_pos[dof] {
            Some(pc) => m_cc_trips.push((pc, pc, v)),
            None => m_diag_full[dof] += v,
        }
    }

    for cell in 0..mesh.n_cells() {
        let kind = mesh.classes[cell].kind;
        if kind == CellKind::Empty {
            continue;
        }
        let dofs = mesh.cell_dofs(cell);
        let b = mesh.cell_box(cell);
        match kind {
            CellKind::Uncut => {
                if uncut_pair.is_none() {
                    uncut_pair = Some(uncut_element(shape, &b, mesh.dim, material));
                }
                let (m_diag, k_e) = uncut_pair.as_ref().unwrap();
                for (a, &da) in dofs.iter().enumerate() {
                    add_mass_diag(da, m_diag[a], &partition, &mut m_diag_full, &mut m_cc_trips);
                    for (bq, &db) in dofs.iter().enumerate() {
                        k_trips.push((da, db, k_e[a * nb + bq]));
                    }
                }
            }
            CellKind::Cut => {
                let (m_e, k_e) = cut_element(
                    shape,
                    &mesh.domain,
                    cfg,
                    &b,
                    mesh.dim,
                    mesh.tree_depth,
                    material,
                );
                for (a, &da) in dofs.iter().enumerate() {
                    for (bq, &db) in dofs.iter().enumerate() {
                        k_trips.push((da, db, k_e[a * nb + bq]));
                    }
                }
                match lumping {
                    Lumping::Hrz => {
                        let diag = hrz_lump(&m_e, nb);
                        for (a, &da) in dofs.iter().enumerate() {
                            add_mass_diag(
                                da,
                                diag[a],
                                &partition,
                                &mut m_diag_full,
                                &mut m_cc_trips,
                            );
                        }
                    }
                    Lumping::Consistent => {
                        for (a, &da) in dofs.iter().enumerate() {
                            let pa = partition.c_pos[da]
                                .expect("cut-cell DOF missing from the implicit set");
                            for (bq, &db) in dofs.iter().enumerate() {
                                let pb = partition.c_pos[db]
                                    .expect("cut-cell DOF missing from the implicit set");
                                m_cc_trips.push((pa, pb, m_e[a * nb + bq]));
                            }
                        }
                    }
                }
            }
            CellKind::Empty => unreachable!(),
        }
    }

    let k = SparseSym::from_triplets(mesh.n_dof, k_trips);
    let max_abs = k
        .triplets()
        .iter()
        .fold(0.0f64, |m, &(_, _, v)| m.max(v.abs()));
    assert!(
        k.asymmetry() <= 1e-12 * max_abs.max(1.0),
        "assembled stiffness lost symmetry"
    );
    let m_cc = SparseSym::from_triplets(partition.i_c.len(), m_cc_trips);
    let m_dd: Vec<f64> = partition.i_d.iter().map(|&i| m_diag_full[i]).collect();
    for (pos, &v) in m_dd.iter().enumerate() {
        assert!(
            v > 0.0,
            "non-positive lumped mass at explicit DOF {}",
            partition.i_d[pos]
        );
    }

    Ok(PartitionedSystem {
        n: mesh.n_dof,
        k,
        m_dd,
        m_cc,
        f_x: vec![0.0; mesh.n_dof],
        partition,
    })
}

/// Assemble the spatial force vector f_x,i = ∫ α f(x) N_i dΩ using each
/// cell's classification-appropriate rule.
pub fn assemble_force(
    mesh: &SpectralMesh,
    spatial: impl Fn(Point) -> f64,
    cfg: &IndicatorConfig,
) -> Vec<f64> {
    let shape = mesh.shape();
    let mut f = vec![0.0f64; mesh.n_dof];
    for cell in 0..mesh.n_cells() {
        let kind = mesh.classes[cell].kind;
        if kind == CellKind::Empty {
            continue;
        }
        let b = mesh.cell_box(cell);
        let pts = match kind {
            CellKind::Uncut => gauss_points(&b, mesh.dim, shape.p + 1),
            CellKind::Cut => {
                composite_rule(
                    &mesh.domain,
                    cfg,
                    &b,
                    mesh.dim,
                    mesh.tree_depth,
                    shape.p + 1,
                )
                .points
            }
            CellKind::Empty => unreachable!(),
        };
        let f_e = force_from_points(shape, &b, mesh.dim, &pts, &spatial);
        for (a, &dof) in mesh.cell_dofs(cell).iter().enumerate() {
            f[dof] += f_e[a];
        }
    }
    f
}

/// Write a matrix in coordinate text form, one `row col value` line per
/// stored entry, 0-based indices.
pub fn dump_matrix(m: &SparseSym, out: &mut impl io::Write) -> io::Result<()> {
    for (r, c, v) in m.triplets() {
        writeln!(out, "{} {} {}", r, c, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ImplicitDomain;
    use crate::mesh::build_mesh;
    use approx::assert_relative_eq;

    fn line_mesh(n: usize, len: f64, p: usize, domain: ImplicitDomain) -> SpectralMesh {
        build_mesh(
            AxisBox::new([0.0; 3], [len, 0.0, 0.0]),
            [n, 1, 1],
            1,
            p,
            &domain,
            5,
            1e-10,
        )
        .unwrap()
    }

    #[test]
    fn uncut_1d_p1_element_matches_hand_integration() {
        let h = 0.8;
        let mesh = line_mesh(1, h, 1, ImplicitDomain::FullSpace);
        let mat = Material::new(1.0, 1.0);
        let cfg = IndicatorConfig::from_beta(6);
        let (m, k) = element_matrices(&mesh, 0, mat, &cfg);
        assert_relative_eq!(m[0], h / 2.0, max_relative = 1e-14);
        assert_relative_eq!(m[3], h / 2.0, max_relative = 1e-14);
        assert_eq!(m[1], 0.0);
        assert_eq!(m[2], 0.0);
        let k_ref = [1.0 / h, -1.0 / h, -1.0 / h, 1.0 / h];
        for i in 0..4 {
            assert_relative_eq!(k[i], k_ref[i], max_relative = 1e-13);
        }
    }

    #[test]
    fn uncut_1d_p2_element_matches_hand_integration() {
        let h = 1.3;
        let mesh = line_mesh(1, h, 2, ImplicitDomain::FullSpace);
        let mat = Material::new(1.0, 1.0);
        let cfg = IndicatorConfig::from_beta(6);
        let (m, k) = element_matrices(&mesh, 0, mat, &cfg);
        // GLL weights (1/3, 4/3, 1/3) scaled by h/2.
        for (i, want) in [h / 6.0, 2.0 * h / 3.0, h / 6.0].iter().enumerate() {
            assert_relative_eq!(m[i * 3 + i], *want, max_relative = 1e-13);
        }
        let s = 1.0 / (3.0 * h);
        let k_ref = [
            7.0 * s,
            -8.0 * s,
            s, //
            -8.0 * s,
            16.0 * s,
            -8.0 * s, //
            s,
            -8.0 * s,
            7.0 * s,
        ];
        for i in 0..9 {
            assert_relative_eq!(k[i], k_ref[i], max_relative = 1e-12, epsilon = 1e-13);
        }
    }

    #[test]
    fn two_element_line_assembles_tridiagonal_stiffness() {
        let h = 0.5;
        let mesh = line_mesh(2, 2.0 * h, 1, ImplicitDomain::FullSpace);
        let mat = Material::new(2.0, 1.0);
        let cfg = IndicatorConfig::from_beta(6);
        let sys = assemble(&mesh, mat, &cfg, Lumping::Consistent).unwrap();
        assert_eq!(sys.n, 3);
        assert_eq!(sys.m_cc.dim(), 0, "full domain has no cut block");
        // M = ρ·diag(h/2, h, h/2); K = (ρc²/h)·tridiag(-1, [1,2,1], -1).
        let md = [h, 2.0 * h, h];
        for i in 0..3 {
            assert_relative_eq!(sys.m_dd[i], md[i], max_relative = 1e-13);
        }
        let g = 2.0 / h;
        let expect = [
            (0, 0, g),
            (0, 1, -g),
            (1, 1, 2.0 * g),
            (1, 2, -g),
            (2, 2, g),
        ];
        let trips = sys.k.triplets();
        for (r, c, want) in expect {
            let got: f64 = trips
                .iter()
                .filter(|&&(tr, tc, _)| (tr, tc) == (r, c))
                .map(|&(_, _, v)| v)
                .sum();
            assert_relative_eq!(got, want, max_relative = 1e-13);
        }
        assert_relative_eq!(sys.total_mass(), 2.0 * (2.0 * h), max_relative = 1e-13);
    }

    #[test]
    fn hrz_examples() {
        // Already-diagonal input is unchanged.
        let d = [2.0, 0.0, 0.0, 3.0];
        let out = hrz_lump(&d, 2);
        assert_relative_eq!(out[0], 2.0, max_relative = 1e-15);
        assert_relative_eq!(out[1], 3.0, max_relative = 1e-15);
        // Consistent 1D p=1 element on h=2, ρ=1: [[2/3,1/3],[1/3,2/3]] → diag(1,1).
        let m = [2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0];
        let out = hrz_lump(&m, 2);
        assert_relative_eq!(out[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(out[1], 1.0, max_relative = 1e-14);
        // Total mass preserved on a genuinely cut element.
        let domain = ImplicitDomain::half_space([1.0, 1.0, 0.0], 1.1);
        let cell = AxisBox::new([0.0; 3], [1.0, 1.0, 0.0]);
        let shape = ShapeSet::new(3, 2);
        let cfg = IndicatorConfig::from_beta(6);
        let (m_e, _) = cut_element(&shape, &domain, &cfg, &cell, 2, 5, Material::new(1.7, 2.0));
        let lumped = hrz_lump(&m_e, shape.len());
        let total: f64 = m_e.iter().sum();
        let lumped_total: f64 = lumped.iter().sum();
        assert_relative_eq!(lumped_total, total, max_relative = 1e-12);
    }

    #[test]
    fn stiffness_rows_sum_to_zero_on_cut_cells() {
        let domain = ImplicitDomain::difference(
            ImplicitDomain::FullSpace,
            vec![ImplicitDomain::ball([0.7, 0.6, 0.0], 0.4)],
        );
        let shape = ShapeSet::new(3, 2);
        let cfg = IndicatorConfig::from_beta(6);
        let cell = AxisBox::new([0.0; 3], [1.0, 1.0, 0.0]);
        let (_, k) = cut_element(&shape, &domain, &cfg, &cell, 2, 5, Material::new(1.0, 1.0));
        let nb = shape.len();
        let scale: f64 = k.iter().fold(0.0, |m, v| m.max(v.abs()));
        for i in 0..nb {
            let row: f64 = (0..nb).map(|j| k[i * nb + j]).sum();
            assert!(row.abs() <= 1e-10 * scale, "row {} sums to {}", i, row);
        }
    }

    #[test]
    fn tangent_boundary_reproduces_full_cell_mass() {
        // Boundary along the cell's right face: the cell is fully physical,
        // and the composite rule must reproduce the consistent Gauss mass.
        let domain = ImplicitDomain::half_space([1.0, 0.0, 0.0], 2.0);
        let cell = AxisBox::new([1.0, 0.0, 0.0], [2.0, 1.0, 0.0]);
        let shape = ShapeSet::new(2, 2);
        let cfg = IndicatorConfig::from_beta(6);
        let mat = Material::new(1.0, 1.0);
        let (m_cut, _) = cut_element(&shape, &domain, &cfg, &cell, 2, 5, mat);
        let pts = gauss_points(&cell, 2, 3);
        let m_full = mass_from_points(&shape, &cell, 2, &pts, mat.rho);
        let scale: f64 = m_full.iter().fold(0.0, |m, v| m.max(v.abs()));
        for (a, b) in m_cut.iter().zip(&m_full) {
            assert!((a - b).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn adaptive_rule_matches_uniform_subdivision_oracle() {
        // For half-space cuts, corner sampling cannot miss the boundary, so
        // the adaptive tree must integrate exactly like a full uniform
        // subdivision at max depth with pointwise α.
        let shape = ShapeSet::new(2, 2);
        let cfg = IndicatorConfig::from_beta(6);
        let mat = Material::new(1.3, 2.1);
        let cell = AxisBox::new([0.0; 3], [1.0, 1.0, 0.0]);
        let depth = 4u32;
        for (normal, offset) in [
            ([1.0, 0.7, 0.0], 0.9),
            ([-0.3, 1.0, 0.0], 0.4),
            ([1.0, -2.0, 0.0], -0.3),
        ] {
            let domain = ImplicitDomain::half_space(normal, offset);
            let (m_ad, k_ad) = cut_element(&shape, &domain, &cfg, &cell, 2, depth, mat);

            // Brute force: uniform 2^depth × 2^depth leaves, α per point.
            let m_side = 1usize << depth;
            let hstep = 1.0 / m_side as f64;
            let mut pts = Vec::new();
            for gy in 0..m_side {
                for gx in 0..m_side {
                    let sub = AxisBox::new(
                        [gx as f64 * hstep, gy as f64 * hstep, 0.0],
                        [(gx + 1) as f64 * hstep, (gy + 1) as f64 * hstep, 0.0],
                    );
                    for mut p in gauss_points(&sub, 2, 3) {
                        p.alpha = crate::geometry::alpha(&domain, &cfg, p.x);
                        pts.push(p);
                    }
                }
            }
            let m_ref = mass_from_points(&shape, &cell, 2, &pts, mat.rho);
            let k_ref = stiffness_from_points(&shape, &cell, 2, &pts, mat.rho * mat.c * mat.c);
            let ms: f64 = m_ref.iter().fold(0.0, |a, v| a.max(v.abs()));
            let ks: f64 = k_ref.iter().fold(0.0, |a, v| a.max(v.abs()));
            for (a, b) in m_ad.iter().zip(&m_ref) {
                assert!((a - b).abs() <= 1e-12 * ms, "mass mismatch {} vs {}", a, b);
            }
            for (a, b) in k_ad.iter().zip(&k_ref) {
                assert!(
                    (a - b).abs() <= 1e-12 * ks,
                    "stiffness mismatch {} vs {}",
                    a,
                    b
                );
            }
        }
    }

    #[test]
    fn alpha_limit_is_converged_at_moderate_beta() {
        let domain = ImplicitDomain::difference(
            ImplicitDomain::FullSpace,
            vec![ImplicitDomain::ball([1.0, 0.5, 0.0], 0.45)],
        );
        let shape = ShapeSet::new(3, 2);
        let cell = AxisBox::new([0.5, 0.0, 0.0], [1.5, 1.0, 0.0]);
        let mat = Material::new(1.0, 1.0);
        let run = |beta: u32| {
            cut_element(
                &shape,
                &domain,
                &IndicatorConfig::from_beta(beta),
                &cell,
                2,
                5,
                mat,
            )
        };
        let (m6, k6) = run(6);
        let (m12, k12) = run(12);
        let rel = |a: &[f64], b: &[f64]| {
            let scale: f64 = a.iter().fold(0.0, |m, v| m.max(v.abs()));
            a.iter()
                .zip(b)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
                / scale
        };
        assert!(rel(&m6, &m12) < 1e-5, "mass α-limit not converged");
        assert!(rel(&k6, &k12) < 1e-5, "stiffness α-limit not converged");
    }

    #[test]
    fn mass_is_structurally_block_diagonal_on_a_cut_mesh() {
        let domain = ImplicitDomain::difference(
            ImplicitDomain::FullSpace,
            vec![ImplicitDomain::ball([2.0, 1.5, 0.0], 0.6)],
        );
        let mesh = build_mesh(
            AxisBox::new([0.0; 3], [4.0, 3.0, 0.0]),
            [4, 3, 1],
            2,
            2,
            &domain,
            4,
            1e-10,
        )
        .unwrap();
        let cfg = IndicatorConfig::from_beta(6);
        let sys = assemble(&mesh, Material::new(1.0, 1.0), &cfg, Lumping::Consistent).unwrap();
        assert!(!sys.partition.i_c.is_empty());
        assert!(!sys.partition.i_d.is_empty());
        // Every off-diagonal mass entry couples two implicit DOFs.
        for (r, c, _) in sys.mass_sparse().triplets() {
            if r != c {
                assert!(sys.partition.is_cut_dof(r));
                assert!(sys.partition.is_cut_dof(c));
            }
        }
        for &v in &sys.m_dd {
            assert!(v > 0.0);
        }
        // The cut block must be SPD (factorization succeeds).
        assert!(factorize(&sys.m_cc).is_ok());
        // With HRZ lumping the cut block is diagonal.
        let sys_h = assemble(&mesh, Material::new(1.0, 1.0), &cfg, Lumping::Hrz).unwrap();
        for (r, c, v) in sys_h.m_cc.triplets() {
            assert!(r == c, "HRZ left off-diagonal mass {} at ({}, {})", v, r, c);
        }
        // Lumping preserves the total mass.
        assert_relative_eq!(sys_h.total_mass(), sys.total_mass(), max_relative = 1e-12);
    }

    #[test]
    fn full_domain_mass_equals_density_times_volume() {
        let mesh = build_mesh(
            AxisBox::new([0.0; 3], [2.0, 1.5, 0.0]),
            [4, 3, 1],
            2,
            3,
            &ImplicitDomain::FullSpace,
            3,
            1e-10,
        )
        .unwrap();
        let cfg = IndicatorConfig::from_beta(6);
        let sys = assemble(&mesh, Material::new(2.5, 1.0), &cfg, Lumping::Consistent).unwrap();
        assert_relative_eq!(sys.total_mass(), 2.5 * 3.0, max_relative = 1e-10);
        // Positive semidefinite stiffness on random vectors.
        let mut state = 88172645463325252u64;
        let mut rand = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        for _ in 0..5 {
            let x: Vec<f64> = (0..sys.n).map(|_| rand()).collect();
            let kx = sys.k.apply(&x);
            let quad: f64 = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
            assert!(quad >= -1e-10, "stiffness not PSD: x'Kx = {}", quad);
        }
    }

    #[test]
    fn force_assembly_measures_the_domain() {
        let mesh = build_mesh(
            AxisBox::new([0.0; 3], [2.0, 1.0, 0.0]),
            [4, 2, 1],
            2,
            2,
            &ImplicitDomain::FullSpace,
            3,
            1e-10,
        )
        .unwrap();
        let cfg = IndicatorConfig::from_beta(6);
        let zero = assemble_force(&mesh, |_| 0.0, &cfg);
        assert!(zero.iter().all(|&v| v == 0.0));
        let ones = assemble_force(&mesh, |_| 1.0, &cfg);
        let total: f64 = ones.iter().sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-10);
    }

    #[test]
    fn gaussian_bell_force_integrates_to_its_analytic_mass() {
        // A fully interior bell: Σ_i f_i = ∫ f = A·2πσ² in 2D.
        let sigma = 0.06;
        let amp = 10.0;
        let center = [1.0, 2.0];
        let mesh = build_mesh(
            AxisBox::new([0.4, 1.4, 0.0], [1.6, 2.6, 0.0]),
            [16, 16, 1],
            2,
            4,
            &ImplicitDomain::FullSpace,
            3,
            1e-10,
        )
        .unwrap();
        let cfg = IndicatorConfig::from_beta(6);
        let f = assemble_force(
            &mesh,
            |x| {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                amp * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
            },
            &cfg,
        );
        let total: f64 = f.iter().sum();
        let analytic = amp * 2.0 * std::f64::consts::PI * sigma * sigma;
        assert_relative_eq!(total, analytic, max_relative = 0.01);
    }

    #[test]
    fn mass_solver_matches_dense_oracle() {
        let domain = ImplicitDomain::difference(
            ImplicitDomain::FullSpace,
            vec![ImplicitDomain::ball([1.5, 1.0, 0.0], 0.5)],
        );
        let mesh = build_mesh(
            AxisBox::new([0.0; 3], [3.0, 2.0, 0.0]),
            [3, 2, 1],
            2,
            2,
            &domain,
            4,
            1e-10,
        )
        .unwrap();
        let cfg = IndicatorConfig::from_beta(6);
        let sys = assemble(&mesh, Material::new(1.0, 1.0), &cfg, Lumping::Consistent).unwrap();
        let solver = MassSolver::new(&sys).unwrap();
        let r: Vec<f64> = (0..sys.n)
            .map(|i| ((i * 7 + 3) % 11) as f64 - 5.0)
            .collect();
        let a = solver.solve(&r);

        let m = sys.mass_sparse();
        let mut dense = nalgebra::DMatrix::<f64>::zeros(sys.n, sys.n);
        for (i, j, v) in m.triplets() {
            dense[(i, j)] = v;
        }
        let rhs = nalgebra::DVector::from_column_slice(&r);
        let sol = dense.lu().solve(&rhs).unwrap();
        for i in 0..sys.n {
            assert_relative_eq!(a[i], sol[i], max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn matrix_dump_is_coordinate_text() {
        let m = SparseSym::from_triplets(
            2,
            vec![(0, 0, 1.5), (0, 1, -2.0), (1, 0, -2.0), (1, 1, 4.0)],
        );
        let mut buf = Vec::new();
        dump_matrix(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "0 0 1.5");
        assert_eq!(lines[1], "0 1 -2");
    }
}
