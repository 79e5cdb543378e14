//! Largest generalized eigenvalues and critical time steps.
//!
//! Explicit central differences are stable for Δt ≤ Δt_crit = 2/ω_max with
//! ω_max = √λ_max(K, M). The routines here estimate λ_max by power iteration
//! on M⁻¹K (self-adjoint in the M inner product), at three scopes: the full
//! system, the explicit subsystem (K_dd, M_dd) whose spectrum governs the
//! semi-implicit scheme, and single cells — both the per-cell map over a
//! mesh and the isolated cut-cell study that shows how the maximum
//! eigenfrequency blows up as the physical fill fraction shrinks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{
    cut_element, uncut_element, Lumping, MassSolver, Material, PartitionedSystem,
};
use crate::error::WaveError;
use crate::geometry::{AxisBox, ImplicitDomain, IndicatorConfig};
use crate::linalg::{factorize, Factorization, SparseSym};
use crate::mesh::SpectralMesh;
use crate::quadrature::ShapeSet;

const POWER_ITERATION_CAP: usize = 10_000;
pub const DEFAULT_EIG_TOL: f64 = 1e-8;

/// Mass side of the generalized problem: both the quadratic form (for the
/// Rayleigh quotient) and the inverse application (for the iteration).
pub trait MassOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn solve(&self, r: &[f64]) -> Vec<f64>;
}

/// Diagonal (lumped) mass.
pub struct DiagonalMass<'a>(pub &'a [f64]);

impl MassOperator for DiagonalMass<'_> {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0.iter().zip(x).map(|(m, v)| m * v).collect()
    }
    fn solve(&self, r: &[f64]) -> Vec<f64> {
        self.0.iter().zip(r).map(|(m, v)| v / m).collect()
    }
}

/// General SPD mass held with its factorization.
pub struct FactoredMass<'a> {
    m: &'a SparseSym,
    chol: Factorization,
}

impl<'a> FactoredMass<'a> {
    pub fn new(m: &'a SparseSym) -> Result<Self, WaveError> {
        Ok(FactoredMass {
            m,
            chol: factorize(m)?,
        })
    }
}

impl MassOperator for FactoredMass<'_> {
    fn dim(&self) -> usize {
        self.m.dim()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.m.apply(x)
    }
    fn solve(&self, r: &[f64]) -> Vec<f64> {
        self.chol.solve(r)
    }
}

/// Block-diagonal system mass (diagonal on I_d, factored block on I_c).
pub struct SystemMass {
    m: SparseSym,
    solver: MassSolver,
}

impl SystemMass {
    pub fn new(sys: &PartitionedSystem) -> Result<Self, WaveError> {
        Ok(SystemMass {
            m: sys.mass_sparse(),
            solver: MassSolver::new(sys)?,
        })
    }
}

impl MassOperator for SystemMass {
    fn dim(&self) -> usize {
        self.m.dim()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.m.apply(x)
    }
    fn solve(&self, r: &[f64]) -> Vec<f64> {
        self.solver.solve(r)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest eigenvalue of a small dense symmetric matrix by cyclic Jacobi
/// rotations (used for the Rayleigh–Ritz projection, so b ≤ 4).
fn jacobi_max(a: &mut [f64], n: usize) -> f64 {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p * n + q].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-18 * scale {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    a[r * n + p] = c * arp - s * arq;
                    a[r * n + q] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[p * n + r];
                    let aqr = a[q * n + r];
                    a[p * n + r] = c * apr - s * aqr;
                    a[q * n + r] = s * apr + c * aqr;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).fold(f64::MIN, f64::max)
}

/// M-orthonormalize the block in place (modified Gram-Schmidt, two passes);
/// vectors that lose rank are replaced with fresh random directions.
fn orthonormalize_m(
    vs: &mut [Vec<f64>],
    m: &dyn MassOperator,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let n = vs[0].len();
    let mut mv: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    for i in 0..vs.len() {
        let mut attempts = 0;
        loop {
            for _pass in 0..2 {
                for j in 0..i {
                    let c = dot(&mv[j], &vs[i]);
                    let (head, tail) = vs.split_at_mut(i);
                    let vj = &head[j];
                    tail[0].iter_mut().zip(vj).for_each(|(x, y)| *x -= c * y);
                }
            }
            let mvi = m.apply(&vs[i]);
            let nrm = dot(&mvi, &vs[i]).max(0.0).sqrt();
            if nrm > 1e-150 {
                vs[i].iter_mut().for_each(|x| *x /= nrm);
                mv.push(mvi.iter().map(|x| x / nrm).collect());
                break;
            }
            attempts += 1;
            assert!(attempts < 8, "block lost rank irrecoverably");
            vs[i] = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        }
    }
    mv
}

/// Largest eigenvalue of K v = λ M v by block power iteration on M⁻¹K with
/// a Rayleigh–Ritz projection (block size 4): the block converges at the
/// rate of the gap past the block, so clustered top eigenvalues — routine
/// for barely-filled cut cells — do not stall it. Converged when the top
/// Ritz value settles to `rel_tol`, including a geometric tail estimate of
/// the remaining error. The start block is random but fixed-seeded, so
/// results are reproducible.
pub fn max_eig(k: &SparseSym, m: &dyn MassOperator, rel_tol: f64) -> Result<f64, WaveError> {
    let n = k.dim();
    assert_eq!(m.dim(), n, "operator dimensions disagree");
    assert!(n > 0, "empty eigenproblem");
    let b = n.min(4);
    let mut rng = ChaCha8Rng::seed_from_u64(0x00c0ffee);
    let mut vs: Vec<Vec<f64>> = (0..b)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    orthonormalize_m(&mut vs, m, &mut rng);

    let mut lambda_prev = f64::NAN;
    let mut diff_prev = f64::INFINITY;
    for it in 0..POWER_ITERATION_CAP {
        let kv: Vec<Vec<f64>> = vs.iter().map(|v| k.apply(v)).collect();
        // Ritz matrix A_ij = v_iᵀ K v_j (block is M-orthonormal).
        let mut a = vec![0.0; b * b];
        for i in 0..b {
            for j in 0..=i {
                let val = 0.5 * (dot(&vs[i], &kv[j]) + dot(&vs[j], &kv[i]));
                a[i * b + j] = val;
                a[j * b + i] = val;
            }
        }
        let lambda = jacobi_max(&mut a, b);
        let diff = (lambda - lambda_prev).abs();
        if it >= 1 {
            if diff == 0.0 {
                return Ok(lambda);
            }
            // Ritz values converge geometrically; bound the remaining error
            // by the tail of that series so a slow ratio cannot trigger a
            // premature stop.
            let rho = diff / diff_prev;
            if rho < 1.0 {
                let tail = diff * rho / (1.0 - rho);
                if diff <= rel_tol * lambda.abs() && tail <= rel_tol * lambda.abs() {
                    return Ok(lambda);
                }
            }
        }
        lambda_prev = lambda;
        diff_prev = diff;
        for (v, kvj) in vs.iter_mut().zip(&kv) {
            *v = m.solve(kvj);
        }
        // A zero block means K annihilated every direction.
        if vs.iter().all(|v| v.iter().all(|x| *x == 0.0)) {
            return Ok(0.0);
        }
        orthonormalize_m(&mut vs, m, &mut rng);
    }
    Err(WaveError::numerical(format!(
        "power iteration did not converge within {} iterations (last Rayleigh quotient {})",
        POWER_ITERATION_CAP, lambda_prev
    )))
}

/// Which block of the system the stability estimate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Global,
    ExplicitSubsystem,
    Cell(usize),
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scope::Global => write!(f, "global"),
            Scope::ExplicitSubsystem => write!(f, "explicit_subsystem"),
            Scope::Cell(i) => write!(f, "cell_{}", i),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriticalDtReport {
    pub scope: Scope,
    pub omega_max: f64,
    pub dt_crit: f64,
}

fn report_from_lambda(scope: Scope, lambda: f64) -> Result<CriticalDtReport, WaveError> {
    if !(lambda > 0.0) {
        return Err(WaveError::numerical(format!(
            "non-positive maximum eigenvalue {} in scope {}",
            lambda, scope
        )));
    }
    let omega_max = lambda.sqrt();
    Ok(CriticalDtReport {
        scope,
        omega_max,
        dt_crit: 2.0 / omega_max,
    })
}

/// Critical time step of the full system or of the explicit subsystem
/// (K_dd, M_dd) that governs semi-implicit stability.
pub fn critical_dt(sys: &PartitionedSystem, scope: Scope) -> Result<CriticalDtReport, WaveError> {
    match scope {
        Scope::Global => {
            let mass = SystemMass::new(sys)?;
            let lambda = max_eig(&sys.k, &mass, DEFAULT_EIG_TOL)?;
            report_from_lambda(scope, lambda)
        }
        Scope::ExplicitSubsystem => {
            let i_d = &sys.partition.i_d;
            if i_d.is_empty() {
                return Err(WaveError::config(
                    "explicit subsystem is empty: every DOF is cut-supported",
                ));
            }
            let mut pos = vec![None; sys.n];
            for (p, &i) in i_d.iter().enumerate() {
                pos[i] = Some(p);
            }
            let k_dd = sys.k.principal_submatrix(i_d, &pos);
            let mass = DiagonalMass(&sys.m_dd);
            let lambda = max_eig(&k_dd, &mass, DEFAULT_EIG_TOL)?;
            report_from_lambda(scope, lambda)
        }
        Scope::Cell(_) => Err(WaveError::config(
            "per-cell reports come from cellwise_critical_dt",
        )),
    }
}

fn sparse_from_dense(a: &[f64], n: usize) -> SparseSym {
    let mut trips = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = a[i * n + j];
            if v != 0.0 {
                trips.push((i, j, v));
            }
        }
    }
    SparseSym::from_triplets(n, trips)
}

fn lambda_dense_pair(m_dense: &[f64], k_dense: &[f64], nb: usize) -> Result<f64, WaveError> {
    let k = sparse_from_dense(k_dense, nb);
    let m = sparse_from_dense(m_dense, nb);
    let mass = FactoredMass::new(&m)?;
    max_eig(&k, &mass, DEFAULT_EIG_TOL)
}

fn lambda_diag_pair(m_diag: &[f64], k_dense: &[f64], nb: usize) -> Result<f64, WaveError> {
    let k = sparse_from_dense(k_dense, nb);
    let mass = DiagonalMass(m_diag);
    max_eig(&k, &mass, DEFAULT_EIG_TOL)
}

/// Per-cell critical time steps over a mesh: uncut cells use their lumped
/// element pair (one value shared by all of them), cut cells use the
/// composite-rule pair with the requested mass treatment. Empty cells are
/// excluded (None).
pub fn cellwise_critical_dt(
    mesh: &SpectralMesh,
    material: Material,
    cfg: &IndicatorConfig,
    lumping: Lumping,
) -> Result<Vec<Option<f64>>, WaveError> {
    use crate::cutcell::CellKind;
    let shape = mesh.shape();
    let nb = shape.len();
    let mut uncut_dt: Option<f64> = None;
    let mut out = vec![None; mesh.n_cells()];
    for cell in 0..mesh.n_cells() {
        match mesh.classes[cell].kind {
            CellKind::Empty => {}
            CellKind::Uncut => {
                if uncut_dt.is_none() {
                    let b = mesh.cell_box(cell);
                    let (m_diag, k_e) = uncut_element(shape, &b, mesh.dim, material);
                    let lambda = lambda_diag_pair(&m_diag, &k_e, nb)?;
                    uncut_dt = Some(2.0 / lambda.sqrt());
                }
                out[cell] = uncut_dt;
            }
            CellKind::Cut => {
                let b = mesh.cell_box(cell);
                let (m_e, k_e) = cut_element(
                    shape,
                    &mesh.domain,
                    cfg,
                    &b,
                    mesh.dim,
                    mesh.tree_depth,
                    material,
                );
                let lambda = match lumping {
                    Lumping::Consistent => lambda_dense_pair(&m_e, &k_e, nb)?,
                    Lumping::Hrz => {
                        let diag = crate::assembly::hrz_lump(&m_e, nb);
                        lambda_diag_pair(&diag, &k_e, nb)?
                    }
                };
                out[cell] = Some(2.0 / lambda.sqrt());
            }
        }
    }
    Ok(out)
}

/// Maximum eigenfrequency of one unit cell cut by a horizontal plane:
/// physical material (ρ = c = 1) below height η, fictitious density rho_f
/// above. η = 1 is the uncut cell with its nodally lumped mass; anything
/// below uses the composite rule and the consistent mass. All quantities
/// are in the cell's own units (the cell is 1×1).
pub fn cut_cell_spectrum(eta: f64, p: usize, depth: u32, rho_f: f64) -> Result<f64, WaveError> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(WaveError::config("fill height must lie in [0, 1]"));
    }
    let shape = ShapeSet::new(p, 2);
    let cell = AxisBox::new([0.0; 3], [1.0, 1.0, 0.0]);
    let material = Material::new(1.0, 1.0);
    let lambda = if eta >= 1.0 {
        let (m_diag, k_e) = uncut_element(&shape, &cell, 2, material);
        lambda_diag_pair(&m_diag, &k_e, shape.len())?
    } else {
        let domain = ImplicitDomain::half_space([0.0, 1.0, 0.0], eta);
        let cfg = IndicatorConfig::from_alpha(rho_f);
        let (m_e, k_e) = cut_element(&shape, &domain, &cfg, &cell, 2, depth, material);
        lambda_dense_pair(&m_e, &k_e, shape.len())?
    };
    Ok(lambda.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::mesh::{build_mesh, partition_dofs, DofPartition};
    use approx::assert_relative_eq;

    /// Fixed-free spring chain: n_heavy unit masses then n_light tiny ones,
    /// unit springs; the stiffness is tridiagonal with a free end.
    fn spring_chain() -> PartitionedSystem {
        let n = 10;
        let mut trips = Vec::new();
        for i in 0..n {
            let diag = if i == n - 1 { 1.0 } else { 2.0 };
            trips.push((i, i, diag));
            if i + 1 < n {
                trips.push((i, i + 1, -1.0));
                trips.push((i + 1, i, -1.0));
            }
        }
        let k = SparseSym::from_triplets(n, trips);
        let masses: Vec<f64> = (0..n).map(|i| if i < 8 { 1.0 } else { 1e-3 }).collect();
        let i_d: Vec<usize> = (0..8).collect();
        let i_c = vec![8, 9];
        let mut c_pos = vec![None; n];
        c_pos[8] = Some(0);
        c_pos[9] = Some(1);
        let partition = DofPartition { i_d, i_c, c_pos };
        let m_dd: Vec<f64> = (0..8).map(|i| masses[i]).collect();
        let m_cc = SparseSym::from_diagonal(&[1e-3, 1e-3]);
        PartitionedSystem {
            n,
            k,
            m_dd,
            m_cc,
            f_x: vec![0.0; n],
            partition,
        }
    }

    fn dense_generalized_max(k: &SparseSym, m: &SparseSym) -> f64 {
        let n = k.dim();
        let mut kd = nalgebra::DMatrix::<f64>::zeros(n, n);
        for (i, j, v) in k.triplets() {
            kd[(i, j)] = v;
        }
        let mut md = nalgebra::DMatrix::<f64>::zeros(n, n);
        for (i, j, v) in m.triplets() {
            md[(i, j)] = v;
        }
        // Transform to the standard problem L⁻¹ K L⁻ᵀ with M = L Lᵀ.
        let chol = md.cholesky().expect("mass not SPD");
        let l_inv = chol.l().try_inverse().unwrap();
        let a = &l_inv * kd * l_inv.transpose();
        let sym = nalgebra::SymmetricEigen::new(a);
        sym.eigenvalues.iter().cloned().fold(f64::MIN, f64::max)
    }

    #[test]
    fn diagonal_example() {
        let k = SparseSym::from_diagonal(&[1.0, 4.0]);
        let m = [1.0, 1.0];
        let lambda = max_eig(&k, &DiagonalMass(&m), 1e-10).unwrap();
        assert_relative_eq!(lambda, 4.0, max_relative = 1e-9);
    }

    #[test]
    fn spring_chain_critical_steps_match_known_values() {
        let sys = spring_chain();
        let global = critical_dt(&sys, Scope::Global).unwrap();
        // Dense oracle agreement.
        let dense = dense_generalized_max(&sys.k, &sys.mass_sparse());
        assert_relative_eq!(
            global.omega_max * global.omega_max,
            dense,
            max_relative = 1e-7
        );
        // The two light end masses dominate: λ ≈ 1000·(3+√5)/2.
        assert_relative_eq!(global.dt_crit, 3.9086e-2, max_relative = 3e-5);

        let explicit = critical_dt(&sys, Scope::ExplicitSubsystem).unwrap();
        // K_dd is the 8×8 tridiagonal (−1, 2, −1): λ_max = 2 + 2cos(π/9).
        let closed = 2.0 + 2.0 * (std::f64::consts::PI / 9.0).cos();
        assert_relative_eq!(
            explicit.omega_max * explicit.omega_max,
            closed,
            max_relative = 1e-8
        );
        assert_relative_eq!(explicit.dt_crit, 1.0154, max_relative = 5e-5);
        assert!(explicit.dt_crit > global.dt_crit);
        assert_relative_eq!(explicit.dt_crit, 2.0 / explicit.omega_max);
    }

    #[test]
    fn uncut_mesh_scopes_agree_and_match_dense_oracle() {
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
        let sys = assemble(&mesh, Material::new(1.0, 1.5), &cfg, Lumping::Consistent).unwrap();
        let global = critical_dt(&sys, Scope::Global).unwrap();
        let explicit = critical_dt(&sys, Scope::ExplicitSubsystem).unwrap();
        assert_relative_eq!(global.dt_crit, explicit.dt_crit, max_relative = 1e-9);
        let dense = dense_generalized_max(&sys.k, &sys.mass_sparse());
        assert_relative_eq!(
            global.omega_max * global.omega_max,
            dense,
            max_relative = 1e-6
        );
    }

    #[test]
    fn cut_mesh_explicit_window_is_wider() {
        let domain = ImplicitDomain::difference(
            ImplicitDomain::FullSpace,
            vec![ImplicitDomain::ball([1.43, 0.96, 0.0], 0.51)],
        );
        let mesh = build_mesh(
            AxisBox::new([0.0; 3], [3.0, 2.0, 0.0]),
            [6, 4, 1],
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
        let global = critical_dt(&sys, Scope::Global).unwrap();
        let explicit = critical_dt(&sys, Scope::ExplicitSubsystem).unwrap();
        assert!(explicit.dt_crit >= global.dt_crit);
        // Dense cross-check of the global estimate.
        let dense = dense_generalized_max(&sys.k, &sys.mass_sparse());
        assert_relative_eq!(
            global.omega_max * global.omega_max,
            dense,
            max_relative = 1e-6
        );
    }

    #[test]
    fn empty_explicit_subsystem_is_a_config_error() {
        let sys = PartitionedSystem {
            n: 2,
            k: SparseSym::from_diagonal(&[1.0, 1.0]),
            m_dd: vec![],
            m_cc: SparseSym::from_diagonal(&[1.0, 1.0]),
            f_x: vec![0.0; 2],
            partition: DofPartition {
                i_d: vec![],
                i_c: vec![0, 1],
                c_pos: vec![Some(0), Some(1)],
            },
        };
        let err = critical_dt(&sys, Scope::ExplicitSubsystem).unwrap_err();
        assert!(matches!(err, WaveError::Config(_)));
    }

    #[test]
    fn cellwise_map_flags_cut_cells_as_stiff() {
        let domain = ImplicitDomain::difference(
            ImplicitDomain::FullSpace,
            vec![ImplicitDomain::ball([1.5, 1.0, 0.0], 0.55)],
        );
        let mesh = build_mesh(
            AxisBox::new([0.0; 3], [3.0, 2.0, 0.0]),
            [6, 4, 1],
            2,
            2,
            &domain,
            5,
            1e-10,
        )
        .unwrap();
        let cfg = IndicatorConfig::from_beta(6);
        let map = cellwise_critical_dt(&mesh, Material::new(1.0, 1.0), &cfg, Lumping::Consistent)
            .unwrap();
        use crate::cutcell::CellKind;
        let mut uncut_val = None;
        let mut min_cut = f64::INFINITY;
        for (cell, dt) in map.iter().enumerate() {
            match mesh.classes[cell].kind {
                CellKind::Empty => assert!(dt.is_none()),
                CellKind::Uncut => {
                    let v = dt.expect("uncut cell missing dt");
                    if let Some(u) = uncut_val {
                        assert_relative_eq!(v, u, max_relative = 1e-12);
                    }
                    uncut_val = Some(v);
                }
                CellKind::Cut => min_cut = min_cut.min(dt.expect("cut cell missing dt")),
            }
        }
        let uncut = uncut_val.expect("no uncut cells in the map");
        assert!(min_cut < uncut / 3.0, "cut cells should be much stiffer");
    }

    #[test]
    fn partition_positions_are_consistent() {
        // cellwise/partition plumbing sanity on a mixed mesh.
        let domain = ImplicitDomain::half_space([1.0, 0.2, 0.0], 1.7);
        let mesh = build_mesh(
            AxisBox::new([0.0; 3], [3.0, 2.0, 0.0]),
            [3, 2, 1],
            2,
            1,
            &domain,
            4,
            1e-10,
        )
        .unwrap();
        let part = partition_dofs(&mesh);
        for (pos, &dof) in part.i_c.iter().enumerate() {
            assert_eq!(part.c_pos[dof], Some(pos));
        }
    }

    #[test]
    fn cut_cell_spectrum_reproduces_calibrated_endpoints() {
        // Full cell, lumped: tensor eigenvalues of the 1D lumped pairs.
        assert_relative_eq!(
            cut_cell_spectrum(1.0, 1, 8, 1e-6).unwrap(),
            2.0,
            max_relative = 1e-8
        );
        assert_relative_eq!(
            cut_cell_spectrum(1.0, 2, 8, 1e-6).unwrap(),
            28.8f64.sqrt(),
            max_relative = 1e-8
        );
        assert_relative_eq!(
            cut_cell_spectrum(1.0, 3, 8, 1e-6).unwrap(),
            120.0f64.sqrt(),
            max_relative = 1e-8
        );
        // Fully fictitious cell: the indicator cancels, leaving the
        // consistent-mass spectrum of the full cell (λ = 24 at p = 1).
        assert_relative_eq!(
            cut_cell_spectrum(0.0, 1, 6, 1e-6).unwrap(),
            24.0f64.sqrt(),
            max_relative = 1e-5
        );
        // Half-filled linear cell: λ → 12 + 48 = 60 as ρ_f → 0.
        assert_relative_eq!(
            cut_cell_spectrum(0.5, 1, 13, 1e-6).unwrap(),
            60.0f64.sqrt(),
            max_relative = 1e-5
        );
        assert_relative_eq!(
            cut_cell_spectrum(0.5, 1, 13, 1e-6).unwrap(),
            7.7459,
            max_relative = 2e-5
        );
    }

    #[test]
    fn cut_cell_spectrum_grows_as_fill_shrinks() {
        for p in 1..=3 {
            let tiny = cut_cell_spectrum(0.01, p, 8, 1e-6).unwrap();
            let fat = cut_cell_spectrum(0.9, p, 8, 1e-6).unwrap();
            assert!(
                tiny > 10.0 * fat,
                "p={}: ω(0.01)={} not ≫ ω(0.9)={}",
                p,
                tiny,
                fat
            );
            // Monotone decrease over a coarse η grid.
            let grid = [0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 0.98];
            let mut prev = f64::INFINITY;
            for &eta in &grid {
                let w = cut_cell_spectrum(eta, p, 8, 1e-6).unwrap();
                assert!(w < prev, "p={}: ω not decreasing at η={}", p, eta);
                prev = w;
            }
        }
    }
}
