//! Time integration of M ü + K û = f_t(t)·f_x.
//!
//! Four schemes share the Newmark update family
//!
//!   û_{n+1} = û_n + Δt u̇_n + Δt²(½−β) ü_n + Δt²β ü_{n+1}
//!   u̇_{n+1} = u̇_n + Δt(1−γ) ü_n + Δtγ ü_{n+1}
//!
//! with γ = ½ throughout (second order, non-dissipative):
//!
//! * central differences (β = 0): fully explicit, two-step form
//!   u_{n+1} = 2u_n − u_{n−1} + Δt²a_n, conditionally stable (Δt ≤ 2/ω_max);
//! * trapezoidal rule (β = ¼): implicit, unconditionally stable, one
//!   factorization of M + βΔt²K;
//! * a semi-implicit combination that advances the uncut (diagonal-mass)
//!   DOFs explicitly and only the cut-supported set implicitly, so the
//!   stable step is governed by the benign explicit subsystem while the
//!   pathological cut-cell frequencies are absorbed by the implicit block;
//! * leap-frog substepping, which keeps everything explicit but advances
//!   the cut block with m fine steps per coarse step.
//!
//! The explicit update paths of the central-difference and semi-implicit
//! runners are written over the same expressions in the same loop order, so
//! with an empty implicit set they produce bit-identical trajectories.

use crate::assembly::{MassSolver, PartitionedSystem};
use crate::error::WaveError;
use crate::linalg::{factorize, Factorization, SparseSym};

/// Newmark parameter pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewmarkParams {
    pub beta: f64,
    pub gamma: f64,
}

impl NewmarkParams {
    /// Central difference method.
    pub const CDM: NewmarkParams = NewmarkParams {
        beta: 0.0,
        gamma: 0.5,
    };
    /// Trapezoidal rule (average constant acceleration).
    pub const TRAPEZOIDAL: NewmarkParams = NewmarkParams {
        beta: 0.25,
        gamma: 0.5,
    };
}

/// State after a run. For central-difference-style runners the velocity is
/// the centered difference (u_{n+1} − u_{n−1})/(2Δt), which is only
/// available one step behind the newest displacement; the stored `v` is
/// that lagged reconstruction on the explicit set.
#[derive(Debug, Clone)]
pub struct IntegratorState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub u_prev: Vec<f64>,
    pub t: f64,
    pub step: usize,
}

/// Per-step hook; receives the step index, time, and the displacement
/// vector (step 0 is the initial state).
pub trait Observer {
    fn observe(&mut self, step: usize, t: f64, u: &[f64]);
}

/// Observer that keeps every displacement vector (tests, small systems).
#[derive(Debug, Default)]
pub struct TrajectoryRecorder {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Observer for TrajectoryRecorder {
    fn observe(&mut self, _step: usize, t: f64, u: &[f64]) {
        self.times.push(t);
        self.states.push(u.to_vec());
    }
}

/// Elastic (strain) energy ½ uᵀKu.
pub fn elastic_energy(k: &SparseSym, u: &[f64]) -> f64 {
    let ku = k.apply(u);
    0.5 * u.iter().zip(&ku).map(|(a, b)| a * b).sum::<f64>()
}

/// Divergence guard: the run aborts when ‖u‖_∞ turns non-finite or exceeds an
/// absolute runaway cap of 1e30. Displacements in any physically meaningful
/// run stay many orders of magnitude below that cap regardless of source
/// scaling, while an exponentially unstable mode crosses it within a handful
/// of steps of becoming visible. An absolute cap is deliberately independent
/// of the response history: relative rules (a scale armed at the first
/// nonzero norm, or a running peak) either false-positive on smoothly ramped
/// sources whose first step is vanishingly small, or miss steady exponential
/// growth whose per-step ratio stays below any fixed factor.
struct InstabilityGuard;

impl InstabilityGuard {
    fn new() -> Self {
        InstabilityGuard
    }

    fn check(&mut self, u: &[f64], step: usize) -> Result<(), WaveError> {
        let mut norm = 0.0f64;
        for &x in u {
            norm = norm.max(x.abs());
        }
        if !norm.is_finite() || norm > 1e30 {
            return Err(WaveError::numerical(format!(
                "instability detected at step {}",
                step
            )));
        }
        Ok(())
    }
}

fn notify(observers: &mut [&mut dyn Observer], step: usize, t: f64, u: &[f64]) {
    for obs in observers.iter_mut() {
        obs.observe(step, t, u);
    }
}

fn check_lengths(sys: &PartitionedSystem, u0: &[f64], v0: &[f64], dt: f64) {
    assert!(dt > 0.0, "time step must be positive");
    assert_eq!(u0.len(), sys.n, "initial displacement length mismatch");
    assert_eq!(v0.len(), sys.n, "initial velocity length mismatch");
}

/// Explicit central differences. The mass may be fully diagonal or carry a
/// consistent cut block; the latter is handled by one factorization inside
/// the blockwise mass solver.
pub fn run_cdm(
    sys: &PartitionedSystem,
    f_t: &dyn Fn(f64) -> f64,
    dt: f64,
    n_steps: usize,
    u0: &[f64],
    v0: &[f64],
    observers: &mut [&mut dyn Observer],
) -> Result<IntegratorState, WaveError> {
    check_lengths(sys, u0, v0, dt);
    let n = sys.n;
    let solver = MassSolver::new(sys)?;

    let mut u = u0.to_vec();
    let mut v = v0.to_vec();
    let mut r = vec![0.0f64; n];

    // Consistent initial acceleration: M a_0 = f(0) f_x − K u_0.
    let f0 = f_t(0.0);
    for i in 0..n {
        r[i] = f0 * sys.f_x[i] - sys.k.row_dot(i, &u);
    }
    let mut a = solver.solve(&r);

    // Fictitious previous step for the two-step recursion.
    let mut u_prev = vec![0.0f64; n];
    for i in 0..n {
        u_prev[i] = u[i] - dt * v[i] + 0.5 * dt * dt * a[i];
    }

    let mut guard = InstabilityGuard::new();
    notify(observers, 0, 0.0, &u);
    let mut u_next = vec![0.0f64; n];
    for step in 0..n_steps {
        let t_n = step as f64 * dt;
        let f_n = f_t(t_n);
        for i in 0..n {
            r[i] = f_n * sys.f_x[i] - sys.k.row_dot(i, &u);
        }
        a = solver.solve(&r);
        for i in 0..n {
            u_next[i] = 2.0 * u[i] - u_prev[i] + dt * dt * a[i];
        }
        for i in 0..n {
            v[i] = (u_next[i] - u_prev[i]) / (2.0 * dt);
        }
        guard.check(&u_next, step + 1)?;
        std::mem::swap(&mut u_prev, &mut u);
        std::mem::swap(&mut u, &mut u_next);
        notify(observers, step + 1, (step + 1) as f64 * dt, &u);
    }
    Ok(IntegratorState {
        t: n_steps as f64 * dt,
        step: n_steps,
        u,
        v,
        a,
        u_prev,
    })
}

/// Implicit trapezoidal Newmark (β = ¼, γ = ½): one factorization of
/// M + βΔt²K, unconditionally stable.
pub fn run_trapezoidal(
    sys: &PartitionedSystem,
    f_t: &dyn Fn(f64) -> f64,
    dt: f64,
    n_steps: usize,
    u0: &[f64],
    v0: &[f64],
    observers: &mut [&mut dyn Observer],
) -> Result<IntegratorState, WaveError> {
    check_lengths(sys, u0, v0, dt);
    let n = sys.n;
    let p = NewmarkParams::TRAPEZOIDAL;

    // Effective matrix M + βΔt²K, factored once.
    let a_eff = build_effective_matrix(sys, p.beta * dt * dt);
    let chol = factorize(&a_eff)?;

    let solver = MassSolver::new(sys)?;
    let mut u = u0.to_vec();
    let mut v = v0.to_vec();
    let mut r = vec![0.0f64; n];
    let f0 = f_t(0.0);
    for i in 0..n {
        r[i] = f0 * sys.f_x[i] - sys.k.row_dot(i, &u);
    }
    let mut a = solver.solve(&r);

    let mut guard = InstabilityGuard::new();
    notify(observers, 0, 0.0, &u);
    let mut ut = vec![0.0f64; n];
    let mut vt = vec![0.0f64; n];
    for step in 0..n_steps {
        let t_next = (step + 1) as f64 * dt;
        let f_next = f_t(t_next);
        for i in 0..n {
            ut[i] = u[i] + dt * v[i] + dt * dt * (0.5 - p.beta) * a[i];
            vt[i] = v[i] + dt * (1.0 - p.gamma) * a[i];
        }
        for i in 0..n {
            r[i] = f_next * sys.f_x[i] - sys.k.row_dot(i, &ut);
        }
        a = chol.solve(&r);
        for i in 0..n {
            u[i] = ut[i] + p.beta * dt * dt * a[i];
            v[i] = vt[i] + p.gamma * dt * a[i];
        }
        guard.check(&u, step + 1)?;
        notify(observers, step + 1, t_next, &u);
    }
    Ok(IntegratorState {
        u_prev: ut,
        t: n_steps as f64 * dt,
        step: n_steps,
        u,
        v,
        a,
    })
}

fn build_effective_matrix(sys: &PartitionedSystem, scale_k: f64) -> SparseSym {
    let mut trips = sys.mass_sparse().triplets();
    for (i, j, v) in sys.k.triplets() {
        trips.push((i, j, scale_k * v));
    }
    SparseSym::from_triplets(sys.n, trips)
}

/// Precomputed operators of the semi-implicit split for one Δt: the
/// diagonal explicit mass and the factored implicit matrix
/// S = M_cc + βΔt²K_cc. Rebuilt whenever Δt changes.
pub struct ImexOperators {
    pub params: NewmarkParams,
    pub dt: f64,
    pub s_chol: Factorization,
}

impl ImexOperators {
    pub fn build(sys: &PartitionedSystem, dt: f64) -> Result<Self, WaveError> {
        let params = NewmarkParams::TRAPEZOIDAL;
        let k_cc = sys.k_cc();
        let mut trips = sys.m_cc.triplets();
        for (i, j, v) in k_cc.triplets() {
            trips.push((i, j, params.beta * dt * dt * v));
        }
        let s = SparseSym::from_triplets(sys.m_cc.dim(), trips);
        let s_chol = factorize(&s)?;
        Ok(ImexOperators { params, dt, s_chol })
    }
}

/// Semi-implicit Newmark: explicit central differences on the diagonal-mass
/// set I_d, trapezoidal Newmark on the cut-supported set I_c. The explicit
/// part samples the force at t_n, the implicit part at t_{n+1}; the
/// implicit solve sees the freshly computed explicit displacements.
pub fn run_newmark_imex(
    sys: &PartitionedSystem,
    f_t: &dyn Fn(f64) -> f64,
    dt: f64,
    n_steps: usize,
    u0: &[f64],
    v0: &[f64],
    observers: &mut [&mut dyn Observer],
) -> Result<IntegratorState, WaveError> {
    check_lengths(sys, u0, v0, dt);
    let n = sys.n;
    let i_d = &sys.partition.i_d;
    let i_c = &sys.partition.i_c;
    let ops = ImexOperators::build(sys, dt)?;
    let (beta, gamma) = (ops.params.beta, ops.params.gamma);

    let solver = MassSolver::new(sys)?;
    let mut u = u0.to_vec();
    let mut v = v0.to_vec();
    let mut r = vec![0.0f64; n];
    let f0 = f_t(0.0);
    for i in 0..n {
        r[i] = f0 * sys.f_x[i] - sys.k.row_dot(i, &u);
    }
    let mut a = solver.solve(&r);

    let mut u_prev = vec![0.0f64; n];
    for i in 0..n {
        u_prev[i] = u[i] - dt * v[i] + 0.5 * dt * dt * a[i];
    }

    let mut guard = InstabilityGuard::new();
    notify(observers, 0, 0.0, &u);
    let mut u_next = vec![0.0f64; n];
    let mut rc = vec![0.0f64; i_c.len()];
    for step in 0..n_steps {
        let t_n = step as f64 * dt;
        let t_next = (step + 1) as f64 * dt;

        // Explicit half: acceleration at t_n, then the two-step update.
        let f_n = f_t(t_n);
        for (pos, &i) in i_d.iter().enumerate() {
            a[i] = (f_n * sys.f_x[i] - sys.k.row_dot(i, &u)) / sys.m_dd[pos];
        }
        for &i in i_d {
            u_next[i] = 2.0 * u[i] - u_prev[i] + dt * dt * a[i];
        }

        // Implicit half: candidate displacement w carries the new explicit
        // values on I_d and the Newmark predictor on I_c.
        let f_next = f_t(t_next);
        for &i in i_c {
            u_next[i] = u[i] + dt * v[i] + dt * dt * (0.5 - beta) * a[i];
            v[i] += dt * (1.0 - gamma) * a[i];
        }
        for (pos, &i) in i_c.iter().enumerate() {
            rc[pos] = f_next * sys.f_x[i] - sys.k.row_dot(i, &u_next);
        }
        let ac = ops.s_chol.solve(&rc);
        for (pos, &i) in i_c.iter().enumerate() {
            u_next[i] += beta * dt * dt * ac[pos];
            v[i] += gamma * dt * ac[pos];
            a[i] = ac[pos];
        }

        // Central-difference velocity on the explicit set (lagged).
        for &i in i_d {
            v[i] = (u_next[i] - u_prev[i]) / (2.0 * dt);
        }
        guard.check(&u_next, step + 1)?;
        std::mem::swap(&mut u_prev, &mut u);
        std::mem::swap(&mut u, &mut u_next);
        notify(observers, step + 1, t_next, &u);
    }
    Ok(IntegratorState {
        t: n_steps as f64 * dt,
        step: n_steps,
        u,
        v,
        a,
        u_prev,
    })
}

/// Interface treatment for the leap-frog substeps: the explicit-set
/// displacements seen by the cut rows during a substep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeapfrogCoupling {
    /// Linear interpolation between u^d_n and u^d_{n+1} (default).
    Interpolated,
    /// Hold u^d_n fixed across the coarse step.
    Frozen,
}

/// Explicit-explicit substepping: the diagonal-mass set advances with
/// Δt_coarse, the cut block with m central-difference substeps of
/// Δt_coarse/m. Both chains stay on their own uniform time lattices across
/// the whole run.
pub fn run_leapfrog(
    sys: &PartitionedSystem,
    f_t: &dyn Fn(f64) -> f64,
    dt_coarse: f64,
    m: usize,
    n_steps: usize,
    u0: &[f64],
    v0: &[f64],
    coupling: LeapfrogCoupling,
    observers: &mut [&mut dyn Observer],
) -> Result<IntegratorState, WaveError> {
    check_lengths(sys, u0, v0, dt_coarse);
    assert!(m >= 1, "substep ratio must be at least 1");
    let n = sys.n;
    let i_d = &sys.partition.i_d;
    let i_c = &sys.partition.i_c;
    let dt_f = dt_coarse / m as f64;

    let chol_cc = if sys.m_cc.dim() > 0 {
        Some(factorize(&sys.m_cc)?)
    } else {
        None
    };
    let solver = MassSolver::new(sys)?;

    let mut u = u0.to_vec();
    let mut r = vec![0.0f64; n];
    let f0 = f_t(0.0);
    for i in 0..n {
        r[i] = f0 * sys.f_x[i] - sys.k.row_dot(i, &u);
    }
    let mut a = solver.solve(&r);

    // Startup offsets on both lattices.
    let mut u_prev = vec![0.0f64; n];
    for &i in i_d.iter() {
        u_prev[i] = u[i] - dt_coarse * v0[i] + 0.5 * dt_coarse * dt_coarse * a[i];
    }
    let mut uc_prev: Vec<f64> = i_c
        .iter()
        .map(|&i| u[i] - dt_f * v0[i] + 0.5 * dt_f * dt_f * a[i])
        .collect();

    let mut guard = InstabilityGuard::new();
    notify(observers, 0, 0.0, &u);
    let mut u_next_d = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    let mut rc = vec![0.0f64; i_c.len()];
    let mut v = v0.to_vec();
    for step in 0..n_steps {
        let t_n = step as f64 * dt_coarse;

        // Coarse explicit update of the diagonal-mass set.
        let f_n = f_t(t_n);
        for (pos, &i) in i_d.iter().enumerate() {
            a[i] = (f_n * sys.f_x[i] - sys.k.row_dot(i, &u)) / sys.m_dd[pos];
        }
        for &i in i_d.iter() {
            u_next_d[i] = 2.0 * u[i] - u_prev[i] + dt_coarse * dt_coarse * a[i];
        }

        // Fine chain over the cut block.
        if let Some(chol) = &chol_cc {
            w.copy_from_slice(&u);
            for s in 0..m {
                let tau = t_n + s as f64 * dt_f;
                let theta = match coupling {
                    LeapfrogCoupling::Interpolated => s as f64 / m as f64,
                    LeapfrogCoupling::Frozen => 0.0,
                };
                for &i in i_d.iter() {
                    w[i] = u[i] + theta * (u_next_d[i] - u[i]);
                }
                let f_s = f_t(tau);
                for (pos, &i) in i_c.iter().enumerate() {
                    rc[pos] = f_s * sys.f_x[i] - sys.k.row_dot(i, &w);
                }
                let ac = chol.solve(&rc);
                for (pos, &i) in i_c.iter().enumerate() {
                    let next = 2.0 * w[i] - uc_prev[pos] + dt_f * dt_f * ac[pos];
                    uc_prev[pos] = w[i];
                    w[i] = next;
                    a[i] = ac[pos];
                }
            }
        }

        // Assemble the coarse state and reconstruct coarse velocities.
        for &i in i_d.iter() {
            let prev = u_prev[i];
            u_prev[i] = u[i];
            v[i] = (u_next_d[i] - prev) / (2.0 * dt_coarse);
            u[i] = u_next_d[i];
        }
        for &i in i_c.iter() {
            v[i] = (w[i] - u[i]) / dt_coarse;
            u[i] = w[i];
        }
        guard.check(&u, step + 1)?;
        notify(observers, step + 1, (step + 1) as f64 * dt_coarse, &u);
    }
    Ok(IntegratorState {
        t: n_steps as f64 * dt_coarse,
        step: n_steps,
        u,
        v,
        a,
        u_prev,
    })
}
