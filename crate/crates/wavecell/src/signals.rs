//! Temporal excitation signals, spatial source profiles, and the harmonic
//! (Helmholtz) reference solution used to measure time-integration error.
//!
//! The harmonic reference exploits that for a force f_x·sin(ωt) the exact
//! trajectory of M ü + K u = f is u(t) = a·sin(ωt) with (K − ω²M) a = f_x,
//! provided the start conditions are u(0) = 0, v(0) = ωa. Above the first
//! resonance that system is indefinite, so it is solved by a small dense LU
//! with partial pivoting rather than a symmetric-positive factorization.

use crate::error::WaveError;
use crate::geometry::Point;
use crate::linalg::SparseSym;

/// Time-dependent excitation factor f_t(t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemporalSignal {
    /// Derivative of a Gaussian centered at t_0 = 1/f_s with σ_t = 1/(2πf_s).
    GaussianDerivative { f_s: f64 },
    /// n_c-cycle sine burst: sin(2πf_s t)·sin²(πf_s t/n_c) on [0, n_c/f_s].
    SineBurst { f_s: f64, n_c: u32 },
    /// Steady sine sin(2πf_s t), paired with the harmonic reference.
    Harmonic { f_s: f64 },
}

impl TemporalSignal {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TemporalSignal::GaussianDerivative { f_s } => gaussian_derivative(t, f_s),
            TemporalSignal::SineBurst { f_s, n_c } => sine_burst(t, f_s, n_c),
            TemporalSignal::Harmonic { f_s } => (2.0 * std::f64::consts::PI * f_s * t).sin(),
        }
    }
}

/// Derivative-of-Gaussian pulse, antisymmetric about t_0 = 1/f_s.
pub fn gaussian_derivative(t: f64, f_s: f64) -> f64 {
    assert!(f_s > 0.0, "signal frequency must be positive");
    let t0 = 1.0 / f_s;
    let sigma = 1.0 / (2.0 * std::f64::consts::PI * f_s);
    let d = t - t0;
    let norm = (2.0 * std::f64::consts::PI).sqrt() * sigma * sigma * sigma;
    -d / norm * (-d * d / (2.0 * sigma * sigma)).exp()
}

/// Sine burst with a squared-sine window: C¹ at both ends of its support
/// [0, n_c/f_s], zero outside.
pub fn sine_burst(t: f64, f_s: f64, n_c: u32) -> f64 {
    assert!(f_s > 0.0, "signal frequency must be positive");
    assert!(n_c >= 1, "burst must contain at least one cycle");
    let support = n_c as f64 / f_s;
    if t < 0.0 || t > support {
        return 0.0;
    }
    let w = std::f64::consts::PI * f_s * t;
    (2.0 * w).sin() * (w / n_c as f64).sin().powi(2)
}

/// Isotropic Gaussian bell over the first `dim` coordinates.
fn gaussian_bell(x: Point, center: Point, sigma: f64, amplitude: f64, dim: usize) -> f64 {
    assert!(sigma > 0.0, "spatial width must be positive");
    let mut r2 = 0.0;
    for a in 0..dim {
        let d = x[a] - center[a];
        r2 += d * d;
    }
    amplitude * (-r2 / (2.0 * sigma * sigma)).exp()
}

pub fn gaussian_bell_2d(x: f64, y: f64, center: [f64; 2], sigma: f64, amplitude: f64) -> f64 {
    gaussian_bell(
        [x, y, 0.0],
        [center[0], center[1], 0.0],
        sigma,
        amplitude,
        2,
    )
}

pub fn gaussian_bell_3d(x: Point, center: Point, sigma: f64, amplitude: f64) -> f64 {
    gaussian_bell(x, center, sigma, amplitude, 3)
}

/// Closure form for force assembly.
pub fn gaussian_bell_source(
    center: Point,
    sigma: f64,
    amplitude: f64,
    dim: usize,
) -> impl Fn(Point) -> f64 {
    move |x| gaussian_bell(x, center, sigma, amplitude, dim)
}

/// Steady-state amplitude vector of M ü + K u = f_x sin(ωt) and the exact
/// trajectory built from it.
#[derive(Debug, Clone)]
pub struct HarmonicReference {
    pub amplitude: Vec<f64>,
    pub omega: f64,
}

impl HarmonicReference {
    pub fn displacement(&self, t: f64) -> Vec<f64> {
        let s = (self.omega * t).sin();
        self.amplitude.iter().map(|a| a * s).collect()
    }

    pub fn velocity(&self, t: f64) -> Vec<f64> {
        let c = self.omega * (self.omega * t).cos();
        self.amplitude.iter().map(|a| a * c).collect()
    }
}

/// Solve (K − ω²M) a = f_x at ω = 2π f_s. The matrix is generally
/// indefinite, so this densifies and uses partially pivoted LU — intended
/// for small systems (the spring chain), not PDE-scale ones.
pub fn harmonic_reference(
    k: &SparseSym,
    m: &SparseSym,
    f_x: &[f64],
    f_s: f64,
) -> Result<HarmonicReference, WaveError> {
    let n = k.dim();
    assert_eq!(m.dim(), n, "matrix dimensions disagree");
    assert_eq!(f_x.len(), n, "force length mismatch");
    let omega = 2.0 * std::f64::consts::PI * f_s;
    let mut a = vec![0.0f64; n * n];
    for (i, j, v) in k.triplets() {
        a[i * n + j] += v;
    }
    for (i, j, v) in m.triplets() {
        a[i * n + j] -= omega * omega * v;
    }
    let amplitude = lu_solve(a, n, f_x.to_vec()).map_err(|_| {
        WaveError::numerical(format!(
            "harmonic system is singular at f_s = {}: excitation sits on a resonance",
            f_s
        ))
    })?;
    Ok(HarmonicReference { amplitude, omega })
}

/// Dense LU with partial pivoting; fails on (numerically) singular input.
fn lu_solve(mut a: Vec<f64>, n: usize, mut b: Vec<f64>) -> Result<Vec<f64>, WaveError> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, a[r * n + col]))
            .max_by(|x, y| x.1.abs().partial_cmp(&y.1.abs()).unwrap())
            .unwrap();
        if pivot.abs() <= 1e-14 * scale {
            return Err(WaveError::numerical("singular matrix in LU solve"));
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            b.swap(col, pivot_row);
        }
        for r in (col + 1)..n {
            let factor = a[r * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            a[r * n + col] = 0.0;
            for j in (col + 1)..n {
                a[r * n + j] -= factor * a[col * n + j];
            }
            b[r] -= factor * b[col];
        }
    }
    // Back substitution.
    let mut x = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in (i + 1)..n {
            s -= a[i * n + j] * x[j];
        }
        x[i] = s / a[i * n + i];
    }
    Ok(x)
}
