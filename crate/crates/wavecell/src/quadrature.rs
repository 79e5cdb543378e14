//! 1D Gauss-Lobatto-Legendre (GLL) and Gauss-Legendre quadrature rules, plus
//! Lagrange shape functions on GLL nodes and their tensor products.
//!
//! The GLL rule on `[-1, 1]` with `p + 1` points contains both endpoints; its
//! interior points are the roots of the derivative of the Legendre polynomial
//! of degree `p`. Collocating Lagrange nodes with GLL quadrature points is what
//! makes the element mass matrix diagonal on uncut cells. The Gauss-Legendre
//! rule with `n` points (no endpoints) integrates polynomials up to degree
//! `2n - 1` exactly and is used wherever full accuracy of the integrand
//! matters (stiffness, loads, cut-cell leaves).
//!
//! Rules are computed on demand by bracketed Newton iteration (tolerance
//! 1e-14), not read from tables, so any reasonable degree works.

/// Newton iteration tolerance on the root residual.
const ROOT_TOL: f64 = 1e-14;
/// Iteration cap for a single root; generous since Newton converges in a
/// handful of steps from the brackets used below.
const ROOT_MAX_ITER: usize = 200;

/// A 1D quadrature rule on the reference interval `[-1, 1]`.
///
/// `points` are strictly increasing; `weights` are positive and sum to 2.
#[derive(Debug, Clone)]
pub struct Rule1D {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    /// Number of quadrature points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrate a scalar function over `[-1, 1]` with this rule.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Legendre polynomial `L_p` and its first derivative at `x`, by the
/// three-term recurrence `(k+1) L_{k+1} = (2k+1) x L_k - k L_{k-1}` and the
/// derivative identity `(x^2 - 1) L_p' = p (x L_p - L_{p-1})`.
pub fn legendre(p: usize, x: f64) -> (f64, f64) {
    if p == 0 {
        return (1.0, 0.0);
    }
    let mut prev = 1.0; // L_0
    let mut cur = x; // L_1
    for k in 1..p {
        let next = ((2 * k + 1) as f64 * x * cur - k as f64 * prev) / (k + 1) as f64;
        prev = cur;
        cur = next;
    }
    let deriv = if (x * x - 1.0).abs() < 1e-30 {
        // Endpoint limit: L_p'(±1) = ±^(p+1) p(p+1)/2.
        let sign = if x > 0.0 {
            1.0
        } else {
            (-1.0f64).powi(p as i32 + 1)
        };
        sign * (p * (p + 1)) as f64 / 2.0
    } else {
        (p as f64) * (x * cur - prev) / (x * x - 1.0)
    };
    (cur, deriv)
}

/// Second derivative of `L_p` at interior `x`, from the Legendre ODE
/// `(1 - x^2) L_p'' = 2 x L_p' - p(p+1) L_p`.
fn legendre_dd(p: usize, x: f64) -> f64 {
    let (v, d) = legendre(p, x);
    (2.0 * x * d - (p * (p + 1)) as f64 * v) / (1.0 - x * x)
}

/// Bracketed Newton: find the root of `f` inside `(lo, hi)` given
/// `f(lo)` and `f(hi)` of opposite sign. Newton steps that leave the bracket
/// fall back to bisection, so convergence is guaranteed.
fn bracketed_newton(
    f: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    f_lo_sign: f64,
) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..ROOT_MAX_ITER {
        let (v, d) = f(x);
        // Converged when the Newton correction is below tolerance (the
        // residual measured in root coordinates); the raw polynomial value
        // cannot always reach 1e-14 in f64 when its derivative is large.
        let step = v / d;
        if step.abs() < ROOT_TOL {
            return x - step;
        }
        // Maintain the bracket.
        if v * f_lo_sign > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - step;
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-16 {
            return x;
        }
    }
    // The polynomials involved are smooth with simple roots; reaching the cap
    // indicates an internal fault rather than a user error.
    panic!("quadrature root finding failed to converge (internal fault)");
}

/// Symmetrize a root set: average mirrored pairs so the rule is exactly
/// symmetric about 0 regardless of floating-point drift, and pin the middle
/// root of odd-count sets to exactly 0.
fn symmetrize(points: &mut [f64]) {
    let n = points.len();
    for i in 0..n / 2 {
        let mirrored = 0.5 * (points[i] - points[n - 1 - i]);
        points[i] = mirrored;
        points[n - 1 - i] = -mirrored;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
}

/// Gauss-Lobatto-Legendre rule with `p + 1` points for degree `p >= 1`.
///
/// Points include the endpoints `±1`; the interior points are the roots of
/// `L_p'`. Weights are `w_j = 2 / (p (p+1) [L_p(ξ_j)]²)`. Exact for
/// polynomials of degree `<= 2p - 1`.
pub fn gll_rule(p: usize) -> Rule1D {
    assert!(p >= 1, "GLL rule requires degree p >= 1");
    let n = p + 1;
    let mut points = vec![0.0; n];
    points[0] = -1.0;
    points[n - 1] = 1.0;
    if p >= 2 {
        // The p - 1 interior roots of L_p' interlace the roots of L_p; a fine
        // sign-change scan gives robust brackets for any moderate p.
        let interior = p - 1;
        let scan = 20 * p;
        let mut found = 0;
        let mut prev_x = -1.0 + 1e-12;
        let mut prev_v = legendre(p, prev_x).1;
        for s in 1..=scan {
            let x = -1.0 + 2.0 * s as f64 / scan as f64 - 1e-12;
            let v = legendre(p, x).1;
            if prev_v == 0.0 {
                points[1 + found] = prev_x;
                found += 1;
            } else if prev_v * v < 0.0 {
                let root = bracketed_newton(
                    |t| (legendre(p, t).1, legendre_dd(p, t)),
                    prev_x,
                    x,
                    prev_v.signum(),
                );
                points[1 + found] = root;
                found += 1;
            }
            prev_x = x;
            prev_v = v;
            if found == interior {
                break;
            }
        }
        assert_eq!(
            found, interior,
            "GLL bracket scan missed interior roots (internal fault)"
        );
        symmetrize(&mut points[1..n - 1]);
    }
    let pp1 = (p * (p + 1)) as f64;
    let weights = points
        .iter()
        .map(|&x| {
            let (v, _) = legendre(p, x);
            2.0 / (pp1 * v * v)
        })
        .collect();
    Rule1D { points, weights }
}

/// Gauss-Legendre rule with `n` points, exact for degree `<= 2n - 1`.
///
/// Points are the roots of `L_n` (all interior); weights are
/// `w_j = 2 / ((1 - ξ_j²) [L_n'(ξ_j)]²)`.
pub fn gauss_legendre_rule(n: usize) -> Rule1D {
    assert!(n >= 1, "Gauss-Legendre rule requires n >= 1");
    let mut points = vec![0.0; n];
    for j in 0..n {
        // Classic asymptotic initial guess, then Newton on L_n. Each root is
        // simple and the guess lands close, so plain Newton is safe; we still
        // clamp to (-1, 1) for robustness.
        let mut x = -(std::f64::consts::PI * (j as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..ROOT_MAX_ITER {
            let (v, d) = legendre(n, x);
            let step = v / d;
            x -= step;
            x = x.clamp(-1.0 + 1e-15, 1.0 - 1e-15);
            if step.abs() < ROOT_TOL {
                break;
            }
        }
        points[j] = x;
    }
    symmetrize(&mut points);
    let weights = points
        .iter()
        .map(|&x| {
            let (_, d) = legendre(n, x);
            2.0 / ((1.0 - x * x) * d * d)
        })
        .collect();
    Rule1D { points, weights }
}

/// Lagrange shape functions of degree `p` on the GLL nodes, tensorized over
/// `dim` axes. Function count is `(p + 1)^dim`, ordered lexicographically with
/// the x index fastest.
#[derive(Debug, Clone)]
pub struct ShapeSet {
    pub p: usize,
    pub dim: usize,
    /// GLL nodes, shared by every axis.
    pub nodes: Vec<f64>,
}

impl ShapeSet {
    pub fn new(p: usize, dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "dimension must be 1, 2 or 3");
        ShapeSet {
            p,
            dim,
            nodes: gll_rule(p).points,
        }
    }

    /// Number of tensor-product shape functions, `(p + 1)^dim`.
    pub fn len(&self) -> usize {
        (self.p + 1).pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Value and derivative of the 1D Lagrange polynomial for node `i` at `xi`,
    /// by the direct product formula and its product-rule derivative.
    pub fn lagrange_eval(&self, i: usize, xi: f64) -> (f64, f64) {
        let nodes = &self.nodes;
        let mut value = 1.0;
        for (m, &xm) in nodes.iter().enumerate() {
            if m != i {
                value *= (xi - xm) / (nodes[i] - xm);
            }
        }
        let mut deriv = 0.0;
        for (k, &xk) in nodes.iter().enumerate() {
            if k == i {
                continue;
            }
            let mut term = 1.0 / (nodes[i] - xk);
            for (m, &xm) in nodes.iter().enumerate() {
                if m != i && m != k {
                    term *= (xi - xm) / (nodes[i] - xm);
                }
            }
            deriv += term;
        }
        (value, deriv)
    }

    /// Values and reference-space gradients of all tensor-product functions at
    /// `xi` (componentwise in `[-1, 1]`). Unused trailing gradient components
    /// are zero for `dim < 3`.
    pub fn tensor_eval(&self, xi: [f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
        let n1 = self.p + 1;
        // Per-axis value/derivative tables.
        let mut axis_val = [vec![1.0; 1], vec![1.0; 1], vec![1.0; 1]];
        let mut axis_der = [vec![0.0; 1], vec![0.0; 1], vec![0.0; 1]];
        for axis in 0..self.dim {
            let mut vals = Vec::with_capacity(n1);
            let mut ders = Vec::with_capacity(n1);
            for i in 0..n1 {
                let (v, d) = self.lagrange_eval(i, xi[axis]);
                vals.push(v);
                ders.push(d);
            }
            axis_val[axis] = vals;
            axis_der[axis] = ders;
        }
        let counts = [
            n1,
            if self.dim >= 2 { n1 } else { 1 },
            if self.dim >= 3 { n1 } else { 1 },
        ];
        let total = counts[0] * counts[1] * counts[2];
        let mut values = Vec::with_capacity(total);
        let mut gradients = Vec::with_capacity(total);
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    let v = axis_val[0][i] * axis_val[1][j] * axis_val[2][k];
                    let mut g = [0.0; 3];
                    g[0] = axis_der[0][i] * axis_val[1][j] * axis_val[2][k];
                    if self.dim >= 2 {
                        g[1] = axis_val[0][i] * axis_der[1][j] * axis_val[2][k];
                    }
                    if self.dim >= 3 {
                        g[2] = axis_val[0][i] * axis_val[1][j] * axis_der[2][k];
                    }
                    values.push(v);
                    gradients.push(g);
                }
            }
        }
        (values, gradients)
    }
}
