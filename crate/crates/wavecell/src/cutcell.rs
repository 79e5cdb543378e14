//! Cut-cell treatment: spacetree (binary/quad/octree) integration meshes,
//! indicator-weighted composite quadrature rules, and cell classification.
//!
//! Cells crossed by the domain boundary cannot be integrated accurately by a
//! single tensor rule, so they are recursively subdivided towards the boundary.
//! A node is split into 2^d children whenever its 2^d corner samples plus the
//! center sample disagree on membership and the maximum depth has not been
//! reached. Every leaf then carries a tensor Gauss-Legendre rule, and each
//! quadrature point stores its indicator value α. Uncut leaves keep α constant,
//! so the composite rule degrades gracefully to plain Gauss quadrature away
//! from the boundary.
//!
//! The corner+center sampling is cheap but can miss features smaller than a
//! leaf (a false "uncut" verdict); the tree depth bounds that risk.

use crate::geometry::{alpha, contains, AxisBox, ImplicitDomain, IndicatorConfig, Point};
use crate::quadrature::gauss_legendre_rule;

/// Classification of a grid cell relative to the physical domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    /// Every spacetree sample point is inside Ω_p.
    Uncut,
    /// Boundary crosses the cell (mixed samples, fill above threshold).
    Cut,
    /// Fill ratio below the discard threshold ε.
    Empty,
}

/// Cell kind together with the measured fill ratio η ∈ [0, 1].
#[derive(Debug, Clone, Copy)]
pub struct CellClass {
    pub kind: CellKind,
    pub fill_ratio: f64,
}

/// A leaf box of the spacetree. `uniform_inside` is `Some(flag)` when all
/// corner+center samples of the leaf agree, `None` for mixed leaves at the
/// depth cap.
#[derive(Debug, Clone)]
pub struct SpacetreeLeaf {
    pub bounds: AxisBox,
    pub depth: u32,
    pub uniform_inside: Option<bool>,
}

/// One weighted, indicator-tagged quadrature point in physical coordinates.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub x: Point,
    pub weight: f64,
    pub alpha: f64,
}

/// Composite spacetree quadrature rule over one cell.
///
/// Weights are positive and sum to the cell measure; α carries the physical /
/// fictitious distinction into the integrand.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub points: Vec<QuadPoint>,
}

impl CompositeRule {
    /// Integrate `f` against the α-weighted measure: Σ w α f(x).
    pub fn integrate_alpha(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points
            .iter()
            .map(|q| q.weight * q.alpha * f(q.x))
            .sum()
    }

    /// Total weight (= cell measure by the partition property).
    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|q| q.weight).sum()
    }
}

/// Sample the 2^d corners plus the center of a box; `Some(flag)` when all
/// samples agree on membership, `None` when mixed.
fn sample_uniformity(domain: &ImplicitDomain, b: &AxisBox, dim: usize) -> Option<bool> {
    let first = contains(domain, b.center());
    for corner in b.corners(dim) {
        if contains(domain, corner) != first {
            return None;
        }
    }
    Some(first)
}

fn subdivide(b: &AxisBox, dim: usize) -> Vec<AxisBox> {
    let c = b.center();
    let mut out = Vec::with_capacity(1 << dim);
    for mask in 0..(1usize << dim) {
        let mut min = b.min;
        let mut max = b.max;
        for axis in 0..dim {
            if mask >> axis & 1 == 1 {
                min[axis] = c[axis];
            } else {
                max[axis] = c[axis];
            }
        }
        out.push(AxisBox::new(min, max));
    }
    out
}

/// Build the adaptive spacetree over `cell`. Leaves partition the cell exactly
/// (binary subdivision arithmetic); traversal order is deterministic.
pub fn build_spacetree(
    domain: &ImplicitDomain,
    cell: &AxisBox,
    dim: usize,
    max_depth: u32,
) -> Vec<SpacetreeLeaf> {
    let mut leaves = Vec::new();
    let mut stack = vec![(cell.clone(), 0u32)];
    while let Some((b, depth)) = stack.pop() {
        let uniform = sample_uniformity(domain, &b, dim);
        if uniform.is_some() || depth >= max_depth {
            leaves.push(SpacetreeLeaf {
                bounds: b,
                depth,
                uniform_inside: uniform,
            });
        } else {
            for child in subdivide(&b, dim).into_iter().rev() {
                stack.push((child, depth + 1));
            }
        }
    }
    leaves
}

/// Compose the indicator-weighted quadrature rule: a tensor Gauss-Legendre
/// rule with `n_per_axis` points per axis on every leaf, each point tagged
/// with α evaluated at that point.
pub fn composite_rule(
    domain: &ImplicitDomain,
    cfg: &IndicatorConfig,
    cell: &AxisBox,
    dim: usize,
    max_depth: u32,
    n_per_axis: usize,
) -> CompositeRule {
    let rule = gauss_legendre_rule(n_per_axis);
    let leaves = build_spacetree(domain, cell, dim, max_depth);
    let per_leaf = n_per_axis.pow(dim as u32);
    let mut points = Vec::with_capacity(leaves.len() * per_leaf);
    for leaf in &leaves {
        let b = &leaf.bounds;
        let half = [
            0.5 * (b.max[0] - b.min[0]),
            0.5 * (b.max[1] - b.min[1]),
            0.5 * (b.max[2] - b.min[2]),
        ];
        let mid = b.center();
        let counts = [
            n_per_axis,
            if dim >= 2 { n_per_axis } else { 1 },
            if dim >= 3 { n_per_axis } else { 1 },
        ];
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    let idx = [i, j, k];
                    let mut x = mid;
                    let mut w = 1.0;
                    for axis in 0..dim {
                        x[axis] = mid[axis] + half[axis] * rule.points[idx[axis]];
                        w *= rule.weights[idx[axis]] * half[axis];
                    }
                    let a = match leaf.uniform_inside {
                        Some(true) => 1.0,
                        Some(false) => cfg.alpha_f,
                        None => alpha(domain, cfg, x),
                    };
                    points.push(QuadPoint {
                        x,
                        weight: w,
                        alpha: a,
                    });
                }
            }
        }
    }
    CompositeRule { points }
}

/// Fill ratio via the spacetree rule: fraction of quadrature weight whose
/// points lie inside Ω_p. Two Gauss points per axis per leaf are plenty since
/// the leaves already resolve the boundary.
pub fn fill_ratio_via_spacetree(
    domain: &ImplicitDomain,
    cell: &AxisBox,
    dim: usize,
    tree_depth: u32,
) -> f64 {
    // The indicator config is irrelevant here; membership is re-evaluated.
    let cfg = IndicatorConfig::from_beta(1);
    let rule = composite_rule(domain, &cfg, cell, dim, tree_depth, 2);
    let mut inside = 0.0;
    let mut total = 0.0;
    for q in &rule.points {
        total += q.weight;
        // α was assigned from membership (uniform leaves) or pointwise; both
        // reduce to the same predicate.
        if q.alpha == 1.0 {
            inside += q.weight;
        }
    }
    if total <= 0.0 {
        return 0.0;
    }
    let eta = inside / total;
    eta.clamp(0.0, 1.0)
}

/// Classify a cell: `Uncut` when every spacetree sample is inside, `Empty`
/// when the fill ratio falls below `eps`, `Cut` otherwise.
pub fn classify_cell(
    domain: &ImplicitDomain,
    cell: &AxisBox,
    dim: usize,
    tree_depth: u32,
    eps: f64,
) -> CellClass {
    assert!(eps > 0.0 && eps < 1.0, "empty threshold must lie in (0, 1)");
    let leaves = build_spacetree(domain, cell, dim, tree_depth);
    if leaves.len() == 1 {
        match leaves[0].uniform_inside {
            Some(true) => {
                return CellClass {
                    kind: CellKind::Uncut,
                    fill_ratio: 1.0,
                }
            }
            Some(false) => {
                return CellClass {
                    kind: CellKind::Empty,
                    fill_ratio: 0.0,
                }
            }
            None => {}
        }
    }
    let eta = fill_ratio_via_spacetree(domain, cell, dim, tree_depth);
    if eta < eps {
        CellClass {
            kind: CellKind::Empty,
            fill_ratio: eta,
        }
    } else {
        CellClass {
            kind: CellKind::Cut,
            fill_ratio: eta,
        }
    }
}
