//! Scenario construction, config parsing, the end-to-end run pipeline, and
//! artifact emission.
//!
//! Three benchmark setups are built in: a ten-mass spring chain with two very
//! light end masses (the minimal system with the stiff-tail pathology of cut
//! cells), a perforated plate (10 m × 4 m with ten seeded circular holes),
//! and a 3D block with voids standing in for a scanned pillar. Each can also
//! be described by a plain-text config of `key = value` lines with dotted
//! keys plus a CSG geometry expression.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble, assemble_force, Lumping, Material, PartitionedSystem};
use crate::error::WaveError;
use crate::geometry::{contains, AxisBox, ImplicitDomain, IndicatorConfig, Point};
use crate::linalg::SparseSym;
use crate::mesh::{build_mesh, DofPartition, FieldProbe, SpectralMesh};
use crate::signals::{gaussian_bell_source, harmonic_reference, TemporalSignal};
use crate::spectra::{critical_dt, Scope};
use crate::timeint::{
    elastic_energy, run_cdm, run_leapfrog, run_newmark_imex, run_trapezoidal, IntegratorState,
    LeapfrogCoupling, Observer,
};

// ---------------------------------------------------------------------------
// Config text format
// ---------------------------------------------------------------------------

/// Flat `key = value` config: UTF-8 lines, `#` comments, dotted keys, arrays
/// as comma-separated values. Later duplicates overwrite earlier ones except
/// for indexed keys (`receiver.0`, `receiver.1`, …) which are all kept.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, WaveError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| WaveError::config(format!("key `{key}`: `{v}` is not a number"))),
        }
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, WaveError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<usize>().map(Some).map_err(|_| {
                WaveError::config(format!("key `{key}`: `{v}` is not a non-negative integer"))
            }),
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, WaveError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<u64>().map(Some).map_err(|_| {
                WaveError::config(format!("key `{key}`: `{v}` is not a non-negative integer"))
            }),
        }
    }

    pub fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>, WaveError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => {
                let mut out = Vec::new();
                for part in v.split(',') {
                    let p = part.trim();
                    out.push(p.parse::<f64>().map_err(|_| {
                        WaveError::config(format!("key `{key}`: `{p}` is not a number"))
                    })?);
                }
                Ok(Some(out))
            }
        }
    }

    /// Values of `prefix.0`, `prefix.1`, … in index order; missing indices
    /// are an error so silent gaps cannot drop a receiver.
    pub fn indexed(&self, prefix: &str) -> Result<Vec<&str>, WaveError> {
        let mut found: Vec<(usize, &str)> = Vec::new();
        for (k, v) in &self.entries {
            if let Some(rest) = k.strip_prefix(prefix) {
                if let Some(idx) = rest.strip_prefix('.') {
                    let i = idx.parse::<usize>().map_err(|_| {
                        WaveError::config(format!("key `{k}`: `{idx}` is not an index"))
                    })?;
                    found.push((i, v.as_str()));
                }
            }
        }
        found.sort_by_key(|&(i, _)| i);
        for (want, (got, _)) in found.iter().enumerate() {
            if *got != want {
                return Err(WaveError::config(format!(
                    "indexed key `{prefix}.{want}` is missing (found `{prefix}.{got}`)"
                )));
            }
        }
        Ok(found.into_iter().map(|(_, v)| v).collect())
    }
}

/// Parse config text. Errors carry the 1-based line number.
pub fn parse_config(text: &str) -> Result<ConfigMap, WaveError> {
    let mut entries = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(WaveError::config(format!(
                "line {}: expected `key = value`, got `{}`",
                lineno + 1,
                line
            )));
        };
        let key = line[..eq].trim();
        let value = line[eq + 1..].trim();
        if key.is_empty() {
            return Err(WaveError::config(format!(
                "line {}: empty key before `=`",
                lineno + 1
            )));
        }
        entries.insert(key.to_string(), value.to_string());
    }
    Ok(ConfigMap { entries })
}

// ---------------------------------------------------------------------------
// CSG expression parser
// ---------------------------------------------------------------------------
//
// Grammar (whitespace-insensitive):
//   expr := name '(' args ')'
//   args := (arg (',' arg)*)?
//   arg  := number | expr
// Primitives: fullspace(), halfspace(nx,ny,off | nx,ny,nz,off),
// disk(cx,cy,r), sphere(cx,cy,cz,r), box(x0,y0,x1,y1 | x0,y0,z0,x1,y1,z1),
// union(e...), difference(base, e...).

#[derive(Debug, Clone, PartialEq)]
enum CsgToken {
    Ident(String),
    Number(f64),
    Open,
    Close,
    Comma,
}

fn csg_tokens(text: &str) -> Result<Vec<CsgToken>, WaveError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' {
            out.push(CsgToken::Open);
            i += 1;
        } else if c == ')' {
            out.push(CsgToken::Close);
            i += 1;
        } else if c == ',' {
            out.push(CsgToken::Comma);
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(CsgToken::Ident(chars[start..i].iter().collect()));
        } else if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
            let start = i;
            i += 1;
            while i < chars.len()
                && (chars[i].is_ascii_digit()
                    || chars[i] == '.'
                    || chars[i] == 'e'
                    || chars[i] == 'E'
                    || ((chars[i] == '+' || chars[i] == '-')
                        && (chars[i - 1] == 'e' || chars[i - 1] == 'E')))
            {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| WaveError::config(format!("geometry: `{s}` is not a number")))?;
            out.push(CsgToken::Number(v));
        } else {
            return Err(WaveError::config(format!(
                "geometry: unexpected character `{c}`"
            )));
        }
    }
    Ok(out)
}

struct CsgParser {
    tokens: Vec<CsgToken>,
    pos: usize,
}

/// Either a number or a sub-expression, as they appear in argument lists.
enum CsgArg {
    Number(f64),
    Expr(ImplicitDomain),
}

impl CsgParser {
    fn peek(&self) -> Option<&CsgToken> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<CsgToken> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: CsgToken, ctx: &str) -> Result<(), WaveError> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            other => Err(WaveError::config(format!(
                "geometry: expected {:?} {} but found {:?}",
                want, ctx, other
            ))),
        }
    }

    fn parse_expr(&mut self) -> Result<ImplicitDomain, WaveError> {
        let name = match self.next() {
            Some(CsgToken::Ident(s)) => s,
            other => {
                return Err(WaveError::config(format!(
                    "geometry: expected a primitive name, found {:?}",
                    other
                )))
            }
        };
        // `fullspace` may appear without parentheses.
        if name == "fullspace" && self.peek() != Some(&CsgToken::Open) {
            return Ok(ImplicitDomain::FullSpace);
        }
        self.expect(CsgToken::Open, &format!("after `{name}`"))?;
        let mut args = Vec::new();
        if self.peek() != Some(&CsgToken::Close) {
            loop {
                match self.peek() {
                    Some(CsgToken::Number(_)) => {
                        if let Some(CsgToken::Number(v)) = self.next() {
                            args.push(CsgArg::Number(v));
                        }
                    }
                    Some(CsgToken::Ident(_)) => args.push(CsgArg::Expr(self.parse_expr()?)),
                    other => {
                        return Err(WaveError::config(format!(
                            "geometry: expected an argument in `{name}(...)`, found {:?}",
                            other
                        )))
                    }
                }
                match self.peek() {
                    Some(CsgToken::Comma) => {
                        self.next();
                    }
                    _ => break,
                }
            }
        }
        self.expect(CsgToken::Close, &format!("closing `{name}(...)`"))?;
        build_csg_node(&name, args)
    }
}

fn numbers(name: &str, args: Vec<CsgArg>) -> Result<Vec<f64>, WaveError> {
    let mut out = Vec::with_capacity(args.len());
    for a in args {
        match a {
            CsgArg::Number(v) => out.push(v),
            CsgArg::Expr(_) => {
                return Err(WaveError::config(format!(
                    "geometry: `{name}` takes numbers, not sub-expressions"
                )))
            }
        }
    }
    Ok(out)
}

fn exprs(name: &str, args: Vec<CsgArg>) -> Result<Vec<ImplicitDomain>, WaveError> {
    let mut out = Vec::with_capacity(args.len());
    for a in args {
        match a {
            CsgArg::Expr(e) => out.push(e),
            CsgArg::Number(_) => {
                return Err(WaveError::config(format!(
                    "geometry: `{name}` takes sub-expressions, not numbers"
                )))
            }
        }
    }
    Ok(out)
}

/// 2D boxes extend infinitely along z so membership is immune to how the
/// third coordinate of evaluation points is chosen.
const FLAT_Z: f64 = 1e30;

fn build_csg_node(name: &str, args: Vec<CsgArg>) -> Result<ImplicitDomain, WaveError> {
    match name {
        "fullspace" => {
            if !args.is_empty() {
                return Err(WaveError::config("geometry: `fullspace` takes no arguments"));
            }
            Ok(ImplicitDomain::FullSpace)
        }
        "disk" => {
            let v = numbers(name, args)?;
            if v.len() != 3 {
                return Err(WaveError::config("geometry: `disk(cx, cy, r)` takes 3 numbers"));
            }
            if v[2] <= 0.0 {
                return Err(WaveError::config("geometry: disk radius must be positive"));
            }
            Ok(ImplicitDomain::ball([v[0], v[1], 0.0], v[2]))
        }
        "sphere" => {
            let v = numbers(name, args)?;
            if v.len() != 4 {
                return Err(WaveError::config(
                    "geometry: `sphere(cx, cy, cz, r)` takes 4 numbers",
                ));
            }
            if v[3] <= 0.0 {
                return Err(WaveError::config("geometry: sphere radius must be positive"));
            }
            Ok(ImplicitDomain::ball([v[0], v[1], v[2]], v[3]))
        }
        "box" => {
            let v = numbers(name, args)?;
            match v.len() {
                4 => Ok(ImplicitDomain::axis_box(
                    [v[0], v[1], -FLAT_Z],
                    [v[2], v[3], FLAT_Z],
                )),
                6 => Ok(ImplicitDomain::axis_box(
                    [v[0], v[1], v[2]],
                    [v[3], v[4], v[5]],
                )),
                _ => Err(WaveError::config(
                    "geometry: `box` takes 4 (2D) or 6 (3D) numbers",
                )),
            }
        }
        "halfspace" => {
            let v = numbers(name, args)?;
            match v.len() {
                3 => Ok(ImplicitDomain::half_space([v[0], v[1], 0.0], v[2])),
                4 => Ok(ImplicitDomain::half_space([v[0], v[1], v[2]], v[3])),
                _ => Err(WaveError::config(
                    "geometry: `halfspace` takes normal components plus offset (3 or 4 numbers)",
                )),
            }
        }
        "union" => {
            let children = exprs(name, args)?;
            if children.is_empty() {
                return Err(WaveError::config("geometry: `union` needs at least one child"));
            }
            Ok(ImplicitDomain::Union(children))
        }
        "difference" => {
            let mut children = exprs(name, args)?;
            if children.is_empty() {
                return Err(WaveError::config(
                    "geometry: `difference` needs a base expression",
                ));
            }
            let base = children.remove(0);
            Ok(ImplicitDomain::difference(base, children))
        }
        other => Err(WaveError::config(format!(
            "geometry: unknown primitive `{other}` (expected fullspace, halfspace, disk, sphere, box, union, difference)"
        ))),
    }
}

/// Parse a CSG geometry expression such as
/// `difference(box(0,0,10,4), disk(3,1,0.5), disk(7,2,0.4))`.
pub fn parse_csg(text: &str) -> Result<ImplicitDomain, WaveError> {
    let tokens = csg_tokens(text)?;
    let mut p = CsgParser { tokens, pos: 0 };
    let dom = p.parse_expr()?;
    if p.pos != p.tokens.len() {
        return Err(WaveError::config(format!(
            "geometry: trailing tokens after the expression: {:?}",
            &p.tokens[p.pos..]
        )));
    }
    Ok(dom)
}

// ---------------------------------------------------------------------------
// Scenario description
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegratorKind {
    Cdm,
    CdmHrz,
    Trapezoidal,
    Imex,
    Leapfrog,
}

impl IntegratorKind {
    pub fn parse(s: &str) -> Result<Self, WaveError> {
        match s {
            "cdm" => Ok(IntegratorKind::Cdm),
            "cdm-hrz" => Ok(IntegratorKind::CdmHrz),
            "trapezoidal" => Ok(IntegratorKind::Trapezoidal),
            "imex" => Ok(IntegratorKind::Imex),
            "leapfrog" => Ok(IntegratorKind::Leapfrog),
            other => Err(WaveError::config(format!(
                "unknown integrator `{other}` (expected cdm, cdm-hrz, trapezoidal, imex, leapfrog)"
            ))),
        }
    }

    /// Mass treatment implied by the integrator choice.
    pub fn lumping(self) -> Lumping {
        match self {
            IntegratorKind::CdmHrz => Lumping::Hrz,
            _ => Lumping::Consistent,
        }
    }
}

impl fmt::Display for IntegratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IntegratorKind::Cdm => "cdm",
            IntegratorKind::CdmHrz => "cdm-hrz",
            IntegratorKind::Trapezoidal => "trapezoidal",
            IntegratorKind::Imex => "imex",
            IntegratorKind::Leapfrog => "leapfrog",
        };
        f.write_str(s)
    }
}

/// Excitation: a temporal signal times a spatial Gaussian bell.
#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub temporal: TemporalSignal,
    pub center: Point,
    pub sigma: f64,
    pub amplitude: f64,
}

/// Complete description of a mesh-based run.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub domain: ImplicitDomain,
    pub extent: AxisBox,
    pub dim: usize,
    pub cells_per_axis: [usize; 3],
    pub p: usize,
    pub tree_depth: u32,
    pub eps: f64,
    pub material: Material,
    /// Indicator exponent: α_f = 10^-beta in the fictitious region.
    pub beta: u32,
    pub source: SourceSpec,
    pub receivers: Vec<Point>,
    pub integrator: IntegratorKind,
    /// None → pick 90% of the relevant critical step automatically.
    pub dt: Option<f64>,
    /// Substep ratio for the leap-frog integrator.
    pub substeps: usize,
    pub coupling: LeapfrogCoupling,
    pub duration: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), WaveError> {
        if self.duration <= 0.0 {
            return Err(WaveError::config(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(WaveError::config(format!(
                    "time step must be positive, got {dt}"
                )));
            }
        }
        if self.substeps == 0 {
            return Err(WaveError::config("substep ratio must be at least 1"));
        }
        for (i, r) in self.receivers.iter().enumerate() {
            for a in 0..self.dim {
                if r[a] < self.extent.min[a] || r[a] > self.extent.max[a] {
                    return Err(WaveError::config(format!(
                        "receiver {i} at {:?} lies outside the extent",
                        &r[..self.dim]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn indicator(&self) -> IndicatorConfig {
        IndicatorConfig::from_beta(self.beta)
    }
}

// ---------------------------------------------------------------------------
// Built-in scenarios
// ---------------------------------------------------------------------------

/// Seed pinned for the reference perforated-plate realization. The hole
/// layout, DOF split, and Table-style critical steps in the test suite all
/// refer to this seed.
pub const PLATE_SEED: u64 = 10;

/// Hole parameters (x_c, y_c, r) for the perforated plate: x ~ U(2, 10),
/// y ~ U(0, 4), r ~ U(0.2, 0.6), drawn in that order per hole from a
/// ChaCha8 stream dedicated to geometry (stream 0 of the seed).
pub fn plate_holes(seed: u64, n_holes: usize) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    (0..n_holes)
        .map(|_| {
            let x = rng.gen_range(2.0..10.0);
            let y = rng.gen_range(0.0..4.0);
            let r = rng.gen_range(0.2..0.6);
            (x, y, r)
        })
        .collect()
}

fn plate_domain(seed: u64, n_holes: usize) -> ImplicitDomain {
    let holes = plate_holes(seed, n_holes)
        .into_iter()
        .map(|(x, y, r)| ImplicitDomain::ball([x, y, 0.0], r))
        .collect();
    ImplicitDomain::difference(
        ImplicitDomain::axis_box([0.0, 0.0, -FLAT_Z], [10.0, 4.0, FLAT_Z]),
        holes,
    )
}

/// Perforated plate at production resolution: 40×16 cells, p = 5, quadtree
/// depth 6 (the headline 2D benchmark).
pub fn build_plate(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        name: "plate".into(),
        domain: plate_domain(seed, 10),
        extent: AxisBox::new([0.0, 0.0, 0.0], [10.0, 4.0, 0.0]),
        dim: 2,
        cells_per_axis: [40, 16, 1],
        p: 5,
        tree_depth: 6,
        eps: 1e-10,
        material: Material::new(1.0, 1.0),
        beta: 6,
        source: SourceSpec {
            temporal: TemporalSignal::GaussianDerivative { f_s: 2.0 },
            center: [1.0, 2.0, 0.0],
            sigma: 0.06,
            amplitude: 10.0,
        },
        receivers: vec![[1.5, 2.0, 0.0], [5.0, 2.0, 0.0], [9.0, 2.0, 0.0]],
        integrator: IntegratorKind::Imex,
        dt: None,
        substeps: 5,
        coupling: LeapfrogCoupling::Interpolated,
        duration: 10.0,
        seed,
    }
}

/// Desk-scale plate: same geometry on a 20×8 grid with p = 3 and quadtree
/// depth 4, cheap enough for CI while keeping the cut-cell structure. The
/// source is widened and slowed to what this mesh resolves (bell width about
/// half a cell, two cells per wavelength); the production pulse would fall
/// between the coarse grid's nodes and the runs would never converge toward
/// a refined reference.
pub fn build_plate_desk(seed: u64) -> ScenarioConfig {
    let mut c = build_plate(seed);
    c.name = "plate-desk".into();
    c.cells_per_axis = [20, 8, 1];
    c.p = 3;
    c.tree_depth = 4;
    c.source.temporal = TemporalSignal::GaussianDerivative { f_s: 0.7 };
    c.source.sigma = 0.25;
    c
}

fn block3d_domain() -> ImplicitDomain {
    // Stand-in pillar: a margin box whose x-min face sits a hair inside the
    // first cell column of the coarse grid (producing sliver cut cells with
    // tiny fill ratios, the feature that wrecks the explicit global step),
    // minus three spherical voids kept clear of the source/receiver region.
    ImplicitDomain::difference(
        ImplicitDomain::axis_box([0.154, 0.05, 0.03], [1.19, 1.21, 1.97]),
        vec![
            ImplicitDomain::ball([0.90, 0.95, 0.45], 0.21),
            ImplicitDomain::ball([0.30, 0.90, 1.55], 0.18),
            ImplicitDomain::ball([0.95, 0.20, 1.75], 0.15),
        ],
    )
}

/// 3D block at production resolution: 20×20×32 cells, p = 4, octree depth 5.
pub fn build_block3d() -> ScenarioConfig {
    ScenarioConfig {
        name: "block3d".into(),
        domain: block3d_domain(),
        extent: AxisBox::new([0.0, 0.0, 0.0], [1.25, 1.25, 2.0]),
        dim: 3,
        cells_per_axis: [20, 20, 32],
        p: 4,
        tree_depth: 5,
        eps: 1e-10,
        material: Material::new(2400.0, 3000.0),
        beta: 5,
        source: SourceSpec {
            temporal: TemporalSignal::SineBurst {
                f_s: 20_000.0,
                n_c: 2,
            },
            center: [1.04066, 0.542926, 1.0],
            sigma: 0.06,
            amplitude: 1.0,
        },
        receivers: vec![
            [0.27966, 0.39788, 0.57757],
            [0.34066, 0.18043, 1.0],
            [0.78096, 0.47348, 1.4967],
        ],
        integrator: IntegratorKind::Imex,
        dt: None,
        substeps: 5,
        coupling: LeapfrogCoupling::Interpolated,
        duration: 1e-3,
        seed: 0,
    }
}

/// Desk-scale 3D block: 8×8×12 cells, p = 2, octree depth 3. The burst
/// frequency is scaled down so that both the coarse mesh (≥ 6 cells per
/// wavelength) and a time step several times the global critical estimate
/// resolve the signal; everything else matches the production setup.
pub fn build_block3d_desk() -> ScenarioConfig {
    let mut c = build_block3d();
    c.name = "block3d-desk".into();
    c.cells_per_axis = [8, 8, 12];
    c.p = 2;
    c.tree_depth = 3;
    c.source.temporal = TemporalSignal::SineBurst {
        f_s: 2500.0,
        n_c: 1,
    };
    c
}

// ---------------------------------------------------------------------------
// Spring chain
// ---------------------------------------------------------------------------

/// The ten-mass benchmark chain: anchored by a spring to a wall at the first
/// mass, free at the last, with the final `n_light` masses much lighter.
#[derive(Debug)]
pub struct SpringChain {
    pub sys: PartitionedSystem,
    /// Harmonic drive frequency in Hz.
    pub f_s: f64,
    pub duration: f64,
}

/// Build the chain system: K = k·tridiag(−1, 2, −1) with the last diagonal
/// entry k (free end), M = diag(m1 × n_heavy, m2 × n_light), unit force at
/// the third-last mass. Heavy masses form the explicit set, light ones the
/// implicit block (they play the role of cut-cell DOFs).
pub fn build_spring_chain(n_heavy: usize, n_light: usize, m1: f64, m2: f64, k: f64) -> SpringChain {
    assert!(n_heavy >= 1, "need at least one heavy mass");
    assert!(
        n_heavy + n_light >= 3,
        "chain too short for the standard drive point"
    );
    let n = n_heavy + n_light;
    let mut trip = Vec::new();
    for i in 0..n {
        let d = if i + 1 < n { 2.0 * k } else { k };
        trip.push((i, i, d));
        if i + 1 < n {
            trip.push((i, i + 1, -k));
            trip.push((i + 1, i, -k));
        }
    }
    let mut f_x = vec![0.0; n];
    f_x[n - 3] = 1.0;
    let mut c_pos = vec![None; n];
    for (pos, slot) in c_pos.iter_mut().skip(n_heavy).enumerate() {
        *slot = Some(pos);
    }
    let m_cc = SparseSym::from_triplets(n_light, (0..n_light).map(|i| (i, i, m2)).collect());
    SpringChain {
        sys: PartitionedSystem {
            n,
            k: SparseSym::from_triplets(n, trip),
            m_dd: vec![m1; n_heavy],
            m_cc,
            f_x,
            partition: DofPartition {
                i_d: (0..n_heavy).collect(),
                i_c: (n_heavy..n).collect(),
                c_pos,
            },
        },
        f_s: 0.1,
        duration: 50.0,
    }
}

/// The benchmark configuration: 8 × 1 kg plus 2 × 1 g, unit springs.
pub fn standard_spring_chain() -> SpringChain {
    build_spring_chain(8, 2, 1.0, 1e-3, 1.0)
}

/// Result of one spring-chain run.
#[derive(Debug)]
pub struct SpringRunResult {
    pub state: IntegratorState,
    /// Time-aggregated l2 difference to the harmonic reference:
    /// √(Δt · Σ_n Σ_i (u_i(t_n) − u_ref,i(t_n))²).
    pub error: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub wall_seconds: f64,
    pub times: Vec<f64>,
    /// Displacement of every mass at every recorded step.
    pub trajectory: Vec<Vec<f64>>,
    /// Elastic energy ½uᵀKu at every recorded step.
    pub energies: Vec<f64>,
}

struct ChainRecorder<'a> {
    k: &'a SparseSym,
    times: Vec<f64>,
    traj: Vec<Vec<f64>>,
    energies: Vec<f64>,
}

impl Observer for ChainRecorder<'_> {
    fn observe(&mut self, _step: usize, t: f64, u: &[f64]) {
        self.times.push(t);
        self.traj.push(u.to_vec());
        self.energies.push(elastic_energy(self.k, u));
    }
}

/// Integrate the chain under its harmonic drive and compare against the
/// exact steady-state reference. Initial conditions u = 0, v = v_ref(0)
/// put the system directly on the steady state, so the reference is the
/// exact solution of the initial value problem and the measured error is
/// pure time-discretization error.
pub fn run_spring_chain(
    chain: &SpringChain,
    integrator: IntegratorKind,
    dt: f64,
    substeps: usize,
) -> Result<SpringRunResult, WaveError> {
    if !(dt > 0.0) {
        return Err(WaveError::config(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let sys = &chain.sys;
    let omega = 2.0 * std::f64::consts::PI * chain.f_s;
    let href = harmonic_reference(&sys.k, &sys.mass_sparse(), &sys.f_x, chain.f_s)?;
    let u0 = vec![0.0; sys.n];
    let v0 = href.velocity(0.0);
    let signal = TemporalSignal::Harmonic { f_s: chain.f_s };
    let f_t = move |t: f64| signal.eval(t);
    let n_steps = (chain.duration / dt).ceil() as usize;

    let mut rec = ChainRecorder {
        k: &sys.k,
        times: Vec::with_capacity(n_steps + 1),
        traj: Vec::with_capacity(n_steps + 1),
        energies: Vec::with_capacity(n_steps + 1),
    };
    let clock = Instant::now();
    let state = {
        let mut obs: [&mut dyn Observer; 1] = [&mut rec];
        match integrator {
            IntegratorKind::Cdm | IntegratorKind::CdmHrz => {
                run_cdm(sys, &f_t, dt, n_steps, &u0, &v0, &mut obs)
            }
            IntegratorKind::Trapezoidal => {
                run_trapezoidal(sys, &f_t, dt, n_steps, &u0, &v0, &mut obs)
            }
            IntegratorKind::Imex => run_newmark_imex(sys, &f_t, dt, n_steps, &u0, &v0, &mut obs),
            IntegratorKind::Leapfrog => run_leapfrog(
                sys,
                &f_t,
                dt,
                substeps,
                n_steps,
                &u0,
                &v0,
                LeapfrogCoupling::Interpolated,
                &mut obs,
            ),
        }
    }?;
    let wall_seconds = clock.elapsed().as_secs_f64();

    let mut sq = 0.0;
    for (t, u) in rec.times.iter().zip(&rec.traj) {
        let s = (omega * t).sin();
        for (ui, ai) in u.iter().zip(&href.amplitude) {
            let d = ui - ai * s;
            sq += d * d;
        }
    }
    Ok(SpringRunResult {
        error: (dt * sq).sqrt(),
        dt,
        n_steps,
        wall_seconds,
        state,
        times: rec.times,
        trajectory: rec.traj,
        energies: rec.energies,
    })
}

// ---------------------------------------------------------------------------
// Sampling and error metrics
// ---------------------------------------------------------------------------

/// Rejection-sample `n_target` points of the physical domain inside the
/// extent box. Deterministic under the seed (points are drawn from stream 1,
/// keeping them independent of the geometry stream).
pub fn sample_physical_points(
    domain: &ImplicitDomain,
    extent: &AxisBox,
    dim: usize,
    n_target: usize,
    seed: u64,
) -> Result<Vec<Point>, WaveError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut out = Vec::with_capacity(n_target);
    let mut attempts: usize = 0;
    let cap = 10_000_usize.saturating_mul(n_target.max(1));
    while out.len() < n_target {
        if attempts >= cap {
            return Err(WaveError::config(format!(
                "rejection sampling accepted only {} of {} points after {} draws — \
                 the physical domain occupies almost none of the extent",
                out.len(),
                n_target,
                attempts
            )));
        }
        attempts += 1;
        let mut x: Point = [0.0; 3];
        for a in 0..dim {
            x[a] = rng.gen_range(extent.min[a]..extent.max[a]);
        }
        if contains(domain, x) {
            out.push(x);
        }
    }
    Ok(out)
}

/// Relative l2 error between two sampled fields: √(Σ(u−u_ref)² / Σu_ref²).
pub fn l2_error(u: &[f64], u_ref: &[f64]) -> Result<f64, WaveError> {
    assert_eq!(u.len(), u_ref.len(), "sampled fields must align");
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in u.iter().zip(u_ref) {
        num += (a - b) * (a - b);
        den += b * b;
    }
    if den == 0.0 {
        return Err(WaveError::numerical(
            "reference field is identically zero at the sample points",
        ));
    }
    Ok((num / den).sqrt())
}

/// Evaluate a coefficient field at a list of physical points.
pub fn evaluate_at_points(
    mesh: &SpectralMesh,
    u: &[f64],
    points: &[Point],
) -> Result<Vec<f64>, WaveError> {
    points.iter().map(|&x| mesh.evaluate_field(u, x)).collect()
}

/// Histogram of cell fill ratios: `empty` (below ε), ten 0.1-wide buckets
/// over (0, 1), and `uncut`. Bucket counts sum to the cell count.
pub fn fill_histogram(mesh: &SpectralMesh) -> Vec<(String, usize)> {
    use crate::cutcell::CellKind;
    let mut buckets = vec![0usize; 12];
    for class in &mesh.classes {
        match class.kind {
            CellKind::Empty => buckets[0] += 1,
            CellKind::Uncut => buckets[11] += 1,
            CellKind::Cut => {
                let b = (class.fill_ratio * 10.0).floor() as usize;
                buckets[1 + b.min(9)] += 1;
            }
        }
    }
    let mut out = Vec::with_capacity(12);
    out.push(("empty".to_string(), buckets[0]));
    for b in 0..10 {
        out.push((
            format!("({:.1},{:.1}]", b as f64 / 10.0, (b + 1) as f64 / 10.0),
            buckets[1 + b],
        ));
    }
    out.push(("uncut".to_string(), buckets[11]));
    out
}

// ---------------------------------------------------------------------------
// The run pipeline
// ---------------------------------------------------------------------------

/// Everything a completed mesh run produces, kept in memory; file emission
/// is a separate explicit step.
#[derive(Debug)]
pub struct RunArtifacts {
    pub mesh: SpectralMesh,
    pub state: IntegratorState,
    pub report: RunReport,
    pub times: Vec<f64>,
    /// One trace per receiver, aligned with `times`.
    pub traces: Vec<Vec<f64>>,
    /// Elastic energy per recorded step.
    pub energies: Vec<f64>,
}

/// Summary facts of one run (deterministic under fixed seed except the
/// wall-clock field).
#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: String,
    pub integrator: IntegratorKind,
    pub n_dof: usize,
    pub n_d: usize,
    pub n_c: usize,
    pub histogram: Vec<(String, usize)>,
    pub dt_global: f64,
    pub dt_explicit: Option<f64>,
    pub dt_used: f64,
    pub n_steps: usize,
    pub wall_seconds: f64,
    pub e_l2: Option<f64>,
}

struct ReceiverRecorder {
    probes: Vec<FieldProbe>,
    times: Vec<f64>,
    traces: Vec<Vec<f64>>,
}

impl Observer for ReceiverRecorder {
    fn observe(&mut self, _step: usize, t: f64, u: &[f64]) {
        self.times.push(t);
        for (probe, trace) in self.probes.iter().zip(&mut self.traces) {
            trace.push(probe.eval(u));
        }
    }
}

struct EnergyRecorder<'a> {
    k: &'a SparseSym,
    energies: Vec<f64>,
}

impl Observer for EnergyRecorder<'_> {
    fn observe(&mut self, _step: usize, _t: f64, u: &[f64]) {
        self.energies.push(elastic_energy(self.k, u));
    }
}

/// Assemble and integrate one mesh scenario. The wall-clock time covers the
/// integration call only (which performs its own factorizations), not mesh
/// construction or assembly.
/// Build the mesh and the assembled, force-loaded system of a scenario
/// without integrating it (shared by `run` and the stability report).
pub fn build_system(
    config: &ScenarioConfig,
) -> Result<(SpectralMesh, PartitionedSystem), WaveError> {
    config.validate()?;
    let mesh = build_mesh(
        config.extent.clone(),
        config.cells_per_axis,
        config.dim,
        config.p,
        &config.domain,
        config.tree_depth,
        config.eps,
    )?;
    let indicator = config.indicator();
    let mut sys = assemble(
        &mesh,
        config.material,
        &indicator,
        config.integrator.lumping(),
    )?;
    let bell = gaussian_bell_source(
        config.source.center,
        config.source.sigma,
        config.source.amplitude,
        config.dim,
    );
    sys.f_x = assemble_force(&mesh, bell, &indicator);
    Ok((mesh, sys))
}

pub fn run(config: &ScenarioConfig) -> Result<RunArtifacts, WaveError> {
    let (mesh, sys) = build_system(config)?;

    let global = critical_dt(&sys, Scope::Global)?;
    let explicit = if sys.partition.i_d.is_empty() {
        None
    } else {
        Some(critical_dt(&sys, Scope::ExplicitSubsystem)?)
    };

    let dt = match config.dt {
        Some(dt) => dt,
        None => {
            let bound = match config.integrator {
                IntegratorKind::Cdm | IntegratorKind::CdmHrz => global.dt_crit,
                IntegratorKind::Trapezoidal | IntegratorKind::Imex | IntegratorKind::Leapfrog => {
                    explicit
                        .as_ref()
                        .map(|r| r.dt_crit)
                        .unwrap_or(global.dt_crit)
                }
            };
            0.9 * bound
        }
    };
    let n_steps = (config.duration / dt).ceil() as usize;

    let probes: Result<Vec<FieldProbe>, WaveError> =
        config.receivers.iter().map(|&x| mesh.probe(x)).collect();
    let mut receivers = ReceiverRecorder {
        probes: probes?,
        times: Vec::with_capacity(n_steps + 1),
        traces: vec![Vec::with_capacity(n_steps + 1); config.receivers.len()],
    };
    let mut energy = EnergyRecorder {
        k: &sys.k,
        energies: Vec::with_capacity(n_steps + 1),
    };

    let u0 = vec![0.0; sys.n];
    let v0 = vec![0.0; sys.n];
    let signal = config.source.temporal;
    let f_t = move |t: f64| signal.eval(t);

    let clock = Instant::now();
    let state = {
        let mut obs: [&mut dyn Observer; 2] = [&mut receivers, &mut energy];
        match config.integrator {
            IntegratorKind::Cdm | IntegratorKind::CdmHrz => {
                run_cdm(&sys, &f_t, dt, n_steps, &u0, &v0, &mut obs)
            }
            IntegratorKind::Trapezoidal => {
                run_trapezoidal(&sys, &f_t, dt, n_steps, &u0, &v0, &mut obs)
            }
            IntegratorKind::Imex => run_newmark_imex(&sys, &f_t, dt, n_steps, &u0, &v0, &mut obs),
            IntegratorKind::Leapfrog => run_leapfrog(
                &sys,
                &f_t,
                dt,
                config.substeps,
                n_steps,
                &u0,
                &v0,
                config.coupling,
                &mut obs,
            ),
        }
    }?;
    let wall_seconds = clock.elapsed().as_secs_f64();

    let report = RunReport {
        scenario: config.name.clone(),
        integrator: config.integrator,
        n_dof: sys.n,
        n_d: sys.partition.i_d.len(),
        n_c: sys.partition.i_c.len(),
        histogram: fill_histogram(&mesh),
        dt_global: global.dt_crit,
        dt_explicit: explicit.map(|r| r.dt_crit),
        dt_used: dt,
        n_steps,
        wall_seconds,
        e_l2: None,
    };
    Ok(RunArtifacts {
        mesh,
        state,
        report,
        times: receivers.times,
        traces: receivers.traces,
        energies: energy.energies,
    })
}

// ---------------------------------------------------------------------------
// Artifact files
// ---------------------------------------------------------------------------

fn write_csv(
    path: &Path,
    header: &str,
    rows: impl Iterator<Item = String>,
) -> Result<(), WaveError> {
    let mut f = std::fs::File::create(path)
        .map_err(|e| WaveError::config(format!("cannot create {}: {e}", path.display())))?;
    writeln!(f, "{header}").map_err(|e| WaveError::config(format!("write failed: {e}")))?;
    for row in rows {
        writeln!(f, "{row}").map_err(|e| WaveError::config(format!("write failed: {e}")))?;
    }
    Ok(())
}

/// Emit `receivers.csv` (t,r0,r1,…), `energy.csv` (t,E), `error.csv`
/// (dt,integrator,e_l2,runtime_s) and `report.txt` (key=value) into `dir`.
/// Returns the paths written.
pub fn write_artifacts(
    dir: &Path,
    times: &[f64],
    traces: &[Vec<f64>],
    energies: &[f64],
    report: &RunReport,
) -> Result<Vec<PathBuf>, WaveError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| WaveError::config(format!("cannot create {}: {e}", dir.display())))?;
    let mut files = Vec::new();

    let recv = dir.join("receivers.csv");
    let header = std::iter::once("t".to_string())
        .chain((0..traces.len()).map(|i| format!("r{i}")))
        .collect::<Vec<_>>()
        .join(",");
    write_csv(
        &recv,
        &header,
        times.iter().enumerate().map(|(n, t)| {
            let mut row = format!("{t}");
            for trace in traces {
                row.push_str(&format!(",{}", trace[n]));
            }
            row
        }),
    )?;
    files.push(recv);

    let energy = dir.join("energy.csv");
    write_csv(
        &energy,
        "t,E",
        times.iter().zip(energies).map(|(t, e)| format!("{t},{e}")),
    )?;
    files.push(energy);

    let error = dir.join("error.csv");
    let e_l2 = report
        .e_l2
        .map(|e| e.to_string())
        .unwrap_or_else(|| "nan".to_string());
    write_csv(
        &error,
        "dt,integrator,e_l2,runtime_s",
        std::iter::once(format!(
            "{},{},{},{}",
            report.dt_used, report.integrator, e_l2, report.wall_seconds
        )),
    )?;
    files.push(error);

    let rep = dir.join("report.txt");
    let mut f = std::fs::File::create(&rep)
        .map_err(|e| WaveError::config(format!("cannot create {}: {e}", rep.display())))?;
    let mut kv = |k: &str, v: String| -> Result<(), WaveError> {
        writeln!(f, "{k}={v}").map_err(|e| WaveError::config(format!("write failed: {e}")))
    };
    kv("scenario", report.scenario.clone())?;
    kv("integrator", report.integrator.to_string())?;
    kv("n_dof", report.n_dof.to_string())?;
    kv("n_d", report.n_d.to_string())?;
    kv("n_c", report.n_c.to_string())?;
    kv("dt_global", format!("{:e}", report.dt_global))?;
    kv(
        "dt_explicit",
        report
            .dt_explicit
            .map(|v| format!("{v:e}"))
            .unwrap_or_else(|| "none".to_string()),
    )?;
    kv("dt_used", format!("{:e}", report.dt_used))?;
    kv("n_steps", report.n_steps.to_string())?;
    kv("wall_seconds", report.wall_seconds.to_string())?;
    kv(
        "e_l2",
        report
            .e_l2
            .map(|v| v.to_string())
            .unwrap_or_else(|| "none".to_string()),
    )?;
    for (name, count) in &report.histogram {
        kv(&format!("fill.{name}"), count.to_string())?;
    }
    files.push(rep);
    Ok(files)
}

// ---------------------------------------------------------------------------
// Config → scenario
// ---------------------------------------------------------------------------

/// Interpret a parsed config as a mesh scenario. Required keys: `geometry`,
/// `extent`, `dim`, `mesh.cells`, `duration`. Everything else has defaults.
pub fn config_to_scenario(map: &ConfigMap) -> Result<ScenarioConfig, WaveError> {
    let geometry = map
        .get("geometry")
        .ok_or_else(|| WaveError::config("missing required key `geometry`"))?;
    let domain = parse_csg(geometry)?;

    let dim = map
        .get_usize("dim")?
        .ok_or_else(|| WaveError::config("missing required key `dim`"))?;
    if !(1..=3).contains(&dim) {
        return Err(WaveError::config(format!(
            "dim must be 1, 2 or 3, got {dim}"
        )));
    }

    let ext = map
        .get_list("extent")?
        .ok_or_else(|| WaveError::config("missing required key `extent`"))?;
    if ext.len() != 2 * dim {
        return Err(WaveError::config(format!(
            "extent needs {} numbers for dim = {dim} (min then max per axis), got {}",
            2 * dim,
            ext.len()
        )));
    }
    let mut min = [0.0; 3];
    let mut max = [0.0; 3];
    for a in 0..dim {
        min[a] = ext[a];
        max[a] = ext[dim + a];
    }
    let extent = AxisBox::new(min, max);

    let cells = map
        .get_list("mesh.cells")?
        .ok_or_else(|| WaveError::config("missing required key `mesh.cells`"))?;
    if cells.len() != dim {
        return Err(WaveError::config(format!(
            "mesh.cells needs {dim} entries, got {}",
            cells.len()
        )));
    }
    let mut cells_per_axis = [1usize; 3];
    for a in 0..dim {
        if cells[a] < 1.0 || cells[a].fract() != 0.0 {
            return Err(WaveError::config(format!(
                "mesh.cells entries must be positive integers, got {}",
                cells[a]
            )));
        }
        cells_per_axis[a] = cells[a] as usize;
    }

    let duration = map
        .get_f64("duration")?
        .ok_or_else(|| WaveError::config("missing required key `duration`"))?;

    let point_key = |key: &str, default: Point| -> Result<Point, WaveError> {
        match map.get_list(key)? {
            None => Ok(default),
            Some(v) => {
                if v.len() != dim {
                    return Err(WaveError::config(format!(
                        "{key} needs {dim} coordinates, got {}",
                        v.len()
                    )));
                }
                let mut p = [0.0; 3];
                p[..v.len()].copy_from_slice(&v);
                Ok(p)
            }
        }
    };

    let source_kind = map.get("source.kind").unwrap_or("gaussian_derivative");
    let f_s = map.get_f64("source.fs")?.unwrap_or(1.0);
    if !(f_s > 0.0) {
        return Err(WaveError::config(format!(
            "source.fs must be positive, got {f_s}"
        )));
    }
    let temporal = match source_kind {
        "gaussian_derivative" => TemporalSignal::GaussianDerivative { f_s },
        "sine_burst" => {
            let n_c = map.get_usize("source.cycles")?.unwrap_or(2);
            if n_c == 0 {
                return Err(WaveError::config("source.cycles must be at least 1"));
            }
            TemporalSignal::SineBurst {
                f_s,
                n_c: n_c as u32,
            }
        }
        "harmonic" => TemporalSignal::Harmonic { f_s },
        other => {
            return Err(WaveError::config(format!(
                "unknown source.kind `{other}` (expected gaussian_derivative, sine_burst, harmonic)"
            )))
        }
    };
    let source = SourceSpec {
        temporal,
        center: point_key("source.center", extent.center())?,
        sigma: map.get_f64("source.sigma")?.unwrap_or(0.06),
        amplitude: map.get_f64("source.amplitude")?.unwrap_or(1.0),
    };
    if !(source.sigma > 0.0) {
        return Err(WaveError::config("source.sigma must be positive"));
    }

    let mut receivers = Vec::new();
    for (i, spec) in map.indexed("receiver")?.iter().enumerate() {
        let mut coords = Vec::new();
        for part in spec.split(',') {
            let p = part.trim();
            coords.push(
                p.parse::<f64>().map_err(|_| {
                    WaveError::config(format!("receiver {i}: `{p}` is not a number"))
                })?,
            );
        }
        if coords.len() != dim {
            return Err(WaveError::config(format!(
                "receiver {i} needs {dim} coordinates, got {}",
                coords.len()
            )));
        }
        let mut p = [0.0; 3];
        p[..coords.len()].copy_from_slice(&coords);
        receivers.push(p);
    }

    let integrator = match map.get("integrator.kind") {
        None => IntegratorKind::Imex,
        Some(s) => IntegratorKind::parse(s)?,
    };
    let coupling = match map.get("integrator.coupling") {
        None | Some("interpolated") => LeapfrogCoupling::Interpolated,
        Some("frozen") => LeapfrogCoupling::Frozen,
        Some(other) => {
            return Err(WaveError::config(format!(
                "unknown integrator.coupling `{other}` (expected interpolated, frozen)"
            )))
        }
    };

    let rho = map.get_f64("material.rho")?.unwrap_or(1.0);
    let c = map.get_f64("material.c")?.unwrap_or(1.0);
    if !(rho > 0.0 && c > 0.0) {
        return Err(WaveError::config(
            "material.rho and material.c must be positive",
        ));
    }
    let beta = map.get_usize("material.beta")?.unwrap_or(6);

    let config = ScenarioConfig {
        name: map.get("scenario").unwrap_or("custom").to_string(),
        domain,
        extent,
        dim,
        cells_per_axis,
        p: map.get_usize("mesh.p")?.unwrap_or(3),
        tree_depth: map.get_usize("mesh.depth")?.unwrap_or(4) as u32,
        eps: map.get_f64("mesh.eps")?.unwrap_or(1e-10),
        material: Material::new(rho, c),
        beta: beta as u32,
        source,
        receivers,
        integrator,
        dt: map.get_f64("integrator.dt")?,
        substeps: map.get_usize("integrator.m")?.unwrap_or(5),
        coupling,
        duration,
        seed: map.get_u64("seed")?.unwrap_or(0),
    };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutcell::CellKind;

    #[test]
    fn config_lines_comments_and_arrays_parse() {
        let text = "\n# header comment\nmesh.p = 5   # trailing comment\nextent = 0, 0, 10, 4\nsource.kind = sine_burst\nreceiver.0 = 1.5, 2\nreceiver.1 = 5, 2\n";
        let map = parse_config(text).unwrap();
        assert_eq!(map.get("mesh.p"), Some("5"));
        assert_eq!(
            map.get_list("extent").unwrap().unwrap(),
            vec![0.0, 0.0, 10.0, 4.0]
        );
        assert_eq!(map.get("source.kind"), Some("sine_burst"));
        let recv = map.indexed("receiver").unwrap();
        assert_eq!(recv, vec!["1.5, 2", "5, 2"]);
    }

    #[test]
    fn config_rejects_malformed_lines() {
        let err = parse_config("mesh.p 5").unwrap_err();
        assert!(format!("{err}").contains("line 1"));
        let err = parse_config("ok = 1\n= bare").unwrap_err();
        assert!(format!("{err}").contains("line 2"));
        let map = parse_config("x = notanumber").unwrap();
        assert!(map.get_f64("x").is_err());
        let map = parse_config("receiver.0 = 1,1\nreceiver.2 = 2,2").unwrap();
        assert!(map.indexed("receiver").is_err(), "index gap must error");
    }

    #[test]
    fn csg_expressions_build_the_expected_membership() {
        let dom =
            parse_csg("difference(box(0, 0, 10, 4), disk(3, 2, 0.5), disk(7, 1, 0.25))").unwrap();
        assert!(contains(&dom, [1.0, 2.0, 0.0]));
        assert!(!contains(&dom, [3.0, 2.0, 0.0]), "inside first hole");
        assert!(!contains(&dom, [7.1, 1.0, 0.0]), "inside second hole");
        assert!(!contains(&dom, [11.0, 2.0, 0.0]), "outside the box");

        let dom = parse_csg("union(sphere(0,0,0,1), box(2,2,2,3,3,3))").unwrap();
        assert!(contains(&dom, [0.5, 0.0, 0.0]));
        assert!(contains(&dom, [2.5, 2.5, 2.5]));
        assert!(!contains(&dom, [1.5, 0.0, 0.0]));

        let dom = parse_csg("halfspace(0, 1, 0.5)").unwrap();
        assert!(contains(&dom, [9.0, 0.25, 0.0]));
        assert!(!contains(&dom, [9.0, 0.75, 0.0]));

        assert!(contains(
            &parse_csg("fullspace()").unwrap(),
            [1e6, -1e6, 0.0]
        ));
        assert!(contains(
            &parse_csg(" fullspace ").unwrap(),
            [0.0, 0.0, 0.0]
        ));
    }

    #[test]
    fn csg_parser_reports_grammar_errors() {
        for bad in [
            "blob(1,2,3)",
            "disk(1,2)",
            "disk(1,2,0.5,9)",
            "disk(1,2,-0.5)",
            "union()",
            "difference()",
            "box(1,2,3)",
            "disk(1,2,0.5) disk(3,4,0.5)",
            "union(1, 2)",
            "disk(box(0,0,1,1), 2, 3)",
            "disk(1, 2, 0.5",
            "sphere(1,2,3,abc)",
        ] {
            let err = parse_csg(bad).unwrap_err();
            assert!(
                matches!(err, WaveError::Config(_)),
                "`{bad}` must be a config error"
            );
        }
    }

    #[test]
    fn plate_holes_are_seeded_and_in_range() {
        let a = plate_holes(PLATE_SEED, 10);
        let b = plate_holes(PLATE_SEED, 10);
        assert_eq!(a, b, "same seed must reproduce bit-for-bit");
        let c = plate_holes(PLATE_SEED + 1, 10);
        assert_ne!(a, c, "different seeds must differ");
        for &(x, y, r) in &a {
            assert!((2.0..10.0).contains(&x));
            assert!((0.0..4.0).contains(&y));
            assert!((0.2..0.6).contains(&r));
        }
        // Hole centers never reach x < 2, so the source region stays solid.
        for seed in 0..20 {
            let dom = plate_domain(seed, 10);
            assert!(contains(&dom, [1.0, 2.0, 0.0]), "seed {seed}");
            assert!(contains(&dom, [0.5, 0.5, 0.0]), "seed {seed}");
        }
    }

    #[test]
    fn sampling_is_deterministic_and_inside() {
        let dom = plate_domain(PLATE_SEED, 10);
        let extent = AxisBox::new([0.0, 0.0, 0.0], [10.0, 4.0, 0.0]);
        let pts = sample_physical_points(&dom, &extent, 2, 500, 7).unwrap();
        assert_eq!(pts.len(), 500);
        for p in &pts {
            assert!(contains(&dom, *p));
        }
        let again = sample_physical_points(&dom, &extent, 2, 500, 7).unwrap();
        assert_eq!(pts, again, "seeded sampling must be reproducible");

        // Full domain: every draw is accepted.
        let full = sample_physical_points(&ImplicitDomain::FullSpace, &extent, 2, 100, 3).unwrap();
        assert_eq!(full.len(), 100);
    }

    #[test]
    fn l2_error_examples() {
        let r = vec![1.0, -2.0, 0.5];
        assert!(l2_error(&r, &r).unwrap() < 1e-15);
        let double: Vec<f64> = r.iter().map(|x| 2.0 * x).collect();
        assert!((l2_error(&double, &r).unwrap() - 1.0).abs() < 1e-14);
        assert!(l2_error(&[0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn spring_chain_topology_matches_the_benchmark() {
        let chain = standard_spring_chain();
        let sys = &chain.sys;
        assert_eq!(sys.n, 10);
        assert_eq!(sys.partition.i_d, (0..8).collect::<Vec<_>>());
        assert_eq!(sys.partition.i_c, vec![8, 9]);
        assert_eq!(sys.f_x[7], 1.0, "unit force at the third-last mass");
        assert_eq!(sys.f_x.iter().filter(|&&v| v != 0.0).count(), 1);
        // Row sums: anchored first row k, interior 0, free last row 0.
        let ones = vec![1.0; 10];
        let sums = sys.k.apply(&ones);
        assert!((sums[0] - 1.0).abs() < 1e-14);
        for s in &sums[1..] {
            assert!(s.abs() < 1e-14);
        }
        assert_eq!(sys.m_dd, vec![1.0; 8]);
        assert_eq!(sys.m_cc.diagonal(), vec![1e-3, 1e-3]);
        // Degenerate variant: no light masses → fully explicit.
        let uniform = build_spring_chain(10, 0, 1.0, 1e-3, 1.0);
        assert!(uniform.sys.partition.i_c.is_empty());
        assert_eq!(uniform.sys.m_cc.dim(), 0);
    }

    #[test]
    fn spring_chain_error_shrinks_quadratically() {
        let chain = standard_spring_chain();
        let coarse = run_spring_chain(&chain, IntegratorKind::Imex, 4e-2, 1).unwrap();
        let fine = run_spring_chain(&chain, IntegratorKind::Imex, 2e-2, 1).unwrap();
        let ratio = coarse.error / fine.error;
        assert!(
            (2.8..5.6).contains(&ratio),
            "halving Δt should quarter the error, ratio {}",
            ratio
        );
        // Trapezoidal should behave the same way.
        let coarse = run_spring_chain(&chain, IntegratorKind::Trapezoidal, 4e-2, 1).unwrap();
        let fine = run_spring_chain(&chain, IntegratorKind::Trapezoidal, 2e-2, 1).unwrap();
        let ratio = coarse.error / fine.error;
        assert!((2.8..5.6).contains(&ratio), "trapezoidal ratio {}", ratio);
    }

    #[test]
    fn spring_chain_rejects_bad_dt_and_flags_instability() {
        let chain = standard_spring_chain();
        let err = run_spring_chain(&chain, IntegratorKind::Cdm, -1.0, 1).unwrap_err();
        assert!(matches!(err, WaveError::Config(_)));
        // CDM far above the global limit 0.039 must flag divergence.
        let err = run_spring_chain(&chain, IntegratorKind::Cdm, 0.5, 1).unwrap_err();
        assert!(matches!(err, WaveError::Numerical(_)));
    }

    #[test]
    fn plate_desk_mesh_has_the_advertised_structure() {
        let config = build_plate_desk(PLATE_SEED);
        config.validate().unwrap();
        let mesh = build_mesh(
            config.extent.clone(),
            config.cells_per_axis,
            config.dim,
            config.p,
            &config.domain,
            config.tree_depth,
            config.eps,
        )
        .unwrap();
        assert_eq!(mesh.n_cells(), 160);
        let hist = fill_histogram(&mesh);
        let total: usize = hist.iter().map(|(_, c)| c).sum();
        assert_eq!(total, 160, "histogram buckets must sum to the cell count");
        let uncut = mesh
            .classes
            .iter()
            .filter(|c| c.kind == CellKind::Uncut)
            .count();
        assert!(uncut > 80, "most plate cells are uncut, got {uncut}");
    }

    #[test]
    fn block3d_keeps_source_and_receivers_inside_the_solid() {
        let config = build_block3d_desk();
        config.validate().unwrap();
        assert!(contains(&config.domain, config.source.center));
        for r in &config.receivers {
            assert!(contains(&config.domain, *r), "receiver {:?}", r);
        }
    }

    #[test]
    fn config_roundtrip_builds_a_runnable_scenario() {
        let text = "\
scenario = two-disk test
geometry = difference(box(0, 0, 4, 2), disk(2, 1, 0.4))
extent = 0, 0, 4, 2
dim = 2
mesh.cells = 8, 4
mesh.p = 2
mesh.depth = 3
material.rho = 1.0
material.c = 2.0
material.beta = 6
source.kind = gaussian_derivative
source.fs = 1.5
source.center = 0.5, 1.0
source.sigma = 0.08
source.amplitude = 5
receiver.0 = 3.5, 1.0
receiver.1 = 0.5, 0.5
integrator.kind = leapfrog
integrator.dt = 1e-3
integrator.m = 4
duration = 0.3
seed = 11
";
        let config = config_to_scenario(&parse_config(text).unwrap()).unwrap();
        assert_eq!(config.name, "two-disk test");
        assert_eq!(config.dim, 2);
        assert_eq!(config.cells_per_axis, [8, 4, 1]);
        assert_eq!(config.p, 2);
        assert_eq!(config.receivers.len(), 2);
        assert_eq!(config.integrator, IntegratorKind::Leapfrog);
        assert_eq!(config.dt, Some(1e-3));
        assert_eq!(config.substeps, 4);
        assert!(!contains(&config.domain, [2.0, 1.0, 0.0]));
        assert!(contains(&config.domain, [0.5, 1.0, 0.0]));
    }

    #[test]
    fn config_validation_catches_bad_scenarios() {
        let base =
            "geometry = box(0,0,4,2)\nextent = 0,0,4,2\ndim = 2\nmesh.cells = 4,2\nduration = 1\n";
        // Negative dt.
        let text = format!("{base}integrator.dt = -0.5\n");
        let err = config_to_scenario(&parse_config(&text).unwrap()).unwrap_err();
        assert!(matches!(err, WaveError::Config(_)));
        // Receiver outside the extent.
        let text = format!("{base}receiver.0 = 5, 1\n");
        let err = config_to_scenario(&parse_config(&text).unwrap()).unwrap_err();
        assert!(format!("{err}").contains("receiver 0"));
        // Zero duration.
        let err = config_to_scenario(
            &parse_config("geometry = box(0,0,4,2)\nextent = 0,0,4,2\ndim = 2\nmesh.cells = 4,2\nduration = 0\n")
                .unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, WaveError::Config(_)));
        // Missing geometry.
        let err = config_to_scenario(
            &parse_config("extent = 0,0,4,2\ndim = 2\nmesh.cells = 4,2\nduration = 1\n").unwrap(),
        )
        .unwrap_err();
        assert!(format!("{err}").contains("geometry"));
    }

    #[test]
    fn small_run_produces_consistent_artifacts() {
        // Tiny immersed disk-in-a-box scenario, short horizon.
        let config = ScenarioConfig {
            name: "unit".into(),
            domain: ImplicitDomain::difference(
                ImplicitDomain::axis_box([0.0, 0.0, -FLAT_Z], [2.0, 2.0, FLAT_Z]),
                vec![ImplicitDomain::ball([1.3, 1.4, 0.0], 0.3)],
            ),
            extent: AxisBox::new([0.0, 0.0, 0.0], [2.0, 2.0, 0.0]),
            dim: 2,
            cells_per_axis: [6, 6, 1],
            p: 2,
            tree_depth: 3,
            eps: 1e-10,
            material: Material::new(1.0, 1.0),
            beta: 6,
            source: SourceSpec {
                temporal: TemporalSignal::GaussianDerivative { f_s: 2.0 },
                center: [0.4, 0.4, 0.0],
                sigma: 0.08,
                amplitude: 10.0,
            },
            receivers: vec![[0.4, 0.4, 0.0], [1.8, 0.3, 0.0]],
            integrator: IntegratorKind::Imex,
            dt: None,
            substeps: 1,
            coupling: LeapfrogCoupling::Interpolated,
            duration: 1.0,
            seed: 0,
        };
        let art = run(&config).unwrap();
        assert_eq!(art.report.n_dof, art.report.n_d + art.report.n_c);
        assert!(art.report.n_c > 0, "the disk must cut some cells");
        assert!(art.report.dt_explicit.unwrap() > art.report.dt_global);
        assert_eq!(art.times.len(), art.report.n_steps + 1);
        assert_eq!(art.traces.len(), 2);
        assert!(art.traces[0].iter().all(|v| v.is_finite()));
        assert!(art.energies.iter().all(|e| e.is_finite() && *e >= -1e-12));
        let peak: f64 = art.traces[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak > 0.0, "the source receiver must see the pulse");

        let dir = tempfile::tempdir().unwrap();
        let files = write_artifacts(
            dir.path(),
            &art.times,
            &art.traces,
            &art.energies,
            &art.report,
        )
        .unwrap();
        assert_eq!(files.len(), 4);
        let recv = std::fs::read_to_string(dir.path().join("receivers.csv")).unwrap();
        assert!(recv.starts_with("t,r0,r1\n"));
        assert_eq!(recv.lines().count(), art.times.len() + 1);
        let energy = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
        assert!(energy.starts_with("t,E\n"));
        let error = std::fs::read_to_string(dir.path().join("error.csv")).unwrap();
        assert!(error.starts_with("dt,integrator,e_l2,runtime_s\n"));
        assert!(error.contains("imex"));
        let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
        assert!(report.contains("scenario=unit"));
        assert!(report.contains("n_dof="));
        for line in report.lines() {
            assert!(line.contains('='), "report lines are key=value: {line}");
        }
    }
}
