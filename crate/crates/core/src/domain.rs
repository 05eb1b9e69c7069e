//! Lattice discretization of the domain Ω, its boundary strip Γ_ε and the
//! closed ε-ball neighborhoods used by every scheme in this crate.
//!
//! Nodes live on the integer lattice scaled by the spacing `h` (coordinates
//! `i·h`). A lattice point is *interior* when it lies strictly inside Ω and
//! belongs to the *strip* when it lies outside Ω at distance `< ε` from ∂Ω.
//! Boundary data are read on the strip; schemes update interior values only.
//!
//! The ε-ball is the closed lattice ball `|y − x| ≤ ε` with `ε = k·h` for an
//! integer `k ≥ 1`. Membership is decided in integer arithmetic
//! (`di² + dj² ≤ k²`), so the maximal reachable step equals ε exactly; with
//! an open ball the reach on the lattice would be ε − h and the `sup − ε`
//! branch of the dynamic programming operator would drift.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Relative geometric tolerance used when classifying lattice points.
/// Lattice points intended to lie exactly on ∂Ω must not leak into the
/// interior through floating-point noise; genuine interior points are at
/// least one spacing away from the boundary, so any value ≪ 1 works.
const GEOM_TOL_REL: f64 = 1e-9;

/// Domain shape. Membership tests use strict inequality on the defining
/// function; distances to ∂Ω are analytic per shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Interval { a: f64, b: f64 },
    Rectangle { a1: f64, b1: f64, a2: f64, b2: f64 },
    Ball { center: [f64; 2], radius: f64 },
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Interval { a, b } => a.is_finite() && b.is_finite() && a < b,
            Shape::Rectangle { a1, b1, a2, b2 } => {
                [a1, b1, a2, b2].iter().all(|v| v.is_finite()) && a1 < b1 && a2 < b2
            }
            Shape::Ball { center, radius } => {
                center.iter().all(|v| v.is_finite()) && radius.is_finite() && radius > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("degenerate shape {self:?}")))
        }
    }

    /// Strict interior test with a symmetric tolerance on the defining function.
    pub fn contains_strictly(&self, p: [f64; 2], tol: f64) -> bool {
        match *self {
            Shape::Interval { a, b } => p[0] > a + tol && p[0] < b - tol,
            Shape::Rectangle { a1, b1, a2, b2 } => {
                p[0] > a1 + tol && p[0] < b1 - tol && p[1] > a2 + tol && p[1] < b2 - tol
            }
            Shape::Ball { center, radius } => dist(p, center) < radius - tol,
        }
    }

    /// Euclidean distance from `p` to ∂Ω (valid inside and outside).
    pub fn boundary_dist(&self, p: [f64; 2]) -> f64 {
        match *self {
            Shape::Interval { a, b } => (p[0] - a).abs().min((p[0] - b).abs()),
            Shape::Rectangle { a1, b1, a2, b2 } => {
                let ox = (a1 - p[0]).max(p[0] - b1).max(0.0);
                let oy = (a2 - p[1]).max(p[1] - b2).max(0.0);
                if ox == 0.0 && oy == 0.0 {
                    // inside the closed rectangle: nearest side
                    (p[0] - a1).min(b1 - p[0]).min(p[1] - a2).min(b2 - p[1])
                } else {
                    ox.hypot(oy)
                }
            }
            Shape::Ball { center, radius } => (dist(p, center) - radius).abs(),
        }
    }

    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            Shape::Interval { a, b } => ([a, 0.0], [b, 0.0]),
            Shape::Rectangle { a1, b1, a2, b2 } => ([a1, a2], [b1, b2]),
            Shape::Ball { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
        }
    }
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Interior,
    Strip,
}

/// Immutable lattice discretization: node coordinates, interior/strip index
/// sets and per-interior-node ε-ball neighbor lists. Node ids follow the
/// lexicographic order of lattice coordinates, so two builds from identical
/// parameters produce identical orderings. Safe to share across threads.
#[derive(Debug)]
pub struct GridDomain {
    shape: Shape,
    dim: usize,
    h: f64,
    epsilon: f64,
    eps_steps: i64,
    coords: Vec<[f64; 2]>,
    lattice: Vec<[i64; 2]>,
    kinds: Vec<NodeKind>,
    interior: Vec<NodeId>,
    strip: Vec<NodeId>,
    neighbors: Vec<Vec<NodeId>>,
    index: HashMap<[i64; 2], NodeId>,
}

impl GridDomain {
    /// Builds the lattice for `shape` with spacing `h` and strip width
    /// `epsilon = k·h`, `k ≥ 1` integer.
    pub fn build(shape: Shape, h: f64, epsilon: f64) -> Result<Arc<GridDomain>> {
        shape.validate()?;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Config(format!("spacing h must be positive, got {h}")));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let k = (epsilon / h).round();
        if k < 1.0 || ((k * h - epsilon) / epsilon).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "epsilon ({epsilon}) must be an exact positive integer multiple of h ({h})"
            )));
        }
        let eps_steps = k as i64;
        let epsilon = k * h; // canonical value used everywhere downstream
        let geom_tol = GEOM_TOL_REL * h;
        let dim = shape.dim();

        let (lo, hi) = shape.bounds();
        let i_lo = ((lo[0] - epsilon) / h).floor() as i64 - 1;
        let i_hi = ((hi[0] + epsilon) / h).ceil() as i64 + 1;
        let (j_lo, j_hi) = if dim == 2 {
            (
                ((lo[1] - epsilon) / h).floor() as i64 - 1,
                ((hi[1] + epsilon) / h).ceil() as i64 + 1,
            )
        } else {
            (0, 0)
        };

        let mut coords = Vec::new();
        let mut lattice = Vec::new();
        let mut kinds = Vec::new();
        let mut interior = Vec::new();
        let mut strip = Vec::new();
        let mut index = HashMap::new();
        for i in i_lo..=i_hi {
            for j in j_lo..=j_hi {
                let p = [i as f64 * h, j as f64 * h];
                let kind = if shape.contains_strictly(p, geom_tol) {
                    NodeKind::Interior
                } else if shape.boundary_dist(p) < epsilon - geom_tol {
                    NodeKind::Strip
                } else {
                    continue;
                };
                let id = coords.len();
                coords.push(p);
                lattice.push([i, j]);
                kinds.push(kind);
                match kind {
                    NodeKind::Interior => interior.push(id),
                    NodeKind::Strip => strip.push(id),
                }
                index.insert([i, j], id);
            }
        }
        if interior.is_empty() {
            return Err(Error::DomainTooSmall(format!(
                "no lattice point lies strictly inside {shape:?} at spacing {h}"
            )));
        }

        let offsets = ball_offsets(eps_steps, dim);
        let mut neighbors = vec![Vec::new(); coords.len()];
        for &id in &interior {
            let [i, j] = lattice[id];
            let mut list = Vec::with_capacity(offsets.len());
            for &[di, dj] in &offsets {
                match index.get(&[i + di, j + dj]) {
                    Some(&nb) => list.push(nb),
                    None => {
                        // cannot happen on convex shapes: any ε-ball point of an
                        // interior node is interior or within ε of ∂Ω
                        return Err(Error::Config(format!(
                            "ε-ball neighbor of interior node at {:?} falls outside the node set",
                            coords[id]
                        )));
                    }
                }
            }
            debug_assert!(list.windows(2).all(|w| w[0] < w[1]));
            neighbors[id] = list;
        }

        Ok(Arc::new(GridDomain {
            shape,
            dim,
            h,
            epsilon,
            eps_steps,
            coords,
            lattice,
            kinds,
            interior,
            strip,
            neighbors,
            index,
        }))
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// ε expressed in lattice steps (ε = k·h).
    pub fn eps_steps(&self) -> i64 {
        self.eps_steps
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn interior(&self) -> &[NodeId] {
        &self.interior
    }

    pub fn strip(&self) -> &[NodeId] {
        &self.strip
    }

    pub fn coords(&self, id: NodeId) -> [f64; 2] {
        self.coords[id]
    }

    pub fn lattice_coords(&self, id: NodeId) -> [i64; 2] {
        self.lattice[id]
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.kinds[id]
    }

    pub fn is_interior(&self, id: NodeId) -> bool {
        self.kinds[id] == NodeKind::Interior
    }

    /// Node id at the given lattice coordinates, if that point is a node.
    pub fn node_at(&self, lattice: [i64; 2]) -> Option<NodeId> {
        self.index.get(&lattice).copied()
    }

    /// Closed ε-ball neighborhood of an interior node, ascending node ids,
    /// including the node itself.
    pub fn ball_neighbors(&self, id: NodeId) -> Result<&[NodeId]> {
        if id >= self.coords.len() {
            return Err(Error::Contract(format!("node id {id} out of range")));
        }
        if !self.is_interior(id) {
            return Err(Error::Contract(format!(
                "ε-ball neighborhoods are defined on interior nodes; {:?} is a strip node",
                self.coords[id]
            )));
        }
        Ok(&self.neighbors[id])
    }

    /// Like [`ball_neighbors`](Self::ball_neighbors) but for hot loops that
    /// already hold an interior id.
    pub(crate) fn neighbors_unchecked(&self, id: NodeId) -> &[NodeId] {
        &self.neighbors[id]
    }

    /// True when this grid was built from the same parameters as `other`
    /// (and therefore has identical node ordering).
    pub fn same_layout(&self, other: &GridDomain) -> bool {
        self.shape == other.shape
            && self.h == other.h
            && self.epsilon == other.epsilon
            && self.coords.len() == other.coords.len()
    }
}

/// Integer offsets of the closed lattice ball of radius `k` steps.
/// Lexicographic order, so derived neighbor lists come out sorted.
fn ball_offsets(k: i64, dim: usize) -> Vec<[i64; 2]> {
    let mut out = Vec::new();
    for di in -k..=k {
        if dim == 1 {
            out.push([di, 0]);
        } else {
            for dj in -k..=k {
                if di * di + dj * dj <= k * k {
                    out.push([di, dj]);
                }
            }
        }
    }
    out
}
