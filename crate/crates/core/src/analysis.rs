//! Free-boundary extraction and the quantitative geometry checks: strong
//! non-degeneracy ratios, uniform positive density, porosity, growth
//! envelopes, Hausdorff distances and null-set comparisons.

use serde::{Deserialize, Serialize};

use crate::domain::{dist, NodeId};
use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Discrete free boundary ∂{u > 0}: interior nodes with u > tol_pos having a
/// face neighbor with u ≤ tol_pos, and vice versa. Kept as a point cloud;
/// every metric downstream is set-based.
#[derive(Debug, Clone)]
pub struct FreeBoundary {
    pub points: Vec<[f64; 2]>,
    pub node_ids: Vec<NodeId>,
    /// true where the node sits on the positive side (u > tol_pos).
    pub positive_side: Vec<bool>,
    pub tol_pos: f64,
}

impl FreeBoundary {
    /// The nonpositive-side points, the discrete stand-in for ∂{u>0} seen
    /// from inside the positivity set; falls back to all points when the
    /// nonpositive side is empty.
    pub fn zero_side_points(&self) -> Vec<[f64; 2]> {
        let zs: Vec<[f64; 2]> = self
            .points
            .iter()
            .zip(&self.positive_side)
            .filter(|(_, &pos)| !pos)
            .map(|(p, _)| *p)
            .collect();
        if zs.is_empty() {
            self.points.clone()
        } else {
            zs
        }
    }
}

/// Positivity mask {u > tol_pos} over all nodes plus the free boundary.
pub fn positivity_and_boundary(field: &ScalarField, tol_pos: f64) -> (Vec<bool>, FreeBoundary) {
    let grid = field.domain();
    let mask: Vec<bool> = (0..grid.node_count()).map(|i| field.get(i) > tol_pos).collect();
    let mut points = Vec::new();
    let mut node_ids = Vec::new();
    let mut positive_side = Vec::new();
    for &x in grid.interior() {
        let [i, j] = grid.lattice_coords(x);
        let mut offsets = vec![[i - 1, j], [i + 1, j]];
        if grid.dim() == 2 {
            offsets.push([i, j - 1]);
            offsets.push([i, j + 1]);
        }
        let sign_change = offsets
            .iter()
            .filter_map(|&l| grid.node_at(l))
            .any(|y| mask[y] != mask[x]);
        if sign_change {
            points.push(grid.coords(x));
            node_ids.push(x);
            positive_side.push(mask[x]);
        }
    }
    (mask, FreeBoundary { points, node_ids, positive_side, tol_pos })
}

/// Default positivity threshold: the p-solver leaves tiny positive noise in
/// dead cores, so a pure zero threshold misclassifies.
pub fn default_tol_pos(field: &ScalarField) -> f64 {
    1e-8 * (field.values().iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NondegEntry {
    pub point: [f64; 2],
    pub r: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NondegReport {
    pub entries: Vec<NondegEntry>,
    pub min_ratio: f64,
    /// (point, radius) pairs skipped because the ball left the domain.
    pub skipped: usize,
}

/// Non-degeneracy ratios sup_{B_r(x₀)} u / r^exponent over free-boundary
/// points; exponent p/(p−1) for the p-problem, 1 for the limit. Radii whose
/// ball is not contained in Ω are skipped with a note in the report.
pub fn nondegeneracy_check(
    field: &ScalarField,
    fb: &FreeBoundary,
    radii: &[f64],
    exponent: f64,
) -> Result<NondegReport> {
    if fb.points.is_empty() {
        return Ok(NondegReport { entries: Vec::new(), min_ratio: f64::INFINITY, skipped: 0 });
    }
    let grid = field.domain();
    let shape = grid.shape();
    let mut entries = Vec::new();
    let mut skipped = 0;
    for (&id, &p) in fb.node_ids.iter().zip(&fb.points) {
        let _ = id;
        for &r in radii {
            if shape.boundary_dist(p) <= r {
                skipped += 1;
                continue;
            }
            let sup = sup_over_ball(field, p, r);
            entries.push(NondegEntry { point: p, r, ratio: sup / r.powf(exponent) });
        }
    }
    let min_ratio = entries.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min);
    Ok(NondegReport { entries, min_ratio, skipped })
}

fn sup_over_ball(field: &ScalarField, center: [f64; 2], r: f64) -> f64 {
    let grid = field.domain();
    let h = grid.spacing();
    let ci = (center[0] / h).round() as i64;
    let cj = (center[1] / h).round() as i64;
    let k = (r / h).ceil() as i64 + 1;
    let r2 = r * r * (1.0 + 1e-12);
    let mut sup = f64::NEG_INFINITY;
    for di in -k..=k {
        let (j_lo, j_hi) = if grid.dim() == 2 { (-k, k) } else { (0, 0) };
        for dj in j_lo..=j_hi {
            if let Some(y) = grid.node_at([ci + di, cj + dj]) {
                let q = grid.coords(y);
                let dx = q[0] - center[0];
                let dy = q[1] - center[1];
                if dx * dx + dy * dy <= r2 {
                    sup = sup.max(field.get(y));
                }
            }
        }
    }
    sup
}

/// Uniform-positive-density ratio: min over free-boundary points of
/// #{nodes in B_ρ(x₀) with u > tol_pos} / #{nodes in B_ρ(x₀)}.
pub fn density_check(field: &ScalarField, fb: &FreeBoundary, rho: f64) -> f64 {
    if fb.points.is_empty() {
        return 1.0;
    }
    let grid = field.domain();
    let h = grid.spacing();
    let k = (rho / h).ceil() as i64 + 1;
    let r2 = rho * rho * (1.0 + 1e-12);
    let mut min_ratio = f64::INFINITY;
    for &p in &fb.points {
        let ci = (p[0] / h).round() as i64;
        let cj = (p[1] / h).round() as i64;
        let mut total = 0usize;
        let mut positive = 0usize;
        for di in -k..=k {
            let (j_lo, j_hi) = if grid.dim() == 2 { (-k, k) } else { (0, 0) };
            for dj in j_lo..=j_hi {
                if let Some(y) = grid.node_at([ci + di, cj + dj]) {
                    let q = grid.coords(y);
                    let dx = q[0] - p[0];
                    let dy = q[1] - p[1];
                    if dx * dx + dy * dy <= r2 {
                        total += 1;
                        if field.get(y) > fb.tol_pos {
                            positive += 1;
                        }
                    }
                }
            }
        }
        if total > 0 {
            min_ratio = min_ratio.min(positive as f64 / total as f64);
        }
    }
    min_ratio
}

/// Porosity estimator ζ: for each free-boundary point x and radius r, the
/// largest ρ with a lattice ball B_ρ(y) ⊆ B_r(x) avoiding the boundary cloud
/// (shrunk by one spacing to keep the avoidance strict); ζ is the worst ρ/r.
/// Vacuously 1 when the boundary is empty; clamped at 0 for adversarial
/// boundaries that fill the grid.
pub fn porosity_estimate(field: &ScalarField, fb: &FreeBoundary, radii: &[f64]) -> f64 {
    if fb.points.is_empty() {
        return 1.0;
    }
    let grid = field.domain();
    let h = grid.spacing();
    let mut zeta = f64::INFINITY;
    for &p in &fb.points {
        for &r in radii {
            let ci = (p[0] / h).round() as i64;
            let cj = (p[1] / h).round() as i64;
            let k = (r / h).ceil() as i64 + 1;
            let mut best = 0.0f64;
            for di in -k..=k {
                let (j_lo, j_hi) = if grid.dim() == 2 { (-k, k) } else { (0, 0) };
                for dj in j_lo..=j_hi {
                    if let Some(y) = grid.node_at([ci + di, cj + dj]) {
                        let q = grid.coords(y);
                        let inside = r - dist(q, p);
                        if inside <= 0.0 {
                            continue;
                        }
                        let clear = dist_to_cloud(q, &fb.points) - h;
                        best = best.max(inside.min(clear));
                    }
                }
            }
            zeta = zeta.min((best / r).max(0.0));
        }
    }
    zeta
}

fn dist_to_cloud(p: [f64; 2], cloud: &[[f64; 2]]) -> f64 {
    cloud.iter().map(|&q| dist(p, q)).fold(f64::INFINITY, f64::min)
}

/// Hausdorff distance between finite point sets, brute force.
pub fn hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet(
            "Hausdorff distance undefined for an empty point set".into(),
        ));
    }
    let one_sided = |from: &[[f64; 2]], to: &[[f64; 2]]| {
        from.iter().map(|&p| dist_to_cloud(p, to)).fold(0.0f64, f64::max)
    };
    Ok(one_sided(a, b).max(one_sided(b, a)))
}

/// Growth envelope over positivity nodes x (free-boundary nodes excluded):
/// c1 = min u(x)/d(x), c2 = max u(x)/d(x) with d the brute-force distance to
/// the nonpositive side of the free boundary.
pub fn growth_envelope(field: &ScalarField, fb: &FreeBoundary) -> Result<(f64, f64)> {
    if fb.points.is_empty() {
        return Err(Error::EmptySet("growth envelope needs a nonempty free boundary".into()));
    }
    let grid = field.domain();
    let targets = fb.zero_side_points();
    let on_fb: std::collections::HashSet<NodeId> = fb.node_ids.iter().copied().collect();
    let mut c1 = f64::INFINITY;
    let mut c2: f64 = 0.0;
    for &x in grid.interior() {
        if field.get(x) <= fb.tol_pos || on_fb.contains(&x) {
            continue;
        }
        let d = dist_to_cloud(grid.coords(x), &targets);
        if d > 0.0 {
            let ratio = field.get(x) / d;
            c1 = c1.min(ratio);
            c2 = c2.max(ratio);
        }
    }
    if !c1.is_finite() {
        return Err(Error::EmptySet("positivity set has no interior beyond the boundary".into()));
    }
    Ok((c1, c2))
}

/// Fraction of interior nodes where the null sets {|u| ≤ tol} of two fields
/// disagree (symmetric difference over interior count).
pub fn null_set_symdiff(a: &ScalarField, b: &ScalarField, tol: f64) -> Result<f64> {
    if !a.same_domain(b) {
        return Err(Error::ShapeMismatch("fields live on different grids".into()));
    }
    let grid = a.domain();
    let interior = grid.interior();
    let differing = interior
        .iter()
        .filter(|&&x| (a.get(x).abs() <= tol) != (b.get(x).abs() <= tol))
        .count();
    Ok(differing as f64 / interior.len() as f64)
}

/// Aggregated free-boundary metrics for one field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tol_pos: f64,
    pub fb_points: usize,
    pub nondeg_min_ratio: f64,
    pub density_min: f64,
    pub porosity_zeta: f64,
    pub lipschitz: f64,
    pub growth_c1: f64,
    pub growth_c2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hausdorff_vs_reference: Option<f64>,
}

pub struct AnalysisParams<'a> {
    pub radii: &'a [f64],
    pub rho: f64,
    pub tol_pos: Option<f64>,
    /// Exponent in the non-degeneracy ratio; 1 for limit solutions.
    pub exponent: f64,
    /// Optional reference boundary for the Hausdorff column.
    pub reference_fb: Option<&'a [[f64; 2]]>,
}

pub fn analyze(field: &ScalarField, params: &AnalysisParams) -> Result<AnalysisReport> {
    let tol_pos = params.tol_pos.unwrap_or_else(|| default_tol_pos(field));
    let (_, fb) = positivity_and_boundary(field, tol_pos);
    let nondeg = nondegeneracy_check(field, &fb, params.radii, params.exponent)?;
    let density_min = density_check(field, &fb, params.rho);
    let porosity_zeta = porosity_estimate(field, &fb, params.radii);
    let (growth_c1, growth_c2) = match growth_envelope(field, &fb) {
        Ok(pair) => pair,
        Err(_) => (0.0, 0.0), // no boundary or no positivity set: envelope is vacuous
    };
    let hausdorff_vs_reference = match params.reference_fb {
        Some(reference) if !fb.points.is_empty() => Some(hausdorff(&fb.points, reference)?),
        _ => None,
    };
    Ok(AnalysisReport {
        tol_pos,
        fb_points: fb.points.len(),
        nondeg_min_ratio: nondeg.min_ratio,
        density_min,
        porosity_zeta,
        lipschitz: field.lipschitz_seminorm(),
        growth_c1,
        growth_c2,
        hausdorff_vs_reference,
    })
}
