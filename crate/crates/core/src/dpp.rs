//! Fixed-point value iteration for the three discrete operators on the
//! ε-ball lattice:
//!
//! * `PayOrLeave`       T[u](x) = min{ ½(sup u + inf u), max{0, sup u − ε} }
//! * `GradientConstraint` T[u](x) = min{ ½(sup u + inf u), sup u − ε }
//! * `InfinityHarmonic` T[u](x) = ½(sup u + inf u)
//!
//! with sup/inf taken over the closed ε-ball neighborhood N(x) (which
//! contains x itself) and strip values frozen at the boundary datum. All
//! three operators are monotone: u ≤ v pointwise implies T[u] ≤ T[v]
//! pointwise, exactly in floating point, because min, max and the midpoint
//! are monotone operations. Seeded from the constant max_Γ F, pay-or-leave
//! iterates decrease pointwise every sweep and stay within
//! [min{0, min_Γ F}, max_Γ F].

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{GridDomain, NodeId};
use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Below this interior size a Jacobi sweep runs serially; the outcome is
/// identical either way since every node is a pure function of the input.
const PAR_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    PayOrLeave,
    GradientConstraint,
    InfinityHarmonic,
}

impl OperatorKind {
    #[inline]
    fn apply(self, sup: f64, inf: f64, eps: f64) -> f64 {
        let tow = 0.5 * (sup + inf);
        match self {
            OperatorKind::PayOrLeave => tow.min((sup - eps).max(0.0)),
            OperatorKind::GradientConstraint => tow.min(sup - eps),
            OperatorKind::InfinityHarmonic => tow,
        }
    }
}

/// Outcome of a value iteration run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationReport {
    pub iterations: usize,
    pub final_residual: f64,
    /// Whether u_{n+1} ≤ u_n held on every sweep (true for the max_Γ F seed).
    pub monotone: bool,
    pub converged: bool,
    pub wall_time_s: f64,
}

#[inline]
fn sup_inf(grid: &GridDomain, values: &[f64], x: NodeId) -> (f64, f64) {
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    for &y in grid.neighbors_unchecked(x) {
        let v = values[y];
        if v > sup {
            sup = v;
        }
        if v < inf {
            inf = v;
        }
    }
    (sup, inf)
}

fn sweep_into(
    grid: &GridDomain,
    values: &[f64],
    kind: OperatorKind,
    active: Option<&[NodeId]>,
    out: &mut [f64],
) {
    let eps = grid.epsilon();
    let nodes = active.unwrap_or_else(|| grid.interior());
    if nodes.len() < PAR_THRESHOLD {
        for &x in nodes {
            let (sup, inf) = sup_inf(grid, values, x);
            out[x] = kind.apply(sup, inf, eps);
        }
    } else {
        let updated: Vec<f64> = nodes
            .par_iter()
            .map(|&x| {
                let (sup, inf) = sup_inf(grid, values, x);
                kind.apply(sup, inf, eps)
            })
            .collect();
        for (&x, v) in nodes.iter().zip(updated) {
            out[x] = v;
        }
    }
}

/// One Jacobi sweep: every interior value replaced by T evaluated on the
/// input field, strip values copied through.
pub fn apply_operator(field: &ScalarField, kind: OperatorKind) -> ScalarField {
    let grid = field.domain();
    let mut out = field.clone();
    let (values, out_values) = (field.values(), out.values_mut());
    sweep_into(grid, values, kind, None, out_values);
    out
}

/// Sup over interior of |T[u](x) − u(x)|; zero exactly at a discrete fixed point.
pub fn residual(field: &ScalarField, kind: OperatorKind) -> f64 {
    let grid = field.domain();
    let eps = grid.epsilon();
    grid.interior()
        .iter()
        .map(|&x| {
            let (sup, inf) = sup_inf(grid, field.values(), x);
            (kind.apply(sup, inf, eps) - field.get(x)).abs()
        })
        .fold(0.0, f64::max)
}

/// Sweep discipline. Jacobi (simultaneous) sweeps are the default: the
/// result is independent of node order and sweeps parallelize trivially.
/// Gauss–Seidel updates in place in node order and usually converges in
/// fewer sweeps; seeded from max_Γ F its iterates still decrease pointwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    #[default]
    Jacobi,
    GaussSeidel,
}

/// Iterates T to its fixed point. The `boundary` field supplies the strip
/// values; the interior seed is max_Γ F for `PayOrLeave`/`GradientConstraint`
/// (which makes the iterates pointwise non-increasing) and the strip mean for
/// `InfinityHarmonic`. Non-convergence within `max_iter` is not a failure:
/// the report comes back flagged.
pub fn value_iterate(
    boundary: &ScalarField,
    kind: OperatorKind,
    tol: f64,
    max_iter: usize,
) -> (ScalarField, IterationReport) {
    value_iterate_with(boundary, kind, tol, max_iter, SweepMode::Jacobi)
}

/// [`value_iterate`] with an explicit sweep discipline.
pub fn value_iterate_with(
    boundary: &ScalarField,
    kind: OperatorKind,
    tol: f64,
    max_iter: usize,
    mode: SweepMode,
) -> (ScalarField, IterationReport) {
    let grid = Arc::clone(boundary.domain());
    let strip_vals: Vec<f64> = grid.strip().iter().map(|&s| boundary.get(s)).collect();
    let seed = match kind {
        OperatorKind::PayOrLeave | OperatorKind::GradientConstraint => {
            strip_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
        OperatorKind::InfinityHarmonic => {
            strip_vals.iter().sum::<f64>() / strip_vals.len() as f64
        }
    };
    let mut field = boundary.clone();
    for &x in grid.interior() {
        field.set(x, seed);
    }
    iterate(field, kind, None, tol, max_iter, mode)
}

/// Same iteration restricted to `active` nodes, everything else frozen at the
/// values already present in `seed`. Used for solves on masked subdomains.
pub(crate) fn value_iterate_masked(
    seed: ScalarField,
    kind: OperatorKind,
    active: &[NodeId],
    tol: f64,
    max_iter: usize,
) -> (ScalarField, IterationReport) {
    iterate(seed, kind, Some(active), tol, max_iter, SweepMode::Jacobi)
}

fn iterate(
    mut field: ScalarField,
    kind: OperatorKind,
    active: Option<&[NodeId]>,
    tol: f64,
    max_iter: usize,
    mode: SweepMode,
) -> (ScalarField, IterationReport) {
    assert!(tol > 0.0, "tolerance must be positive");
    let start = Instant::now();
    let grid = Arc::clone(field.domain());
    let nodes: Vec<NodeId> = active.unwrap_or_else(|| grid.interior()).to_vec();
    let mut next = field.clone();
    let mut monotone = true;
    let mut iterations = 0;
    let mut res = residual_on(&grid, field.values(), kind, &nodes);
    while res > tol && iterations < max_iter {
        let mut sweep_res: f64 = 0.0;
        match mode {
            SweepMode::Jacobi => {
                sweep_into(&grid, field.values(), kind, Some(&nodes), next.values_mut());
                for &x in &nodes {
                    let old = field.get(x);
                    let new = next.get(x);
                    if new > old {
                        monotone = false;
                    }
                    sweep_res = sweep_res.max((new - old).abs());
                }
                std::mem::swap(&mut field, &mut next);
            }
            SweepMode::GaussSeidel => {
                let eps = grid.epsilon();
                let values = field.values_mut();
                for &x in &nodes {
                    let (sup, inf) = sup_inf(&grid, values, x);
                    let new = kind.apply(sup, inf, eps);
                    let old = values[x];
                    if new > old {
                        monotone = false;
                    }
                    sweep_res = sweep_res.max((new - old).abs());
                    values[x] = new;
                }
            }
        }
        iterations += 1;
        res = sweep_res;
    }
    let converged = res <= tol;
    let report = IterationReport {
        iterations,
        final_residual: res,
        monotone,
        converged,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    (field, report)
}

fn residual_on(grid: &GridDomain, values: &[f64], kind: OperatorKind, nodes: &[NodeId]) -> f64 {
    let eps = grid.epsilon();
    nodes
        .iter()
        .map(|&x| {
            let (sup, inf) = sup_inf(grid, values, x);
            (kind.apply(sup, inf, eps) - values[x]).abs()
        })
        .fold(0.0, f64::max)
}

/// Oscillation A(x) = sup_{N(x)} u − inf_{N(x)} u per interior node
/// (strip entries zero). For the converged game value this is bounded by
/// 4·max{Lip F, 1}·ε.
pub fn oscillation(field: &ScalarField) -> ScalarField {
    let grid = field.domain();
    let mut out = ScalarField::constant(Arc::clone(grid), 0.0);
    for &x in grid.interior() {
        let (sup, inf) = sup_inf(grid, field.values(), x);
        out.set(x, sup - inf);
    }
    out
}

/// Pairwise sup-distances between solutions of the same problem resampled at
/// several ε (spacing scaled along, keeping ε/h fixed), compared on the nodes
/// of the coarsest lattice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsilonStudy {
    pub eps: Vec<f64>,
    /// D[i][j] = sup over common interior nodes of |u^{ε_i} − u^{ε_j}|.
    pub pairwise: Vec<Vec<f64>>,
    /// Sup-distance of each u^{ε_i} to the reference, when one was supplied.
    pub vs_reference: Option<Vec<f64>>,
    pub reports: Vec<IterationReport>,
}

pub fn epsilon_study(
    spec: &crate::field::ProblemSpec,
    eps_list: &[f64],
    kind: OperatorKind,
    tol: f64,
    max_iter: usize,
    reference: Option<&dyn Fn([f64; 2]) -> f64>,
) -> Result<EpsilonStudy> {
    if eps_list.is_empty() {
        return Err(Error::Config("empty epsilon list".into()));
    }
    let ratio = spec.h / spec.epsilon;
    let mut solutions = Vec::new();
    let mut reports = Vec::new();
    for &eps in eps_list {
        let mut sub = spec.clone();
        sub.epsilon = eps;
        sub.h = eps * ratio;
        let grid = sub.build_grid()?;
        let boundary = sub.boundary_field(&grid)?;
        let (u, report) = value_iterate(&boundary, kind, tol, max_iter);
        solutions.push(u);
        reports.push(report);
    }

    // comparison lattice: the grid with the largest spacing
    let coarse = solutions
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.domain()
                .spacing()
                .partial_cmp(&b.1.domain().spacing())
                .unwrap()
        })
        .map(|(i, _)| i)
        .unwrap();
    let coarse_grid = Arc::clone(solutions[coarse].domain());
    let hc = coarse_grid.spacing();
    let mut ratios = Vec::new();
    for u in &solutions {
        let hf = u.domain().spacing();
        let r = (hc / hf).round();
        if r < 1.0 || (r * hf - hc).abs() > 1e-9 * hc {
            return Err(Error::Config(format!(
                "incompatible lattices: coarse spacing {hc} is not an integer multiple of {hf}"
            )));
        }
        ratios.push(r as i64);
    }
    let common: Vec<[i64; 2]> = coarse_grid
        .interior()
        .iter()
        .map(|&i| coarse_grid.lattice_coords(i))
        .collect();
    let value_at = |si: usize, latc: [i64; 2]| -> Result<f64> {
        let u = &solutions[si];
        let r = ratios[si];
        let id = u
            .domain()
            .node_at([latc[0] * r, latc[1] * r])
            .ok_or_else(|| {
                Error::Config("incompatible lattices: shared node missing on fine grid".into())
            })?;
        Ok(u.get(id))
    };

    let n = solutions.len();
    let mut pairwise = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut d: f64 = 0.0;
            for &c in &common {
                d = d.max((value_at(i, c)? - value_at(j, c)?).abs());
            }
            pairwise[i][j] = d;
            pairwise[j][i] = d;
        }
    }
    let vs_reference = match reference {
        Some(f) => {
            let mut out = Vec::with_capacity(n);
            for (i, u) in solutions.iter().enumerate() {
                let _ = i;
                let grid = u.domain();
                let d = grid
                    .interior()
                    .iter()
                    .map(|&id| (u.get(id) - f(grid.coords(id))).abs())
                    .fold(0.0, f64::max);
                out.push(d);
            }
            Some(out)
        }
        None => None,
    };
    Ok(EpsilonStudy { eps: eps_list.to_vec(), pairwise, vs_reference, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Shape;
    use crate::field::{sample_field, BoundaryDatum, Lambda0, ProblemSpec};

    fn ramp_problem() -> ScalarField {
        // (0,1) with h = ε = 0.25, F(0) = 0, F(1) = 1
        let g = GridDomain::build(Shape::Interval { a: 0.0, b: 1.0 }, 0.25, 0.25).unwrap();
        sample_field(&g, &BoundaryDatum::Affine { gradient: [1.0, 0.0], offset: 0.0 }).unwrap()
    }

    #[test]
    fn pay_or_leave_sweep_from_constant_seed() {
        let boundary = ramp_problem();
        let g = Arc::clone(boundary.domain());
        let mut u0 = boundary.clone();
        for &x in g.interior() {
            u0.set(x, 1.0);
        }
        let u1 = apply_operator(&u0, OperatorKind::PayOrLeave);
        let got: Vec<f64> = g.interior().iter().map(|&i| u1.get(i)).collect();
        assert_eq!(got, vec![0.5, 0.75, 0.75]);
        assert_eq!(residual(&u0, OperatorKind::PayOrLeave), 0.5);
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let g = GridDomain::build(Shape::Interval { a: 0.0, b: 1.0 }, 0.25, 0.25).unwrap();
        let zero = ScalarField::constant(g, 0.0);
        let u1 = apply_operator(&zero, OperatorKind::PayOrLeave);
        assert_eq!(u1.values(), zero.values());
        assert_eq!(residual(&zero, OperatorKind::PayOrLeave), 0.0);
    }

    #[test]
    fn negative_constant_is_a_fixed_point() {
        // min{−1, max{0, −1−ε}} = min{−1, 0} = −1
        let g = GridDomain::build(Shape::Interval { a: 0.0, b: 1.0 }, 0.25, 0.25).unwrap();
        let f = ScalarField::constant(g, -1.0);
        let u1 = apply_operator(&f, OperatorKind::PayOrLeave);
        assert_eq!(u1.values(), f.values());
    }

    #[test]
    fn ramp_converges_to_identity_map() {
        // with ε = h: min{½((x+h)+(x−h)), max{0, x+h−ε}} = x
        let boundary = ramp_problem();
        let (u, report) = value_iterate(&boundary, OperatorKind::PayOrLeave, 1e-12, 10_000);
        assert!(report.converged);
        assert!(report.monotone);
        assert_eq!(report.final_residual, 0.0);
        let g = u.domain();
        for &x in g.interior() {
            assert_eq!(u.get(x), g.coords(x)[0]);
        }
    }

    #[test]
    fn constant_data_is_infinity_harmonic() {
        let g = GridDomain::build(Shape::Ball { center: [0.0, 0.0], radius: 1.5 }, 0.25, 0.25)
            .unwrap();
        let c = ScalarField::constant(g, 3.5);
        let (u, report) = value_iterate(&c, OperatorKind::InfinityHarmonic, 1e-12, 10_000);
        assert!(report.converged);
        for v in u.values() {
            assert_eq!(*v, 3.5);
        }
    }

    #[test]
    fn oscillation_of_affine_field_is_two_eps() {
        let g = GridDomain::build(Shape::Interval { a: -1.0, b: 4.0 }, 0.25, 0.5).unwrap();
        let f = ScalarField::from_fn(g, |p| p[0]).unwrap();
        let a = oscillation(&f);
        let grid = f.domain();
        for &x in grid.interior() {
            assert!((a.get(x) - 1.0).abs() < 1e-12, "A = {}", a.get(x));
        }
        let c = ScalarField::constant(Arc::clone(grid), 2.0);
        assert!(oscillation(&c).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gauss_seidel_reaches_the_jacobi_fixed_point_faster() {
        let (grid, _) = {
            let g = GridDomain::build(Shape::Interval { a: -1.0, b: 4.0 }, 0.05, 0.2).unwrap();
            (g, ())
        };
        let datum = crate::field::BoundaryDatum::table_from_fn(&grid, |p| {
            if p[0] < 0.0 {
                1.0
            } else {
                -1.0
            }
        });
        let boundary = sample_field(&grid, &datum).unwrap();
        let (uj, rj) = value_iterate(&boundary, OperatorKind::PayOrLeave, 1e-10, 2_000_000);
        let (ug, rg) = value_iterate_with(
            &boundary,
            OperatorKind::PayOrLeave,
            1e-10,
            2_000_000,
            SweepMode::GaussSeidel,
        );
        assert!(rj.converged && rg.converged);
        assert!(rg.monotone, "in-place iterates must still decrease");
        assert!(rg.iterations < rj.iterations, "{} !< {}", rg.iterations, rj.iterations);
        assert!(ug.sup_diff_interior(&uj).unwrap() < 1e-7);
    }

    #[test]
    fn epsilon_study_diagonal_and_zero_data() {
        let spec = ProblemSpec {
            shape: Shape::Interval { a: 0.0, b: 1.0 },
            h: 0.05,
            epsilon: 0.1,
            boundary: BoundaryDatum::Constant(0.0),
            lambda0: Lambda0::Constant(1.0),
            p: None,
        };
        let zero = |_: [f64; 2]| 0.0;
        let study = epsilon_study(
            &spec,
            &[0.1, 0.1, 0.05],
            OperatorKind::PayOrLeave,
            1e-10,
            100_000,
            Some(&zero),
        )
        .unwrap();
        for i in 0..3 {
            assert_eq!(study.pairwise[i][i], 0.0);
            for j in 0..3 {
                assert_eq!(study.pairwise[i][j], 0.0); // F ≡ 0 solves to 0 at every ε
            }
        }
        assert_eq!(study.vs_reference.unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn mismatched_lattices_are_rejected() {
        let spec = ProblemSpec {
            shape: Shape::Interval { a: 0.0, b: 1.0 },
            h: 0.1,
            epsilon: 0.1,
            boundary: BoundaryDatum::Constant(0.0),
            lambda0: Lambda0::Constant(1.0),
            p: None,
        };
        // coarse spacing 0.1 is not an integer multiple of 0.075
        let err = epsilon_study(
            &spec,
            &[0.1, 0.075],
            OperatorKind::PayOrLeave,
            1e-10,
            1000,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
