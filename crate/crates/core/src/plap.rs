//! Minimization of the discrete p-Laplacian functional
//!
//! J_p[u] = Σ_cells h^N |∇_h u|^p / p + Σ_nodes h^N λ₀(x) max{u(x), 0}
//!
//! with forward differences per axis on each lattice cell and the boundary
//! datum fixed on the strip. J_p is convex with a unique minimizer, so any
//! descent scheme reaching stationarity is correct. The positive part is
//! nonsmooth at u = 0; minimization runs in two phases:
//!
//! 1. L-BFGS with Armijo backtracking on the smoothed energy, where
//!    max{t, 0} is replaced by s_δ(t) = ½(t + √(t² + δ²)) with δ = h² by
//!    default, down to a projected-gradient sup-norm of `tol_grad`;
//! 2. a finite proximal-gradient polish on the exact energy, whose prox step
//!    zeroes the dead core exactly and restores the subgradient condition.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::domain::{GridDomain, NodeId};
use crate::dpp::IterationReport;
use crate::error::{Error, Result};
use crate::field::{extension_field, BoundaryDatum, Lambda0, ProblemSpec, ScalarField};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlapOptions {
    pub p: f64,
    /// Smoothing width δ for the positive part; `None` means h².
    pub delta: Option<f64>,
    /// Sup-norm target for the projected gradient of the smoothed energy.
    pub tol_grad: f64,
    pub max_iter: usize,
    /// Cap on proximal polish steps after the smoothed phase.
    pub polish_iter: usize,
    /// Armijo parameters.
    pub ls_c1: f64,
    pub ls_shrink: f64,
}

impl PlapOptions {
    pub fn new(p: f64) -> Self {
        PlapOptions {
            p,
            delta: None,
            tol_grad: 1e-8,
            max_iter: 100_000,
            polish_iter: 2_000,
            ls_c1: 1e-4,
            ls_shrink: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(2.0..=128.0).contains(&self.p) {
            return Err(Error::Config(format!("p must lie in [2, 128], got {}", self.p)));
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0) {
                return Err(Error::Config(format!("delta must be nonnegative, got {d}")));
            }
        }
        if !(self.tol_grad > 0.0) {
            return Err(Error::Config("tol_grad must be positive".into()));
        }
        Ok(())
    }
}

/// One forward-difference cell: anchor node plus its +x (and +y) neighbors.
#[derive(Debug, Clone, Copy)]
struct Cell {
    nodes: [NodeId; 3],
}

/// Discrete energy assembled once per (grid, λ₀, p).
struct EnergyModel {
    cells: Vec<Cell>,
    /// dof index per node (interior nodes only).
    dof: Vec<Option<usize>>,
    interior: Vec<NodeId>,
    /// λ₀(x)·h^N per interior node.
    lam_w: Vec<f64>,
    p: f64,
    h: f64,
    cell_w: f64, // h^N
    dim: usize,
}

impl EnergyModel {
    fn build(grid: &Arc<GridDomain>, lambda0: &Lambda0, p: f64) -> Result<Self> {
        lambda0.validate(grid)?;
        let dim = grid.dim();
        let h = grid.spacing();
        let cell_w = h.powi(dim as i32);
        let mut dof = vec![None; grid.node_count()];
        for (k, &id) in grid.interior().iter().enumerate() {
            dof[id] = Some(k);
        }
        // cells: all forward neighbors present and at least one corner interior
        let mut cells = Vec::new();
        for id in 0..grid.node_count() {
            let [i, j] = grid.lattice_coords(id);
            let Some(right) = grid.node_at([i + 1, j]) else { continue };
            let up = if dim == 2 {
                match grid.node_at([i, j + 1]) {
                    Some(n) => n,
                    None => continue,
                }
            } else {
                id // unused in 1D
            };
            let corners = if dim == 2 { vec![id, right, up] } else { vec![id, right] };
            if corners.iter().any(|&n| grid.is_interior(n)) {
                cells.push(Cell { nodes: [id, right, up] });
            }
        }
        let lam_w = grid.interior().iter().map(|&id| lambda0.at(id) * cell_w).collect();
        Ok(EnergyModel {
            cells,
            dof,
            interior: grid.interior().to_vec(),
            lam_w,
            p,
            h,
            cell_w,
            dim,
        })
    }

    /// Gradient-term energy; `Err` on |∇u|^p overflow.
    fn grad_energy(&self, values: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for c in &self.cells {
            let gx = (values[c.nodes[1]] - values[c.nodes[0]]) / self.h;
            let norm = if self.dim == 2 {
                let gy = (values[c.nodes[2]] - values[c.nodes[0]]) / self.h;
                gx.hypot(gy)
            } else {
                gx.abs()
            };
            let term = self.cell_w * norm.powf(self.p) / self.p;
            if !term.is_finite() {
                return Err(Error::EnergyOverflow);
            }
            acc += term;
        }
        Ok(acc)
    }

    /// Exact energy J_p (unsmoothed positive part).
    fn energy_exact(&self, values: &[f64]) -> Result<f64> {
        let mut acc = self.grad_energy(values)?;
        for (k, &id) in self.interior.iter().enumerate() {
            acc += self.lam_w[k] * values[id].max(0.0);
        }
        Ok(acc)
    }

    /// Smoothed energy and its gradient with respect to the interior dofs.
    fn eval_smoothed(&self, values: &[f64], delta: f64, grad: &mut [f64]) -> Result<f64> {
        grad.fill(0.0);
        let mut acc = 0.0;
        for c in &self.cells {
            let a = c.nodes[0];
            let gx = (values[c.nodes[1]] - values[a]) / self.h;
            let gy = if self.dim == 2 { (values[c.nodes[2]] - values[a]) / self.h } else { 0.0 };
            let norm = gx.hypot(gy);
            let term = self.cell_w * norm.powf(self.p) / self.p;
            if !term.is_finite() {
                return Err(Error::EnergyOverflow);
            }
            acc += term;
            if norm > 0.0 {
                // d/dg of |g|^p/p = |g|^{p-2} g; chain through the forward differences
                let w = self.cell_w * norm.powf(self.p - 2.0) / self.h;
                let (dx, dy) = (w * gx, w * gy);
                if let Some(k) = self.dof[c.nodes[1]] {
                    grad[k] += dx;
                }
                if let Some(k) = self.dof[a] {
                    grad[k] -= dx + if self.dim == 2 { dy } else { 0.0 };
                }
                if self.dim == 2 {
                    if let Some(k) = self.dof[c.nodes[2]] {
                        grad[k] += dy;
                    }
                }
            }
        }
        for (k, &id) in self.interior.iter().enumerate() {
            let u = values[id];
            if delta > 0.0 {
                let root = u.hypot(delta);
                acc += self.lam_w[k] * 0.5 * (u + root);
                grad[k] += self.lam_w[k] * 0.5 * (1.0 + u / root);
            } else {
                acc += self.lam_w[k] * u.max(0.0);
                grad[k] += self.lam_w[k] * if u > 0.0 { 1.0 } else { 0.0 };
            }
        }
        Ok(acc)
    }

    /// Gradient of the p-term alone (the smooth part of the exact energy).
    fn grad_pterm(&self, values: &[f64], grad: &mut [f64]) -> Result<f64> {
        let mut acc = 0.0;
        grad.fill(0.0);
        for c in &self.cells {
            let a = c.nodes[0];
            let gx = (values[c.nodes[1]] - values[a]) / self.h;
            let gy = if self.dim == 2 { (values[c.nodes[2]] - values[a]) / self.h } else { 0.0 };
            let norm = gx.hypot(gy);
            let term = self.cell_w * norm.powf(self.p) / self.p;
            if !term.is_finite() {
                return Err(Error::EnergyOverflow);
            }
            acc += term;
            if norm > 0.0 {
                let w = self.cell_w * norm.powf(self.p - 2.0) / self.h;
                let (dx, dy) = (w * gx, w * gy);
                if let Some(k) = self.dof[c.nodes[1]] {
                    grad[k] += dx;
                }
                if let Some(k) = self.dof[a] {
                    grad[k] -= dx + if self.dim == 2 { dy } else { 0.0 };
                }
                if self.dim == 2 {
                    if let Some(k) = self.dof[c.nodes[2]] {
                        grad[k] += dy;
                    }
                }
            }
        }
        Ok(acc)
    }

    /// Sup-norm distance of 0 from the subdifferential of the exact energy.
    fn subgradient_residual(&self, values: &[f64], gp: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, &id) in self.interior.iter().enumerate() {
            let u = values[id];
            let r = if u > 0.0 {
                gp[k] + self.lam_w[k]
            } else if u < 0.0 {
                gp[k]
            } else {
                // subdifferential is gp + [0, λ·h^N]; distance of 0 to it
                let c = (-gp[k]).clamp(0.0, self.lam_w[k]);
                gp[k] + c
            };
            worst = worst.max(r.abs());
        }
        worst
    }

    fn scatter(&self, x: &[f64], values: &mut [f64]) {
        for (k, &id) in self.interior.iter().enumerate() {
            values[id] = x[k];
        }
    }
}

/// Discrete energy J_p of a field obeying the boundary datum on the strip.
pub fn energy(field: &ScalarField, p: f64, lambda0: &Lambda0) -> Result<f64> {
    let model = EnergyModel::build(field.domain(), lambda0, p)?;
    model.energy_exact(field.values())
}

/// Smoothed energy and analytic gradient, exposed for derivative checks.
pub fn smoothed_energy_and_grad(
    field: &ScalarField,
    p: f64,
    lambda0: &Lambda0,
    delta: f64,
) -> Result<(f64, Vec<f64>)> {
    let model = EnergyModel::build(field.domain(), lambda0, p)?;
    let mut grad = vec![0.0; model.interior.len()];
    let f = model.eval_smoothed(field.values(), delta, &mut grad)?;
    Ok((f, grad))
}

/// Minimizes J_p over fields equal to the boundary datum on the strip.
pub fn minimize_jp(spec: &ProblemSpec, options: &PlapOptions) -> Result<(ScalarField, IterationReport)> {
    options.validate()?;
    let grid = spec.build_grid()?;
    minimize_on_grid(&grid, &spec.boundary, &spec.lambda0, options)
}

pub fn minimize_on_grid(
    grid: &Arc<GridDomain>,
    boundary: &BoundaryDatum,
    lambda0: &Lambda0,
    options: &PlapOptions,
) -> Result<(ScalarField, IterationReport)> {
    options.validate()?;
    let start = Instant::now();
    let model = EnergyModel::build(grid, lambda0, options.p)?;
    let delta = options.delta.unwrap_or_else(|| grid.spacing() * grid.spacing());

    // seed with the admissible extension of g; descent keeps J below J(g-extension)
    let seed = extension_field(grid, boundary)?;
    let mut values = seed.values().to_vec();
    let mut x: Vec<f64> = model.interior.iter().map(|&id| values[id]).collect();

    // in 1D the smoothed Hessian is tridiagonal: damped Newton with an exact
    // solve; in 2D fall back to limited-memory quasi-Newton
    let (iters_a, converged, monotone) = if model.dim == 1 {
        newton_1d(&model, &mut x, &mut values, delta, options)?
    } else {
        lbfgs(&model, &mut x, &mut values, delta, options)?
    };

    // truncation at min{0, min_Γ g} never increases J_p (cell difference
    // quotients shrink, the positive part is untouched, strip values stay
    // above the level); it removes the negative dip the smoothing leaves in
    // the dead core, which the diffusive polish would erase only slowly
    let floor = grid
        .strip()
        .iter()
        .map(|&s| values[s])
        .fold(0.0f64, f64::min);
    for v in x.iter_mut() {
        *v = v.max(floor);
    }

    // exact-energy polish: proximal gradient with backtracking
    let mut gp = vec![0.0; x.len()];
    let mut iters_b = 0;
    let mut eta = 1.0;
    let polish_tol = options.tol_grad.max(1e-12);
    model.scatter(&x, &mut values);
    let mut f_smooth = model.grad_pterm(&values, &mut gp)?;
    while iters_b < options.polish_iter {
        if model.subgradient_residual(&values, &gp) <= polish_tol {
            break;
        }
        // backtracked proximal step on the p-term gradient
        let mut accepted = false;
        while eta > 1e-18 {
            let mut xt = vec![0.0; x.len()];
            let mut sq = 0.0;
            let mut lin = 0.0;
            for k in 0..x.len() {
                let v = x[k] - eta * gp[k];
                let t = eta * model.lam_w[k];
                let u = if v >= t {
                    v - t
                } else if v > 0.0 {
                    0.0
                } else {
                    v
                };
                let d = u - x[k];
                sq += d * d;
                lin += gp[k] * d;
                xt[k] = u;
            }
            let mut vt = values.clone();
            model.scatter(&xt, &mut vt);
            let mut gt = vec![0.0; x.len()];
            let ft = model.grad_pterm(&vt, &mut gt)?;
            // descent-lemma acceptance for the smooth part
            if ft <= f_smooth + lin + sq / (2.0 * eta) + 1e-30 {
                x = xt;
                values = vt;
                gp = gt;
                f_smooth = ft;
                accepted = true;
                eta *= 1.4;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            break; // step length exhausted at machine precision
        }
        iters_b += 1;
    }

    let final_residual = model.subgradient_residual(&values, &gp);
    let field = ScalarField::new(Arc::clone(grid), values)?;
    let report = IterationReport {
        iterations: iters_a + iters_b,
        final_residual,
        monotone,
        converged,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((field, report))
}

/// Damped Newton on the smoothed energy for 1D problems, where the Hessian
/// is tridiagonal and one Thomas solve per step is exact. A small ridge
/// keeps the system positive definite where both the p-term (dead core)
/// and the smoothing curvature degenerate. Returns
/// (iterations, converged, descent-monotone).
fn newton_1d(
    model: &EnergyModel,
    x: &mut Vec<f64>,
    values: &mut Vec<f64>,
    delta: f64,
    options: &PlapOptions,
) -> Result<(usize, bool, bool)> {
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut monotone = true;
    let mut iters = 0;
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    model.scatter(x, values);
    let mut f = model.eval_smoothed(values, delta, &mut grad)?;
    while iters < options.max_iter {
        if sup(&grad) <= options.tol_grad {
            return Ok((iters, true, monotone));
        }
        // tridiagonal Hessian: cells couple consecutive dofs in 1D
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for c in &model.cells {
            let (a, b) = (c.nodes[0], c.nodes[1]);
            let g = (values[b] - values[a]) / model.h;
            let w = model.cell_w * (model.p - 1.0) * g.abs().powf(model.p - 2.0)
                / (model.h * model.h);
            let (da, db) = (model.dof[a], model.dof[b]);
            if let Some(k) = da {
                diag[k] += w;
            }
            if let Some(k) = db {
                diag[k] += w;
            }
            if let (Some(k), Some(l)) = (da, db) {
                debug_assert_eq!(l, k + 1);
                upper[k] -= w;
                lower[l] -= w;
            }
        }
        if delta > 0.0 {
            for (k, &id) in model.interior.iter().enumerate() {
                let u = values[id];
                let root = u.hypot(delta);
                diag[k] += model.lam_w[k] * 0.5 * delta * delta / (root * root * root);
            }
        }
        let ridge = 1e-12 * (1.0 + sup(&diag));
        for d in diag.iter_mut() {
            *d += ridge;
        }
        let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        thomas_solve(&lower, &mut diag, &upper, &mut dir);
        let mut slope = dot(&grad, &dir);
        if !slope.is_finite() || slope >= 0.0 {
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &dir);
        }
        // degenerate curvature in the dead core makes raw Newton directions
        // enormous; cap the step length and let the line search pick inside
        let cap = 100.0 * (1.0 + sup(x));
        let dir_sup = sup(&dir);
        if dir_sup > cap {
            let scale = cap / dir_sup;
            dir.iter_mut().for_each(|v| *v *= scale);
            slope *= scale;
        }
        let mut step = 1.0;
        let mut xt = vec![0.0; n];
        let mut gt = vec![0.0; n];
        loop {
            for k in 0..n {
                xt[k] = x[k] + step * dir[k];
            }
            model.scatter(&xt, values);
            match model.eval_smoothed(values, delta, &mut gt) {
                Ok(ft) if ft.is_nan() => {
                    return Err(Error::Numerical("NaN in line search".into()))
                }
                Ok(ft) if ft <= f + options.ls_c1 * step * slope => {
                    if ft > f {
                        monotone = false;
                    }
                    f = ft;
                    break;
                }
                // an overflowing or insufficient trial point: shrink
                Ok(_) | Err(Error::EnergyOverflow) => {}
                Err(e) => return Err(e),
            }
            step *= options.ls_shrink;
            if step < 1e-20 {
                model.scatter(x, values);
                let res = sup(&grad);
                return Ok((iters, res <= options.tol_grad, monotone));
            }
        }
        std::mem::swap(x, &mut xt);
        std::mem::swap(&mut grad, &mut gt);
        iters += 1;
    }
    model.scatter(x, values);
    Ok((iters, sup(&grad) <= options.tol_grad, monotone))
}

/// In-place Thomas algorithm; `diag` and `rhs` are clobbered, the solution
/// lands in `rhs`.
fn thomas_solve(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for k in 1..n {
        let m = lower[k] / diag[k - 1];
        diag[k] -= m * upper[k - 1];
        rhs[k] -= m * rhs[k - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for k in (0..n - 1).rev() {
        rhs[k] = (rhs[k] - upper[k] * rhs[k + 1]) / diag[k];
    }
}

/// L-BFGS with Armijo backtracking on the smoothed energy. Returns
/// (iterations, converged, descent-monotone).
fn lbfgs(
    model: &EnergyModel,
    x: &mut Vec<f64>,
    values: &mut Vec<f64>,
    delta: f64,
    options: &PlapOptions,
) -> Result<(usize, bool, bool)> {
    const MEMORY: usize = 8;
    let n = x.len();
    let mut grad = vec![0.0; n];
    model.scatter(x, values);
    let mut f = model.eval_smoothed(values, delta, &mut grad)?;
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut monotone = true;
    let mut iters = 0;

    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, c| m.max(c.abs()));

    while iters < options.max_iter {
        if sup(&grad) <= options.tol_grad {
            return Ok((iters, true, monotone));
        }
        // two-loop recursion
        let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
        let m = s_hist.len();
        let mut alpha = vec![0.0; m];
        for i in (0..m).rev() {
            let a = rho_hist[i] * dot(&s_hist[i], &d);
            alpha[i] = a;
            axpy(&mut d, -a, &y_hist[i]);
        }
        if m > 0 {
            let i = m - 1;
            let gamma = dot(&s_hist[i], &y_hist[i]) / dot(&y_hist[i], &y_hist[i]);
            if gamma.is_finite() && gamma > 0.0 {
                d.iter_mut().for_each(|v| *v *= gamma);
            }
        }
        for i in 0..m {
            let b = rho_hist[i] * dot(&y_hist[i], &d);
            axpy(&mut d, alpha[i] - b, &s_hist[i]);
        }
        let mut slope = dot(&grad, &d);
        if !(slope < 0.0) {
            // fall back to steepest descent
            d = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &d);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        // Armijo backtracking
        let mut step = 1.0;
        let mut xt = vec![0.0; n];
        let mut gt = vec![0.0; n];
        let ft;
        loop {
            for k in 0..n {
                xt[k] = x[k] + step * d[k];
            }
            model.scatter(&xt, values);
            match model.eval_smoothed(values, delta, &mut gt) {
                Ok(v) if v.is_nan() => {
                    return Err(Error::Numerical("NaN in line search".into()))
                }
                Ok(v) if v <= f + options.ls_c1 * step * slope => {
                    ft = v;
                    break;
                }
                Ok(_) | Err(Error::EnergyOverflow) => {}
                Err(e) => return Err(e),
            }
            step *= options.ls_shrink;
            if step < 1e-20 {
                // stalled at machine precision: accept the current point
                model.scatter(x, values);
                let res = sup(&grad);
                return Ok((iters, res <= options.tol_grad, monotone));
            }
        }
        if ft > f {
            monotone = false;
        }
        let s: Vec<f64> = xt.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(grad.iter()).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm2(&s) * norm2(&y) {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / sy);
            s_hist.push(s);
            y_hist.push(y);
        }
        *x = xt.clone();
        grad = gt.clone();
        f = ft;
        iters += 1;
    }
    model.scatter(x, values);
    Ok((iters, sup(&grad) <= options.tol_grad, monotone))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// One row of a p-sweep: distance to the reference field, Lipschitz
/// seminorm and free-boundary Hausdorff distance to the reference's.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PSweepRow {
    pub p: f64,
    pub sup_dist: f64,
    pub lipschitz: f64,
    pub hausdorff: Option<f64>,
}

#[derive(Debug)]
pub struct PSweep {
    pub rows: Vec<PSweepRow>,
    pub solutions: Vec<ScalarField>,
    pub failures: Vec<(f64, Error)>,
}

/// Solves the problem for each p in `p_list` and measures each solution
/// against `reference` on the same grid. Solver failures are collected, not
/// fatal; the sweep continues.
pub fn p_sweep(
    spec: &ProblemSpec,
    p_list: &[f64],
    reference: &ScalarField,
    base: &PlapOptions,
) -> Result<PSweep> {
    let grid = spec.build_grid()?;
    if !reference.domain().same_layout(&grid) {
        return Err(Error::ShapeMismatch("reference lives on a different grid".into()));
    }
    let tol_pos = 1e-8 * (reference.values().iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0);
    let (_, fb_ref) = analysis::positivity_and_boundary(reference, tol_pos);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut solutions = Vec::new();
    for &p in p_list {
        let mut options = base.clone();
        options.p = p;
        match minimize_on_grid(&grid, &spec.boundary, &spec.lambda0, &options) {
            Ok((u, _report)) => {
                let sup_dist = u.sup_diff_interior(reference)?;
                let lipschitz = u.lipschitz_seminorm();
                let tol_u = 1e-8 * (u.values().iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0);
                let (_, fb_u) = analysis::positivity_and_boundary(&u, tol_u);
                let hausdorff = if fb_u.points.is_empty() || fb_ref.points.is_empty() {
                    None
                } else {
                    Some(analysis::hausdorff(&fb_u.points, &fb_ref.points)?)
                };
                rows.push(PSweepRow { p, sup_dist, lipschitz, hausdorff });
                solutions.push(u);
            }
            Err(e) => failures.push((p, e)),
        }
    }
    Ok(PSweep { rows, solutions, failures })
}
