//! Subcommand implementations. Every command writes its fields (CSV, plus
//! PGM for 2D) and a JSON report embedding the fully resolved configuration
//! into the output directory. With `--timings` off, wall times in persisted
//! reports are zeroed so reruns with the same config and seed are
//! byte-identical.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use deadcore::analysis::{analyze, AnalysisParams};
use deadcore::domain::GridDomain;
use deadcore::dpp::{epsilon_study, value_iterate, IterationReport, OperatorKind};
use deadcore::error::{Error, Result};
use deadcore::field::{sample_field, ProblemSpec, ScalarField};
use deadcore::game::{estimate_value, GameConfig};
use deadcore::io::{save_field_csv, save_field_pgm, write_episodes_jsonl, write_points_csv};
use deadcore::patch::run_pipeline;
use deadcore::plap::{minimize_on_grid, p_sweep, PlapOptions};

use crate::config::{AnalyzeConfig, GameBlock, OracleConfig, RunConfig};

pub struct Context {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
    pub timings: bool,
}

impl Context {
    fn scrub(&self, mut report: IterationReport) -> IterationReport {
        if !self.timings {
            report.wall_time_s = 0.0;
        }
        report
    }

    fn write_report<T: Serialize>(&self, name: &str, body: &T) -> Result<()> {
        let value = json!({ "config": &self.config, "result": body });
        let text = serde_json::to_string_pretty(&value)
            .map_err(|e| Error::Parse(format!("report serialization: {e}")))?;
        std::fs::write(self.out_dir.join(name), text + "\n")?;
        Ok(())
    }

    fn write_field(&self, name: &str, field: &ScalarField) -> Result<()> {
        save_field_csv(field, &self.out_dir.join(format!("{name}.csv")))?;
        if field.domain().dim() == 2 {
            save_field_pgm(field, &self.out_dir.join(format!("{name}.pgm")))?;
        }
        Ok(())
    }

    fn realize(&self) -> Result<(Arc<GridDomain>, ProblemSpec)> {
        self.config.problem.realize(&self.base_dir)
    }

    fn solve_dpp_field(
        &self,
        grid: &Arc<GridDomain>,
        spec: &ProblemSpec,
    ) -> Result<(ScalarField, IterationReport, OperatorKind)> {
        let dpp = self.config.require_dpp();
        let boundary = spec.boundary_field(grid)?;
        let (u, report) = value_iterate(&boundary, dpp.operator, dpp.tol, dpp.max_iter);
        Ok((u, report, dpp.operator))
    }
}

pub fn solve_dpp(ctx: &Context) -> Result<()> {
    let (grid, spec) = ctx.realize()?;
    let (u, report, operator) = ctx.solve_dpp_field(&grid, &spec)?;
    ctx.write_field("u_eps", &u)?;
    ctx.write_report(
        "report.json",
        &json!({ "operator": operator, "iteration": ctx.scrub(report) }),
    )
}

pub fn solve_plap(ctx: &Context) -> Result<()> {
    let (grid, spec) = ctx.realize()?;
    let plap = ctx.config.require_plap()?;
    if plap.p_list.is_empty() {
        return Err(Error::Config("config key `plap.p_list` must be nonempty".into()));
    }
    let mut entries = Vec::new();
    for &p in &plap.p_list {
        let mut options = PlapOptions::new(p);
        options.delta = plap.delta;
        options.tol_grad = plap.tol_grad;
        options.max_iter = plap.max_iter;
        let (u, report) = minimize_on_grid(&grid, &spec.boundary, &spec.lambda0, &options)?;
        ctx.write_field(&format!("u_p{p}"), &u)?;
        entries.push(json!({ "p": p, "iteration": ctx.scrub(report) }));
    }
    ctx.write_report("report.json", &entries)
}

pub fn simulate(ctx: &Context) -> Result<()> {
    let (grid, spec) = ctx.realize()?;
    let game = ctx.config.require_game()?;
    let (u, dpp_report, _) = ctx.solve_dpp_field(&grid, &spec)?;
    let config = game_config(&grid, game)?;
    let (estimate, records) = estimate_value(&config, &u)?;
    let logged = records.len().min(game.log_episodes);
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(ctx.out_dir.join("episodes.jsonl"))?,
    );
    write_episodes_jsonl(&records[..logged], &mut out)?;
    ctx.write_field("u_eps", &u)?;
    ctx.write_report(
        "report.json",
        &json!({
            "estimate": estimate,
            "value_at_start": u.get(config.start_node),
            "dpp_iteration": ctx.scrub(dpp_report),
            "episodes_logged": logged,
        }),
    )
}

fn game_config(grid: &Arc<GridDomain>, game: &GameBlock) -> Result<GameConfig> {
    if game.start.len() != grid.dim() {
        return Err(Error::Config(format!(
            "config key `game.start`: {} coordinates for a {}D problem",
            game.start.len(),
            grid.dim()
        )));
    }
    let h = grid.spacing();
    let i = (game.start[0] / h).round() as i64;
    let j = if grid.dim() == 2 { (game.start[1] / h).round() as i64 } else { 0 };
    let node = grid
        .node_at([i, j])
        .filter(|&n| grid.is_interior(n))
        .ok_or_else(|| {
            Error::Config(format!(
                "config key `game.start`: {:?} is not an interior lattice node",
                game.start
            ))
        })?;
    let mut config = GameConfig::new(node, game.episodes, game.seed);
    config.max_steps = game.max_steps;
    config.strategy = game.strategy;
    Ok(config)
}

pub fn patch(ctx: &Context) -> Result<()> {
    let (grid, spec) = ctx.realize()?;
    let theta_tol = ctx.config.patch.clone().unwrap_or_default().theta_tol;
    let dpp = ctx.config.require_dpp();
    let boundary = spec.boundary_field(&grid)?;
    let (u_dpp, dpp_report) =
        value_iterate(&boundary, OperatorKind::PayOrLeave, dpp.tol, dpp.max_iter);
    let result = run_pipeline(&grid, &spec.boundary, theta_tol, dpp.tol, dpp.max_iter, Some(&u_dpp))?;
    for (name, field) in [
        ("h", &result.h),
        ("lip", &result.lip),
        ("z", &result.z),
        ("w", &result.w),
        ("v", &result.v),
        ("u_dpp", &u_dpp),
    ] {
        ctx.write_field(name, field)?;
    }
    ctx.write_report(
        "report.json",
        &json!({ "summary": result.summary(), "dpp_iteration": ctx.scrub(dpp_report) }),
    )
}

pub fn analyze_cmd(ctx: &Context) -> Result<()> {
    let (grid, spec) = ctx.realize()?;
    let block: &AnalyzeConfig = ctx.config.require_analyze()?;
    let field = match &block.field_csv {
        Some(path) => deadcore::io::load_field_csv(&grid, &ctx.base_dir.join(path))?,
        None => ctx.solve_dpp_field(&grid, &spec)?.0,
    };
    let reference_points = oracle_boundary_points(&ctx.config.oracle, &field);
    let params = AnalysisParams {
        radii: &block.radii,
        rho: block.rho,
        tol_pos: block.tol_pos,
        exponent: block.exponent,
        reference_fb: reference_points.as_deref(),
    };
    let report = analyze(&field, &params)?;
    let tol_pos = report.tol_pos;
    let (_, fb) = deadcore::analysis::positivity_and_boundary(&field, tol_pos);
    let mut out =
        std::io::BufWriter::new(std::fs::File::create(ctx.out_dir.join("fb_points.csv"))?);
    write_points_csv(&fb.points, grid.dim(), &mut out)?;
    ctx.write_field("field", &field)?;
    ctx.write_report("report.json", &report)
}

/// Free boundary of the configured oracle, sampled on the field's grid.
fn oracle_boundary_points(
    oracle: &Option<OracleConfig>,
    field: &ScalarField,
) -> Option<Vec<[f64; 2]>> {
    let oracle = oracle.as_ref()?;
    let grid = field.domain();
    let sampled = ScalarField::from_fn(Arc::clone(grid), |p| oracle.eval(p).unwrap_or(0.0)).ok()?;
    let (_, fb) = deadcore::analysis::positivity_and_boundary(&sampled, 1e-12);
    if fb.points.is_empty() {
        None
    } else {
        Some(fb.points)
    }
}

pub fn compare(ctx: &Context) -> Result<()> {
    let (grid, spec) = ctx.realize()?;
    let dpp = ctx.config.require_dpp();
    let boundary = spec.boundary_field(&grid)?;
    let (u_dpp, dpp_report) =
        value_iterate(&boundary, OperatorKind::PayOrLeave, dpp.tol, dpp.max_iter);
    ctx.write_field("u_dpp", &u_dpp)?;
    let mut rows: Vec<(String, f64)> = Vec::new();

    let sup_to_oracle = |field: &ScalarField, oracle: &OracleConfig| -> Result<f64> {
        let grid = field.domain();
        let mut sup: f64 = 0.0;
        for &id in grid.interior() {
            sup = sup.max((field.get(id) - oracle.eval(grid.coords(id))?).abs());
        }
        Ok(sup)
    };

    if let Some(oracle) = &ctx.config.oracle {
        rows.push(("dpp_vs_oracle".into(), sup_to_oracle(&u_dpp, oracle)?));
    }

    if let Some(plap) = &ctx.config.plap {
        if let Some(&p) = plap.p_list.last() {
            let mut options = PlapOptions::new(p);
            options.delta = plap.delta;
            options.tol_grad = plap.tol_grad;
            options.max_iter = plap.max_iter;
            let (u_p, _) = minimize_on_grid(&grid, &spec.boundary, &spec.lambda0, &options)?;
            ctx.write_field(&format!("u_p{p}"), &u_p)?;
            if let Some(oracle) = &ctx.config.oracle {
                rows.push((format!("plap_p{p}_vs_oracle"), sup_to_oracle(&u_p, oracle)?));
            }
            rows.push((format!("plap_p{p}_vs_dpp"), u_p.sup_diff_interior(&u_dpp)?));
        }
    }

    let theta_tol = ctx.config.patch.clone().unwrap_or_default().theta_tol;
    let result = run_pipeline(&grid, &spec.boundary, theta_tol, dpp.tol, dpp.max_iter, Some(&u_dpp))?;
    ctx.write_field("v_patch", &result.v)?;
    rows.push(("patch_vs_dpp".into(), result.sup_diff_vs_dpp.unwrap()));

    if let Some(game) = &ctx.config.game {
        let config = game_config(&grid, game)?;
        let (estimate, _) = estimate_value(&config, &u_dpp)?;
        rows.push(("game_vs_dpp_at_start".into(), (estimate.mean - u_dpp.get(config.start_node)).abs()));
        rows.push(("game_stderr".into(), estimate.stderr));
    }

    let mut csv = String::from("quantity,value\n");
    for (name, value) in &rows {
        csv.push_str(&format!("{name},{}\n", deadcore::io::fmt_g17(*value)));
    }
    std::fs::write(ctx.out_dir.join("discrepancies.csv"), csv)?;
    let table: Vec<_> = rows.iter().map(|(k, v)| json!({ "quantity": k, "value": v })).collect();
    ctx.write_report(
        "report.json",
        &json!({ "discrepancies": table, "dpp_iteration": ctx.scrub(dpp_report) }),
    )
}

pub fn sweep_eps(ctx: &Context) -> Result<()> {
    let (_, spec) = ctx.realize()?;
    let eps_list = ctx.config.require_eps_list()?;
    let dpp = ctx.config.require_dpp();
    if matches!(spec.boundary, deadcore::field::BoundaryDatum::Table(_)) {
        return Err(Error::Config(
            "config key `eps_list`: table boundary data cannot be resampled across lattices"
                .into(),
        ));
    }
    let oracle = ctx.config.oracle.clone();
    let reference = oracle.map(|o| move |p: [f64; 2]| o.eval(p).unwrap_or(f64::NAN));
    let study = epsilon_study(
        &spec,
        eps_list,
        dpp.operator,
        dpp.tol,
        dpp.max_iter,
        reference.as_ref().map(|f| f as &dyn Fn([f64; 2]) -> f64),
    )?;
    let mut csv = String::from("eps_i,eps_j,sup_distance\n");
    for (i, &ei) in study.eps.iter().enumerate() {
        for (j, &ej) in study.eps.iter().enumerate() {
            csv.push_str(&format!("{ei},{ej},{}\n", deadcore::io::fmt_g17(study.pairwise[i][j])));
        }
    }
    std::fs::write(ctx.out_dir.join("eps_study.csv"), csv)?;
    let scrubbed: Vec<IterationReport> =
        study.reports.iter().cloned().map(|r| ctx.scrub(r)).collect();
    ctx.write_report(
        "report.json",
        &json!({
            "eps": study.eps,
            "pairwise": study.pairwise,
            "vs_reference": study.vs_reference,
            "iterations": scrubbed,
        }),
    )
}

pub fn sweep_p(ctx: &Context) -> Result<()> {
    let (grid, spec) = ctx.realize()?;
    let plap = ctx.config.require_plap()?;
    // reference: the configured oracle, or the DPP limit solution
    let reference = match &ctx.config.oracle {
        Some(oracle) => {
            let o = oracle.clone();
            ScalarField::from_fn(Arc::clone(&grid), move |p| o.eval(p).unwrap_or(0.0))?
        }
        None => ctx.solve_dpp_field(&grid, &spec)?.0,
    };
    let mut base = PlapOptions::new(2.0);
    base.delta = plap.delta;
    base.tol_grad = plap.tol_grad;
    base.max_iter = plap.max_iter;
    let sweep = p_sweep(&spec, &plap.p_list, &reference, &base)?;
    if let Some((p, err)) = sweep.failures.first() {
        return Err(Error::Numerical(format!("p = {p}: {err}")));
    }
    let mut csv = String::from("p,sup_dist,lipschitz,hausdorff\n");
    for row in &sweep.rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.p,
            deadcore::io::fmt_g17(row.sup_dist),
            deadcore::io::fmt_g17(row.lipschitz),
            row.hausdorff.map(deadcore::io::fmt_g17).unwrap_or_default()
        ));
    }
    std::fs::write(ctx.out_dir.join("sweep_p.csv"), csv)?;
    for (row, u) in sweep.rows.iter().zip(&sweep.solutions) {
        ctx.write_field(&format!("u_p{}", row.p), u)?;
    }
    ctx.write_field("reference", &reference)?;
    ctx.write_report("report.json", &sweep.rows)
}

/// Shared smoke check used by `main`: the boundary datum must sample cleanly
/// before any command runs (table data in particular).
pub fn preflight(ctx: &Context) -> Result<()> {
    let (grid, spec) = ctx.realize()?;
    sample_field(&grid, &spec.boundary)?;
    std::fs::create_dir_all(&ctx.out_dir)?;
    Ok(())
}

pub fn out_dir_for(config: &RunConfig, cli_out: Option<&Path>) -> PathBuf {
    if let Some(p) = cli_out {
        return p.to_path_buf();
    }
    if let Ok(env) = std::env::var("DEADCORE_OUTPUT") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    config.output_dir.clone()
}
