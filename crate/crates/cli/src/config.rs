//! JSON run configuration: the problem block plus one block per subcommand.
//! Unknown blocks are tolerated (the `compare` command reads several); a
//! missing required block is a configuration error naming the key.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use deadcore::domain::{GridDomain, Shape};
use deadcore::dpp::OperatorKind;
use deadcore::error::{Error, Result};
use deadcore::field::{BoundaryDatum, Lambda0, ProblemSpec};
use deadcore::game::StrategyKind;
use deadcore::io::read_table_csv;
use deadcore::oracles::{dead_core_profile, gradient_constraint_1d, limit_radial_profile, RadialSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dpp: Option<DppConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plap: Option<PlapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch: Option<PatchConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analyze: Option<AnalyzeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub shape: Shape,
    pub h: f64,
    pub epsilon: f64,
    pub boundary: DatumConfig,
    pub lambda0: Lambda0Config,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatumConfig {
    Constant { value: f64 },
    Affine { gradient: [f64; 2], offset: f64 },
    Radial { kappa: f64 },
    /// CSV rows `x[,y],value`; every strip node must be covered, rows not
    /// matching a lattice node are ignored.
    Table { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lambda0Config {
    Constant(f64),
    /// Field CSV in node order, as written by the exporters.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DppConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_operator")]
    pub operator: OperatorKind,
}

impl Default for DppConfig {
    fn default() -> Self {
        DppConfig { tol: default_tol(), max_iter: default_max_iter(), operator: default_operator() }
    }
}

fn default_tol() -> f64 {
    1e-9
}

fn default_max_iter() -> usize {
    1_000_000
}

fn default_operator() -> OperatorKind {
    OperatorKind::PayOrLeave
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlapConfig {
    pub p_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "default_tol_grad")]
    pub tol_grad: f64,
    #[serde(default = "default_plap_iter")]
    pub max_iter: usize,
}

fn default_tol_grad() -> f64 {
    1e-8
}

fn default_plap_iter() -> usize {
    100_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameBlock {
    pub episodes: usize,
    pub seed: u64,
    /// Start coordinates; must land on an interior lattice node.
    pub start: Vec<f64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub strategy: StrategyKind,
    /// Number of episode records written to episodes.jsonl.
    #[serde(default = "default_log_episodes")]
    pub log_episodes: usize,
}

fn default_max_steps() -> usize {
    1_000_000
}

fn default_log_episodes() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct PatchConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzeConfig {
    pub radii: Vec<f64>,
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_pos: Option<f64>,
    /// Exponent in the non-degeneracy ratio (1 for limit solutions).
    #[serde(default = "default_exponent")]
    pub exponent: f64,
    /// Analyze this field CSV instead of solving the DPP first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_csv: Option<PathBuf>,
}

fn default_exponent() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OracleConfig {
    #[serde(rename = "gradient-constraint-1d")]
    GradientConstraint1d,
    LimitRadial { radius: f64, kappa: f64 },
    DeadCore { dim: u32, radius: f64, kappa: f64, lambda0: f64, p: f64 },
}

impl OracleConfig {
    /// Closed-form reference evaluated at interior node coordinates.
    pub fn eval(&self, p: [f64; 2]) -> Result<f64> {
        match *self {
            OracleConfig::GradientConstraint1d => gradient_constraint_1d(p[0]),
            OracleConfig::LimitRadial { radius, kappa } => {
                Ok(limit_radial_profile(radius, kappa, p))
            }
            OracleConfig::DeadCore { dim, radius, kappa, lambda0, p: exp } => {
                dead_core_profile(&RadialSpec { dim, radius, kappa, lambda0, p: exp }, p)
            }
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }

    pub fn require_dpp(&self) -> DppConfig {
        self.dpp.clone().unwrap_or_default()
    }

    pub fn require_plap(&self) -> Result<&PlapConfig> {
        self.plap
            .as_ref()
            .ok_or_else(|| Error::Config("missing required config block `plap`".into()))
    }

    pub fn require_game(&self) -> Result<&GameBlock> {
        self.game
            .as_ref()
            .ok_or_else(|| Error::Config("missing required config block `game`".into()))
    }

    pub fn require_analyze(&self) -> Result<&AnalyzeConfig> {
        self.analyze
            .as_ref()
            .ok_or_else(|| Error::Config("missing required config block `analyze`".into()))
    }

    pub fn require_eps_list(&self) -> Result<&[f64]> {
        self.eps_list
            .as_deref()
            .ok_or_else(|| Error::Config("missing required config key `eps_list`".into()))
    }
}

impl ProblemConfig {
    /// Builds the grid and resolves boundary/λ₀ data against it.
    pub fn realize(&self, base_dir: &Path) -> Result<(Arc<GridDomain>, ProblemSpec)> {
        let grid = GridDomain::build(self.shape, self.h, self.epsilon)?;
        let boundary = self.boundary.realize(&grid, base_dir)?;
        let lambda0 = match &self.lambda0 {
            Lambda0Config::Constant(c) => Lambda0::Constant(*c),
            Lambda0Config::Csv { path } => {
                let field = deadcore::io::load_field_csv(&grid, &base_dir.join(path))?;
                Lambda0::PerNode(field.values().to_vec())
            }
        };
        let spec = ProblemSpec {
            shape: self.shape,
            h: grid.spacing(),
            epsilon: grid.epsilon(),
            boundary,
            lambda0,
            p: self.p,
        };
        spec.lambda0.validate(&grid)?;
        if let Some(p) = spec.p {
            if !(2.0..=128.0).contains(&p) {
                return Err(Error::Config(format!("config key `p`: {p} outside [2, 128]")));
            }
        }
        Ok((grid, spec))
    }
}

impl DatumConfig {
    pub fn realize(&self, grid: &Arc<GridDomain>, base_dir: &Path) -> Result<BoundaryDatum> {
        Ok(match self {
            DatumConfig::Constant { value } => BoundaryDatum::Constant(*value),
            DatumConfig::Affine { gradient, offset } => {
                BoundaryDatum::Affine { gradient: *gradient, offset: *offset }
            }
            DatumConfig::Radial { kappa } => BoundaryDatum::Radial { kappa: *kappa },
            DatumConfig::Table { path } => {
                let file = std::fs::File::open(base_dir.join(path))?;
                let rows = read_table_csv(std::io::BufReader::new(file))?;
                let h = grid.spacing();
                let mut map = std::collections::HashMap::new();
                for (coords, value) in rows {
                    if coords.len() != grid.dim() {
                        return Err(Error::Ingestion(format!(
                            "table {} row has {} coordinates for a {}D grid",
                            path.display(),
                            coords.len(),
                            grid.dim()
                        )));
                    }
                    let i = (coords[0] / h).round() as i64;
                    let j = if grid.dim() == 2 { (coords[1] / h).round() as i64 } else { 0 };
                    // rows that do not land on a node of this grid are ignored
                    if let Some(id) = grid.node_at([i, j]) {
                        let q = grid.coords(id);
                        let near = (q[0] - coords[0]).abs() <= 1e-9 * h
                            && (grid.dim() == 1 || (q[1] - coords[1]).abs() <= 1e-9 * h);
                        if near {
                            map.insert((i, j), value);
                        }
                    }
                }
                BoundaryDatum::Table(map)
            }
        })
    }
}
