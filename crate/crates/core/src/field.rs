//! Scalar fields on a lattice domain, boundary data and problem descriptions.

use std::collections::HashMap;
use std::sync::Arc;

use crate::domain::{dist, GridDomain, NodeId, NodeKind, Shape};
use crate::error::{Error, Result};

/// Real values on every node (interior ∪ strip) of a [`GridDomain`].
#[derive(Debug, Clone)]
pub struct ScalarField {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(domain: Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.node_count() {
            return Err(Error::ShapeMismatch(format!(
                "field has {} values for {} nodes",
                values.len(),
                domain.node_count()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite field value {v}")));
        }
        Ok(ScalarField { domain, values })
    }

    pub fn constant(domain: Arc<GridDomain>, c: f64) -> Self {
        let n = domain.node_count();
        ScalarField { domain, values: vec![c; n] }
    }

    /// Pointwise evaluation of `f` at every node coordinate.
    pub fn from_fn(domain: Arc<GridDomain>, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..domain.node_count()).map(|i| f(domain.coords(i))).collect();
        ScalarField::new(domain, values)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, id: NodeId) -> f64 {
        self.values[id]
    }

    pub fn set(&mut self, id: NodeId, v: f64) {
        self.values[id] = v;
    }

    pub fn same_domain(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.domain, &other.domain) || self.domain.same_layout(&other.domain)
    }

    /// Sup-norm difference over interior nodes.
    pub fn sup_diff_interior(&self, other: &ScalarField) -> Result<f64> {
        if !self.same_domain(other) {
            return Err(Error::ShapeMismatch("fields live on different grids".into()));
        }
        Ok(self
            .domain
            .interior()
            .iter()
            .map(|&i| (self.values[i] - other.values[i]).abs())
            .fold(0.0, f64::max))
    }

    /// Max |u(y) − u(x)| / |y − x| over ε-ball neighbor pairs; 0 without pairs.
    pub fn lipschitz_seminorm(&self) -> f64 {
        let grid = &self.domain;
        let mut lip: f64 = 0.0;
        for &x in grid.interior() {
            let px = grid.coords(x);
            let ux = self.values[x];
            for &y in grid.neighbors_unchecked(x) {
                if y == x {
                    continue;
                }
                lip = lip.max((self.values[y] - ux).abs() / dist(grid.coords(y), px));
            }
        }
        lip
    }
}

/// Named boundary datum g (the terminal payoff F of the game).
///
/// `Radial` prescribes the constant κ on the strip and leaves the interior at
/// zero; `Table` is keyed by lattice coordinates and must cover every strip
/// node, interior entries optional (zero where absent).
#[derive(Debug, Clone)]
pub enum BoundaryDatum {
    Constant(f64),
    Affine { gradient: [f64; 2], offset: f64 },
    Radial { kappa: f64 },
    Table(HashMap<(i64, i64), f64>),
}

impl BoundaryDatum {
    /// Table datum covering every strip node with `f` evaluated at its
    /// coordinates (the way two-sided interval data like F(−1)=1, F(4)=−1
    /// extend to a strip wider than one spacing).
    pub fn table_from_fn(grid: &GridDomain, f: impl Fn([f64; 2]) -> f64) -> Self {
        let mut map = HashMap::new();
        for &id in grid.strip() {
            let [i, j] = grid.lattice_coords(id);
            map.insert((i, j), f(grid.coords(id)));
        }
        BoundaryDatum::Table(map)
    }

    fn eval(&self, grid: &GridDomain, id: NodeId) -> Result<f64> {
        Ok(match self {
            BoundaryDatum::Constant(c) => *c,
            BoundaryDatum::Affine { gradient, offset } => {
                let p = grid.coords(id);
                gradient[0] * p[0] + gradient[1] * p[1] + offset
            }
            BoundaryDatum::Radial { kappa } => match grid.kind(id) {
                NodeKind::Strip => *kappa,
                NodeKind::Interior => 0.0,
            },
            BoundaryDatum::Table(map) => {
                let [i, j] = grid.lattice_coords(id);
                match map.get(&(i, j)) {
                    Some(v) => *v,
                    None if grid.kind(id) == NodeKind::Strip => {
                        return Err(Error::Ingestion(format!(
                            "table datum misses strip node at {:?}",
                            grid.coords(id)
                        )))
                    }
                    None => 0.0,
                }
            }
        })
    }
}

/// Pointwise evaluation of a datum on all nodes of the grid.
pub fn sample_field(domain: &Arc<GridDomain>, datum: &BoundaryDatum) -> Result<ScalarField> {
    let mut values = Vec::with_capacity(domain.node_count());
    for id in 0..domain.node_count() {
        values.push(datum.eval(domain, id)?);
    }
    ScalarField::new(Arc::clone(domain), values)
}

/// Admissible extension of g to the whole grid, used as minimizer seed and
/// as the test competitor in energy comparisons. Constant and affine data
/// extend by their own formula, the radial datum by its constant, a table by
/// its entries with the strip mean filling interior gaps.
pub fn extension_field(domain: &Arc<GridDomain>, datum: &BoundaryDatum) -> Result<ScalarField> {
    match datum {
        BoundaryDatum::Constant(c) => Ok(ScalarField::constant(Arc::clone(domain), *c)),
        BoundaryDatum::Affine { .. } => sample_field(domain, datum),
        BoundaryDatum::Radial { kappa } => Ok(ScalarField::constant(Arc::clone(domain), *kappa)),
        BoundaryDatum::Table(map) => {
            let mut sum = 0.0;
            for &id in domain.strip() {
                let [i, j] = domain.lattice_coords(id);
                sum += map.get(&(i, j)).copied().ok_or_else(|| {
                    Error::Ingestion(format!(
                        "table datum misses strip node at {:?}",
                        domain.coords(id)
                    ))
                })?;
            }
            let mean = sum / domain.strip().len() as f64;
            let mut values = vec![mean; domain.node_count()];
            for id in 0..domain.node_count() {
                let [i, j] = domain.lattice_coords(id);
                if let Some(v) = map.get(&(i, j)) {
                    values[id] = *v;
                }
            }
            ScalarField::new(Arc::clone(domain), values)
        }
    }
}

/// Discrete Lipschitz constant of the strip values, brute force over pairs.
pub fn strip_lipschitz(field: &ScalarField) -> f64 {
    let grid = field.domain();
    let strip = grid.strip();
    let mut lip: f64 = 0.0;
    for (a, &x) in strip.iter().enumerate() {
        for &y in &strip[a + 1..] {
            let d = dist(grid.coords(x), grid.coords(y));
            if d > 0.0 {
                lip = lip.max((field.get(x) - field.get(y)).abs() / d);
            }
        }
    }
    lip
}

/// Coefficient λ₀, constant or per node, bounded away from zero.
#[derive(Debug, Clone)]
pub enum Lambda0 {
    Constant(f64),
    PerNode(Vec<f64>),
}

impl Lambda0 {
    pub fn at(&self, id: NodeId) -> f64 {
        match self {
            Lambda0::Constant(c) => *c,
            Lambda0::PerNode(v) => v[id],
        }
    }

    pub fn min_value(&self) -> f64 {
        match self {
            Lambda0::Constant(c) => *c,
            Lambda0::PerNode(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn validate(&self, domain: &GridDomain) -> Result<()> {
        match self {
            Lambda0::Constant(c) => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(Error::Config(format!("lambda0 must be positive, got {c}")));
                }
            }
            Lambda0::PerNode(v) => {
                if v.len() != domain.node_count() {
                    return Err(Error::ShapeMismatch(format!(
                        "lambda0 has {} values for {} nodes",
                        v.len(),
                        domain.node_count()
                    )));
                }
                if v.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                    return Err(Error::Config("lambda0 must be positive everywhere".into()));
                }
            }
        }
        Ok(())
    }
}

/// Full description of one problem instance: geometry, lattice parameters,
/// boundary datum, λ₀ and (for the p-Laplacian route) the exponent p.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub shape: Shape,
    pub h: f64,
    pub epsilon: f64,
    pub boundary: BoundaryDatum,
    pub lambda0: Lambda0,
    pub p: Option<f64>,
}

impl ProblemSpec {
    pub fn build_grid(&self) -> Result<Arc<GridDomain>> {
        let grid = GridDomain::build(self.shape, self.h, self.epsilon)?;
        self.lambda0.validate(&grid)?;
        if let Some(p) = self.p {
            if !(2.0..=128.0).contains(&p) {
                return Err(Error::Config(format!("p must lie in [2, 128], got {p}")));
            }
        }
        Ok(grid)
    }

    /// Boundary datum sampled on the grid (strip carries g, interior the
    /// datum's default).
    pub fn boundary_field(&self, grid: &Arc<GridDomain>) -> Result<ScalarField> {
        sample_field(grid, &self.boundary)
    }
}
