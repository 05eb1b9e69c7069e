//! Lattice solvers for the limiting free boundary problem with gradient
//! constraint
//!
//! ```text
//! max{ −Δ∞ u, χ_{u>0} − |∇u| } = 0   in Ω,    u = g   on ∂Ω,
//! ```
//!
//! the p → ∞ limit of the dead-core family −Δ_p u + λ₀ χ_{u>0} = 0. The same
//! solution is computed four independent ways and cross-validated:
//!
//! 1. [`dpp`] — value iteration for the Pay-or-Leave Tug-of-War dynamic
//!    programming principle on an ε-ball lattice;
//! 2. [`plap`] — direct minimization of the p-Laplacian energy with p → ∞
//!    sweeps;
//! 3. [`game`] — seeded Monte-Carlo simulation of the game itself;
//! 4. [`patch`] — the patched-function uniqueness construction
//!    (infinity-harmonic extension, cone envelope on {|∇𝔥| < 1},
//!    infinity-harmonic fill of the negative set).
//!
//! [`analysis`] measures free-boundary geometry (non-degeneracy, density,
//! porosity, growth envelopes, Hausdorff distances) and [`oracles`] holds
//! the closed-form reference solutions the test suites check against.

pub mod analysis;
pub mod domain;
pub mod dpp;
pub mod error;
pub mod field;
pub mod game;
pub mod io;
pub mod oracles;
pub mod patch;
pub mod plap;
pub mod rng;

pub use domain::{GridDomain, NodeId, NodeKind, Shape};
pub use error::{Error, Result};
pub use field::{
    extension_field, sample_field, strip_lipschitz, BoundaryDatum, Lambda0, ProblemSpec,
    ScalarField,
};
