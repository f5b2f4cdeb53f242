//! Open-cell hepatocyte calcium model and its slow–fast analysis.
//!
//! The model tracks cytosolic calcium `c`, total calcium `c_t` and IPR
//! activation `h`. Beside the vector field itself the crate provides the
//! small-parameter identification, the critical manifolds of the two scaling
//! regimes (R1 near `c = O(1)`, R2 near `c = O(K_τ)`), and numerical
//! experiments on the full system (return maps, spike decomposition,
//! bifurcation scans).
//!
//! Everything numeric is generic over [`Real`]; the `f64` aliases below are
//! what most callers want.

pub mod error;
pub mod hill;
pub mod integrate;
pub mod layer;
pub mod linalg;
pub mod model;
pub mod orbit;
pub mod params;
pub mod r1;
pub mod r2;
pub mod roots;
pub mod scalar;
pub mod scaling;
pub mod state;
pub mod system;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ParameterSet = params::ParameterSet<f64>;
pub type DimensionlessParameterSet = params::DimensionlessParameterSet<f64>;
pub type State = state::State<f64>;
pub type RescaledState = state::RescaledState<f64>;
pub type FluxValues = model::FluxValues<f64>;
pub type Trajectory = integrate::Trajectory<f64, 3>;
pub type OrbitSummary = integrate::OrbitSummary<f64>;
pub type IntegratorConfig = integrate::IntegratorConfig<f64>;
