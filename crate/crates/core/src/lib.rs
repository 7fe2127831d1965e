//! Morphogenesis by local token exchange on a periodic hexagonal lattice.
//!
//! Active cells ("modules") exchange aging tokens only with active
//! neighbours. The label profile of the tokens a cell accumulates yields a
//! potential that decides whether the cell dies and whether a boundary cell
//! grows into the empty space next to it.

pub mod config;
pub mod error;
pub mod io;
pub mod lattice;
pub mod metrics;
pub mod morph;
pub mod params;
pub mod regions;
pub mod rng;
pub mod scenario;
pub mod steer;
pub mod tokens;

pub use error::{Error, Result};
pub use lattice::{init_disk, CellCoord, CellState, Lattice};
pub use metrics::{compute_metrics, MetricsRecord};
pub use morph::{SimState, Simulation};
pub use params::{DeathScope, GrowthScope, ModelParams, MorphParams, PropagationParams};
