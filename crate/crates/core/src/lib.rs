//! Post-disaster cyber-physical restoration scheduling.
//!
//! Repair-crew routing, operating-crew switch operations, remote switching
//! over a D2D cyber network and microgrid operation are co-optimized in a
//! two-stage robust MILP against budgeted renewable-output uncertainty, and
//! solved by column-and-constraint generation.

pub mod assemble;
pub mod backend;
pub mod ccg;
pub mod cells;
pub mod crew;
pub mod cyber;
pub mod decision;
pub mod error;
pub mod grid;
pub mod instance;
pub mod model;
pub mod travel;
pub mod uncertainty;

pub use assemble::{assemble_compact, CompactModel};
pub use backend::{HighsBackend, SolveParams, SolverBackend};
pub use ccg::{ccg_solve, CcgParams, SolveReport};
pub use decision::FirstStageDecision;
pub use error::{InstanceError, SolveError};
pub use instance::Instance;
pub use uncertainty::{materialize_uncertainty, ScenarioRealization};
