//! Benchmark cases, run configuration, the simulation loop and output
//! writers.

pub mod cases;
pub mod config;
pub mod output;
pub mod run;

pub use cases::{setup_case, vortex_exact, CaseSetup};
pub use config::{CaseKind, RunConfig};
pub use run::{compute_l2_error, mach_stem_position, run_simulation, vortex_convergence, RunResult};
