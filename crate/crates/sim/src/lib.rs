//! Scenario files, seeded sweeps, CSV/SVG output and the `gewi` command line
//! built on `gewi-core`.

pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod sweep;

pub use config::{load_config, parse_config, ScenarioConfig, ScenarioKind};
pub use error::{Result, SimError};
pub use output::emit_outputs;
pub use sweep::{run_sweep, SweepResults};
