//! Scenario configuration, run orchestration and output emission.

pub mod checkpoint;
pub mod config;
pub mod plot;
pub mod profiles;
pub mod scenario;

pub use checkpoint::{checkpoint_load, checkpoint_save};
pub use config::{parse_config, Mode, ScenarioConfig};
pub use scenario::{run_scenario, verify_all, RunSummary};
