//! Simulator of an autonomous ocean profiler: a diving buoy that moves
//! vertically by changing the volume of a buoyancy chamber, under a two-loop
//! controller that slows the dive to a measuring speed inside density
//! gradients and returns to a cruising speed outside them.

pub mod config;
pub mod control;
pub mod dynamics;
pub mod environment;
pub mod error;
pub mod numerics;
pub mod scenario;
pub mod sensing;
pub mod trace;

pub use config::{parse_config, parse_config_with_overrides, resolved_toml, ConfigError};
pub use control::{Mode, RegulatorConfig, SpeedConfig, Supervisor, SupervisorConfig};
pub use dynamics::{ActuatorMode, BuoyConfig, BuoyParams, BuoyState};
pub use environment::{ProfileKind, ProfileShape, ProfileSpec, StratificationProfile};
pub use error::{Error, Result};
pub use scenario::{compare_strategies, run, RunOutput, Scenario, Strategy, Summary};
pub use trace::{trace_csv, trace_hash, TraceRecord};
