//! TOML scenario files.
//!
//! A document is layered over a built-in scenario (`base = "<name>"`,
//! default `constant_density_dive`): keys present in the document replace
//! the base values, everything else keeps its default. A `[profile]` table
//! that names a `kind` replaces the base profile wholesale.
//!
//! ```toml
//! base = "fig4"
//! [supervisor]
//! trigger_threshold = 0.03
//! [speeds]
//! cruise = 0.8
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use crate::control::{RegulatorConfig, SpeedConfig, SupervisorConfig};
use crate::dynamics::BuoyParams;
use crate::environment::{ProfileShape, ProfileSpec, WaterVelocity};
use crate::scenario::{Scenario, SensorConfig, SimConfig, BUILTIN_SCENARIOS};

pub const DEFAULT_BASE: &str = "constant_density_dive";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Schema(String),
    #[error("unknown base scenario `{0}` (expected one of {list})", list = BUILTIN_SCENARIOS.join(", "))]
    UnknownBase(String),
    #[error("bad override `{0}`: expected key=value")]
    BadOverride(String),
    #[error("{0}")]
    Invalid(#[from] crate::error::Error),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    name: String,
    buoy: BuoyParams,
    profile: ProfileDoc,
    regulator: RegulatorConfig,
    supervisor: SupervisorConfig,
    sensors: SensorConfig,
    sim: SimConfig,
    speeds: SpeedConfig,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileDoc {
    rho_ref: f64,
    z_max: f64,
    #[serde(default)]
    v_l_surface: f64,
    #[serde(default)]
    v_l_shear: f64,
    #[serde(flatten)]
    shape: ProfileShape,
}

impl From<&Scenario> for ScenarioDoc {
    fn from(s: &Scenario) -> Self {
        ScenarioDoc {
            name: s.name.clone(),
            buoy: s.buoy,
            profile: ProfileDoc {
                rho_ref: s.profile.rho_ref,
                z_max: s.profile.z_max,
                v_l_surface: s.profile.water_velocity.surface,
                v_l_shear: s.profile.water_velocity.shear,
                shape: s.profile.shape.clone(),
            },
            regulator: s.regulator,
            supervisor: s.supervisor,
            sensors: s.sensors,
            sim: s.sim,
            speeds: s.speeds,
        }
    }
}

impl From<ScenarioDoc> for Scenario {
    fn from(d: ScenarioDoc) -> Self {
        Scenario {
            name: d.name,
            buoy: d.buoy,
            profile: ProfileSpec {
                shape: d.profile.shape,
                rho_ref: d.profile.rho_ref,
                z_max: d.profile.z_max,
                water_velocity: WaterVelocity {
                    surface: d.profile.v_l_surface,
                    shear: d.profile.v_l_shear,
                },
            },
            regulator: d.regulator,
            supervisor: d.supervisor,
            sensors: d.sensors,
            sim: d.sim,
            speeds: d.speeds,
        }
    }
}

/// Fully resolved scenario as a TOML document. Feeding it back to
/// [`parse_config`] reproduces the same scenario.
pub fn resolved_toml(scenario: &Scenario) -> String {
    toml::to_string(&ScenarioDoc::from(scenario)).expect("scenario serializes to TOML")
}

pub fn parse_config(text: &str) -> Result<Scenario, ConfigError> {
    parse_config_with_overrides(text, &[])
}

/// Splits `key=value`.
pub fn parse_override(raw: &str) -> Result<(String, String), ConfigError> {
    match raw.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(ConfigError::BadOverride(raw.to_string())),
    }
}

pub fn parse_config_with_overrides(
    text: &str,
    overrides: &[(String, String)],
) -> Result<Scenario, ConfigError> {
    let mut user: Table = text.parse().map_err(|e: toml::de::Error| syntax_error(text, &e))?;
    for (key, value) in overrides {
        set_dotted(&mut user, key, parse_value(value))?;
    }

    let base_name = match user.remove("base") {
        None => DEFAULT_BASE.to_string(),
        Some(Value::String(s)) => s,
        Some(other) => {
            return Err(ConfigError::Schema(format!(
                "`base` must be a scenario name, got {other}"
            )))
        }
    };
    let base = Scenario::builtin(&base_name).ok_or_else(|| ConfigError::UnknownBase(base_name.clone()))?;
    let mut merged = Table::try_from(ScenarioDoc::from(&base))
        .map_err(|e| ConfigError::Schema(e.to_string()))?;
    merge(&mut merged, user, true);

    let doc: ScenarioDoc = merged
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Schema(e.message().to_string()))?;
    let scenario = Scenario::from(doc);
    scenario.validate()?;
    Ok(scenario)
}

fn syntax_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let (line, column) = match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    ConfigError::Syntax {
        line,
        column,
        message: e.message().to_string(),
    }
}

/// Command-line values are TOML literals when they parse as one, strings otherwise.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::BadOverride(key.to_string()));
    }
    let mut cursor = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cursor = match entry {
            Value::Table(t) => t,
            _ => {
                return Err(ConfigError::Schema(format!(
                    "override `{key}`: `{part}` is not a section"
                )))
            }
        };
    }
    cursor.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn merge(base: &mut Table, over: Table, top: bool) {
    for (key, value) in over {
        let replace_profile = top
            && key == "profile"
            && matches!(&value, Value::Table(t) if t.contains_key("kind"));
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) if !replace_profile => merge(b, o, false),
            (Some(Value::Table(b)), Value::Table(o)) => {
                // keep the shared profile keys, drop the old shape's parameters
                let mut fresh = Table::new();
                for shared in ["rho_ref", "z_max", "v_l_surface", "v_l_shear"] {
                    if let Some(v) = b.remove(shared) {
                        fresh.insert(shared.to_string(), v);
                    }
                }
                merge(&mut fresh, o, false);
                *b = fresh;
            }
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}
