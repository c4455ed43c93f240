//! Scenario, override and beacon-list files (TOML).
//!
//! ```toml
//! label = "square"
//!
//! [[beacons]]
//! x = -2.0
//! y = 2.0
//! weight = 1.0
//! # ... at least three beacons
//!
//! [beacon_velocity]          # optional, defaults to (0, 0)
//! x = 0.0
//! y = 0.0
//!
//! [agent]
//! x = 3.0
//! y = 3.0
//! theta = 3.141592653589793
//!
//! [controller]
//! kind = "stationary"        # or "saturated" / "moving"
//! k_p = 0.5
//! k_h = 1.0
//!
//! [sim]
//! dt = 0.01
//! t_final = 60.0
//! ```
//!
//! Unknown keys are rejected. Validation errors name the offending key path
//! and the line of the enclosing table.

use std::fmt;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::control::{ControllerKind, MovingGains, SaturationLimits, StationaryGains};
use crate::dynamics::UnicycleState;
use crate::error::Error;
use crate::geometry::{BeaconSet, Vec2};
use crate::sim::{Scenario, Variation, DEFAULT_COLLISION_EPSILON, DEFAULT_CONVERGENCE_TOLERANCE};

/// A parse or validation failure located in a scenario document.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted key path, e.g. `beacons[2].weight`.
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn new(key: impl Into<String>, line: Option<usize>, message: impl Into<String>) -> Self {
        ConfigError {
            key: key.into(),
            line,
            message: message.into(),
        }
    }

    fn from_toml(text: &str, err: toml::de::Error) -> Self {
        let line = err.span().map(|s| line_of(text, s.start));
        ConfigError::new("", line, err.message().trim().to_string())
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.key.is_empty(), self.line) {
            (false, Some(line)) => write!(f, "`{}` (line {line}): {}", self.key, self.message),
            (false, None) => write!(f, "`{}`: {}", self.key, self.message),
            (true, Some(line)) => write!(f, "line {line}: {}", self.message),
            (true, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn line_of(text: &str, offset: usize) -> usize {
    text.as_bytes()[..offset.min(text.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XyEntry {
    pub x: f64,
    pub y: f64,
}

impl From<Vec2> for XyEntry {
    fn from(v: Vec2) -> Self {
        XyEntry { x: v.x, y: v.y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeaconEntry {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerEntry {
    Stationary {
        k_p: f64,
        k_h: f64,
    },
    Saturated {
        nu_b: f64,
        nu_f: f64,
        omega_r: f64,
        omega_l: f64,
    },
    Moving {
        k1: f64,
        k2: f64,
        k3: f64,
        #[serde(default)]
        phi0: XyEntry,
    },
}

fn default_true() -> bool {
    true
}

fn default_one() -> usize {
    1
}

fn default_collision_epsilon() -> f64 {
    DEFAULT_COLLISION_EPSILON
}

fn default_convergence_tolerance() -> f64 {
    DEFAULT_CONVERGENCE_TOLERANCE
}

fn default_label() -> String {
    "scenario".to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimEntry {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_collision_epsilon")]
    pub collision_epsilon: f64,
    #[serde(default = "default_convergence_tolerance")]
    pub convergence_tolerance: f64,
    #[serde(default = "default_true")]
    pub stop_on_convergence: bool,
    #[serde(default = "default_one")]
    pub decimate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_label")]
    pub label: String,
    pub beacons: Vec<Spanned<BeaconEntry>>,
    #[serde(default)]
    pub beacon_velocity: XyEntry,
    pub agent: Spanned<AgentEntry>,
    pub controller: Spanned<ControllerEntry>,
    pub sim: Spanned<SimEntry>,
}

/// Partial `[sim]` table of an override.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimOverride {
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub collision_epsilon: Option<f64>,
    pub convergence_tolerance: Option<f64>,
    pub stop_on_convergence: Option<bool>,
    pub decimate: Option<usize>,
}

/// One `[[variant]]` entry of an overrides file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantEntry {
    pub label: Option<String>,
    pub beacons: Option<Vec<Spanned<BeaconEntry>>>,
    pub beacon_velocity: Option<XyEntry>,
    pub agent: Option<Spanned<AgentEntry>>,
    pub controller: Option<Spanned<ControllerEntry>>,
    pub sim: Option<Spanned<SimOverride>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverridesFile {
    #[serde(default)]
    pub variant: Vec<Spanned<VariantEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BeaconListFile {
    beacons: Vec<Spanned<BeaconEntry>>,
    #[serde(default)]
    beacon_velocity: XyEntry,
}

/// Context for turning spanned entries into validated model values.
struct Doc<'a> {
    text: &'a str,
    prefix: String,
}

impl Doc<'_> {
    fn line<T>(&self, s: &Spanned<T>) -> Option<usize> {
        Some(line_of(self.text, s.span().start))
    }

    fn err<T>(&self, at: &Spanned<T>, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::new(format!("{}{key}", self.prefix), self.line(at), message)
    }

    fn beacons(&self, list: &[Spanned<BeaconEntry>], velocity: XyEntry) -> Result<BeaconSet, ConfigError> {
        for (i, b) in list.iter().enumerate() {
            for (name, v) in [("x", b.get_ref().x), ("y", b.get_ref().y), ("weight", b.get_ref().weight)] {
                if !v.is_finite() {
                    return Err(self.err(b, &format!("beacons[{i}].{name}"), "must be finite"));
                }
            }
            if !(b.get_ref().weight > 0.0) {
                return Err(self.err(
                    b,
                    &format!("beacons[{i}].weight"),
                    format!("weight must be positive, got {}", b.get_ref().weight),
                ));
            }
        }
        let positions = list.iter().map(|b| Vec2::new(b.get_ref().x, b.get_ref().y)).collect();
        let weights = list.iter().map(|b| b.get_ref().weight).collect();
        let velocity = Vec2::try_new(velocity.x, velocity.y).map_err(|e| {
            ConfigError::new(format!("{}beacon_velocity", self.prefix), None, e.to_string())
        })?;
        BeaconSet::new(positions, weights, velocity).map_err(|e| {
            let line = list.first().and_then(|b| self.line(b));
            ConfigError::new(format!("{}beacons", self.prefix), line, e.to_string())
        })
    }

    fn agent(&self, a: &Spanned<AgentEntry>) -> Result<UnicycleState, ConfigError> {
        let entry = a.get_ref();
        let position = Vec2::try_new(entry.x, entry.y).map_err(|e| self.err(a, "agent", e.to_string()))?;
        if !entry.theta.is_finite() {
            return Err(self.err(a, "agent.theta", "must be finite"));
        }
        Ok(UnicycleState::new(position, entry.theta))
    }

    fn controller(&self, c: &Spanned<ControllerEntry>) -> Result<ControllerKind, ConfigError> {
        let wrap = |e: Error| match e {
            Error::InvalidParameter { name, reason } => self.err(c, &format!("controller.{name}"), reason),
            other => self.err(c, "controller", other.to_string()),
        };
        Ok(match *c.get_ref() {
            ControllerEntry::Stationary { k_p, k_h } => {
                ControllerKind::Stationary(StationaryGains::new(k_p, k_h).map_err(wrap)?)
            }
            ControllerEntry::Saturated {
                nu_b,
                nu_f,
                omega_r,
                omega_l,
            } => ControllerKind::Saturated(SaturationLimits::new(nu_b, nu_f, omega_r, omega_l).map_err(wrap)?),
            ControllerEntry::Moving { k1, k2, k3, phi0 } => ControllerKind::Moving {
                gains: MovingGains::new(k1, k2, k3).map_err(wrap)?,
                phi0: Vec2::try_new(phi0.x, phi0.y).map_err(|e| self.err(c, "controller.phi0", e.to_string()))?,
            },
        })
    }

    /// Runs full scenario validation, locating the error by key.
    fn check(&self, scenario: &Scenario, sim_at: Option<usize>, agent_at: Option<usize>) -> Result<(), ConfigError> {
        scenario.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => {
                ConfigError::new(format!("{}sim.{name}", self.prefix), sim_at, reason)
            }
            Error::CoincidentPoints { separation } => ConfigError::new(
                format!("{}agent", self.prefix),
                agent_at,
                format!("{} (agent within {separation:e} m of a beacon)", Error::CoincidentPoints { separation }),
            ),
            other => ConfigError::new(format!("{}agent", self.prefix), agent_at, other.to_string()),
        })
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::from_toml(text, e))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario documents always serialise")
    }

    /// Validated model scenario. `text` must be the document this was parsed from.
    pub fn to_scenario(&self, text: &str) -> Result<Scenario, ConfigError> {
        let doc = Doc {
            text,
            prefix: String::new(),
        };
        let sim = self.sim.get_ref();
        let scenario = Scenario {
            label: self.label.clone(),
            beacons: doc.beacons(&self.beacons, self.beacon_velocity)?,
            agent: doc.agent(&self.agent)?,
            controller: doc.controller(&self.controller)?,
            dt: sim.dt,
            t_final: sim.t_final,
            collision_epsilon: sim.collision_epsilon,
            convergence_tolerance: sim.convergence_tolerance,
            stop_on_convergence: sim.stop_on_convergence,
            decimate: sim.decimate,
        };
        doc.check(&scenario, doc.line(&self.sim), doc.line(&self.agent))?;
        Ok(scenario)
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        let controller = match s.controller {
            ControllerKind::Stationary(g) => ControllerEntry::Stationary { k_p: g.k_p, k_h: g.k_h },
            ControllerKind::Saturated(l) => ControllerEntry::Saturated {
                nu_b: l.nu_b,
                nu_f: l.nu_f,
                omega_r: l.omega_r,
                omega_l: l.omega_l,
            },
            ControllerKind::Moving { gains, phi0 } => ControllerEntry::Moving {
                k1: gains.k1,
                k2: gains.k2,
                k3: gains.k3,
                phi0: phi0.into(),
            },
        };
        ScenarioFile {
            label: s.label.clone(),
            beacons: s
                .beacons
                .positions()
                .iter()
                .zip(s.beacons.weights())
                .map(|(p, &weight)| Spanned::new(0..0, BeaconEntry { x: p.x, y: p.y, weight }))
                .collect(),
            beacon_velocity: s.beacons.velocity().into(),
            agent: Spanned::new(
                0..0,
                AgentEntry {
                    x: s.agent.position.x,
                    y: s.agent.position.y,
                    theta: s.agent.heading,
                },
            ),
            controller: Spanned::new(0..0, controller),
            sim: Spanned::new(
                0..0,
                SimEntry {
                    dt: s.dt,
                    t_final: s.t_final,
                    collision_epsilon: s.collision_epsilon,
                    convergence_tolerance: s.convergence_tolerance,
                    stop_on_convergence: s.stop_on_convergence,
                    decimate: s.decimate,
                },
            ),
        }
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    ScenarioFile::parse(text)?.to_scenario(text)
}

/// Canonical text form of a scenario.
pub fn scenario_to_toml(s: &Scenario) -> String {
    ScenarioFile::from_scenario(s).to_toml()
}

/// Parses an overrides document into one result per `[[variant]]`, validating
/// each variant against `base`. A document-level syntax error fails as a whole.
pub fn parse_overrides(text: &str, base: &Scenario) -> Result<Vec<Result<Variation, ConfigError>>, ConfigError> {
    let file: OverridesFile = toml::from_str(text).map_err(|e| ConfigError::from_toml(text, e))?;
    Ok(file
        .variant
        .iter()
        .enumerate()
        .map(|(i, v)| variation(text, i, v, base))
        .collect())
}

fn variation(text: &str, index: usize, spanned: &Spanned<VariantEntry>, base: &Scenario) -> Result<Variation, ConfigError> {
    let doc = Doc {
        text,
        prefix: format!("variant[{index}]."),
    };
    let v = spanned.get_ref();
    let velocity = v.beacon_velocity.unwrap_or_else(|| base.beacons.velocity().into());
    let beacons = match &v.beacons {
        Some(list) => Some(doc.beacons(list, velocity)?),
        None if v.beacon_velocity.is_some() => Some(base.beacons.with_velocity(Vec2::new(velocity.x, velocity.y))),
        None => None,
    };
    let sim = v.sim.as_ref().map(|s| *s.get_ref()).unwrap_or_default();
    let variation = Variation {
        label: v.label.clone(),
        beacons,
        agent: v.agent.as_ref().map(|a| doc.agent(a)).transpose()?,
        controller: v.controller.as_ref().map(|c| doc.controller(c)).transpose()?,
        dt: sim.dt,
        t_final: sim.t_final,
        collision_epsilon: sim.collision_epsilon,
        convergence_tolerance: sim.convergence_tolerance,
        stop_on_convergence: sim.stop_on_convergence,
        decimate: sim.decimate,
    };
    let here = doc.line(spanned);
    let sim_at = v.sim.as_ref().and_then(|s| doc.line(s)).or(here);
    let agent_at = v.agent.as_ref().and_then(|a| doc.line(a)).or(here);
    doc.check(&variation.apply(base), sim_at, agent_at)?;
    Ok(variation)
}

/// Beacons from either a beacon-list document (`beacons` and optionally
/// `beacon_velocity`) or a full scenario document.
pub fn parse_beacons(text: &str) -> Result<BeaconSet, ConfigError> {
    let doc = Doc {
        text,
        prefix: String::new(),
    };
    let value: toml::Table = text.parse().map_err(|e| ConfigError::from_toml(text, e))?;
    let is_list = value.keys().all(|k| k == "beacons" || k == "beacon_velocity");
    if is_list {
        let file: BeaconListFile = toml::from_str(text).map_err(|e| ConfigError::from_toml(text, e))?;
        doc.beacons(&file.beacons, file.beacon_velocity)
    } else {
        let file = ScenarioFile::parse(text)?;
        doc.beacons(&file.beacons, file.beacon_velocity)
    }
}
