//! Scenario files: spawn region, goal, closed-loop settings, disturbance
//! schedule, skill set and simulator constants, in one TOML document.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{Corner, DisturbanceEvent, GoalSource, SimParams};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpawnRegion {
    /// Lying flat in the middle of the picking tote.
    Central,
    /// Standing on its side in the middle of the picking tote.
    CentralStanding,
    /// Standing against the left wall of the picking tote.
    Edge,
    /// Explicit ranges given by `x` and `y`.
    Box,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnSpec {
    pub region: SpawnRegion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<[f64; 2]>,
    /// Overrides the region's default standing/lying state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upright: Option<bool>,
    /// Range of the absolute initial yaw; the sign is drawn separately.
    #[serde(default = "default_yaw")]
    pub yaw: [f64; 2],
}

fn default_yaw() -> [f64; 2] {
    [0.25, 0.6]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkillConfig {
    pub name: String,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Registered controller name for each segment, in execution order.
    pub segments: Vec<String>,
}

fn default_threshold() -> f64 {
    0.9
}

pub fn default_skills() -> Vec<SkillConfig> {
    let skill = |name: &str, segments: &[&str]| SkillConfig {
        name: name.into(),
        threshold: default_threshold(),
        segments: segments.iter().map(|s| s.to_string()).collect(),
    };
    vec![
        skill("flip", &["flip"]),
        skill("pick", &["pick"]),
        skill("pack", &["pack"]),
        skill("push", &["push_orientation", "push_position"]),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub spawn: SpawnSpec,
    pub goal: Corner,
    pub goal_source: GoalSource,
    /// Chunk length in ticks.
    pub horizon: usize,
    /// Ticks between progress re-estimates; must equal `horizon`.
    pub reestimate_interval: usize,
    pub max_ticks: u64,
    /// Standard deviation of planar actuation noise, meters.
    pub noise_sigma: f64,
    pub hysteresis: bool,
    pub hysteresis_margin: f64,
    /// Ticks the object must stay at the goal.
    pub hold_ticks: u64,
    pub abort_cycles: u32,
    pub abort_gain: f64,
    pub disturbances: Vec<DisturbanceEvent>,
    pub skills: Vec<SkillConfig>,
    pub sim: SimParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            schema_version: SCENARIO_SCHEMA_VERSION,
            name: "gc".into(),
            spawn: SpawnSpec {
                region: SpawnRegion::Edge,
                x: None,
                y: None,
                upright: None,
                yaw: default_yaw(),
            },
            goal: Corner::BottomLeft,
            goal_source: GoalSource::Language,
            horizon: 50,
            reestimate_interval: 50,
            max_ticks: 3000,
            noise_sigma: 0.0,
            hysteresis: false,
            hysteresis_margin: 0.05,
            hold_ticks: 100,
            abort_cycles: 3,
            abort_gain: 0.05,
            disturbances: Vec::new(),
            skills: default_skills(),
            sim: SimParams::default(),
        }
    }
}

impl ScenarioConfig {
    /// Goal-conditioned pick-and-pack: object standing against the wall,
    /// flip → pick → pack → push.
    pub fn goal_conditioned(goal: Corner) -> Self {
        Self {
            goal,
            ..Self::default()
        }
    }

    /// Object lying flat in the center of the picking tote.
    pub fn central(goal: Corner) -> Self {
        let mut s = Self::goal_conditioned(goal);
        s.name = "central".into();
        s.spawn.region = SpawnRegion::Central;
        s
    }

    /// Multi-sequence pick-and-pack with the object standing either in the
    /// center (flip before or after packing) or at the wall (flip first).
    pub fn multi_sequence(region: SpawnRegion, goal: Corner) -> Self {
        let mut s = Self::goal_conditioned(goal);
        s.name = match region {
            SpawnRegion::Edge => "ms_edge".into(),
            _ => "ms_central".into(),
        };
        s.spawn.region = region;
        s.hysteresis = true;
        s
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.skills.iter().map(|s| s.threshold).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCENARIO_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if self.reestimate_interval != self.horizon {
            return bad("reestimate_interval must equal horizon".into());
        }
        if self.max_ticks < self.horizon as u64 {
            return bad("max_ticks must be at least one horizon".into());
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be non-negative".into());
        }
        if !(self.hysteresis_margin.is_finite() && self.hysteresis_margin >= 0.0) {
            return bad("hysteresis_margin must be non-negative".into());
        }
        if self.abort_cycles == 0 {
            return bad("abort_cycles must be positive".into());
        }
        let [y0, y1] = self.spawn.yaw;
        if !(y0.is_finite() && y1.is_finite() && y0 <= y1) {
            return bad("spawn.yaw must be an increasing range".into());
        }
        if self.skills.is_empty() {
            return bad("at least one skill is required".into());
        }
        for s in &self.skills {
            if !(s.threshold > 0.0 && s.threshold <= 1.0) {
                return bad(format!("skill {}: threshold must lie in (0, 1]", s.name));
            }
            if s.segments.is_empty() {
                return bad(format!("skill {}: segment list is empty", s.name));
            }
        }
        self.sim.validate().map_err(ConfigError::Invalid)
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScenarioConfig::default().validate().unwrap();
        ScenarioConfig::multi_sequence(SpawnRegion::CentralStanding, Corner::TopRight)
            .validate()
            .unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let mut s = ScenarioConfig::central(Corner::TopRight);
        s.disturbances.push(DisturbanceEvent {
            at_tick: 120,
            kind: crate::sim::DisturbanceKind::ResetObjectToWall,
        });
        let text = s.to_toml_string();
        let back = ScenarioConfig::from_toml_str(&text, "mem").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let s = ScenarioConfig::from_toml_str(
            "schema_version = 1\ngoal = \"top_left\"\n[spawn]\nregion = \"central\"\n",
            "mem",
        )
        .unwrap();
        assert_eq!(s.horizon, 50);
        assert_eq!(s.goal, Corner::TopLeft);
        assert_eq!(s.skills.len(), 4);
        assert_eq!(s.sim.attach_radius, 0.02);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ScenarioConfig::from_toml_str("schema_version = 1\nhorizn = 5\n", "mem");
        assert!(matches!(err, Err(ConfigError::Parse { .. })));
        let err = ScenarioConfig::from_toml_str("schema_version = 1\n[sim]\nspeed = 1.0\n", "mem");
        assert!(matches!(err, Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let err = ScenarioConfig::from_toml_str("schema_version = 7\n", "mem");
        assert!(matches!(err, Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn interval_must_match_horizon() {
        let s = ScenarioConfig {
            reestimate_interval: 25,
            ..ScenarioConfig::default()
        };
        assert!(s.validate().is_err());
    }
}
