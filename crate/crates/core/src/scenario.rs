//! Scenario files: version-1 JSON with strict field checking and dotted
//! command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::costmap::CostMultiplier;
use crate::gateway::{request_digest, BackendEndpoint};
use crate::geometry::{CameraModel, Point2, Pose2D};
use crate::instruction::{DesirabilityTable, Lexicon};
use crate::metrics::Thresholds;
use crate::planner::{ParamBounds, PlannerConfig};
use crate::simulator::{Scene, World};

pub const SCENARIO_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Invalid(e.to_string())
}

/// Where perception and language answers come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    /// Simulator ground truth for perception, the offline decomposer and
    /// desirability table for language.
    #[default]
    Oracle,
    /// Recorded fixtures wherever configured; oracle perception otherwise.
    Replay,
    /// Live HTTP endpoints wherever configured.
    Live,
}

impl std::str::FromStr for BackendMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "replay" => Ok(Self::Replay),
            "live" => Ok(Self::Live),
            other => Err(format!("unknown backend {other:?}; expected oracle, replay or live")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendsConfig {
    pub mode: BackendMode,
    /// Language fixture used in replay mode.
    pub language_fixture: Option<PathBuf>,
    /// Landmark-detector fixture used in replay mode.
    pub landmark_fixture: Option<PathBuf>,
    pub language: Option<BackendEndpoint>,
    pub landmark: Option<BackendEndpoint>,
    pub segmentation: Option<BackendEndpoint>,
    /// Use the offline decomposer and table when a language call fails.
    pub allow_fallback: bool,
}

impl Default for BackendsConfig {
    fn default() -> Self {
        Self {
            mode: BackendMode::Oracle,
            language_fixture: None,
            landmark_fixture: None,
            language: None,
            landmark: None,
            segmentation: None,
            allow_fallback: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionConfig {
    /// Oracle segmentation blur, pixels.
    pub blur_sigma: f64,
    /// Oracle segmentation uniform noise amplitude.
    pub noise_amp: f64,
    /// Oracle landmark pixel noise (standard deviation).
    pub landmark_noise_px: f64,
    /// Simulated oracle landmark latency, seconds.
    pub landmark_latency_s: f64,
    /// Period between landmark queries, sim seconds.
    pub query_period_s: f64,
    /// Range of bearing-only goals, meters.
    pub default_range: f64,
    pub cost_multiplier: CostMultiplier,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            blur_sigma: 0.0,
            noise_amp: 0.0,
            landmark_noise_px: 0.0,
            landmark_latency_s: 0.0,
            query_period_s: 2.0,
            default_range: 10.0,
            cost_multiplier: CostMultiplier::Undesirability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptPaths {
    pub decompose: Option<PathBuf>,
    pub action: Option<PathBuf>,
    pub frontier: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub sim: u64,
    pub optimizer: u64,
    pub noise: u64,
}

impl Seeds {
    pub fn all(n: u64) -> Self {
        Self {
            sim: n,
            optimizer: n,
            noise: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u64,
    pub name: String,
    pub instruction: String,
    pub world: World,
    pub camera: CameraModel,
    pub start: Pose2D,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub bounds: ParamBounds,
    #[serde(default)]
    pub perception: PerceptionConfig,
    #[serde(default)]
    pub backends: BackendsConfig,
    #[serde(default)]
    pub prompts: PromptPaths,
    #[serde(default)]
    pub lexicon: Option<Lexicon>,
    #[serde(default)]
    pub desirability: Option<DesirabilityTable>,
    pub seeds: Seeds,
    /// Seconds of simulated time before the run is abandoned.
    pub timeout: f64,
    #[serde(default)]
    pub reference_path: Option<Vec<Point2>>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

/// A loaded scenario with its origin.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    /// Directory relative paths resolve against.
    pub base_dir: PathBuf,
    /// SHA-256 of the effective configuration.
    pub digest: String,
}

impl Scenario {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Parses `key=value`; the value is JSON when it parses as JSON and a
/// string otherwise.
pub fn parse_override(s: &str) -> Result<(String, Value), ScenarioError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| invalid(format!("override {s:?} is not key=value")))?;
    if k.trim().is_empty() {
        return Err(invalid(format!("override {s:?} has an empty key")));
    }
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

/// Sets a dotted path (array indices allowed) inside `root`, creating
/// missing object keys.
pub fn apply_override(root: &mut Value, key: &str, value: Value) -> Result<(), ScenarioError> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(arr) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| invalid(format!("{key}: {part:?} is not an array index")))?;
                let len = arr.len();
                let slot = arr
                    .get_mut(idx)
                    .ok_or_else(|| invalid(format!("{key}: index {idx} out of range ({len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(invalid(format!("{key}: cannot descend into a scalar at {part:?}"))),
        };
    }
    Ok(())
}

/// Validates a parsed configuration.
pub fn validate(cfg: &ScenarioConfig) -> Result<(), ScenarioError> {
    if cfg.version != SCENARIO_VERSION {
        return Err(invalid(format!("unsupported version {}", cfg.version)));
    }
    cfg.camera.validate().map_err(invalid)?;
    cfg.planner.validate().map_err(invalid)?;
    cfg.bounds.validate().map_err(invalid)?;
    Scene::new(cfg.world.clone()).map_err(invalid)?;
    if !(cfg.timeout > 0.0) {
        return Err(invalid("timeout must be positive"));
    }
    let p = &cfg.perception;
    if !(p.blur_sigma >= 0.0 && p.noise_amp >= 0.0 && p.landmark_noise_px >= 0.0 && p.landmark_latency_s >= 0.0) {
        return Err(invalid("perception noise, blur and latency must be non-negative"));
    }
    if !(p.query_period_s > 0.0 && p.default_range > 0.0) {
        return Err(invalid("query_period_s and default_range must be positive"));
    }
    if cfg.world.landmarks.is_empty() {
        return Err(invalid("world has no landmarks"));
    }
    for ep in [&cfg.backends.language, &cfg.backends.landmark, &cfg.backends.segmentation]
        .into_iter()
        .flatten()
    {
        ep.validate().map_err(invalid)?;
    }
    Ok(())
}

/// Builds a scenario from a JSON value after applying overrides.
pub fn from_value(mut raw: Value, overrides: &[(String, Value)], base_dir: &Path) -> Result<Scenario, ScenarioError> {
    for (k, v) in overrides {
        apply_override(&mut raw, k, v.clone())?;
    }
    match raw.get("version") {
        Some(v) if v.as_u64() == Some(SCENARIO_VERSION) => {}
        Some(v) => return Err(invalid(format!("unsupported version {v}"))),
        None => return Err(invalid("missing field `version`")),
    }
    let digest = request_digest(&raw);
    let config: ScenarioConfig = serde_json::from_value(raw).map_err(invalid)?;
    validate(&config)?;
    Ok(Scenario {
        config,
        base_dir: base_dir.to_path_buf(),
        digest,
    })
}

/// Reads, overrides and validates a scenario file.
pub fn load(path: &Path, overrides: &[(String, Value)]) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let raw: Value = serde_json::from_str(&text).map_err(invalid)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    from_value(raw, overrides, &base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> Value {
        json!({
            "version": 1,
            "name": "t",
            "instruction": "go to the door",
            "world": {
                "bounds": {"min_x": -5.0, "min_y": -5.0, "max_x": 5.0, "max_y": 5.0},
                "default_label": "dirt",
                "landmarks": [{"text": "door", "position": [4.0, 0.0]}]
            },
            "camera": {"fx": 90.0, "fy": 90.0, "cx": 80.0, "cy": 60.0, "width": 160, "height": 120,
                       "mount_height": 0.8, "mount_pitch": 0.35},
            "start": {"x": 0.0, "y": 0.0, "heading": 0.0},
            "seeds": {"sim": 1, "optimizer": 2, "noise": 3},
            "timeout": 30.0
        })
    }

    #[test]
    fn loads_minimal_scenario() {
        let s = from_value(minimal(), &[], Path::new(".")).unwrap();
        assert_eq!(s.config.planner, PlannerConfig::default());
        assert_eq!(s.digest.len(), 64);
    }

    #[test]
    fn rejects_missing_camera_unknown_fields_and_versions() {
        let mut v = minimal();
        v.as_object_mut().unwrap().remove("camera");
        let e = from_value(v, &[], Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("camera"), "{e}");

        let mut v = minimal();
        v["surprise"] = json!(1);
        assert!(from_value(v, &[], Path::new(".")).is_err());

        let mut v = minimal();
        v["version"] = json!(2);
        assert!(from_value(v, &[], Path::new(".")).is_err());

        let mut v = minimal();
        v.as_object_mut().unwrap().remove("seeds");
        assert!(from_value(v, &[], Path::new(".")).is_err());
    }

    #[test]
    fn overrides_apply_before_parsing() {
        let ov = vec![
            parse_override("planner.w_behav=0").unwrap(),
            parse_override("world.landmarks.0.text=red door").unwrap(),
            parse_override("seeds.optimizer=9").unwrap(),
        ];
        let s = from_value(minimal(), &ov, Path::new(".")).unwrap();
        assert_eq!(s.config.planner.w_behav, 0.0);
        assert_eq!(s.config.world.landmarks[0].text, "red door");
        assert_eq!(s.config.seeds.optimizer, 9);
        let base = from_value(minimal(), &[], Path::new(".")).unwrap();
        assert_ne!(s.digest, base.digest);

        assert!(parse_override("novalue").is_err());
        let bad = vec![parse_override("world.landmarks.7.text=x").unwrap()];
        assert!(from_value(minimal(), &bad, Path::new(".")).is_err());
        let bad = vec![parse_override("planner.c_th=1.5").unwrap()];
        assert!(from_value(minimal(), &bad, Path::new(".")).is_err());
    }

    #[test]
    fn backend_mode_parses() {
        assert_eq!("replay".parse::<BackendMode>().unwrap(), BackendMode::Replay);
        assert!("cloud".parse::<BackendMode>().is_err());
    }
}
