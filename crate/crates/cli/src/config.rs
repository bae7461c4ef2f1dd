//! `hux.toml` loading.
//!
//! ```toml
//! [backend]
//! kind = "mock"            # or "remote" with endpoint/model_name
//!
//! [defaults]
//! policy = "hybrid"
//! caption_latency_ms = 0
//! min_confidence = 0.5
//! move_threshold_px = 25.0
//! scale_ratio_threshold = 1.5
//! gaze_radius_px = 120.0
//!
//! [paths]
//! store = "hux_memory.jsonl"
//! scenarios = "scenarios"
//! reports = "reports"
//! registry = "tools.toml"
//!
//! [[profiles]]
//! task_id = "fruit"
//! ooi_categories = ["apple", "banana", "orange"]
//!
//! [[tools]]
//! tool_id = "PCB"
//! trigger_terms = ["defects"]
//! profile = { task_id = "pcb_defects", ooi_categories = ["mouse_bite"] }
//! ```
//!
//! Threshold values under `[defaults]` fill in any profile that leaves them out.

use std::path::{Path, PathBuf};

use hux_core::{BackendProfile, CaptionPolicy, SimConfig, TaskProfile, ToolRegistry, ToolSpec};
use serde::Deserialize;
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    #[serde(default)]
    pub policy: CaptionPolicy,
    #[serde(default)]
    pub caption_latency_ms: Option<u64>,
    #[serde(default)]
    pub min_confidence: Option<f64>,
    #[serde(default)]
    pub move_threshold_px: Option<f64>,
    #[serde(default)]
    pub scale_ratio_threshold: Option<f64>,
    #[serde(default)]
    pub gaze_radius_px: Option<f64>,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            policy: CaptionPolicy::Hybrid,
            caption_latency_ms: None,
            min_confidence: None,
            move_threshold_px: None,
            scale_ratio_threshold: None,
            gaze_radius_px: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    #[serde(default = "default_store")]
    pub store: PathBuf,
    #[serde(default)]
    pub scenarios: Option<PathBuf>,
    #[serde(default = "default_reports")]
    pub reports: PathBuf,
    #[serde(default)]
    pub registry: Option<PathBuf>,
}

fn default_store() -> PathBuf {
    PathBuf::from("hux_memory.jsonl")
}

fn default_reports() -> PathBuf {
    PathBuf::from(".")
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            store: default_store(),
            scenarios: None,
            reports: default_reports(),
            registry: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    pub backend: BackendProfile,
    pub defaults: Defaults,
    pub paths: Paths,
    pub profiles: Vec<TaskProfile>,
    pub registry: ToolRegistry,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    backend: Option<BackendProfile>,
    #[serde(default)]
    defaults: Option<Defaults>,
    #[serde(default)]
    paths: Option<Paths>,
    #[serde(default)]
    profiles: Vec<Table>,
    #[serde(default)]
    tools: Vec<Table>,
}

#[derive(Debug, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

fn line_of(src: &str, span: Option<std::ops::Range<usize>>) -> Option<usize> {
    span.map(|s| src[..s.start.min(src.len())].matches('\n').count() + 1)
}

fn fill_thresholds(table: &mut Table, d: &Defaults) {
    let fills = [
        ("min_confidence", d.min_confidence),
        ("move_threshold_px", d.move_threshold_px),
        ("scale_ratio_threshold", d.scale_ratio_threshold),
    ];
    for (key, value) in fills {
        if let Some(v) = value {
            table.entry(key).or_insert(Value::Float(v));
        }
    }
}

impl Config {
    pub fn parse(src: &str, origin: &str) -> Result<Self, ConfigError> {
        let err = |message: String| ConfigError {
            path: origin.to_string(),
            message,
        };
        let raw: RawConfig = toml::from_str(src).map_err(|e| {
            let msg = e.message().to_string();
            match line_of(src, e.span()) {
                Some(line) => err(format!("line {line}: {msg}")),
                None => err(msg),
            }
        })?;
        let defaults = raw.defaults.unwrap_or_default();
        let backend = raw.backend.unwrap_or_default();
        backend.validate().map_err(|e| err(format!("field backend: {e}")))?;

        let mut profiles = Vec::new();
        for (i, mut table) in raw.profiles.into_iter().enumerate() {
            fill_thresholds(&mut table, &defaults);
            let profile: TaskProfile = Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| err(format!("field profiles[{i}]: {}", e.message())))?;
            profile
                .validate()
                .map_err(|e| err(format!("field profiles[{i}]: {e}")))?;
            profiles.push(profile);
        }

        let mut registry = ToolRegistry::new();
        for (i, mut table) in raw.tools.into_iter().enumerate() {
            if let Some(Value::Table(p)) = table.get_mut("profile") {
                fill_thresholds(p, &defaults);
            }
            let tool: ToolSpec = Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| err(format!("field tools[{i}]: {}", e.message())))?;
            registry
                .insert(tool)
                .map_err(|e| err(format!("field tools[{i}]: {e}")))?;
        }

        Ok(Config {
            backend,
            defaults,
            paths: raw.paths.unwrap_or_default(),
            profiles,
            registry,
        })
    }

    /// Reads the config file, then merges the tool registry file if one is set.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let origin = path.display().to_string();
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: origin.clone(),
            message: e.to_string(),
        })?;
        let mut config = Self::parse(&src, &origin)?;
        if let Some(reg_path) = config.paths.registry.clone() {
            let reg_path = match path.parent() {
                Some(dir) if reg_path.is_relative() => dir.join(reg_path),
                _ => reg_path,
            };
            let extra = ToolRegistry::load(&reg_path).map_err(|e| ConfigError {
                path: reg_path.display().to_string(),
                message: e.to_string(),
            })?;
            for tool in extra.tools() {
                config.registry.insert(tool.clone()).map_err(|e| ConfigError {
                    path: reg_path.display().to_string(),
                    message: e.to_string(),
                })?;
            }
        }
        Ok(config)
    }

    pub fn sim_config(&self, policy: Option<CaptionPolicy>, latency_ms: Option<u64>) -> SimConfig {
        let mut sim = SimConfig {
            profiles: self.profiles.clone(),
            registry: self.registry.clone(),
            default_policy: self.defaults.policy,
            default_latency_ms: self
                .defaults
                .caption_latency_ms
                .unwrap_or(self.backend.caption_latency_ms),
            policy_override: policy,
            latency_override: latency_ms,
            ..SimConfig::default()
        };
        if let Some(r) = self.defaults.gaze_radius_px {
            sim.default_gaze_radius_px = r;
        }
        sim
    }

    /// A scenario path as given, or relative to `paths.scenarios` when the
    /// given path does not exist.
    pub fn resolve_scenario(&self, path: &Path) -> PathBuf {
        match &self.paths.scenarios {
            Some(dir) if !path.exists() && path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let c = Config::parse("", "x").unwrap();
        assert_eq!(c.defaults, Defaults::default());
        assert_eq!(c.paths, Paths::default());
        assert_eq!(c.backend, BackendProfile::default());
    }

    #[test]
    fn defaults_fill_profile_thresholds() {
        let src = r#"
[defaults]
min_confidence = 0.7
move_threshold_px = 40.0

[[profiles]]
task_id = "fruit"
ooi_categories = ["apple"]
move_threshold_px = 10.0
"#;
        let c = Config::parse(src, "x").unwrap();
        assert_eq!(c.profiles[0].min_confidence, 0.7);
        assert_eq!(c.profiles[0].move_threshold_px, Some(10.0));
        assert_eq!(c.profiles[0].scale_ratio_threshold, Some(1.5));
    }

    #[test]
    fn syntax_errors_carry_line() {
        let e = Config::parse("[defaults]\npolicy = \"hybrid\"\nbogus = 1\n", "cfg.toml").unwrap_err();
        assert!(e.message.starts_with("line 3:"), "{}", e.message);
    }

    #[test]
    fn invalid_profile_names_field() {
        let src = "[[profiles]]\ntask_id = \"a\"\nooi_categories = []\n";
        let e = Config::parse(src, "cfg.toml").unwrap_err();
        assert!(e.message.contains("profiles[0]"), "{}", e.message);
    }

    #[test]
    fn remote_without_endpoint_rejected() {
        let e = Config::parse("[backend]\nkind = \"remote\"\n", "cfg.toml").unwrap_err();
        assert!(e.message.contains("backend"), "{}", e.message);
    }

    #[test]
    fn config_latency_below_script_header() {
        let c = Config::parse("[defaults]\ncaption_latency_ms = 250\n", "x").unwrap();
        let sim = c.sim_config(None, None);
        assert_eq!(sim.default_latency_ms, 250);
        assert_eq!(c.sim_config(None, Some(5)).latency_override, Some(5));
    }
}
