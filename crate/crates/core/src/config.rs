//! JSON configuration files for the CLI: a pipeline config (scanner, RANSAC,
//! merge, classification, optional default paths) and a sweep-spec file.
//!
//! Parsing is total: unknown keys, malformed values, and invalid parameter
//! combinations all produce a named error, never a partially-applied config.

use crate::detect::RansacParams;
use crate::experiment::{default_ld_thresholds, SweepSpec, DEFAULT_HD_THRESHOLDS};
use crate::geom::Point3;
use crate::io::read_scene_json;
use crate::scan::ScannerConfig;
use crate::scenes::{builtin_scene, BUILTIN_SCENE_NAMES};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn read_to_string(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.to_path_buf(),
        source: e,
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, body: &str) -> Result<T, ConfigError> {
    serde_json::from_str(body).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Plane-merge thresholds: max normal angle and offset gap for joining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeConfig {
    pub angle_eps_rad: f64,
    pub dist_eps_m: f64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            angle_eps_rad: 0.1,
            dist_eps_m: 0.05,
        }
    }
}

/// False-detection classification thresholds; looser than the merge gates
/// because they stand in for a by-eye judgment of ground-truth agreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub angle_eps_rad: f64,
    pub dist_eps_m: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            angle_eps_rad: 0.15,
            dist_eps_m: 0.15,
        }
    }
}

/// Optional default file paths; CLI flags override these.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoPaths {
    pub cloud: Option<PathBuf>,
    pub scene: Option<PathBuf>,
    pub planes: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
}

/// Top-level pipeline configuration (`--config` on most subcommands).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub scanner: ScannerConfig,
    pub ransac: RansacParams,
    pub merge: MergeConfig,
    pub classify: ClassifyConfig,
    pub io: IoPaths,
}

fn check_eps(label: &str, angle: f64, dist: f64) -> Result<(), ConfigError> {
    if !(angle.is_finite() && angle > 0.0 && dist.is_finite() && dist > 0.0) {
        return Err(ConfigError::Invalid(format!(
            "{label} epsilons must be positive and finite"
        )));
    }
    Ok(())
}

impl AppConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scanner
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.ransac
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        check_eps("merge", self.merge.angle_eps_rad, self.merge.dist_eps_m)?;
        check_eps(
            "classify",
            self.classify.angle_eps_rad,
            self.classify.dist_eps_m,
        )
    }

    pub fn load(path: &Path) -> Result<AppConfig, ConfigError> {
        let body = read_to_string(path)?;
        let config: AppConfig = parse_json(path, &body)?;
        config.validate()?;
        Ok(config)
    }
}

/// Scene reference inside a sweep spec: exactly one of `builtin` (name of a
/// built-in scene) or `path` (scene JSON file). File scenes must carry an
/// explicit sensor `origin`; built-ins default to their recommended origin.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneRef {
    pub builtin: Option<String>,
    pub path: Option<PathBuf>,
    pub origin: Option<[f64; 3]>,
}

impl SceneRef {
    fn resolve(&self) -> Result<(crate::scan::SceneModel, Point3), ConfigError> {
        match (&self.builtin, &self.path) {
            (Some(name), None) => {
                let b = builtin_scene(name).ok_or_else(|| {
                    ConfigError::Invalid(format!(
                        "unknown builtin scene {name:?} (available: {})",
                        BUILTIN_SCENE_NAMES.join(", ")
                    ))
                })?;
                let origin = self
                    .origin
                    .map(|[x, y, z]| Point3::new(x, y, z))
                    .unwrap_or(b.sensor_origin);
                Ok((b.scene, origin))
            }
            (None, Some(path)) => {
                let scene = read_scene_json(path)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                let Some([x, y, z]) = self.origin else {
                    return Err(ConfigError::Invalid(
                        "scene.origin is required for file scenes".into(),
                    ));
                };
                Ok((scene, Point3::new(x, y, z)))
            }
            _ => Err(ConfigError::Invalid(
                "scene must set exactly one of builtin or path".into(),
            )),
        }
    }
}

fn default_hd_scanner() -> ScannerConfig {
    ScannerConfig {
        yaw_step_deg: 1.0,
        ..ScannerConfig::default()
    }
}

fn default_hd_thresholds() -> Vec<usize> {
    DEFAULT_HD_THRESHOLDS.to_vec()
}

fn default_trials() -> usize {
    5
}

/// On-disk sweep spec (`sweep --spec`). Every field except `scene` has a
/// default, so a minimal spec is `{"scene": {"builtin": "box"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpecFile {
    pub scene: SceneRef,
    pub hd_scanner: ScannerConfig,
    pub ld_scanner: ScannerConfig,
    pub hd_thresholds: Vec<usize>,
    pub ld_thresholds: Vec<usize>,
    pub trials: usize,
    /// One RANSAC seed per trial; defaults to 0..trials.
    pub trial_seeds: Option<Vec<u64>>,
    pub ransac: RansacParams,
    pub merge: MergeConfig,
    pub classify: ClassifyConfig,
    pub count_premerge: bool,
}

impl Default for SweepSpecFile {
    fn default() -> Self {
        SweepSpecFile {
            scene: SceneRef::default(),
            hd_scanner: default_hd_scanner(),
            ld_scanner: ScannerConfig::default(),
            hd_thresholds: default_hd_thresholds(),
            ld_thresholds: default_ld_thresholds(),
            trials: default_trials(),
            trial_seeds: None,
            ransac: RansacParams::default(),
            merge: MergeConfig::default(),
            classify: ClassifyConfig::default(),
            count_premerge: false,
        }
    }
}

impl SweepSpecFile {
    pub fn resolve(&self) -> Result<SweepSpec, ConfigError> {
        let (scene, sensor_origin) = self.scene.resolve()?;
        let trial_seeds = match &self.trial_seeds {
            Some(seeds) => seeds.clone(),
            None => (0..self.trials as u64).collect(),
        };
        let spec = SweepSpec {
            scene,
            sensor_origin,
            hd_scanner: self.hd_scanner.clone(),
            ld_scanner: self.ld_scanner.clone(),
            hd_thresholds: self.hd_thresholds.clone(),
            ld_thresholds: self.ld_thresholds.clone(),
            trials: self.trials,
            trial_seeds,
            ransac: self.ransac.clone(),
            merge_angle_eps: self.merge.angle_eps_rad,
            merge_dist_eps: self.merge.dist_eps_m,
            classify_angle_eps: self.classify.angle_eps_rad,
            classify_dist_eps: self.classify.dist_eps_m,
            count_premerge: self.count_premerge,
        };
        spec.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<SweepSpec, ConfigError> {
        let body = read_to_string(path)?;
        let file: SweepSpecFile = parse_json(path, &body)?;
        file.resolve()
    }
}
