//! Simulator for a 2-DOF rotating-stage laser range finder: a planar beam
//! fan is tilted about the sensor y-axis, then panned about the world z-axis,
//! and raycast against a polygonal scene.

use crate::geom::{
    distance_to_convex_polygon, plane_basis, Point2, Point3, PointCloud, Polygon3, Vector3,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Intersections closer than this along the ray are ignored (self-hits).
const MIN_RAY_T: f64 = 1e-6;
/// Edge-inclusive tolerance for the point-in-facet test, meters.
const FACET_EDGE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScanError {
    #[error("invalid scanner config: {0}")]
    InvalidConfig(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
}

/// Geometry and noise parameters of the 2-DOF scanner.
///
/// Defaults: pitch 30 deg, yaw 0-300 deg in 6-deg steps, a 270-deg beam fan
/// at 0.25-deg resolution (1,081 beams per line), 30 m max range, 0.01 m
/// range noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScannerConfig {
    /// Fixed tilt of the scan plane about the sensor y-axis, degrees.
    pub pitch_deg: f64,
    pub yaw_start_deg: f64,
    pub yaw_end_deg: f64,
    pub yaw_step_deg: f64,
    /// Angular coverage of the beam fan, degrees.
    pub beam_fov_deg: f64,
    pub beam_step_deg: f64,
    pub max_range_m: f64,
    /// Standard deviation of Gaussian along-ray range noise, meters.
    pub noise_sigma_m: f64,
    pub seed: u64,
}

impl Default for ScannerConfig {
    fn default() -> Self {
        ScannerConfig {
            pitch_deg: 30.0,
            yaw_start_deg: 0.0,
            yaw_end_deg: 300.0,
            yaw_step_deg: 6.0,
            beam_fov_deg: 270.0,
            beam_step_deg: 0.25,
            max_range_m: 30.0,
            noise_sigma_m: 0.01,
            seed: 0,
        }
    }
}

impl ScannerConfig {
    pub fn validate(&self) -> Result<(), ScanError> {
        let fin = [
            self.pitch_deg,
            self.yaw_start_deg,
            self.yaw_end_deg,
            self.yaw_step_deg,
            self.beam_fov_deg,
            self.beam_step_deg,
            self.max_range_m,
            self.noise_sigma_m,
        ];
        if fin.iter().any(|v| !v.is_finite()) {
            return Err(ScanError::InvalidConfig(
                "all scanner fields must be finite".into(),
            ));
        }
        if self.yaw_end_deg <= self.yaw_start_deg {
            return Err(ScanError::InvalidConfig(
                "yaw_end_deg must exceed yaw_start_deg".into(),
            ));
        }
        if self.yaw_step_deg <= 0.0 {
            return Err(ScanError::InvalidConfig(
                "yaw_step_deg must be positive".into(),
            ));
        }
        if self.beam_fov_deg <= 0.0 || self.beam_step_deg <= 0.0 {
            return Err(ScanError::InvalidConfig(
                "beam_fov_deg and beam_step_deg must be positive".into(),
            ));
        }
        if self.max_range_m <= 0.0 {
            return Err(ScanError::InvalidConfig(
                "max_range_m must be positive".into(),
            ));
        }
        if self.noise_sigma_m < 0.0 {
            return Err(ScanError::InvalidConfig(
                "noise_sigma_m must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Number of pan positions: floor((yaw_end - yaw_start) / yaw_step).
    pub fn yaw_steps(&self) -> usize {
        ((self.yaw_end_deg - self.yaw_start_deg) / self.yaw_step_deg).floor() as usize
    }

    /// Beams per scan line: round(beam_fov / beam_step) + 1.
    pub fn beams_per_line(&self) -> usize {
        (self.beam_fov_deg / self.beam_step_deg).round() as usize + 1
    }
}

/// One ground-truth surface: an id plus a convex polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFacet {
    pub id: u32,
    pub polygon: Polygon3,
}

/// A polygonal environment with unique facet ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneModelRaw", into = "SceneModelRaw")]
pub struct SceneModel {
    name: String,
    facets: Vec<SceneFacet>,
}

/// Serialization shape: `{name, facets: [{id, vertices: [[x,y,z],...]}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneModelRaw {
    name: String,
    facets: Vec<SceneFacetRaw>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneFacetRaw {
    id: u32,
    vertices: Vec<Point3>,
}

impl SceneModel {
    pub fn new(name: impl Into<String>, facets: Vec<SceneFacet>) -> Result<Self, ScanError> {
        let mut seen = std::collections::HashSet::new();
        for f in &facets {
            if !seen.insert(f.id) {
                return Err(ScanError::InvalidScene(format!(
                    "duplicate facet id {}",
                    f.id
                )));
            }
        }
        Ok(SceneModel {
            name: name.into(),
            facets,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn facets(&self) -> &[SceneFacet] {
        &self.facets
    }

    pub fn facet_by_id(&self, id: u32) -> Option<&SceneFacet> {
        self.facets.iter().find(|f| f.id == id)
    }
}

impl TryFrom<SceneModelRaw> for SceneModel {
    type Error = ScanError;
    fn try_from(raw: SceneModelRaw) -> Result<Self, ScanError> {
        let mut facets = Vec::with_capacity(raw.facets.len());
        for f in raw.facets {
            let polygon = Polygon3::new(f.vertices)
                .map_err(|e| ScanError::InvalidScene(format!("facet {}: {}", f.id, e)))?;
            facets.push(SceneFacet { id: f.id, polygon });
        }
        SceneModel::new(raw.name, facets)
    }
}

impl From<SceneModel> for SceneModelRaw {
    fn from(scene: SceneModel) -> Self {
        SceneModelRaw {
            name: scene.name,
            facets: scene
                .facets
                .into_iter()
                .map(|f| SceneFacetRaw {
                    id: f.id,
                    vertices: f.polygon.vertices().to_vec(),
                })
                .collect(),
        }
    }
}

/// A simulated scan: the cloud plus, for each returned point, the id of the
/// facet that produced it (`None` is reserved for no-return records; the
/// simulator drops no-return beams, so it always writes `Some`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub cloud: PointCloud,
    pub provenance: Vec<Option<u32>>,
}

/// Total number of beams fired: yaw_steps x beams_per_line.
pub fn scan_point_count(config: &ScannerConfig) -> usize {
    config.yaw_steps() * config.beams_per_line()
}

/// Beam direction for a pan angle `yaw_deg` and in-fan angle `beam_deg`.
///
/// The in-plane beam (cos b, sin b, 0) is tilted about the sensor y-axis by
/// `pitch_deg` (positive pitch points the fan's center downward), then panned
/// about the world z-axis by `yaw_deg`.
pub fn ray_direction(config: &ScannerConfig, yaw_deg: f64, beam_deg: f64) -> Vector3 {
    let b = beam_deg.to_radians();
    let p = config.pitch_deg.to_radians();
    let y = yaw_deg.to_radians();
    // Tilt about sensor y: (cos b, sin b, 0) -> (cos b cos p, sin b, -cos b sin p).
    let tx = b.cos() * p.cos();
    let ty = b.sin();
    let tz = -b.cos() * p.sin();
    // Pan about world z.
    Vector3::new(
        y.cos() * tx - y.sin() * ty,
        y.sin() * tx + y.cos() * ty,
        tz,
    )
}

/// Per-facet geometry cached for raycasting.
struct FacetCache {
    id: u32,
    normal: Vector3,
    offset: f64,
    frame_origin: Point3,
    u: Vector3,
    v: Vector3,
    verts2d: Vec<Point2>,
}

fn build_facet_cache(scene: &SceneModel) -> Vec<FacetCache> {
    scene
        .facets()
        .iter()
        .map(|f| {
            let plane = f.polygon.plane();
            let (u, v) = plane_basis(&plane);
            let frame_origin = f.polygon.vertices()[0];
            let verts2d = f
                .polygon
                .vertices()
                .iter()
                .map(|p| {
                    let d = *p - frame_origin;
                    Point2::new(d.dot(u), d.dot(v))
                })
                .collect();
            FacetCache {
                id: f.id,
                normal: plane.normal,
                offset: plane.offset,
                frame_origin,
                u,
                v,
                verts2d,
            }
        })
        .collect()
}

/// Nearest facet hit along `origin + t*dir` with `t` in (MIN_RAY_T, max_range].
/// Ties on `t` go to the earlier facet in scene order.
fn intersect_cached(
    origin: Point3,
    dir: Vector3,
    facets: &[FacetCache],
    max_range: f64,
) -> Option<(f64, u32)> {
    let mut best: Option<(f64, u32)> = None;
    let o = origin.to_vector();
    for f in facets {
        let denom = f.normal.dot(dir);
        if denom.abs() <= 1e-12 {
            continue; // parallel (includes rays lying in the plane)
        }
        let t = (f.offset - f.normal.dot(o)) / denom;
        if t <= MIN_RAY_T || t > max_range {
            continue;
        }
        if let Some((bt, _)) = best {
            if t >= bt {
                continue;
            }
        }
        let p = origin + dir * t;
        let d = p - f.frame_origin;
        let q = Point2::new(d.dot(f.u), d.dot(f.v));
        if distance_to_convex_polygon(&f.verts2d, q) <= FACET_EDGE_TOL {
            best = Some((t, f.id));
        }
    }
    best
}

/// Nearest intersection of a ray with the scene, or `None`.
pub fn intersect_ray_scene(
    origin: Point3,
    dir: Vector3,
    scene: &SceneModel,
    max_range: f64,
) -> Option<(Point3, u32)> {
    let facets = build_facet_cache(scene);
    intersect_cached(origin, dir, &facets, max_range).map(|(t, id)| (origin + dir * t, id))
}

/// Runs a full 2-DOF scan: pans through the yaw range, fires the beam fan at
/// each pan position, and records every hit with Gaussian along-ray range
/// noise. No-return beams are dropped. Deterministic given `config.seed`.
pub fn simulate_scan(scene: &SceneModel, config: &ScannerConfig, sensor_origin: Point3) -> ScanResult {
    config.validate().expect("valid scanner config");
    let facets = build_facet_cache(scene);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = if config.noise_sigma_m > 0.0 {
        Some(Normal::new(0.0, config.noise_sigma_m).expect("validated sigma"))
    } else {
        None
    };

    let yaw_steps = config.yaw_steps();
    let beams = config.beams_per_line();
    let mut points = Vec::new();
    let mut provenance = Vec::new();
    for i in 0..yaw_steps {
        let yaw = config.yaw_start_deg + i as f64 * config.yaw_step_deg;
        for j in 0..beams {
            let beam = -config.beam_fov_deg / 2.0 + j as f64 * config.beam_step_deg;
            let dir = ray_direction(config, yaw, beam);
            if let Some((t, id)) = intersect_cached(sensor_origin, dir, &facets, config.max_range_m)
            {
                let t = match &noise {
                    Some(n) => t + n.sample(&mut rng),
                    None => t,
                };
                points.push(sensor_origin + dir * t);
                provenance.push(Some(id));
            }
        }
    }
    ScanResult {
        cloud: PointCloud::from_points(points),
        provenance,
    }
}
