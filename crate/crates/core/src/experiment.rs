//! Threshold-sweep experiment harness: scan each environment at two
//! densities, run detection across an inlier-threshold grid with repeated
//! trials, and classify each resulting region as real or a false detection
//! against the simulator's ground truth.

use crate::detect::{detect_planes, estimate_normals, RansacParams};
use crate::geom::{angle_between, distance_to_convex_polygon, plane_basis, Point2, Point3};
use crate::hull::{build_regions, build_regions_from_merge, merge_overlapping_detailed, PlanarRegion};
use crate::scan::{simulate_scan, ScanError, SceneModel, ScannerConfig};
use serde::{Deserialize, Serialize};

/// Scan density, set by the yaw step (1 degree = high, 6 degrees = low).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Density {
    High,
    Low,
}

impl Density {
    pub fn label(self) -> &'static str {
        match self {
            Density::High => "HD",
            Density::Low => "LD",
        }
    }
}

impl std::fmt::Display for Density {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Default high-density threshold grid (low density divides it by 5).
pub const DEFAULT_HD_THRESHOLDS: [usize; 10] = [
    5_000, 10_000, 15_000, 20_000, 30_000, 40_000, 50_000, 60_000, 70_000, 80_000,
];

pub fn default_ld_thresholds() -> Vec<usize> {
    DEFAULT_HD_THRESHOLDS.iter().map(|t| t / 5).collect()
}

/// Everything needed to run one environment's sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub scene: SceneModel,
    pub sensor_origin: Point3,
    pub hd_scanner: ScannerConfig,
    pub ld_scanner: ScannerConfig,
    pub hd_thresholds: Vec<usize>,
    pub ld_thresholds: Vec<usize>,
    pub trials: usize,
    /// RANSAC seed per trial; length must equal `trials`.
    pub trial_seeds: Vec<u64>,
    pub ransac: RansacParams,
    pub merge_angle_eps: f64,
    pub merge_dist_eps: f64,
    pub classify_angle_eps: f64,
    pub classify_dist_eps: f64,
    /// Count planes before merging instead of after.
    pub count_premerge: bool,
}

impl SweepSpec {
    /// A spec with all defaults for the given scene and sensor position:
    /// 1-degree and 6-degree scans, the default threshold grids, five trials
    /// with seeds 0..5.
    pub fn with_defaults(scene: SceneModel, sensor_origin: Point3) -> Self {
        SweepSpec {
            scene,
            sensor_origin,
            hd_scanner: ScannerConfig {
                yaw_step_deg: 1.0,
                ..ScannerConfig::default()
            },
            ld_scanner: ScannerConfig::default(),
            hd_thresholds: DEFAULT_HD_THRESHOLDS.to_vec(),
            ld_thresholds: default_ld_thresholds(),
            trials: 5,
            trial_seeds: (0..5).collect(),
            ransac: RansacParams::default(),
            merge_angle_eps: 0.1,
            merge_dist_eps: 0.05,
            classify_angle_eps: 0.15,
            classify_dist_eps: 0.15,
            count_premerge: false,
        }
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        self.hd_scanner.validate()?;
        self.ld_scanner.validate()?;
        let invalid = |m: &str| Err(ScanError::InvalidConfig(m.into()));
        for (name, list) in [
            ("hd_thresholds", &self.hd_thresholds),
            ("ld_thresholds", &self.ld_thresholds),
        ] {
            if list.len() < 2 {
                return invalid(&format!("{name} needs at least 2 values"));
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return invalid(&format!("{name} must be strictly increasing"));
            }
        }
        if self.trials < 1 {
            return invalid("trials must be at least 1");
        }
        if self.trial_seeds.len() != self.trials {
            return invalid("trial_seeds length must equal trials");
        }
        if self.ransac.validate().is_err() {
            return invalid("invalid base RANSAC parameters");
        }
        for eps in [
            self.merge_angle_eps,
            self.merge_dist_eps,
            self.classify_angle_eps,
            self.classify_dist_eps,
        ] {
            if !(eps > 0.0 && eps.is_finite()) {
                return invalid("merge/classify tolerances must be positive and finite");
            }
        }
        Ok(())
    }

    fn scanner_for(&self, density: Density) -> &ScannerConfig {
        match density {
            Density::High => &self.hd_scanner,
            Density::Low => &self.ld_scanner,
        }
    }

    fn thresholds_for(&self, density: Density) -> &[usize] {
        match density {
            Density::High => &self.hd_thresholds,
            Density::Low => &self.ld_thresholds,
        }
    }
}

/// One grid cell: all trial counts plus their means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub environment: String,
    pub density: Density,
    pub threshold: usize,
    pub plane_counts: Vec<usize>,
    pub false_counts: Vec<usize>,
    pub mean_planes: f64,
    pub mean_false: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn rows_for(&self, density: Density) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.density == density)
    }
}

/// Splits regions into (true, false) counts against the ground-truth scene.
///
/// A region is TRUE if some facet matches it: normals within `angle_eps`,
/// the hull's vertex centroid within `dist_eps` of the facet plane, and the
/// centroid's in-plane projection within the facet polygon dilated by
/// `dist_eps`. Anything else sits in void space and counts as FALSE.
pub fn classify_false_detections(
    regions: &[PlanarRegion],
    scene: &SceneModel,
    angle_eps: f64,
    dist_eps: f64,
) -> (usize, usize) {
    // Facet frames are reused across regions.
    let facet_frames: Vec<_> = scene
        .facets()
        .iter()
        .map(|f| {
            let plane = f.polygon.plane();
            let (u, v) = plane_basis(&plane);
            let origin = f.polygon.vertices()[0];
            let verts2d: Vec<Point2> = f
                .polygon
                .vertices()
                .iter()
                .map(|p| {
                    let d = *p - origin;
                    Point2::new(d.dot(u), d.dot(v))
                })
                .collect();
            (plane, u, v, origin, verts2d)
        })
        .collect();

    let mut true_count = 0usize;
    let mut false_count = 0usize;
    for region in regions {
        let centroid = region.hull.vertex_centroid();
        let matched = facet_frames.iter().any(|(plane, u, v, origin, verts2d)| {
            if angle_between(region.plane.normal, plane.normal) > angle_eps {
                return false;
            }
            if plane.signed_distance(centroid).abs() > dist_eps {
                return false;
            }
            let d = centroid - *origin;
            let q = Point2::new(d.dot(*u), d.dot(*v));
            distance_to_convex_polygon(verts2d, q) <= dist_eps
        });
        if matched {
            true_count += 1;
        } else {
            false_count += 1;
        }
    }
    (true_count, false_count)
}

/// Runs the full sweep: per density, one scan and one normal estimation,
/// then detection/merge/hull/classification per (threshold, trial).
/// Deterministic given the spec's seeds.
pub fn run_threshold_sweep(spec: &SweepSpec) -> SweepReport {
    spec.validate().expect("valid sweep spec");
    let mut rows = Vec::new();
    for density in [Density::High, Density::Low] {
        let scanner = spec.scanner_for(density);
        let scan = simulate_scan(&spec.scene, scanner, spec.sensor_origin);
        let cloud = &scan.cloud;
        // Normals are a property of the cloud, not of the threshold or the
        // trial seed, so they are computed once per density.
        let with_normals = if cloud.len() >= 3 {
            let k = spec.ransac.knn_k.min(cloud.len()).max(3);
            estimate_normals(cloud, k).expect("k clamped to cloud size")
        } else {
            cloud.clone()
        };
        for &threshold in spec.thresholds_for(density) {
            let mut plane_counts = Vec::with_capacity(spec.trials);
            let mut false_counts = Vec::with_capacity(spec.trials);
            for trial in 0..spec.trials {
                let params = RansacParams {
                    min_inliers: threshold,
                    seed: spec.trial_seeds[trial],
                    ..spec.ransac.clone()
                };
                let detection = detect_planes(&with_normals, &params);
                let region_set = if spec.count_premerge {
                    build_regions(&detection.planes, &with_normals)
                } else {
                    let merged = merge_overlapping_detailed(
                        &detection.planes,
                        &with_normals,
                        spec.merge_angle_eps,
                        spec.merge_dist_eps,
                    );
                    build_regions_from_merge(&merged, &with_normals)
                };
                let (t, f) = classify_false_detections(
                    &region_set.regions,
                    &spec.scene,
                    spec.classify_angle_eps,
                    spec.classify_dist_eps,
                );
                plane_counts.push(t + f);
                false_counts.push(f);
            }
            let mean = |xs: &[usize]| xs.iter().sum::<usize>() as f64 / xs.len() as f64;
            rows.push(SweepRow {
                environment: spec.scene.name().to_string(),
                density,
                threshold,
                mean_planes: mean(&plane_counts),
                mean_false: mean(&false_counts),
                plane_counts,
                false_counts,
            });
        }
    }
    SweepReport { rows }
}

/// Smallest swept threshold with zero mean false detections and a positive
/// mean true count, or `None`.
pub fn min_clean_threshold(report: &SweepReport, density: Density) -> Option<usize> {
    let mut rows: Vec<&SweepRow> = report.rows_for(density).collect();
    rows.sort_by_key(|r| r.threshold);
    rows.iter()
        .find(|r| r.mean_false == 0.0 && r.mean_planes - r.mean_false > 0.0)
        .map(|r| r.threshold)
}
