//! Five built-in test environments: a box room, a partitioned room, an
//! L-shaped hall, a narrow corridor, and a cluttered room with interior
//! slabs. Each comes with a recommended sensor position.

use crate::geom::{Point3, Polygon3};
use crate::scan::{SceneFacet, SceneModel};

/// A built-in scene plus the sensor position its dimensions were tuned for.
#[derive(Debug, Clone)]
pub struct BuiltinScene {
    pub scene: SceneModel,
    pub sensor_origin: Point3,
}

/// Names accepted by [`builtin_scene`], in canonical order.
pub const BUILTIN_SCENE_NAMES: [&str; 5] = ["box", "partition", "lhall", "corridor", "cluttered"];

/// Looks up a built-in scene by name.
pub fn builtin_scene(name: &str) -> Option<BuiltinScene> {
    match name {
        "box" => Some(box_scene()),
        "partition" => Some(partition_scene()),
        "lhall" => Some(lhall_scene()),
        "corridor" => Some(corridor_scene()),
        "cluttered" => Some(cluttered_scene()),
        _ => None,
    }
}

/// All built-in scenes in canonical order.
pub fn all_builtin_scenes() -> Vec<BuiltinScene> {
    BUILTIN_SCENE_NAMES
        .iter()
        .map(|n| builtin_scene(n).expect("canonical name"))
        .collect()
}

fn quad(a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]) -> Polygon3 {
    Polygon3::new(vec![a.into(), b.into(), c.into(), d.into()]).expect("valid built-in facet")
}

/// Horizontal rectangle [x0,x1] x [y0,y1] at height z.
fn hrect(x0: f64, x1: f64, y0: f64, y1: f64, z: f64) -> Polygon3 {
    quad([x0, y0, z], [x1, y0, z], [x1, y1, z], [x0, y1, z])
}

/// Vertical wall along x in [x0,x1] at fixed y, from z=0 to z=h.
fn wall_y(y: f64, x0: f64, x1: f64, h: f64) -> Polygon3 {
    quad([x0, y, 0.0], [x1, y, 0.0], [x1, y, h], [x0, y, h])
}

/// Vertical wall along y in [y0,y1] at fixed x, from z=0 to z=h.
fn wall_x(x: f64, y0: f64, y1: f64, h: f64) -> Polygon3 {
    quad([x, y0, 0.0], [x, y1, 0.0], [x, y1, h], [x, y0, h])
}

/// Closed box room [0,w] x [0,d] x [0,h]: floor 0, ceiling 1, walls x=0 (2),
/// x=w (3), y=0 (4), y=d (5).
fn box_room_facets(w: f64, d: f64, h: f64) -> Vec<SceneFacet> {
    vec![
        SceneFacet {
            id: 0,
            polygon: hrect(0.0, w, 0.0, d, 0.0),
        },
        SceneFacet {
            id: 1,
            polygon: hrect(0.0, w, 0.0, d, h),
        },
        SceneFacet {
            id: 2,
            polygon: wall_x(0.0, 0.0, d, h),
        },
        SceneFacet {
            id: 3,
            polygon: wall_x(w, 0.0, d, h),
        },
        SceneFacet {
            id: 4,
            polygon: wall_y(0.0, 0.0, w, h),
        },
        SceneFacet {
            id: 5,
            polygon: wall_y(d, 0.0, w, h),
        },
    ]
}

/// Closed 10 x 8 x 2.5 m box room; sensor near the center at 1.5 m.
fn box_scene() -> BuiltinScene {
    BuiltinScene {
        scene: SceneModel::new("box", box_room_facets(10.0, 8.0, 2.5)).expect("valid scene"),
        sensor_origin: Point3::new(5.0, 4.0, 1.5),
    }
}

/// The box room with a partition wall at x=6 spanning y in [0,5].
fn partition_scene() -> BuiltinScene {
    let mut facets = box_room_facets(10.0, 8.0, 2.5);
    facets.push(SceneFacet {
        id: 6,
        polygon: wall_x(6.0, 0.0, 5.0, 2.5),
    });
    BuiltinScene {
        scene: SceneModel::new("partition", facets).expect("valid scene"),
        sensor_origin: Point3::new(3.0, 4.0, 1.5),
    }
}

/// L-shaped hall: a 12 x 5 m arm plus a 5 x 4 m side arm, 2.5 m high.
/// Floor plan outline (0,0)-(12,0)-(12,5)-(5,5)-(5,9)-(0,9).
fn lhall_scene() -> BuiltinScene {
    let h = 2.5;
    let facets = vec![
        SceneFacet {
            id: 0,
            polygon: hrect(0.0, 12.0, 0.0, 5.0, 0.0),
        },
        SceneFacet {
            id: 1,
            polygon: hrect(0.0, 5.0, 5.0, 9.0, 0.0),
        },
        SceneFacet {
            id: 2,
            polygon: hrect(0.0, 12.0, 0.0, 5.0, h),
        },
        SceneFacet {
            id: 3,
            polygon: hrect(0.0, 5.0, 5.0, 9.0, h),
        },
        SceneFacet {
            id: 4,
            polygon: wall_y(0.0, 0.0, 12.0, h),
        },
        SceneFacet {
            id: 5,
            polygon: wall_x(12.0, 0.0, 5.0, h),
        },
        SceneFacet {
            id: 6,
            polygon: wall_y(5.0, 5.0, 12.0, h),
        },
        SceneFacet {
            id: 7,
            polygon: wall_x(5.0, 5.0, 9.0, h),
        },
        SceneFacet {
            id: 8,
            polygon: wall_y(9.0, 0.0, 5.0, h),
        },
        SceneFacet {
            id: 9,
            polygon: wall_x(0.0, 0.0, 9.0, h),
        },
    ];
    BuiltinScene {
        scene: SceneModel::new("lhall", facets).expect("valid scene"),
        sensor_origin: Point3::new(6.0, 2.5, 1.5),
    }
}

/// Narrow 14 x 2 x 2.5 m corridor; wall returns dominate the cloud.
fn corridor_scene() -> BuiltinScene {
    BuiltinScene {
        scene: SceneModel::new("corridor", box_room_facets(14.0, 2.0, 2.5)).expect("valid scene"),
        sensor_origin: Point3::new(7.0, 1.0, 1.5),
    }
}

/// The box room with three horizontal interior slabs (table/box tops) that
/// shed small planar patches and occlude parts of the floor.
fn cluttered_scene() -> BuiltinScene {
    let mut facets = box_room_facets(10.0, 8.0, 2.5);
    facets.push(SceneFacet {
        id: 6,
        polygon: hrect(1.5, 3.5, 1.5, 2.7, 0.75),
    });
    facets.push(SceneFacet {
        id: 7,
        polygon: hrect(6.5, 8.5, 5.5, 6.7, 0.45),
    });
    facets.push(SceneFacet {
        id: 8,
        polygon: hrect(7.0, 8.2, 1.5, 3.0, 1.05),
    });
    BuiltinScene {
        scene: SceneModel::new("cluttered", facets).expect("valid scene"),
        sensor_origin: Point3::new(4.5, 4.0, 1.5),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::point_plane_distance;
    use crate::scan::{scan_point_count, simulate_scan, ScannerConfig};

    #[test]
    fn lookup_and_names_agree() {
        for name in BUILTIN_SCENE_NAMES {
            let b = builtin_scene(name).unwrap();
            assert_eq!(b.scene.name(), name);
        }
        assert!(builtin_scene("warehouse").is_none());
        assert_eq!(all_builtin_scenes().len(), 5);
    }

    #[test]
    fn facet_counts() {
        assert_eq!(builtin_scene("box").unwrap().scene.facets().len(), 6);
        assert_eq!(builtin_scene("partition").unwrap().scene.facets().len(), 7);
        assert_eq!(builtin_scene("lhall").unwrap().scene.facets().len(), 10);
        assert_eq!(builtin_scene("corridor").unwrap().scene.facets().len(), 6);
        assert_eq!(builtin_scene("cluttered").unwrap().scene.facets().len(), 9);
    }

    /// The rooms are closed around the scan coverage, so every beam returns:
    /// the cloud has exactly scan_point_count points and the density ratio
    /// between 1-degree and 6-degree scans is exactly 6.
    #[test]
    fn closed_scenes_return_every_beam() {
        let ld = ScannerConfig {
            noise_sigma_m: 0.0,
            ..ScannerConfig::default()
        };
        for b in all_builtin_scenes() {
            let scan = simulate_scan(&b.scene, &ld, b.sensor_origin);
            assert_eq!(
                scan.cloud.len(),
                scan_point_count(&ld),
                "scene {}",
                b.scene.name()
            );
        }

        let hd = ScannerConfig {
            yaw_step_deg: 1.0,
            noise_sigma_m: 0.0,
            ..ScannerConfig::default()
        };
        let b = builtin_scene("box").unwrap();
        let scan_hd = simulate_scan(&b.scene, &hd, b.sensor_origin);
        let scan_ld = simulate_scan(&b.scene, &ld, b.sensor_origin);
        assert_eq!(scan_hd.cloud.len(), 324_300);
        assert_eq!(scan_ld.cloud.len(), 54_050);
        let ratio = scan_hd.cloud.len() as f64 / scan_ld.cloud.len() as f64;
        assert!((5.5..=6.5).contains(&ratio));
    }

    /// Noise-free returns sit exactly on their source facet's plane, and in
    /// the box room every facet collects a healthy number of returns.
    #[test]
    fn box_scene_covers_all_six_facets() {
        let cfg = ScannerConfig {
            noise_sigma_m: 0.0,
            ..ScannerConfig::default()
        };
        let b = builtin_scene("box").unwrap();
        let scan = simulate_scan(&b.scene, &cfg, b.sensor_origin);
        let mut per_facet = std::collections::HashMap::new();
        for (p, prov) in scan.cloud.points.iter().zip(&scan.provenance) {
            let id = prov.expect("closed scene");
            let facet = b.scene.facet_by_id(id).unwrap();
            assert!(point_plane_distance(&facet.polygon.plane(), *p) <= 1e-9);
            *per_facet.entry(id).or_insert(0usize) += 1;
        }
        for facet in b.scene.facets() {
            let n = per_facet.get(&facet.id).copied().unwrap_or(0);
            assert!(
                n >= 3_000,
                "facet {} got only {} returns at low density",
                facet.id,
                n
            );
        }
    }

    #[test]
    fn scenes_round_trip_through_json() {
        for b in all_builtin_scenes() {
            let json = serde_json::to_string(&b.scene).unwrap();
            let back: SceneModel = serde_json::from_str(&json).unwrap();
            assert_eq!(back, b.scene);
        }
    }
}
