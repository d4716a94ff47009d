//! Plane integration and hull rendering: merge overlapping detected planes,
//! project inliers into the plane, and trace their convex hull with Graham's
//! scan.

use crate::geom::{
    angle_between, fit_plane_least_squares, plane_basis, PlaneModel, Point2, Point3, PointCloud,
    Polygon2, Polygon3, Vector3,
};
use thiserror::Error;

/// Cross products with magnitude at or below this count as a non-left turn,
/// so collinear boundary points are discarded (strict convexity).
const TURN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HullError {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
}

/// A merged plane rendered as the convex hull of its inliers.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarRegion {
    pub plane: PlaneModel,
    pub hull: Polygon3,
    /// Positions (in the pre-merge plane list) this region came from.
    pub source_plane_ids: Vec<usize>,
}

/// Regions plus the number of planes dropped for degenerate projections.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    pub regions: Vec<PlanarRegion>,
    pub degenerate_dropped: usize,
}

/// Merged planes together with the member positions of each merged group
/// (indices into the input plane list, ascending; groups ordered by their
/// smallest member).
#[derive(Debug, Clone, PartialEq)]
pub struct MergeResult {
    pub planes: Vec<PlaneModel>,
    pub groups: Vec<Vec<usize>>,
}

#[derive(Clone, Copy)]
struct Aabb {
    min: [f64; 3],
    max: [f64; 3],
}

fn inlier_aabb(plane: &PlaneModel, cloud: &PointCloud) -> Option<Aabb> {
    let mut it = plane.inliers.iter().map(|&i| cloud.points[i]);
    let first = it.next()?;
    let mut bb = Aabb {
        min: [first.x, first.y, first.z],
        max: [first.x, first.y, first.z],
    };
    for p in it {
        for (a, &v) in [p.x, p.y, p.z].iter().enumerate() {
            bb.min[a] = bb.min[a].min(v);
            bb.max[a] = bb.max[a].max(v);
        }
    }
    Some(bb)
}

fn aabbs_intersect(a: &Aabb, b: &Aabb) -> bool {
    (0..3).all(|i| a.min[i] <= b.max[i] && b.min[i] <= a.max[i])
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins so group identity is order-independent.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Merges planes that describe the same surface and returns the merged
/// groups alongside the planes.
///
/// Planes i and j join when their normals agree within `angle_eps`, their
/// offsets within `dist_eps`, and their inlier bounding boxes intersect;
/// merging is the transitive closure. Groups of two or more are refit over
/// the union of their inliers; singletons pass through unchanged.
pub fn merge_overlapping_detailed(
    planes: &[PlaneModel],
    cloud: &PointCloud,
    angle_eps: f64,
    dist_eps: f64,
) -> MergeResult {
    let n = planes.len();
    let boxes: Vec<Option<Aabb>> = planes.iter().map(|p| inlier_aabb(p, cloud)).collect();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let (Some(bi), Some(bj)) = (&boxes[i], &boxes[j]) else {
                continue;
            };
            if angle_between(planes[i].normal, planes[j].normal) <= angle_eps
                && (planes[i].offset - planes[j].offset).abs() <= dist_eps
                && aabbs_intersect(bi, bj)
            {
                uf.union(i, j);
            }
        }
    }

    // Collect groups ordered by smallest member.
    let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = uf.find(i);
        by_root.entry(r).or_default().push(i);
    }

    let mut merged = Vec::with_capacity(by_root.len());
    let mut groups = Vec::with_capacity(by_root.len());
    for (_, members) in by_root {
        if members.len() == 1 {
            merged.push(planes[members[0]].clone());
        } else {
            let mut union: Vec<usize> = members
                .iter()
                .flat_map(|&m| planes[m].inliers.iter().copied())
                .collect();
            union.sort_unstable();
            union.dedup();
            let pts: Vec<Point3> = union.iter().map(|&i| cloud.points[i]).collect();
            let refit = fit_plane_least_squares(&pts).unwrap_or_else(|_| {
                // Ill-conditioned union: keep the first member's geometry.
                planes[members[0]].clone()
            });
            merged.push(refit.with_inliers(union));
        }
        groups.push(members);
    }
    MergeResult {
        planes: merged,
        groups,
    }
}

/// [`merge_overlapping_detailed`] without the group bookkeeping.
pub fn merge_overlapping(
    planes: &[PlaneModel],
    cloud: &PointCloud,
    angle_eps: f64,
    dist_eps: f64,
) -> Vec<PlaneModel> {
    merge_overlapping_detailed(planes, cloud, angle_eps, dist_eps).planes
}

/// Projects points into the plane's 2D frame: coordinates are
/// `((p - c) . u, (p - c) . v)` with `c` the centroid of `points` and
/// `(u, v)` the deterministic basis from [`plane_basis`].
pub fn project_to_plane_2d(plane: &PlaneModel, points: &[Point3]) -> Vec<Point2> {
    project_with_frame(plane, points).0
}

/// 2D projection plus the frame (centroid, u, v) needed to lift results back.
fn project_with_frame(
    plane: &PlaneModel,
    points: &[Point3],
) -> (Vec<Point2>, Point3, Vector3, Vector3) {
    let (u, v) = plane_basis(plane);
    if points.is_empty() {
        return (Vec::new(), Point3::new(0.0, 0.0, 0.0), u, v);
    }
    let mut acc = Vector3::new(0.0, 0.0, 0.0);
    for p in points {
        acc = acc + p.to_vector();
    }
    let acc = acc * (1.0 / points.len() as f64);
    let c = Point3::new(acc.x, acc.y, acc.z);
    let coords = points
        .iter()
        .map(|p| {
            let d = *p - c;
            Point2::new(d.dot(u), d.dot(v))
        })
        .collect();
    (coords, c, u, v)
}

/// Exactly-signed orientation of the triple (o, a, b): positive if CCW,
/// negative if CW, zero only for true collinearity. Plain floating-point
/// cross products can round to zero for nearly collinear triples, which
/// makes an angular comparator intransitive; the adaptive-precision
/// predicate restores a genuine total order.
fn orient_exact(o: Point2, a: Point2, b: Point2) -> f64 {
    robust::orient2d(
        robust::Coord { x: o.x, y: o.y },
        robust::Coord { x: a.x, y: a.y },
        robust::Coord { x: b.x, y: b.y },
    )
}

/// Convex hull by Graham's scan: lowest-y (then lowest-x) pivot, polar-angle
/// sort (nearer first on ties), strictly-left turn test. Collinear boundary
/// points are discarded, so the result is strictly convex and CCW.
pub fn graham_scan(points: &[Point2]) -> Result<Polygon2, HullError> {
    // Exact duplicates would break the sort's distance tie-break.
    let mut distinct: Vec<Point2> = points.to_vec();
    distinct.sort_unstable_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    distinct.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    if distinct.len() < 3 {
        return Err(HullError::DegenerateInput("fewer than 3 distinct points"));
    }

    let pivot_pos = distinct
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)))
        .map(|(i, _)| i)
        .expect("non-empty");
    let pivot = distinct.swap_remove(pivot_pos);

    let cross = |o: Point2, a: Point2, b: Point2| -> f64 {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let d2 = |a: Point2, b: Point2| -> f64 {
        let dx = a.x - b.x;
        let dy = a.y - b.y;
        dx * dx + dy * dy
    };
    // The pivot minimizes (y, x), so every direction from it lies in the
    // upper half-plane (or on the +x axis) and the exact cross sign is a
    // transitive angular order; same-ray points fall back to distance.
    distinct.sort_unstable_by(|&a, &b| {
        let c = orient_exact(pivot, a, b);
        if c > 0.0 {
            std::cmp::Ordering::Less
        } else if c < 0.0 {
            std::cmp::Ordering::Greater
        } else {
            d2(pivot, a).total_cmp(&d2(pivot, b))
        }
    });

    let mut stack: Vec<Point2> = Vec::with_capacity(distinct.len() + 1);
    stack.push(pivot);
    for &q in &distinct {
        while stack.len() >= 2 {
            let a = stack[stack.len() - 2];
            let b = stack[stack.len() - 1];
            if cross(a, b, q) <= TURN_TOL {
                stack.pop();
            } else {
                break;
            }
        }
        stack.push(q);
    }
    if stack.len() < 3 {
        return Err(HullError::DegenerateInput("all points collinear"));
    }
    Ok(Polygon2::new(stack).expect("Graham's scan emits a strictly convex CCW chain"))
}

/// Builds one region per plane: project the inliers, hull them, and lift the
/// hull back onto the plane. Planes with fewer than 3 inliers or degenerate
/// (collinear) projections are dropped and counted.
pub fn build_regions(planes: &[PlaneModel], cloud: &PointCloud) -> RegionSet {
    let sources: Vec<Vec<usize>> = (0..planes.len()).map(|i| vec![i]).collect();
    build_regions_with_sources(planes, &sources, cloud)
}

/// [`build_regions`] for merged planes, carrying each merged group's member
/// positions into `source_plane_ids`.
pub fn build_regions_from_merge(merge: &MergeResult, cloud: &PointCloud) -> RegionSet {
    build_regions_with_sources(&merge.planes, &merge.groups, cloud)
}

fn build_regions_with_sources(
    planes: &[PlaneModel],
    sources: &[Vec<usize>],
    cloud: &PointCloud,
) -> RegionSet {
    assert_eq!(planes.len(), sources.len());
    let mut regions = Vec::new();
    let mut dropped = 0usize;
    for (plane, source) in planes.iter().zip(sources) {
        let pts: Vec<Point3> = plane.inliers.iter().map(|&i| cloud.points[i]).collect();
        if pts.len() < 3 {
            dropped += 1;
            continue;
        }
        let (flat, c, u, v) = project_with_frame(plane, &pts);
        let hull2 = match graham_scan(&flat) {
            Ok(h) => h,
            Err(_) => {
                dropped += 1;
                continue;
            }
        };
        // Lift through the centroid's projection onto the plane so every
        // hull vertex lands exactly on it.
        let c_on_plane = c - plane.normal * plane.signed_distance(c);
        let verts3: Vec<Point3> = hull2
            .vertices()
            .iter()
            .map(|q| c_on_plane + u * q.x + v * q.y)
            .collect();
        match Polygon3::new(verts3) {
            Ok(hull) => regions.push(PlanarRegion {
                plane: plane.clone(),
                hull,
                source_plane_ids: source.clone(),
            }),
            Err(_) => dropped += 1,
        }
    }
    RegionSet {
        regions,
        degenerate_dropped: dropped,
    }
}
