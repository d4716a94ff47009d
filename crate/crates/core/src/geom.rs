//! 3D/2D geometric primitives: points, vectors, plane models, polygons,
//! and total-least-squares plane fitting.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Component magnitudes at or below this are treated as zero when picking
/// the sign of a canonical normal, so refit jitter cannot flip orientation.
pub const CANONICAL_EPS: f64 = 1e-12;

/// Errors from geometric constructions.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeomError {
    /// The sampled points do not determine a unique plane.
    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),
    /// A polygon failed its construction invariants.
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
}

/// A position in 3D space, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// A direction or displacement in 3D space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vector3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// A position in a plane's 2D coordinate frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    /// Position vector from the origin.
    pub fn to_vector(self) -> Vector3 {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn distance(self, other: Point3) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Vector3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vector3 { x, y, z }
    }

    pub fn dot(self, other: Vector3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vector3) -> Vector3 {
        Vector3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vector3> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self * (1.0 / n))
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

impl From<[f64; 3]> for Vector3 {
    fn from(a: [f64; 3]) -> Self {
        Vector3::new(a[0], a[1], a[2])
    }
}

impl From<Vector3> for [f64; 3] {
    fn from(v: Vector3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl std::ops::Sub for Point3 {
    type Output = Vector3;
    fn sub(self, rhs: Point3) -> Vector3 {
        Vector3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Add<Vector3> for Point3 {
    type Output = Point3;
    fn add(self, rhs: Vector3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub<Vector3> for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Vector3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Add for Vector3 {
    type Output = Vector3;
    fn add(self, rhs: Vector3) -> Vector3 {
        Vector3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub for Vector3 {
    type Output = Vector3;
    fn sub(self, rhs: Vector3) -> Vector3 {
        Vector3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Mul<f64> for Vector3 {
    type Output = Vector3;
    fn mul(self, s: f64) -> Vector3 {
        Vector3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl std::ops::Neg for Vector3 {
    type Output = Vector3;
    fn neg(self) -> Vector3 {
        Vector3::new(-self.x, -self.y, -self.z)
    }
}

/// An infinite plane `{ x : normal . x = offset }` together with the indices
/// of the cloud points attributed to it.
///
/// The normal is unit length and canonically oriented: the first component of
/// `(z, y, x)` whose magnitude exceeds [`CANONICAL_EPS`] is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneModel {
    pub normal: Vector3,
    /// Signed distance of the plane from the origin along `normal`, meters.
    pub offset: f64,
    /// Indices into the source cloud, ascending, no duplicates.
    pub inliers: Vec<usize>,
}

impl PlaneModel {
    /// Builds a plane from any non-zero normal, normalizing and canonicalizing.
    pub fn new(normal: Vector3, offset: f64) -> Self {
        let unit = normal
            .normalized()
            .expect("plane normal must be non-zero and finite");
        let scale = offset / normal.norm();
        let (normal, offset) = canonicalize(unit, scale);
        PlaneModel {
            normal,
            offset,
            inliers: Vec::new(),
        }
    }

    pub fn with_inliers(mut self, mut inliers: Vec<usize>) -> Self {
        inliers.sort_unstable();
        inliers.dedup();
        self.inliers = inliers;
        self
    }

    /// Signed distance from `p` to the plane (positive on the normal side).
    pub fn signed_distance(&self, p: Point3) -> f64 {
        self.normal.dot(p.to_vector()) - self.offset
    }
}

/// Flips `(normal, offset)` so the first non-negligible component of
/// `(z, y, x)` is positive. Both orientations describe the same plane.
fn canonicalize(normal: Vector3, offset: f64) -> (Vector3, f64) {
    let flip = if normal.z.abs() > CANONICAL_EPS {
        normal.z < 0.0
    } else if normal.y.abs() > CANONICAL_EPS {
        normal.y < 0.0
    } else {
        normal.x < 0.0
    };
    if flip {
        (-normal, -offset)
    } else {
        (normal, offset)
    }
}

/// Absolute distance from a point to a plane, meters.
pub fn point_plane_distance(plane: &PlaneModel, p: Point3) -> f64 {
    plane.signed_distance(p).abs()
}

/// Acute angle between two directions, in radians on `[0, pi/2]`.
///
/// Sign-insensitive: a vector and its negation are at angle zero.
pub fn angle_between(a: Vector3, b: Vector3) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    debug_assert!(na > 0.0 && nb > 0.0, "angle_between needs non-zero vectors");
    let cos = (a.dot(b) / (na * nb)).clamp(-1.0, 1.0);
    cos.abs().acos()
}

/// Exact plane through three points.
///
/// Degenerate (collinear or coincident) samples are rejected: the triangle's
/// cross-product norm must exceed `1e-12` times the product of its edge
/// lengths.
pub fn plane_from_points(p1: Point3, p2: Point3, p3: Point3) -> Result<PlaneModel, GeomError> {
    let e1 = p2 - p1;
    let e2 = p3 - p1;
    let n = e1.cross(e2);
    let edge_scale = e1.norm() * e2.norm();
    if edge_scale <= 0.0 || n.norm() < 1e-12 * edge_scale {
        return Err(GeomError::DegenerateSample(
            "three sampled points are collinear or coincident",
        ));
    }
    let unit = n.normalized().expect("non-degenerate cross product");
    Ok(PlaneModel::new(unit, unit.dot(p1.to_vector())))
}

/// Centroid + scatter-matrix eigendecomposition used by the fitting routines.
/// Eigenvalues are returned ascending with their paired eigenvectors.
fn scatter_eigen(points: &[Point3]) -> (Point3, [f64; 3], [Vector3; 3]) {
    let n = points.len() as f64;
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut cz = 0.0;
    for p in points {
        cx += p.x;
        cy += p.y;
        cz += p.z;
    }
    let c = Point3::new(cx / n, cy / n, cz / n);

    let mut m: Matrix3<f64> = Matrix3::zeros();
    for p in points {
        let d = *p - c;
        m[(0, 0)] += d.x * d.x;
        m[(0, 1)] += d.x * d.y;
        m[(0, 2)] += d.x * d.z;
        m[(1, 1)] += d.y * d.y;
        m[(1, 2)] += d.y * d.z;
        m[(2, 2)] += d.z * d.z;
    }
    m[(1, 0)] = m[(0, 1)];
    m[(2, 0)] = m[(0, 2)];
    m[(2, 1)] = m[(1, 2)];

    let eig = SymmetricEigen::new(m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = [
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    ];
    let col = |i: usize| {
        let v = eig.eigenvectors.column(order[i]);
        Vector3::new(v[0], v[1], v[2])
    };
    (c, values, [col(0), col(1), col(2)])
}

/// Total-least-squares plane for the smallest-eigenvalue direction of the
/// scatter matrix, with no degeneracy check. Used for normal estimation,
/// where a best-effort direction is always wanted.
pub(crate) fn fit_plane_unchecked(points: &[Point3]) -> PlaneModel {
    let (c, _, vecs) = scatter_eigen(points);
    let normal = vecs[0].normalized().unwrap_or(Vector3::new(0.0, 0.0, 1.0));
    PlaneModel::new(normal, normal.dot(c.to_vector()))
}

/// Total-least-squares plane fit: centroid plus the smallest-eigenvalue
/// eigenvector of the 3x3 scatter matrix.
///
/// Fails when the points do not determine a unique plane: fewer than three
/// points, or the two smallest scatter eigenvalues equal within `1e-12`
/// relative to the largest (collinear or isotropic input).
pub fn fit_plane_least_squares(points: &[Point3]) -> Result<PlaneModel, GeomError> {
    if points.len() < 3 {
        return Err(GeomError::DegenerateSample("need at least 3 points"));
    }
    let (c, values, vecs) = scatter_eigen(points);
    let scale = values[2].abs().max(values[1].abs());
    if scale <= 0.0 || (values[1] - values[0]).abs() <= 1e-12 * scale {
        return Err(GeomError::DegenerateSample(
            "points are collinear or otherwise do not determine a plane",
        ));
    }
    let normal = vecs[0]
        .normalized()
        .ok_or(GeomError::DegenerateSample("zero eigenvector"))?;
    Ok(PlaneModel::new(normal, normal.dot(c.to_vector())))
}

/// A convex polygon in a plane's 2D frame: at least 3 vertices, counter-
/// clockwise, strictly convex (no repeated or collinear vertices).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2 {
    vertices: Vec<Point2>,
}

impl Polygon2 {
    /// Validates convexity and orientation; clockwise input is reversed.
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeomError> {
        if vertices.len() < 3 {
            return Err(GeomError::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(GeomError::InvalidPolygon(
                "non-finite vertex coordinate".into(),
            ));
        }
        let area2 = signed_area2(&vertices);
        let mut vertices = vertices;
        if area2 < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
            if cross <= 0.0 {
                return Err(GeomError::InvalidPolygon(format!(
                    "vertices are not strictly convex at index {}",
                    (i + 1) % n
                )));
            }
        }
        Ok(Polygon2 { vertices })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area2(&self.vertices) * 0.5
    }

    /// True when `p` lies inside or within `tol` of the polygon.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        distance_to_convex_polygon(&self.vertices, p) <= tol
    }
}

/// Twice the signed area (positive for counter-clockwise order).
fn signed_area2(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        s += a.x * b.y - a.y * b.x;
    }
    s
}

/// Distance from a point to a convex polygon (either winding): zero inside,
/// otherwise the distance to the nearest edge segment.
pub fn distance_to_convex_polygon(vertices: &[Point2], p: Point2) -> f64 {
    let n = vertices.len();
    let mut has_pos = false;
    let mut has_neg = false;
    let mut min_d2 = f64::INFINITY;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if cross > 0.0 {
            has_pos = true;
        } else if cross < 0.0 {
            has_neg = true;
        }
        // Squared distance from p to segment ab.
        let abx = b.x - a.x;
        let aby = b.y - a.y;
        let apx = p.x - a.x;
        let apy = p.y - a.y;
        let len2 = abx * abx + aby * aby;
        let t = if len2 > 0.0 {
            ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let dx = apx - t * abx;
        let dy = apy - t * aby;
        min_d2 = min_d2.min(dx * dx + dy * dy);
    }
    if has_pos && has_neg {
        min_d2.sqrt()
    } else {
        0.0
    }
}

/// A convex planar polygon embedded in 3D: at least 3 vertices, coplanar
/// within `1e-6` m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point3>", into = "Vec<Point3>")]
pub struct Polygon3 {
    vertices: Vec<Point3>,
}

impl Polygon3 {
    const COPLANARITY_TOL: f64 = 1e-6;

    /// Validates vertex count, finiteness, coplanarity, and convexity.
    pub fn new(vertices: Vec<Point3>) -> Result<Self, GeomError> {
        if vertices.len() < 3 {
            return Err(GeomError::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::InvalidPolygon(
                "non-finite vertex coordinate".into(),
            ));
        }
        let normal = newell_normal(&vertices).ok_or_else(|| {
            GeomError::InvalidPolygon("vertices are collinear or coincident".into())
        })?;
        let offset = {
            let mut s = 0.0;
            for v in &vertices {
                s += normal.dot(v.to_vector());
            }
            s / vertices.len() as f64
        };
        for v in &vertices {
            if (normal.dot(v.to_vector()) - offset).abs() > Self::COPLANARITY_TOL {
                return Err(GeomError::InvalidPolygon(format!(
                    "vertices deviate from a common plane by more than {} m",
                    Self::COPLANARITY_TOL
                )));
            }
        }
        // Convexity: check turns in the polygon's own 2D frame.
        let plane = PlaneModel::new(normal, offset);
        let (u, v) = plane_basis(&plane);
        let origin = vertices[0];
        let flat: Vec<Point2> = vertices
            .iter()
            .map(|p| {
                let d = *p - origin;
                Point2::new(d.dot(u), d.dot(v))
            })
            .collect();
        let n = flat.len();
        let area2 = signed_area2(&flat);
        if area2 == 0.0 {
            return Err(GeomError::InvalidPolygon("polygon has zero area".into()));
        }
        let orient = area2.signum();
        for i in 0..n {
            let a = flat[i];
            let b = flat[(i + 1) % n];
            let c = flat[(i + 2) % n];
            let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
            if cross * orient <= 0.0 {
                return Err(GeomError::InvalidPolygon(format!(
                    "vertices are not strictly convex at index {}",
                    (i + 1) % n
                )));
            }
        }
        Ok(Polygon3 { vertices })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    /// The polygon's supporting plane (canonical orientation, no inliers).
    pub fn plane(&self) -> PlaneModel {
        let normal = newell_normal(&self.vertices).expect("validated polygon");
        let mut s = 0.0;
        for v in &self.vertices {
            s += normal.dot(v.to_vector());
        }
        PlaneModel::new(normal, s / self.vertices.len() as f64)
    }

    /// Arithmetic mean of the vertices.
    pub fn vertex_centroid(&self) -> Point3 {
        let mut c = Vector3::new(0.0, 0.0, 0.0);
        for v in &self.vertices {
            c = c + v.to_vector();
        }
        let c = c * (1.0 / self.vertices.len() as f64);
        Point3::new(c.x, c.y, c.z)
    }
}

impl TryFrom<Vec<Point3>> for Polygon3 {
    type Error = GeomError;
    fn try_from(v: Vec<Point3>) -> Result<Self, GeomError> {
        Polygon3::new(v)
    }
}

impl From<Polygon3> for Vec<Point3> {
    fn from(p: Polygon3) -> Self {
        p.vertices
    }
}

/// Newell's method: robust polygon normal, `None` if it vanishes.
fn newell_normal(vertices: &[Point3]) -> Option<Vector3> {
    let n = vertices.len();
    let mut nx = 0.0;
    let mut ny = 0.0;
    let mut nz = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        nx += (a.y - b.y) * (a.z + b.z);
        ny += (a.z - b.z) * (a.x + b.x);
        nz += (a.x - b.x) * (a.y + b.y);
    }
    Vector3::new(nx, ny, nz).normalized()
}

/// Deterministic orthonormal in-plane basis `(u, v)` for a plane.
///
/// Seeds from the standard axis least aligned with the normal (first axis on
/// ties), then `u = normalize(normal x axis)`, `v = normal x u`.
pub fn plane_basis(plane: &PlaneModel) -> (Vector3, Vector3) {
    let n = plane.normal;
    let axes = [
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.0, 1.0, 0.0),
        Vector3::new(0.0, 0.0, 1.0),
    ];
    let mut best = 0;
    let mut best_align = f64::INFINITY;
    for (i, e) in axes.iter().enumerate() {
        let a = n.dot(*e).abs();
        if a < best_align {
            best_align = a;
            best = i;
        }
    }
    let u = n
        .cross(axes[best])
        .normalized()
        .expect("axis least aligned with a unit normal cannot be parallel to it");
    let v = n.cross(u);
    (u, v)
}

/// A set of scan returns; optional per-point unit normals of the same length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub normals: Option<Vec<Vector3>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Point3>) -> Self {
        PointCloud {
            points,
            normals: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
