//! File formats: ASCII XYZ and PLY point clouds, scene/planes/regions JSON,
//! and the CSV sidecars (per-point labels, scan provenance, sweep reports).
//!
//! Floating-point values are written in Rust's shortest round-trip decimal
//! form, so outputs are byte-stable and parse back to identical values.

use crate::detect::DetectionResult;
use crate::experiment::SweepReport;
use crate::geom::{PlaneModel, Point3, PointCloud, Vector3};
use crate::hull::RegionSet;
use crate::scan::SceneModel;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
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
    #[error("{path}: unsupported format: {message}")]
    UnsupportedFormat { path: PathBuf, message: String },
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

/// Point-cloud file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    /// One `x y z` line per point.
    Xyz,
    /// ASCII PLY with a vertex element carrying x, y, z properties.
    Ply,
}

impl CloudFormat {
    /// Picks a format from the file extension; anything but `.ply` is XYZ.
    pub fn infer(path: &Path) -> CloudFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("ply") => CloudFormat::Ply,
            _ => CloudFormat::Xyz,
        }
    }
}

impl std::str::FromStr for CloudFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "xyz" => Ok(CloudFormat::Xyz),
            "ply" => Ok(CloudFormat::Ply),
            other => Err(format!("unknown cloud format {other:?} (expected xyz or ply)")),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    let mut f = std::fs::File::create(path).map_err(|e| IoError::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| IoError::io(path, e))
}

pub fn write_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<(), IoError> {
    let mut out = String::new();
    match format {
        CloudFormat::Xyz => {
            for p in &cloud.points {
                writeln!(out, "{} {} {}", p.x, p.y, p.z).expect("string write");
            }
        }
        CloudFormat::Ply => {
            writeln!(out, "ply").unwrap();
            writeln!(out, "format ascii 1.0").unwrap();
            writeln!(out, "element vertex {}", cloud.len()).unwrap();
            writeln!(out, "property float x").unwrap();
            writeln!(out, "property float y").unwrap();
            writeln!(out, "property float z").unwrap();
            writeln!(out, "end_header").unwrap();
            for p in &cloud.points {
                writeln!(out, "{} {} {}", p.x, p.y, p.z).unwrap();
            }
        }
    }
    write_file(path, &out)
}

pub fn read_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud, IoError> {
    let file = std::fs::File::open(path).map_err(|e| IoError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| IoError::io(path, e))?;
        lines.push((i + 1, line));
    }
    match format {
        CloudFormat::Xyz => read_xyz(path, &lines),
        CloudFormat::Ply => read_ply(path, &lines),
    }
}

fn parse_coord(path: &Path, line_no: usize, tok: &str) -> Result<f64, IoError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| IoError::parse(path, line_no, format!("invalid number {tok:?}")))?;
    if !v.is_finite() {
        return Err(IoError::parse(
            path,
            line_no,
            format!("non-finite coordinate {tok:?}"),
        ));
    }
    Ok(v)
}

fn read_xyz(path: &Path, lines: &[(usize, String)]) -> Result<PointCloud, IoError> {
    let mut points = Vec::new();
    for (no, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(IoError::parse(
                path,
                *no,
                format!("expected 3 values per line, got {}", toks.len()),
            ));
        }
        points.push(Point3::new(
            parse_coord(path, *no, toks[0])?,
            parse_coord(path, *no, toks[1])?,
            parse_coord(path, *no, toks[2])?,
        ));
    }
    Ok(PointCloud::from_points(points))
}

/// One declared PLY element: its name, row count, and (type, name) property pairs.
type PlyElement = (String, usize, Vec<(String, String)>);

fn read_ply(path: &Path, lines: &[(usize, String)]) -> Result<PointCloud, IoError> {
    let unsupported = |message: &str| IoError::UnsupportedFormat {
        path: path.to_path_buf(),
        message: message.into(),
    };

    // Header.
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut cursor = 0usize;
    let mut header_ok = false;
    if lines.is_empty() || lines[0].1.trim() != "ply" {
        return Err(IoError::parse(path, 1, "missing ply magic"));
    }
    cursor += 1;
    let mut format_seen = false;
    while cursor < lines.len() {
        let (no, raw) = &lines[cursor];
        cursor += 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        match toks[0] {
            "format" => {
                if toks.len() >= 2 && toks[1] == "ascii" {
                    format_seen = true;
                } else if toks.len() >= 2 && toks[1].starts_with("binary") {
                    return Err(unsupported("binary PLY is not supported"));
                } else {
                    return Err(IoError::parse(path, *no, "unrecognized format line"));
                }
            }
            "comment" | "obj_info" => {}
            "element" => {
                if toks.len() != 3 {
                    return Err(IoError::parse(path, *no, "malformed element line"));
                }
                let count: usize = toks[2].parse().map_err(|_| {
                    IoError::parse(path, *no, format!("invalid element count {:?}", toks[2]))
                })?;
                elements.push((toks[1].to_string(), count, Vec::new()));
            }
            "property" => {
                let Some(elem) = elements.last_mut() else {
                    return Err(IoError::parse(path, *no, "property before any element"));
                };
                if toks.len() >= 2 && toks[1] == "list" {
                    if elem.0 == "vertex" {
                        return Err(unsupported("list properties in the vertex element"));
                    }
                    // Lists elsewhere still occupy one value-line per row.
                    elem.2.push(("list".into(), "list".into()));
                } else if toks.len() == 3 {
                    elem.2.push((toks[1].to_string(), toks[2].to_string()));
                } else {
                    return Err(IoError::parse(path, *no, "malformed property line"));
                }
            }
            "end_header" => {
                header_ok = true;
                break;
            }
            other => {
                return Err(IoError::parse(
                    path,
                    *no,
                    format!("unexpected header keyword {other:?}"),
                ));
            }
        }
    }
    if !header_ok {
        let last = lines.last().map(|(no, _)| *no).unwrap_or(1);
        return Err(IoError::parse(path, last, "missing end_header"));
    }
    if !format_seen {
        return Err(IoError::parse(path, 1, "missing format line"));
    }

    // Locate the vertex element and its x/y/z columns.
    let Some(vertex_pos) = elements.iter().position(|(name, _, _)| name == "vertex") else {
        let (no, _) = &lines[cursor - 1];
        return Err(IoError::parse(path, *no, "no vertex element declared"));
    };
    let props = &elements[vertex_pos].2;
    let column = |name: &str| -> Result<usize, IoError> {
        let idx = props.iter().position(|(_, p)| p == name);
        match idx {
            Some(i) => {
                let ty = props[i].0.as_str();
                if matches!(ty, "float" | "double" | "float32" | "float64") {
                    Ok(i)
                } else {
                    Err(unsupported(&format!(
                        "vertex property {name} has non-real type {ty}"
                    )))
                }
            }
            None => {
                let (no, _) = &lines[cursor - 1];
                Err(IoError::parse(
                    path,
                    *no,
                    format!("vertex element lacks property {name}"),
                ))
            }
        }
    };
    let (cx, cy, cz) = (column("x")?, column("y")?, column("z")?);

    // Walk the data section element by element.
    let mut points = Vec::new();
    let mut data = lines[cursor..]
        .iter()
        .filter(|(_, l)| !l.trim().is_empty());
    let eof_line = lines.last().map(|(no, _)| *no).unwrap_or(1);
    for (pos, (_, count, props)) in elements.iter().enumerate() {
        for _ in 0..*count {
            let Some((no, raw)) = data.next() else {
                return Err(IoError::parse(path, eof_line, "unexpected end of file"));
            };
            if pos != vertex_pos {
                continue;
            }
            let toks: Vec<&str> = raw.split_whitespace().collect();
            if toks.len() != props.len() {
                return Err(IoError::parse(
                    path,
                    *no,
                    format!(
                        "expected {} vertex values, got {}",
                        props.len(),
                        toks.len()
                    ),
                ));
            }
            points.push(Point3::new(
                parse_coord(path, *no, toks[cx])?,
                parse_coord(path, *no, toks[cy])?,
                parse_coord(path, *no, toks[cz])?,
            ));
        }
    }
    Ok(PointCloud::from_points(points))
}

/// One plane of a detection result as serialized to JSON.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlaneRecord {
    pub id: usize,
    pub normal: [f64; 3],
    pub offset: f64,
    pub inlier_count: usize,
}

/// The `detect` stage's JSON document.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlanesDoc {
    pub planes: Vec<PlaneRecord>,
    pub residual_count: usize,
    pub iterations_used: u64,
}

impl PlanesDoc {
    pub fn from_detection(result: &DetectionResult) -> Self {
        PlanesDoc {
            planes: result
                .planes
                .iter()
                .enumerate()
                .map(|(id, p)| PlaneRecord {
                    id,
                    normal: p.normal.into(),
                    offset: p.offset,
                    inlier_count: p.inliers.len(),
                })
                .collect(),
            residual_count: result.residual_indices.len(),
            iterations_used: result.iterations_used,
        }
    }
}

fn json_parse_error(path: &Path, e: &serde_json::Error) -> IoError {
    IoError::parse(path, e.line(), e.to_string())
}

pub fn write_planes_json(result: &DetectionResult, path: &Path) -> Result<(), IoError> {
    let doc = PlanesDoc::from_detection(result);
    let body = serde_json::to_string_pretty(&doc).expect("serializable document");
    write_file(path, &body)
}

pub fn read_planes_json(path: &Path) -> Result<PlanesDoc, IoError> {
    let body = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_str(&body).map_err(|e| json_parse_error(path, &e))
}

/// Per-point labels: `index,plane_id` with -1 for residual points.
pub fn write_labels_csv(
    cloud_len: usize,
    planes: &[PlaneModel],
    path: &Path,
) -> Result<(), IoError> {
    let mut labels = vec![-1i64; cloud_len];
    for (pid, plane) in planes.iter().enumerate() {
        for &i in &plane.inliers {
            labels[i] = pid as i64;
        }
    }
    let mut out = String::from("index,plane_id\n");
    for (i, l) in labels.iter().enumerate() {
        writeln!(out, "{i},{l}").unwrap();
    }
    write_file(path, &out)
}

/// Reads a labels CSV back into one label per point index.
pub fn read_labels_csv(path: &Path) -> Result<Vec<i64>, IoError> {
    let body = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let mut labels = Vec::new();
    for (i, line) in body.lines().enumerate() {
        let no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if no == 1 {
            if line != "index,plane_id" {
                return Err(IoError::parse(path, 1, "expected header index,plane_id"));
            }
            continue;
        }
        let mut parts = line.split(',');
        let (Some(idx), Some(label), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(IoError::parse(path, no, "expected two comma-separated values"));
        };
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| IoError::parse(path, no, format!("invalid index {idx:?}")))?;
        if idx != labels.len() {
            return Err(IoError::parse(
                path,
                no,
                format!("out-of-order index {idx} (expected {})", labels.len()),
            ));
        }
        let label: i64 = label
            .trim()
            .parse()
            .map_err(|_| IoError::parse(path, no, format!("invalid plane id {label:?}")))?;
        labels.push(label);
    }
    Ok(labels)
}

/// Rebuilds `PlaneModel`s from a planes document plus a labels column.
///
/// Plane ids in the labels must reference document entries, and each plane's
/// label count must match its recorded inlier count.
pub fn planes_from_doc(doc: &PlanesDoc, labels: &[i64]) -> Result<Vec<PlaneModel>, IoError> {
    let mut inliers: Vec<Vec<usize>> = vec![Vec::new(); doc.planes.len()];
    for (idx, &label) in labels.iter().enumerate() {
        if label < 0 {
            continue;
        }
        let pid = label as usize;
        if pid >= doc.planes.len() {
            return Err(IoError::Inconsistent(format!(
                "label {pid} at point {idx} exceeds plane count {}",
                doc.planes.len()
            )));
        }
        inliers[pid].push(idx);
    }
    doc.planes
        .iter()
        .zip(inliers)
        .map(|(rec, inl)| {
            if inl.len() != rec.inlier_count {
                return Err(IoError::Inconsistent(format!(
                    "plane {} lists {} inliers but labels assign {}",
                    rec.id,
                    rec.inlier_count,
                    inl.len()
                )));
            }
            let normal = Vector3::from(rec.normal);
            // NaN components make the norm NaN, which fails this check as required.
            let unit_normal = (normal.norm() - 1.0).abs() <= 1e-6;
            if !unit_normal || !rec.offset.is_finite() {
                return Err(IoError::Inconsistent(format!(
                    "plane {} does not carry a unit normal and finite offset",
                    rec.id
                )));
            }
            // Keep the stored values bit-for-bit; renormalizing an already
            // unit normal would perturb it by an ulp and break round-trips.
            // Label iteration order makes `inl` sorted and duplicate-free.
            Ok(PlaneModel {
                normal,
                offset: rec.offset,
                inliers: inl,
            })
        })
        .collect()
}

/// Scan provenance sidecar: `index,facet_id` with -1 for no-return records.
pub fn write_provenance_csv(provenance: &[Option<u32>], path: &Path) -> Result<(), IoError> {
    let mut out = String::from("index,facet_id\n");
    for (i, p) in provenance.iter().enumerate() {
        let id = p.map(|v| v as i64).unwrap_or(-1);
        writeln!(out, "{i},{id}").unwrap();
    }
    write_file(path, &out)
}

/// One planar region as serialized to JSON.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RegionRecord {
    pub normal: [f64; 3],
    pub offset: f64,
    pub hull: Vec<[f64; 3]>,
    pub source_plane_ids: Vec<usize>,
}

/// The `merge-hull` stage's JSON document.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RegionsDoc {
    pub regions: Vec<RegionRecord>,
    pub degenerate_dropped: usize,
}

impl RegionsDoc {
    pub fn from_regions(set: &RegionSet) -> Self {
        RegionsDoc {
            regions: set
                .regions
                .iter()
                .map(|r| RegionRecord {
                    normal: r.plane.normal.into(),
                    offset: r.plane.offset,
                    hull: r.hull.vertices().iter().map(|v| (*v).into()).collect(),
                    source_plane_ids: r.source_plane_ids.clone(),
                })
                .collect(),
            degenerate_dropped: set.degenerate_dropped,
        }
    }
}

pub fn write_regions_json(set: &RegionSet, path: &Path) -> Result<(), IoError> {
    let doc = RegionsDoc::from_regions(set);
    let body = serde_json::to_string_pretty(&doc).expect("serializable document");
    write_file(path, &body)
}

pub fn read_regions_json(path: &Path) -> Result<RegionsDoc, IoError> {
    let body = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_str(&body).map_err(|e| json_parse_error(path, &e))
}

/// Writes regions as an ASCII PLY mesh: all hull vertices plus one polygon
/// face per region (int-typed list lengths, since hulls can be large).
pub fn write_regions_ply(set: &RegionSet, path: &Path) -> Result<(), IoError> {
    let total: usize = set.regions.iter().map(|r| r.hull.vertices().len()).sum();
    let mut out = String::new();
    writeln!(out, "ply").unwrap();
    writeln!(out, "format ascii 1.0").unwrap();
    writeln!(out, "element vertex {total}").unwrap();
    writeln!(out, "property float x").unwrap();
    writeln!(out, "property float y").unwrap();
    writeln!(out, "property float z").unwrap();
    writeln!(out, "element face {}", set.regions.len()).unwrap();
    writeln!(out, "property list int int vertex_indices").unwrap();
    writeln!(out, "end_header").unwrap();
    for r in &set.regions {
        for v in r.hull.vertices() {
            writeln!(out, "{} {} {}", v.x, v.y, v.z).unwrap();
        }
    }
    let mut base = 0usize;
    for r in &set.regions {
        let k = r.hull.vertices().len();
        write!(out, "{k}").unwrap();
        for i in 0..k {
            write!(out, " {}", base + i).unwrap();
        }
        out.push('\n');
        base += k;
    }
    write_file(path, &out)
}

pub fn write_scene_json(scene: &SceneModel, path: &Path) -> Result<(), IoError> {
    let body = serde_json::to_string_pretty(scene).expect("serializable scene");
    write_file(path, &body)
}

pub fn read_scene_json(path: &Path) -> Result<SceneModel, IoError> {
    let body = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_str(&body).map_err(|e| json_parse_error(path, &e))
}

/// Per-trial sweep rows: `environment,density,threshold,trial,plane_count,false_count`.
pub fn write_sweep_trials_csv(report: &SweepReport, path: &Path) -> Result<(), IoError> {
    let mut out = String::from("environment,density,threshold,trial,plane_count,false_count\n");
    for row in &report.rows {
        for trial in 0..row.plane_counts.len() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                row.environment,
                row.density.label(),
                row.threshold,
                trial,
                row.plane_counts[trial],
                row.false_counts[trial]
            )
            .unwrap();
        }
    }
    write_file(path, &out)
}

/// Aggregated sweep rows: `environment,density,threshold,mean_plane_count,mean_false_count`.
pub fn write_sweep_means_csv(report: &SweepReport, path: &Path) -> Result<(), IoError> {
    let mut out = String::from("environment,density,threshold,mean_plane_count,mean_false_count\n");
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.environment,
            row.density.label(),
            row.threshold,
            row.mean_planes,
            row.mean_false
        )
        .unwrap();
    }
    write_file(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vector3;
    use tempfile::TempDir;

    fn sample_cloud() -> PointCloud {
        PointCloud::from_points(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 2.0, 3.0),
            Point3::new(-0.125, 7.25, -3.5),
            Point3::new(0.1, 0.2, 0.30000000000000004),
            Point3::new(1e-12, -1e12, 42.0),
        ])
    }

    #[test]
    fn xyz_round_trip_and_examples() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("cloud.xyz");
        std::fs::write(&path, "0 0 0\n1 2 3\n").unwrap();
        let cloud = read_cloud(&path, CloudFormat::Xyz).unwrap();
        assert_eq!(
            cloud.points,
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 2.0, 3.0)]
        );

        let cloud = sample_cloud();
        write_cloud(&cloud, &path, CloudFormat::Xyz).unwrap();
        let back = read_cloud(&path, CloudFormat::Xyz).unwrap();
        assert_eq!(back.points, cloud.points, "shortest round-trip is exact");

        // Empty cloud round-trips to an empty file.
        write_cloud(&PointCloud::default(), &path, CloudFormat::Xyz).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
        assert!(read_cloud(&path, CloudFormat::Xyz).unwrap().is_empty());
    }

    #[test]
    fn xyz_parse_errors_carry_line_numbers() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("bad.xyz");
        std::fs::write(&path, "0 0 0\n1 2\n").unwrap();
        match read_cloud(&path, CloudFormat::Xyz) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        std::fs::write(&path, "0 0 0\n\n1 2 x\n").unwrap();
        match read_cloud(&path, CloudFormat::Xyz) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        std::fs::write(&path, "1 2 inf\n").unwrap();
        assert!(matches!(
            read_cloud(&path, CloudFormat::Xyz),
            Err(IoError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn ply_round_trip_and_foreign_layouts() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("cloud.ply");
        let cloud = sample_cloud();
        write_cloud(&cloud, &path, CloudFormat::Ply).unwrap();
        let back = read_cloud(&path, CloudFormat::Ply).unwrap();
        assert_eq!(back.points, cloud.points);

        // Extra properties and non-vertex elements are skipped; double works.
        let foreign = "\
ply
format ascii 1.0
comment exported elsewhere
element vertex 2
property double x
property double y
property double z
property uchar intensity
element face 1
property list uchar int vertex_indices
end_header
0.5 -1.5 2.5 200
1 2 3 17
3 0 1 0
";
        std::fs::write(&path, foreign).unwrap();
        let cloud = read_cloud(&path, CloudFormat::Ply).unwrap();
        assert_eq!(
            cloud.points,
            vec![Point3::new(0.5, -1.5, 2.5), Point3::new(1.0, 2.0, 3.0)]
        );

        // Format inference by extension.
        assert_eq!(CloudFormat::infer(Path::new("a.PLY")), CloudFormat::Ply);
        assert_eq!(CloudFormat::infer(Path::new("a.xyz")), CloudFormat::Xyz);
        assert_eq!(CloudFormat::infer(Path::new("a")), CloudFormat::Xyz);
    }

    #[test]
    fn ply_rejects_binary_and_malformed_files() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("bad.ply");
        std::fs::write(
            &path,
            "ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n",
        )
        .unwrap();
        assert!(matches!(
            read_cloud(&path, CloudFormat::Ply),
            Err(IoError::UnsupportedFormat { .. })
        ));

        std::fs::write(&path, "not a ply\n").unwrap();
        assert!(matches!(
            read_cloud(&path, CloudFormat::Ply),
            Err(IoError::Parse { line: 1, .. })
        ));

        // Vertex line with the wrong arity reports its line number.
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2\n",
        )
        .unwrap();
        match read_cloud(&path, CloudFormat::Ply) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("expected parse error, got {other:?}"),
        }

        // Truncated data section.
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n",
        )
        .unwrap();
        assert!(matches!(
            read_cloud(&path, CloudFormat::Ply),
            Err(IoError::Parse { .. })
        ));
    }

    #[test]
    fn labels_and_planes_round_trip() {
        let dir = TempDir::new().unwrap();
        let planes = vec![
            PlaneModel::new(Vector3::new(0.0, 0.0, 1.0), 0.5).with_inliers(vec![0, 2]),
            PlaneModel::new(Vector3::new(0.0, 1.0, 0.0), 2.0).with_inliers(vec![1, 3, 4]),
        ];
        let result = DetectionResult {
            planes: planes.clone(),
            residual_indices: vec![5],
            iterations_used: 338,
        };
        let planes_path = dir.path().join("planes.json");
        let labels_path = dir.path().join("labels.csv");
        write_planes_json(&result, &planes_path).unwrap();
        write_labels_csv(6, &result.planes, &labels_path).unwrap();

        let doc = read_planes_json(&planes_path).unwrap();
        assert_eq!(doc.planes.len(), 2);
        assert_eq!(doc.residual_count, 1);
        assert_eq!(doc.iterations_used, 338);

        let labels = read_labels_csv(&labels_path).unwrap();
        assert_eq!(labels, vec![0, 1, 0, 1, 1, -1]);

        let rebuilt = planes_from_doc(&doc, &labels).unwrap();
        assert_eq!(rebuilt.len(), 2);
        for (a, b) in rebuilt.iter().zip(&planes) {
            assert_eq!(a.inliers, b.inliers);
            assert_eq!(a.offset, b.offset);
            assert_eq!(a.normal, b.normal);
        }

        // Inconsistent label column is refused.
        let bad = vec![0, 1, 0, 1, 1, 1];
        assert!(matches!(
            planes_from_doc(&doc, &bad),
            Err(IoError::Inconsistent(_))
        ));
    }

    #[test]
    fn provenance_csv_format() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("prov.csv");
        write_provenance_csv(&[Some(3), None, Some(0)], &path).unwrap();
        let body = std::fs::read_to_string(&path).unwrap();
        assert_eq!(body, "index,facet_id\n0,3\n1,-1\n2,0\n");
    }

    #[test]
    fn sweep_csvs() {
        use crate::experiment::{Density, SweepRow};
        let report = SweepReport {
            rows: vec![SweepRow {
                environment: "box".into(),
                density: Density::Low,
                threshold: 1000,
                plane_counts: vec![6, 7],
                false_counts: vec![0, 1],
                mean_planes: 6.5,
                mean_false: 0.5,
            }],
        };
        let dir = TempDir::new().unwrap();
        let trials = dir.path().join("trials.csv");
        let means = dir.path().join("means.csv");
        write_sweep_trials_csv(&report, &trials).unwrap();
        write_sweep_means_csv(&report, &means).unwrap();
        assert_eq!(
            std::fs::read_to_string(&trials).unwrap(),
            "environment,density,threshold,trial,plane_count,false_count\n\
             box,LD,1000,0,6,0\nbox,LD,1000,1,7,1\n"
        );
        assert_eq!(
            std::fs::read_to_string(&means).unwrap(),
            "environment,density,threshold,mean_plane_count,mean_false_count\n\
             box,LD,1000,6.5,0.5\n"
        );
    }

    #[test]
    fn regions_json_and_ply() {
        use crate::geom::Polygon3;
        use crate::hull::PlanarRegion;
        let hull = Polygon3::new(vec![
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(2.0, 0.0, 1.0),
            Point3::new(2.0, 2.0, 1.0),
            Point3::new(0.0, 2.0, 1.0),
        ])
        .unwrap();
        let set = RegionSet {
            regions: vec![PlanarRegion {
                plane: PlaneModel::new(Vector3::new(0.0, 0.0, 1.0), 1.0),
                hull,
                source_plane_ids: vec![0, 2],
            }],
            degenerate_dropped: 1,
        };
        let dir = TempDir::new().unwrap();
        let jpath = dir.path().join("regions.json");
        write_regions_json(&set, &jpath).unwrap();
        let doc = read_regions_json(&jpath).unwrap();
        assert_eq!(doc.degenerate_dropped, 1);
        assert_eq!(doc.regions.len(), 1);
        assert_eq!(doc.regions[0].hull.len(), 4);
        assert_eq!(doc.regions[0].source_plane_ids, vec![0, 2]);

        let ppath = dir.path().join("regions.ply");
        write_regions_ply(&set, &ppath).unwrap();
        let body = std::fs::read_to_string(&ppath).unwrap();
        assert!(body.starts_with("ply\nformat ascii 1.0\nelement vertex 4\n"));
        assert!(body.contains("element face 1\n"));
        assert!(body.trim_end().ends_with("4 0 1 2 3"));
        // The vertex block of a regions PLY parses as a cloud.
        let verts = read_cloud(&ppath, CloudFormat::Ply).unwrap();
        assert_eq!(verts.len(), 4);
    }

    #[test]
    fn scene_json_round_trip_with_errors() {
        use crate::scenes::builtin_scene;
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("scene.json");
        let scene = builtin_scene("partition").unwrap().scene;
        write_scene_json(&scene, &path).unwrap();
        assert_eq!(read_scene_json(&path).unwrap(), scene);

        std::fs::write(&path, "{\"name\": 3}").unwrap();
        assert!(matches!(
            read_scene_json(&path),
            Err(IoError::Parse { .. })
        ));
        assert!(matches!(
            read_scene_json(&dir.path().join("missing.json")),
            Err(IoError::Io { .. })
        ));
    }
}
