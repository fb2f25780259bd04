//! Image-method reference for scenes made of planar reflectors: enumerate
//! every plane sequence, mirror the transmitter, keep the paths whose
//! reflection points land on a face and whose segments are unobstructed,
//! then compare with the traced paths.

use phasetrace_core::tracer::{image_path, trace_reference_paths, PropagationPath, SceneFrame, TraceParams, OCCLUSION_EPSILON};
use phasetrace_core::Vec3;
use serde::Serialize;

/// Faces sharing one supporting plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub point: Vec3,
    pub normal: Vec3,
    pub faces: Vec<u32>,
}

const NORMAL_TOL: f64 = 1e-9;
const OFFSET_TOL: f64 = 1e-7;
const BARY_TOL: f64 = 1e-9;

/// Orient normals so that `n` and `−n` describe the same plane.
fn canonical(n: Vec3) -> Vec3 {
    let a = n.to_array();
    let k = n.abs().max_abs_axis();
    if a[k] < 0.0 {
        -n
    } else {
        n
    }
}

/// Group the faces of `frame` by supporting plane, in order of first face id.
pub fn planar_reflectors(frame: &SceneFrame) -> Vec<Plane> {
    let mut planes: Vec<Plane> = Vec::new();
    for f in 0..frame.face_count() as u32 {
        let n = canonical(frame.face(f).normal);
        let q = frame.triangle(f)[0];
        let found = planes
            .iter_mut()
            .find(|p| p.normal.dot(n) > 1.0 - NORMAL_TOL && (q - p.point).dot(p.normal).abs() < OFFSET_TOL);
        match found {
            Some(p) => p.faces.push(f),
            None => planes.push(Plane {
                point: q,
                normal: n,
                faces: vec![f],
            }),
        }
    }
    planes
}

fn in_triangle(p: Vec3, t: &[Vec3; 3]) -> bool {
    let (v0, v1, v2) = (t[1] - t[0], t[2] - t[0], p - t[0]);
    let (d00, d01, d11) = (v0.dot(v0), v0.dot(v1), v1.dot(v1));
    let (d20, d21) = (v2.dot(v0), v2.dot(v1));
    let den = d00 * d11 - d01 * d01;
    if den == 0.0 {
        return false;
    }
    let v = (d11 * d20 - d01 * d21) / den;
    let w = (d00 * d21 - d01 * d20) / den;
    v >= -BARY_TOL && w >= -BARY_TOL && v + w <= 1.0 + BARY_TOL
}

/// An analytic specular path: plane indices and interaction points.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePath {
    pub planes: Vec<usize>,
    pub points: Vec<Vec3>,
}

impl ImagePath {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

/// Every unobstructed specular path of depth `0..=max_depth`.
pub fn image_method_paths(frame: &SceneFrame, planes: &[Plane], tx: Vec3, rx: Vec3, max_depth: usize) -> Vec<ImagePath> {
    let mut out = Vec::new();
    let mut seq: Vec<usize> = Vec::new();
    enumerate(frame, planes, tx, rx, max_depth, &mut seq, &mut out);
    out
}

fn enumerate(
    frame: &SceneFrame,
    planes: &[Plane],
    tx: Vec3,
    rx: Vec3,
    max_depth: usize,
    seq: &mut Vec<usize>,
    out: &mut Vec<ImagePath>,
) {
    if let Some(p) = realize(frame, planes, tx, rx, seq) {
        out.push(p);
    }
    if seq.len() == max_depth {
        return;
    }
    for k in 0..planes.len() {
        if seq.last() == Some(&k) {
            continue;
        }
        seq.push(k);
        enumerate(frame, planes, tx, rx, max_depth, seq, out);
        seq.pop();
    }
}

fn realize(frame: &SceneFrame, planes: &[Plane], tx: Vec3, rx: Vec3, seq: &[usize]) -> Option<ImagePath> {
    let geo: Vec<(Vec3, Vec3)> = seq.iter().map(|&k| (planes[k].point, planes[k].normal)).collect();
    let interior = image_path(tx, rx, &geo)?;
    for (p, &k) in interior.iter().zip(seq) {
        if !planes[k].faces.iter().any(|&f| in_triangle(*p, frame.triangle(f))) {
            return None;
        }
    }
    let mut points = Vec::with_capacity(seq.len() + 2);
    points.push(tx);
    points.extend(interior);
    points.push(rx);
    if points.windows(2).any(|w| frame.occluded(w[0], w[1], OCCLUSION_EPSILON)) {
        return None;
    }
    Some(ImagePath {
        planes: seq.to_vec(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStatus {
    Matched,
    /// Analytic path with no traced counterpart.
    Missed,
    /// Traced path with no analytic counterpart.
    Spurious,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub pose: usize,
    pub depth: usize,
    /// Plane indices joined by `-`; empty for line of sight.
    pub planes: String,
    pub analytic_length_m: f64,
    pub traced_length_m: f64,
    pub relative_error: f64,
    pub status: MatchStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub rows: Vec<OracleRow>,
    pub max_relative_error: f64,
    pub missed: usize,
    pub spurious: usize,
}

impl OracleReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.missed == 0 && self.spurious == 0 && self.max_relative_error <= tolerance
    }
}

fn plane_sequence(path: &PropagationPath, face_plane: &[usize]) -> Vec<usize> {
    path.face_sequence().iter().map(|&f| face_plane[f as usize]).collect()
}

fn label(seq: &[usize]) -> String {
    seq.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("-")
}

/// Trace from each `(tx, rx)` pair and compare against the image method.
pub fn compare(frame: &SceneFrame, endpoints: &[(Vec3, Vec3)], params: &TraceParams) -> OracleReport {
    let planes = planar_reflectors(frame);
    let mut face_plane = vec![0; frame.face_count()];
    for (k, p) in planes.iter().enumerate() {
        for &f in &p.faces {
            face_plane[f as usize] = k;
        }
    }
    let mut rows = Vec::new();
    for (pose, &(tx, rx)) in endpoints.iter().enumerate() {
        let analytic = image_method_paths(frame, &planes, tx, rx, params.max_depth);
        let mut traced: Vec<(Vec<usize>, f64, bool)> = trace_reference_paths(frame, tx, rx, params)
            .iter()
            .map(|p| (plane_sequence(p, &face_plane), p.total_length(), false))
            .collect();
        for a in &analytic {
            let la = a.length();
            let hit = traced.iter_mut().find(|(s, _, used)| !*used && *s == a.planes);
            let row = match hit {
                Some((_, lt, used)) => {
                    *used = true;
                    OracleRow {
                        pose,
                        depth: a.planes.len(),
                        planes: label(&a.planes),
                        analytic_length_m: la,
                        traced_length_m: *lt,
                        relative_error: (*lt - la).abs() / la,
                        status: MatchStatus::Matched,
                    }
                }
                None => OracleRow {
                    pose,
                    depth: a.planes.len(),
                    planes: label(&a.planes),
                    analytic_length_m: la,
                    traced_length_m: f64::NAN,
                    relative_error: f64::NAN,
                    status: MatchStatus::Missed,
                },
            };
            rows.push(row);
        }
        for (s, lt, _) in traced.iter().filter(|t| !t.2) {
            rows.push(OracleRow {
                pose,
                depth: s.len(),
                planes: label(s),
                analytic_length_m: f64::NAN,
                traced_length_m: *lt,
                relative_error: f64::NAN,
                status: MatchStatus::Spurious,
            });
        }
    }
    let max_relative_error = rows
        .iter()
        .filter(|r| r.status == MatchStatus::Matched)
        .map(|r| r.relative_error)
        .fold(0.0, f64::max);
    let count = |s| rows.iter().filter(|r| r.status == s).count();
    OracleReport {
        max_relative_error,
        missed: count(MatchStatus::Missed),
        spurious: count(MatchStatus::Spurious),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use phasetrace_core::scene::TriangleMesh;

    fn floor() -> TriangleMesh {
        let v = vec![
            Vec3::new(-10.0, -10.0, 0.0),
            Vec3::new(10.0, -10.0, 0.0),
            Vec3::new(10.0, 10.0, 0.0),
            Vec3::new(-10.0, 10.0, 0.0),
        ];
        TriangleMesh::with_uniform_material(v, vec![[0, 1, 2], [0, 2, 3]], 0).unwrap()
    }

    fn wall(x: f64) -> TriangleMesh {
        let v = vec![
            Vec3::new(x, -10.0, -1.0),
            Vec3::new(x, 10.0, -1.0),
            Vec3::new(x, 10.0, 5.0),
            Vec3::new(x, -10.0, 5.0),
        ];
        TriangleMesh::with_uniform_material(v, vec![[0, 1, 2], [0, 2, 3]], 0).unwrap()
    }

    #[test]
    fn coplanar_faces_share_a_plane() {
        let frame = SceneFrame::new(&[floor(), wall(6.0)], None, 0);
        let planes = planar_reflectors(&frame);
        assert_eq!(planes.len(), 2);
        assert_eq!(planes[0].faces, vec![0, 1]);
        assert_eq!(planes[1].faces, vec![2, 3]);
    }

    #[test]
    fn floor_bounce_at_midpoint() {
        let frame = SceneFrame::new(&[floor()], None, 0);
        let planes = planar_reflectors(&frame);
        let paths = image_method_paths(&frame, &planes, Vec3::new(0.0, 0.0, 1.0), Vec3::new(4.0, 0.0, 1.0), 3);
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].planes, Vec::<usize>::new());
        assert!((paths[1].points[1] - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((paths[1].length() - 2.0 * 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn traced_paths_match_image_method() {
        let frame = SceneFrame::new(&[floor(), wall(6.0)], None, 0);
        let ends = [(Vec3::new(0.0, 0.0, 1.0), Vec3::new(4.0, 0.5, 1.5))];
        let report = compare(&frame, &ends, &TraceParams::default());
        // LoS, floor, wall, floor then wall; wall-then-floor would need a
        // floor point beyond the wall (x = 8.8)
        assert_eq!(report.rows.len(), 4, "{:#?}", report.rows);
        assert!(report.passed(1e-6), "{report:#?}");
        // tx mirrored in the floor then the wall sits at (12, 0, -1)
        let fw = report.rows.iter().find(|r| r.planes == "0-1").unwrap();
        assert!((fw.analytic_length_m - 70.5f64.sqrt()).abs() < 1e-12);
    }
}
