//! Deterministic specular path tracing (shoot-and-bounce with exact
//! refinement) and occlusion queries over a BVH-accelerated scene frame.
//!
//! Launch directions come from a Fibonacci lattice, so the same inputs
//! always give the same path set. A launched ray that passes within the
//! capture radius of the receiver nominates its face sequence; each
//! nominated sequence is then solved exactly by mirroring the transmitter
//! across the face planes and back-projecting from the receiver, and the
//! solved path is re-validated segment by segment against the scene.

mod bvh;
pub mod intersect;

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::cmp::Ordering;

use self::bvh::Bvh;
use self::intersect::ShearedRay;
use crate::geometry::Vec3;
use crate::scene::{MeshRef, SceneFrameSequence, TriangleMesh};

/// Endpoint exclusion distance for occlusion tests (m).
pub const OCCLUSION_EPSILON: f64 = 1e-4;
/// Minimum hit distance for [`SceneFrame::intersect_first`] (m).
pub const MIN_HIT_DISTANCE: f64 = 1e-9;
/// Minimum segment length of a valid path (m).
pub const MIN_SEGMENT: f64 = 1e-9;

/// Metadata of one triangle of a [`SceneFrame`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceInfo {
    pub mesh: MeshRef,
    /// Face index within its mesh.
    pub local_face: u32,
    pub material: u32,
    /// Mesh-local vertex ids of the corners.
    pub vertices: [u32; 3],
    pub normal: Vec3,
}

impl FaceInfo {
    /// Lowest-index corner; stable across frames because topology is fixed.
    pub fn representative_vertex(&self) -> u32 {
        *self.vertices.iter().min().unwrap()
    }
}

/// All geometry of one timestamp, flattened into one triangle list.
///
/// Global face ids number the static meshes in order, followed by the
/// dynamic mesh, so they are identical for every frame of a sequence.
#[derive(Debug, Clone)]
pub struct SceneFrame {
    triangles: Vec<[Vec3; 3]>,
    info: Vec<FaceInfo>,
    bvh: Bvh,
    frame: usize,
}

/// Nearest intersection returned by [`SceneFrame::intersect_first`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub distance: f64,
    pub face: u32,
    /// Weights of the three corners.
    pub barycentric: [f64; 3],
    pub point: Vec3,
}

impl SceneFrame {
    pub fn new(static_meshes: &[TriangleMesh], dynamic: Option<&TriangleMesh>, frame: usize) -> Self {
        let mut triangles = Vec::new();
        let mut info = Vec::new();
        let meshes = static_meshes
            .iter()
            .enumerate()
            .map(|(i, m)| (MeshRef::Static(i as u32), m))
            .chain(dynamic.map(|m| (MeshRef::Dynamic, m)));
        for (mesh, m) in meshes {
            for (f, corners) in m.faces().iter().enumerate() {
                let tri = m.face_corners(f);
                let Some(normal) = m.face_normal(f) else { continue };
                triangles.push(tri);
                info.push(FaceInfo {
                    mesh,
                    local_face: f as u32,
                    material: m.face_material()[f],
                    vertices: *corners,
                    normal,
                });
            }
        }
        let bvh = Bvh::build(&triangles);
        SceneFrame {
            triangles,
            info,
            bvh,
            frame,
        }
    }

    /// Frame `frame` of a sequence (static geometry only if it has no
    /// dynamic mesh).
    pub fn from_sequence(scene: &SceneFrameSequence, frame: usize) -> Self {
        SceneFrame::new(scene.static_meshes(), scene.dynamic_mesh(frame), frame)
    }

    pub fn empty() -> Self {
        SceneFrame::new(&[], None, 0)
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn face_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn face(&self, id: u32) -> &FaceInfo {
        &self.info[id as usize]
    }

    pub fn triangle(&self, id: u32) -> &[Vec3; 3] {
        &self.triangles[id as usize]
    }

    pub fn triangles(&self) -> &[[Vec3; 3]] {
        &self.triangles
    }

    /// Nearest hit along `origin + t·dir` with `t > 1e-9` m.
    pub fn intersect_first(&self, origin: Vec3, direction: Vec3) -> Option<Hit> {
        self.intersect_range(origin, direction, MIN_HIT_DISTANCE, f64::INFINITY)
    }

    /// Nearest hit with distance in `(t_min, t_max)`. Distances are in meters
    /// (the direction is normalized internally).
    pub fn intersect_range(&self, origin: Vec3, direction: Vec3, t_min: f64, t_max: f64) -> Option<Hit> {
        let dir = direction.try_normalize()?;
        let ray = ShearedRay::new(origin, dir);
        self.bvh.nearest(&self.triangles, &ray, t_min, t_max).map(|h| Hit {
            distance: h.t,
            face: h.face,
            barycentric: h.barycentric,
            point: origin + dir * h.t,
        })
    }

    /// True iff a face crosses the segment `(a, b)` shortened by `epsilon`
    /// at both ends.
    pub fn occluded(&self, a: Vec3, b: Vec3, epsilon: f64) -> bool {
        let d = b - a;
        let len = d.norm();
        if !(len > 2.0 * epsilon) {
            return false;
        }
        let ray = ShearedRay::new(a, d / len);
        self.bvh.any(&self.triangles, &ray, epsilon, len - epsilon)
    }
}

/// One surface interaction of a [`PropagationPath`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    /// Global face id in the frame the path was traced on.
    pub face: u32,
    pub mesh: MeshRef,
    pub local_face: u32,
    pub material: u32,
    pub face_vertices: [u32; 3],
    /// Vertex standing in for the hit face when grouping dynamic hits.
    pub representative_vertex: u32,
    /// Surface normal used for the reflection coefficient.
    pub normal: Vec3,
    /// Angle between the incoming ray and the normal, in `[0, π/2]`.
    pub incidence_angle: f64,
    /// Set when the hit point was replaced by a vertex of the dynamic mesh.
    pub substituted_vertex: Option<u32>,
}

/// Ordered interaction points `[tx, p_0, …, p_{D-1}, rx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPath {
    points: Vec<Vec3>,
    hits: Vec<Interaction>,
}

impl PropagationPath {
    /// Build a path, recomputing every incidence angle from the geometry.
    /// `points.len()` must be `hits.len() + 2`.
    pub fn new(points: Vec<Vec3>, hits: Vec<Interaction>) -> Self {
        assert_eq!(points.len(), hits.len() + 2, "path needs D + 2 points for D hits");
        let mut p = PropagationPath { points, hits };
        p.refresh_incidence();
        p
    }

    pub fn line_of_sight(tx: Vec3, rx: Vec3) -> Self {
        PropagationPath {
            points: alloc::vec![tx, rx],
            hits: Vec::new(),
        }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn hits(&self) -> &[Interaction] {
        &self.hits
    }

    pub fn depth(&self) -> usize {
        self.hits.len()
    }

    pub fn tx(&self) -> Vec3 {
        self.points[0]
    }

    pub fn rx(&self) -> Vec3 {
        self.points[self.points.len() - 1]
    }

    pub fn interior(&self) -> &[Vec3] {
        &self.points[1..self.points.len() - 1]
    }

    pub fn segment_lengths(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.windows(2).map(|w| w[0].distance(w[1]))
    }

    pub fn total_length(&self) -> f64 {
        self.segment_lengths().sum()
    }

    pub fn face_sequence(&self) -> Vec<u32> {
        self.hits.iter().map(|h| h.face).collect()
    }

    /// Same interaction points with new endpoints.
    pub fn with_endpoints(&self, tx: Vec3, rx: Vec3) -> Self {
        let mut points = self.points.clone();
        let n = points.len();
        points[0] = tx;
        points[n - 1] = rx;
        let mut p = PropagationPath {
            points,
            hits: self.hits.clone(),
        };
        p.refresh_incidence();
        p
    }

    /// Replace interaction `index` with a new point and interaction record.
    pub fn with_interaction(&self, index: usize, point: Vec3, hit: Interaction) -> Self {
        let mut p = self.clone();
        p.points[index + 1] = point;
        p.hits[index] = hit;
        p.refresh_incidence();
        p
    }

    /// Reversed path (receiver becomes transmitter).
    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        let mut hits = self.hits.clone();
        hits.reverse();
        PropagationPath::new(points, hits)
    }

    /// Every segment is longer than [`MIN_SEGMENT`].
    pub fn has_distinct_points(&self) -> bool {
        self.segment_lengths().all(|l| l > MIN_SEGMENT)
    }

    fn refresh_incidence(&mut self) {
        for (k, h) in self.hits.iter_mut().enumerate() {
            let incoming = self.points[k] - self.points[k + 1];
            h.incidence_angle = match incoming.try_normalize() {
                Some(d) => {
                    let c = d.dot(h.normal).abs().min(1.0);
                    libm::acos(c)
                }
                None => 0.0,
            };
        }
    }

    /// Largest `|angle(in, n) − angle(out, n)|` over all interactions.
    pub fn specular_error(&self) -> f64 {
        (0..self.hits.len())
            .map(|k| {
                let n = self.hits[k].normal;
                let p = self.points[k + 1];
                let a_in = (self.points[k] - p).angle_to(n);
                let a_out = (self.points[k + 2] - p).angle_to(n);
                (a_in - a_out).abs()
            })
            .fold(0.0, f64::max)
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.hits
            .len()
            .cmp(&other.hits.len())
            .then_with(|| {
                self.hits
                    .iter()
                    .map(|h| h.face)
                    .cmp(other.hits.iter().map(|h| h.face))
            })
            .then_with(|| {
                for (a, b) in self.points.iter().zip(&other.points) {
                    for i in 0..3 {
                        let o = a[i].total_cmp(&b[i]);
                        if o != Ordering::Equal {
                            return o;
                        }
                    }
                }
                Ordering::Equal
            })
    }
}

/// Sort paths into canonical order (depth, face ids, coordinates).
pub fn sort_canonical(paths: &mut [PropagationPath]) {
    paths.sort_by(|a, b| a.canonical_cmp(b));
}

/// Receiver capture sphere used during shoot-and-bounce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaptureRadius {
    /// `r·Δθ` at travelled distance `r`, with `Δθ = √(4π/N)` the lattice spacing.
    Adaptive,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceParams {
    pub ray_count: usize,
    pub max_depth: usize,
    pub capture_radius: CaptureRadius,
    /// Paths whose points all agree within this distance (m) are merged.
    pub dedup_tolerance: f64,
}

impl Default for TraceParams {
    fn default() -> Self {
        TraceParams {
            ray_count: 100_000,
            max_depth: 3,
            capture_radius: CaptureRadius::Adaptive,
            dedup_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceParamsError {
    NoRays,
    CaptureRadius(f64),
    DedupTolerance(f64),
}

impl core::fmt::Display for TraceParamsError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TraceParamsError::NoRays => write!(f, "ray_count must be at least 1"),
            TraceParamsError::CaptureRadius(r) => write!(f, "capture radius must be positive, got {r}"),
            TraceParamsError::DedupTolerance(t) => write!(f, "dedup tolerance must be non-negative, got {t}"),
        }
    }
}

impl core::error::Error for TraceParamsError {}

impl TraceParams {
    pub fn validate(&self) -> Result<(), TraceParamsError> {
        if self.ray_count == 0 {
            return Err(TraceParamsError::NoRays);
        }
        if let CaptureRadius::Fixed(r) = self.capture_radius {
            if !(r > 0.0) || !r.is_finite() {
                return Err(TraceParamsError::CaptureRadius(r));
            }
        }
        if !(self.dedup_tolerance >= 0.0) {
            return Err(TraceParamsError::DedupTolerance(self.dedup_tolerance));
        }
        Ok(())
    }

    /// Angular spacing `√(4π/N)` of the launch lattice.
    pub fn angular_spacing(&self) -> f64 {
        libm::sqrt(4.0 * core::f64::consts::PI / self.ray_count.max(1) as f64)
    }
}

/// Direction `i` of an `n`-point Fibonacci lattice on the unit sphere.
pub fn fibonacci_direction(i: usize, n: usize) -> Vec3 {
    let golden = core::f64::consts::PI * (3.0 - libm::sqrt(5.0));
    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
    let r = libm::sqrt((1.0 - z * z).max(0.0));
    let phi = golden * i as f64;
    Vec3::new(r * libm::cos(phi), r * libm::sin(phi), z)
}

/// Trace all specular paths from `tx` to `rx` up to `params.max_depth`
/// reflections. The result is deduplicated and canonically sorted; every
/// path has passed an end-to-end occlusion check.
pub fn trace_reference_paths(frame: &SceneFrame, tx: Vec3, rx: Vec3, params: &TraceParams) -> Vec<PropagationPath> {
    let mut paths = Vec::new();
    if tx.distance(rx) > MIN_SEGMENT && !frame.occluded(tx, rx, OCCLUSION_EPSILON) {
        paths.push(PropagationPath::line_of_sight(tx, rx));
    }
    if params.max_depth > 0 && frame.face_count() > 0 {
        let candidates = collect_candidates(frame, tx, rx, params);
        paths.extend(candidates.iter().filter_map(|seq| refine(frame, tx, rx, seq)));
    }
    dedup_paths(paths, params.dedup_tolerance)
}

fn shoot(frame: &SceneFrame, tx: Vec3, rx: Vec3, params: &TraceParams, range: core::ops::Range<usize>) -> BTreeSet<Vec<u32>> {
    let spacing = params.angular_spacing();
    let mut out = BTreeSet::new();
    let mut faces: Vec<u32> = Vec::with_capacity(params.max_depth);
    for i in range {
        let mut origin = tx;
        let mut dir = fibonacci_direction(i, params.ray_count);
        let mut travelled = 0.0;
        faces.clear();
        for depth in 0..=params.max_depth {
            let t_min = if depth == 0 { MIN_HIT_DISTANCE } else { OCCLUSION_EPSILON };
            let hit = frame.intersect_range(origin, dir, t_min, f64::INFINITY);
            let seg_end = hit.map_or(f64::INFINITY, |h| h.distance);
            if depth > 0 {
                let t = (rx - origin).dot(dir).clamp(0.0, seg_end);
                let miss = (origin + dir * t).distance(rx);
                let radius = match params.capture_radius {
                    CaptureRadius::Adaptive => (travelled + t) * spacing,
                    CaptureRadius::Fixed(r) => r,
                };
                if miss <= radius {
                    out.insert(faces.clone());
                }
            }
            let Some(h) = hit else { break };
            if depth == params.max_depth {
                break;
            }
            faces.push(h.face);
            let n = frame.face(h.face).normal;
            origin = h.point;
            dir = dir.reflect(n);
            travelled += h.distance;
        }
    }
    out
}

#[cfg(feature = "parallel")]
fn collect_candidates(frame: &SceneFrame, tx: Vec3, rx: Vec3, params: &TraceParams) -> BTreeSet<Vec<u32>> {
    use rayon::prelude::*;
    const CHUNK: usize = 4096;
    let chunks = params.ray_count.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| shoot(frame, tx, rx, params, c * CHUNK..((c + 1) * CHUNK).min(params.ray_count)))
        .reduce(BTreeSet::new, |mut a, mut b| {
            a.append(&mut b);
            a
        })
}

#[cfg(not(feature = "parallel"))]
fn collect_candidates(frame: &SceneFrame, tx: Vec3, rx: Vec3, params: &TraceParams) -> BTreeSet<Vec<u32>> {
    shoot(frame, tx, rx, params, 0..params.ray_count)
}

/// Mirror `p` across the plane through `q` with unit normal `n`.
fn mirror(p: Vec3, q: Vec3, n: Vec3) -> Vec3 {
    p - n * (2.0 * (p - q).dot(n))
}

/// Exact specular points for a face sequence, or `None` if the sequence
/// admits no specular path through its planes.
pub fn specular_points(frame: &SceneFrame, tx: Vec3, rx: Vec3, faces: &[u32]) -> Option<Vec<Vec3>> {
    let planes: Vec<(Vec3, Vec3)> = faces
        .iter()
        .map(|&f| (frame.triangle(f)[0], frame.face(f).normal))
        .collect();
    image_path(tx, rx, &planes)
}

/// Image construction over planes `(point, unit normal)`; returns the
/// interaction points in order.
pub fn image_path(tx: Vec3, rx: Vec3, planes: &[(Vec3, Vec3)]) -> Option<Vec<Vec3>> {
    let mut images = Vec::with_capacity(planes.len());
    let mut src = tx;
    for &(q, n) in planes {
        src = mirror(src, q, n);
        images.push(src);
    }
    let mut pts = alloc::vec![Vec3::ZERO; planes.len()];
    let mut target = rx;
    for k in (0..planes.len()).rev() {
        let (q, n) = planes[k];
        let img = images[k];
        let d = target - img;
        let denom = d.dot(n);
        if denom.abs() < 1e-15 {
            return None;
        }
        let s = (q - img).dot(n) / denom;
        if !(s > 0.0 && s < 1.0) {
            return None;
        }
        let p = img + d * s;
        pts[k] = p;
        target = p;
    }
    Some(pts)
}

fn refine(frame: &SceneFrame, tx: Vec3, rx: Vec3, seq: &[u32]) -> Option<PropagationPath> {
    let interior = specular_points(frame, tx, rx, seq)?;
    let mut points = Vec::with_capacity(seq.len() + 2);
    points.push(tx);
    points.extend_from_slice(&interior);
    points.push(rx);

    let mut hits = Vec::with_capacity(seq.len());
    for k in 0..seq.len() {
        let from = points[k];
        let to = points[k + 1];
        let len = from.distance(to);
        if len <= MIN_SEGMENT {
            return None;
        }
        let t_min = if k == 0 { MIN_HIT_DISTANCE } else { OCCLUSION_EPSILON };
        let hit = frame.intersect_range(from, to - from, t_min, f64::INFINITY)?;
        let tol = 1e-6 * len.max(1.0);
        if (hit.distance - len).abs() > tol {
            return None;
        }
        // the face actually hit must lie in the plane the point was solved on
        let want = frame.face(seq[k]);
        let got = frame.face(hit.face);
        if got.normal.dot(want.normal).abs() < 1.0 - 1e-9 {
            return None;
        }
        if (to - frame.triangle(hit.face)[0]).dot(got.normal).abs() > 1e-6 {
            return None;
        }
        hits.push(Interaction {
            face: hit.face,
            mesh: got.mesh,
            local_face: got.local_face,
            material: got.material,
            face_vertices: got.vertices,
            representative_vertex: got.representative_vertex(),
            normal: got.normal,
            incidence_angle: 0.0,
            substituted_vertex: None,
        });
    }
    let last = points[seq.len()];
    if last.distance(rx) <= MIN_SEGMENT || frame.occluded(last, rx, OCCLUSION_EPSILON) {
        return None;
    }
    Some(PropagationPath::new(points, hits))
}

fn dedup_paths(mut paths: Vec<PropagationPath>, tol: f64) -> Vec<PropagationPath> {
    sort_canonical(&mut paths);
    let mut out: Vec<PropagationPath> = Vec::with_capacity(paths.len());
    for p in paths {
        let dup = out.iter().any(|q| {
            q.depth() == p.depth()
                && (q.face_sequence() == p.face_sequence()
                    || q.points.iter().zip(&p.points).all(|(a, b)| a.distance(*b) <= tol))
        });
        if !dup {
            out.push(p);
        }
    }
    out
}

#[cfg(test)]
mod tests;
