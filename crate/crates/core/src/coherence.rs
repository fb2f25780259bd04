//! Phase coherence across radar poses and across animation frames.
//!
//! *Spatial*: paths are traced once from the geometric center of all radar
//! positions; every pose reuses those interaction points and only swaps the
//! endpoints, re-checking occlusion on the two changed segments.
//!
//! *Temporal*: a first hit on the moving mesh is tied to a representative
//! vertex of the hit face (its lowest index). The hit is then replaced by
//! every vertex of that vertex's group, each surviving copy carrying weight
//! `1/N_valid`, so the same surface points contribute frame after frame.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::Vec3;
use crate::scene::{MeshRef, RadarPose, SceneFrameSequence, TriangleMesh};
use crate::tracer::{
    trace_reference_paths, PropagationPath, SceneFrame, TraceParams, MIN_SEGMENT, OCCLUSION_EPSILON,
};

/// Default voxel edge (m) for grouping meshes that carry no group labels.
pub const DEFAULT_VOXEL_EDGE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub enum CoherenceError {
    NoPoses,
    FrameMismatch { reference: usize, frame: usize },
    /// The path's first interaction is not on the dynamic mesh.
    NotDynamicFirstHit,
    InvalidGroupId { vertex: usize },
    GroupingSize { grouping: usize, mesh: usize },
    InvalidVoxelEdge(f64),
    FrameOutOfRange { frame: usize, frames: usize },
    InvalidPose(usize),
}

impl fmt::Display for CoherenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoherenceError::NoPoses => write!(f, "at least one radar pose is required"),
            CoherenceError::FrameMismatch { reference, frame } => write!(
                f,
                "reference paths were traced on frame {reference}, replay requested on frame {frame}"
            ),
            CoherenceError::NotDynamicFirstHit => {
                write!(f, "path does not hit the dynamic mesh first")
            }
            CoherenceError::InvalidGroupId { vertex } => {
                write!(f, "vertex {vertex} has group id 0; group ids start at 1")
            }
            CoherenceError::GroupingSize { grouping, mesh } => write!(
                f,
                "grouping covers {grouping} vertices but the dynamic mesh has {mesh}"
            ),
            CoherenceError::InvalidVoxelEdge(e) => write!(f, "voxel edge must be positive, got {e}"),
            CoherenceError::FrameOutOfRange { frame, frames } => {
                write!(f, "frame {frame} requested but the scene has {frames} frames")
            }
            CoherenceError::InvalidPose(i) => write!(f, "pose {i} is not valid"),
        }
    }
}

impl core::error::Error for CoherenceError {}

/// Component-wise mean of the transmitter and receiver positions.
pub fn reference_pose(poses: &[RadarPose]) -> Result<(Vec3, Vec3), CoherenceError> {
    if poses.is_empty() {
        return Err(CoherenceError::NoPoses);
    }
    let n = poses.len() as f64;
    let (mut tx, mut rx) = (Vec3::ZERO, Vec3::ZERO);
    for p in poses {
        tx += p.tx_position;
        rx += p.rx_position;
    }
    Ok((tx / n, rx / n))
}

/// Paths traced once at the reference pose and replayed for every pose.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePathSet {
    pub reference_tx: Vec3,
    pub reference_rx: Vec3,
    pub paths: Vec<PropagationPath>,
    pub frame: usize,
}

impl ReferencePathSet {
    pub fn trace(frame: &SceneFrame, tx: Vec3, rx: Vec3, params: &TraceParams) -> Self {
        ReferencePathSet {
            reference_tx: tx,
            reference_rx: rx,
            paths: trace_reference_paths(frame, tx, rx, params),
            frame: frame.frame(),
        }
    }

    /// Trace at the geometric center of `poses`.
    pub fn for_poses(frame: &SceneFrame, poses: &[RadarPose], params: &TraceParams) -> Result<Self, CoherenceError> {
        let (tx, rx) = reference_pose(poses)?;
        Ok(ReferencePathSet::trace(frame, tx, rx, params))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReplayOptions {
    /// Re-check every segment rather than only the two changed end segments.
    /// Needed when moving geometry may cut through interior segments.
    pub full_path_occlusion: bool,
}

/// Swap each reference path's endpoints for the pose's transmitter and
/// receiver, keeping the interaction points fixed. Blocked paths are dropped.
pub fn replay_paths(
    reference: &ReferencePathSet,
    pose: &RadarPose,
    frame: &SceneFrame,
    options: ReplayOptions,
) -> Result<Vec<PropagationPath>, CoherenceError> {
    if frame.frame() != reference.frame {
        return Err(CoherenceError::FrameMismatch {
            reference: reference.frame,
            frame: frame.frame(),
        });
    }
    let (tx, rx) = (pose.tx_position, pose.rx_position);
    Ok(reference
        .paths
        .iter()
        .map(|p| p.with_endpoints(tx, rx))
        .filter(|p| p.has_distinct_points() && !blocked(p, frame, options.full_path_occlusion))
        .collect())
}

fn blocked(path: &PropagationPath, frame: &SceneFrame, full: bool) -> bool {
    let pts = path.points();
    let n = pts.len();
    let seg = |i: usize| frame.occluded(pts[i], pts[i + 1], OCCLUSION_EPSILON);
    if full || n == 2 {
        (0..n - 1).any(seg)
    } else {
        seg(0) || seg(n - 2)
    }
}

/// Disjoint partition of a mesh's vertices into groups with ids `≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexGrouping {
    group_of: Vec<u32>,
    members: BTreeMap<u32, Vec<u32>>,
}

impl VertexGrouping {
    pub fn from_labels(labels: &[u32]) -> Result<Self, CoherenceError> {
        let mut members: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (v, &g) in labels.iter().enumerate() {
            if g == 0 {
                return Err(CoherenceError::InvalidGroupId { vertex: v });
            }
            members.entry(g).or_default().push(v as u32);
        }
        Ok(VertexGrouping {
            group_of: labels.to_vec(),
            members,
        })
    }

    /// Group labels from the mesh if present, otherwise voxel clustering with
    /// edge [`DEFAULT_VOXEL_EDGE`].
    pub fn for_mesh(mesh: &TriangleMesh) -> Result<Self, CoherenceError> {
        match mesh.vertex_group() {
            Some(labels) => VertexGrouping::from_labels(labels),
            None => VertexGrouping::voxel_clusters(mesh.vertices(), DEFAULT_VOXEL_EDGE),
        }
    }

    /// Cluster vertices by the axis-aligned voxel of side `edge` they fall
    /// in. Group ids follow the sorted voxel coordinates, so the result only
    /// depends on the positions.
    pub fn voxel_clusters(vertices: &[Vec3], edge: f64) -> Result<Self, CoherenceError> {
        if !(edge > 0.0) || !edge.is_finite() {
            return Err(CoherenceError::InvalidVoxelEdge(edge));
        }
        let key = |p: Vec3| {
            [
                libm::floor(p.x / edge) as i64,
                libm::floor(p.y / edge) as i64,
                libm::floor(p.z / edge) as i64,
            ]
        };
        let mut ids: BTreeMap<[i64; 3], u32> = vertices.iter().map(|&p| (key(p), 0)).collect();
        for (i, id) in ids.values_mut().enumerate() {
            *id = i as u32 + 1;
        }
        let labels: Vec<u32> = vertices.iter().map(|&p| ids[&key(p)]).collect();
        VertexGrouping::from_labels(&labels)
    }

    pub fn vertex_count(&self) -> usize {
        self.group_of.len()
    }

    pub fn group_count(&self) -> usize {
        self.members.len()
    }

    pub fn group_of(&self, vertex: u32) -> u32 {
        self.group_of[vertex as usize]
    }

    /// Vertices of group `group` in ascending order.
    pub fn members(&self, group: u32) -> &[u32] {
        self.members.get(&group).map_or(&[], |v| v.as_slice())
    }

    pub fn groups(&self) -> impl Iterator<Item = (u32, &[u32])> {
        self.members.iter().map(|(&g, v)| (g, v.as_slice()))
    }
}

/// Dynamic mesh of one frame with its vertex normals.
#[derive(Debug, Clone)]
pub struct DynamicSurface<'a> {
    pub mesh: &'a TriangleMesh,
    pub normals: Vec<Vec3>,
}

impl<'a> DynamicSurface<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Self {
        DynamicSurface {
            mesh,
            normals: mesh.vertex_normals(),
        }
    }
}

/// Result of a vertex-group expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub group: u32,
    /// Surviving substituted paths, in ascending vertex order.
    pub paths: Vec<PropagationPath>,
    /// Number of survivors; each carries amplitude weight `1/n_valid`.
    pub n_valid: usize,
}

/// Expand a path whose first interaction is on the dynamic mesh, using the
/// representative vertex recorded on the hit (the face's lowest index).
pub fn expand_first_hit(
    path: &PropagationPath,
    grouping: &VertexGrouping,
    surface: &DynamicSurface<'_>,
    frame: &SceneFrame,
) -> Result<Expansion, CoherenceError> {
    let first = path.hits().first().ok_or(CoherenceError::NotDynamicFirstHit)?;
    expand_with_representative(path, first.representative_vertex, grouping, surface, frame)
}

/// Expansion with an explicit representative vertex.
pub fn expand_with_representative(
    path: &PropagationPath,
    representative: u32,
    grouping: &VertexGrouping,
    surface: &DynamicSurface<'_>,
    frame: &SceneFrame,
) -> Result<Expansion, CoherenceError> {
    let first = match path.hits().first() {
        Some(h) if h.mesh == MeshRef::Dynamic => *h,
        _ => return Err(CoherenceError::NotDynamicFirstHit),
    };
    let vertices = surface.mesh.vertices();
    if grouping.vertex_count() != vertices.len() {
        return Err(CoherenceError::GroupingSize {
            grouping: grouping.vertex_count(),
            mesh: vertices.len(),
        });
    }
    let group = grouping.group_of(representative);
    let tx = path.tx();
    let next = path.points()[2];
    let mut paths = Vec::new();
    for &v in grouping.members(group) {
        let p = vertices[v as usize];
        if p.distance(tx) <= MIN_SEGMENT || p.distance(next) <= MIN_SEGMENT {
            continue;
        }
        if frame.occluded(tx, p, OCCLUSION_EPSILON) || frame.occluded(p, next, OCCLUSION_EPSILON) {
            continue;
        }
        let normal = match surface.normals[v as usize] {
            n if n != Vec3::ZERO => n,
            _ => first.normal,
        };
        let mut hit = first;
        hit.representative_vertex = representative;
        hit.substituted_vertex = Some(v);
        hit.normal = normal;
        paths.push(path.with_interaction(0, p, hit));
    }
    let n_valid = paths.len();
    Ok(Expansion { group, paths, n_valid })
}

/// A path with its amplitude weight (`1/N_valid` for expanded paths).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPath {
    pub path: PropagationPath,
    pub weight: f64,
}

/// How the representative vertex of a dynamic hit face is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RepresentativeRule {
    /// The face's lowest-index vertex (stable across frames).
    #[default]
    LowestIndex,
    /// A pseudo-random corner per frame and path. Breaks temporal coherence;
    /// only useful as an ablation baseline.
    Scrambled { seed: u64 },
}

impl RepresentativeRule {
    fn pick(&self, corners: [u32; 3], frame: usize, path: usize) -> u32 {
        match *self {
            RepresentativeRule::LowestIndex => *corners.iter().min().unwrap(),
            RepresentativeRule::Scrambled { seed } => {
                let h = splitmix64(seed ^ splitmix64(frame as u64 ^ splitmix64(path as u64)));
                corners[(h % 3) as usize]
            }
        }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoherenceOptions {
    pub replay: ReplayOptions,
    pub representative: RepresentativeRule,
}

/// Bookkeeping for one expanded source path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpansionRecord {
    /// Index of the source path in the replayed set.
    pub source: usize,
    pub group: u32,
    pub n_valid: usize,
}

/// Paths for one (frame, pose) pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PosePaths {
    pub paths: Vec<WeightedPath>,
    pub expansions: Vec<ExpansionRecord>,
}

/// All poses of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePaths {
    pub frame: usize,
    pub reference: ReferencePathSet,
    pub poses: Vec<PosePaths>,
}

/// Per-frame, per-pose coherent path sets for a (possibly animated) scene.
///
/// Each frame is traced once at the reference pose of `poses`, replayed to
/// every pose, and dynamic first hits are expanded over their vertex group.
/// `frames` defaults to every frame of the scene; static scenes may request
/// any number of frames (their geometry never changes).
pub fn coherent_paths(
    scene: &SceneFrameSequence,
    poses: &[RadarPose],
    grouping: Option<&VertexGrouping>,
    params: &TraceParams,
    options: &CoherenceOptions,
    frames: Option<core::ops::Range<usize>>,
) -> Result<Vec<FramePaths>, CoherenceError> {
    for (i, p) in poses.iter().enumerate() {
        p.validate(i).map_err(|_| CoherenceError::InvalidPose(i))?;
    }
    let (ref_tx, ref_rx) = reference_pose(poses)?;
    let dynamic = scene.dynamic_frames().len();
    let frames = frames.unwrap_or(0..scene.frame_count());
    if dynamic > 0 && frames.end > dynamic {
        return Err(CoherenceError::FrameOutOfRange {
            frame: frames.end - 1,
            frames: dynamic,
        });
    }
    let derived;
    let grouping = match (grouping, scene.dynamic_mesh(0)) {
        (Some(g), _) => Some(g),
        (None, Some(m)) => {
            derived = VertexGrouping::for_mesh(m)?;
            Some(&derived)
        }
        (None, None) => None,
    };

    let one = |t: usize| -> Result<FramePaths, CoherenceError> {
        let frame = SceneFrame::from_sequence(scene, t);
        let reference = ReferencePathSet::trace(&frame, ref_tx, ref_rx, params);
        let surface = scene.dynamic_mesh(t).map(DynamicSurface::new);
        let mut out = Vec::with_capacity(poses.len());
        for pose in poses {
            let replayed = replay_paths(&reference, pose, &frame, options.replay)?;
            out.push(weigh(replayed, t, grouping, surface.as_ref(), &frame, options)?);
        }
        Ok(FramePaths {
            frame: t,
            reference,
            poses: out,
        })
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        frames.into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        frames.map(one).collect()
    }
}

fn weigh(
    replayed: Vec<PropagationPath>,
    frame_index: usize,
    grouping: Option<&VertexGrouping>,
    surface: Option<&DynamicSurface<'_>>,
    frame: &SceneFrame,
    options: &CoherenceOptions,
) -> Result<PosePaths, CoherenceError> {
    let mut out = PosePaths::default();
    for (i, path) in replayed.into_iter().enumerate() {
        let dynamic_first = path.hits().first().is_some_and(|h| h.mesh == MeshRef::Dynamic);
        match (dynamic_first, grouping, surface) {
            (true, Some(g), Some(s)) => {
                let corners = path.hits()[0].face_vertices;
                let rep = options.representative.pick(corners, frame_index, i);
                let e = expand_with_representative(&path, rep, g, s, frame)?;
                out.expansions.push(ExpansionRecord {
                    source: i,
                    group: e.group,
                    n_valid: e.n_valid,
                });
                let w = 1.0 / e.n_valid.max(1) as f64;
                out.paths
                    .extend(e.paths.into_iter().map(|path| WeightedPath { path, weight: w }));
            }
            _ => out.paths.push(WeightedPath { path, weight: 1.0 }),
        }
    }
    Ok(out)
}

/// Single-pose frame stream: trace at the pose every frame and expand
/// dynamic first hits.
pub fn temporal_path_stream(
    scene: &SceneFrameSequence,
    pose: &RadarPose,
    grouping: Option<&VertexGrouping>,
    params: &TraceParams,
    options: &CoherenceOptions,
    frames: Option<core::ops::Range<usize>>,
) -> Result<Vec<PosePaths>, CoherenceError> {
    Ok(coherent_paths(scene, core::slice::from_ref(pose), grouping, params, options, frames)?
        .into_iter()
        .map(|mut f| f.poses.pop().unwrap_or_default())
        .collect())
}
