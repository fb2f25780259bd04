//! Scene description: dielectric materials, triangle meshes, animated frame
//! sequences, radar poses and antenna gain patterns.
//!
//! Everything here is immutable once validated and can be shared freely
//! between worker threads.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::geometry::{Rotation, Vec3};

/// Vacuum permittivity ε₀ in F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Faces with an area below this (m²) are dropped at ingestion.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum SceneError {
    NonPositiveFrequency(f64),
    InvalidMaterial { name: String, reason: &'static str },
    FaceIndexOutOfRange { face: usize, index: u32, vertex_count: usize },
    FaceMaterialLength { faces: usize, materials: usize },
    MaterialIndexOutOfRange { face: usize, index: u32, material_count: usize },
    VertexGroupLength { vertices: usize, groups: usize },
    InvalidGroupId { vertex: usize },
    NonFiniteVertex { vertex: usize },
    TopologyMismatch { frame: usize, reason: &'static str },
    InvalidFrameRate(f64),
    ImproperRotation { pose: usize },
    InvalidPattern(&'static str),
}

impl fmt::Display for SceneError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneError::NonPositiveFrequency(v) => write!(f, "frequency must be positive, got {v} Hz"),
            SceneError::InvalidMaterial { name, reason } => write!(f, "material `{name}`: {reason}"),
            SceneError::FaceIndexOutOfRange { face, index, vertex_count } => write!(
                f,
                "face {face} references vertex {index} but the mesh has {vertex_count} vertices"
            ),
            SceneError::FaceMaterialLength { faces, materials } => {
                write!(f, "{faces} faces but {materials} face material entries")
            }
            SceneError::MaterialIndexOutOfRange { face, index, material_count } => write!(
                f,
                "face {face} uses material {index} but only {material_count} materials exist"
            ),
            SceneError::VertexGroupLength { vertices, groups } => {
                write!(f, "{vertices} vertices but {groups} vertex group labels")
            }
            SceneError::InvalidGroupId { vertex } => {
                write!(f, "vertex {vertex} has group id 0; group ids start at 1")
            }
            SceneError::NonFiniteVertex { vertex } => write!(f, "vertex {vertex} is not finite"),
            SceneError::TopologyMismatch { frame, reason } => {
                write!(f, "dynamic frame {frame} does not match frame 0: {reason}")
            }
            SceneError::InvalidFrameRate(r) => write!(f, "frame rate must be positive, got {r}"),
            SceneError::ImproperRotation { pose } => {
                write!(f, "pose {pose} has an orientation that is not a proper rotation")
            }
            SceneError::InvalidPattern(reason) => write!(f, "antenna pattern: {reason}"),
        }
    }
}

impl core::error::Error for SceneError {}

/// ITU-style power-law dielectric: `ε_r = a·f_GHz^b`, `σ = c·f_GHz^d` (S/m).
///
/// Materials are non-magnetic; relative permeability is always 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DielectricMaterial {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl DielectricMaterial {
    pub const VACUUM: DielectricMaterial = DielectricMaterial::new(1.0, 0.0, 0.0, 0.0);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        DielectricMaterial { a, b, c, d }
    }

    pub fn relative_permittivity(&self, freq_hz: f64) -> f64 {
        self.a * libm::pow(freq_hz * 1e-9, self.b)
    }

    pub fn conductivity(&self, freq_hz: f64) -> f64 {
        self.c * libm::pow(freq_hz * 1e-9, self.d)
    }

    /// Complex relative permittivity `η = ε_r − j·σ/(2π f ε₀)`.
    pub fn evaluate(&self, freq_hz: f64) -> Result<Complex64, SceneError> {
        if !(freq_hz > 0.0) || !freq_hz.is_finite() {
            return Err(SceneError::NonPositiveFrequency(freq_hz));
        }
        let eps_r = self.relative_permittivity(freq_hz);
        let sigma = self.conductivity(freq_hz);
        let omega_eps0 = 2.0 * core::f64::consts::PI * freq_hz * VACUUM_PERMITTIVITY;
        Ok(Complex64::new(eps_r, -sigma / omega_eps0))
    }

    fn check(&self, name: &str, band: (f64, f64)) -> Result<(), SceneError> {
        let bad = |reason| {
            Err(SceneError::InvalidMaterial {
                name: name.into(),
                reason,
            })
        };
        if ![self.a, self.b, self.c, self.d].iter().all(|v| v.is_finite()) {
            return bad("coefficients must be finite");
        }
        if !(self.a > 0.0) {
            return bad("coefficient a must be positive");
        }
        if self.c < 0.0 {
            return bad("coefficient c must be non-negative");
        }
        // power laws are monotone in f, so the band edges bound the whole band
        for f in [band.0, band.1] {
            if !(f > 0.0) {
                return Err(SceneError::NonPositiveFrequency(f));
            }
            if self.relative_permittivity(f) < 1.0 {
                return bad("relative permittivity drops below 1 inside the band");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaterialModel {
    Dielectric(DielectricMaterial),
    /// Limit `|η| → ∞`: reflection coefficient −1 at every angle.
    PerfectConductor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    pub model: MaterialModel,
}

impl Material {
    pub fn dielectric(name: impl Into<String>, m: DielectricMaterial) -> Self {
        Material {
            name: name.into(),
            model: MaterialModel::Dielectric(m),
        }
    }

    pub fn perfect_conductor(name: impl Into<String>) -> Self {
        Material {
            name: name.into(),
            model: MaterialModel::PerfectConductor,
        }
    }

    /// Check the model invariants over `[f_lo, f_hi]`.
    pub fn validate_band(&self, f_lo: f64, f_hi: f64) -> Result<(), SceneError> {
        match &self.model {
            MaterialModel::Dielectric(m) => m.check(&self.name, (f_lo, f_hi)),
            MaterialModel::PerfectConductor => Ok(()),
        }
    }
}

/// Coefficient sets from the ITU-R P.2040 building-material table.
pub mod itu {
    use super::DielectricMaterial;

    pub const CONCRETE: DielectricMaterial = DielectricMaterial::new(5.24, 0.0, 0.0462, 0.7822);
    pub const BRICK: DielectricMaterial = DielectricMaterial::new(3.91, 0.0, 0.0238, 0.16);
    pub const PLASTERBOARD: DielectricMaterial = DielectricMaterial::new(2.73, 0.0, 0.0085, 0.9395);
    pub const WOOD: DielectricMaterial = DielectricMaterial::new(1.99, 0.0, 0.0047, 1.0718);
    pub const GLASS: DielectricMaterial = DielectricMaterial::new(6.31, 0.0, 0.0036, 1.3394);
    pub const CEILING_BOARD: DielectricMaterial = DielectricMaterial::new(1.48, 0.0, 0.0011, 1.075);
    pub const CHIPBOARD: DielectricMaterial = DielectricMaterial::new(2.58, 0.0, 0.0217, 0.78);
    pub const FLOORBOARD: DielectricMaterial = DielectricMaterial::new(3.66, 0.0, 0.0044, 1.3515);
    pub const METAL: DielectricMaterial = DielectricMaterial::new(1.0, 0.0, 1e7, 0.0);

    /// Look up a table entry by its lower-case name.
    pub fn by_name(name: &str) -> Option<DielectricMaterial> {
        Some(match name {
            "vacuum" => DielectricMaterial::VACUUM,
            "concrete" => CONCRETE,
            "brick" => BRICK,
            "plasterboard" => PLASTERBOARD,
            "wood" => WOOD,
            "glass" => GLASS,
            "ceiling_board" => CEILING_BOARD,
            "chipboard" => CHIPBOARD,
            "floorboard" => FLOORBOARD,
            "metal" => METAL,
            _ => return None,
        })
    }
}

/// Indexed triangle mesh. Faces are wound counter-clockwise seen from the
/// side their normal points to; tracing treats both sides as reflective.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    face_material: Vec<u32>,
    vertex_group: Option<Vec<u32>>,
}

impl TriangleMesh {
    pub fn new(
        vertices: Vec<Vec3>,
        faces: Vec<[u32; 3]>,
        face_material: Vec<u32>,
        vertex_group: Option<Vec<u32>>,
    ) -> Result<Self, SceneError> {
        if let Some(vertex) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(SceneError::NonFiniteVertex { vertex });
        }
        if faces.len() != face_material.len() {
            return Err(SceneError::FaceMaterialLength {
                faces: faces.len(),
                materials: face_material.len(),
            });
        }
        for (face, f) in faces.iter().enumerate() {
            if let Some(&index) = f.iter().find(|&&i| i as usize >= vertices.len()) {
                return Err(SceneError::FaceIndexOutOfRange {
                    face,
                    index,
                    vertex_count: vertices.len(),
                });
            }
        }
        if let Some(groups) = &vertex_group {
            if groups.len() != vertices.len() {
                return Err(SceneError::VertexGroupLength {
                    vertices: vertices.len(),
                    groups: groups.len(),
                });
            }
            if let Some(vertex) = groups.iter().position(|&g| g == 0) {
                return Err(SceneError::InvalidGroupId { vertex });
            }
        }
        Ok(TriangleMesh {
            vertices,
            faces,
            face_material,
            vertex_group,
        })
    }

    /// Mesh where every face uses the same material.
    pub fn with_uniform_material(
        vertices: Vec<Vec3>,
        faces: Vec<[u32; 3]>,
        material: u32,
    ) -> Result<Self, SceneError> {
        let n = faces.len();
        TriangleMesh::new(vertices, faces, vec![material; n], None)
    }

    pub fn with_vertex_groups(mut self, groups: Vec<u32>) -> Result<Self, SceneError> {
        self.vertex_group = Some(groups);
        let TriangleMesh {
            vertices,
            faces,
            face_material,
            vertex_group,
        } = self;
        TriangleMesh::new(vertices, faces, face_material, vertex_group)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn face_material(&self) -> &[u32] {
        &self.face_material
    }

    pub fn vertex_group(&self) -> Option<&[u32]> {
        self.vertex_group.as_deref()
    }

    pub fn face_corners(&self, face: usize) -> [Vec3; 3] {
        let f = self.faces[face];
        [
            self.vertices[f[0] as usize],
            self.vertices[f[1] as usize],
            self.vertices[f[2] as usize],
        ]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.face_corners(face);
        0.5 * (b - a).cross(c - a).norm()
    }

    /// Unit geometric normal, or `None` for a degenerate face.
    pub fn face_normal(&self, face: usize) -> Option<Vec3> {
        let [a, b, c] = self.face_corners(face);
        (b - a).cross(c - a).try_normalize()
    }

    /// Area-weighted vertex normals. Vertices without any non-degenerate
    /// adjacent face get a zero vector.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut acc = vec![Vec3::ZERO; self.vertices.len()];
        for (i, f) in self.faces.iter().enumerate() {
            let [a, b, c] = self.face_corners(i);
            let n = (b - a).cross(c - a);
            for &v in f {
                acc[v as usize] += n;
            }
        }
        acc.into_iter()
            .map(|n| n.try_normalize().unwrap_or(Vec3::ZERO))
            .collect()
    }

    pub fn degenerate_faces(&self) -> Vec<usize> {
        (0..self.faces.len())
            .filter(|&i| !(self.face_area(i) >= DEGENERATE_AREA))
            .collect()
    }

    /// Remove the listed faces (indices must be sorted and unique).
    pub fn remove_faces(&mut self, sorted: &[usize]) {
        if sorted.is_empty() {
            return;
        }
        let mut drop = sorted.iter().peekable();
        let mut keep = Vec::with_capacity(self.faces.len());
        for i in 0..self.faces.len() {
            if drop.peek() == Some(&&i) {
                drop.next();
            } else {
                keep.push(i);
            }
        }
        self.faces = keep.iter().map(|&i| self.faces[i]).collect();
        self.face_material = keep.iter().map(|&i| self.face_material[i]).collect();
    }

    /// Same topology with new vertex positions.
    pub fn with_positions(&self, vertices: Vec<Vec3>) -> Result<Self, SceneError> {
        if vertices.len() != self.vertices.len() {
            return Err(SceneError::TopologyMismatch {
                frame: 0,
                reason: "vertex count differs",
            });
        }
        if let Some(vertex) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(SceneError::NonFiniteVertex { vertex });
        }
        Ok(TriangleMesh {
            vertices,
            ..self.clone()
        })
    }

    pub fn translated(&self, offset: Vec3) -> Self {
        TriangleMesh {
            vertices: self.vertices.iter().map(|&v| v + offset).collect(),
            ..self.clone()
        }
    }

    fn check_materials(&self, count: usize) -> Result<(), SceneError> {
        match self
            .face_material
            .iter()
            .enumerate()
            .find(|(_, &m)| m as usize >= count)
        {
            Some((face, &index)) => Err(SceneError::MaterialIndexOutOfRange {
                face,
                index,
                material_count: count,
            }),
            None => Ok(()),
        }
    }
}

/// Identifies a mesh inside a [`SceneFrameSequence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MeshRef {
    Static(u32),
    Dynamic,
}

/// A face dropped at ingestion because its area was below [`DEGENERATE_AREA`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DroppedFace {
    pub mesh: MeshRef,
    /// Index in the mesh as supplied, before any removal.
    pub face: usize,
}

/// Static geometry plus an animated mesh with fixed topology.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFrameSequence {
    static_meshes: Vec<TriangleMesh>,
    dynamic_frames: Vec<TriangleMesh>,
    frame_rate: f64,
    materials: Vec<Material>,
}

impl SceneFrameSequence {
    /// Validate and assemble a scene.
    ///
    /// Degenerate faces are removed and returned; for the dynamic mesh a face
    /// is removed from every frame if it is degenerate in any of them, so all
    /// frames keep one shared topology.
    pub fn new(
        mut static_meshes: Vec<TriangleMesh>,
        mut dynamic_frames: Vec<TriangleMesh>,
        frame_rate: f64,
        materials: Vec<Material>,
    ) -> Result<(Self, Vec<DroppedFace>), SceneError> {
        if !(frame_rate > 0.0) || !frame_rate.is_finite() {
            return Err(SceneError::InvalidFrameRate(frame_rate));
        }
        for m in static_meshes.iter().chain(dynamic_frames.iter()) {
            m.check_materials(materials.len())?;
        }
        if let Some((first, rest)) = dynamic_frames.split_first() {
            for (i, f) in rest.iter().enumerate() {
                let frame = i + 1;
                let reason = if f.vertices.len() != first.vertices.len() {
                    Some("vertex count differs")
                } else if f.faces.len() != first.faces.len() {
                    Some("face count differs")
                } else if f.faces != first.faces {
                    Some("face indices differ")
                } else if f.face_material != first.face_material {
                    Some("face materials differ")
                } else if f.vertex_group != first.vertex_group {
                    Some("vertex groups differ")
                } else {
                    None
                };
                if let Some(reason) = reason {
                    return Err(SceneError::TopologyMismatch { frame, reason });
                }
            }
        }

        let mut dropped = Vec::new();
        for (i, m) in static_meshes.iter_mut().enumerate() {
            let bad = m.degenerate_faces();
            dropped.extend(bad.iter().map(|&face| DroppedFace {
                mesh: MeshRef::Static(i as u32),
                face,
            }));
            m.remove_faces(&bad);
        }
        let mut bad: Vec<usize> = dynamic_frames.iter().flat_map(|m| m.degenerate_faces()).collect();
        bad.sort_unstable();
        bad.dedup();
        for m in dynamic_frames.iter_mut() {
            m.remove_faces(&bad);
        }
        dropped.extend(bad.iter().map(|&face| DroppedFace {
            mesh: MeshRef::Dynamic,
            face,
        }));
        for d in &dropped {
            log::warn!("dropping degenerate face {} of {:?}", d.face, d.mesh);
        }

        Ok((
            SceneFrameSequence {
                static_meshes,
                dynamic_frames,
                frame_rate,
                materials,
            },
            dropped,
        ))
    }

    /// Scene without any moving geometry.
    pub fn static_scene(
        static_meshes: Vec<TriangleMesh>,
        materials: Vec<Material>,
    ) -> Result<(Self, Vec<DroppedFace>), SceneError> {
        SceneFrameSequence::new(static_meshes, Vec::new(), 1.0, materials)
    }

    pub fn static_meshes(&self) -> &[TriangleMesh] {
        &self.static_meshes
    }

    pub fn dynamic_frames(&self) -> &[TriangleMesh] {
        &self.dynamic_frames
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    /// Number of timestamps; a static scene has one.
    pub fn frame_count(&self) -> usize {
        self.dynamic_frames.len().max(1)
    }

    pub fn dynamic_mesh(&self, frame: usize) -> Option<&TriangleMesh> {
        self.dynamic_frames.get(frame)
    }

    pub fn validate_band(&self, f_lo: f64, f_hi: f64) -> Result<(), SceneError> {
        self.materials
            .iter()
            .try_for_each(|m| m.validate_band(f_lo, f_hi))
    }
}

/// Positions and orientations of one transmitter/receiver pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarPose {
    pub tx_position: Vec3,
    pub tx_orientation: Rotation,
    pub rx_position: Vec3,
    pub rx_orientation: Rotation,
}

impl RadarPose {
    /// Co-located transmitter and receiver.
    pub fn monostatic(position: Vec3, orientation: Rotation) -> Self {
        RadarPose {
            tx_position: position,
            tx_orientation: orientation,
            rx_position: position,
            rx_orientation: orientation,
        }
    }

    pub fn validate(&self, index: usize) -> Result<(), SceneError> {
        if self.tx_orientation.is_proper()
            && self.rx_orientation.is_proper()
            && self.tx_position.is_finite()
            && self.rx_position.is_finite()
        {
            Ok(())
        } else {
            Err(SceneError::ImproperRotation { pose: index })
        }
    }
}

/// Full-sphere field-gain table on a regular (azimuth, elevation) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternTable {
    azimuths: Vec<f64>,
    elevations: Vec<f64>,
    /// Row-major: `gains[el * azimuths.len() + az]`.
    gains: Vec<f64>,
}

impl PatternTable {
    /// `azimuths` must span `[-π, π]` and `elevations` `[-π/2, π/2]`, both
    /// strictly increasing; gains are linear field (amplitude) gains.
    pub fn new(azimuths: Vec<f64>, elevations: Vec<f64>, gains: Vec<f64>) -> Result<Self, SceneError> {
        use core::f64::consts::{FRAC_PI_2, PI};
        let increasing = |v: &[f64]| v.len() >= 2 && v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&azimuths) || !increasing(&elevations) {
            return Err(SceneError::InvalidPattern("grid axes must be strictly increasing"));
        }
        let covers = |v: &[f64], lo: f64, hi: f64| {
            (v[0] - lo).abs() < 1e-9 && (v[v.len() - 1] - hi).abs() < 1e-9
        };
        if !covers(&azimuths, -PI, PI) || !covers(&elevations, -FRAC_PI_2, FRAC_PI_2) {
            return Err(SceneError::InvalidPattern("grid must cover the full sphere"));
        }
        if gains.len() != azimuths.len() * elevations.len() {
            return Err(SceneError::InvalidPattern("gain count does not match the grid"));
        }
        if gains.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(SceneError::InvalidPattern("gains must be finite and non-negative"));
        }
        Ok(PatternTable {
            azimuths,
            elevations,
            gains,
        })
    }

    /// Build from linear power gains, converting to field gains.
    pub fn from_power(azimuths: Vec<f64>, elevations: Vec<f64>, power: Vec<f64>) -> Result<Self, SceneError> {
        if power.iter().any(|g| !(*g >= 0.0)) {
            return Err(SceneError::InvalidPattern("gains must be finite and non-negative"));
        }
        let field = power.into_iter().map(libm::sqrt).collect();
        PatternTable::new(azimuths, elevations, field)
    }

    pub fn azimuths(&self) -> &[f64] {
        &self.azimuths
    }

    pub fn elevations(&self) -> &[f64] {
        &self.elevations
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    fn bracket(axis: &[f64], x: f64) -> (usize, f64) {
        let x = x.clamp(axis[0], axis[axis.len() - 1]);
        let i = match axis.partition_point(|&a| a <= x) {
            0 => 0,
            p => (p - 1).min(axis.len() - 2),
        };
        let t = (x - axis[i]) / (axis[i + 1] - axis[i]);
        (i, t)
    }

    pub fn gain(&self, az: f64, el: f64) -> f64 {
        let (i, u) = Self::bracket(&self.azimuths, az);
        let (j, v) = Self::bracket(&self.elevations, el);
        let n = self.azimuths.len();
        let g = |jj: usize, ii: usize| self.gains[jj * n + ii];
        (1.0 - v) * ((1.0 - u) * g(j, i) + u * g(j, i + 1))
            + v * ((1.0 - u) * g(j + 1, i) + u * g(j + 1, i + 1))
    }
}

/// Antenna field-gain pattern in the antenna's local frame (boresight +x).
#[derive(Debug, Clone, PartialEq)]
pub enum AntennaPattern {
    Isotropic,
    /// `cos(ψ)^q` for off-boresight angle `ψ ≤ 90°`, zero behind.
    CosinePower { exponent: f64 },
    Tabulated(PatternTable),
}

impl AntennaPattern {
    pub fn cosine_power(exponent: f64) -> Result<Self, SceneError> {
        if !(exponent >= 0.0) || !exponent.is_finite() {
            return Err(SceneError::InvalidPattern("cosine exponent must be finite and non-negative"));
        }
        Ok(AntennaPattern::CosinePower { exponent })
    }

    pub fn gain(&self, az: f64, el: f64) -> f64 {
        match self {
            AntennaPattern::Isotropic => 1.0,
            AntennaPattern::CosinePower { exponent } => {
                let c = libm::cos(el) * libm::cos(az);
                if c <= 0.0 {
                    0.0
                } else {
                    libm::pow(c, *exponent)
                }
            }
            AntennaPattern::Tabulated(t) => t.gain(az, el),
        }
    }
}
