//! Scene manifest (TOML) loading and saving.
//!
//! ```toml
//! frame_rate = 20.0                # Hz, only meaningful with dynamic meshes
//!
//! [[materials]]
//! name = "wall"
//! itu = "concrete"                 # or a/b/c/d, or perfect_conductor = true
//!
//! [[static]]
//! mesh = "room.obj"
//! material = "wall"                # used for faces without `usemtl`
//!
//! [[dynamic]]                      # every mover must have the same frame count
//! frames = ["body_000.obj", "body_001.obj"]
//! groups = "body.groups"           # optional per-vertex labels (>= 1)
//! # or: base = "sphere.obj" plus motion = "motion.csv" with columns dx,dy,dz
//!
//! [poses]                          # optional, same syntax as the scenario config
//! kind = "single"
//! position = [0, 0, 1]
//! ```
//!
//! Paths are relative to the manifest. Multiple dynamic movers are merged
//! into one animated mesh; their group labels are offset so they stay
//! distinct. Movers without a sidecar get 10 cm voxel groups when any other
//! mover has labels.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use phasetrace_core::coherence::{VertexGrouping, DEFAULT_VOXEL_EDGE};
use phasetrace_core::scene::{itu, DielectricMaterial, DroppedFace, Material, MaterialModel, RadarPose, SceneFrameSequence, TriangleMesh};
use phasetrace_core::Vec3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::obj::{self, ObjMesh};
use crate::poses::{PoseEntry, PoseSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    #[serde(default = "one")]
    pub frame_rate: f64,
    #[serde(default)]
    pub materials: Vec<MaterialEntry>,
    #[serde(default, rename = "static")]
    pub static_meshes: Vec<StaticEntry>,
    #[serde(default)]
    pub dynamic: Vec<DynamicEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poses: Option<PoseSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub itu: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub perfect_conductor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticEntry {
    pub mesh: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicEntry {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frames: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<PathBuf>,
}

/// Per-frame rigid translation row of a motion CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionRow {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub scene: SceneFrameSequence,
    pub poses: Option<Vec<RadarPose>>,
    pub dropped: Vec<DroppedFace>,
}

impl MaterialEntry {
    fn to_material(&self) -> std::result::Result<Material, String> {
        let coeffs = [self.a, self.b, self.c, self.d];
        let any_coeff = coeffs.iter().any(Option::is_some);
        let kinds = [self.itu.is_some(), any_coeff, self.perfect_conductor];
        if kinds.iter().filter(|&&k| k).count() != 1 {
            return Err("give exactly one of itu, a/b/c/d or perfect_conductor".into());
        }
        if self.perfect_conductor {
            return Ok(Material::perfect_conductor(&self.name));
        }
        let m = match &self.itu {
            Some(n) => itu::by_name(n).ok_or_else(|| format!("unknown ITU material `{n}`"))?,
            None => DielectricMaterial::new(
                self.a.ok_or("coefficient `a` is required")?,
                self.b.unwrap_or(0.0),
                self.c.unwrap_or(0.0),
                self.d.unwrap_or(0.0),
            ),
        };
        Ok(Material::dielectric(&self.name, m))
    }

    fn from_material(m: &Material) -> Self {
        let mut e = MaterialEntry {
            name: m.name.clone(),
            itu: None,
            a: None,
            b: None,
            c: None,
            d: None,
            perfect_conductor: false,
        };
        match m.model {
            MaterialModel::PerfectConductor => e.perfect_conductor = true,
            MaterialModel::Dielectric(d) => {
                e.a = Some(d.a);
                e.b = Some(d.b);
                e.c = Some(d.c);
                e.d = Some(d.d);
            }
        }
        e
    }
}

fn read_obj_file(path: &Path) -> Result<ObjMesh> {
    let f = File::open(path).map_err(|e| Error::asset(path, e))?;
    obj::read_obj(BufReader::new(f)).map_err(|e| Error::asset(path, e))
}

fn read_groups_file(path: &Path) -> Result<Vec<u32>> {
    let f = File::open(path).map_err(|e| Error::asset(path, e))?;
    obj::read_groups(BufReader::new(f)).map_err(|e| Error::asset(path, e))
}

pub fn read_motion(path: &Path) -> Result<Vec<Vec3>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::asset(path, e))?;
    r.deserialize::<MotionRow>()
        .map(|row| {
            let row = row.map_err(|e| Error::asset(path, e))?;
            Ok(Vec3::new(row.dx, row.dy, row.dz))
        })
        .collect()
}

/// Map per-face `usemtl` names (or the entry default) onto material indices.
fn face_materials(mesh: &ObjMesh, default: Option<&str>, names: &[String], path: &Path) -> Result<Vec<u32>> {
    let lookup = |n: &str| {
        names
            .iter()
            .position(|m| m == n)
            .map(|i| i as u32)
            .ok_or_else(|| Error::asset(path, format!("unknown material `{n}`")))
    };
    let default = default.map(lookup).transpose()?;
    let resolved = mesh
        .material_names
        .iter()
        .map(|n| lookup(n))
        .collect::<Result<Vec<_>>>()?;
    mesh.face_material
        .iter()
        .enumerate()
        .map(|(f, m)| match m {
            Some(i) => Ok(resolved[*i as usize]),
            None => default.ok_or_else(|| Error::asset(path, format!("face {f} has no material"))),
        })
        .collect()
}

fn build_mesh(mesh: ObjMesh, mats: Vec<u32>, groups: Option<Vec<u32>>, path: &Path) -> Result<TriangleMesh> {
    TriangleMesh::new(mesh.vertices, mesh.faces, mats, groups).map_err(|e| Error::asset(path, e))
}

/// One mover's frames before merging.
struct Mover {
    frames: Vec<TriangleMesh>,
    groups: Option<Vec<u32>>,
}

fn load_mover(entry: &DynamicEntry, dir: &Path, names: &[String], manifest: &Path) -> Result<Mover> {
    let default = entry.material.as_deref();
    let frames = match (&entry.base, &entry.motion, entry.frames.is_empty()) {
        (None, None, false) => entry
            .frames
            .iter()
            .map(|f| {
                let p = dir.join(f);
                let obj = read_obj_file(&p)?;
                let mats = face_materials(&obj, default, names, &p)?;
                build_mesh(obj, mats, None, &p)
            })
            .collect::<Result<Vec<_>>>()?,
        (Some(base), Some(motion), true) => {
            let p = dir.join(base);
            let obj = read_obj_file(&p)?;
            let mats = face_materials(&obj, default, names, &p)?;
            let mesh = build_mesh(obj, mats, None, &p)?;
            read_motion(&dir.join(motion))?
                .into_iter()
                .map(|d| mesh.translated(d))
                .collect()
        }
        _ => {
            return Err(Error::asset(
                manifest,
                "dynamic entry needs either `frames` or both `base` and `motion`",
            ))
        }
    };
    let groups = entry
        .groups
        .as_ref()
        .map(|g| read_groups_file(&dir.join(g)))
        .transpose()?;
    Ok(Mover { frames, groups })
}

fn merge_movers(movers: Vec<Mover>, manifest: &Path) -> Result<Vec<TriangleMesh>> {
    let Some(n_frames) = movers.first().map(|m| m.frames.len()) else {
        return Ok(Vec::new());
    };
    if let Some(i) = movers.iter().position(|m| m.frames.len() != n_frames) {
        return Err(Error::asset(
            manifest,
            format!("dynamic mover {i} has {} frames, mover 0 has {n_frames}", movers[i].frames.len()),
        ));
    }
    if movers.len() == 1 {
        let Mover { frames, groups } = movers.into_iter().next().unwrap();
        return match groups {
            None => Ok(frames),
            Some(g) => frames
                .into_iter()
                .map(|m| m.with_vertex_groups(g.clone()).map_err(|e| Error::asset(manifest, e)))
                .collect(),
        };
    }

    let labelled = movers.iter().any(|m| m.groups.is_some());
    let mut labels: Vec<u32> = Vec::new();
    if labelled {
        for (i, m) in movers.iter().enumerate() {
            let offset = labels.iter().copied().max().unwrap_or(0);
            let own = match &m.groups {
                Some(g) => g.clone(),
                None => {
                    let base = m.frames.first().map(|f| f.vertices()).unwrap_or(&[]);
                    let vg = VertexGrouping::voxel_clusters(base, DEFAULT_VOXEL_EDGE)
                        .map_err(|e| Error::asset(manifest, format!("mover {i}: {e}")))?;
                    (0..vg.vertex_count() as u32).map(|v| vg.group_of(v)).collect()
                }
            };
            labels.extend(own.iter().map(|g| g + offset));
        }
    }

    (0..n_frames)
        .map(|f| {
            let (mut v, mut faces, mut mats) = (Vec::new(), Vec::new(), Vec::new());
            for m in &movers {
                let mesh = &m.frames[f];
                let off = v.len() as u32;
                v.extend_from_slice(mesh.vertices());
                faces.extend(mesh.faces().iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
                mats.extend_from_slice(mesh.face_material());
            }
            let groups = labelled.then(|| labels.clone());
            TriangleMesh::new(v, faces, mats, groups).map_err(|e| Error::asset(manifest, format!("frame {f}: {e}")))
        })
        .collect()
}

pub fn load_scene(manifest_path: &Path) -> Result<LoadedScene> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::asset(manifest_path, e))?;
    let manifest: SceneManifest = toml::from_str(&text).map_err(|e| Error::asset(manifest_path, e))?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));

    let materials = manifest
        .materials
        .iter()
        .map(|m| m.to_material().map_err(|r| Error::asset(manifest_path, format!("material `{}`: {r}", m.name))))
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = materials.iter().map(|m| m.name.clone()).collect();
    if let Some((i, n)) = names.iter().enumerate().find(|(i, n)| names[..*i].contains(n)) {
        return Err(Error::asset(manifest_path, format!("material `{n}` declared twice (entry {i})")));
    }

    let statics = manifest
        .static_meshes
        .iter()
        .map(|s| {
            let p = dir.join(&s.mesh);
            let obj = read_obj_file(&p)?;
            let mats = face_materials(&obj, s.material.as_deref(), &names, &p)?;
            build_mesh(obj, mats, None, &p)
        })
        .collect::<Result<Vec<_>>>()?;
    let movers = manifest
        .dynamic
        .iter()
        .map(|d| load_mover(d, dir, &names, manifest_path))
        .collect::<Result<Vec<_>>>()?;
    let dynamic = merge_movers(movers, manifest_path)?;

    let (scene, dropped) =
        SceneFrameSequence::new(statics, dynamic, manifest.frame_rate, materials).map_err(|e| Error::asset(manifest_path, e))?;
    let poses = manifest
        .poses
        .as_ref()
        .map(|p| p.generate("poses"))
        .transpose()
        .map_err(|e| Error::asset(manifest_path, e))?;
    if let Some(ps) = &poses {
        for (i, p) in ps.iter().enumerate() {
            p.validate(i).map_err(|e| Error::asset(manifest_path, e))?;
        }
    }
    Ok(LoadedScene { scene, poses, dropped })
}

fn pose_entry(p: &RadarPose) -> PoseEntry {
    let mut e = PoseEntry::monostatic(p.tx_position.to_array());
    e.direction = Some(p.tx_orientation.rotate(Vec3::X).to_array());
    if p.rx_position != p.tx_position {
        e.rx_position = Some(p.rx_position.to_array());
    }
    e
}

fn write_file(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::output(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w).map_err(|e| Error::output(path, e))?;
    std::io::Write::flush(&mut w).map_err(|e| Error::output(path, e))
}

/// Write `scene` as a manifest plus OBJ files into `dir`; returns the manifest path.
///
/// Loading the result reproduces the vertex, face, material and group arrays
/// bit for bit. Poses are exported by boresight direction only.
pub fn save_scene(dir: &Path, scene: &SceneFrameSequence, poses: Option<&[RadarPose]>) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::output(dir, e))?;
    let names: Vec<String> = scene.materials().iter().map(|m| m.name.clone()).collect();
    let mut manifest = SceneManifest {
        frame_rate: scene.frame_rate(),
        materials: scene.materials().iter().map(MaterialEntry::from_material).collect(),
        static_meshes: Vec::new(),
        dynamic: Vec::new(),
        poses: poses.map(|ps| PoseSpec::List {
            items: ps.iter().map(pose_entry).collect(),
        }),
    };
    for (i, m) in scene.static_meshes().iter().enumerate() {
        let name = format!("static_{i:03}.obj");
        write_file(&dir.join(&name), |w| obj::write_obj(w, m, &names))?;
        manifest.static_meshes.push(StaticEntry {
            mesh: name.into(),
            material: None,
        });
    }
    if !scene.dynamic_frames().is_empty() {
        let mut entry = DynamicEntry {
            frames: Vec::new(),
            base: None,
            motion: None,
            material: None,
            groups: None,
        };
        for (f, m) in scene.dynamic_frames().iter().enumerate() {
            let name = format!("dynamic_{f:05}.obj");
            write_file(&dir.join(&name), |w| obj::write_obj(w, m, &names))?;
            entry.frames.push(name.into());
        }
        if let Some(g) = scene.dynamic_frames()[0].vertex_group() {
            write_file(&dir.join("dynamic.groups"), |w| obj::write_groups(w, g))?;
            entry.groups = Some("dynamic.groups".into());
        }
        manifest.dynamic.push(entry);
    }
    let path = dir.join("scene.toml");
    let text = toml::to_string_pretty(&manifest).map_err(|e| Error::output(&path, std::io::Error::other(e)))?;
    std::fs::write(&path, text).map_err(|e| Error::output(&path, e))?;
    Ok(path)
}
