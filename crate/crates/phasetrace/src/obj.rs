//! Minimal Wavefront OBJ reader/writer: `v`, `f` (polygons are fan
//! triangulated), `usemtl`. Everything else is ignored.

use std::io::{self, BufRead, Write};

use phasetrace_core::scene::TriangleMesh;
use phasetrace_core::Vec3;

#[derive(Debug, thiserror::Error)]
pub enum ObjError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Parsed geometry. `face_material[i]` indexes `material_names`, or is `None`
/// for faces before any `usemtl`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObjMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub face_material: Vec<Option<u32>>,
    pub material_names: Vec<String>,
}

fn parse_err(line: usize, reason: impl Into<String>) -> ObjError {
    ObjError::Parse {
        line,
        reason: reason.into(),
    }
}

pub fn read_obj<R: BufRead>(reader: R) -> Result<ObjMesh, ObjError> {
    let mut mesh = ObjMesh::default();
    let mut current: Option<u32> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.split('#').next().unwrap_or("");
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in c.iter_mut() {
                    let t = tok.next().ok_or_else(|| parse_err(lineno, "vertex needs 3 coordinates"))?;
                    *slot = t
                        .parse::<f64>()
                        .map_err(|e| parse_err(lineno, format!("bad coordinate `{t}`: {e}")))?;
                }
                mesh.vertices.push(Vec3::from_array(c));
            }
            Some("f") => {
                let n = mesh.vertices.len() as i64;
                let idx = tok
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let k: i64 = head
                            .parse()
                            .map_err(|e| parse_err(lineno, format!("bad face index `{t}`: {e}")))?;
                        let k = if k < 0 { n + k } else { k - 1 };
                        if k < 0 || k >= n {
                            return Err(parse_err(lineno, format!("face index `{t}` out of range")));
                        }
                        Ok(k as u32)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if idx.len() < 3 {
                    return Err(parse_err(lineno, "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    mesh.faces.push([idx[0], idx[k], idx[k + 1]]);
                    mesh.face_material.push(current);
                }
            }
            Some("usemtl") => {
                let name = tok.next().ok_or_else(|| parse_err(lineno, "usemtl needs a name"))?;
                let id = match mesh.material_names.iter().position(|m| m == name) {
                    Some(p) => p,
                    None => {
                        mesh.material_names.push(name.to_string());
                        mesh.material_names.len() - 1
                    }
                };
                current = Some(id as u32);
            }
            _ => {}
        }
    }
    Ok(mesh)
}

/// Write a mesh; `material_names[face_material[i]]` is emitted via `usemtl`.
pub fn write_obj<W: Write>(mut w: W, mesh: &TriangleMesh, material_names: &[String]) -> io::Result<()> {
    writeln!(w, "# {} vertices, {} faces", mesh.vertices().len(), mesh.faces().len())?;
    for v in mesh.vertices() {
        writeln!(w, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    let mut current = None;
    for (f, &m) in mesh.faces().iter().zip(mesh.face_material()) {
        if current != Some(m) {
            let name = material_names
                .get(m as usize)
                .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, format!("no name for material {m}")))?;
            writeln!(w, "usemtl {name}")?;
            current = Some(m);
        }
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

/// Vertex-group sidecar: one positive integer label per line, `#` comments.
pub fn read_groups<R: BufRead>(reader: R) -> Result<Vec<u32>, ObjError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        let g: u32 = t
            .parse()
            .map_err(|e| parse_err(i + 1, format!("bad group label `{t}`: {e}")))?;
        out.push(g);
    }
    Ok(out)
}

pub fn write_groups<W: Write>(mut w: W, groups: &[u32]) -> io::Result<()> {
    for g in groups {
        writeln!(w, "{g}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quad_is_fan_triangulated() {
        let src = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nusemtl concrete\nf 1 2 3 4\n";
        let m = read_obj(src.as_bytes()).unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert_eq!(m.face_material, vec![Some(0), Some(0)]);
        assert_eq!(m.material_names, vec!["concrete".to_string()]);
    }

    #[test]
    fn slash_and_negative_indices() {
        let src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2//2 -1\n";
        let m = read_obj(src.as_bytes()).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2]]);
        assert_eq!(m.face_material, vec![None]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = read_obj("v 0 0 0\nv 1 0\n".as_bytes()).unwrap_err();
        assert!(err.to_string().starts_with("line 2"), "{err}");
        let err = read_obj("v 0 0 0\nf 1 2 3\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");
    }

    #[test]
    fn groups_parse() {
        assert_eq!(read_groups("1\n# c\n2\n\n2\n".as_bytes()).unwrap(), vec![1, 2, 2]);
        assert!(read_groups("x\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn write_then_read_is_bitwise_stable(
            coords in proptest::collection::vec(-1e3f64..1e3, 9..60),
            mats in proptest::collection::vec(0u32..3, 1..20),
        ) {
            let n = coords.len() / 3;
            let verts: Vec<Vec3> = (0..n).map(|i| Vec3::new(coords[3 * i], coords[3 * i + 1], coords[3 * i + 2])).collect();
            let faces: Vec<[u32; 3]> = (0..mats.len()).map(|i| {
                let a = (i % n) as u32;
                [a, ((i + 1) % n) as u32, ((i + 2) % n) as u32]
            }).collect();
            let mesh = TriangleMesh::new(verts.clone(), faces.clone(), mats.clone(), None).unwrap();
            let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
            let mut buf = Vec::new();
            write_obj(&mut buf, &mesh, &names).unwrap();
            let back = read_obj(buf.as_slice()).unwrap();
            let bits = |v: &[Vec3]| v.iter().flat_map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back.vertices), bits(&verts));
            prop_assert_eq!(back.faces, faces);
            let resolved: Vec<&str> = back.face_material.iter().map(|m| back.material_names[m.unwrap() as usize].as_str()).collect();
            let expected: Vec<&str> = mats.iter().map(|&m| names[m as usize].as_str()).collect();
            prop_assert_eq!(resolved, expected);
        }
    }
}
