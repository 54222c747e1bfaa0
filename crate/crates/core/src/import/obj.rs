//! Wavefront OBJ reader: `v`, `f`, `g` and `o` directives.
//!
//! Every named group or object becomes one mesh. Vertices are shared globally
//! in the file and remapped per group in ascending file order, so a file with a
//! single group keeps its original vertex numbering.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{ImportError, ImportedObject};
use crate::math::Vec3;
use crate::mesh::TriangleMesh;
use crate::transform::Transform;

const DEFAULT_GROUP: &str = "default";

struct Group {
    name: String,
    // (face line, byte offset of the line, triangle as global 0-based indices)
    faces: Vec<(usize, usize, [i64; 3])>,
}

pub fn parse(source: &str) -> Result<Vec<ImportedObject>, ImportError> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut groups: Vec<Group> = Vec::new();
    let mut group_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut active: Option<usize> = None;

    let mut offset = 0usize;
    for (line_no, raw_line) in source.split_inclusive('\n').enumerate() {
        let line_no = line_no + 1;
        let line_offset = offset;
        offset += raw_line.len();

        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let directive = tokens.next().unwrap_or("");
        let err = |message: String| ImportError::Parse {
            line: Some(line_no),
            byte_offset: Some(line_offset),
            message,
        };

        match directive {
            "v" => {
                let coords: Vec<&str> = tokens.collect();
                if coords.len() < 3 {
                    return Err(err(format!("vertex needs 3 coordinates: `{line}`")));
                }
                let mut xyz = [0.0; 3];
                for (slot, tok) in xyz.iter_mut().zip(&coords) {
                    *slot = tok
                        .parse::<f64>()
                        .map_err(|_| err(format!("bad vertex coordinate `{tok}`")))?;
                    if !slot.is_finite() {
                        return Err(err(format!("non-finite vertex coordinate `{tok}`")));
                    }
                }
                vertices.push(xyz.into());
            }
            "g" | "o" => {
                let name = tokens.collect::<Vec<_>>().join(" ");
                let name = if name.is_empty() {
                    DEFAULT_GROUP.to_owned()
                } else {
                    name
                };
                active = Some(*group_index.entry(name.clone()).or_insert_with(|| {
                    groups.push(Group {
                        name,
                        faces: Vec::new(),
                    });
                    groups.len() - 1
                }));
            }
            "f" => {
                let mut poly = Vec::new();
                for tok in tokens {
                    let index_str = tok.split('/').next().unwrap_or("");
                    let i: i64 = index_str
                        .parse()
                        .map_err(|_| err(format!("bad face index `{tok}`")))?;
                    let resolved = match i {
                        0 => return Err(err("face index 0 is invalid (OBJ is 1-based)".into())),
                        i if i > 0 => i - 1,
                        i => vertices.len() as i64 + i,
                    };
                    if resolved < 0 {
                        return Err(err(format!("relative face index {i} points before the first vertex")));
                    }
                    poly.push(resolved);
                }
                if poly.len() < 3 {
                    return Err(err(format!("face needs at least 3 vertices: `{line}`")));
                }
                let g = *active.get_or_insert_with(|| {
                    *group_index.entry(DEFAULT_GROUP.to_owned()).or_insert_with(|| {
                        groups.push(Group {
                            name: DEFAULT_GROUP.to_owned(),
                            faces: Vec::new(),
                        });
                        groups.len() - 1
                    })
                });
                for k in 1..poly.len() - 1 {
                    groups[g]
                        .faces
                        .push((line_no, line_offset, [poly[0], poly[k], poly[k + 1]]));
                }
            }
            // texture coordinates, normals, materials, smoothing, lines, points
            _ => {}
        }
    }

    let mut objects = Vec::new();
    for group in groups {
        if group.faces.is_empty() {
            continue;
        }
        let mut used: BTreeMap<i64, u32> = BTreeMap::new();
        for &(line, byte_offset, tri) in &group.faces {
            for i in tri {
                if i as usize >= vertices.len() {
                    return Err(ImportError::Parse {
                        line: Some(line),
                        byte_offset: Some(byte_offset),
                        message: format!(
                            "face references vertex {} but only {} vertices are defined",
                            i + 1,
                            vertices.len()
                        ),
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(ImportError::Parse {
                    line: Some(line),
                    byte_offset: Some(byte_offset),
                    message: "degenerate face repeats a vertex".into(),
                });
            }
            for i in tri {
                used.insert(i, 0);
            }
        }
        let mut local_vertices = Vec::with_capacity(used.len());
        for (n, (global, local)) in used.iter_mut().enumerate() {
            *local = n as u32;
            local_vertices.push(vertices[*global as usize]);
        }
        let triangles = group
            .faces
            .iter()
            .map(|(_, _, tri)| tri.map(|i| used[&i]))
            .collect();
        let mesh = TriangleMesh::new(local_vertices, triangles).map_err(|e| ImportError::Parse {
            line: None,
            byte_offset: None,
            message: format!("group `{}`: {e}", group.name),
        })?;
        objects.push(ImportedObject {
            name: group.name,
            mesh: Arc::new(mesh),
            pose: Transform::IDENTITY,
        });
    }
    Ok(objects)
}
