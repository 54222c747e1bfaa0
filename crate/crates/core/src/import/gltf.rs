//! glTF 2.0 reader for static triangle meshes.
//!
//! Supports `.gltf` with embedded (`data:` URI) or sidecar buffers and binary
//! `.glb` containers. Node hierarchies are flattened into world poses; every
//! node carrying a mesh becomes one object, and nodes that reference the same
//! mesh share one geometry allocation.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use base64::Engine as _;
use serde::Deserialize;

use super::{ImportError, ImportedObject};
use crate::math::{Quat, Vec3};
use crate::mesh::TriangleMesh;
use crate::transform::Transform;

const GLB_MAGIC: &[u8; 4] = b"glTF";
const CHUNK_JSON: u32 = 0x4E4F_534A;
const CHUNK_BIN: u32 = 0x004E_4942;

const MODE_TRIANGLES: u32 = 4;
const FLOAT: u32 = 5126;
const UNSIGNED_BYTE: u32 = 5121;
const UNSIGNED_SHORT: u32 = 5123;
const UNSIGNED_INT: u32 = 5125;

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Document {
    asset: Asset,
    #[serde(default)]
    extensions_required: Vec<String>,
    scene: Option<usize>,
    #[serde(default)]
    scenes: Vec<SceneDef>,
    #[serde(default)]
    nodes: Vec<Node>,
    #[serde(default)]
    meshes: Vec<MeshDef>,
    #[serde(default)]
    accessors: Vec<Accessor>,
    #[serde(default)]
    buffer_views: Vec<BufferView>,
    #[serde(default)]
    buffers: Vec<Buffer>,
    #[serde(default)]
    skins: Vec<serde_json::Value>,
    #[serde(default)]
    animations: Vec<serde_json::Value>,
}

#[derive(Deserialize)]
struct Asset {
    version: String,
}

#[derive(Deserialize)]
struct SceneDef {
    #[serde(default)]
    nodes: Vec<usize>,
}

#[derive(Deserialize)]
struct Node {
    name: Option<String>,
    mesh: Option<usize>,
    skin: Option<usize>,
    #[serde(default)]
    children: Vec<usize>,
    matrix: Option<[f64; 16]>,
    translation: Option<[f64; 3]>,
    /// glTF order: x, y, z, w
    rotation: Option<[f64; 4]>,
    scale: Option<[f64; 3]>,
}

#[derive(Deserialize)]
struct MeshDef {
    name: Option<String>,
    primitives: Vec<Primitive>,
}

#[derive(Deserialize)]
struct Primitive {
    attributes: HashMap<String, usize>,
    indices: Option<usize>,
    mode: Option<u32>,
    #[serde(default)]
    targets: Vec<serde_json::Value>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Accessor {
    buffer_view: Option<usize>,
    #[serde(default)]
    byte_offset: usize,
    component_type: u32,
    count: usize,
    #[serde(rename = "type")]
    kind: String,
    sparse: Option<serde_json::Value>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct BufferView {
    buffer: usize,
    #[serde(default)]
    byte_offset: usize,
    byte_length: usize,
    byte_stride: Option<usize>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Buffer {
    uri: Option<String>,
    byte_length: usize,
}

fn structural(message: impl Into<String>) -> ImportError {
    ImportError::Parse {
        line: None,
        byte_offset: None,
        message: message.into(),
    }
}

fn unsupported(feature: impl Into<String>) -> ImportError {
    ImportError::UnsupportedFeature(feature.into())
}

/// Parses `.gltf` JSON text or a `.glb` container. Relative buffer URIs are
/// resolved against `base_dir`.
pub fn parse(bytes: &[u8], base_dir: Option<&Path>) -> Result<Vec<ImportedObject>, ImportError> {
    let (json, bin_chunk) = if bytes.starts_with(GLB_MAGIC) {
        split_glb(bytes)?
    } else {
        (bytes, None)
    };

    let doc: Document = serde_json::from_slice(json).map_err(|e| ImportError::Parse {
        line: Some(e.line()),
        byte_offset: line_col_to_offset(json, e.line(), e.column()),
        message: e.to_string(),
    })?;

    if !doc.asset.version.starts_with('2') {
        return Err(unsupported(format!("glTF version {}", doc.asset.version)));
    }
    if let Some(ext) = doc.extensions_required.first() {
        return Err(unsupported(format!("required extension {ext}")));
    }
    if !doc.skins.is_empty() || doc.nodes.iter().any(|n| n.skin.is_some()) {
        return Err(unsupported("skinning"));
    }
    if !doc.animations.is_empty() {
        return Err(unsupported("animation"));
    }

    let buffers = load_buffers(&doc, bin_chunk, base_dir)?;
    let roots = root_nodes(&doc)?;

    let mut meshes: HashMap<usize, Arc<TriangleMesh>> = HashMap::new();
    let mut objects = Vec::new();
    let mut stack: Vec<(usize, Transform, usize)> = roots
        .into_iter()
        .rev()
        .map(|n| (n, Transform::IDENTITY, 0))
        .collect();
    while let Some((node_idx, parent, depth)) = stack.pop() {
        if depth > doc.nodes.len() {
            return Err(structural("node hierarchy contains a cycle"));
        }
        let node = doc
            .nodes
            .get(node_idx)
            .ok_or_else(|| structural(format!("/nodes/{node_idx} does not exist")))?;
        let world = parent.compose(&node_transform(node, node_idx)?);
        if let Some(mesh_idx) = node.mesh {
            let mesh_def = doc
                .meshes
                .get(mesh_idx)
                .ok_or_else(|| structural(format!("/nodes/{node_idx}/mesh: mesh {mesh_idx} does not exist")))?;
            let mesh = match meshes.get(&mesh_idx) {
                Some(m) => m.clone(),
                None => {
                    let m = Arc::new(build_mesh(&doc, &buffers, mesh_idx)?);
                    meshes.insert(mesh_idx, m.clone());
                    m
                }
            };
            let name = node
                .name
                .clone()
                .or_else(|| mesh_def.name.clone())
                .unwrap_or_else(|| format!("node{node_idx}"));
            objects.push(ImportedObject {
                name,
                mesh,
                pose: world,
            });
        }
        for &child in node.children.iter().rev() {
            stack.push((child, world, depth + 1));
        }
    }
    Ok(objects)
}

fn split_glb(bytes: &[u8]) -> Result<(&[u8], Option<&[u8]>), ImportError> {
    let u32_at = |off: usize| -> Result<u32, ImportError> {
        bytes
            .get(off..off + 4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| ImportError::Parse {
                line: None,
                byte_offset: Some(off),
                message: "truncated GLB container".into(),
            })
    };
    let version = u32_at(4)?;
    if version != 2 {
        return Err(unsupported(format!("GLB container version {version}")));
    }
    let total = (u32_at(8)? as usize).min(bytes.len());
    let mut off = 12;
    let mut json = None;
    let mut bin = None;
    while off + 8 <= total {
        let len = u32_at(off)? as usize;
        let kind = u32_at(off + 4)?;
        let start = off + 8;
        let chunk = bytes.get(start..start + len).ok_or(ImportError::Parse {
            line: None,
            byte_offset: Some(off),
            message: "GLB chunk extends past end of file".into(),
        })?;
        match kind {
            CHUNK_JSON if json.is_none() => json = Some(chunk),
            CHUNK_BIN if bin.is_none() => bin = Some(chunk),
            _ => {}
        }
        off = start + len;
    }
    let json = json.ok_or_else(|| structural("GLB container has no JSON chunk"))?;
    Ok((json, bin))
}

fn line_col_to_offset(text: &[u8], line: usize, column: usize) -> Option<usize> {
    if line == 0 {
        return None;
    }
    let mut current = 1;
    for (i, b) in text.iter().enumerate() {
        if current == line {
            return Some((i + column.saturating_sub(1)).min(text.len()));
        }
        if *b == b'\n' {
            current += 1;
        }
    }
    Some(text.len())
}

fn load_buffers(doc: &Document, bin: Option<&[u8]>, base_dir: Option<&Path>) -> Result<Vec<Vec<u8>>, ImportError> {
    let mut out = Vec::with_capacity(doc.buffers.len());
    for (i, buf) in doc.buffers.iter().enumerate() {
        let data = match &buf.uri {
            None => bin
                .ok_or_else(|| structural(format!("/buffers/{i} has no uri and there is no GLB binary chunk")))?
                .to_vec(),
            Some(uri) if uri.starts_with("data:") => {
                let (_, payload) = uri
                    .split_once(";base64,")
                    .ok_or_else(|| unsupported(format!("/buffers/{i}: non-base64 data URI")))?;
                base64::engine::general_purpose::STANDARD
                    .decode(payload)
                    .map_err(|e| structural(format!("/buffers/{i}: invalid base64: {e}")))?
            }
            Some(uri) => {
                if uri.contains("://") {
                    return Err(unsupported(format!("/buffers/{i}: remote uri {uri}")));
                }
                let rel = Path::new(uri);
                if rel.is_absolute() || rel.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
                    return Err(structural(format!("/buffers/{i}: uri {uri} escapes the scene directory")));
                }
                let path = base_dir.unwrap_or_else(|| Path::new(".")).join(rel);
                std::fs::read(&path).map_err(|e| ImportError::Io {
                    path: path.clone(),
                    source: e,
                })?
            }
        };
        if data.len() < buf.byte_length {
            return Err(structural(format!(
                "/buffers/{i}: byteLength {} but only {} bytes available",
                buf.byte_length,
                data.len()
            )));
        }
        out.push(data);
    }
    Ok(out)
}

fn root_nodes(doc: &Document) -> Result<Vec<usize>, ImportError> {
    if !doc.scenes.is_empty() {
        let idx = doc.scene.unwrap_or(0);
        let scene = doc
            .scenes
            .get(idx)
            .ok_or_else(|| structural(format!("/scene: scene {idx} does not exist")))?;
        return Ok(scene.nodes.clone());
    }
    let mut is_child = vec![false; doc.nodes.len()];
    for n in &doc.nodes {
        for &c in &n.children {
            if let Some(slot) = is_child.get_mut(c) {
                *slot = true;
            }
        }
    }
    Ok((0..doc.nodes.len()).filter(|&i| !is_child[i]).collect())
}

fn node_transform(node: &Node, idx: usize) -> Result<Transform, ImportError> {
    if let Some(m) = node.matrix {
        return decompose_matrix(&m).ok_or_else(|| unsupported(format!("/nodes/{idx}/matrix: singular, mirrored or sheared matrix")));
    }
    let translation = node.translation.map(Vec3::from).unwrap_or(Vec3::ZERO);
    let rotation = match node.rotation {
        Some([x, y, z, w]) => Quat::new(w, x, y, z)
            .normalized()
            .ok_or_else(|| structural(format!("/nodes/{idx}/rotation is zero")))?,
        None => Quat::IDENTITY,
    };
    let scale = node.scale.map(Vec3::from).unwrap_or(Vec3::ONE);
    let t = Transform {
        translation,
        rotation,
        scale,
    };
    t.validate()
        .map_err(|e| unsupported(format!("/nodes/{idx}: {e}")))?;
    Ok(t)
}

/// Splits a column-major affine matrix into translation, rotation and positive scale.
fn decompose_matrix(m: &[f64; 16]) -> Option<Transform> {
    if m.iter().any(|v| !v.is_finite()) || m[3] != 0.0 || m[7] != 0.0 || m[11] != 0.0 || m[15] != 1.0 {
        return None;
    }
    let cols = [
        Vec3::new(m[0], m[1], m[2]),
        Vec3::new(m[4], m[5], m[6]),
        Vec3::new(m[8], m[9], m[10]),
    ];
    let scale = Vec3::new(cols[0].length(), cols[1].length(), cols[2].length());
    if scale.x <= 0.0 || scale.y <= 0.0 || scale.z <= 0.0 {
        return None;
    }
    let r = [cols[0] / scale.x, cols[1] / scale.y, cols[2] / scale.z];
    if r[0].cross(r[1]).dot(r[2]) < 0.0 {
        return None;
    }
    const ORTHO_TOL: f64 = 1e-6;
    if r[0].dot(r[1]).abs() > ORTHO_TOL || r[1].dot(r[2]).abs() > ORTHO_TOL || r[0].dot(r[2]).abs() > ORTHO_TOL {
        return None;
    }
    let rows = [
        [r[0].x, r[1].x, r[2].x],
        [r[0].y, r[1].y, r[2].y],
        [r[0].z, r[1].z, r[2].z],
    ];
    Some(Transform {
        translation: Vec3::new(m[12], m[13], m[14]),
        rotation: Quat::from_rotation_rows(rows),
        scale,
    })
}

fn build_mesh(doc: &Document, buffers: &[Vec<u8>], mesh_idx: usize) -> Result<TriangleMesh, ImportError> {
    let def = &doc.meshes[mesh_idx];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (p, prim) in def.primitives.iter().enumerate() {
        let at = format!("/meshes/{mesh_idx}/primitives/{p}");
        let mode = prim.mode.unwrap_or(MODE_TRIANGLES);
        if mode != MODE_TRIANGLES {
            return Err(unsupported(format!("{at}: primitive mode {mode} (only triangles)")));
        }
        if !prim.targets.is_empty() {
            return Err(unsupported(format!("{at}: morph targets")));
        }
        let pos_idx = *prim
            .attributes
            .get("POSITION")
            .ok_or_else(|| structural(format!("{at}: missing POSITION attribute")))?;
        let positions = read_positions(doc, buffers, pos_idx)?;
        let base = vertices.len() as u64;
        let indices = match prim.indices {
            Some(idx) => read_indices(doc, buffers, idx)?,
            None => (0..positions.len() as u32).collect(),
        };
        if indices.len() % 3 != 0 {
            return Err(structural(format!("{at}: index count {} is not a multiple of 3", indices.len())));
        }
        for tri in indices.chunks_exact(3) {
            let mut t = [0u32; 3];
            for (slot, &i) in t.iter_mut().zip(tri) {
                if i as usize >= positions.len() {
                    return Err(structural(format!("{at}: index {i} out of range for {} positions", positions.len())));
                }
                *slot = u32::try_from(base + i as u64).map_err(|_| structural("too many vertices"))?;
            }
            triangles.push(t);
        }
        vertices.extend(positions);
    }
    TriangleMesh::new(vertices, triangles).map_err(|e| structural(format!("/meshes/{mesh_idx}: {e}")))
}

struct View<'a> {
    data: &'a [u8],
    stride: usize,
    count: usize,
}

fn accessor_view<'a>(doc: &Document, buffers: &'a [Vec<u8>], idx: usize, elem_size: usize) -> Result<View<'a>, ImportError> {
    let acc = doc
        .accessors
        .get(idx)
        .ok_or_else(|| structural(format!("/accessors/{idx} does not exist")))?;
    if acc.sparse.is_some() {
        return Err(unsupported(format!("/accessors/{idx}: sparse accessor")));
    }
    let view_idx = acc
        .buffer_view
        .ok_or_else(|| unsupported(format!("/accessors/{idx}: accessor without bufferView")))?;
    let view = doc
        .buffer_views
        .get(view_idx)
        .ok_or_else(|| structural(format!("/bufferViews/{view_idx} does not exist")))?;
    let buffer = buffers
        .get(view.buffer)
        .ok_or_else(|| structural(format!("/buffers/{} does not exist", view.buffer)))?;
    let view_bytes = buffer
        .get(view.byte_offset..view.byte_offset + view.byte_length)
        .ok_or_else(|| structural(format!("/bufferViews/{view_idx} exceeds its buffer")))?;
    let stride = view.byte_stride.unwrap_or(elem_size);
    if stride < elem_size {
        return Err(structural(format!("/bufferViews/{view_idx}: byteStride {stride} smaller than element")));
    }
    let needed = if acc.count == 0 {
        0
    } else {
        acc.byte_offset + stride * (acc.count - 1) + elem_size
    };
    let data = view_bytes
        .get(acc.byte_offset..)
        .filter(|_| needed <= view_bytes.len())
        .ok_or_else(|| structural(format!("/accessors/{idx} reads past the end of its bufferView")))?;
    Ok(View {
        data,
        stride,
        count: acc.count,
    })
}

fn read_positions(doc: &Document, buffers: &[Vec<u8>], idx: usize) -> Result<Vec<Vec3>, ImportError> {
    let acc = doc
        .accessors
        .get(idx)
        .ok_or_else(|| structural(format!("/accessors/{idx} does not exist")))?;
    if acc.component_type != FLOAT || acc.kind != "VEC3" {
        return Err(unsupported(format!(
            "/accessors/{idx}: POSITION must be FLOAT VEC3, got {} {}",
            acc.component_type, acc.kind
        )));
    }
    let view = accessor_view(doc, buffers, idx, 12)?;
    let mut out = Vec::with_capacity(view.count);
    for i in 0..view.count {
        let e = &view.data[i * view.stride..i * view.stride + 12];
        let f = |k: usize| f32::from_le_bytes([e[k], e[k + 1], e[k + 2], e[k + 3]]) as f64;
        let v = Vec3::new(f(0), f(4), f(8));
        if !v.is_finite() {
            return Err(structural(format!("/accessors/{idx}: non-finite position at element {i}")));
        }
        out.push(v);
    }
    Ok(out)
}

fn read_indices(doc: &Document, buffers: &[Vec<u8>], idx: usize) -> Result<Vec<u32>, ImportError> {
    let acc = doc
        .accessors
        .get(idx)
        .ok_or_else(|| structural(format!("/accessors/{idx} does not exist")))?;
    if acc.kind != "SCALAR" {
        return Err(structural(format!("/accessors/{idx}: indices must be SCALAR")));
    }
    let size = match acc.component_type {
        UNSIGNED_BYTE => 1,
        UNSIGNED_SHORT => 2,
        UNSIGNED_INT => 4,
        other => return Err(unsupported(format!("/accessors/{idx}: index component type {other}"))),
    };
    let view = accessor_view(doc, buffers, idx, size)?;
    Ok((0..view.count)
        .map(|i| {
            let e = &view.data[i * view.stride..];
            match size {
                1 => e[0] as u32,
                2 => u16::from_le_bytes([e[0], e[1]]) as u32,
                _ => u32::from_le_bytes([e[0], e[1], e[2], e[3]]),
            }
        })
        .collect())
}
