//! Vertex selections on a mesh and their one-ring refinement.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;
use crate::mesh::TriangleMesh;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("vertex index {index} out of range for mesh with {vertex_count} vertices")]
    IndexOutOfRange { index: u32, vertex_count: usize },
    #[error("selection is empty or induces no triangle")]
    EmptySelection,
    #[error("degenerate camera pose: {0}")]
    DegeneratePose(&'static str),
    #[error("no selected geometry lies in front of the camera near plane")]
    NothingVisible,
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("padding must be in [0, 0.5), got {0}")]
    InvalidPadding(f64),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
}

/// Set of vertex indices on one object's mesh. Ordered, so duplicates cannot occur.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexSelection {
    pub object_id: String,
    pub indices: BTreeSet<u32>,
}

impl VertexSelection {
    pub fn new(object_id: impl Into<String>, indices: impl IntoIterator<Item = u32>) -> Self {
        VertexSelection {
            object_id: object_id.into(),
            indices: indices.into_iter().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, v: u32) -> bool {
        self.indices.contains(&v)
    }

    /// Checks every index against the mesh.
    pub fn check(&self, mesh: &TriangleMesh) -> Result<(), SelectionError> {
        match self.indices.iter().next_back() {
            Some(&max) if max as usize >= mesh.vertex_count() => Err(SelectionError::IndexOutOfRange {
                index: max,
                vertex_count: mesh.vertex_count(),
            }),
            _ => Ok(()),
        }
    }

    fn with_indices(&self, indices: BTreeSet<u32>) -> VertexSelection {
        VertexSelection {
            object_id: self.object_id.clone(),
            indices,
        }
    }
}

/// Adds every vertex sharing an edge with a selected vertex.
pub fn expand_selection(mesh: &TriangleMesh, sel: &VertexSelection) -> Result<VertexSelection, SelectionError> {
    sel.check(mesh)?;
    let mut out = sel.indices.clone();
    for &v in &sel.indices {
        out.extend(mesh.neighbors(v).iter().copied());
    }
    Ok(sel.with_indices(out))
}

/// Drops every selected vertex that has an edge-neighbor outside the selection.
pub fn shrink_selection(mesh: &TriangleMesh, sel: &VertexSelection) -> Result<VertexSelection, SelectionError> {
    sel.check(mesh)?;
    let kept = sel
        .indices
        .iter()
        .copied()
        .filter(|&v| mesh.neighbors(v).iter().all(|n| sel.contains(*n)))
        .collect();
    Ok(sel.with_indices(kept))
}

/// Outcome of closed-mesh vetting for a selection.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedMeshReport {
    /// Triangles whose three vertices are all selected, on the original vertex buffer.
    pub submesh: TriangleMesh,
    pub watertight: bool,
    pub boundary_edges: usize,
    /// Edges shared by more than two induced triangles.
    pub non_manifold_edges: usize,
}

impl ClosedMeshReport {
    pub fn induced_triangles(&self) -> usize {
        self.submesh.triangle_count()
    }
}

/// Triangles of `mesh` whose vertices are all in `sel`, in mesh order.
pub fn induced_triangles(mesh: &TriangleMesh, sel: &VertexSelection) -> Vec<[u32; 3]> {
    mesh.triangles()
        .iter()
        .filter(|t| t.iter().all(|v| sel.contains(*v)))
        .copied()
        .collect()
}

pub fn validate_selection(mesh: &TriangleMesh, sel: &VertexSelection) -> Result<ClosedMeshReport, SelectionError> {
    sel.check(mesh)?;
    let tris = induced_triangles(mesh, sel);
    if tris.is_empty() {
        return Err(SelectionError::EmptySelection);
    }
    let submesh = mesh.with_triangles(tris);
    let incidence = submesh.edge_incidence();
    Ok(ClosedMeshReport {
        watertight: crate::mesh::is_watertight(&submesh),
        boundary_edges: submesh.boundary_edge_count(),
        non_manifold_edges: incidence.values().filter(|&&c| c > 2).count(),
        submesh,
    })
}

/// Euclidean distance in metres.
pub fn measure_distance(a: Vec3, b: Vec3) -> Result<f64, SelectionError> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(SelectionError::NonFiniteInput);
    }
    let d = (a - b).length();
    if d.is_finite() {
        Ok(d)
    } else {
        Err(SelectionError::NonFiniteInput)
    }
}
