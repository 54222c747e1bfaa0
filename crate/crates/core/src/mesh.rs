//! Indexed triangle mesh with derived edge incidence and vertex adjacency.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("vertex {index} has a non-finite coordinate")]
    NonFiniteVertex { index: usize },
    #[error("triangle {triangle} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: u32,
        vertex_count: usize,
    },
    #[error("triangle {triangle} is degenerate: {indices:?}")]
    DegenerateTriangle { triangle: usize, indices: [u32; 3] },
    #[error("mesh has more than u32::MAX vertices")]
    TooManyVertices,
}

/// Undirected edge, stored with the smaller index first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge(u32, u32);

impl Edge {
    pub fn new(a: u32, b: u32) -> Self {
        if a <= b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }

    pub fn endpoints(self) -> (u32, u32) {
        (self.0, self.1)
    }
}

/// Triangle geometry plus the adjacency every selection operation relies on.
///
/// The derived fields are built once at construction; the mesh is immutable
/// afterwards, so adjacency can never drift from the triangle list.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawMesh", into = "RawMesh")]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    edge_incidence: BTreeMap<Edge, u32>,
    neighbors: Vec<Vec<u32>>,
}

impl PartialEq for TriangleMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.triangles == other.triangles
    }
}

#[derive(Clone, Serialize, Deserialize)]
struct RawMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
}

impl TryFrom<RawMesh> for TriangleMesh {
    type Error = MeshError;
    fn try_from(raw: RawMesh) -> Result<Self, MeshError> {
        TriangleMesh::new(raw.vertices, raw.triangles)
    }
}

impl From<TriangleMesh> for RawMesh {
    fn from(m: TriangleMesh) -> Self {
        RawMesh {
            vertices: m.vertices,
            triangles: m.triangles,
        }
    }
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        if u32::try_from(vertices.len()).is_err() {
            return Err(MeshError::TooManyVertices);
        }
        if let Some(index) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(MeshError::NonFiniteVertex { index });
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i as usize >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        triangle: t,
                        index: i,
                        vertex_count: vertices.len(),
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::DegenerateTriangle {
                    triangle: t,
                    indices: *tri,
                });
            }
        }

        let mut edge_incidence = BTreeMap::new();
        let mut neighbors = vec![Vec::new(); vertices.len()];
        for tri in &triangles {
            for (a, b) in tri_edges(tri) {
                *edge_incidence.entry(Edge::new(a, b)).or_insert(0) += 1;
                neighbors[a as usize].push(b);
                neighbors[b as usize].push(a);
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }

        Ok(TriangleMesh {
            vertices,
            triangles,
            edge_incidence,
            neighbors,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Number of triangles incident to each undirected edge.
    pub fn edge_incidence(&self) -> &BTreeMap<Edge, u32> {
        &self.edge_incidence
    }

    /// Sorted one-ring of `v`: every vertex sharing an edge with it.
    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.neighbors[v as usize]
    }

    /// Edges incident to exactly one triangle.
    pub fn boundary_edge_count(&self) -> usize {
        self.edge_incidence.values().filter(|&&c| c == 1).count()
    }

    /// True iff every undirected edge is shared by exactly two triangles.
    ///
    /// Orientation consistency is not checked. A mesh without triangles is
    /// not closed.
    pub fn is_watertight(&self) -> bool {
        !self.edge_incidence.is_empty() && self.edge_incidence.values().all(|&c| c == 2)
    }

    /// Same vertex buffer, restricted to the given triangles.
    pub fn with_triangles(&self, triangles: Vec<[u32; 3]>) -> TriangleMesh {
        TriangleMesh::new(self.vertices.clone(), triangles)
            .expect("triangles drawn from a valid mesh stay valid")
    }

    pub fn face_normal(&self, tri: usize) -> Option<Vec3> {
        let [a, b, c] = self.triangles[tri].map(|i| self.vertices[i as usize]);
        (b - a).cross(c - a).normalized()
    }
}

/// Free-function form of [`TriangleMesh::is_watertight`].
pub fn is_watertight(mesh: &TriangleMesh) -> bool {
    mesh.is_watertight()
}

pub(crate) fn tri_edges(tri: &[u32; 3]) -> [(u32, u32); 3] {
    [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
}

/// Reference shapes used by tests and demos.
pub mod fixtures {
    use super::*;

    pub fn tetrahedron() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
            vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        )
        .unwrap()
    }

    pub fn single_triangle() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    /// Axis-aligned unit cube, 8 vertices and 12 outward-facing triangles.
    pub fn cube() -> TriangleMesh {
        let v = (0..8)
            .map(|i| {
                Vec3::new(
                    (i & 1) as f64,
                    ((i >> 1) & 1) as f64,
                    ((i >> 2) & 1) as f64,
                )
            })
            .collect();
        TriangleMesh::new(
            v,
            vec![
                [0, 2, 3],
                [0, 3, 1], // z = 0
                [4, 5, 7],
                [4, 7, 6], // z = 1
                [0, 1, 5],
                [0, 5, 4], // y = 0
                [2, 6, 7],
                [2, 7, 3], // y = 1
                [0, 4, 6],
                [0, 6, 2], // x = 0
                [1, 3, 7],
                [1, 7, 5], // x = 1
            ],
        )
        .unwrap()
    }

    /// Three-triangle strip over vertices 0..4.
    pub fn strip() -> TriangleMesh {
        TriangleMesh::new(
            (0..5)
                .map(|i| Vec3::new(i as f64 * 0.5, (i % 2) as f64, 0.0))
                .collect(),
            vec![[0, 1, 2], [1, 2, 3], [2, 3, 4]],
        )
        .unwrap()
    }
}
