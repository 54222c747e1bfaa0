//! Brute-force reference implementations for the test suites.
//!
//! Everything here works on plain arrays and never calls into the
//! implementation crates, so a shared bug cannot hide on both sides.

pub mod geometry {
    use std::collections::{BTreeMap, BTreeSet};

    /// Incidence of every vertex pair, by enumerating all pairs against all triangles.
    pub fn edge_counts(vertex_count: usize, tris: &[[u32; 3]]) -> BTreeMap<(u32, u32), usize> {
        let mut out = BTreeMap::new();
        for a in 0..vertex_count as u32 {
            for b in a + 1..vertex_count as u32 {
                let c = tris.iter().filter(|t| t.contains(&a) && t.contains(&b)).count();
                if c > 0 {
                    out.insert((a, b), c);
                }
            }
        }
        out
    }

    pub fn watertight(vertex_count: usize, tris: &[[u32; 3]]) -> bool {
        let counts = edge_counts(vertex_count, tris);
        !counts.is_empty() && counts.values().all(|&c| c == 2)
    }

    pub fn expand(tris: &[[u32; 3]], sel: &BTreeSet<u32>) -> BTreeSet<u32> {
        let mut out = sel.clone();
        for t in tris {
            if t.iter().any(|v| sel.contains(v)) {
                out.extend(t.iter().copied());
            }
        }
        out
    }

    pub fn shrink(tris: &[[u32; 3]], sel: &BTreeSet<u32>) -> BTreeSet<u32> {
        sel.iter()
            .copied()
            .filter(|v| {
                tris.iter()
                    .filter(|t| t.contains(v))
                    .all(|t| t.iter().all(|w| sel.contains(w)))
            })
            .collect()
    }

    #[derive(Debug, PartialEq, Eq)]
    pub struct Vetting {
        pub watertight: bool,
        pub boundary_edges: usize,
        pub induced_triangles: usize,
    }

    /// `None` when the selection induces no triangle.
    pub fn vet(vertex_count: usize, tris: &[[u32; 3]], sel: &BTreeSet<u32>) -> Option<Vetting> {
        let induced: Vec<[u32; 3]> = tris
            .iter()
            .filter(|t| t.iter().all(|v| sel.contains(v)))
            .copied()
            .collect();
        if induced.is_empty() {
            return None;
        }
        let counts = edge_counts(vertex_count, &induced);
        Some(Vetting {
            watertight: counts.values().all(|&c| c == 2),
            boundary_edges: counts.values().filter(|&&c| c == 1).count(),
            induced_triangles: induced.len(),
        })
    }
}

pub mod pixels {
    /// Per-pixel coverage of fixed-point screen triangles (y down, pixel centers
    /// at `(i + 1/2) * one`), with ties on an edge resolved by the top-left rule.
    pub fn coverage(width: usize, height: usize, subpixel_one: i64, tris: &[[[i64; 2]; 3]]) -> Vec<bool> {
        let mut mask = vec![false; width * height];
        for y in 0..height {
            for x in 0..width {
                let p = [
                    x as i128 * subpixel_one as i128 + subpixel_one as i128 / 2,
                    y as i128 * subpixel_one as i128 + subpixel_one as i128 / 2,
                ];
                mask[y * width + x] = tris.iter().any(|t| inside(t, p));
            }
        }
        mask
    }

    fn inside(t: &[[i64; 2]; 3], p: [i128; 2]) -> bool {
        let v: Vec<[i128; 2]> = t.iter().map(|q| [q[0] as i128, q[1] as i128]).collect();
        let cross = |a: [i128; 2], b: [i128; 2], c: [i128; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let area = cross(v[0], v[1], v[2]);
        if area == 0 {
            return false;
        }
        let order: [usize; 3] = if area > 0 { [0, 1, 2] } else { [0, 2, 1] };
        (0..3).all(|k| {
            let a = v[order[k]];
            let b = v[order[(k + 1) % 3]];
            let s = cross(a, b, p);
            if s != 0 {
                return s > 0;
            }
            // on the edge: owned by top edges (horizontal, heading +x) and left edges (heading -y)
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            dy < 0 || (dy == 0 && dx > 0)
        })
    }
}

pub mod fixtures {
    pub const TETRA_OBJ: &str = "\
# regular corner tetrahedron
o tetra
v 0 0 0
v 1 0 0
v 0 1 0
v 0 0 1
f 1 3 2
f 1 2 4
f 1 4 3
f 2 3 4
";

    /// Unit cube, 8 vertices, 12 triangles.
    pub const CUBE_OBJ: &str = "\
o cube
v 0 0 0
v 1 0 0
v 0 1 0
v 1 1 0
v 0 0 1
v 1 0 1
v 0 1 1
v 1 1 1
f 1 3 4
f 1 4 2
f 5 6 8
f 5 8 7
f 1 2 6
f 1 6 5
f 3 7 8
f 3 8 4
f 1 5 7
f 1 7 3
f 2 4 8
f 2 8 6
";

    /// Octahedron (6 vertices, 8 faces): closed.
    pub const OCTAHEDRON_TRIS: [[u32; 3]; 8] = [
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
}
