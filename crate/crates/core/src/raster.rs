//! Virtual snapshot of a selection: fixed-point software rasterizer with flat shading.
//!
//! The selection's induced triangles are transformed into camera space,
//! clipped against the near plane, projected, and reframed so their projected
//! bounding box (plus padding) fills the image. Screen coordinates are snapped
//! to a fixed-point grid and coverage is decided with exact integer edge
//! functions under a top-left fill rule, so the pixel mask is identical on
//! every platform.

use serde::{Deserialize, Serialize};

use crate::camera::CameraPose;
use crate::math::Vec3;
use crate::scene::Scene;
use crate::selection::{induced_triangles, SelectionError, VertexSelection};

pub const BACKGROUND: [u8; 3] = [18, 18, 18];
pub const DEFAULT_PADDING: f64 = 0.10;
/// Vertices closer than this (metres, along the view axis) are clipped.
pub const NEAR_PLANE: f64 = 0.01;
pub const SUBPIXEL_BITS: u32 = 8;
pub const SUBPIXEL_ONE: i64 = 1 << SUBPIXEL_BITS;

const BASE_COLOR: [f64; 3] = [214.0, 204.0, 188.0];
const AMBIENT: f64 = 0.3;
const DIFFUSE: f64 = 0.7;

/// Direction towards the fixed light, normalized (1, 1, 1).
pub fn light_direction() -> Vec3 {
    Vec3::ONE.normalized().expect("non-zero")
}

/// Triangle in fixed-point screen space (x right, y down).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScreenTriangle {
    pub vertices: [[i64; 2]; 3],
    /// Reciprocal view depth at each vertex, for the depth test.
    pub inv_depth: [f64; 3],
    pub color: [u8; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub width: u32,
    pub height: u32,
    pub triangles: Vec<ScreenTriangle>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Row-major RGB8, `3 * width * height` bytes.
    #[serde(skip)]
    pub pixels: Vec<u8>,
    pub width: u32,
    pub height: u32,
    pub camera: CameraPose,
    pub selection: VertexSelection,
}

impl Snapshot {
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels.chunks_exact(3).filter(|p| *p != BACKGROUND).count()
    }

    /// 8-bit RGB PNG, no alpha.
    pub fn to_png(&self) -> Vec<u8> {
        encode_png(&self.pixels, self.width, self.height)
    }
}

pub fn encode_png(rgb: &[u8], width: u32, height: u32) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("writing to a Vec cannot fail");
        writer.write_image_data(rgb).expect("buffer length matches dimensions");
    }
    out
}

/// Renders the selection's induced sub-mesh as seen from `camera`.
pub fn render_snapshot(
    scene: &Scene,
    camera: &CameraPose,
    sel: &VertexSelection,
    padding: f64,
) -> Result<Snapshot, SelectionError> {
    let projection = project_selection(scene, camera, sel, padding)?;
    Ok(Snapshot {
        pixels: rasterize(&projection),
        width: projection.width,
        height: projection.height,
        camera: *camera,
        selection: sel.clone(),
    })
}

#[derive(Clone, Copy)]
struct ViewVertex {
    pos: Vec3,
}

impl ViewVertex {
    fn depth(&self) -> f64 {
        -self.pos.z
    }
}

/// Camera-space clipping, projection, framing, and fixed-point snapping.
pub fn project_selection(
    scene: &Scene,
    camera: &CameraPose,
    sel: &VertexSelection,
    padding: f64,
) -> Result<Projection, SelectionError> {
    camera.validate()?;
    if !(padding.is_finite() && (0.0..0.5).contains(&padding)) {
        return Err(SelectionError::InvalidPadding(padding));
    }
    if sel.is_empty() {
        return Err(SelectionError::EmptySelection);
    }
    let object = scene
        .object(&sel.object_id)
        .map_err(|_| SelectionError::UnknownObject(sel.object_id.clone()))?;
    let mesh = object.mesh();
    sel.check(mesh)?;
    let tris = induced_triangles(mesh, sel);
    if tris.is_empty() {
        return Err(SelectionError::EmptySelection);
    }

    let pose = object.current();
    let world: Vec<Vec3> = mesh.vertices().iter().map(|v| pose.apply(*v)).collect();
    let light = light_direction();

    // clipped polygons in view space with their flat color
    let mut polys: Vec<(Vec<ViewVertex>, [u8; 3])> = Vec::new();
    for tri in &tris {
        let w = tri.map(|i| world[i as usize]);
        let color = shade(w, camera.position, light);
        let view = w.map(|p| ViewVertex { pos: camera.to_view(p) });
        let clipped = clip_near(&view);
        if clipped.len() >= 3 {
            polys.push((clipped, color));
        }
    }
    if polys.is_empty() {
        return Err(SelectionError::NothingVisible);
    }

    let project = |v: &ViewVertex| -> (f64, f64) { (v.pos.x / v.depth(), v.pos.y / v.depth()) };
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (poly, _) in &polys {
        for v in poly {
            let (x, y) = project(v);
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
    }

    let (w, h) = (camera.width as f64, camera.height as f64);
    let usable = 1.0 - 2.0 * padding;
    const MIN_EXTENT: f64 = 1e-12;
    let scale = (w * usable / (max_x - min_x).max(MIN_EXTENT)).min(h * usable / (max_y - min_y).max(MIN_EXTENT));
    let (cx, cy) = ((min_x + max_x) * 0.5, (min_y + max_y) * 0.5);
    let to_fixed = |v: f64| (v * SUBPIXEL_ONE as f64).round() as i64;

    let mut triangles = Vec::new();
    for (poly, color) in &polys {
        let screen: Vec<([i64; 2], f64)> = poly
            .iter()
            .map(|v| {
                let (x, y) = project(v);
                let sx = w * 0.5 + (x - cx) * scale;
                let sy = h * 0.5 - (y - cy) * scale;
                ([to_fixed(sx), to_fixed(sy)], 1.0 / v.depth())
            })
            .collect();
        for k in 1..screen.len() - 1 {
            triangles.push(ScreenTriangle {
                vertices: [screen[0].0, screen[k].0, screen[k + 1].0],
                inv_depth: [screen[0].1, screen[k].1, screen[k + 1].1],
                color: *color,
            });
        }
    }
    Ok(Projection {
        width: camera.width,
        height: camera.height,
        triangles,
    })
}

fn shade(tri: [Vec3; 3], eye: Vec3, light: Vec3) -> [u8; 3] {
    let normal = (tri[1] - tri[0]).cross(tri[2] - tri[0]).normalized();
    let lambert = match normal {
        Some(n) => {
            let centroid = (tri[0] + tri[1] + tri[2]) / 3.0;
            // light the side facing the examiner
            let n = if n.dot(eye - centroid) < 0.0 { -n } else { n };
            n.dot(light).max(0.0)
        }
        None => 0.0,
    };
    let intensity = AMBIENT + DIFFUSE * lambert;
    BASE_COLOR.map(|c| (c * intensity).round().clamp(0.0, 255.0) as u8)
}

/// Sutherland–Hodgman against the plane `depth = NEAR_PLANE`.
fn clip_near(tri: &[ViewVertex; 3]) -> Vec<ViewVertex> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let (da, db) = (a.depth() - NEAR_PLANE, b.depth() - NEAR_PLANE);
        if da >= 0.0 {
            out.push(a);
        }
        if (da >= 0.0) != (db >= 0.0) {
            let t = da / (da - db);
            out.push(ViewVertex {
                pos: a.pos + (b.pos - a.pos) * t,
            });
        }
    }
    out
}

/// Signed doubled area of (a, b, p); positive when p is left of a→b in a y-down frame
/// with counter-clockwise-on-screen winding normalized by the caller.
#[inline]
fn edge(a: [i64; 2], b: [i64; 2], p: [i64; 2]) -> i64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Top and left edges own the pixels exactly on them.
#[inline]
fn is_top_left(a: [i64; 2], b: [i64; 2]) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    dy < 0 || (dy == 0 && dx > 0)
}

/// Scan-converts a projection into an RGB8 buffer with a depth test.
pub fn rasterize(p: &Projection) -> Vec<u8> {
    let (w, h) = (p.width as usize, p.height as usize);
    let mut pixels = BACKGROUND.repeat(w * h);
    let mut depth = vec![f64::NEG_INFINITY; w * h];

    for tri in &p.triangles {
        let mut v = tri.vertices;
        let mut inv = tri.inv_depth;
        let area = edge(v[0], v[1], v[2]);
        if area == 0 {
            continue;
        }
        if area < 0 {
            v.swap(1, 2);
            inv.swap(1, 2);
        }
        let area = area.abs();

        let min_x = v.iter().map(|q| q[0]).min().unwrap();
        let max_x = v.iter().map(|q| q[0]).max().unwrap();
        let min_y = v.iter().map(|q| q[1]).min().unwrap();
        let max_y = v.iter().map(|q| q[1]).max().unwrap();
        // pixel i has its center at (i + 1/2) in fixed point
        let half = SUBPIXEL_ONE / 2;
        let first = |lo: i64| ((lo - half + SUBPIXEL_ONE - 1).div_euclid(SUBPIXEL_ONE)).max(0);
        let last = |hi: i64, n: usize| ((hi - half).div_euclid(SUBPIXEL_ONE)).min(n as i64 - 1);
        let (x0, x1) = (first(min_x), last(max_x, w));
        let (y0, y1) = (first(min_y), last(max_y, h));
        if x0 > x1 || y0 > y1 {
            continue;
        }

        // edge k is opposite vertex k
        let edges = [(v[1], v[2]), (v[2], v[0]), (v[0], v[1])];
        let bias = edges.map(|(a, b)| if is_top_left(a, b) { 0 } else { -1 });
        let step_x = edges.map(|(a, b)| -(b[1] - a[1]) * SUBPIXEL_ONE);
        let step_y = edges.map(|(a, b)| (b[0] - a[0]) * SUBPIXEL_ONE);
        let origin = [x0 * SUBPIXEL_ONE + half, y0 * SUBPIXEL_ONE + half];
        let mut row = edges.map(|(a, b)| edge(a, b, origin));

        for y in y0..=y1 {
            let mut e = row;
            for x in x0..=x1 {
                if e[0] + bias[0] >= 0 && e[1] + bias[1] >= 0 && e[2] + bias[2] >= 0 {
                    let idx = y as usize * w + x as usize;
                    let z = (e[0] as f64 * inv[0] + e[1] as f64 * inv[1] + e[2] as f64 * inv[2]) / area as f64;
                    if z > depth[idx] {
                        depth[idx] = z;
                        pixels[3 * idx..3 * idx + 3].copy_from_slice(&tri.color);
                    }
                }
                for k in 0..3 {
                    e[k] += step_x[k];
                }
            }
            for k in 0..3 {
                row[k] += step_y[k];
            }
        }
    }
    pixels
}
