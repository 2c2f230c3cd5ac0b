//! Procedural meshes: test primitives and the liver model.

use std::collections::HashMap;

use super::{TriMesh, Vec3};

/// Geodesic sphere: 20·4^subdivisions outward-facing triangles.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|v| v * radius).collect();
    TriMesh::new(verts, faces).expect("icosphere is well formed")
}

/// Regular tetrahedron centered at the origin with outward winding.
pub fn tetrahedron(scale: f64) -> TriMesh {
    let s = 1.0 / 2f64.sqrt();
    TriMesh::new(
        vec![
            Vec3::new(1.0, 0.0, -s) * scale,
            Vec3::new(-1.0, 0.0, -s) * scale,
            Vec3::new(0.0, 1.0, s) * scale,
            Vec3::new(0.0, -1.0, s) * scale,
        ],
        vec![[0, 2, 3], [1, 3, 2], [0, 1, 2], [0, 3, 1]],
    )
    .expect("tetrahedron is well formed")
}

/// Flat `n × n`-cell grid in the z = 0 plane spanning `[-half, half]²`, facing +z.
pub fn flat_grid(half: f64, n: usize) -> TriMesh {
    let mut verts = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = -half + 2.0 * half * i as f64 / n as f64;
            let y = -half + 2.0 * half * j as f64 / n as f64;
            verts.push(Vec3::new(x, y, 0.0));
        }
    }
    let mut tris = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let a = j * (n + 1) + i;
            let b = a + 1;
            let c = a + n + 2;
            let d = a + n + 1;
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    TriMesh::new(verts, tris).expect("grid is well formed")
}

/// Analytic liver-like solid used to generate the bundled asset.
///
/// Axes: x lateral (right lobe toward +x), y cranio-caudal (the clinical
/// span direction), z anterior (probe side, dorsal is -z). The body is a
/// tapered ellipsoid, thicker in the right lobe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiverShape {
    /// Half of the lateral width (m).
    pub half_width: f64,
    /// Half of the cranio-caudal span (m).
    pub half_span: f64,
    /// Half thickness of the right lobe (m).
    pub half_thickness: f64,
    /// Left-lobe thickness as a fraction of the right lobe's.
    pub left_taper: f64,
}

impl Default for LiverShape {
    fn default() -> Self {
        LiverShape {
            half_width: 0.09,
            half_span: 0.05,
            half_thickness: 0.04,
            left_taper: 0.55,
        }
    }
}

impl LiverShape {
    /// Maps a unit-sphere direction onto the liver surface.
    pub fn surface_from_sphere(&self, s: Vec3) -> Vec3 {
        let lobe = (1.0 + s.x) * 0.5;
        let thickness = self.half_thickness * (self.left_taper + (1.0 - self.left_taper) * lobe);
        Vec3::new(self.half_width * s.x, self.half_span * s.y, thickness * s.z)
    }

    /// Anterior surface point above `(x, y)` (which must lie inside the outline).
    pub fn anterior_point(&self, x: f64, y: f64) -> Option<Vec3> {
        let sx = x / self.half_width;
        let sy = y / self.half_span;
        let r2 = sx * sx + sy * sy;
        if r2 >= 1.0 {
            return None;
        }
        Some(self.surface_from_sphere(Vec3::new(sx, sy, (1.0 - r2).sqrt())))
    }

    /// Latitude-longitude tessellation with poles on the lateral axis:
    /// `2·slices·(stacks − 1)` triangles.
    pub fn tessellate(&self, slices: usize, stacks: usize) -> TriMesh {
        assert!(slices >= 3 && stacks >= 2);
        let mut verts = Vec::with_capacity(slices * (stacks - 1) + 2);
        verts.push(self.surface_from_sphere(Vec3::X));
        for i in 1..stacks {
            let theta = std::f64::consts::PI * i as f64 / stacks as f64;
            for j in 0..slices {
                let phi = std::f64::consts::TAU * j as f64 / slices as f64;
                let s = Vec3::new(theta.cos(), theta.sin() * phi.cos(), theta.sin() * phi.sin());
                verts.push(self.surface_from_sphere(s));
            }
        }
        verts.push(self.surface_from_sphere(-Vec3::X));
        let last = verts.len() - 1;
        let ring = |i: usize, j: usize| 1 + (i - 1) * slices + (j % slices);
        let mut tris = Vec::with_capacity(2 * slices * (stacks - 1));
        for j in 0..slices {
            tris.push([0, ring(1, j), ring(1, j + 1)]);
        }
        for i in 1..stacks - 1 {
            for j in 0..slices {
                let a = ring(i, j);
                let b = ring(i + 1, j);
                let c = ring(i + 1, j + 1);
                let d = ring(i, j + 1);
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            }
        }
        for j in 0..slices {
            tris.push([last, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
        }
        TriMesh::new(verts, tris).expect("liver tessellation is well formed")
    }
}

/// The full-resolution liver: 40,000 triangles.
pub fn liver_mesh() -> TriMesh {
    LiverShape::default().tessellate(200, 101)
}
