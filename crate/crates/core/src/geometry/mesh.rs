use std::sync::Arc;

use super::{GeometryError, Vec3};

/// Triangles whose area falls at or below this are treated as degenerate (m²).
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec3::splat(f64::INFINITY),
            max: Vec3::splat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.grow(*p);
        }
        b
    }

    pub fn grow(&mut self, p: Vec3) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn merge(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    pub fn inflate(&self, r: f64) -> Aabb {
        Aabb {
            min: self.min - Vec3::splat(r),
            max: self.max + Vec3::splat(r),
        }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x
            && self.max.x >= o.min.x
            && self.min.y <= o.max.y
            && self.max.y >= o.min.y
            && self.min.z <= o.max.z
            && self.max.z >= o.min.z
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_squared(&self, p: Vec3) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        let dz = (self.min.z - p.z).max(0.0).max(p.z - self.max.z);
        dx * dx + dy * dy + dz * dz
    }
}

/// Indexed triangle surface.
///
/// Topology is shared behind an `Arc` so deformed copies (the visual geometry)
/// are cheap to derive from the rest shape.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Arc<[[usize; 3]]>,
    normals: Vec<Vec3>,
}

/// Outcome of building a mesh from raw data.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeshReport {
    pub dropped_degenerate: usize,
    pub isolated_vertices: Vec<usize>,
}

impl TriMesh {
    /// Validates indices, drops degenerate triangles and computes vertex normals.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        Self::with_report(vertices, triangles).map(|(m, _)| m)
    }

    pub fn with_report(
        vertices: Vec<Vec3>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<(Self, MeshReport), GeometryError> {
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::NonFiniteVertex(i));
        }
        let n = vertices.len();
        let mut kept = Vec::with_capacity(triangles.len());
        let mut dropped = 0;
        for (t, tri) in triangles.into_iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= n) {
                return Err(GeometryError::IndexOutOfRange {
                    triangle: t,
                    index: bad,
                    vertex_count: n,
                });
            }
            if triangle_area(&vertices, tri) > DEGENERATE_AREA {
                kept.push(tri);
            } else {
                dropped += 1;
            }
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate triangle(s)");
        }
        let (normals, isolated) = compute_vertex_normals(&vertices, &kept);
        let mesh = TriMesh {
            vertices,
            triangles: kept.into(),
            normals,
        };
        Ok((
            mesh,
            MeshReport {
                dropped_degenerate: dropped,
                isolated_vertices: isolated,
            },
        ))
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn same_topology(&self, other: &TriMesh) -> bool {
        Arc::ptr_eq(&self.triangles, &other.triangles) || self.triangles == other.triangles
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unit geometric normal of triangle `t` (counter-clockwise winding is outward).
    pub fn face_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle(t);
        (b - a).cross(c - a).normalize()
    }

    pub fn centroid(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle(t);
        (a + b + c) / 3.0
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn surface_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&t| triangle_area(&self.vertices, t))
            .sum()
    }

    /// Same topology, new vertex positions; normals are recomputed.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> TriMesh {
        assert_eq!(vertices.len(), self.vertices.len(), "vertex count must match topology");
        let (normals, _) = compute_vertex_normals(&vertices, &self.triangles);
        TriMesh {
            vertices,
            triangles: Arc::clone(&self.triangles),
            normals,
        }
    }

    /// Applies `f` to every vertex, keeping topology.
    pub fn map_vertices(&self, f: impl Fn(Vec3) -> Vec3) -> TriMesh {
        self.with_vertices(self.vertices.iter().map(|&v| f(v)).collect())
    }

    /// Vertex adjacency lists (sorted, deduplicated).
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &[a, b, c] in self.triangles.iter() {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

pub(crate) fn triangle_area(vertices: &[Vec3], [a, b, c]: [usize; 3]) -> f64 {
    let (a, b, c) = (vertices[a], vertices[b], vertices[c]);
    0.5 * (b - a).cross(c - a).norm()
}

/// Area-weighted vertex normals.
///
/// Returns the normals and the indices of vertices with no incident triangle;
/// those get `+z` by convention.
pub fn compute_vertex_normals(vertices: &[Vec3], triangles: &[[usize; 3]]) -> (Vec<Vec3>, Vec<usize>) {
    let mut acc = vec![Vec3::ZERO; vertices.len()];
    let mut touched = vec![false; vertices.len()];
    for &[a, b, c] in triangles {
        // cross product length is twice the area, so the sum is area weighted
        let n = (vertices[b] - vertices[a]).cross(vertices[c] - vertices[a]);
        for i in [a, b, c] {
            acc[i] += n;
            touched[i] = true;
        }
    }
    let mut isolated = Vec::new();
    let normals = acc
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            if !touched[i] {
                isolated.push(i);
            }
            n.try_normalize(0.0).unwrap_or(Vec3::Z)
        })
        .collect();
    if !isolated.is_empty() {
        log::warn!("{} isolated vertices got the default +z normal", isolated.len());
    }
    (normals, isolated)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> TriMesh {
        TriMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn planar_quad_normals_point_up() {
        for n in quad().vertex_normals() {
            assert_eq!(*n, Vec3::Z);
        }
    }

    #[test]
    fn regular_tetrahedron_normals_sum_faces() {
        let s = 1.0 / 2f64.sqrt();
        let v = vec![
            Vec3::new(1.0, 0.0, -s),
            Vec3::new(-1.0, 0.0, -s),
            Vec3::new(0.0, 1.0, s),
            Vec3::new(0.0, -1.0, s),
        ];
        let t = vec![[0, 2, 3], [1, 3, 2], [0, 1, 2], [0, 3, 1]];
        let m = TriMesh::new(v.clone(), t.clone()).unwrap();
        // hand computation: equal areas, so the normal is the normalized sum of unit face normals
        for (i, n) in m.vertex_normals().iter().enumerate() {
            let sum: Vec3 = (0..4)
                .filter(|&f| t[f].contains(&i))
                .map(|f| m.face_normal(f))
                .sum();
            let expect = sum.normalize();
            assert!((*n - expect).norm() < 1e-12);
            // regular tetrahedron centered at origin: vertex normal is radial
            assert!((*n - v[i].normalize()).norm() < 1e-12);
        }
    }

    #[test]
    fn isolated_vertex_defaults_to_z() {
        let (m, report) = TriMesh::with_report(
            vec![
                Vec3::ZERO,
                Vec3::X,
                Vec3::Y,
                Vec3::new(5.0, 5.0, 5.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(report.isolated_vertices, vec![3]);
        assert_eq!(m.vertex_normals()[3], Vec3::Z);
    }

    #[test]
    fn degenerate_triangles_are_dropped() {
        let (m, report) = TriMesh::with_report(
            vec![Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::new(2.0, 0.0, 0.0)],
            vec![[0, 1, 2], [0, 1, 3]],
        )
        .unwrap();
        assert_eq!(m.triangle_count(), 1);
        assert_eq!(report.dropped_degenerate, 1);
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let err = TriMesh::new(vec![Vec3::ZERO, Vec3::X, Vec3::Y], vec![[0, 1, 9]]).unwrap_err();
        assert!(matches!(err, GeometryError::IndexOutOfRange { index: 9, .. }));
    }

    #[test]
    fn aabb_distance() {
        let b = Aabb {
            min: Vec3::ZERO,
            max: Vec3::splat(1.0),
        };
        assert_eq!(b.distance_squared(Vec3::splat(0.5)), 0.0);
        assert_eq!(b.distance_squared(Vec3::new(3.0, 0.5, 0.5)), 4.0);
    }
}
