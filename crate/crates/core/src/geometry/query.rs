//! Closest-point queries against a triangle mesh.

use super::{Aabb, TriMesh, Vec3};

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub point: Vec3,
    pub triangle: usize,
    pub distance: f64,
}

/// Closest point to `p` on triangle `(a, b, c)` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[inline]
fn better(d2: f64, t: usize, best_d2: f64, best_t: usize) -> bool {
    d2 < best_d2 || (d2 == best_d2 && t < best_t)
}

/// Exhaustive closest point over every triangle; ties go to the lowest index.
pub fn closest_point_on_mesh(p: Vec3, mesh: &TriMesh) -> ClosestPoint {
    let mut best = (f64::INFINITY, usize::MAX, p);
    for t in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.triangle(t);
        let q = closest_point_on_triangle(p, a, b, c);
        let d2 = (p - q).norm_squared();
        if better(d2, t, best.0, best.1) {
            best = (d2, t, q);
        }
    }
    ClosestPoint {
        point: best.2,
        triangle: best.1,
        distance: (p - best.2).norm(),
    }
}

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct BvhNode {
    bounds: Aabb,
    // leaf: triangles[start..start+count]; interior: children at `start` and `start + 1`
    start: usize,
    count: usize,
}

/// Bounding-volume hierarchy over a mesh's triangles.
///
/// Gives the same answer as [`closest_point_on_mesh`], including tie-breaking,
/// at logarithmic cost. Built once per rest geometry.
#[derive(Debug, Clone)]
pub struct MeshIndex {
    mesh: TriMesh,
    nodes: Vec<BvhNode>,
    order: Vec<usize>,
    face_normals: Vec<Vec3>,
}

impl MeshIndex {
    pub fn new(mesh: TriMesh) -> Self {
        let n = mesh.triangle_count();
        let centroids: Vec<Vec3> = (0..n).map(|t| mesh.centroid(t)).collect();
        let boxes: Vec<Aabb> = (0..n).map(|t| Aabb::from_points(&mesh.triangle(t))).collect();
        let face_normals = (0..n).map(|t| mesh.face_normal(t)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        let mut nodes = vec![BvhNode {
            bounds: Aabb::empty(),
            start: 0,
            count: n,
        }];
        let mut stack = vec![(0usize, 0usize, n)];
        while let Some((node, lo, hi)) = stack.pop() {
            let bounds = order[lo..hi]
                .iter()
                .fold(Aabb::empty(), |acc, &t| acc.merge(&boxes[t]));
            nodes[node].bounds = bounds;
            if hi - lo <= LEAF_SIZE {
                nodes[node].start = lo;
                nodes[node].count = hi - lo;
                continue;
            }
            let cb = Aabb::from_points(order[lo..hi].iter().map(|&t| &centroids[t]));
            let e = cb.extent();
            let axis = if e.x >= e.y && e.x >= e.z {
                0
            } else if e.y >= e.z {
                1
            } else {
                2
            };
            let mid = (lo + hi) / 2;
            order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
                centroids[a][axis]
                    .total_cmp(&centroids[b][axis])
                    .then(a.cmp(&b))
            });
            let left = nodes.len();
            nodes.push(BvhNode {
                bounds: Aabb::empty(),
                start: 0,
                count: 0,
            });
            nodes.push(BvhNode {
                bounds: Aabb::empty(),
                start: 0,
                count: 0,
            });
            nodes[node].start = left;
            nodes[node].count = 0;
            stack.push((left, lo, mid));
            stack.push((left + 1, mid, hi));
        }
        MeshIndex {
            mesh,
            nodes,
            order,
            face_normals,
        }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn face_normal(&self, t: usize) -> Vec3 {
        self.face_normals[t]
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    pub fn closest_point(&self, p: Vec3) -> ClosestPoint {
        let mut best = (f64::INFINITY, usize::MAX, p);
        if self.order.is_empty() {
            return ClosestPoint {
                point: p,
                triangle: usize::MAX,
                distance: f64::INFINITY,
            };
        }
        let mut stack: Vec<usize> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            // strict comparison keeps equal-distance subtrees for tie-breaking
            if node.bounds.distance_squared(p) > best.0 {
                continue;
            }
            if node.count > 0 {
                for &t in &self.order[node.start..node.start + node.count] {
                    let [a, b, c] = self.mesh.triangle(t);
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d2 = (p - q).norm_squared();
                    if better(d2, t, best.0, best.1) {
                        best = (d2, t, q);
                    }
                }
            } else {
                let (l, r) = (node.start, node.start + 1);
                let dl = self.nodes[l].bounds.distance_squared(p);
                let dr = self.nodes[r].bounds.distance_squared(p);
                // visit the nearer child first
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        ClosestPoint {
            point: best.2,
            triangle: best.1,
            distance: (p - best.2).norm(),
        }
    }
}
