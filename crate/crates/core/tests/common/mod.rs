//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use palpsim_core::geometry::{TriMesh, Vec3};

fn point_segment_distance(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Point-triangle distance by plane projection plus edge fallback.
pub fn point_triangle_distance(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let n = (b - a).cross(c - a);
    let n2 = n.norm_squared();
    let h = (p - a).dot(n) / n2;
    let q = p - n * h;
    // barycentric inside test via sub-triangle orientation
    let inside = [(a, b), (b, c), (c, a)]
        .iter()
        .all(|&(u, v)| (v - u).cross(q - u).dot(n) >= 0.0);
    if inside {
        return (p - q).norm();
    }
    point_segment_distance(p, a, b)
        .min(point_segment_distance(p, b, c))
        .min(point_segment_distance(p, c, a))
}

pub fn brute_distance_to_mesh(p: Vec3, m: &TriMesh) -> f64 {
    (0..m.triangle_count())
        .map(|t| {
            let [a, b, c] = m.triangle(t);
            point_triangle_distance(p, a, b, c)
        })
        .fold(f64::INFINITY, f64::min)
}

fn surface_samples(m: &TriMesh) -> Vec<Vec3> {
    let mut s = m.vertices().to_vec();
    for t in 0..m.triangle_count() {
        let [a, b, c] = m.triangle(t);
        s.push((a + b + c) / 3.0);
        s.push((a + b) * 0.5);
        s.push((b + c) * 0.5);
        s.push((c + a) * 0.5);
    }
    s
}

/// Symmetric Hausdorff distance estimated on vertices, centroids and edge midpoints.
pub fn hausdorff(a: &TriMesh, b: &TriMesh) -> f64 {
    let ab = surface_samples(a)
        .into_iter()
        .map(|p| brute_distance_to_mesh(p, b))
        .fold(0.0, f64::max);
    let ba = surface_samples(b)
        .into_iter()
        .map(|p| brute_distance_to_mesh(p, a))
        .fold(0.0, f64::max);
    ab.max(ba)
}

/// Textbook greedy farthest-point selection, recomputing every distance.
pub fn greedy_fps_reference(candidates: &[Vec3], first: usize, n: usize) -> Vec<Vec3> {
    let mut chosen = vec![candidates[first]];
    while chosen.len() < n {
        let mut best = None;
        let mut best_d = -1.0;
        for c in candidates {
            let d = chosen
                .iter()
                .map(|s| (*s - *c).norm())
                .fold(f64::INFINITY, f64::min);
            if d > best_d {
                best_d = d;
                best = Some(*c);
            }
        }
        chosen.push(best.unwrap());
    }
    chosen
}

pub fn min_pairwise_distance(points: &[Vec3]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            m = m.min((points[i] - points[j]).norm());
        }
    }
    m
}

/// Union-find connectivity over an undirected edge list.
pub fn connected(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    let r = find(&mut parent, 0);
    (0..n).all(|i| find(&mut parent, i) == r)
}

/// Generalized winding number of a closed mesh around `p` (solid angle sum).
pub fn winding_number(p: Vec3, m: &TriMesh) -> f64 {
    let mut total = 0.0;
    for t in 0..m.triangle_count() {
        let [a, b, c] = m.triangle(t);
        let (a, b, c) = (a - p, b - p, c - p);
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(b.cross(c));
        let den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
        total += 2.0 * num.atan2(den);
    }
    total / (4.0 * std::f64::consts::PI)
}
