//! Contact queries: probe sphere against the haptic (rest) surface, and
//! sphere-skeleton against sphere-skeleton.

use serde::{Deserialize, Serialize};

use crate::deform::GelSkeleton;
use crate::geometry::{closest_point_on_mesh, Aabb, ClosestPoint, MeshIndex, TriMesh, Vec3};

/// What was touched: an object id and a triangle or node index within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub object: usize,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub point: Vec3,
    /// Unit normal pointing out of the touched object.
    pub normal: Vec3,
    /// Penetration depth (m), never negative.
    pub depth: f64,
    pub feature: Feature,
}

/// Overlap test between two spheres. The normal points from `c2` toward `c1`.
pub fn sphere_sphere(c1: Vec3, r1: f64, c2: Vec3, r2: f64) -> Option<Contact> {
    let d = c1 - c2;
    let dist = d.norm();
    if dist >= r1 + r2 {
        return None;
    }
    let (normal, depth) = match d.try_normalize(0.0) {
        Some(n) => (n, r1 + r2 - dist),
        None => (Vec3::Z, r1 + r2),
    };
    // midpoint of the segment where the two spheres overlap along the normal
    let point = ((c1 - normal * r1) + (c2 + normal * r2)) * 0.5;
    Some(Contact {
        point,
        normal,
        depth,
        feature: Feature { object: 1, index: 0 },
    })
}

/// Node-pair contact between two skeletons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeContact {
    pub a: usize,
    pub b: usize,
    pub contact: Contact,
}

fn skeleton_bounds(s: &GelSkeleton) -> Aabb {
    Aabb::from_points(s.nodes.iter().map(|n| &n.position)).inflate(s.max_radius())
}

/// All overlapping node pairs, sorted by `(a, b)`.
///
/// Broad phase: each skeleton's node box inflated by its largest radius;
/// only nodes of `a` whose sphere box meets `b`'s box are tested.
pub fn skeleton_skeleton(a: &GelSkeleton, b: &GelSkeleton) -> Vec<NodeContact> {
    let (ba, bb) = (skeleton_bounds(a), skeleton_bounds(b));
    if a.nodes.is_empty() || b.nodes.is_empty() || !ba.overlaps(&bb) {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (i, na) in a.nodes.iter().enumerate() {
        let sphere_box = Aabb {
            min: na.position,
            max: na.position,
        }
        .inflate(na.radius);
        if !sphere_box.overlaps(&bb) {
            continue;
        }
        for (j, nb) in b.nodes.iter().enumerate() {
            if let Some(mut c) = sphere_sphere(na.position, na.radius, nb.position, nb.radius) {
                c.feature = Feature { object: 1, index: j };
                out.push(NodeContact { a: i, b: j, contact: c });
            }
        }
    }
    out
}

fn contact_from_closest(center: Vec3, radius: f64, cp: ClosestPoint, face_normal: Vec3) -> Option<Contact> {
    if cp.triangle == usize::MAX {
        return None;
    }
    let side = (center - cp.point).dot(face_normal);
    let depth = if side < 0.0 {
        // center is inside the surface
        radius + cp.distance
    } else if cp.distance < radius {
        radius - cp.distance
    } else {
        return None;
    };
    Some(Contact {
        point: cp.point,
        normal: face_normal,
        depth,
        feature: Feature {
            object: 0,
            index: cp.triangle,
        },
    })
}

/// Probe sphere against a rest surface (exhaustive closest point).
pub fn probe_vs_mesh(center: Vec3, radius: f64, mesh: &TriMesh) -> Option<Contact> {
    let cp = closest_point_on_mesh(center, mesh);
    if cp.triangle == usize::MAX {
        return None;
    }
    contact_from_closest(center, radius, cp, mesh.face_normal(cp.triangle))
}

/// [`probe_vs_mesh`] through a bounding-volume hierarchy; identical results.
pub fn probe_vs_index(center: Vec3, radius: f64, index: &MeshIndex) -> Option<Contact> {
    let cp = index.closest_point(center);
    if cp.triangle == usize::MAX {
        return None;
    }
    contact_from_closest(center, radius, cp, index.face_normal(cp.triangle))
}
