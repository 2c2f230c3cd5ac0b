//! Shortest-edge collapse decimation.
//!
//! Edges are collapsed in order of increasing length to their midpoint. A
//! collapse is rejected when it would break the link condition (making the
//! surface non-manifold), flip any surviving face normal, or leave a
//! degenerate triangle. Ties are ordered by vertex index so the result is
//! deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::mesh::DEGENERATE_AREA;
use super::{GeometryError, TriMesh, Vec3};

/// Smallest closed triangle surface (a tetrahedron).
pub const MIN_TRIANGLES: usize = 4;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    len2: f64,
    a: usize,
    b: usize,
    stamp_a: u32,
    stamp_b: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Candidate {
    // reversed: BinaryHeap is a max-heap and we want the shortest edge first
    fn cmp(&self, o: &Self) -> Ordering {
        o.len2
            .total_cmp(&self.len2)
            .then_with(|| o.a.cmp(&self.a))
            .then_with(|| o.b.cmp(&self.b))
    }
}

struct Collapser {
    pos: Vec<Vec3>,
    tris: Vec<[usize; 3]>,
    tri_alive: Vec<bool>,
    vert_alive: Vec<bool>,
    stamp: Vec<u32>,
    incident: Vec<Vec<usize>>,
    alive_tris: usize,
}

impl Collapser {
    fn new(mesh: &TriMesh) -> Self {
        let n = mesh.vertex_count();
        let mut incident = vec![Vec::new(); n];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            for &v in tri {
                incident[v].push(t);
            }
        }
        Collapser {
            pos: mesh.vertices().to_vec(),
            tris: mesh.triangles().to_vec(),
            tri_alive: vec![true; mesh.triangle_count()],
            vert_alive: vec![true; n],
            stamp: vec![0; n],
            incident,
            alive_tris: mesh.triangle_count(),
        }
    }

    fn candidate(&self, a: usize, b: usize) -> Candidate {
        let (a, b) = (a.min(b), a.max(b));
        Candidate {
            len2: self.pos[a].distance_squared(self.pos[b]),
            a,
            b,
            stamp_a: self.stamp[a],
            stamp_b: self.stamp[b],
        }
    }

    fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.incident[v]
            .iter()
            .flat_map(|&t| self.tris[t])
            .filter(|&u| u != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn push_edges_of(&self, v: usize, heap: &mut BinaryHeap<Candidate>) {
        for u in self.neighbors(v) {
            heap.push(self.candidate(v, u));
        }
    }

    fn seed(&self, heap: &mut BinaryHeap<Candidate>) {
        for (t, tri) in self.tris.iter().enumerate() {
            if !self.tri_alive[t] {
                continue;
            }
            for (u, v) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                // each interior edge appears twice; only seed it once
                if u < v || !self.has_edge_in_other_dir(t, u, v) {
                    heap.push(self.candidate(u, v));
                }
            }
        }
    }

    fn has_edge_in_other_dir(&self, t: usize, u: usize, v: usize) -> bool {
        self.incident[u]
            .iter()
            .any(|&s| s != t && self.tris[s].contains(&v))
    }

    fn try_collapse(&mut self, a: usize, b: usize) -> bool {
        let shared: Vec<usize> = self.incident[a]
            .iter()
            .copied()
            .filter(|t| self.tris[*t].contains(&b))
            .collect();
        if shared.is_empty() {
            return false;
        }
        // link condition: common neighbors are exactly the apexes of shared faces
        let na = self.neighbors(a);
        let nb = self.neighbors(b);
        let common = na.iter().filter(|v| nb.binary_search(v).is_ok()).count();
        if common != shared.len() {
            return false;
        }
        if self.alive_tris - shared.len() < MIN_TRIANGLES {
            return false;
        }
        let mid = (self.pos[a] + self.pos[b]) * 0.5;
        for &v in &[a, b] {
            for &t in &self.incident[v] {
                if shared.contains(&t) {
                    continue;
                }
                let tri = self.tris[t];
                let corners = tri.map(|i| self.pos[i]);
                let moved = tri.map(|i| if i == a || i == b { mid } else { self.pos[i] });
                let n_old = (corners[1] - corners[0]).cross(corners[2] - corners[0]);
                let n_new = (moved[1] - moved[0]).cross(moved[2] - moved[0]);
                if n_old.dot(n_new) <= 0.0 || 0.5 * n_new.norm() <= DEGENERATE_AREA {
                    return false;
                }
            }
        }

        for &t in &shared {
            self.tri_alive[t] = false;
            for v in self.tris[t] {
                self.incident[v].retain(|&s| s != t);
            }
        }
        self.alive_tris -= shared.len();
        let moved = std::mem::take(&mut self.incident[b]);
        for &t in &moved {
            for v in self.tris[t].iter_mut() {
                if *v == b {
                    *v = a;
                }
            }
        }
        self.incident[a].extend(moved);
        self.incident[a].sort_unstable();
        self.pos[a] = mid;
        self.vert_alive[b] = false;
        self.stamp[a] += 1;
        self.stamp[b] += 1;
        true
    }

    fn finish(self) -> Result<TriMesh, GeometryError> {
        let mut remap = vec![usize::MAX; self.pos.len()];
        let mut verts = Vec::new();
        let mut tris = Vec::with_capacity(self.alive_tris);
        for (t, tri) in self.tris.iter().enumerate() {
            if !self.tri_alive[t] {
                continue;
            }
            let mut out = [0; 3];
            for (o, &v) in out.iter_mut().zip(tri) {
                if remap[v] == usize::MAX {
                    remap[v] = verts.len();
                    verts.push(self.pos[v]);
                }
                *o = remap[v];
            }
            tris.push(out);
        }
        TriMesh::new(verts, tris)
    }
}

/// Reduces `mesh` to at most `target_tris` triangles.
///
/// A mesh already within budget is returned unchanged.
pub fn decimate(mesh: &TriMesh, target_tris: usize) -> Result<TriMesh, GeometryError> {
    if target_tris < MIN_TRIANGLES {
        return Err(GeometryError::TargetTooSmall {
            target: target_tris,
            minimum: MIN_TRIANGLES,
        });
    }
    if mesh.triangle_count() <= target_tris {
        return Ok(mesh.clone());
    }
    let mut c = Collapser::new(mesh);
    let mut heap = BinaryHeap::new();
    c.seed(&mut heap);
    loop {
        let mut progressed = false;
        while c.alive_tris > target_tris {
            let Some(cand) = heap.pop() else { break };
            let (a, b) = (cand.a, cand.b);
            if !c.vert_alive[a]
                || !c.vert_alive[b]
                || c.stamp[a] != cand.stamp_a
                || c.stamp[b] != cand.stamp_b
            {
                continue;
            }
            if c.try_collapse(a, b) {
                progressed = true;
                c.push_edges_of(a, &mut heap);
            }
        }
        if c.alive_tris <= target_tris {
            break;
        }
        if !progressed {
            return Err(GeometryError::DecimationStalled {
                reached: c.alive_tris,
                target: target_tris,
            });
        }
        // rejected edges may have become collapsible after their neighborhood moved
        heap.clear();
        c.seed(&mut heap);
    }
    c.finish()
}
