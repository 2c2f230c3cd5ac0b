use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::DeformError;
use crate::geometry::{farthest_point_indices, sample_candidates, TriMesh, Vec3};

/// Semi-implicit Euler substeps per call to [`GelSkeleton::step`].
pub const SUBSTEPS: usize = 16;
/// Mesh vertices bind to this many nearest nodes.
pub const SKIN_NEIGHBORS: usize = 4;
/// Regularizer in the inverse-distance skinning weights (m).
pub const SKIN_EPSILON: f64 = 1e-6;
/// Spring endpoints closer than this are treated as coincident (m).
const COINCIDENT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GelNode {
    pub position: Vec3,
    pub velocity: Vec3,
    pub mass: f64,
    pub radius: f64,
    pub anchored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringLink {
    pub i: usize,
    pub j: usize,
    pub rest_length: f64,
    pub ks: f64,
    pub kd: f64,
}

/// Node weights for one mesh vertex; weights are non-negative and sum to 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SkinBinding {
    pub entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonParams {
    pub nodes: usize,
    pub connectors_per_node: usize,
    pub seed: u64,
    /// Link stiffness (N/m).
    pub ks: f64,
    /// Link damping (N·s/m).
    pub kd: f64,
    /// Mass shared equally by all nodes (kg).
    pub total_mass: f64,
    /// Fraction of the mesh's z extent, from the bottom, whose nodes are anchored.
    pub anchor_band: f64,
    /// Integration period used by the stability guard (s).
    pub dt: f64,
    /// Per-node spring to the build pose; zero disables it.
    pub tether: Tether,
}

/// Damped spring pulling each free node toward its build position.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tether {
    /// N/m
    pub ks: f64,
    /// N·s/m
    pub kd: f64,
}

impl Default for SkeletonParams {
    fn default() -> Self {
        SkeletonParams {
            nodes: 128,
            connectors_per_node: 3,
            seed: 0,
            ks: 300.0,
            kd: 2.0,
            total_mass: 1.45,
            anchor_band: 0.1,
            dt: 1e-3,
            tether: Tether { ks: 50.0, kd: 0.5 },
        }
    }
}

/// Equal and opposite link forces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringForce {
    pub on_i: Vec3,
    pub on_j: Vec3,
    /// Endpoints coincided; the force was zeroed.
    pub singular: bool,
}

/// Damped spring law: with `d = x_j - x_i`, the force on `i` is
/// `[ks(|d| - L0) + kd((v_j - v_i)·d̂)] d̂`.
pub fn spring_force(link: &SpringLink, nodes: &[GelNode]) -> SpringForce {
    let (a, b) = (&nodes[link.i], &nodes[link.j]);
    let d = b.position - a.position;
    let len = d.norm();
    if len <= COINCIDENT {
        return SpringForce {
            on_i: Vec3::ZERO,
            on_j: Vec3::ZERO,
            singular: true,
        };
    }
    let dir = d / len;
    let rel = (b.velocity - a.velocity).dot(dir);
    let f = dir * (link.ks * (len - link.rest_length) + link.kd * rel);
    SpringForce {
        on_i: f,
        on_j: -f,
        singular: false,
    }
}

/// Sphere-node skeleton with damped spring links and mesh skinning.
#[derive(Debug, Clone)]
pub struct GelSkeleton {
    pub nodes: Vec<GelNode>,
    pub links: Vec<SpringLink>,
    pub skinning: Vec<SkinBinding>,
    pub tether: Tether,
    build_positions: Vec<Vec3>,
    scratch: Vec<Vec3>,
    singular_links: usize,
}

impl PartialEq for GelSkeleton {
    fn eq(&self, o: &Self) -> bool {
        self.nodes == o.nodes
            && self.links == o.links
            && self.skinning == o.skinning
            && self.tether == o.tether
            && self.build_positions == o.build_positions
    }
}

impl GelSkeleton {
    /// Assembles a skeleton from explicit nodes and links, checking the
    /// per-element invariants. Structural checks (connectivity, degree) live
    /// in [`GelSkeleton::structure_violations`].
    pub fn from_parts(nodes: Vec<GelNode>, links: Vec<SpringLink>) -> Result<Self, DeformError> {
        for (i, n) in nodes.iter().enumerate() {
            if !(n.radius > 0.0) || (!n.anchored && !(n.mass > 0.0)) {
                return Err(DeformError::InvalidParameter(format!(
                    "node {i}: radius and (unless anchored) mass must be positive"
                )));
            }
        }
        for (k, l) in links.iter().enumerate() {
            if l.i == l.j || l.i >= nodes.len() || l.j >= nodes.len() {
                return Err(DeformError::InvalidParameter(format!("link {k}: bad endpoints")));
            }
            if !(l.rest_length > 0.0 && l.ks > 0.0 && l.kd >= 0.0) {
                return Err(DeformError::InvalidParameter(format!(
                    "link {k}: need L0 > 0, ks > 0, kd >= 0"
                )));
            }
        }
        let build_positions = nodes.iter().map(|n| n.position).collect();
        let scratch = vec![Vec3::ZERO; nodes.len()];
        Ok(GelSkeleton {
            nodes,
            links,
            skinning: Vec::new(),
            tether: Tether::default(),
            build_positions,
            scratch,
            singular_links: 0,
        })
    }

    pub fn build_positions(&self) -> &[Vec3] {
        &self.build_positions
    }

    /// Links that hit the coincident-endpoint guard during the last step.
    pub fn singular_links(&self) -> usize {
        self.singular_links
    }

    pub fn max_radius(&self) -> f64 {
        self.nodes.iter().map(|n| n.radius).fold(0.0, f64::max)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for l in &self.links {
            deg[l.i] += 1;
            deg[l.j] += 1;
        }
        deg
    }

    /// Describes every broken structural invariant (empty when valid).
    pub fn structure_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let deg = self.degrees();
        for (i, n) in self.nodes.iter().enumerate() {
            if !n.anchored && deg[i] < 3 {
                out.push(format!("node {i} has only {} links", deg[i]));
            }
        }
        if components(self.nodes.len(), &self.links).len() > 1 {
            out.push("link graph is disconnected".into());
        }
        for (v, b) in self.skinning.iter().enumerate() {
            let sum: f64 = b.entries.iter().map(|e| e.1).sum();
            if b.entries.len() != SKIN_NEIGHBORS.min(self.nodes.len())
                || (sum - 1.0).abs() > 1e-9
                || b.entries.iter().any(|e| e.1 < 0.0)
            {
                out.push(format!("vertex {v} has invalid skinning"));
            }
        }
        out
    }

    /// Kinetic energy plus elastic link and tether energy (J).
    pub fn energy(&self) -> f64 {
        let kinetic: f64 = self
            .nodes
            .iter()
            .filter(|n| !n.anchored)
            .map(|n| 0.5 * n.mass * n.velocity.norm_squared())
            .sum();
        let elastic: f64 = self
            .links
            .iter()
            .map(|l| {
                let e = self.nodes[l.i].position.distance(self.nodes[l.j].position) - l.rest_length;
                0.5 * l.ks * e * e
            })
            .sum();
        let tether: f64 = self
            .nodes
            .iter()
            .zip(&self.build_positions)
            .filter(|(n, _)| !n.anchored)
            .map(|(n, &p)| 0.5 * self.tether.ks * n.position.distance_squared(p))
            .sum();
        kinetic + elastic + tether
    }

    pub fn momentum(&self) -> Vec3 {
        self.nodes.iter().map(|n| n.velocity * n.mass).sum()
    }

    /// Restores the build pose with zero velocity.
    pub fn reset(&mut self) {
        for (n, &p) in self.nodes.iter_mut().zip(&self.build_positions) {
            n.position = p;
            n.velocity = Vec3::ZERO;
        }
    }

    /// Advances one period `dt` with semi-implicit Euler (velocity first,
    /// then position) in [`SUBSTEPS`] equal substeps. `external` holds one
    /// force per node and is applied unchanged over the period. Anchored
    /// nodes never move.
    pub fn step(&mut self, dt: f64, external: &[Vec3], gravity: Vec3) -> Result<(), DeformError> {
        if !(dt > 0.0) {
            return Err(DeformError::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if external.len() != self.nodes.len() {
            return Err(DeformError::InvalidParameter(format!(
                "expected {} external forces, got {}",
                self.nodes.len(),
                external.len()
            )));
        }
        if let Some(i) = external.iter().position(|f| !f.is_finite()) {
            return Err(DeformError::NonFiniteForce(i));
        }
        let h = dt / SUBSTEPS as f64;
        self.singular_links = 0;
        for _ in 0..SUBSTEPS {
            self.scratch.copy_from_slice(external);
            for l in &self.links {
                let f = spring_force(l, &self.nodes);
                if f.singular {
                    self.singular_links += 1;
                }
                self.scratch[l.i] += f.on_i;
                self.scratch[l.j] += f.on_j;
            }
            let tether = self.tether;
            for ((n, f), &p0) in self.nodes.iter_mut().zip(&self.scratch).zip(&self.build_positions) {
                if n.anchored {
                    continue;
                }
                let pull = (p0 - n.position) * tether.ks - n.velocity * tether.kd;
                n.velocity += ((*f + pull) / n.mass + gravity) * h;
                n.position += n.velocity * h;
            }
        }
        if let Some(i) = self.nodes.iter().position(|n| !n.position.is_finite() || !n.velocity.is_finite()) {
            return Err(DeformError::NonFiniteForce(i));
        }
        Ok(())
    }

    /// Pure form of [`GelSkeleton::step`].
    pub fn stepped(&self, dt: f64, external: &[Vec3], gravity: Vec3) -> Result<GelSkeleton, DeformError> {
        let mut next = self.clone();
        next.step(dt, external, gravity)?;
        Ok(next)
    }

    /// Binds every vertex of `mesh` to its nearest nodes (build pose).
    pub fn bind(&mut self, mesh: &TriMesh) {
        let k = SKIN_NEIGHBORS.min(self.nodes.len());
        self.skinning = mesh
            .vertices()
            .iter()
            .map(|&v| {
                let mut near: Vec<(f64, usize)> = self
                    .build_positions
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (v.distance(*p), i))
                    .collect();
                near.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                near.truncate(k);
                near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let raw: Vec<(usize, f64)> = near
                    .iter()
                    .map(|&(d, i)| (i, 1.0 / (SKIN_EPSILON + d)))
                    .collect();
                let total: f64 = raw.iter().map(|e| e.1).sum();
                SkinBinding {
                    entries: raw.into_iter().map(|(i, w)| (i, w / total)).collect(),
                }
            })
            .collect();
    }

    /// Deformed copy of `rest_mesh`: each vertex moves by the weighted
    /// displacement of its bound nodes.
    pub fn skin_mesh(&self, rest_mesh: &TriMesh) -> TriMesh {
        rest_mesh.with_vertices(self.skinned_vertices(rest_mesh))
    }

    pub fn skinned_vertices(&self, rest_mesh: &TriMesh) -> Vec<Vec3> {
        rest_mesh
            .vertices()
            .iter()
            .zip(&self.skinning)
            .map(|(&v, b)| {
                let mut out = v;
                for &(i, w) in &b.entries {
                    out += (self.nodes[i].position - self.build_positions[i]) * w;
                }
                out
            })
            .collect()
    }
}

fn components(n: usize, links: &[SpringLink]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for l in links {
        let (a, b) = (find(&mut parent, l.i), find(&mut parent, l.j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Builds a skeleton over `mesh`: farthest-point node placement, links to the
/// `connectors_per_node` nearest nodes, connectivity repair, anchoring of the
/// lowest z band, and skinning of the mesh vertices.
pub fn build_skeleton(mesh: &TriMesh, params: &SkeletonParams) -> Result<GelSkeleton, DeformError> {
    let n = params.nodes;
    if n < 4 {
        return Err(DeformError::TooFewNodes(n));
    }
    let t = params.tether;
    if !(params.ks > 0.0 && params.kd >= 0.0 && params.total_mass > 0.0 && t.ks >= 0.0 && t.kd >= 0.0) {
        return Err(DeformError::InvalidParameter(
            "ks, total mass must be positive; kd and tether gains >= 0".into(),
        ));
    }
    if params.connectors_per_node == 0 || params.connectors_per_node >= n {
        return Err(DeformError::InvalidParameter(format!(
            "connectors per node must be in 1..{n}"
        )));
    }
    let mass = params.total_mass / n as f64;
    let ratio = params.dt * (params.ks.max(t.ks) / mass).sqrt();
    if ratio > 1.0 {
        return Err(DeformError::Stability {
            ratio,
            ks: params.ks,
            mass,
        });
    }

    let candidates = sample_candidates(mesh);
    let positions: Vec<Vec3> = farthest_point_indices(&candidates, n, params.seed)?
        .into_iter()
        .map(|i| candidates[i])
        .collect();

    let mut pairs = BTreeSet::new();
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (positions[i].distance_squared(positions[j]), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in others.iter().take(params.connectors_per_node) {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let make_link = |(i, j): (usize, usize)| SpringLink {
        i,
        j,
        rest_length: positions[i].distance(positions[j]),
        ks: params.ks,
        kd: params.kd,
    };
    let mut links: Vec<SpringLink> = pairs.iter().copied().map(make_link).collect();

    loop {
        let comps = components(n, &links);
        if comps.len() <= 1 {
            break;
        }
        let mut label = vec![0; n];
        for (c, members) in comps.iter().enumerate() {
            for &m in members {
                label[m] = c;
            }
        }
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..n {
            for j in i + 1..n {
                if label[i] != label[j] {
                    let d = positions[i].distance_squared(positions[j]);
                    if d < best.0 {
                        best = (d, i, j);
                    }
                }
            }
        }
        links.push(make_link((best.1, best.2)));
    }

    let bounds = mesh.aabb();
    let anchor_below = bounds.min.z + params.anchor_band * bounds.extent().z;
    let mut min_incident = vec![f64::INFINITY; n];
    for l in &links {
        min_incident[l.i] = min_incident[l.i].min(l.rest_length);
        min_incident[l.j] = min_incident[l.j].min(l.rest_length);
    }
    let nodes = positions
        .iter()
        .zip(&min_incident)
        .map(|(&p, &l0)| GelNode {
            position: p,
            velocity: Vec3::ZERO,
            mass,
            radius: 0.5 * l0,
            anchored: p.z < anchor_below,
        })
        .collect();
    let mut skel = GelSkeleton::from_parts(nodes, links)?;
    skel.tether = t;
    skel.bind(mesh);
    Ok(skel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tetrahedron;

    fn free_node(p: Vec3) -> GelNode {
        GelNode {
            position: p,
            velocity: Vec3::ZERO,
            mass: 0.01,
            radius: 0.001,
            anchored: false,
        }
    }

    #[test]
    fn rest_length_gives_zero_force() {
        let nodes = [free_node(Vec3::ZERO), free_node(Vec3::new(0.1, 0.0, 0.0))];
        let link = SpringLink {
            i: 0,
            j: 1,
            rest_length: 0.1,
            ks: 100.0,
            kd: 1.0,
        };
        let f = spring_force(&link, &nodes);
        assert_eq!(f.on_i, Vec3::ZERO);
        assert_eq!(f.on_j, Vec3::ZERO);
    }

    #[test]
    fn stretched_spring_pulls_two_newtons() {
        let nodes = [free_node(Vec3::ZERO), free_node(Vec3::new(0.0, 0.12, 0.0))];
        let link = SpringLink {
            i: 0,
            j: 1,
            rest_length: 0.1,
            ks: 100.0,
            kd: 5.0,
        };
        let f = spring_force(&link, &nodes);
        assert!((f.on_i - Vec3::new(0.0, 2.0, 0.0)).norm() < 1e-12);
        assert_eq!(f.on_j, -f.on_i);
    }

    #[test]
    fn coincident_endpoints_flagged() {
        let nodes = [free_node(Vec3::X), free_node(Vec3::X)];
        let link = SpringLink {
            i: 0,
            j: 1,
            rest_length: 0.1,
            ks: 100.0,
            kd: 0.0,
        };
        let f = spring_force(&link, &nodes);
        assert!(f.singular);
        assert_eq!(f.on_i, Vec3::ZERO);
    }

    #[test]
    fn tetrahedron_skeleton_is_complete_graph() {
        let tet = tetrahedron(0.05);
        // candidates are 4 vertices then 4 centroids; start from a vertex and
        // farthest-point picks the remaining vertices
        let seed = (0..).find(|&s| crate::geometry::seed_candidate(s, 8) < 4).unwrap();
        let skel = build_skeleton(
            &tet,
            &SkeletonParams {
                nodes: 4,
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(skel.nodes.len(), 4);
        assert_eq!(skel.links.len(), 6);
        assert!(skel.degrees().iter().all(|&d| d == 3));
        let mut placed: Vec<[u64; 3]> = skel
            .nodes
            .iter()
            .map(|n| n.position.to_array().map(f64::to_bits))
            .collect();
        let mut verts: Vec<[u64; 3]> = tet.vertices().iter().map(|v| v.to_array().map(f64::to_bits)).collect();
        placed.sort();
        verts.sort();
        assert_eq!(placed, verts);
    }

    #[test]
    fn stability_guard_rejects_stiff_light_nodes() {
        let params = SkeletonParams {
            ks: 1e6,
            total_mass: 0.01,
            ..Default::default()
        };
        assert!(matches!(
            build_skeleton(&tetrahedron(0.05), &params),
            Err(DeformError::Stability { .. })
        ));
    }

    #[test]
    fn equilibrium_is_unchanged() {
        let skel = build_skeleton(
            &tetrahedron(0.05),
            &SkeletonParams {
                nodes: 4,
                anchor_band: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        let next = skel.stepped(1e-3, &[Vec3::ZERO; 4], Vec3::ZERO).unwrap();
        assert_eq!(next.nodes, skel.nodes);
    }

    #[test]
    fn non_finite_external_force_rejected() {
        let mut skel = build_skeleton(
            &tetrahedron(0.05),
            &SkeletonParams {
                nodes: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let mut ext = [Vec3::ZERO; 4];
        ext[2] = Vec3::new(f64::NAN, 0.0, 0.0);
        assert!(matches!(
            skel.step(1e-3, &ext, Vec3::ZERO),
            Err(DeformError::NonFiniteForce(2))
        ));
    }
}
