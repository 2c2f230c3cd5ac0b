//! Scene graph: a tree of nodes carrying local transforms plus optional
//! geometry, haptic material and visual style.
//!
//! Scenes are values. Mutating operations return a new scene.

use std::collections::BTreeMap;
use std::ops::Mul;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;

/// Rotation quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let a = axis.normalize();
        let (s, c) = (angle * 0.5).sin_cos();
        Quat::new(c, a.x * s, a.y * s, a.z * s)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalize(self) -> Self {
        let n = self.norm();
        Quat::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(self) -> Self {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }
}

impl Mul for Quat {
    type Output = Quat;
    fn mul(self, o: Quat) -> Quat {
        Quat::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

/// Similarity transform applied as scale, then rotation, then translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub translation: Vec3,
    pub rotation: Quat,
    pub scale: f64,
}

impl Default for Transform {
    fn default() -> Self {
        Transform::IDENTITY
    }
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        translation: Vec3::ZERO,
        rotation: Quat::IDENTITY,
        scale: 1.0,
    };

    pub fn from_translation(t: Vec3) -> Self {
        Transform {
            translation: t,
            ..Transform::IDENTITY
        }
    }

    pub fn from_rotation(q: Quat) -> Self {
        Transform {
            rotation: q,
            ..Transform::IDENTITY
        }
    }

    pub fn from_scale(s: f64) -> Self {
        Transform {
            scale: s,
            ..Transform::IDENTITY
        }
    }

    pub fn is_valid(&self) -> bool {
        (self.rotation.norm() - 1.0).abs() <= 1e-9
            && self.scale > 0.0
            && self.scale.is_finite()
            && self.translation.is_finite()
    }

    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        self.translation + self.rotation.rotate(p * self.scale)
    }

    pub fn apply_vector(&self, v: Vec3) -> Vec3 {
        self.rotation.rotate(v * self.scale)
    }

    /// Rotates a direction without scaling (uniform scale keeps normals).
    pub fn apply_direction(&self, d: Vec3) -> Vec3 {
        self.rotation.rotate(d)
    }

    /// `self ∘ inner`: applies `inner` first.
    pub fn compose(&self, inner: &Transform) -> Transform {
        Transform {
            translation: self.translation + self.rotation.rotate(inner.translation * self.scale),
            rotation: self.rotation * inner.rotation,
            scale: self.scale * inner.scale,
        }
    }

    pub fn inverse(&self) -> Transform {
        let r = self.rotation.conjugate();
        let s = 1.0 / self.scale;
        Transform {
            translation: r.rotate(self.translation) * -s,
            rotation: r,
            scale: s,
        }
    }

    /// Row-major homogeneous matrix.
    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let cols = [Vec3::X, Vec3::Y, Vec3::Z].map(|e| self.apply_vector(e));
        let t = self.translation;
        [
            [cols[0].x, cols[1].x, cols[2].x, t.x],
            [cols[0].y, cols[1].y, cols[2].y, t.y],
            [cols[0].z, cols[1].z, cols[2].z, t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }
}

pub type NodeId = String;

/// Penalty-contact material. Contact stiffness comes from the pathology
/// field; the material carries the damping b (N·s/m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HapticMaterial {
    pub damping: f64,
}

/// Reference to a mesh asset by relative path, with an optional triangle budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshRef {
    pub asset: String,
    pub target_triangles: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneNode {
    pub id: NodeId,
    pub local: Transform,
    pub children: Vec<NodeId>,
    pub geometry: Option<MeshRef>,
    pub haptic_material: Option<HapticMaterial>,
    pub visual_material: Option<String>,
}

impl SceneNode {
    pub fn new(id: impl Into<NodeId>) -> Self {
        SceneNode {
            id: id.into(),
            local: Transform::IDENTITY,
            children: Vec::new(),
            geometry: None,
            haptic_material: None,
            visual_material: None,
        }
    }

    pub fn with_transform(mut self, t: Transform) -> Self {
        self.local = t;
        self
    }

    pub fn with_geometry(mut self, g: MeshRef) -> Self {
        self.geometry = Some(g);
        self
    }

    pub fn with_haptic_material(mut self, m: HapticMaterial) -> Self {
        self.haptic_material = Some(m);
        self
    }

    pub fn with_visual_material(mut self, tag: impl Into<String>) -> Self {
        self.visual_material = Some(tag.into());
        self
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("unknown node id {0:?}")]
    UnknownNode(NodeId),
    #[error("duplicate node id {0:?}")]
    DuplicateId(NodeId),
    #[error("node {0:?} has more than one parent")]
    MultipleParents(NodeId),
    #[error("node {0:?} is not reachable from the root")]
    Unreachable(NodeId),
    #[error("root node {0:?} cannot be a child")]
    RootHasParent(NodeId),
    #[error("node {0:?} has an invalid transform")]
    InvalidTransform(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    root: NodeId,
    nodes: BTreeMap<NodeId, SceneNode>,
    parents: BTreeMap<NodeId, NodeId>,
}

impl Scene {
    pub fn new(root: SceneNode) -> Self {
        let id = root.id.clone();
        let mut nodes = BTreeMap::new();
        nodes.insert(id.clone(), SceneNode { children: Vec::new(), ..root });
        Scene {
            root: id,
            nodes,
            parents: BTreeMap::new(),
        }
    }

    /// Builds a scene from a flat node set, checking the tree invariants.
    pub fn from_nodes(root: NodeId, list: Vec<SceneNode>) -> Result<Self, SceneError> {
        let mut nodes = BTreeMap::new();
        for n in list {
            if !n.local.is_valid() {
                return Err(SceneError::InvalidTransform(n.id));
            }
            if let Some(prev) = nodes.insert(n.id.clone(), n) {
                return Err(SceneError::DuplicateId(prev.id));
            }
        }
        if !nodes.contains_key(&root) {
            return Err(SceneError::UnknownNode(root));
        }
        let mut parents = BTreeMap::new();
        for n in nodes.values() {
            for c in &n.children {
                if !nodes.contains_key(c) {
                    return Err(SceneError::UnknownNode(c.clone()));
                }
                if *c == root {
                    return Err(SceneError::RootHasParent(c.clone()));
                }
                if parents.insert(c.clone(), n.id.clone()).is_some() {
                    return Err(SceneError::MultipleParents(c.clone()));
                }
            }
        }
        let scene = Scene { root, nodes, parents };
        // every node reachable from the root rules out cycles among the rest
        let reached = scene.traverse().len();
        if reached != scene.nodes.len() {
            let seen: std::collections::BTreeSet<_> =
                scene.traverse().into_iter().map(|(id, _)| id).collect();
            let missing = scene.nodes.keys().find(|k| !seen.contains(*k)).cloned();
            return Err(SceneError::Unreachable(missing.unwrap_or_default()));
        }
        Ok(scene)
    }

    pub fn root(&self) -> &NodeId {
        &self.root
    }

    pub fn node(&self, id: &str) -> Result<&SceneNode, SceneError> {
        self.nodes
            .get(id)
            .ok_or_else(|| SceneError::UnknownNode(id.to_string()))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &SceneNode> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn parent(&self, id: &str) -> Option<&NodeId> {
        self.parents.get(id)
    }

    /// Returns a new scene with `node` appended as the last child of `parent`.
    pub fn with_child(&self, parent: &str, node: SceneNode) -> Result<Scene, SceneError> {
        if !self.nodes.contains_key(parent) {
            return Err(SceneError::UnknownNode(parent.to_string()));
        }
        if self.nodes.contains_key(&node.id) {
            return Err(SceneError::DuplicateId(node.id));
        }
        if !node.local.is_valid() {
            return Err(SceneError::InvalidTransform(node.id));
        }
        let mut next = self.clone();
        let id = node.id.clone();
        next.nodes.insert(id.clone(), SceneNode { children: Vec::new(), ..node });
        next.nodes.get_mut(parent).expect("checked").children.push(id.clone());
        next.parents.insert(id, parent.to_string());
        Ok(next)
    }

    /// Root-to-node composition of local transforms.
    pub fn world_transform(&self, id: &str) -> Result<Transform, SceneError> {
        let mut chain = vec![self.node(id)?];
        let mut cur = id;
        while let Some(p) = self.parents.get(cur) {
            chain.push(self.node(p)?);
            cur = p;
        }
        Ok(chain
            .iter()
            .rev()
            .fold(Transform::IDENTITY, |acc, n| acc.compose(&n.local)))
    }

    /// Pre-multiplies `delta` onto the node's local transform, moving the
    /// whole subtree with it.
    pub fn apply_group(&self, id: &str, delta: &Transform) -> Result<Scene, SceneError> {
        let mut next = self.clone();
        let node = next
            .nodes
            .get_mut(id)
            .ok_or_else(|| SceneError::UnknownNode(id.to_string()))?;
        node.local = delta.compose(&node.local);
        Ok(next)
    }

    /// Depth-first pre-order walk from the root with world transforms.
    pub fn traverse(&self) -> Vec<(NodeId, Transform)> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let root = &self.nodes[&self.root];
        let mut stack = vec![(root, root.local)];
        while let Some((n, world)) = stack.pop() {
            out.push((n.id.clone(), world));
            for c in n.children.iter().rev() {
                if let Some(child) = self.nodes.get(c) {
                    stack.push((child, world.compose(&child.local)));
                }
            }
            if out.len() > self.nodes.len() {
                break;
            }
        }
        out
    }

    /// Nodes that carry both geometry and a haptic material.
    pub fn palpable_nodes(&self) -> Vec<&SceneNode> {
        self.traverse()
            .into_iter()
            .filter_map(|(id, _)| {
                let n = &self.nodes[&id];
                (n.geometry.is_some() && n.haptic_material.is_some()).then_some(n)
            })
            .collect()
    }
}
